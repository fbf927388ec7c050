import numpy as np
import pytest

from sdft.data import (DatasetFormatError, RingSpec, format_dataset, gen_limited_target, gen_ring,
                       load_dataset, parse_dataset, save_dataset)
from sdft.metrics import mode_centers


def test_ring_counts_and_determinism():
    ds = gen_ring(8, 1.0, 0.05, 8000, seed=0)
    assert np.bincount(ds.mode_labels).tolist() == [1000] * 8
    again = gen_ring(8, 1.0, 0.05, 8000, seed=0)
    assert ds.points.tobytes() == again.points.tobytes()
    assert not np.array_equal(ds.points, gen_ring(8, 1.0, 0.05, 8000, seed=1).points)


def test_ring_mode_means_within_three_standard_errors():
    ds = gen_ring(8, 1.0, 0.05, 8000, seed=3)
    centers = mode_centers(ds.mode_table)
    tol = 3 * 0.05 / np.sqrt(1000)
    for j in range(8):
        mean = ds.points[ds.mode_labels == j].mean(axis=0)
        assert np.all(np.abs(mean - centers[j]) < tol)


def test_ring_invariants():
    ds = gen_ring(8, 1.0, 0.05, 8000, seed=0)
    angles = ds.mode_table[:, 0]
    assert np.all(np.diff(angles) > 0) and angles[0] >= 0 and angles[-1] < 2 * np.pi
    d = np.linalg.norm(ds.points - mode_centers(ds.mode_table)[ds.mode_labels], axis=1)
    assert np.all(d < 6 * 0.05)


def test_ring_errors():
    with pytest.raises(ValueError):
        gen_ring(8, 1.0, 0.05, 7)
    with pytest.raises(ValueError):
        gen_ring(0, 1.0, 0.05, 10)
    with pytest.raises(ValueError):
        gen_ring(8, 1.0, 0.0, 100)


def test_limited_target_construction():
    ds = gen_limited_target(RingSpec(8, 1.0, 0.05), 2.0, {0, 1, 2}, 600, seed=1)
    assert ds.n_modes == 3 and len(ds.points) == 600
    np.testing.assert_allclose(ds.mode_table[:, 0], 2 * np.pi * np.arange(3) / 8)
    assert np.all(ds.mode_table[:, 1] == 2.0)
    r = np.hypot(*ds.points.T)
    assert abs(np.median(r) - 2.0) < 0.02
    assert ds.domain_tag == "target"


def test_limited_target_keep_all_changes_only_radius():
    src = gen_ring(8, 1.0, 0.05, 800, seed=0)
    trg = gen_limited_target(RingSpec(8, 1.0, 0.05), 2.0, range(8), 800, seed=0)
    np.testing.assert_array_equal(trg.mode_table[:, 0], src.mode_table[:, 0])
    np.testing.assert_array_equal(trg.mode_table[:, 2], src.mode_table[:, 2])
    assert np.all(trg.mode_table[:, 1] == 2.0)


def test_limited_target_errors():
    with pytest.raises(ValueError):
        gen_limited_target(keep_modes=())
    with pytest.raises(ValueError):
        gen_limited_target(keep_modes=(9,))


def test_default_benchmark_separable():
    for ds in (gen_ring(), gen_limited_target()):
        d = np.linalg.norm(ds.points[:, None, :] - mode_centers(ds.mode_table)[None], axis=2)
        assert np.array_equal(d.argmin(axis=1), ds.mode_labels)


def test_round_trip_bitwise(tmp_path):
    ds = gen_limited_target(n_points=50)
    path = tmp_path / "t.txt"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert back.points.tobytes() == ds.points.tobytes()
    assert np.array_equal(back.mode_labels, ds.mode_labels)
    assert back.mode_table.tobytes() == ds.mode_table.tobytes()
    assert back.domain_tag == "target"
    assert format_dataset(back) == path.read_text()


def test_truncated_file_rejected():
    text = format_dataset(gen_ring(n_points=40))
    lines = text.splitlines(keepends=True)
    with pytest.raises(DatasetFormatError, match="truncated"):
        parse_dataset("".join(lines[:-3]))
    with pytest.raises(DatasetFormatError, match="line"):
        parse_dataset(text[: len(text) - 9])


def test_version_mismatch_rejected():
    text = format_dataset(gen_ring(n_points=16)).replace("SDFT-DATA v1", "SDFT-DATA v2", 1)
    with pytest.raises(DatasetFormatError, match="version 'v2'"):
        parse_dataset(text)


def test_malformed_line_number_reported():
    lines = format_dataset(gen_ring(n_points=16)).splitlines()
    lines[7] = "pt 0.1 oops 0"
    with pytest.raises(DatasetFormatError, match="line 8"):
        parse_dataset("\n".join(lines) + "\n")
