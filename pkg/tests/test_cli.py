import json

import pytest

from sdft.cli import main
from sdft.data import load_dataset
from sdft.io import load_checkpoint, parse_points_csv


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({
        "model": {"hidden_dims": [16, 16], "time_embed_dim": 8},
        "train": {"iterations": 20, "eval_every": 10, "batch_size": 32},
        "schedule": {"T": 100, "beta_start": 1e-3, "beta_end": 0.1},
    }))
    return path


def test_weights_subcommand(tmp_path):
    out = tmp_path / "w.csv"
    assert main(["weights", "--scheme", "sdft", "--gamma", "3", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,beta,alpha_bar,snr,weight"
    assert len(lines) == 1001


def test_usage_errors_exit_1(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["weights", "--no-such-flag"]) == 1
    assert main([]) == 1


def test_runtime_error_exit_2(tmp_path):
    assert main(["plot", "--in", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o.svg")]) == 2


def test_translate_and_sample_defaults():
    from sdft.cli import build_parser
    p = build_parser()
    args = p.parse_args(["translate", "--ckpt", "c", "--in", "i", "--out", "o"])
    assert args.t0_frac == 0.5 and args.steps == 40
    args = p.parse_args(["sample", "--ckpt", "c", "--out", "o"])
    assert args.steps == 40 and args.sampler == "ddim"


def test_pipeline_end_to_end(tmp_path, tiny_config):
    d = tmp_path
    cfg = str(tiny_config)
    assert main(["gen-data", "--domain", "source", "--out", str(d / "src.txt"), "--config", cfg]) == 0
    assert main(["gen-data", "--domain", "target", "--out", str(d / "trg.txt"),
                 "--csv", str(d / "trg.csv"), "--config", cfg]) == 0
    assert load_dataset(d / "trg.txt").n_modes == 3

    assert main(["train", "--mode", "naive", "--data", str(d / "trg.txt"), "--out", str(d / "x.ckpt"),
                 "--config", cfg]) == 1  # missing --source
    assert main(["train", "--mode", "scratch", "--data", str(d / "src.txt"), "--out", str(d / "src.ckpt"),
                 "--config", cfg, "--log", str(d / "src_log.csv"),
                 "--config-out", str(d / "eff.json")]) == 0
    assert load_checkpoint(d / "src.ckpt").iteration == 20
    assert (d / "src_log.csv").read_text().startswith("iteration,loss_diffusion,loss_distill,loss_aux,loss_total\n")
    assert json.loads((d / "eff.json").read_text())["train"]["iterations"] == 20

    assert main(["train", "--mode", "sdft", "--data", str(d / "trg.txt"), "--source", str(d / "src.ckpt"),
                 "--out", str(d / "sdft.ckpt"), "--config", cfg, "--preset", "high-gamma"]) == 0
    assert load_checkpoint(d / "sdft.ckpt").mode == "sdft"

    for name in ("a", "b"):
        assert main(["sample", "--ckpt", str(d / "sdft.ckpt"), "--out", str(d / f"{name}.csv"),
                     "--n", "50", "--steps", "10", "--seed", "3"]) == 0
    assert (d / "a.csv").read_bytes() == (d / "b.csv").read_bytes()
    assert main(["sample", "--ckpt", str(d / "sdft.ckpt"), "--out", str(d / "anc.csv"), "--n", "10",
                 "--sampler", "ancestral", "--start-t", "50"]) == 0

    assert main(["translate", "--ckpt", str(d / "sdft.ckpt"), "--in", str(d / "trg.csv"),
                 "--out", str(d / "tr.csv"), "--t0-frac", "0.3"]) == 0
    pts, modes = parse_points_csv((d / "tr.csv").read_text())
    assert pts.shape == (600, 2) and modes is not None

    assert main(["eval", "--metric", "coverage", "--samples", str(d / "a.csv"),
                 "--reference", str(d / "src.txt"), "--angular", "--capture", "0.4",
                 "--out", str(d / "cov.txt"), "--csv-out", str(d / "cov.csv")]) == 0
    assert "coverage:" in (d / "cov.txt").read_text()
    assert main(["eval", "--metric", "mmd", "--samples", str(d / "a.csv"),
                 "--reference", str(d / "src.txt"), "--out", str(d / "mmd.txt")]) == 0
    assert main(["eval", "--metric", "faithfulness", "--samples", str(d / "tr.csv"),
                 "--inputs", str(d / "trg.csv"), "--out", str(d / "f.txt")]) == 0
    assert main(["eval", "--metric", "alignment", "--samples", str(d / "a.csv"),
                 "--inputs", str(d / "b.csv"), "--out", str(d / "al.txt")]) == 0
    assert "alignment_median: 0" in (d / "al.txt").read_text()
    assert main(["eval", "--metric", "alignment", "--samples", str(d / "a.csv")]) == 1

    assert main(["plot", "--in", str(d / "trg.csv"), "--out", str(d / "trg.svg")]) == 0
    assert (d / "trg.svg").read_text().count('class="mode-') == 3


def test_train_is_reproducible(tmp_path, tiny_config):
    d = tmp_path
    cfg = str(tiny_config)
    main(["gen-data", "--out", str(d / "src.txt"), "--config", cfg, "--n", "400"])
    for name in ("a", "b"):
        assert main(["train", "--mode", "scratch", "--data", str(d / "src.txt"),
                     "--out", str(d / f"{name}.ckpt"), "--log", str(d / f"{name}.csv"),
                     "--config", cfg]) == 0
    assert (d / "a.ckpt").read_bytes() == (d / "b.ckpt").read_bytes()
    assert (d / "a.csv").read_bytes() == (d / "b.csv").read_bytes()
