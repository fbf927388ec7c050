import numpy as np
import pytest

from sdft.data import gen_ring
from sdft.metrics import mode_coverage
from sdft.model import init_model
from sdft.samplers import (SamplerSpec, TranslationSpec, aligned_pair, ancestral_step, ddim_step,
                           ddim_timesteps, initial_noise, run_ddim, sample, sdedit_translate)
from sdft.schedule import make_schedule
from sdft.train import TrainConfig, forward_perturb, run_training


@pytest.fixture(scope="session")
def ring_model(linear_schedule):
    model, _ = run_training("scratch", gen_ring(), linear_schedule,
                            train_cfg=TrainConfig(iterations=2500, eval_every=500, seed=1),
                            model_dims={"hidden_dims": (64, 64)})
    return model


def zero_eps(x, t):
    return np.zeros_like(x)


def test_ancestral_last_step_is_noise_free(linear_schedule):
    m = init_model(seed=0)
    x = np.random.default_rng(0).normal(size=(5, 2))
    a = ancestral_step(m, x, 1, linear_schedule, np.random.default_rng(1))
    b = ancestral_step(m, x, 1, linear_schedule, np.random.default_rng(2))
    assert np.array_equal(a, b)


def test_ancestral_zero_eps_tiny_beta_is_near_identity():
    s = make_schedule("linear", 10, 1e-10, 1e-9)
    x = np.array([[0.4, -0.3]])
    out = ancestral_step(zero_eps, x, 5, s, np.random.default_rng(0))
    np.testing.assert_allclose(out, x, atol=1e-4)


def test_ancestral_seeded_reproducible(linear_schedule):
    m = init_model(seed=0)
    spec = SamplerSpec("ancestral", 40, 30, seed=3)
    assert sample(m, spec, linear_schedule, 8).tobytes() == sample(m, spec, linear_schedule, 8).tobytes()


def test_ddim_inversion_with_oracle_eps(linear_schedule):
    s = linear_schedule
    rng = np.random.default_rng(4)
    x0 = rng.normal(size=(20, 2))
    eps = rng.normal(size=(20, 2))
    for t in (1, 250, 999):
        xt = forward_perturb(x0, t, eps, s)
        rec = ddim_step(lambda x, tt: eps, xt, t, 0, s)
        np.testing.assert_allclose(rec, x0, atol=1e-9)


def test_ddim_identity_and_order(linear_schedule):
    x = np.ones((2, 2))
    assert np.array_equal(ddim_step(zero_eps, x, 10, 10, linear_schedule), x)
    with pytest.raises(ValueError):
        ddim_step(zero_eps, x, 10, 20, linear_schedule)


def test_ddim_full_chain_deterministic(linear_schedule):
    m = init_model(seed=1)
    x = initial_noise(0, 16, 2)
    a = run_ddim(m, x, 1000, 40, linear_schedule)
    assert a.tobytes() == run_ddim(m, x, 1000, 40, linear_schedule).tobytes()


def test_ddim_zero_eps_closed_form(linear_schedule):
    s = linear_schedule
    x = initial_noise(1, 10, 2)
    for start in (1000, 640, 3):
        out = run_ddim(zero_eps, x, start, 40, s)
        # each step rescales by sqrt(abar_prev / abar_t); the product telescopes
        direct = x.copy()
        ts = ddim_timesteps(start, 40)
        for t, tp in zip(ts, ts[1:] + [0]):
            ab_prev = 1.0 if tp == 0 else s.alpha_bar[tp - 1]
            direct = direct * np.sqrt(ab_prev / s.alpha_bar[t - 1])
        np.testing.assert_allclose(out, direct, rtol=1e-12)
        np.testing.assert_allclose(out, x / np.sqrt(s.alpha_bar[start - 1]), rtol=1e-10)


def test_ddim_timesteps():
    ts = ddim_timesteps(1000, 40)
    assert len(ts) == 40 and ts[0] == 1000 and ts[-1] == 1
    assert all(a > b for a, b in zip(ts, ts[1:]))
    assert ddim_timesteps(3, 40) == [3, 2, 1]


def test_default_spec_is_40_step_ddim():
    spec = SamplerSpec()
    assert (spec.kind, spec.num_steps) == ("ddim", 40)


def test_invalid_spec(linear_schedule):
    m = init_model(seed=0)
    for bad in (SamplerSpec("euler"), SamplerSpec(num_steps=0), SamplerSpec(start_t=1001)):
        with pytest.raises(ValueError):
            sample(m, bad, linear_schedule, 4)


def test_partial_with_full_start_matches_full(linear_schedule):
    m = init_model(seed=2)
    full = sample(m, SamplerSpec(seed=5), linear_schedule, 32)
    part = sample(m, SamplerSpec(start_t=1000, seed=5), linear_schedule, 32)
    assert full.tobytes() == part.tobytes()


def test_partial_reverse_from_three_quarters_still_hits_data(ring_model, linear_schedule):
    out = sample(ring_model, SamplerSpec(start_t=750, seed=0), linear_schedule, 2000)
    cov, _ = mode_coverage(out, gen_ring().mode_table, 0.2)
    assert cov > 0


def test_translate_zero_fraction_is_identity(ring_model, linear_schedule):
    x = gen_ring(n_points=64).points
    out = sdedit_translate(ring_model, x, TranslationSpec(0.0), linear_schedule, np.random.default_rng(0))
    assert np.array_equal(out, x)


def test_translate_full_fraction_forgets_input(ring_model, linear_schedule):
    x = gen_ring(n_points=1000, seed=5).points
    out = sdedit_translate(ring_model, x, TranslationSpec(1.0), linear_schedule, np.random.default_rng(0))
    a_in = np.arctan2(x[:, 1], x[:, 0])
    a_out = np.arctan2(out[:, 1], out[:, 0])
    # circular correlation through the unit-vector components
    c = np.corrcoef(np.cos(a_in), np.cos(a_out))[0, 1]
    s = np.corrcoef(np.sin(a_in), np.sin(a_out))[0, 1]
    assert abs(c) < 0.1 and abs(s) < 0.1


def test_translation_spec_bounds():
    with pytest.raises(ValueError):
        TranslationSpec(1.5)


def test_aligned_pair_identical_models(ring_model, linear_schedule):
    a, b = aligned_pair(ring_model, ring_model, SamplerSpec(), linear_schedule, 64, seed=3)
    assert a.tobytes() == b.tobytes()
    a2, _ = aligned_pair(ring_model, ring_model, SamplerSpec(), linear_schedule, 64, seed=3)
    assert a.tobytes() == a2.tobytes()
    with pytest.raises(ValueError):
        aligned_pair(ring_model, init_model(3, (4,), 2), SamplerSpec(), linear_schedule, 4)
