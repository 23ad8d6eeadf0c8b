import numpy as np
import pytest

from risaccess.channels import make_scene
from risaccess.config import ConfigError
from risaccess.model import (
    ActivityPattern, derive_rng, derive_seed, generate_pilots, noise_power_for_snr, sample_activity,
    synthesize_observation,
)


def test_activity_mean_full_scale():
    # 1000 devices at 0.08 activity: 80 active on average
    counts = [sample_activity(1000, 0.08, np.random.default_rng(s)).support.size for s in range(200)]
    assert abs(np.mean(counts) - 80) < 3 * np.sqrt(1000 * 0.08 * 0.92 / 200)


def test_activity_empirical_fraction():
    fr = [sample_activity(10_000, 0.08, np.random.default_rng(s)).support.size / 10_000 for s in range(50)]
    assert 0.075 <= np.mean(fr) <= 0.085


def test_activity_degenerate_probability():
    a = sample_activity(5, 1e-12, np.random.default_rng(0))
    assert not a.alpha.any()
    assert a.support.size == 0


def test_support_matches_alpha():
    a = ActivityPattern(np.array([0, 1, 1, 0, 1]))
    assert a.support.tolist() == [1, 2, 4]
    assert a.K == 5


@pytest.mark.parametrize("K, lam", [(0, 0.1), (5, 0.0), (5, 1.0)])
def test_activity_rejects_bad_arguments(K, lam):
    with pytest.raises(ConfigError):
        sample_activity(K, lam, np.random.default_rng(0))


def test_pilot_norm_concentrates():
    Q = generate_pilots(2000, 100, np.random.default_rng(1))
    assert 0.98 <= np.mean(np.sum(np.abs(Q) ** 2, axis=1)) <= 1.02


def test_single_sample_pilot_variance():
    Q = generate_pilots(20_000, 1, np.random.default_rng(2))
    assert np.var(Q) == pytest.approx(1.0, rel=0.03)


def test_zero_signal_noiseless_observation():
    Y = synthesize_observation(np.ones((3, 4)), np.zeros((4, 5)), np.ones((5, 6)), 0.0, np.random.default_rng(0))
    assert np.all(Y == 0)


def test_single_device_rank_one():
    rng = np.random.default_rng(3)
    G = np.outer(rng.normal(size=6), rng.normal(size=4)).astype(complex)
    X = np.zeros((4, 7), complex)
    X[:, 2] = rng.normal(size=4)
    Y = synthesize_observation(G, X, generate_pilots(7, 9, rng), 0.0, rng)
    sv = np.linalg.svd(Y, compute_uv=False)
    assert sv[0] > 0 and np.all(sv[1:] < 1e-12 * sv[0])


def test_noise_only_variance():
    Y = synthesize_observation(np.zeros((40, 4)), np.zeros((4, 5)), np.zeros((5, 250)), 1e-2,
                               np.random.default_rng(4))
    assert np.var(Y) == pytest.approx(1e-2, rel=0.1)


def test_observation_dimension_check():
    with pytest.raises(ValueError):
        synthesize_observation(np.ones((3, 4)), np.ones((5, 2)), np.ones((2, 2)), 0.0, np.random.default_rng(0))


def test_noise_power_for_snr():
    Z = np.ones((4, 5))
    assert noise_power_for_snr(Z, 10.0) == pytest.approx(0.1)


def test_stream_seeds_are_distinct_and_stable():
    assert derive_seed(7, 3, "scene") == derive_seed(7, 3, "scene")
    assert len({derive_seed(7, t, s) for t in range(20) for s in ("scene", "amp")}) == 40
    a = derive_rng(7, 3, "amp").standard_normal(4)
    assert np.array_equal(a, derive_rng(7, 3, "amp").standard_normal(4))


def test_scene_is_deterministic_and_sparse(desk):
    s1 = make_scene(desk, derive_rng(0, 0, "scene"))
    s2 = make_scene(desk, derive_rng(0, 0, "scene"))
    for name in ("G", "H", "Q", "Y"):
        assert np.array_equal(getattr(s1, name), getattr(s2, name))
    zero_cols = np.mean(~np.any(s1.X != 0, axis=0))
    assert zero_cols == 1 - s1.activity.support.size / desk.K


def test_scene_energy_bound(desk):
    cfg = desk.with_overrides(snr_db=None, tau_n=1e-300)
    sc = make_scene(cfg, derive_rng(1, 0, "scene"))
    Z = sc.G @ sc.X @ sc.Q
    bound = np.linalg.norm(sc.G, 2) ** 2 * np.linalg.norm(sc.X) ** 2 * np.linalg.norm(sc.Q, 2) ** 2
    assert np.linalg.norm(Z) ** 2 <= bound * (1 + 1e-12)


def test_realized_snr_matches_target(desk):
    sc = make_scene(desk.with_overrides(snr_db=12.5), derive_rng(2, 0, "scene"))
    # noise power is set from the noiseless product, so the label is exact
    assert sc.snr_db == pytest.approx(12.5)


def test_scene_arrays_are_read_only(desk):
    sc = make_scene(desk, derive_rng(0, 1, "scene"))
    with pytest.raises(ValueError):
        sc.G[0, 0] = 1.0
