import numpy as np
import pytest

from risaccess.denoise import bg_denoise
from risaccess.metrics import QuadratureError, quadrature_bg_oracle

# 2-D quadrature at 401 and 801 points agree to ~1e-17 on this input; frozen here
EXAMPLE = (0.3 + 0.4j, 0.5, 0.2, 2.0)
EXAMPLE_MEAN = 0.016659261485284658 + 0.022212348647046215j
EXAMPLE_VAR = 0.03810069070667785


def test_pure_slab_is_gaussian_shrinkage():
    r, v, tau = 1.3 - 0.4j, 0.7, 2.0
    m, var, pi = bg_denoise(r, v, 1.0, tau)
    assert m == pytest.approx(tau * r / (tau + v))
    assert var == pytest.approx(tau * v / (tau + v))
    assert pi == 1.0


def test_pure_spike_is_zero():
    m, var, pi = bg_denoise(5.0 + 1j, 0.3, 0.0, 1.0)
    assert m == 0 and var == 0 and pi == 0


def test_example_against_frozen_quadrature():
    m, var, _ = bg_denoise(*EXAMPLE)
    assert abs(m - EXAMPLE_MEAN) < 1e-6
    assert abs(var - EXAMPLE_VAR) < 1e-6


def test_quadrature_refinement_is_stable():
    m1, v1 = quadrature_bg_oracle(*EXAMPLE, grid_points=401)
    m2, v2 = quadrature_bg_oracle(*EXAMPLE, grid_points=801)
    assert abs(m1 - m2) < 1e-8 and abs(v1 - v2) < 1e-8
    assert abs(m1 - EXAMPLE_MEAN) < 1e-12


def test_quadrature_gaussian_case():
    r, v, tau = -0.8 + 0.25j, 0.4, 1.5
    m, _ = quadrature_bg_oracle(r, v, 1.0, tau)
    assert abs(m - tau * r / (tau + v)) < 1e-8


def test_quadrature_spike_case():
    assert quadrature_bg_oracle(1.0, 0.5, 0.0, 1.0)[0] == 0


def test_quadrature_window_check():
    with pytest.raises(QuadratureError):
        quadrature_bg_oracle(0.5, 1.0, 0.5, 1.0, grid_half_width=3.0)
    with pytest.raises(ValueError):
        quadrature_bg_oracle(0.5, 1.0, 0.5, 1.0, grid_points=101)


def test_high_snr_saturates_cleanly():
    # the linear-domain ratio would overflow here
    m, var, pi = bg_denoise(30.0, 1e-4, 0.1, 1.0)
    assert pi == 1.0 and np.isfinite(var)
    assert m == pytest.approx(30.0 / (1 + 1e-4))


def test_broadcasting():
    r = np.array([[0.1, 2.0], [0.0, -3.0j]])
    m, var, pi = bg_denoise(r, 0.5, 0.3, np.array([1.0, 2.0]))
    assert m.shape == var.shape == pi.shape == (2, 2)
    m01, _, _ = bg_denoise(2.0, 0.5, 0.3, 2.0)
    assert m[0, 1] == pytest.approx(m01)


def test_rejects_non_finite_input():
    with pytest.raises(FloatingPointError):
        bg_denoise(np.nan, 1.0, 0.5, 1.0)


def test_variance_can_exceed_slab_variance():
    # mixture uncertainty: between spike and slab the posterior is bimodal
    m, var, _ = bg_denoise(4.0, 1.0, 0.001, 1.0)
    _, v_ref = quadrature_bg_oracle(4.0, 1.0, 0.001, 1.0)
    assert var == pytest.approx(v_ref, abs=1e-9)
    assert var > 1.0


def test_average_posterior_variance_below_prior():
    # law of total variance: E[Var(x | r)] <= Var(x) = lam tau
    rng = np.random.default_rng(0)
    lam, tau, v, n = 0.1, 2.0, 0.3, 200_000
    x = np.where(rng.random(n) < lam, (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(tau / 2), 0)
    r = x + (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(v / 2)
    m, var, _ = bg_denoise(r, v, lam, tau)
    assert np.mean(var) <= lam * tau
    # and the reported variance is calibrated
    assert np.mean(np.abs(x - m) ** 2) == pytest.approx(np.mean(var), rel=0.03)
