"""Acceptance criteria, each checked at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line (printed in the pytest
terminal summary, or directly when this file is run as a script).
Criteria that fail are left failing; the measured numbers are in the line.
"""

from __future__ import annotations

import subprocess
import sys
import time

import numpy as np
import pytest

from risaccess import amp, reference
from risaccess.config import desk_profile
from risaccess.denoise import bg_denoise
from risaccess.experiments import SweepSpec, run_sweep
from risaccess.metrics import quadrature_bg_oracle
from risaccess.selftest import fixed_point_shift, state_rel_error, step_pairs

pytestmark = pytest.mark.slow

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {detail}"
    print(RESULTS[n])
    assert ok, RESULTS[n]


_cache: dict = {}


def sweep(param, values, trials, **overrides):
    key = (param, tuple(values), trials, tuple(sorted(overrides.items())))
    if key not in _cache:
        base = desk_profile().with_overrides(**overrides) if overrides else desk_profile()
        _cache[key] = run_sweep(SweepSpec(param, list(values), trials, genie=True, target_pf=0.1), base)
    return _cache[key]


def test_01_denoiser_matches_quadrature():
    rng = np.random.default_rng(2024)
    t0, worst = time.perf_counter(), 0.0
    for i in range(1000):
        v, tau = 10 ** rng.uniform(-3, 1, 2)
        lam = rng.uniform(0.01, 0.99)
        # half the inputs from the model itself, half from a broad envelope
        if i % 2 == 0:
            x = np.sqrt(tau / 2) * complex(*rng.standard_normal(2)) if rng.random() < lam else 0j
            r = x + np.sqrt(v / 2) * complex(*rng.standard_normal(2))
        else:
            r = complex(*rng.normal(scale=3 * np.sqrt(tau + v), size=2))
        m_ref, v_ref = quadrature_bg_oracle(r, v, lam, tau)
        m, var, _ = bg_denoise(r, v, lam, tau)
        worst = max(worst, abs(m - m_ref), abs(var - v_ref))
    dt = time.perf_counter() - t0
    record(1, worst < 1e-6 and dt < 30, f"max |diff| {worst:.1e} (< 1e-6) in {dt:.1f} s (< 30 s)")


def test_02_steps_match_transcription():
    rng = np.random.default_rng(7)
    t0, worst, where = time.perf_counter(), 0.0, ""
    for i in range(100):
        st, pb = reference.random_state(rng), reference.random_problem(rng)
        for name, fast, ref in step_pairs(st, pb, 1.0 if i % 2 == 0 else 0.4):
            err = state_rel_error(fast, ref)
            if err > worst:
                worst, where = err, name
    dt = time.perf_counter() - t0
    record(2, worst < 1e-10 and dt < 60, f"max rel err {worst:.1e} ({where}) over 100 instances in {dt:.1f} s")


def test_03_ground_truth_fixed_point():
    moves = [fixed_point_shift(seed) for seed in range(20)]
    record(3, max(moves) < 1e-8, f"max move {max(moves):.1e} over 20 seeds (< 1e-8)")


def test_04_on_grid_recovery():
    t0 = time.perf_counter()
    rep = sweep("L", [60], 20, **{"scene.kind": "on_grid", "scene.n_paths": 4, "snr_db": 40.0})
    dt = time.perf_counter() - t0
    g = np.array([r.nmse_g_db for r in rep.rows])
    h = np.array([r.avg_nmse_h_db for r in rep.rows])
    rate = float(np.mean((g <= -30) & (h <= -30)))
    gg = np.array([r.genie_nmse_g_db for r in rep.rows])
    gh = np.array([r.genie_avg_nmse_h_db for r in rep.rows])
    record(4, rate >= 0.8 and dt < 300,
           f"success {rate:.0%} (>= 80%); median NMSE G {np.median(g):.1f} dB, h {np.median(h):.1f} dB; "
           f"genie medians G {np.median(gg):.1f} dB, h {np.median(gh):.1f} dB; {dt:.0f} s")


def _means(rep, col):
    return [rep.aggregates[i][f"{col}_mean"] for i in range(len(rep.aggregates))]


def test_05_snr_monotonicity():
    rep = sweep("snr_db", [0.0, 10.0, 20.0, 30.0], 20)
    g = _means(rep, "nmse_g_db")
    worst = max(np.diff(g))
    record(5, worst <= 1.0, "mean NMSE(G) " + " / ".join(f"{x:.2f}" for x in g) +
           f" dB at SNR 0/10/20/30; largest increase {worst:.2f} dB (<= 1 dB)")


def test_06_pilot_length_trend():
    rep = sweep("L", [30, 45, 60], 40)
    pf = [a["p_f_cal"] for a in rep.aggregates]
    pm = [a["p_m_cal"] for a in rep.aggregates]
    calibrated = all(abs(p - 0.1) <= 0.03 for p in pf)
    decreasing = pm[0] > pm[1] > pm[2]
    record(6, calibrated and decreasing,
           "p_F " + "/".join(f"{p:.3f}" for p in pf) + " (0.1 +- 0.03), p_M " +
           "/".join(f"{p:.3f}" for p in pm) + " at L 30/45/60 (strictly decreasing)")


def test_07_antenna_trend():
    rep = sweep("M", [8, 16], 40)
    a8, a16 = rep.aggregates
    ok_pm = a16["p_m_cal"] < a8["p_m_cal"]
    ok_g = a16["nmse_g_db_mean"] < a8["nmse_g_db_mean"]
    record(7, ok_pm and ok_g,
           f"p_M {a8['p_m_cal']:.3f} -> {a16['p_m_cal']:.3f}, NMSE(G) {a8['nmse_g_db_mean']:.2f} -> "
           f"{a16['nmse_g_db_mean']:.2f} dB for M 8 -> 16 (both must drop)")


def test_08_genie_dominance():
    rep = sweep("snr_db", [0.0, 10.0, 20.0, 30.0], 20)
    rows = [r for r in rep.rows if r.snr_db >= 20 - 1e-9 and not r.failed]
    ok = [r.genie_nmse_g_db <= r.nmse_g_db + 1 and r.genie_avg_nmse_h_db <= r.avg_nmse_h_db + 1 for r in rows]
    frac = float(np.mean(ok))
    record(8, frac >= 0.9, f"genie within +1 dB of AMP (G and h) in {frac:.0%} of {len(rows)} trials (>= 90%)")


def test_09_cli_determinism(tmp_path):
    cmd = [sys.executable, "-m", "risaccess.cli", "sweep", "--profile", "desk", "--param", "L",
           "--values", "30,45", "--trials", "3", "--seed", "11"]
    for name, workers in (("a", "1"), ("b", "2"), ("c", "1")):
        subprocess.run([*cmd, "--workers", workers, "--out", str(tmp_path / name)], check=True,
                       capture_output=True)
    blobs = [(tmp_path / n / "report.csv").read_bytes() for n in "abc"]
    record(9, blobs[0] == blobs[1] == blobs[2],
           f"report.csv byte-identical across 3 runs (workers 1/2/1), {len(blobs[0])} bytes")


def _iteration_time(dims: dict, reps: int = 300) -> float:
    rng = np.random.default_rng(0)
    st = reference.random_state(rng, **{k: dims[k] for k in ("M", "N", "K", "L", "Mp", "Np")})
    pb = reference.random_problem(rng, **{k: dims[k] for k in ("M", "N", "K", "L", "Mp", "Np")})
    pr = amp.Priors(pb["lambda_s"], pb["tau_s"], pb["lambda_alpha"], pb["tau_h"], pb["tau_n"])
    best = np.inf
    for _ in range(5):
        s = st.copy()
        t0 = time.perf_counter()
        with np.errstate(all="ignore"):
            for _ in range(reps):
                amp.iterate(s, pb["Y"], pb["Q"], pb["A_B"], pb["A_R"], pr, 0.5, 1e-12, True)
        best = min(best, (time.perf_counter() - t0) / reps)
    return best


def _ratios(base: dict, reps: int) -> tuple[float, dict]:
    t_base = _iteration_time(base, reps)
    return t_base, {dim: _iteration_time({**base, dim: 2 * base[dim]}, reps) / t_base for dim in base}


def test_10_complexity_shape():
    # micro sizes are dominated by interpreter overhead, so desk sizes are checked too
    t_micro, micro = _ratios(dict(M=3, N=4, K=5, L=6, Mp=6, Np=8), 300)
    _, desk = _ratios(dict(M=16, N=16, K=100, L=40, Mp=32, Np=64), 30)
    worst = max(max(micro.values()), max(desk.values()))
    record(10, worst <= 2.6,
           "time ratio per doubling, micro " + ", ".join(f"{k} {v:.2f}" for k, v in micro.items()) +
           "; desk " + ", ".join(f"{k} {v:.2f}" for k, v in desk.items()) +
           f" (<= 2.6); micro base {t_micro * 1e6:.0f} us/iteration")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
