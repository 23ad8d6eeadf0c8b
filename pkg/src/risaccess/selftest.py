"""Quick numerical self-checks behind ``risaccess selftest``.

Each check returns ``(name, passed, detail)``; none of them needs more than
a few seconds.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from risaccess import amp, reference
from risaccess.channels import make_on_grid_scene
from risaccess.config import desk_profile
from risaccess.denoise import bg_denoise
from risaccess.metrics import quadrature_bg_oracle
from risaccess.model import derive_rng


def check_denoiser(n: int = 50, seed: int = 0, tol: float = 1e-6):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        r = complex(*rng.normal(scale=2.0, size=2))
        v, tau = 10 ** rng.uniform(-3, 1, size=2)
        lam = rng.uniform(0.01, 0.99)
        m_ref, v_ref = quadrature_bg_oracle(r, v, lam, tau)
        m, var, _ = bg_denoise(r, v, lam, tau)
        worst = max(worst, abs(m - m_ref), abs(var - v_ref))
    return "denoiser vs quadrature", worst < tol, f"max |diff| {worst:.2e}"


def _rel(a, b) -> float:
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def step_pairs(st, pb, damping):
    """(name, fast result, reference result) for every step on one instance."""
    pr = amp.Priors(pb["lambda_s"], pb["tau_s"], pb["lambda_alpha"], pb["tau_h"], pb["tau_n"])
    Y, Q, A_B, A_R = pb["Y"], pb["Q"], pb["A_B"], pb["A_R"]
    return [
        ("p_step", amp.p_step(st.copy()), reference.p_step(st)),
        ("output_residual_step", amp.output_residual_step(st.copy(), Y, Q, pb["tau_n"]),
         reference.output_residual_step(st, Y, Q, pb["tau_n"])),
        ("w_merge_step", amp.w_merge_step(st.copy(), Q, pb["tau_n"], damping),
         reference.w_merge_step(st, Q, damping)),
        ("bilinear_split_step", amp.bilinear_split_step(st.copy()), reference.bilinear_split_step(st)),
        ("x_denoise_step", amp.x_denoise_step(st.copy(), pr, damping),
         reference.x_denoise_step(st, pb["lambda_alpha"], pb["tau_h"], damping)),
        ("s_linear_step", amp.s_linear_step(st.copy(), A_B, A_R), reference.s_linear_step(st, A_B, A_R)),
        ("s_denoise_step", amp.s_denoise_step(st.copy(), pr, damping),
         reference.s_denoise_step(st, pb["lambda_s"], pb["tau_s"], damping)),
        ("g_merge_step", amp.g_merge_step(st.copy(), damping), reference.g_merge_step(st, damping)),
    ]


def state_rel_error(a, b) -> float:
    return max(_rel(getattr(a, f.name), getattr(b, f.name)) for f in dataclasses.fields(a))


def check_transcription(n: int = 20, seed: int = 0, tol: float = 1e-10):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n):
        st, pb = reference.random_state(rng), reference.random_problem(rng)
        for _, fast, ref in step_pairs(st, pb, 1.0 if i % 2 == 0 else 0.5):
            worst = max(worst, state_rel_error(fast, ref))
    return "steps vs loop transcription", worst < tol, f"max rel err {worst:.2e}"


def fixed_point_shift(seed: int) -> float:
    """Largest move of s, x, g, w after one sweep started on the truth of a
    noiseless on-grid scene (normalized units, variances at the floor)."""
    cfg = desk_profile().with_overrides(**{"scene.kind": "on_grid", "snr_db": None, "tau_n": 1e-300})
    sc = make_on_grid_scene(cfg, cfg.scene.n_paths, derive_rng(seed, 0, "scene"))
    d = sc.dictionaries
    g_sc = np.sqrt(np.mean(np.abs(sc.G) ** 2))
    x_sc = np.sqrt(np.mean(sc.tau_h))
    S, X = sc.s_true / g_sc, sc.X / x_sc
    Y = sc.Y / (g_sc * x_sc)
    st = amp.state_from_truth(S, X, d.A_B, d.A_R, cfg.L)
    lam = cfg.scene.n_paths / (cfg.Mp * cfg.Np)
    pr = amp.Priors(lam, 1.0, cfg.lambda_alpha, sc.tau_h / x_sc**2, 0.0)
    st0 = st.copy()
    amp.iterate(st, Y, sc.Q, d.A_B, d.A_R, pr, 1.0, 1e-12, True)
    return max(float(np.max(np.abs(getattr(st, k) - getattr(st0, k))))
               for k in ("s_hat", "x_hat", "g_hat", "w_hat"))


def check_fixed_point(seeds=range(3), tol: float = 1e-8):
    worst = max(fixed_point_shift(s) for s in seeds)
    return "ground-truth fixed point", worst < tol, f"max move {worst:.2e}"


def run_all():
    return [check_denoiser(), check_transcription(), check_fixed_point()]
