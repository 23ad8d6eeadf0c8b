"""Loop-based reference transcriptions of the message-passing updates.

Each function recomputes one step of :mod:`risaccess.amp` element by
element, straight from the scalar update equations, with no vectorization
or shared helpers. They are slow and meant for tiny instances: the test
suite and ``risaccess selftest`` compare them with the fast steps.

The dimension-consistent readings are used throughout: the X pseudo-
observation is built from ``g_hat``/``x_hat``, the plug-in ``p_hat`` uses
``g_hat[m, n] * x_hat[n, k]`` with the lagged ``o_hat``, the S pseudo-
observation applies the adjoint of the dictionaries, and the G posterior
mean is the plain Gaussian product.
"""

from __future__ import annotations

import math

from risaccess.amp import AmpState


def _blend(new, old, theta):
    return theta * new + (1.0 - theta) * old


def _bg_scalar(r: complex, v: float, lam: float, tau: float):
    """Spike-and-slab posterior from the two Gaussian evidences."""
    if lam == 0.0:
        return 0j, 0.0
    if lam == 1.0:
        pi = 1.0
    else:
        log_slab = math.log(lam) - abs(r) ** 2 / (tau + v) - math.log(math.pi * (tau + v))
        log_spike = math.log(1.0 - lam) - abs(r) ** 2 / v - math.log(math.pi * v)
        d = log_spike - log_slab
        pi = 1.0 / (1.0 + math.exp(d)) if d < 700 else 0.0
    m_slab = tau / (tau + v) * r
    v_slab = tau * v / (tau + v)
    mean = pi * m_slab
    second = pi * (v_slab + abs(m_slab) ** 2)
    return mean, second - abs(mean) ** 2


def p_step(st: AmpState, floor: float = 1e-12) -> AmpState:
    st = st.copy()
    M, N = st.g_hat.shape
    K = st.x_hat.shape[1]
    for m in range(M):
        for k in range(K):
            vp, vbar, z = 0.0, 0.0, 0j
            for n in range(N):
                g, x = st.g_hat[m, n], st.x_hat[n, k]
                vg, vx = st.v_g[m, n], st.v_x[n, k]
                vp += abs(g) ** 2 * vx + vg * abs(x) ** 2 + vg * vx
                vbar += vg * abs(x) ** 2 + abs(g) ** 2 * vx
                z += g * x
            st.v_p[m, k] = max(vp, floor)
            st.p_hat[m, k] = z - st.o_hat[m, k] * vbar
    return st


def output_residual_step(st: AmpState, Y, Q, tau_n: float, floor: float = 1e-12) -> AmpState:
    st = st.copy()
    M, L = Y.shape
    K = Q.shape[0]
    for m in range(M):
        for l in range(L):
            vb, z = 0.0, 0j
            for k in range(K):
                vb += st.v_w[m, k] * abs(Q[k, l]) ** 2
                z += st.w_hat[m, k] * Q[k, l]
            vb = max(vb, floor)
            beta = z - vb * st.gamma_hat[m, l]
            st.v_beta[m, l] = vb
            st.beta_hat[m, l] = beta
            st.v_gamma[m, l] = 1.0 / (vb + tau_n)
            st.gamma_hat[m, l] = st.v_gamma[m, l] * (Y[m, l] - beta)
    return st


def w_merge_step(st: AmpState, Q, damping: float = 1.0, floor: float = 1e-12) -> AmpState:
    st = st.copy()
    M, K = st.w_hat.shape
    L = Q.shape[1]
    for m in range(M):
        for k in range(K):
            acc, num = 0.0, 0j
            for l in range(L):
                acc += st.v_gamma[m, l] * abs(Q[k, l]) ** 2
                num += Q[k, l].conjugate() * st.gamma_hat[m, l]
            ve = max(1.0 / acc, floor)
            e = st.w_hat[m, k] + ve * num
            st.v_e[m, k], st.e_hat[m, k] = ve, e
            vp, p = st.v_p[m, k], st.p_hat[m, k]
            vw = vp * ve / (vp + ve)
            w = (vp * e + p * ve) / (vp + ve)
            st.w_hat[m, k] = _blend(w, st.w_hat[m, k], damping)
            st.v_w[m, k] = max(_blend(vw, st.v_w[m, k], damping), floor)
    return st


def bilinear_split_step(st: AmpState, floor: float = 1e-12) -> AmpState:
    st = st.copy()
    M, N = st.g_hat.shape
    K = st.x_hat.shape[1]
    for m in range(M):
        for k in range(K):
            vp = st.v_p[m, k]
            st.v_o[m, k] = max((vp - st.v_w[m, k]) / vp**2, floor)
            st.o_hat[m, k] = (st.w_hat[m, k] - st.p_hat[m, k]) / vp
    for n in range(N):
        for k in range(K):
            den, corr, num = 0.0, 0.0, 0j
            for m in range(M):
                den += abs(st.g_hat[m, n]) ** 2 * st.v_o[m, k]
                corr += st.v_g[m, n] * st.v_o[m, k]
                num += st.g_hat[m, n].conjugate() * st.o_hat[m, k]
            vb = max(1.0 / den, floor)
            st.v_b[n, k] = vb
            st.b_hat[n, k] = (1.0 - vb * corr) * st.x_hat[n, k] + vb * num
    for m in range(M):
        for n in range(N):
            den, corr, num = 0.0, 0.0, 0j
            for k in range(K):
                den += abs(st.x_hat[n, k]) ** 2 * st.v_o[m, k]
                corr += st.v_x[n, k] * st.v_o[m, k]
                num += st.x_hat[n, k].conjugate() * st.o_hat[m, k]
            vc = max(1.0 / den, floor)
            st.v_c[m, n] = vc
            st.c_hat[m, n] = (1.0 - vc * corr) * st.g_hat[m, n] + vc * num
    return st


def x_denoise_step(st: AmpState, lambda_alpha: float, tau_h, damping: float = 1.0,
                   floor: float = 1e-12) -> AmpState:
    st = st.copy()
    N, K = st.x_hat.shape
    for n in range(N):
        for k in range(K):
            mean, var = _bg_scalar(complex(st.b_hat[n, k]), float(st.v_b[n, k]), lambda_alpha, float(tau_h[k]))
            st.x_hat[n, k] = _blend(mean, st.x_hat[n, k], damping)
            st.v_x[n, k] = max(_blend(var, st.v_x[n, k], damping), floor)
    return st


def s_linear_step(st: AmpState, A_B, A_R, floor: float = 1e-12) -> AmpState:
    """``A_R`` is the N x N' dictionary; ``a_{R, n'n}`` of the scalar
    equations is ``conj(A_R[n, n'])``."""
    st = st.copy()
    M, Mp = A_B.shape
    N, Np = A_R.shape
    for m in range(M):
        for n in range(N):
            vg, g = 0.0, 0j
            for i in range(Mp):
                for j in range(Np):
                    vg += abs(A_B[m, i]) ** 2 * st.v_s[i, j] * abs(A_R[n, j]) ** 2
                    g += A_B[m, i] * st.s_hat[i, j] * A_R[n, j].conjugate()
            vg = max(vg, floor)
            st.v_gs[m, n] = vg
            st.gs_hat[m, n] = g - vg * st.alpha_hat[m, n]
            st.v_alpha[m, n] = 1.0 / (vg + st.v_c[m, n])
            st.alpha_hat[m, n] = st.v_alpha[m, n] * (st.c_hat[m, n] - st.gs_hat[m, n])
    for i in range(Mp):
        for j in range(Np):
            den, num = 0.0, 0j
            for m in range(M):
                for n in range(N):
                    den += abs(A_B[m, i]) ** 2 * st.v_alpha[m, n] * abs(A_R[n, j]) ** 2
                    num += A_B[m, i].conjugate() * st.alpha_hat[m, n] * A_R[n, j]
            vd = max(1.0 / den, floor)
            st.v_d[i, j] = vd
            st.d_hat[i, j] = st.s_hat[i, j] + vd * num
    return st


def s_denoise_step(st: AmpState, lambda_s: float, tau_s: float, damping: float = 1.0,
                   floor: float = 1e-12) -> AmpState:
    st = st.copy()
    Mp, Np = st.s_hat.shape
    for i in range(Mp):
        for j in range(Np):
            mean, var = _bg_scalar(complex(st.d_hat[i, j]), float(st.v_d[i, j]), lambda_s, tau_s)
            st.s_hat[i, j] = _blend(mean, st.s_hat[i, j], damping)
            st.v_s[i, j] = max(_blend(var, st.v_s[i, j], damping), floor)
    return st


def g_merge_step(st: AmpState, damping: float = 1.0, floor: float = 1e-12) -> AmpState:
    st = st.copy()
    M, N = st.g_hat.shape
    for m in range(M):
        for n in range(N):
            vg, vc = st.v_gs[m, n], st.v_c[m, n]
            v = vg * vc / (vg + vc)
            g = (vg * st.c_hat[m, n] + vc * st.gs_hat[m, n]) / (vg + vc)
            st.g_hat[m, n] = _blend(g, st.g_hat[m, n], damping)
            st.v_g[m, n] = max(_blend(v, st.v_g[m, n], damping), floor)
    return st


def random_state(rng, M=3, N=4, K=5, L=6, Mp=6, Np=8) -> AmpState:
    """A state with every field filled by random values of the right kind."""
    shapes = {
        "s": (Mp, Np), "x": (N, K), "g": (M, N), "w": (M, K), "p": (M, K), "e": (M, K),
        "gamma": (M, L), "beta": (M, L), "o": (M, K), "b": (N, K), "c": (M, N),
        "gs": (M, N), "alpha": (M, N), "d": (Mp, Np),
    }
    kw = {}
    for name, shape in shapes.items():
        kw[f"{name}_hat"] = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        kw[f"v_{name}"] = rng.uniform(0.2, 2.0, shape)
    # keep v_w below v_p so that v_o stays away from the floor
    kw["v_w"] = kw["v_p"] * rng.uniform(0.1, 0.9, shapes["w"])
    return AmpState(**kw)


def random_problem(rng, M=3, N=4, K=5, L=6, Mp=6, Np=8):
    c = lambda *s: (rng.standard_normal(s) + 1j * rng.standard_normal(s)) / math.sqrt(2)  # noqa: E731
    A_B = c(M, Mp) / math.sqrt(M)
    A_R = c(N, Np) / math.sqrt(N)
    return {"Y": c(M, L), "Q": c(K, L) / math.sqrt(L), "A_B": A_B, "A_R": A_R,
            "tau_n": float(rng.uniform(0.05, 1.0)), "tau_h": rng.uniform(0.5, 2.0, K),
            "lambda_alpha": float(rng.uniform(0.05, 0.95)), "lambda_s": float(rng.uniform(0.05, 0.95)),
            "tau_s": float(rng.uniform(0.5, 2.0))}

