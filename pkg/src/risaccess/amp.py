"""Message passing for ``Y = A_B S A_R^H X Q + N``.

Three coupled layers are tracked by Gaussian messages:

* output layer ``Y = W Q + N``: residual terms ``beta``/``gamma`` and the
  likelihood-side message ``e`` on ``W``;
* bilinear layer ``W = G X``: plug-in ``p``, scaled residual ``o`` and the
  pseudo-observations ``b`` (for X) and ``c`` (for G);
* linear layer ``G = A_B S A_R^H``: plug-in ``gscript``, residual ``alpha``
  and the pseudo-observation ``d`` (for S).

Each step mutates an :class:`AmpState` in place. The Onsager corrections use
the value of ``gamma_hat``/``o_hat``/``alpha_hat`` left by the previous
iteration, which is what the state holds when the step starts.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass, field

import numpy as np

from risaccess.denoise import bg_denoise

VARIANCE_FIELDS = (
    "v_s", "v_x", "v_g", "v_w", "v_p", "v_e", "v_gamma", "v_beta",
    "v_o", "v_b", "v_c", "v_gs", "v_alpha", "v_d",
)


@dataclass
class Priors:
    lambda_s: float
    tau_s: float
    lambda_alpha: float
    tau_h: np.ndarray  # (K,)
    tau_n: float

    def __post_init__(self):
        self.tau_h = np.atleast_1d(np.asarray(self.tau_h, dtype=float))
        if not (0.0 <= self.lambda_s <= 1.0 and 0.0 <= self.lambda_alpha <= 1.0):
            raise ValueError("prior probabilities must lie in [0, 1]")
        if self.tau_s <= 0 or np.any(self.tau_h <= 0) or self.tau_n < 0:
            raise ValueError("prior variances must be positive")


@dataclass
class AmpOptions:
    I_max: int = 300
    damping: float = 0.07
    tol: float = 1e-6
    variance_floor: float = 1e-12
    epsilon_threshold: float | None = None
    record_trajectory: bool = False
    # run on a rescaled problem with O(1) prior variances
    normalize: bool = True
    # clamp the self-feedback factors of b and c at zero (see bilinear_split_step)
    safeguard: bool = True
    # on divergence: roll back to the best iterate and halve the damping
    max_restarts: int = 3

    def __post_init__(self):
        if self.I_max < 1:
            raise ValueError("I_max must be >= 1")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.variance_floor <= 0 or self.tol < 0:
            raise ValueError("variance_floor must be > 0 and tol >= 0")
        if self.max_restarts < 0:
            raise ValueError("max_restarts must be >= 0")


@dataclass
class AmpState:
    s_hat: np.ndarray
    v_s: np.ndarray
    x_hat: np.ndarray
    v_x: np.ndarray
    g_hat: np.ndarray
    v_g: np.ndarray
    w_hat: np.ndarray
    v_w: np.ndarray
    p_hat: np.ndarray
    v_p: np.ndarray
    e_hat: np.ndarray
    v_e: np.ndarray
    gamma_hat: np.ndarray
    v_gamma: np.ndarray
    beta_hat: np.ndarray
    v_beta: np.ndarray
    o_hat: np.ndarray
    v_o: np.ndarray
    b_hat: np.ndarray
    v_b: np.ndarray
    c_hat: np.ndarray
    v_c: np.ndarray
    gs_hat: np.ndarray
    v_gs: np.ndarray
    alpha_hat: np.ndarray
    v_alpha: np.ndarray
    d_hat: np.ndarray
    v_d: np.ndarray

    def copy(self) -> "AmpState":
        return AmpState(**{f.name: getattr(self, f.name).copy() for f in dataclasses.fields(self)})

    def scaled(self, s_scale: float, x_scale: float) -> "AmpState":
        """Copy with S-side quantities multiplied by ``s_scale`` and X-side by
        ``x_scale`` (variances by the squares); used to move between the
        physical and the normalized problem."""
        g, x = s_scale, x_scale
        w = g * x
        factors = {
            "s_hat": g, "v_s": g * g, "g_hat": g, "v_g": g * g, "gs_hat": g, "v_gs": g * g,
            "c_hat": g, "v_c": g * g, "d_hat": g, "v_d": g * g,
            "alpha_hat": 1 / g, "v_alpha": 1 / (g * g),
            "x_hat": x, "v_x": x * x, "b_hat": x, "v_b": x * x,
            "w_hat": w, "v_w": w * w, "p_hat": w, "v_p": w * w, "e_hat": w, "v_e": w * w,
            "beta_hat": w, "v_beta": w * w, "gamma_hat": 1 / w, "v_gamma": 1 / (w * w),
            "o_hat": 1 / w, "v_o": 1 / (w * w),
        }
        return AmpState(**{k: getattr(self, k) * f for k, f in factors.items()})


@dataclass
class EstimationResult:
    s_hat: np.ndarray
    x_hat: np.ndarray
    g_hat: np.ndarray
    w_hat: np.ndarray
    v_s: np.ndarray
    v_x: np.ndarray
    v_g: np.ndarray
    activity_scores: np.ndarray
    alpha_hat: np.ndarray
    epsilon: float
    iterations_run: int
    converged: bool
    diverged: bool
    diagnostics: dict[str, np.ndarray] = field(default_factory=dict)


def _floor(v, floor):
    return np.maximum(v, floor)


def _damp(new, old, theta):
    if theta == 1.0:
        return new
    return theta * new + (1.0 - theta) * old


def _abs2(a):
    return a.real**2 + a.imag**2


def init_state(priors: Priors, dims: dict, rng: np.random.Generator, A_B=None, A_R=None) -> AmpState:
    """Draw S and X from their priors and propagate through G and W.

    ``dims`` holds ``M, N, K, L, Mp, Np``. Variances start at the prior
    marginals and are pushed through the same products as the means.
    """
    M, N, K, L, Mp, Np = (dims[k] for k in ("M", "N", "K", "L", "Mp", "Np"))
    if A_B is None or A_R is None:
        raise ValueError("dictionaries are required to initialise G")
    s_mask = rng.random((Mp, Np)) < priors.lambda_s
    s_hat = np.where(s_mask, _crandn(rng, (Mp, Np), priors.tau_s), 0.0)
    active = rng.random(K) < priors.lambda_alpha
    x_hat = _crandn(rng, (N, K), priors.tau_h[None, :]) * active[None, :]
    v_s = np.full((Mp, Np), priors.lambda_s * priors.tau_s)
    v_x = np.broadcast_to(priors.lambda_alpha * priors.tau_h[None, :], (N, K)).copy()
    g_hat = A_B @ s_hat @ A_R.conj().T
    v_g = _abs2(A_B) @ v_s @ _abs2(A_R).T
    w_hat = g_hat @ x_hat
    v_w = _abs2(g_hat) @ v_x + v_g @ _abs2(x_hat) + v_g @ v_x
    zc = lambda *shape: np.zeros(shape, dtype=complex)  # noqa: E731
    one = lambda *shape: np.ones(shape)  # noqa: E731
    return AmpState(
        s_hat=s_hat.astype(complex), v_s=v_s, x_hat=x_hat.astype(complex), v_x=v_x,
        g_hat=g_hat, v_g=v_g, w_hat=w_hat, v_w=v_w,
        p_hat=w_hat.copy(), v_p=v_w.copy(), e_hat=zc(M, K), v_e=one(M, K),
        gamma_hat=zc(M, L), v_gamma=one(M, L), beta_hat=zc(M, L), v_beta=one(M, L),
        o_hat=zc(M, K), v_o=one(M, K), b_hat=zc(N, K), v_b=one(N, K),
        c_hat=zc(M, N), v_c=one(M, N), gs_hat=g_hat.copy(), v_gs=v_g.copy(),
        alpha_hat=zc(M, N), v_alpha=one(M, N), d_hat=zc(Mp, Np), v_d=one(Mp, Np),
    )


def state_from_truth(S, X, A_B, A_R, L: int, variance: float = 1e-12) -> AmpState:
    """State sitting exactly on given factors: means from ``S`` and ``X``,
    every variance equal to ``variance``, residual messages zero."""
    S, X = np.asarray(S, complex), np.asarray(X, complex)
    G = A_B @ S @ A_R.conj().T
    W = G @ X
    M, N = G.shape
    K = X.shape[1]
    Mp, Np = S.shape
    z = lambda *shape: np.zeros(shape, dtype=complex)  # noqa: E731
    v = lambda *shape: np.full(shape, float(variance))  # noqa: E731
    return AmpState(
        s_hat=S.copy(), v_s=v(Mp, Np), x_hat=X.copy(), v_x=v(N, K), g_hat=G, v_g=v(M, N),
        w_hat=W, v_w=v(M, K), p_hat=W.copy(), v_p=v(M, K), e_hat=W.copy(), v_e=v(M, K),
        gamma_hat=z(M, L), v_gamma=v(M, L), beta_hat=z(M, L), v_beta=v(M, L),
        o_hat=z(M, K), v_o=v(M, K), b_hat=X.copy(), v_b=v(N, K), c_hat=G.copy(), v_c=v(M, N),
        gs_hat=G.copy(), v_gs=v(M, N), alpha_hat=z(M, N), v_alpha=v(M, N), d_hat=S.copy(), v_d=v(Mp, Np),
    )


def _crandn(rng, shape, var):
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z * np.sqrt(np.asarray(var) / 2.0)


def p_step(state: AmpState, floor: float = 1e-12) -> AmpState:
    g, x = state.g_hat, state.x_hat
    vbar = _abs2(g) @ state.v_x + state.v_g @ _abs2(x)
    state.v_p = _floor(vbar + state.v_g @ state.v_x, floor)
    state.p_hat = g @ x - state.o_hat * vbar
    return state


def output_residual_step(state: AmpState, Y, Q, tau_n: float, floor: float = 1e-12) -> AmpState:
    Q2 = _abs2(Q)
    state.v_beta = _floor(state.v_w @ Q2, floor)
    state.beta_hat = state.w_hat @ Q - state.v_beta * state.gamma_hat
    state.v_gamma = 1.0 / (state.v_beta + tau_n)
    state.gamma_hat = state.v_gamma * (Y - state.beta_hat)
    return state


def w_merge_step(state: AmpState, Q, tau_n: float | None = None, damping: float = 1.0,
                 floor: float = 1e-12) -> AmpState:
    # tau_n enters only through v_gamma; kept for signature symmetry
    state.v_e = _floor(1.0 / (state.v_gamma @ _abs2(Q).T), floor)
    state.e_hat = state.w_hat + state.v_e * (state.gamma_hat @ Q.conj().T)
    vp, ve = state.v_p, state.v_e
    v_new = vp * ve / (vp + ve)
    w_new = (vp * state.e_hat + ve * state.p_hat) / (vp + ve)
    state.w_hat = _damp(w_new, state.w_hat, damping)
    state.v_w = _floor(_damp(v_new, state.v_w, damping), floor)
    return state


def bilinear_split_step(state: AmpState, floor: float = 1e-12, safeguard: bool = False) -> AmpState:
    """Scaled residual ``o`` and the pseudo-observations ``b`` (for X) and
    ``c`` (for G).

    The factors ``1 - v_b sum(v_g v_o)`` and ``1 - v_c sum(v_x v_o)`` are
    positive near a fixed point, but when X shrinks faster than its variance
    (typical in the first iterations) the second becomes large and negative
    and flips the sign of ``c``. With ``safeguard`` both are clamped at zero.
    """
    vp = state.v_p
    state.v_o = _floor((vp - state.v_w) / vp**2, floor)
    state.o_hat = (state.w_hat - state.p_hat) / vp
    g, x, vo, o = state.g_hat, state.x_hat, state.v_o, state.o_hat
    v_b = _floor(1.0 / (_abs2(g).T @ vo), floor)
    fb = 1.0 - v_b * (state.v_g.T @ vo)
    v_c = _floor(1.0 / (vo @ _abs2(x).T), floor)
    fc = 1.0 - v_c * (vo @ state.v_x.T)
    if safeguard:
        fb, fc = np.maximum(fb, 0.0), np.maximum(fc, 0.0)
    b = x * fb + v_b * (g.conj().T @ o)
    c = g * fc + v_c * (o @ x.conj().T)
    state.v_b, state.b_hat, state.v_c, state.c_hat = v_b, b, v_c, c
    return state


def x_denoise_step(state: AmpState, priors: Priors, damping: float = 1.0, floor: float = 1e-12) -> AmpState:
    mean, var, _ = bg_denoise(state.b_hat, state.v_b, priors.lambda_alpha, priors.tau_h[None, :])
    state.x_hat = _damp(mean, state.x_hat, damping)
    state.v_x = _floor(_damp(var, state.v_x, damping), floor)
    return state


def s_linear_step(state: AmpState, A_B, A_R, floor: float = 1e-12) -> AmpState:
    AB2, AR2 = _abs2(A_B), _abs2(A_R)
    state.v_gs = _floor(AB2 @ state.v_s @ AR2.T, floor)
    state.gs_hat = A_B @ state.s_hat @ A_R.conj().T - state.v_gs * state.alpha_hat
    state.v_alpha = 1.0 / (state.v_gs + state.v_c)
    state.alpha_hat = state.v_alpha * (state.c_hat - state.gs_hat)
    state.v_d = _floor(1.0 / (AB2.T @ state.v_alpha @ AR2), floor)
    state.d_hat = state.s_hat + state.v_d * (A_B.conj().T @ state.alpha_hat @ A_R)
    return state


def s_denoise_step(state: AmpState, priors: Priors, damping: float = 1.0, floor: float = 1e-12) -> AmpState:
    mean, var, _ = bg_denoise(state.d_hat, state.v_d, priors.lambda_s, priors.tau_s)
    state.s_hat = _damp(mean, state.s_hat, damping)
    state.v_s = _floor(_damp(var, state.v_s, damping), floor)
    return state


def g_merge_step(state: AmpState, damping: float = 1.0, floor: float = 1e-12) -> AmpState:
    vg, vc = state.v_gs, state.v_c
    v_new = vg * vc / (vg + vc)
    g_new = (vg * state.c_hat + vc * state.gs_hat) / (vg + vc)
    state.g_hat = _damp(g_new, state.g_hat, damping)
    state.v_g = _floor(_damp(v_new, state.v_g, damping), floor)
    return state


def iterate(state: AmpState, Y, Q, A_B, A_R, priors: Priors, damping: float = 1.0,
            floor: float = 1e-12, safeguard: bool = False) -> AmpState:
    """One full sweep of the schedule, in place."""
    p_step(state, floor)
    output_residual_step(state, Y, Q, priors.tau_n, floor)
    w_merge_step(state, Q, priors.tau_n, damping, floor)
    bilinear_split_step(state, floor, safeguard)
    x_denoise_step(state, priors, damping, floor)
    s_linear_step(state, A_B, A_R, floor)
    s_denoise_step(state, priors, damping, floor)
    g_merge_step(state, damping, floor)
    return state


def detect_activity(x_hat, epsilon: float) -> np.ndarray:
    """``alpha_k = 1`` iff the k-th column norm exceeds ``epsilon``."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return (np.linalg.norm(x_hat, axis=0) > epsilon).astype(np.int8)


def normalization_scales(priors: Priors, dims: dict) -> tuple[float, float]:
    """Scales making the prior variance of G entries and the mean device
    variance equal to one."""
    g_var = priors.lambda_s * priors.tau_s * dims["Mp"] * dims["Np"] / (dims["M"] * dims["N"])
    s_scale = float(np.sqrt(g_var)) if g_var > 0 else float(np.sqrt(priors.tau_s))
    x_scale = float(np.sqrt(np.mean(priors.tau_h)))
    return s_scale, x_scale


def run(Y, Q, dictionaries, priors: Priors, options: AmpOptions | None = None,
        rng: np.random.Generator | None = None, init: AmpState | None = None) -> EstimationResult:
    """Joint estimation of S and X (hence G and H) from ``Y``.

    A run that diverges (non-finite values, or a residual above ten times the
    initial one for 50 consecutive iterations) is flagged in the result; the
    state is then rolled back to the lowest-residual iterate and, up to
    ``options.max_restarts`` times, continued with half the damping.

    ``dictionaries`` is a :class:`~risaccess.channels.VadDictionaries` or an
    ``(A_B, A_R)`` pair. ``init`` (physical units) replaces the random prior
    draw. With ``options.normalize`` the iterations run on a rescaled copy of
    the problem; results are mapped back, so the fixed points are unchanged.
    """
    options = options or AmpOptions()
    A_B, A_R = (dictionaries.A_B, dictionaries.A_R) if hasattr(dictionaries, "A_B") else dictionaries
    Y, Q = np.asarray(Y, complex), np.asarray(Q, complex)
    M, L = Y.shape
    K = Q.shape[0]
    dims = dict(M=M, N=A_R.shape[0], K=K, L=L, Mp=A_B.shape[1], Np=A_R.shape[1])
    if Q.shape[1] != L or A_B.shape[0] != M or priors.tau_h.size != K:
        raise ValueError("inconsistent problem dimensions")

    s_sc, x_sc = normalization_scales(priors, dims) if options.normalize else (1.0, 1.0)
    w_sc = s_sc * x_sc
    npri = Priors(
        lambda_s=priors.lambda_s, tau_s=priors.tau_s / s_sc**2, lambda_alpha=priors.lambda_alpha,
        tau_h=priors.tau_h / x_sc**2, tau_n=priors.tau_n / w_sc**2,
    )
    Yn = Y / w_sc
    if init is None:
        rng = rng if rng is not None else np.random.default_rng()
        state = init_state(npri, dims, rng, A_B, A_R)
    else:
        state = init.scaled(1 / s_sc, 1 / x_sc)
    floor = options.variance_floor

    residual0 = max(np.linalg.norm(Yn - state.w_hat @ Q), np.finfo(float).tiny)
    diag = {"residual": [], "mean_v_w": [], "mean_v_s": [], "mean_v_x": []}
    best, best_res = state.copy(), residual0
    damping, restarts = options.damping, 0
    blowup, converged, diverged, it = 0, False, False, 0
    for it in range(1, options.I_max + 1):
        w_old = state.w_hat
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                iterate(state, Yn, Q, A_B, A_R, npri, damping, floor, options.safeguard)
            res = float(np.linalg.norm(Yn - state.w_hat @ Q))
        except FloatingPointError:
            res = float("inf")
        finite = np.isfinite(res)
        diag["residual"].append(res * w_sc)
        diag["mean_v_w"].append(float(np.mean(state.v_w)) * w_sc**2 if finite else float("nan"))
        diag["mean_v_s"].append(float(np.mean(state.v_s)) * s_sc**2 if finite else float("nan"))
        diag["mean_v_x"].append(float(np.mean(state.v_x)) * x_sc**2 if finite else float("nan"))
        blowup = blowup + 1 if res > 10 * residual0 else 0
        if not finite or blowup >= 50:
            # divergence: flagged, then rolled back to the best iterate so far
            diverged = True
            state, blowup = best.copy(), 0
            if restarts >= options.max_restarts:
                break
            restarts += 1
            damping *= 0.5
            continue
        if res < best_res:
            best, best_res = state.copy(), res
        wn = np.linalg.norm(state.w_hat)
        if wn > 0 and np.linalg.norm(state.w_hat - w_old) / wn < options.tol:
            converged = True
            break
    diag["restarts"] = [restarts]

    out = state.scaled(s_sc, x_sc)
    scores = np.linalg.norm(out.x_hat, axis=0)
    eps = options.epsilon_threshold
    if eps is None:
        eps = 0.1 * np.sqrt(dims["N"] * np.mean(priors.tau_h))
    return EstimationResult(
        s_hat=out.s_hat, x_hat=out.x_hat, g_hat=out.g_hat, w_hat=out.w_hat,
        v_s=out.v_s, v_x=out.v_x, v_g=out.v_g,
        activity_scores=scores, alpha_hat=detect_activity(out.x_hat, eps), epsilon=float(eps),
        iterations_run=it, converged=converged, diverged=diverged,
        diagnostics={k: np.asarray(v) for k, v in diag.items()},
    )


def write_trajectory(result: EstimationResult, path) -> None:
    """CSV with one row per iteration: residual and mean variances."""
    d = result.diagnostics
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iteration", "residual", "mean_v_w", "mean_v_s", "mean_v_x"])
        for i in range(len(d.get("residual", []))):
            wr.writerow([i + 1, repr(float(d["residual"][i])), repr(float(d["mean_v_w"][i])),
                         repr(float(d["mean_v_s"][i])), repr(float(d["mean_v_x"][i]))])
