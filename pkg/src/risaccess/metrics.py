"""Evaluation metrics, genie-aided linear MMSE bounds and a quadrature
reference for the scalar spike-and-slab posterior."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import logsumexp

NMSE_FLOOR_DB = -200.0
SUCCESS_DB = -30.0


class QuadratureError(RuntimeError):
    """The integration window misses more than the allowed tail mass."""


# ---------------------------------------------------------------------------
# quadrature oracle


def _log_tail_1d(logf: np.ndarray, h: float) -> float:
    """Log of an upper bound on the mass beyond both ends of a sampled
    log-concave profile: ``f(edge) / |d log f / dx|`` at each edge."""
    out = []
    for edge, inner in ((logf[0], logf[1]), (logf[-1], logf[-2])):
        slope = (inner - edge) / h
        if slope <= 0:
            return math.inf
        out.append(edge - math.log(slope))
    return float(logsumexp(out))


def quadrature_bg_oracle(r: complex, v: float, lam: float, tau: float,
                         grid_half_width: float = 10.0, grid_points: int = 401,
                         max_tail: float = 1e-8) -> tuple[complex, float]:
    """Posterior mean and variance of ``x ~ lam CN(0, tau) + (1 - lam) delta_0``
    given ``r = x + CN(0, v)``, by brute-force integration.

    The slab part is integrated with the 2-D trapezoidal rule on a square
    ``grid_points x grid_points`` lattice over the complex plane, centred on
    the mode of the slab integrand and extending ``grid_half_width`` standard
    deviations of one real coordinate in each direction. The spike enters as
    an explicit atom at zero. Everything is accumulated in the log domain.
    """
    if grid_points < 201:
        raise ValueError("grid_points must be >= 201")
    if v <= 0 or tau <= 0 or not 0.0 <= lam <= 1.0:
        raise ValueError("need v > 0, tau > 0 and lam in [0, 1]")
    r = complex(r)
    log_spike = (math.log1p(-lam) if lam < 1 else -math.inf) - math.log(math.pi * v) - abs(r) ** 2 / v
    if lam == 0:
        return 0j, 0.0

    # window: the slab integrand is a product of two Gaussians in x
    prec = 1.0 / tau + 1.0 / v
    centre = (r / v) / prec
    sd = math.sqrt(0.5 / prec)  # per real coordinate
    a = centre.real + sd * grid_half_width * np.linspace(-1.0, 1.0, grid_points)
    b = centre.imag + sd * grid_half_width * np.linspace(-1.0, 1.0, grid_points)
    h = a[1] - a[0]
    xr, xi = np.meshgrid(a, b, indexing="ij")
    x = xr + 1j * xi
    logf = (math.log(lam) - math.log(math.pi * tau) - math.log(math.pi * v)
            - (xr**2 + xi**2) / tau - np.abs(r - x) ** 2 / v)

    # tail mass outside the square, relative to the captured slab mass
    shift = float(logf.max())
    f = np.exp(logf - shift)
    mid = grid_points // 2
    for line, axis in ((logf[:, mid], a), (logf[mid, :], b)):
        captured = math.log(trapezoid(np.exp(line - shift), axis)) + shift
        if _log_tail_1d(line, h) - captured > math.log(max_tail / 2):
            raise QuadratureError("integration window too narrow; increase grid_half_width")
    z_slab = trapezoid(trapezoid(f, b, axis=1), a)
    m1 = trapezoid(trapezoid(x * f, b, axis=1), a)
    m2 = trapezoid(trapezoid((xr**2 + xi**2) * f, b, axis=1), a)

    log_z_slab = math.log(z_slab) + shift
    log_z = float(np.logaddexp(log_z_slab, log_spike))
    w = math.exp(shift - log_z)  # converts integrals of f into posterior moments
    mean = complex(m1) * w
    second = float(m2) * w
    return mean, max(second - abs(mean) ** 2, 0.0)


# ---------------------------------------------------------------------------
# genie-aided linear MMSE


def _lmmse_bilateral(Y, left, right, prior_var: float, tau_n: float) -> np.ndarray:
    """LMMSE of ``Z`` (i.i.d. entries of variance ``prior_var``) from
    ``Y = left @ Z @ right + CN(0, tau_n)``, via SVDs of the two factors."""
    Ul, sl, Vlh = np.linalg.svd(left, full_matrices=True)
    Ur, sr, Vrh = np.linalg.svd(right, full_matrices=True)
    Yt = Ul.conj().T @ Y @ Vrh.conj().T
    gl = np.zeros(Vlh.shape[0])
    gl[: sl.size] = sl
    gr = np.zeros(Ur.shape[0])
    gr[: sr.size] = sr
    gain = np.outer(gl, gr)  # Vlh.shape[0] x Ur.shape[0]
    yt = np.zeros(gain.shape, dtype=complex)
    k1, k2 = min(Yt.shape[0], gain.shape[0]), min(Yt.shape[1], gain.shape[1])
    yt[:k1, :k2] = Yt[:k1, :k2]
    denom = prior_var * gain**2 + tau_n
    with np.errstate(invalid="ignore", divide="ignore"):
        zt = np.where(denom > 0, prior_var * gain * yt / denom, 0.0)
    return Vlh.conj().T @ zt @ Ur.conj().T


def genie_mmse_x(Y, Q, G_true, support, tau_h, tau_n: float) -> np.ndarray:
    """Linear MMSE of X given the true G and the true activity support.

    Solves ``Y = G X_S Q_S + N`` with independent columns ``x_k ~ CN(0, tau_h[k] I)``
    for ``k`` in the support; all other columns are returned as zero.
    """
    Y, Q, G = np.asarray(Y, complex), np.asarray(Q, complex), np.asarray(G_true, complex)
    support = np.asarray(support, dtype=int)
    tau_h = np.broadcast_to(np.asarray(tau_h, dtype=float), (Q.shape[0],))
    if support.size == 0:
        raise ValueError("support must be nonempty")
    X = np.zeros((G.shape[1], Q.shape[0]), dtype=complex)
    d = np.sqrt(tau_h[support])
    # whitening: x_k = sqrt(tau_k) u_k with u_k ~ CN(0, I)
    U = _lmmse_bilateral(Y, G, d[:, None] * Q[support], 1.0, tau_n)
    X[:, support] = U * d[None, :]
    return X


def genie_mmse_s(Y, Q, X_true, A_B, A_R, tau_s: float, tau_n: float, support_mask=None) -> np.ndarray:
    """Linear MMSE of S given the true X: ``Y = A_B S (A_R^H X Q) + N``.

    Without ``support_mask`` every entry of S is ``CN(0, tau_s)``; with a
    boolean M' x N' mask only the flagged entries are unknown (the others
    are zero), which is the natural genie for on-grid scenes.
    """
    Y = np.asarray(Y, complex)
    right = np.asarray(A_R).conj().T @ np.asarray(X_true) @ np.asarray(Q)
    A_B = np.asarray(A_B)
    if support_mask is None:
        return _lmmse_bilateral(Y, A_B, right, tau_s, tau_n)
    mask = np.asarray(support_mask, dtype=bool)
    idx = np.argwhere(mask)
    S = np.zeros(mask.shape, dtype=complex)
    if idx.size == 0:
        return S
    # columns of the dense operator: vec(a_B,i right_j)
    Phi = np.stack([np.outer(A_B[:, i], right[j]).ravel() for i, j in idx], axis=1)
    normal = Phi.conj().T @ Phi + (tau_n / tau_s) * np.eye(len(idx))
    if tau_n == 0:
        normal = normal + np.finfo(float).eps * np.trace(normal).real * np.eye(len(idx))
    s = np.linalg.solve(normal, Phi.conj().T @ Y.ravel())
    S[mask] = s
    return S


# ---------------------------------------------------------------------------
# error metrics


def _scale(truth, estimate) -> complex:
    e2 = float(np.vdot(estimate, estimate).real)
    return complex(np.vdot(estimate, truth) / e2) if e2 > 0 else 0j


def nmse_db(truth, estimate, resolve_scale: bool = True) -> float:
    """``10 log10(||T - c E||^2 / ||T||^2)`` with ``c = 1`` or the best complex
    scalar; floored at -200 dB."""
    T, E = np.asarray(truth), np.asarray(estimate)
    if T.shape != E.shape:
        raise ValueError(f"shape mismatch {T.shape} vs {E.shape}")
    t2 = float(np.sum(np.abs(T) ** 2))
    if t2 == 0:
        raise ValueError("NMSE undefined for an all-zero truth")
    c = _scale(T, E) if resolve_scale else 1.0
    err = float(np.sum(np.abs(T - c * E) ** 2)) / t2
    return NMSE_FLOOR_DB if err <= 10 ** (NMSE_FLOOR_DB / 10) else 10.0 * math.log10(err)


def avg_nmse_h_db(H, H_hat, support, resolve_scale: bool = True) -> float:
    """Mean over active devices of ``||h_k - c h_hat_k||^2 / ||h_k||^2``, in dB.

    The scalar ``c`` is shared by all columns (the factorization ambiguity is
    one scalar for the whole of X) and minimizes the averaged ratio.
    """
    H, H_hat = np.asarray(H), np.asarray(H_hat)
    support = np.asarray(support, dtype=int)
    if support.size == 0:
        raise ValueError("support must be nonempty")
    T, E = H[:, support], H_hat[:, support]
    w = 1.0 / np.sum(np.abs(T) ** 2, axis=0)
    if not np.all(np.isfinite(w)):
        raise ValueError("zero channel column on the support")
    c = 1.0
    if resolve_scale:
        den = float(np.sum(w * np.sum(np.abs(E) ** 2, axis=0)))
        c = complex(np.sum(w * np.sum(E.conj() * T, axis=0)) / den) if den > 0 else 0j
    ratios = w * np.sum(np.abs(T - c * E) ** 2, axis=0)
    err = float(np.mean(ratios))
    return NMSE_FLOOR_DB if err <= 10 ** (NMSE_FLOOR_DB / 10) else 10.0 * math.log10(err)


# ---------------------------------------------------------------------------
# detection


def detection_rates(alpha_true, scores, threshold: float) -> tuple[float, float]:
    """False-alarm and missed-detection rates of ``score > threshold``.

    ``p_f = P(declared active | inactive)``, ``p_m = P(declared inactive | active)``.
    A rate with no devices in its conditioning class is returned as NaN.
    """
    alpha = np.asarray(alpha_true).astype(bool)
    scores = np.asarray(scores, dtype=float)
    if alpha.shape != scores.shape:
        raise ValueError("alpha_true and scores must have the same length")
    declared = scores > threshold
    n_in, n_act = int(np.sum(~alpha)), int(np.sum(alpha))
    p_f = float(np.sum(declared & ~alpha)) / n_in if n_in else float("nan")
    p_m = float(np.sum(~declared & alpha)) / n_act if n_act else float("nan")
    return p_f, p_m


@dataclass(frozen=True)
class Roc:
    thresholds: np.ndarray  # ascending
    p_f: np.ndarray
    p_m: np.ndarray
    operating_threshold: float  # p_f closest to the target
    target_pf: float

    def auc(self) -> float:
        """Area under the detection curve ``(p_f, 1 - p_m)``."""
        order = np.argsort(self.p_f, kind="stable")
        pf, pd = self.p_f[order], 1.0 - self.p_m[order]
        pf = np.concatenate([[0.0], pf, [1.0]])
        pd = np.concatenate([[0.0], pd, [1.0]])
        return float(trapezoid(pd, pf))


def roc_sweep(alpha_true, scores, n_points: int = 101, target_pf: float = 0.1) -> Roc:
    """Rates at thresholds placed on the quantiles of the observed scores."""
    scores = np.asarray(scores, dtype=float)
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    thr = np.unique(np.quantile(scores, np.linspace(0.0, 1.0, n_points)))
    rates = np.array([detection_rates(alpha_true, scores, t) for t in thr])
    pf, pm = rates[:, 0], rates[:, 1]
    if np.all(np.isnan(pf)):
        op = float(thr[-1])
    else:
        gap = np.abs(pf - target_pf)
        # ties go to the larger threshold (fewer false alarms)
        op = float(thr[np.flatnonzero(gap == np.nanmin(gap))[-1]])
    return Roc(thr, pf, pm, op, target_pf)


# ---------------------------------------------------------------------------
# per-trial report


@dataclass
class MetricReport:
    """Metrics of one trial. :meth:`to_row` gives the CSV row; the column
    order is :data:`REPORT_COLUMNS` and is part of the output contract."""

    point: str = ""  # "<param>=<value>", empty for single runs
    trial: int = 0
    seed: int = 0
    n_active: int = 0
    nmse_g_db: float = float("nan")  # scale-resolved
    nmse_g_raw_db: float = float("nan")
    avg_nmse_h_db: float = float("nan")  # scale-resolved
    avg_nmse_h_raw_db: float = float("nan")
    p_f: float = float("nan")  # at the run's own threshold epsilon
    p_m: float = float("nan")
    epsilon: float = float("nan")
    auc: float = float("nan")
    success: bool = False
    genie_nmse_g_db: float = float("nan")
    genie_avg_nmse_h_db: float = float("nan")
    iterations: int = 0
    converged: bool = False
    diverged: bool = False
    failed: bool = False
    error: str = ""
    snr_db: float = float("nan")  # realized
    runtime_s: float = 0.0
    scores: np.ndarray | None = field(default=None, repr=False)
    alpha_true: np.ndarray | None = field(default=None, repr=False)

    def to_row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in REPORT_COLUMNS}


REPORT_COLUMNS = (
    "point", "trial", "seed", "n_active", "nmse_g_db", "nmse_g_raw_db", "avg_nmse_h_db",
    "avg_nmse_h_raw_db", "p_f", "p_m", "epsilon", "auc", "success", "genie_nmse_g_db",
    "genie_avg_nmse_h_db", "iterations", "converged", "diverged", "failed", "error", "snr_db",
)


def is_success(nmse_g: float, nmse_h: float, level_db: float = SUCCESS_DB) -> bool:
    return bool(nmse_g <= level_db and nmse_h <= level_db)
