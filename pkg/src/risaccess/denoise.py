"""Scalar Bernoulli-Gaussian (spike-and-slab) posterior statistics."""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def bg_denoise(r, v, lam, tau):
    """Posterior mean/variance of ``x ~ lam CN(0, tau) + (1 - lam) delta_0``
    observed as ``r = x + CN(0, v)``.

    Works elementwise with broadcasting. Returns ``(mean, var, pi)`` where
    ``pi`` is the posterior probability that ``x`` was drawn from the slab.
    The slab/spike evidence ratio is formed in the log domain so that
    ``pi`` saturates cleanly at high SNR.
    """
    r = np.asarray(r, dtype=complex)
    v = np.asarray(v, dtype=float)
    lam = np.asarray(lam, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v)) and np.all(np.isfinite(tau))):
        raise FloatingPointError("non-finite input to bg_denoise")
    r2 = r.real**2 + r.imag**2
    with np.errstate(divide="ignore"):
        prior_llr = np.log(lam) - np.log1p(-lam)
    llr = prior_llr + np.log(v / (tau + v)) + r2 * tau / (v * (tau + v))
    pi = expit(llr)
    gain = tau / (tau + v)
    slab_mean = gain * r
    slab_var = gain * v
    mean = pi * slab_mean
    var = pi * slab_var + pi * (1.0 - pi) * gain**2 * r2
    return mean, var, pi
