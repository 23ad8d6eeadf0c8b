"""Signal model: activity, pilots and the received block ``Y = G X Q + N``."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from risaccess.config import ConfigError

if TYPE_CHECKING:
    from risaccess.channels import PathCluster, VadDictionaries


def derive_seed(root_seed: int, trial_index: int, stream_tag: str) -> int:
    """64-bit stream seed: ``root_seed XOR blake2b(trial_index, stream_tag)``."""
    digest = hashlib.blake2b(f"{trial_index}:{stream_tag}".encode(), digest_size=8).digest()
    return (int(root_seed) ^ int.from_bytes(digest, "little")) & (2**64 - 1)


def derive_rng(root_seed: int, trial_index: int, stream_tag: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root_seed, trial_index, stream_tag))


def crandn(rng: np.random.Generator, shape, var: float | np.ndarray = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with per-entry variance ``var``."""
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z * np.sqrt(np.asarray(var) / 2.0)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ActivityPattern:
    alpha: np.ndarray  # (K,) of {0, 1}

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frozen(np.asarray(self.alpha, dtype=np.int8)))

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.alpha)

    @property
    def K(self) -> int:
        return self.alpha.size


def sample_activity(K: int, lambda_alpha: float, rng: np.random.Generator) -> ActivityPattern:
    if K < 1:
        raise ConfigError("K must be >= 1")
    if not 0.0 < lambda_alpha < 1.0:
        raise ConfigError(f"activity probability must lie in (0, 1), got {lambda_alpha}")
    return ActivityPattern((rng.random(K) < lambda_alpha).astype(np.int8))


def generate_pilots(K: int, L: int, rng: np.random.Generator) -> np.ndarray:
    """K x L pilot matrix with i.i.d. CN(0, 1/L) entries (unit norm in expectation)."""
    if K < 1 or L < 1:
        raise ConfigError("pilot dimensions must be >= 1")
    return crandn(rng, (K, L), 1.0 / L)


def synthesize_observation(G, X, Q, tau_n: float, rng: np.random.Generator) -> np.ndarray:
    """``Y = G X Q + N`` with i.i.d. CN(0, tau_n) noise added after the product."""
    G, X, Q = np.asarray(G), np.asarray(X), np.asarray(Q)
    if G.ndim != 2 or X.ndim != 2 or Q.ndim != 2:
        raise ValueError("G, X, Q must be matrices")
    if G.shape[1] != X.shape[0] or X.shape[1] != Q.shape[0]:
        raise ValueError(f"dimension mismatch: G{G.shape} X{X.shape} Q{Q.shape}")
    if tau_n < 0:
        raise ValueError("tau_n must be >= 0")
    Z = G @ X @ Q
    if tau_n == 0:
        return Z.astype(complex)
    return Z + crandn(rng, Z.shape, tau_n)


def noise_power_for_snr(Z: np.ndarray, snr_db: float) -> float:
    """Noise power giving ``||Z||_F^2 / (M L tau_n) = 10^(snr_db/10)``.

    ``Z`` is the noiseless product ``G X Q``; the SNR is per receive-antenna
    sample, averaged over the block.
    """
    energy = float(np.sum(np.abs(Z) ** 2))
    return energy / (Z.size * 10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class SceneRealization:
    G: np.ndarray  # M x N
    H: np.ndarray  # N x K
    activity: ActivityPattern
    Q: np.ndarray  # K x L
    Y: np.ndarray  # M x L
    tau_n: float
    tau_h: np.ndarray  # (K,) per-device channel variance
    dictionaries: "VadDictionaries"
    s_true: np.ndarray | None = None  # M' x N', on-grid scenes only
    clusters: "tuple[PathCluster, ...] | None" = None
    distances: np.ndarray | None = None

    def __post_init__(self):
        for name in ("G", "H", "Q", "Y", "tau_h"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        if self.s_true is not None:
            object.__setattr__(self, "s_true", _frozen(self.s_true))
        M, N = self.G.shape
        N2, K = self.H.shape
        K2, L = self.Q.shape
        if N2 != N or K2 != K or self.Y.shape != (M, L) or self.activity.K != K:
            raise ValueError("inconsistent scene dimensions")

    @property
    def X(self) -> np.ndarray:
        X = self.H * self.activity.alpha[None, :]
        X.setflags(write=False)
        return X

    @property
    def W(self) -> np.ndarray:
        return self.G @ self.X

    @property
    def snr_db(self) -> float:
        Z = self.W @ self.Q
        energy = float(np.sum(np.abs(Z) ** 2))
        if energy == 0.0:
            return float("-inf")
        return 10.0 * np.log10(energy / (Z.size * self.tau_n))
