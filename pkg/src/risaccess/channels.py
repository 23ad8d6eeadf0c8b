"""Channel generation for the RIS-to-BS and RIS-to-device links.

The BS carries an M-element ULA, the RIS an N1 x N2 URA. The RIS-to-BS
channel is a clustered geometric channel; RIS-to-device links are Rayleigh
with distance-dependent path loss. ``build_vad_dictionaries`` returns the
over-complete angular dictionaries used to write ``G = A_B S A_R^H``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from risaccess.config import ConfigError, SystemConfig
from risaccess.model import (
    SceneRealization,
    crandn,
    generate_pilots,
    noise_power_for_snr,
    sample_activity,
    synthesize_observation,
)


@dataclass(frozen=True)
class SubPath:
    theta: float  # BS AoA
    psi: float  # RIS azimuth AoD
    omega: float  # RIS elevation AoD
    kappa: complex


@dataclass(frozen=True)
class PathCluster:
    center_aoa_bs: float
    center_azimuth_aod_ris: float
    center_elevation_aod_ris: float
    subpaths: tuple[SubPath, ...]


@dataclass(frozen=True)
class VadDictionaries:
    A_B: np.ndarray  # M x M'
    A_Rh: np.ndarray  # N1 x N1'
    A_Rv: np.ndarray  # N2 x N2'
    A_R: np.ndarray  # N x N' = A_Rv kron A_Rh
    theta_grid: np.ndarray
    phi_grid: np.ndarray
    varpi_grid: np.ndarray

    def __post_init__(self):
        for name in ("A_B", "A_Rh", "A_Rv", "A_R", "theta_grid", "phi_grid", "varpi_grid"):
            a = np.array(getattr(self, name), copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def synthesize(self, S: np.ndarray) -> np.ndarray:
        """``A_B S A_R^H``."""
        return self.A_B @ S @ self.A_R.conj().T


def ula_steering(M: int, theta, spacing_ratio: float = 0.5) -> np.ndarray:
    """ULA response ``exp(-j 2 pi d m sin(theta)) / sqrt(M)``.

    A scalar ``theta`` gives a length-M vector, an array of angles an
    ``M x len(theta)`` matrix.
    """
    m = np.arange(M)
    phase = np.multiply.outer(m, np.sin(np.asarray(theta, dtype=float)))
    return np.exp(-2j * np.pi * spacing_ratio * phase) / np.sqrt(M)


def _factor_steering(n: int, freq, spacing_ratio: float, sign: float) -> np.ndarray:
    idx = np.arange(n)
    return np.exp(sign * 2j * np.pi * spacing_ratio * np.multiply.outer(idx, np.asarray(freq, float))) / np.sqrt(n)


def ura_steering(N1: int, N2: int, psi: float, omega: float, spacing_ratio: float = 0.5) -> np.ndarray:
    """URA response ``a_v(psi, omega) kron a_h(psi, omega)`` (length N1*N2)."""
    f_h = np.cos(omega) * np.sin(psi)
    f_v = np.cos(omega) * np.cos(psi)
    a_h = _factor_steering(N1, f_h, spacing_ratio, -1.0)
    a_v = _factor_steering(N2, f_v, spacing_ratio, +1.0)
    return np.kron(a_v, a_h)


def path_loss(d, mu: float, tau_0: float = 1e-3, d_0: float = 1.0):
    """Linear power gain ``tau_0 (d / d_0)^(-mu)``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = tau_0 * (d / d_0) ** (-mu)
    return float(out) if out.ndim == 0 else out


def ris_bs_distance(config: SystemConfig) -> float:
    g = config.geometry
    return float(np.hypot(g.x_R, g.y_R))


def tau_G(config: SystemConfig) -> float:
    """Gain applied to G, following the configured amplitude/power convention."""
    pl = config.pathloss
    power = path_loss(ris_bs_distance(config), pl.mu_G, pl.tau_0, pl.d_0)
    return float(np.sqrt(power)) if pl.tau_G_convention == "amplitude" else power


def sample_clusters(config: SystemConfig, rng: np.random.Generator) -> tuple[PathCluster, ...]:
    cm = config.cluster_model
    clusters = []
    for _ in range(cm.n_clusters):
        c_theta = rng.uniform(-np.pi / 2, np.pi / 2)
        c_psi = rng.uniform(-np.pi, np.pi)
        c_omega = rng.uniform(-np.pi / 2, np.pi / 2)
        if cm.offset_distribution == "uniform":
            offs = rng.uniform(-cm.angular_spread, cm.angular_spread, size=(cm.subpaths_per_cluster, 3))
        else:
            offs = np.clip(
                rng.normal(0.0, cm.angular_spread / 2, size=(cm.subpaths_per_cluster, 3)),
                -cm.angular_spread,
                cm.angular_spread,
            )
        kappas = crandn(rng, cm.subpaths_per_cluster)
        subpaths = tuple(
            SubPath(c_theta + o[0], c_psi + o[1], c_omega + o[2], complex(k)) for o, k in zip(offs, kappas)
        )
        clusters.append(PathCluster(c_theta, c_psi, c_omega, subpaths))
    return tuple(clusters)


def channel_from_paths(config: SystemConfig, paths, gain: float) -> np.ndarray:
    """``gain * sqrt(MN/P) * sum_p kappa_p a_B(theta_p) a_R(psi_p, omega_p)^H``."""
    M, N1, N2, d = config.M, config.N1, config.N2, config.spacing_ratio
    paths = list(paths)
    G = np.zeros((M, N1 * N2), dtype=complex)
    if not paths:
        return G
    for p in paths:
        a_b = ula_steering(M, p.theta, d)
        a_r = ura_steering(N1, N2, p.psi, p.omega, d)
        G += p.kappa * np.outer(a_b, a_r.conj())
    return gain * np.sqrt(M * N1 * N2 / len(paths)) * G


def sample_ris_to_bs_channel(config: SystemConfig, rng: np.random.Generator):
    clusters = sample_clusters(config, rng)
    paths = [p for c in clusters for p in c.subpaths]
    return channel_from_paths(config, paths, tau_G(config)), clusters


def sample_device_distances(config: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """3-D distances for devices uniform in the coverage disk."""
    g = config.geometry
    r = g.R * np.sqrt(rng.random(config.K))
    ang = rng.uniform(0.0, 2 * np.pi, config.K)
    return device_distance(config, r * np.cos(ang), r * np.sin(ang))


def device_distance(config: SystemConfig, dx, dy):
    g = config.geometry
    return np.sqrt((g.O_x + np.asarray(dx)) ** 2 + (g.O_y + np.asarray(dy)) ** 2 + g.z_R**2)


def sample_ris_to_device_channels(config: SystemConfig, distances, rng: np.random.Generator) -> np.ndarray:
    """N x K Rayleigh channels, column k with variance ``path_loss(d_k, mu_h)``."""
    pl = config.pathloss
    tau_h = path_loss(np.asarray(distances, float), pl.mu_h, pl.tau_0, pl.d_0)
    tau_h = np.atleast_1d(tau_h)
    return crandn(rng, (config.N, tau_h.size), tau_h[None, :])


def angular_grids(config: SystemConfig):
    # endpoint excluded: +pi/2 (resp. +-pi) aliases the first grid point, and
    # grids of ratio 2r contain those of ratio r
    theta = np.linspace(-np.pi / 2, np.pi / 2, config.Mp, endpoint=False)
    phi = np.linspace(-np.pi, np.pi, config.N1p, endpoint=False)
    varpi = np.linspace(-np.pi / 2, np.pi / 2, config.N2p, endpoint=False)
    return theta, phi, varpi


def build_vad_dictionaries(config: SystemConfig) -> VadDictionaries:
    """Over-complete angular dictionaries.

    BS columns are ULA responses at the AoA grid. The RIS factor grids map
    linearly onto the spatial frequency range [-1, 1): ``f_h = phi / pi`` and
    ``f_v = 2 varpi / pi``, so each factor is an oversampled DFT frame.
    """
    if config.Mp < config.M or config.N1p < config.N1 or config.N2p < config.N2:
        raise ConfigError("angular grid smaller than the array")
    d = config.spacing_ratio
    theta, phi, varpi = angular_grids(config)
    A_B = ula_steering(config.M, theta, d)
    A_Rh = _factor_steering(config.N1, phi / np.pi, d, -1.0)
    A_Rv = _factor_steering(config.N2, 2 * varpi / np.pi, d, +1.0)
    return VadDictionaries(A_B, A_Rh, A_Rv, np.kron(A_Rv, A_Rh), theta, phi, varpi)


def best_atom_error(G: np.ndarray, dicts: VadDictionaries) -> float:
    """Relative LS error of the best single-atom fit ``c a_B(i) a_R(j)^H`` to G."""
    corr = dicts.A_B.conj().T @ G @ dicts.A_R  # unit-norm atoms -> projection coefficients
    best = np.max(np.abs(corr) ** 2)
    return float(1.0 - best / np.sum(np.abs(G) ** 2))


def default_tau_s(config: SystemConfig, lambda_s: float) -> float:
    """Slab variance matching ``E||G||_F^2 = tau_G^2 M N`` under the VAD prior."""
    return tau_G(config) ** 2 * config.M * config.N / (config.Mp * config.Np * lambda_s)


def default_lambda_s(config: SystemConfig) -> float:
    if config.priors.lambda_s is not None:
        return config.priors.lambda_s
    if config.scene.kind == "on_grid":
        return max(config.scene.n_paths, 1) / (config.Mp * config.Np)
    lam = config.cluster_model.n_paths / (config.Mp * config.Np)
    return float(np.clip(lam, 0.01, 0.5))


def _finish_scene(config, rng, G, dicts, s_true=None, clusters=None) -> SceneRealization:
    activity = sample_activity(config.K, config.lambda_alpha, rng)
    distances = sample_device_distances(config, rng)
    H = sample_ris_to_device_channels(config, distances, rng)
    pl = config.pathloss
    tau_h = np.atleast_1d(path_loss(distances, pl.mu_h, pl.tau_0, pl.d_0))
    Q = generate_pilots(config.K, config.L, rng)
    X = H * activity.alpha[None, :]
    tau_n = config.tau_n
    if config.snr_db is not None:
        realized = noise_power_for_snr(G @ X @ Q, config.snr_db)
        if realized > 0:
            tau_n = realized
    Y = synthesize_observation(G, X, Q, tau_n, rng)
    return SceneRealization(
        G=G, H=H, activity=activity, Q=Q, Y=Y, tau_n=tau_n, tau_h=tau_h,
        dictionaries=dicts, s_true=s_true, clusters=clusters, distances=distances,
    )


def make_scene(config: SystemConfig, rng: np.random.Generator) -> SceneRealization:
    """Draw a full scene according to ``config.scene.kind``."""
    if config.scene.kind == "on_grid":
        return make_on_grid_scene(config, config.scene.n_paths, rng)
    dicts = build_vad_dictionaries(config)
    G, clusters = sample_ris_to_bs_channel(config, rng)
    return _finish_scene(config, rng, G, dicts, clusters=clusters)


def make_on_grid_scene(config: SystemConfig, n_paths: int, rng: np.random.Generator) -> SceneRealization:
    """Scene whose RIS-to-BS channel is exactly ``A_B S A_R^H`` for a sparse S."""
    dicts = build_vad_dictionaries(config)
    Mp, Np = config.Mp, config.Np
    if not 0 <= n_paths <= Mp * Np:
        raise ConfigError("n_paths must lie in [0, M'N']")
    lam = default_lambda_s(config) if config.priors.lambda_s is None else config.priors.lambda_s
    tau_s = config.priors.tau_s if config.priors.tau_s is not None else default_tau_s(config, lam)
    S = np.zeros((Mp, Np), dtype=complex)
    idx = rng.choice(Mp * Np, size=n_paths, replace=False)
    S.flat[idx] = crandn(rng, n_paths, tau_s)
    G = dicts.synthesize(S)
    return _finish_scene(config, rng, G, dicts, s_true=S)


_MAGIC = b"VADD"


def dump_dictionaries(dicts: VadDictionaries, path: str | Path) -> None:
    """Binary dump: magic, uint32 count, then per matrix (uint32 name length,
    name, uint32 rows, uint32 cols, row-major little-endian complex64)."""
    mats = {"A_B": dicts.A_B, "A_Rh": dicts.A_Rh, "A_Rv": dicts.A_Rv, "A_R": dicts.A_R}
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<I", len(mats)))
        for name, a in mats.items():
            raw = name.encode()
            fh.write(struct.pack("<I", len(raw)) + raw + struct.pack("<II", *a.shape))
            fh.write(np.ascontiguousarray(a, dtype="<c8").tobytes())


def load_dictionary_dump(path: str | Path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    if blob[:4] != _MAGIC:
        raise ValueError("not a dictionary dump")
    (count,) = struct.unpack_from("<I", blob, 4)
    pos, out = 8, {}
    for _ in range(count):
        (n,) = struct.unpack_from("<I", blob, pos)
        name = blob[pos + 4: pos + 4 + n].decode()
        rows, cols = struct.unpack_from("<II", blob, pos + 4 + n)
        pos += 12 + n
        size = rows * cols * 8
        out[name] = np.frombuffer(blob[pos: pos + size], dtype="<c8").reshape(rows, cols)
        pos += size
    return out
