"""Scenario configuration.

A :class:`SystemConfig` bundles array sizes, geometry, path-loss constants,
the cluster model for the RIS-to-BS link, prior hyperparameters and the
estimator knobs. Defaults follow the large-scale simulation setting; the
``desk`` profile is a scaled-down variant used by the test-suite and CI.

Configuration files are YAML documents with *flat* dotted keys, e.g.::

    profile: desk          # optional base profile (desk | paper)
    K: 100                 # devices
    geometry.z_R: 10.0     # m
    amp.I_max: 300

Nested mappings are accepted too and are flattened before use.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass(frozen=True)
class Geometry:
    z_R: float = 10.0  # m, BS/RIS height above the device plane
    x_R: float = 5.0  # m
    y_R: float = 100.0  # m
    O_x: float = 60.0  # m, centre of the device disk
    O_y: float = 60.0  # m
    R: float = 50.0  # m, radius of the device disk


@dataclass(frozen=True)
class PathLoss:
    tau_0: float = 1e-3  # linear, -30 dB at the reference distance
    d_0: float = 1.0  # m
    mu_G: float = 2.2
    mu_h: float = 2.5
    # "amplitude": G is scaled by sqrt(path loss); "power": by the path loss itself
    tau_G_convention: str = "amplitude"


@dataclass(frozen=True)
class ClusterModel:
    n_clusters: int = 10
    subpaths_per_cluster: int = 5
    angular_spread: float = math.pi / 12  # rad
    offset_distribution: str = "uniform"  # uniform | gaussian

    @property
    def n_paths(self) -> int:
        return self.n_clusters * self.subpaths_per_cluster


@dataclass(frozen=True)
class PriorConfig:
    # None -> derived from the scene model (see estimator_priors)
    lambda_s: float | None = None
    tau_s: float | None = None


@dataclass(frozen=True)
class AmpConfig:
    I_max: int = 2000
    damping: float = 0.07  # step on the w, g, x, s updates; 1 = undamped
    tol: float = 1e-6
    epsilon_threshold: float | None = None  # None -> relative default, see amp.run
    variance_floor: float = 1e-12
    record_trajectory: bool = False
    safeguard: bool = True  # clamp the self-feedback factors of b and c at zero
    max_restarts: int = 3  # damping halvings after a detected divergence


@dataclass(frozen=True)
class SceneConfig:
    kind: str = "geometric"  # geometric | on_grid
    n_paths: int = 4  # on_grid only


@dataclass(frozen=True)
class SystemConfig:
    K: int = 1000
    M: int = 40
    N1: int = 7
    N2: int = 7
    L: int = 130
    grid_ratio: int = 2
    # explicit grid sizes; None -> grid_ratio * array size
    M_grid: int | None = None
    N1_grid: int | None = None
    N2_grid: int | None = None
    lambda_alpha: float = 0.08
    tau_n: float = 1e-14  # linear; ignored when snr_db is set
    snr_db: float | None = 20.0  # realized SNR, see model.noise_power_for_snr
    spacing_ratio: float = 0.5  # antenna spacing over wavelength
    geometry: Geometry = field(default_factory=Geometry)
    pathloss: PathLoss = field(default_factory=PathLoss)
    cluster_model: ClusterModel = field(default_factory=ClusterModel)
    priors: PriorConfig = field(default_factory=PriorConfig)
    amp: AmpConfig = field(default_factory=AmpConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    trials: int = 50
    seed: int = 0

    def __post_init__(self):
        _validate(self)

    @property
    def N(self) -> int:
        return self.N1 * self.N2

    @property
    def Mp(self) -> int:
        return self.M_grid if self.M_grid is not None else self.grid_ratio * self.M

    @property
    def N1p(self) -> int:
        return self.N1_grid if self.N1_grid is not None else self.grid_ratio * self.N1

    @property
    def N2p(self) -> int:
        return self.N2_grid if self.N2_grid is not None else self.grid_ratio * self.N2

    @property
    def Np(self) -> int:
        return self.N1p * self.N2p

    def with_overrides(self, **flat: Any) -> "SystemConfig":
        """Return a copy with dotted-key overrides applied (``amp.I_max=10``)."""
        return apply_overrides(self, flat)

    def to_flat_dict(self) -> dict[str, Any]:
        return _flatten(dataclasses.asdict(self))

    def config_hash(self) -> str:
        blob = json.dumps(self.to_flat_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _validate(cfg: SystemConfig) -> None:
    for name in ("K", "M", "N1", "N2", "L", "grid_ratio", "trials"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be >= 1, got {getattr(cfg, name)}")
    if cfg.Mp < cfg.M or cfg.N1p < cfg.N1 or cfg.N2p < cfg.N2:
        raise ConfigError(
            f"angular grids ({cfg.Mp}, {cfg.N1p}, {cfg.N2p}) must be at least as "
            f"large as the arrays ({cfg.M}, {cfg.N1}, {cfg.N2})"
        )
    if not 0.0 < cfg.lambda_alpha < 1.0:
        raise ConfigError(f"lambda_alpha must lie in (0, 1), got {cfg.lambda_alpha}")
    if not cfg.tau_n > 0:
        raise ConfigError("tau_n must be positive")
    if not cfg.spacing_ratio > 0:
        raise ConfigError("spacing_ratio must be positive")
    pl = cfg.pathloss
    if not (pl.tau_0 > 0 and pl.d_0 > 0):
        raise ConfigError("tau_0 and d_0 must be positive")
    if pl.tau_G_convention not in ("amplitude", "power"):
        raise ConfigError(f"unknown tau_G convention {pl.tau_G_convention!r}")
    cm = cfg.cluster_model
    if cm.n_clusters < 1 or cm.subpaths_per_cluster < 1 or cm.angular_spread < 0:
        raise ConfigError("invalid cluster model")
    if cm.offset_distribution not in ("uniform", "gaussian"):
        raise ConfigError(f"unknown offset distribution {cm.offset_distribution!r}")
    pr = cfg.priors
    if pr.lambda_s is not None and not 0.0 < pr.lambda_s < 1.0:
        raise ConfigError("priors.lambda_s must lie in (0, 1)")
    if pr.tau_s is not None and not pr.tau_s > 0:
        raise ConfigError("priors.tau_s must be positive")
    amp = cfg.amp
    if amp.I_max < 1:
        raise ConfigError("amp.I_max must be >= 1")
    if not 0.0 < amp.damping <= 1.0:
        raise ConfigError("amp.damping must lie in (0, 1]")
    if amp.tol < 0 or amp.variance_floor <= 0:
        raise ConfigError("amp.tol must be >= 0 and amp.variance_floor > 0")
    if amp.max_restarts < 0:
        raise ConfigError("amp.max_restarts must be >= 0")
    if amp.epsilon_threshold is not None and amp.epsilon_threshold < 0:
        raise ConfigError("amp.epsilon_threshold must be >= 0")
    if cfg.scene.kind not in ("geometric", "on_grid"):
        raise ConfigError(f"unknown scene kind {cfg.scene.kind!r}")
    if cfg.scene.kind == "on_grid" and not 0 <= cfg.scene.n_paths <= cfg.Mp * cfg.Np:
        raise ConfigError("scene.n_paths must lie in [0, M'N']")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")


def paper_profile() -> SystemConfig:
    return SystemConfig()


def desk_profile() -> SystemConfig:
    return SystemConfig(
        K=100,
        lambda_alpha=0.1,
        M=16,
        N1=4,
        N2=4,
        L=40,
        grid_ratio=2,
        amp=AmpConfig(I_max=300),
        trials=20,
    )


PROFILES = {"desk": desk_profile, "paper": paper_profile}


def _flatten(d: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in d.items():
        path = f"{prefix}{key}"
        if isinstance(value, Mapping):
            out.update(_flatten(value, path + "."))
        else:
            out[path] = value
    return out


def apply_overrides(cfg: SystemConfig, flat: Mapping[str, Any]) -> SystemConfig:
    nested: dict[str, dict[str, Any]] = {}
    top: dict[str, Any] = {}
    names = {f.name: f for f in dataclasses.fields(SystemConfig)}
    for key, value in flat.items():
        head, _, rest = key.partition(".")
        if head not in names:
            raise ConfigError(f"unknown configuration key {key!r}")
        if rest:
            nested.setdefault(head, {})[rest] = value
        else:
            top[head] = value
    try:
        for head, sub in nested.items():
            current = getattr(cfg, head)
            known = {f.name for f in dataclasses.fields(current)}
            unknown = set(sub) - known
            if unknown:
                raise ConfigError(f"unknown keys under {head!r}: {sorted(unknown)}")
            top[head] = dataclasses.replace(current, **sub)
        return dataclasses.replace(cfg, **top)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path | None = None, profile: str | None = None,
                fallback: str = "paper") -> SystemConfig:
    """Load a configuration file on top of a base profile.

    The profile passed explicitly wins over a ``profile:`` key in the file,
    which wins over ``fallback``.
    """
    flat: dict[str, Any] = {}
    if path is not None:
        try:
            doc = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, Mapping):
            raise ConfigError("config file must contain a mapping")
        flat = _flatten(doc)
    file_profile = flat.pop("profile", None)
    flat = {k: v for k, v in flat.items() if not k.startswith("sweep.")}
    name = profile or file_profile or fallback
    if name not in PROFILES:
        raise ConfigError(f"unknown profile {name!r}")
    return apply_overrides(PROFILES[name](), flat)


def load_sweep_section(path: str | Path | None) -> dict[str, Any]:
    """Return the ``sweep.*`` keys of a config file (without the prefix)."""
    if path is None:
        return {}
    try:
        doc = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise ConfigError("config file must contain a mapping")
    flat = _flatten(doc)
    return {k[len("sweep."):]: v for k, v in flat.items() if k.startswith("sweep.")}
