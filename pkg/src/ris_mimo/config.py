"""Experiment configuration.

All knobs live in :class:`ScenarioConfig`, a plain dataclass tree that
round-trips through YAML (``load_config`` / ``dump_config``).
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import yaml


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configurations."""


class FadingVariant(str, Enum):
    ALWAYS_LOS_S1 = "always_los_s1"
    ALWAYS_LOS_S3 = "always_los_s3"
    PROBABILISTIC_LOS = "probabilistic_los"
    CONVENTIONAL = "conventional"

    @property
    def uses_ris(self) -> bool:
        return self is not FadingVariant.CONVENTIONAL


@dataclass
class GeometryConfig:
    """2D deployment in meters; heights come from ``ScenarioConfig.height_offset``."""

    bs_position: tuple[float, float] = (0.0, 0.0)
    ris_positions: tuple[tuple[float, float], ...] = ((10.0, 30.0), (10.0, -30.0))
    drop_area: tuple[tuple[float, float], tuple[float, float]] = ((200.0, -25.0), (300.0, 25.0))
    # boresight azimuth of each RIS (radians); None points it between the BS and the drop area
    ris_orientations: tuple[float, ...] | None = None
    bs_orientation: float = 0.0


@dataclass
class PathlossParams:
    """Urban-microcell propagation coefficients.

    Defaults follow the COST-231 Walfish-Ikegami microcell model evaluated at
    1.9 GHz (the usual SCM urban-micro numbers): ``PL = A + B log10(d)`` in dB
    with d in meters, lognormal shadowing, a linear LOS probability that
    vanishes at ``los_cutoff`` and a Rician factor ``K_dB = k0 - k1 * d``.
    They are configuration, not ground truth.
    """

    los_intercept_db: float = 30.18
    los_slope: float = 26.0
    nlos_intercept_db: float = 34.53
    nlos_slope: float = 38.0
    los_shadow_std_db: float = 4.0
    nlos_shadow_std_db: float = 10.0
    los_cutoff: float = 300.0
    los_floor: float = 0.0
    kfactor_intercept_db: float = 13.0
    kfactor_slope_db: float = 0.03
    # (lambda/4)^2 element aperture relative to an isotropic antenna, applied per RIS hop
    ris_element_gain_db: float = 10.0 * math.log10(4.0 * math.pi / 16.0)
    shadow_bs_ris: bool = False


@dataclass
class TrialConfig:
    drops: int = 50
    blocks: int = 500
    # blocks per vectorized batch; changes results only at rounding level
    block_chunk: int = 100


@dataclass
class ScenarioConfig:
    M: int = 32
    N: int = 64
    L: int = 2
    K: int = 4
    R: int = 4
    tau_c: int = 10_000
    eta: float = 0.1
    p_max: float = 0.1
    sigma2: float | None = None
    bandwidth: float = 1e6
    noise_figure_db: float = 7.0
    carrier_freq: float = 1.9e9
    angular_std: float = 15.0
    fading_variant: FadingVariant = FadingVariant.ALWAYS_LOS_S1
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    height_offset: float = 10.0
    los_power_ratio: float = 0.5
    pathloss: PathlossParams = field(default_factory=PathlossParams)
    trials: TrialConfig = field(default_factory=TrialConfig)
    seed: int = 0
    ris_shape: tuple[int, int] | None = None
    bs_spacing: float = 0.5
    ris_spacing: float = 0.25
    conv_pilot_factor: int = 20
    correlation: str = "quadrature"
    estimator: str = "lmmse"
    perfect_csi: bool = False
    ris_pairing: str = "nearest"
    power_epsilon: float = 1e-6
    power_max_iter: int = 10_000
    power_rounds: int = 0

    def __post_init__(self):
        if not isinstance(self.fading_variant, FadingVariant):
            self.fading_variant = FadingVariant(self.fading_variant)
        if isinstance(self.geometry, dict):
            self.geometry = _build(GeometryConfig, self.geometry)
        if isinstance(self.pathloss, dict):
            self.pathloss = _build(PathlossParams, self.pathloss)
        if isinstance(self.trials, dict):
            self.trials = _build(TrialConfig, self.trials)
        if self.ris_shape is not None:
            self.ris_shape = tuple(int(c) for c in self.ris_shape)
        self.validate()

    # -- derived quantities -------------------------------------------------
    @property
    def uses_ris(self) -> bool:
        return self.fading_variant.uses_ris

    @property
    def pilot_intervals(self) -> int:
        """Pilot intervals of K samples each (LR+1 with RISs)."""
        if self.uses_ris:
            return self.L * self.R + 1
        return self.conv_pilot_factor

    @property
    def tau_p(self) -> int:
        return self.pilot_intervals * self.K

    @property
    def noise_power(self) -> float:
        if self.sigma2 is not None:
            return float(self.sigma2)
        dbm = -174.0 + 10.0 * math.log10(self.bandwidth) + self.noise_figure_db
        return 10.0 ** ((dbm - 30.0) / 10.0)

    @property
    def wavelength(self) -> float:
        return 299_792_458.0 / self.carrier_freq

    @property
    def ris_grid(self) -> tuple[int, int]:
        """(horizontal, vertical) element counts of each RIS."""
        if self.ris_shape is not None:
            return self.ris_shape
        side = math.isqrt(self.N)
        if side * side == self.N:
            return (side, side)
        return (self.N, 1)

    def validate(self) -> None:
        for name in ("M", "N", "K", "R", "tau_c"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.L < 0:
            raise ConfigError("L must be >= 0")
        if self.N % self.R != 0 or self.R > self.N:
            raise ConfigError(f"N={self.N} must be divisible by R={self.R} with R <= N")
        for name in ("eta", "p_max", "carrier_freq", "bandwidth"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be strictly positive")
        if self.sigma2 is not None and not self.sigma2 > 0:
            raise ConfigError("sigma2 must be strictly positive")
        if self.angular_std < 0:
            raise ConfigError("angular_std must be non-negative")
        if not 0.0 <= self.los_power_ratio <= 1.0:
            raise ConfigError("los_power_ratio must lie in [0, 1]")
        h, v = self.ris_grid
        if h * v != self.N:
            raise ConfigError(f"ris_shape {self.ris_shape} does not hold N={self.N} elements")
        if self.uses_ris and len(self.geometry.ris_positions) != self.L:
            raise ConfigError(
                f"L={self.L} but {len(self.geometry.ris_positions)} RIS positions given"
            )
        if self.tau_p >= self.tau_c:
            raise ConfigError(f"tau_p={self.tau_p} must be smaller than tau_c={self.tau_c}")
        if self.correlation not in ("quadrature", "approx"):
            raise ConfigError(f"unknown correlation method {self.correlation!r}")
        if self.estimator not in ("lmmse", "ls"):
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.ris_pairing not in ("nearest", "index"):
            raise ConfigError(f"unknown ris_pairing {self.ris_pairing!r}")
        if self.trials.drops < 1 or self.trials.blocks < 1 or self.trials.block_chunk < 1:
            raise ConfigError("trials.drops, trials.blocks and trials.block_chunk must be >= 1")

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def paper_scale(cls, **overrides) -> "ScenarioConfig":
        """Full-size deployment: 100-antenna ULA, two 16x16 RISs, 10 UEs, R = 16."""
        base = dict(M=100, N=256, L=2, K=10, R=16, tau_c=10_000)
        base.update(overrides)
        return cls(**base)


def _build(cls, data: dict):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if isinstance(value, list):
            value = _tuplify(value)
        kwargs[key] = value
    return cls(**kwargs)


def _tuplify(value):
    if isinstance(value, list):
        return tuple(_tuplify(v) for v in value)
    return value


def config_to_dict(config: ScenarioConfig) -> dict[str, Any]:
    def plain(value):
        if isinstance(value, Enum):
            return value.value
        if dataclasses.is_dataclass(value):
            return {f.name: plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
        if isinstance(value, (tuple, list)):
            return [plain(v) for v in value]
        return value

    return plain(config)


def config_from_dict(data: dict[str, Any]) -> ScenarioConfig:
    try:
        return _build(ScenarioConfig, dict(data))
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def apply_overrides(data: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    """Apply ``dotted.key=value`` overrides; values are parsed as YAML scalars."""
    data = dict(data)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            child = node.get(part)
            child = dict(child) if isinstance(child, dict) else {}
            node[part] = child
            node = child
        node[parts[-1]] = yaml.safe_load(raw)
    return data


def load_config(path: str | Path, overrides: list[str] | None = None) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    if overrides:
        data = apply_overrides(data, overrides)
    return config_from_dict(data)


def dump_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False)
