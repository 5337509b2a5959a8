"""Deployment geometry and long-term link statistics.

A scenario is built once per UE drop from ``(config, drop index)`` and is
read-only afterwards.  Every random choice made here (UE positions, LOS
states, shadowing, extra specular directions) comes from its own
counter-derived stream so that variants sharing a seed see the same drop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .config import FadingVariant, PathlossParams, ScenarioConfig
from .linalg import hermitian_sqrt

# spawn-key namespaces for SeedSequence
SCENARIO_STREAM = 0
BLOCK_STREAM = 1

_POSITIONS, _BS_UE, _RIS_UE, _BS_RIS, _SPECULAR = range(5)

# Gaussian angular density is truncated at this many standard deviations
_TRUNCATION = 6.0


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a counter tuple under the root seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


# --------------------------------------------------------------------------
# arrays and steering vectors
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear (horizontal) or planar (vertical plane) array.

    Element ``n`` sits at horizontal index ``n % counts[0]`` and vertical
    index ``n // counts[0]``; ``spacing`` is in wavelengths and
    ``orientation`` is the boresight azimuth in the global frame.
    """

    kind: str
    counts: tuple[int, int]
    spacing: float
    orientation: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ULA", "UPA"):
            raise ValueError(f"unknown array kind {self.kind!r}")
        if self.kind == "ULA" and self.counts[1] != 1:
            raise ValueError("a ULA has a single row")
        if min(self.counts) < 1 or self.spacing <= 0:
            raise ValueError("array needs positive counts and spacing")

    @classmethod
    def ula(cls, n: int, spacing: float = 0.5, orientation: float = 0.0) -> "ArrayGeometry":
        return cls("ULA", (n, 1), spacing, orientation)

    @classmethod
    def upa(cls, horizontal: int, vertical: int, spacing: float = 0.25,
            orientation: float = 0.0) -> "ArrayGeometry":
        return cls("UPA", (horizontal, vertical), spacing, orientation)

    @property
    def size(self) -> int:
        return self.counts[0] * self.counts[1]

    def indices(self) -> tuple[np.ndarray, np.ndarray]:
        n = np.arange(self.size)
        return n % self.counts[0], n // self.counts[0]


def _direction_cosines(azimuth, elevation):
    """Projections of the arrival direction on the horizontal and vertical array axes."""
    return np.sin(azimuth) * np.cos(elevation), np.sin(elevation)


def steering_vector(array: ArrayGeometry, azimuth: float, elevation: float) -> np.ndarray:
    if not (np.isfinite(azimuth) and np.isfinite(elevation)):
        raise ValueError("angles must be finite")
    h, v = array.indices()
    x, y = _direction_cosines(azimuth - array.orientation, elevation)
    return np.exp(2j * np.pi * array.spacing * (h * x + v * y))


def _gauss_legendre_normal(std: float, count: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(count)
    half = _TRUNCATION * std
    nodes = nodes * half
    weights = weights * np.exp(-0.5 * (nodes / std) ** 2)
    return nodes, weights / weights.sum()


def _lag_correlation(array, azimuth, elevation, std, method):
    """Correlation as a function of the (horizontal, vertical) index lag."""
    nh, nv = array.counts
    dh = np.arange(-(nh - 1), nh)
    dv = np.arange(-(nv - 1), nv)
    k = 2 * np.pi * array.spacing
    az0 = azimuth - array.orientation
    if method == "approx":
        x0, y0 = _direction_cosines(az0, elevation)
        # first-order expansion of the phase in the two angle deviations
        dx_daz = np.cos(az0) * np.cos(elevation)
        dx_del = -np.sin(az0) * np.sin(elevation)
        dy_del = np.cos(elevation)
        lag_h, lag_v = np.meshgrid(dh, dv, indexing="ij")
        mean_phase = k * (lag_h * x0 + lag_v * y0)
        var = (k * lag_h * dx_daz) ** 2 + (k * (lag_h * dx_del + lag_v * dy_del)) ** 2
        return np.exp(1j * mean_phase - 0.5 * var * std**2)
    if method != "quadrature":
        raise ValueError(f"unknown correlation method {method!r}")
    # Gauss-Legendre over the truncated density; node count tracks the
    # fastest phase oscillation across the aperture
    omega = k * ((nh - 1) + (nv - 1))
    count = int(math.ceil(omega * _TRUNCATION * std)) + 24
    nodes, weights = _gauss_legendre_normal(std, count)
    az = az0 + nodes[:, None]
    el = elevation + nodes[None, :]
    x, y = np.broadcast_arrays(*_direction_cosines(az, el))
    w = (weights[:, None] * weights[None, :]).ravel()
    # only non-negative horizontal lags; the rest follow from r(-d) = conj(r(d))
    eh = np.exp(1j * k * np.outer(dh[nh - 1:], x.ravel()))
    ev = np.exp(1j * k * np.outer(dv, y.ravel()))
    half = (eh * w) @ ev.T
    lags = np.empty((2 * nh - 1, 2 * nv - 1), dtype=complex)
    lags[nh - 1:] = half
    lags[: nh - 1] = half[1:][::-1, ::-1].conj()
    return lags


def local_scattering_correlation(array: ArrayGeometry, nominal_azimuth: float,
                                 nominal_elevation: float, angular_std: float,
                                 gain: float = 1.0, method: str = "quadrature") -> np.ndarray:
    """Spatial correlation under Gaussian azimuth/elevation spread.

    ``angular_std`` is in degrees and applies independently to both angles.
    ``[R]_{m,n} = gain * E{a_m a_n^*}`` so the trace equals ``gain * size``.
    ``method="approx"`` uses the small-angular-deviation closed form.
    """
    if gain < 0:
        raise ValueError("gain must be non-negative")
    n = array.size
    if gain == 0:
        return np.zeros((n, n), dtype=complex)
    if angular_std == 0:
        a = steering_vector(array, nominal_azimuth, nominal_elevation)
        return gain * np.outer(a, a.conj())
    if angular_std < 0:
        raise ValueError("angular_std must be non-negative")
    lags = _lag_correlation(array, nominal_azimuth, nominal_elevation,
                            math.radians(angular_std), method)
    h, v = array.indices()
    nh, nv = array.counts
    R = lags[(h[:, None] - h[None, :]) + nh - 1, (v[:, None] - v[None, :]) + nv - 1]
    R = 0.5 * (R + R.conj().T)
    return gain * R


# --------------------------------------------------------------------------
# propagation
# --------------------------------------------------------------------------
def pathloss_db(distance: float, los: bool, params: PathlossParams) -> float:
    if not distance > 0:
        raise ValueError(f"pathloss undefined at distance {distance}")
    if los:
        return params.los_intercept_db + params.los_slope * math.log10(distance)
    return params.nlos_intercept_db + params.nlos_slope * math.log10(distance)


def path_gain(distance: float, los: bool, shadow_draw: float, params: PathlossParams) -> float:
    """Linear channel gain ``10^((-PL(d) + shadow) / 10)``; shadow in dB."""
    return 10.0 ** ((-pathloss_db(distance, los, params) + shadow_draw) / 10.0)


def los_probability(distance: float, params: PathlossParams,
                    variant: FadingVariant | None = None, link: str = "bs_ue") -> float:
    """LOS probability of a link; RIS-UE links are forced to LOS in the always-LOS variants."""
    if not distance > 0:
        raise ValueError("distance must be positive")
    if link == "bs_ris":
        return 1.0
    if link == "ris_ue" and variant in (FadingVariant.ALWAYS_LOS_S1, FadingVariant.ALWAYS_LOS_S3):
        return 1.0
    p = (params.los_cutoff - distance) / params.los_cutoff
    return float(min(1.0, max(params.los_floor, p)))


def rician_factor(distance: float, params: PathlossParams) -> float:
    return 10.0 ** ((params.kfactor_intercept_db - params.kfactor_slope_db * distance) / 10.0)


def noise_power(bandwidth: float, noise_figure_db: float) -> float:
    """Thermal noise power in W."""
    return 10.0 ** ((-174.0 + 10 * math.log10(bandwidth) + noise_figure_db - 30.0) / 10.0)


def drop_users(config: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """K UE positions (meters, 2D) uniform over the configured rectangle."""
    (x0, y0), (x1, y1) = config.geometry.drop_area
    lo = np.array([min(x0, x1), min(y0, y1)], dtype=float)
    hi = np.array([max(x0, x1), max(y0, y1)], dtype=float)
    u = rng.random((config.K, 2))
    return lo + u * (hi - lo)


def _angles(src: np.ndarray, dst: np.ndarray) -> tuple[float, float, float]:
    d = dst - src
    horizontal = math.hypot(d[0], d[1])
    return math.atan2(d[1], d[0]), math.atan2(d[2], horizontal), math.hypot(horizontal, d[2])


# --------------------------------------------------------------------------
# link statistics
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class LinkStatistics:
    """Long-term state of a vector link: specular rows plus diffuse correlation."""

    specular: np.ndarray  # (S, dim)
    nonspecular_corr: np.ndarray  # (dim, dim)
    los: bool = False
    gain: float = 0.0

    @property
    def dim(self) -> int:
        return self.nonspecular_corr.shape[0]

    @property
    def fixed_los_flag(self) -> np.ndarray:
        return np.zeros(len(self.specular), dtype=bool)

    @cached_property
    def mean_corr(self) -> np.ndarray:
        s = self.specular
        return s.T @ s.conj() + self.nonspecular_corr

    @cached_property
    def corr_sqrt(self) -> np.ndarray:
        return hermitian_sqrt(self.nonspecular_corr)


@dataclass(frozen=True)
class BsRisStatistics:
    """RIS-to-BS matrix channel: fixed LOS term, random-phase speculars, Kronecker diffuse part."""

    specular: np.ndarray  # (S, M, N); entry 0 is the LOS term (no random phase)
    corr_bs: np.ndarray
    corr_ris: np.ndarray
    gain: float = 0.0

    @property
    def fixed_los_flag(self) -> np.ndarray:
        flags = np.zeros(len(self.specular), dtype=bool)
        flags[0] = True
        return flags

    @cached_property
    def sqrt_bs(self) -> np.ndarray:
        return hermitian_sqrt(self.corr_bs)

    @cached_property
    def sqrt_ris(self) -> np.ndarray:
        return hermitian_sqrt(self.corr_ris)


@dataclass(frozen=True)
class RisAssignment:
    """Per-UE sets of global RIS element indices (``ris * N + element``)."""

    elements: tuple[np.ndarray, ...]
    ris_of_ue: tuple[int | None, ...]
    n_elements: int
    n_ris: int

    @property
    def counts(self) -> np.ndarray:
        return np.array([len(e) for e in self.elements])

    def validate(self) -> None:
        pooled = np.concatenate([np.asarray(e, dtype=int) for e in self.elements] or [np.zeros(0, int)])
        if len(np.unique(pooled)) != len(pooled):
            raise ValueError("RIS element subsets overlap")
        if len(pooled) > self.n_ris * self.n_elements:
            raise ValueError("more assigned elements than exist")


def assign_ris_elements(bs_ue_gains, config: ScenarioConfig, ue_positions=None,
                        ris_positions=None) -> RisAssignment:
    """Give each RIS in full to one of the L UEs with the weakest direct gain.

    With ``ris_pairing="nearest"`` the weakest UE takes its closest RIS, the
    next weakest the closest remaining one, and so on; ``"index"`` pairs the
    i-th weakest UE with RIS i.  Ties break on the lower index.
    """
    gains = np.asarray(bs_ue_gains, dtype=float)
    K, L, N = len(gains), config.L, config.N
    if K < L:
        raise ValueError(f"need at least L={L} UEs to assign every RIS, got {K}")
    weakest = np.argsort(gains, kind="stable")[:L]
    ris_of_ue: list[int | None] = [None] * K
    free = list(range(L))
    for k in weakest:
        if config.ris_pairing == "nearest" and ue_positions is not None and ris_positions is not None:
            dist = [np.linalg.norm(np.asarray(ue_positions[k])[:2] - np.asarray(ris_positions[l])[:2])
                    for l in free]
            pick = free[int(np.argmin(dist))]
        else:
            pick = free[0]
        free.remove(pick)
        ris_of_ue[k] = pick
    elements = tuple(
        np.arange(l * N, (l + 1) * N) if l is not None else np.zeros(0, dtype=int)
        for l in ris_of_ue
    )
    return RisAssignment(elements, tuple(ris_of_ue), N, L)


def subsurface_partition(grid: tuple[int, int], R: int) -> np.ndarray:
    """Split an RIS into R equal sub-surfaces; returns an (R, N/R) index array.

    Rectangular tiles are used when the grid allows it (e.g. 4x4 tiles on a
    16x16 surface for R = 16), otherwise contiguous runs of element indices.
    """
    nh, nv = grid
    N = nh * nv
    if N % R:
        raise ValueError(f"R={R} does not divide N={N}")
    best = None
    for rh in range(1, R + 1):
        if R % rh:
            continue
        rv = R // rh
        if nh % rh or nv % rv:
            continue
        th, tv = nh // rh, nv // rv
        score = abs(th - tv)
        if best is None or score < best[0]:
            best = (score, rh, rv)
    if best is None:
        return np.arange(N).reshape(R, N // R)
    _, rh, rv = best
    th, tv = nh // rh, nv // rv
    tiles = []
    for bv in range(rv):
        for bh in range(rh):
            h = np.arange(bh * th, (bh + 1) * th)
            v = np.arange(bv * tv, (bv + 1) * tv)
            tiles.append((h[None, :] + nh * v[:, None]).ravel())
    return np.array(tiles)


@dataclass
class Scenario:
    config: ScenarioConfig
    drop: int
    ue_positions: np.ndarray  # (K, 3)
    bs_array: ArrayGeometry
    ris_arrays: list[ArrayGeometry]
    bs_ue: list[LinkStatistics]
    ris_ue: list[list[LinkStatistics]] = field(default_factory=list)  # [k][l]
    bs_ris: list[BsRisStatistics] = field(default_factory=list)
    assignment: RisAssignment | None = None
    subsurfaces: np.ndarray | None = None

    @property
    def K(self) -> int:
        return len(self.bs_ue)

    @property
    def L(self) -> int:
        return len(self.bs_ris)

    @property
    def bs_ue_gains(self) -> np.ndarray:
        return np.array([np.trace(s.mean_corr).real / s.dim for s in self.bs_ue])

    # stacked arrays for vectorized sampling; padded with zero speculars
    @cached_property
    def direct_specular(self) -> np.ndarray:
        return _stack_specular([s.specular for s in self.bs_ue], self.config.M)

    @cached_property
    def direct_sqrt(self) -> np.ndarray:
        return np.stack([s.corr_sqrt for s in self.bs_ue])

    @cached_property
    def ris_ue_specular(self) -> np.ndarray:
        K, L, N = self.K, self.L, self.config.N
        flat = _stack_specular([s.specular for row in self.ris_ue for s in row], N)
        return flat.reshape(K, L, -1, N)

    @cached_property
    def ris_ue_sqrt(self) -> np.ndarray:
        K, L, N = self.K, self.L, self.config.N
        if L == 0:
            return np.zeros((K, 0, N, N), dtype=complex)
        return np.stack([np.stack([s.corr_sqrt for s in row]) for row in self.ris_ue])

    @cached_property
    def bs_ris_specular(self) -> np.ndarray:
        M, N = self.config.M, self.config.N
        if self.L == 0:
            return np.zeros((0, 1, M, N), dtype=complex)
        smax = max(len(s.specular) for s in self.bs_ris)
        out = np.zeros((self.L, smax, M, N), dtype=complex)
        for l, s in enumerate(self.bs_ris):
            out[l, : len(s.specular)] = s.specular
        return out

    @cached_property
    def bs_ris_sqrt(self) -> tuple[np.ndarray, np.ndarray]:
        M, N = self.config.M, self.config.N
        if self.L == 0:
            return np.zeros((0, M, M), complex), np.zeros((0, N, N), complex)
        return (np.stack([s.sqrt_bs for s in self.bs_ris]),
                np.stack([s.sqrt_ris for s in self.bs_ris]))


def _stack_specular(rows: list[np.ndarray], dim: int) -> np.ndarray:
    smax = max([len(r) for r in rows] + [1])
    out = np.zeros((len(rows), smax, dim), dtype=complex)
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    return out


def _split_specular_power(total: float, variant: FadingVariant, ratio: float, rng) -> list[float]:
    if variant is FadingVariant.ALWAYS_LOS_S3:
        u = rng.random()
        rest = (1.0 - ratio) * total
        return [ratio * total, u * rest, (1.0 - u) * rest]
    return [total]


def _ris_orientation(config: ScenarioConfig, l: int, ris_xy, bs_xy) -> float:
    orient = config.geometry.ris_orientations
    if orient is not None:
        return float(orient[l])
    (x0, y0), (x1, y1) = config.geometry.drop_area
    centre = np.array([(x0 + x1) / 2, (y0 + y1) / 2])
    to_bs = np.asarray(bs_xy) - ris_xy
    to_area = centre - ris_xy
    bisector = to_bs / np.linalg.norm(to_bs) + to_area / np.linalg.norm(to_area)
    return math.atan2(bisector[1], bisector[0])


def build_scenario(config: ScenarioConfig, drop: int = 0) -> Scenario:
    """Draw one UE drop and all long-term statistics for it."""
    seed = config.seed
    cfg_pl = config.pathloss
    std = config.angular_std
    method = config.correlation
    variant = config.fading_variant
    height = config.height_offset
    K, M = config.K, config.M

    bs = np.array([*config.geometry.bs_position, height], dtype=float)
    bs_array = ArrayGeometry.ula(M, config.bs_spacing, config.geometry.bs_orientation)
    ue_xy = drop_users(config, stream(seed, SCENARIO_STREAM, drop, _POSITIONS))
    ues = np.column_stack([ue_xy, np.zeros(K)])

    rng = stream(seed, SCENARIO_STREAM, drop, _BS_UE)
    bs_ue = []
    for k in range(K):
        u, z = rng.random(), rng.standard_normal()
        az, el, dist = _angles(bs, ues[k])
        los = u < los_probability(dist, cfg_pl, variant, "bs_ue")
        sd = cfg_pl.los_shadow_std_db if los else cfg_pl.nlos_shadow_std_db
        beta = path_gain(dist, los, sd * z, cfg_pl)
        bs_ue.append(_vector_link(bs_array, az, el, beta, los, dist, [1.0], std, method, cfg_pl,
                                  None))
    scenario = Scenario(config, drop, ues, bs_array, [], bs_ue)
    if not config.uses_ris:
        return scenario

    L = config.L
    ris_xy = [np.asarray(p, dtype=float) for p in config.geometry.ris_positions]
    ris_pos = [np.array([*p, height]) for p in ris_xy]
    h, v = config.ris_grid
    ris_arrays = [
        ArrayGeometry.upa(h, v, config.ris_spacing, _ris_orientation(config, l, ris_xy[l], bs[:2]))
        for l in range(L)
    ]
    element_gain = 10.0 ** (cfg_pl.ris_element_gain_db / 10.0)
    spec_rng = stream(seed, SCENARIO_STREAM, drop, _SPECULAR)

    rng = stream(seed, SCENARIO_STREAM, drop, _RIS_UE)
    ris_ue = []
    for k in range(K):
        row = []
        for l in range(L):
            u, z = rng.random(), rng.standard_normal()
            az, el, dist = _angles(ris_pos[l], ues[k])
            los = u < los_probability(dist, cfg_pl, variant, "ris_ue")
            sd = cfg_pl.los_shadow_std_db if los else cfg_pl.nlos_shadow_std_db
            beta = element_gain * path_gain(dist, los, sd * z, cfg_pl)
            split = _split_specular_power(1.0, variant, config.los_power_ratio, spec_rng)
            row.append(_vector_link(ris_arrays[l], az, el, beta, los, dist, split, std, method,
                                    cfg_pl, spec_rng))
        ris_ue.append(row)

    rng = stream(seed, SCENARIO_STREAM, drop, _BS_RIS)
    bs_ris = []
    for l in range(L):
        z = rng.standard_normal()
        az_b, el_b, dist = _angles(bs, ris_pos[l])
        az_r, el_r, _ = _angles(ris_pos[l], bs)
        shadow = cfg_pl.los_shadow_std_db * z if cfg_pl.shadow_bs_ris else 0.0
        beta = element_gain * path_gain(dist, True, shadow, cfg_pl)
        kappa = rician_factor(dist, cfg_pl)
        spec_power = beta * kappa / (1 + kappa)
        split = _split_specular_power(1.0, variant, config.los_power_ratio, spec_rng)
        comps = []
        for s, frac in enumerate(split):
            if s == 0:
                ab, ar = (az_b, el_b), (az_r, el_r)
            else:
                ab = (az_b + _deviation(spec_rng, std), el_b + _deviation(spec_rng, std))
                ar = (az_r + _deviation(spec_rng, std), el_r + _deviation(spec_rng, std))
            a_bs = steering_vector(bs_array, *ab)
            a_ris = steering_vector(ris_arrays[l], *ar)
            comps.append(math.sqrt(spec_power * frac) * np.outer(a_bs, a_ris))
        diffuse = beta / (1 + kappa)
        corr_bs = local_scattering_correlation(bs_array, az_b, el_b, std, diffuse, method)
        corr_ris = local_scattering_correlation(ris_arrays[l], az_r, el_r, std, 1.0, method)
        bs_ris.append(BsRisStatistics(np.array(comps), corr_bs, corr_ris, beta))

    assignment = assign_ris_elements(
        [np.trace(s.mean_corr).real / M for s in bs_ue], config, ues, ris_pos
    )
    scenario.ris_arrays = ris_arrays
    scenario.ris_ue = ris_ue
    scenario.bs_ris = bs_ris
    scenario.assignment = assignment
    scenario.subsurfaces = subsurface_partition(config.ris_grid, config.R)
    return scenario


def _deviation(rng, std_deg: float) -> float:
    return math.radians(std_deg) * rng.standard_normal()


def _vector_link(array, az, el, beta, los, dist, split, std, method, params, rng) -> LinkStatistics:
    """Rician split of gain ``beta``: LOS-equivalent power over ``split`` speculars."""
    n = array.size
    if not los:
        corr = local_scattering_correlation(array, az, el, std, beta, method)
        return LinkStatistics(np.zeros((0, n), dtype=complex), corr, False, beta)
    kappa = rician_factor(dist, params)
    spec_power = beta * kappa / (1 + kappa)
    rows = []
    for s, frac in enumerate(split):
        if s == 0:
            angle = (az, el)
        else:
            angle = (az + _deviation(rng, std), el + _deviation(rng, std))
        rows.append(math.sqrt(spec_power * frac) * steering_vector(array, *angle))
    corr = local_scattering_correlation(array, az, el, std, beta / (1 + kappa), method)
    return LinkStatistics(np.array(rows), corr, True, beta)
