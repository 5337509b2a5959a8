"""Structured pilot transmission and LMMSE / LS channel estimation.

Training spans ``T = LR + 1`` intervals of K samples.  UE k sends the same
orthonormal pilot in every interval while sub-surface (l, r) of every RIS
applies the phase ``psi_{lr,t}`` in interval t.  Correlating with a UE
pilot and then with ``1`` or ``psi_{lr}`` separates the direct channel from
each sub-surface's column sum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, complex_normal
from .linalg import hermitian_pinv
from .scenario import BsRisStatistics, Scenario


def dft_matrix(n: int) -> np.ndarray:
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n)


@dataclass(frozen=True)
class PilotSchedule:
    ue_pilots: np.ndarray  # (K, K), column k is UE k's unit-norm pilot
    ris_phases: np.ndarray  # (L, R, T) unit-modulus phase sequences
    intervals: int

    @property
    def K(self) -> int:
        return self.ue_pilots.shape[1]

    @property
    def tau_p(self) -> int:
        return self.intervals * self.K

    def pilot_gain(self, eta: float) -> float:
        """Effective pilot energy ``q = K T eta`` seen after despreading and combining."""
        return self.K * self.intervals * eta


def build_pilot_schedule(K: int, L: int, R: int, intervals: int | None = None) -> PilotSchedule:
    """DFT pilots for the UEs and DFT columns 2..LR+1 for the sub-surfaces.

    ``intervals`` defaults to ``LR + 1``; the conventional baseline passes
    ``L = 0`` with a longer repetition.
    """
    if K < 1 or R < 1 or L < 0:
        raise ValueError("need K >= 1, R >= 1, L >= 0")
    T = L * R + 1 if intervals is None else intervals
    if T < L * R + 1:
        raise ValueError(f"{T} intervals cannot separate {L * R} sub-surfaces")
    ue = dft_matrix(K) / np.sqrt(K)
    F = dft_matrix(T)
    ris = F[:, 1: L * R + 1].T.reshape(L, R, T)
    return PilotSchedule(ue, ris, T)


def subsurface_sums(channels: ChannelRealization, subsurfaces: np.ndarray) -> np.ndarray:
    """``sum_{n in RIS_{l,r}} [H_{kl}]_{:n}`` for every (k, l, r): shape (..., K, L, R, M)."""
    G = channels.G[..., subsurfaces]  # (..., L, M, R, s)
    f = channels.f[..., subsurfaces]  # (..., K, L, R, s)
    return np.einsum("...lmrs,...klrs->...klrm", G, f)


def simulate_pilot_reception(channels: ChannelRealization, schedule: PilotSchedule,
                             subsurfaces: np.ndarray | None, eta: float, sigma2: float,
                             rng) -> np.ndarray:
    """Received pilot matrices ``Y_t`` (M x K) for t = 0..T-1: shape (..., T, M, K).

    ``rng`` is one Generator, or a list with one Generator per block when
    ``channels`` carries a leading block axis.
    """
    K = schedule.K
    T = schedule.intervals
    h = channels.h
    U = np.broadcast_to(h[..., None, :, :], (*h.shape[:-2], T, *h.shape[-2:])).astype(complex)
    L = channels.f.shape[-2]
    if L:
        c = subsurface_sums(channels, subsurfaces)
        U += np.einsum("lrt,...klrm->...tkm", schedule.ris_phases, c)
    Y = np.sqrt(K * eta) * np.einsum("...tim,ji->...tmj", U, schedule.ue_pilots)
    M = h.shape[-1]
    if sigma2 == 0:
        return Y
    if isinstance(rng, (list, tuple)):
        noise = np.stack([complex_normal(g, (T, M, K)) for g in rng])
    else:
        noise = complex_normal(rng, (*h.shape[:-2], T, M, K))
    return Y + np.sqrt(sigma2) * noise


def despread(Y: np.ndarray, pilot: np.ndarray) -> np.ndarray:
    """``z_{k,t} = Y_t conj(phi_k)`` for one pilot: shape (..., T, M)."""
    return Y @ pilot.conj()


def despread_all(Y: np.ndarray, ue_pilots: np.ndarray) -> np.ndarray:
    """Despread for every UE at once: shape (..., K, T, M)."""
    return np.einsum("...tmj,jk->...ktm", Y, ue_pilots.conj())


def direct_statistic(z: np.ndarray) -> np.ndarray:
    """Sum over the intervals scaled by ``1/sqrt(T)``; the RIS terms cancel."""
    return z.sum(axis=-2) / np.sqrt(z.shape[-2])


def cascaded_statistic(z: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Weight interval t by ``conj(psi_t)``. ``psi`` may be (T,) or (L, R, T)."""
    T = z.shape[-2]
    if psi.ndim == 1:
        return np.einsum("t,...tm->...m", psi.conj(), z) / np.sqrt(T)
    return np.einsum("lrt,...tm->...lrm", psi.conj(), z) / np.sqrt(T)


# --------------------------------------------------------------------------
# estimators
# --------------------------------------------------------------------------
def lmmse_matrix(mean_corr: np.ndarray, q: float, sigma2: float) -> np.ndarray:
    """``sqrt(q) Rbar (q Rbar + sigma2 I)^{-1}``; pseudo-inverse when sigma2 = 0."""
    M = mean_corr.shape[-1]
    return np.sqrt(q) * mean_corr @ hermitian_pinv(q * mean_corr + sigma2 * np.eye(M))


def lmmse_direct(z: np.ndarray, mean_corr: np.ndarray, q: float, sigma2: float) -> np.ndarray:
    """LMMSE estimate of a direct channel from its statistic; ``q = K (LR+1) eta``."""
    return lmmse_matrix(mean_corr, q, sigma2) @ z


def direct_error_covariance(mean_corr: np.ndarray, q: float, sigma2: float) -> np.ndarray:
    M = mean_corr.shape[-1]
    A = hermitian_pinv(q * mean_corr + sigma2 * np.eye(M))
    return mean_corr - q * mean_corr @ A @ mean_corr


def cascaded_covariances(bs_ris: BsRisStatistics, mean_corr_f: np.ndarray,
                         subset: np.ndarray) -> np.ndarray:
    """Cross-covariances ``Rbar_{kl,n}`` for every n in one sub-surface: (s, M, M).

    ``Rbar_{kl,n} = sum_{n'} [Rbar^f]_{n n'} (sum_s Gbar_s[:,n] Gbar_s[:,n']^H
    + [R^{G,RIS}]_{n' n} R^{G,BS})`` with n' over the same sub-surface.
    """
    subset = np.asarray(subset)
    F = mean_corr_f[np.ix_(subset, subset)]
    Gs = bs_ris.specular[:, :, subset]  # (S, M, s)
    spec = np.einsum("ab,sma,spb->amp", F, Gs, Gs.conj())
    Rris = bs_ris.corr_ris[np.ix_(subset, subset)]
    weights = np.einsum("ab,ba->a", F, Rris)
    return spec + weights[:, None, None] * bs_ris.corr_bs[None]


def lmmse_cascaded(z: np.ndarray, rbar_columns: np.ndarray, rbar_subsurface: np.ndarray | None,
                   q: float, sigma2: float, rtol: float = 1e-9) -> np.ndarray:
    """Column estimates ``[H_hat]_{:n}`` for one sub-surface: (M, s).

    ``rbar_subsurface`` must equal the sum of ``rbar_columns``; pass None to
    form it here.
    """
    total = rbar_columns.sum(axis=0)
    if rbar_subsurface is None:
        rbar_subsurface = total
    elif not np.allclose(rbar_subsurface, total, rtol=rtol, atol=rtol * np.abs(total).max(initial=0)):
        raise ValueError("sub-surface covariance does not match the column covariances")
    M = total.shape[0]
    x = hermitian_pinv(q * rbar_subsurface + sigma2 * np.eye(M)) @ z
    return np.sqrt(q) * (rbar_columns @ x).T


def ls_direct(z: np.ndarray, q: float) -> np.ndarray:
    return z / np.sqrt(q)


def ls_cascaded(z: np.ndarray, q: float, subsurface_size: int) -> np.ndarray:
    """Least-squares column-sum estimate split evenly over the sub-surface: (..., M, s)."""
    col_sum = z / np.sqrt(q)
    return np.repeat(col_sum[..., None] / subsurface_size, subsurface_size, axis=-1)


def assemble_overall_estimate(h_hat: np.ndarray, cascaded_hat, phases) -> np.ndarray:
    """``b_hat = h_hat + sum_j H_hat'_j phi_j``."""
    b = np.array(h_hat, dtype=complex)
    cascaded_hat = list(cascaded_hat)
    phases = list(phases)
    if len(cascaded_hat) != len(phases):
        raise ValueError("one phase vector is needed per cascaded estimate")
    for H, phi in zip(cascaded_hat, phases):
        H = np.asarray(H)
        phi = np.asarray(phi)
        if H.shape[-1] != phi.shape[-1]:
            raise ValueError("cascaded estimate and phase vector sizes differ")
        if phi.size and np.max(np.abs(np.abs(phi) - 1)) > 1e-9:
            raise ValueError("phase-shift entries must have unit modulus")
        b = b + H @ phi
    return b


@dataclass
class ChannelEstimates:
    h_hat: np.ndarray  # (..., K, M)
    H_hat: np.ndarray  # (..., K, L, M, N)
    b_hat: np.ndarray | None = None


class Estimator:
    """Per-drop precomputation of every estimator matrix, applied block by block."""

    def __init__(self, scenario: Scenario, schedule: PilotSchedule, eta: float, sigma2: float,
                 method: str = "lmmse"):
        if method not in ("lmmse", "ls"):
            raise ValueError(f"unknown estimator {method!r}")
        self.method = method
        self.q = schedule.pilot_gain(eta)
        self.sigma2 = sigma2
        self.schedule = schedule
        self.subsurfaces = scenario.subsurfaces
        cfg = scenario.config
        self.M, self.N = cfg.M, cfg.N
        self.K, self.L = scenario.K, scenario.L
        if method == "ls":
            return
        Rh = np.stack([s.mean_corr for s in scenario.bs_ue])
        self.W_direct = lmmse_matrix(Rh, self.q, sigma2)
        if not self.L:
            return
        subs = self.subsurfaces
        R, s = subs.shape
        Rf = np.stack([np.stack([st.mean_corr for st in row]) for row in scenario.ris_ue])
        # F[k, l, r] = Rbar^f_{kl} restricted to sub-surface r
        F = Rf[:, :, subs[:, :, None], subs[:, None, :]]  # (K, L, R, s, s)
        # zero-padded specular stack, regrouped as (L, R, S, M, s)
        self.Gsub = np.moveaxis(scenario.bs_ris_specular[..., subs], 3, 1)
        self.Rbs = np.stack([st.corr_bs for st in scenario.bs_ris])
        Rris = np.stack([st.corr_ris[subs[:, :, None], subs[:, None, :]] for st in scenario.bs_ris])
        self.F = F
        self.wdiag = np.einsum("klrab,lrba->klra", F, Rris)  # (K, L, R, s)
        spec = np.einsum("lrsma,klrab,lrspb->klrmp", self.Gsub, F, self.Gsub.conj())
        total = spec + np.einsum("klr,lmp->klrmp", self.wdiag.sum(-1), self.Rbs)
        eye = np.eye(self.M)
        self.A_inv = hermitian_pinv(self.q * total + sigma2 * eye)

    def estimate(self, z_direct: np.ndarray, z_cascaded: np.ndarray | None) -> ChannelEstimates:
        """Estimates from statistics shaped (..., K, M) and (..., K, L, R, M)."""
        lead = z_direct.shape[:-2]
        H_hat = np.zeros((*lead, self.K, self.L, self.M, self.N), dtype=complex)
        sq = np.sqrt(self.q)
        if self.method == "ls":
            h_hat = ls_direct(z_direct, self.q)
            if self.L:
                cols = ls_cascaded(z_cascaded, self.q, self.subsurfaces.shape[1])
                self._scatter(H_hat, cols)
            return ChannelEstimates(h_hat, H_hat)
        h_hat = np.einsum("kmj,...kj->...km", self.W_direct, z_direct)
        if self.L:
            x = np.einsum("klrmj,...klrj->...klrm", self.A_inv, z_cascaded)
            c = np.einsum("lrsma,...klrm->...klrsa", self.Gsub.conj(), x)
            d = np.einsum("klrab,...klrsb->...klrsa", self.F, c)
            cols = np.einsum("lrsma,...klrsa->...klrma", self.Gsub, d)
            y = np.einsum("lmj,...klrj->...klrm", self.Rbs, x)
            cols += y[..., :, None] * self.wdiag[..., None, :]
            self._scatter(H_hat, sq * cols)
        return ChannelEstimates(h_hat, H_hat)

    def _scatter(self, H_hat: np.ndarray, cols: np.ndarray) -> None:
        # cols: (..., K, L, R, M, s) -> columns subsurfaces[r, i]
        moved = np.moveaxis(cols, -3, -2)  # (..., K, L, M, R, s)
        H_hat[..., self.subsurfaces.ravel()] = moved.reshape(*moved.shape[:-2], -1)
