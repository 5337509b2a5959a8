"""Per-UE RIS phase selection.

Maximize ``||h + H phi||^2`` over ``||phi||^2 = N`` (the relaxation of the
unit-modulus set), then keep only the phases of the maximizer.  With
``H^H H = sum_d lambda_d u_d u_d^H`` and ``c_d = u_d^H H^H h`` the maximizer
is ``phi = sum_d u_d c_d / (gamma - lambda_d)`` where gamma > max lambda is
the root of ``sum_d |c_d|^2 / (gamma - lambda_d)^2 = N``.

The problem is homogeneous in (h, H), so every instance is normalized by
``||H||_F`` before the root search; the bracket offset below is then a
scale-free quantity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ZERO_H_RTOL = 1e-14
_MAX_BISECT = 400


@dataclass(frozen=True)
class RelaxedSolution:
    phi_star: np.ndarray
    gamma_star: float
    eigvals: np.ndarray  # descending
    projections: np.ndarray  # c_d = u_d^H H^H h
    branch: str  # "secular", "zero_h" or "hard_case"

    @property
    def weights(self) -> np.ndarray:
        return np.abs(self.projections) ** 2


def secular_function(gamma, eigvals, weights) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    return np.sum(weights / (gamma[..., None] - eigvals) ** 2, axis=-1)


def _bisect_gap(eigvals: np.ndarray, weights: np.ndarray, N: float) -> tuple[np.ndarray, np.ndarray]:
    """Solve for ``t = gamma - max lambda`` on stacks (B, D); returns (t, hard_case mask)."""
    lam_max = eigvals.max(axis=-1)
    gaps = lam_max[:, None] - eigvals  # >= 0

    def g(t):
        return np.sum(weights / (t[:, None] + gaps) ** 2, axis=-1) - N

    lo = 1e-12 * (1.0 + lam_max)
    hard = g(lo) <= 0
    hi = lo + np.sqrt(weights.sum(axis=-1) / N)
    for _ in range(_MAX_BISECT):  # geometric span doubling; normally a no-op
        grow = (g(hi) > 0) & ~hard
        if not grow.any():
            break
        hi = np.where(grow, lo + 2 * (hi - lo), hi)
    lo = lo.copy()
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        active = (mid > lo) & (mid < hi)
        if not active.any():
            break
        above = g(mid) > 0
        lo = np.where(active & above, mid, lo)
        hi = np.where(active & ~above, mid, hi)
    # pick whichever endpoint has the smaller residual
    t = np.where(np.abs(g(lo)) <= np.abs(g(hi)), lo, hi)
    return t, hard


def secular_root(eigvals, weights, N: float) -> float:
    """Unique root gamma > max(eigvals) of ``sum w/(gamma - lambda)^2 = N``.

    Solved by bracketed bisection on ``gamma - max(eigvals)``.
    """
    lam = np.asarray(eigvals, dtype=float)
    w = np.asarray(weights, dtype=float)
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(w))):
        raise ValueError("non-finite input")
    if np.any(w < 0) or not np.any(w > 0):
        raise ValueError("need non-negative weights with at least one positive; "
                         "an all-zero weight vector is the h = 0 branch")
    scale = max(float(lam.max()), float(np.sqrt(w.sum() / N)), np.finfo(float).tiny)
    t, hard = _bisect_gap(lam[None] / scale, w[None] / scale**2, N)
    if hard[0]:
        raise ValueError("no root above the largest eigenvalue (hard case)")
    return float(lam.max() + t[0] * scale)


def _decompose(H: np.ndarray, h: np.ndarray):
    """Eigenpairs of ``H^H H`` via the thin SVD plus the projections c_d."""
    U, s, Vh = np.linalg.svd(H, full_matrices=False)
    lam = s**2
    c = s * np.einsum("...md,...m->...d", U.conj(), h)
    return lam, Vh.conj().swapaxes(-1, -2), c


def solve_relaxed_batch(h_hat: np.ndarray, H_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Relaxed maximizers for stacks (B, M) and (B, M, N).

    Returns ``(phi_star (B, N), gamma_star (B,), branch codes (B,))`` with
    codes 0 = secular root, 1 = h = 0, 2 = hard case.
    """
    h_hat = np.asarray(h_hat, dtype=complex)
    H_hat = np.asarray(H_hat, dtype=complex)
    if not (np.all(np.isfinite(h_hat)) and np.all(np.isfinite(H_hat))):
        raise ValueError("non-finite input")
    B, M, N = H_hat.shape
    if N < 1:
        raise ValueError("need at least one RIS element")
    fro = np.linalg.norm(H_hat, axis=(-2, -1))
    hn = np.linalg.norm(h_hat, axis=-1)
    scale = np.where(fro > 0, fro, np.where(hn > 0, hn, 1.0))
    Hs = H_hat / scale[:, None, None]
    hs = h_hat / scale[:, None]
    lam, V, c = _decompose(Hs, hs)
    w = np.abs(c) ** 2
    zero_h = (hn <= ZERO_H_RTOL * fro) | ~np.any(w > 0, axis=-1) | (fro == 0)
    phi = np.sqrt(N) * V[..., 0]  # dominant eigenvector for the h = 0 branch
    gamma = lam[:, 0].copy()
    codes = np.where(zero_h, 1, 0)
    idx = np.flatnonzero(~zero_h)
    if idx.size:
        t, hard = _bisect_gap(lam[idx], w[idx], N)
        g = lam[idx, 0] + t
        coeff = c[idx] / (g[:, None] - lam[idx])
        phi[idx] = np.einsum("bnd,bd->bn", V[idx], coeff)
        gamma[idx] = g
        for j in idx[hard]:
            phi[j], gamma[j] = _hard_case(lam[j], V[j], c[j], N)
            codes[j] = 2
    return phi, gamma * scale**2, codes


def _hard_case(lam, V, c, N, rtol: float = 1e-12):
    """gamma = max lambda with (almost) no weight on the top eigenspace."""
    top = lam >= lam[0] * (1 - rtol)
    coeff = np.zeros_like(c)
    coeff[~top] = c[~top] / (lam[0] - lam[~top])
    rest = float(np.sum(np.abs(coeff) ** 2))
    coeff[np.flatnonzero(top)[0]] += np.sqrt(max(N - rest, 0.0))
    return V @ coeff, lam[0]


def solve_relaxed(h_hat: np.ndarray, H_hat: np.ndarray) -> RelaxedSolution:
    """Global maximizer of ``||h + H phi||^2`` subject to ``||phi||^2 = N``."""
    h_hat = np.asarray(h_hat, dtype=complex)
    H_hat = np.asarray(H_hat, dtype=complex)
    if H_hat.ndim != 2 or h_hat.shape != (H_hat.shape[0],):
        raise ValueError("expected an M-vector and an M x N matrix")
    phi, gamma, code = solve_relaxed_batch(h_hat[None], H_hat[None])
    lam, _, c = _decompose(H_hat, h_hat)
    branch = ("secular", "zero_h", "hard_case")[int(code[0])]
    return RelaxedSolution(phi[0], float(gamma[0]), lam, c, branch)


def project_unit_modulus(phi: np.ndarray) -> np.ndarray:
    """Keep the phase of each entry; zero entries map to 1."""
    phi = np.asarray(phi, dtype=complex)
    mag = np.abs(phi)
    return np.where(mag > 0, phi / np.where(mag > 0, mag, 1.0), 1.0 + 0j)


def select_phases(h_hat: np.ndarray, H_hat: np.ndarray) -> np.ndarray:
    """Unit-modulus phase configurations for stacks of (h_hat, H_hat)."""
    phi, _, _ = solve_relaxed_batch(h_hat, H_hat)
    return project_unit_modulus(phi)


def objective(h: np.ndarray, H: np.ndarray, phi: np.ndarray) -> np.ndarray:
    return np.linalg.norm(h + np.einsum("...mn,...n->...m", H, phi), axis=-1) ** 2
