"""Receive combining and the use-and-forget SE bound.

The bound needs three expectations per UE k: ``E{v_k^H b_k}``,
``E{|v_k^H b_i|^2}`` for every i and ``E{||v_k||^2}``.  They are estimated
by Monte Carlo averages over coherence blocks, with combiners built from
channel estimates and evaluated against the true channels.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def mr_combiner(b_hat: np.ndarray) -> np.ndarray:
    """Maximum-ratio combining: ``v_k = b_hat_k``. Works on (..., K, M) stacks."""
    return np.array(b_hat, dtype=complex)


def rzf_combiner(b_hat: np.ndarray, powers: np.ndarray, sigma2: float) -> np.ndarray:
    """``v_k = (sum_i p_i b_i b_i^H + sigma2 I)^{-1} b_k`` for every k.

    ``b_hat`` is (..., K, M); one factorization per stack entry serves all K
    right-hand sides.
    """
    if not sigma2 > 0:
        raise ValueError("RZF needs a strictly positive regularizer sigma2")
    b_hat = np.asarray(b_hat, dtype=complex)
    p = np.asarray(powers, dtype=float)
    if np.any(p < 0):
        raise ValueError("powers must be non-negative")
    M = b_hat.shape[-1]
    A = np.einsum("...im,i,...in->...mn", b_hat, p, b_hat.conj()) + sigma2 * np.eye(M)
    return np.swapaxes(np.linalg.solve(A, np.swapaxes(b_hat, -1, -2)), -1, -2)


@dataclass(frozen=True)
class Moments:
    """Finalized block averages for K UEs."""

    mean_gain: np.ndarray  # E{v_k^H b_k}, complex (K,)
    cross_power: np.ndarray  # E{|v_k^H b_i|^2}, real (K, K) indexed [k, i]
    combiner_norm: np.ndarray  # E{||v_k||^2}, real (K,)
    blocks: int

    @property
    def signal(self) -> np.ndarray:
        return np.abs(self.mean_gain) ** 2

    @property
    def K(self) -> int:
        return len(self.combiner_norm)

    def interference(self, powers: np.ndarray, sigma2: float) -> np.ndarray:
        """SINR denominators ``sum_i p_i E|v^H b_i|^2 - p_k |E v^H b_k|^2 + sigma2 E||v||^2``."""
        p = np.asarray(powers, dtype=float)
        return self.cross_power @ p - p * self.signal + sigma2 * self.combiner_norm

    def sinr(self, powers: np.ndarray, sigma2: float) -> np.ndarray:
        p = np.asarray(powers, dtype=float)
        den = self.interference(p, sigma2)
        num = p * self.signal
        # sample means obey Jensen exactly, so den >= sigma2 E||v||^2 up to rounding
        if np.any(den < -1e-12 * (np.abs(self.cross_power @ p) + sigma2 * self.combiner_norm)):
            raise ArithmeticError("negative SINR denominator from the Monte Carlo moments")
        den = np.maximum(den, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(num > 0, num / den, 0.0)
        return out

    def scaled(self, c: float) -> "Moments":
        """Moments of combiners multiplied by sqrt(c): every second-order term scales by c."""
        return Moments(self.mean_gain * np.sqrt(c), self.cross_power * c, self.combiner_norm * c,
                       self.blocks)


@dataclass
class MomentAccumulator:
    """Running sums over blocks; mergeable so partial runs reduce in any grouping."""

    K: int
    sum_gain: np.ndarray = field(init=False)
    sum_cross: np.ndarray = field(init=False)
    sum_norm: np.ndarray = field(init=False)
    blocks: int = field(init=False, default=0)

    def __post_init__(self):
        self.sum_gain = np.zeros(self.K, dtype=complex)
        self.sum_cross = np.zeros((self.K, self.K))
        self.sum_norm = np.zeros(self.K)

    def add(self, v: np.ndarray, b: np.ndarray) -> "MomentAccumulator":
        """Accumulate combiners ``v`` against true channels ``b``.

        Both are (K, M) for one block or (T, K, M) for T blocks.
        """
        v = np.asarray(v)
        b = np.asarray(b)
        if v.ndim == 2:
            v, b = v[None], b[None]
        if v.shape != b.shape or v.shape[-2] != self.K:
            raise ValueError(f"expected matching (T, {self.K}, M) arrays, got {v.shape} and {b.shape}")
        inner = np.einsum("tkm,tim->tki", v.conj(), b)
        self.sum_gain += np.einsum("tkk->k", inner)
        self.sum_cross += np.sum(np.abs(inner) ** 2, axis=0)
        self.sum_norm += np.sum(np.abs(v) ** 2, axis=(0, 2))
        self.blocks += v.shape[0]
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.K != self.K:
            raise ValueError("cannot merge accumulators of different K")
        out = MomentAccumulator(self.K)
        out.sum_gain = self.sum_gain + other.sum_gain
        out.sum_cross = self.sum_cross + other.sum_cross
        out.sum_norm = self.sum_norm + other.sum_norm
        out.blocks = self.blocks + other.blocks
        return out

    def finalize(self) -> Moments:
        if self.blocks < 1:
            raise ValueError("no blocks accumulated")
        n = self.blocks
        return Moments(self.sum_gain / n, self.sum_cross / n, self.sum_norm / n, n)


@dataclass(frozen=True)
class SEResult:
    sinr: np.ndarray
    se: np.ndarray
    prelog: float
    powers: np.ndarray


def prelog_factor(tau_c: int, tau_p: int) -> float:
    if not 0 <= tau_p <= tau_c:
        raise ValueError("need 0 <= tau_p <= tau_c")
    return (tau_c - tau_p) / tau_c


def finalize_se(moments: Moments | MomentAccumulator, powers, sigma2: float, tau_c: int,
                tau_p: int) -> SEResult:
    """Per-UE SINR and SE ``(tau_c - tau_p)/tau_c * log2(1 + SINR)``."""
    if isinstance(moments, MomentAccumulator):
        moments = moments.finalize()
    p = np.broadcast_to(np.asarray(powers, dtype=float), (moments.K,)).copy()
    sinr = moments.sinr(p, sigma2)
    pre = prelog_factor(tau_c, tau_p)
    return SEResult(sinr, pre * np.log2(1.0 + sinr), pre, p)
