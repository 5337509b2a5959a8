"""Max-min fair uplink power control by fixed-point iteration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .receiver import Moments


class PowerControlError(RuntimeError):
    pass


@dataclass(frozen=True)
class PowerAllocation:
    p: np.ndarray
    sinr: np.ndarray
    iterations: int
    spread: float
    min_sinr_history: np.ndarray

    @property
    def common_sinr(self) -> float:
        return float(self.sinr.min())


def maxmin_fixed_point(moments: Moments, sigma2: float, p_max: float, epsilon: float = 1e-6,
                       max_iter: int = 10_000, p0: np.ndarray | None = None) -> PowerAllocation:
    """Balance the SINRs of all UEs at the largest achievable common value.

    Each step sets ``p_k`` to the power that would give UE k unit SINR
    against the current interference, then rescales so the strongest UE
    transmits at ``p_max``.  Stops once ``max SINR - min SINR <= epsilon``.
    """
    signal = moments.signal
    K = moments.K
    if np.any(~(signal > 0)):
        bad = np.flatnonzero(~(signal > 0)).tolist()
        raise PowerControlError(f"zero signal moment for UE(s) {bad}; they cannot be served")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    p = np.full(K, float(p_max)) if p0 is None else np.asarray(p0, dtype=float).copy()
    if np.any(p <= 0):
        raise ValueError("initial powers must be positive")
    history = []
    for it in range(max_iter + 1):
        sinr = moments.sinr(p, sigma2)
        history.append(sinr.min())
        spread = float(sinr.max() - sinr.min())
        if spread <= epsilon:
            return PowerAllocation(p, sinr, it, spread, np.array(history))
        if it == max_iter:
            break
        p = moments.interference(p, sigma2) / signal
        p *= p_max / p.max()
    raise PowerControlError(
        f"no convergence in {max_iter} iterations: SINR spread {spread:.3e}, "
        f"min SINR {sinr.min():.6g}, powers {np.array2string(p, precision=4)}"
    )
