"""Independent reference solvers used by the unit and acceptance tests."""
import math

import numpy as np
from scipy.optimize import linprog

from ris_mimo.receiver import Moments

GRID = int(math.ceil(2 * math.pi / 1e-3))  # step just under 1e-3 rad


def grid_optimum(h, H):
    """Best ||h + H phi||^2 over unit-modulus phi on a uniform phase grid (N <= 2)."""
    ang = 2 * math.pi * np.arange(GRID) / GRID
    e = np.exp(1j * ang)
    base = np.vdot(h, h).real + np.sum(np.abs(H) ** 2)
    c = H.conj().T @ h  # linear coefficients
    if H.shape[1] == 1:
        return float(np.max(base + 2 * np.real(np.conj(c[0]) * e)))
    a = 2 * np.real(np.conj(c[0]) * e)
    b = 2 * np.real(np.conj(c[1]) * e)
    g = np.vdot(H[:, 0], H[:, 1])  # g1^H g2
    d = 2 * np.real(g * e)  # depends only on beta - alpha
    best = -np.inf
    idx = np.arange(GRID)
    for start in range(0, GRID, 512):
        s = np.arange(start, min(start + 512, GRID))
        # rows: shift s, cols: alpha index i -> beta index i + s
        vals = a[None, :] + b[(idx[None, :] + s[:, None]) % GRID]
        best = max(best, float(np.max(vals.max(axis=1) + d[s])))
    return base + best



def random_moments(rng, K):
    s = rng.uniform(0.2, 2.0, K)
    C = rng.uniform(0.0, 0.6, (K, K))
    C[np.diag_indices(K)] = s + rng.uniform(0.0, 0.5, K)  # E|v^H b_k|^2 >= |E v^H b_k|^2
    n = rng.uniform(0.5, 2.0, K)
    return Moments(np.sqrt(s) * np.exp(1j * rng.uniform(0, 6, K)), C, n, 1)


def oracle(m, sigma2, p_max):
    """Bisection on the common SINR with an LP feasibility test per candidate."""
    s, C, n = m.signal, m.cross_power, m.combiner_norm
    K = len(s)

    def feasible(t):
        # t * (C p - s p + sigma2 n) <= s p,  0 <= p <= p_max
        A = t * C - np.diag(s * (1 + t))
        res = linprog(np.zeros(K), A_ub=A, b_ub=-t * sigma2 * n, bounds=[(0, p_max)] * K,
                      method="highs")
        return res.status == 0

    # interference is non-negative, so no UE beats its noise-limited SINR
    lo, hi = 0.0, float(np.min(p_max * s / (sigma2 * n)))
    while hi - lo > 1e-10 * hi:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if feasible(mid) else (lo, mid)
    t = lo
    p = np.linalg.solve(np.diag(s * (1 + t)) - t * C, t * sigma2 * n)
    return t, p * p_max / p.max()
