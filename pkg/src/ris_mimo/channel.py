"""Per-coherence-block channel realizations.

Every sampler accepts an optional leading ``size`` so Monte Carlo checks
and the block-batched simulation share one code path.  Random phases are
drawn once per specular component and shared across its entries.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .scenario import BLOCK_STREAM, BsRisStatistics, LinkStatistics, Scenario, stream


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard circularly-symmetric complex Gaussian samples."""
    z = rng.standard_normal((*shape, 2))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def random_phases(rng: np.random.Generator, shape) -> np.ndarray:
    return np.exp(1j * rng.uniform(0.0, 2 * np.pi, shape))


def _shape(size) -> tuple[int, ...]:
    if size is None:
        return ()
    return (size,) if np.isscalar(size) else tuple(size)


def sample_direct_channel(stats: LinkStatistics, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw ``h = sum_s exp(i theta_s) hbar_s + R^{1/2} w``."""
    lead = _shape(size)
    phases = random_phases(rng, (*lead, len(stats.specular)))
    w = complex_normal(rng, (*lead, stats.dim))
    return phases @ stats.specular + w @ stats.corr_sqrt.T


def sample_bs_ris_channel(stats: BsRisStatistics, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw ``G = Gbar_1 + sum_{s>=2} exp(i theta_s) Gbar_s + R_bs^{1/2} W R_ris^{1/2}``."""
    lead = _shape(size)
    S, M, N = stats.specular.shape
    phases = np.concatenate(
        [np.ones((*lead, 1)), random_phases(rng, (*lead, S - 1))], axis=-1
    )
    W = complex_normal(rng, (*lead, M, N))
    return np.einsum("...s,smn->...mn", phases, stats.specular) + stats.sqrt_bs @ W @ stats.sqrt_ris


def cascade(G: np.ndarray, f: np.ndarray) -> np.ndarray:
    """``G diag(f)``: column n of G scaled by f_n."""
    G = np.asarray(G)
    f = np.asarray(f)
    if G.shape[-1] != f.shape[-1]:
        raise ValueError(f"cascade: G has {G.shape[-1]} columns but f has {f.shape[-1]} entries")
    return G * f[..., None, :]


def effective_channel(h: np.ndarray, cascaded, phases, atol: float = 1e-9) -> np.ndarray:
    """``b = h + sum_j H'_j phi_j`` over the RIS subsets.

    ``cascaded`` and ``phases`` are matching sequences of M x N_j matrices and
    unit-modulus N_j vectors.
    """
    b = np.array(h, dtype=complex)
    for H, phi in zip(cascaded, phases, strict=True):
        phi = np.asarray(phi)
        if phi.size and np.max(np.abs(np.abs(phi) - 1.0)) > atol:
            raise ValueError("phase-shift entries must have unit modulus")
        b = b + np.asarray(H) @ phi
    return b


@dataclass
class ChannelRealization:
    """Channels of one coherence block (or a stack of blocks along axis 0).

    h: (..., K, M), f: (..., K, L, N), G: (..., L, M, N).
    """

    h: np.ndarray
    f: np.ndarray
    G: np.ndarray

    @cached_property
    def H(self) -> np.ndarray:
        """Cascaded channels ``H_{kl} = G_l diag(f_{kl})``, shape (..., K, L, M, N)."""
        return cascade(self.G[..., None, :, :, :], self.f)

    def subset_cascaded(self, k: int, assignment) -> list[np.ndarray]:
        """``H'_{kj}`` for every UE j: UE k's cascaded columns on j's elements."""
        Hk = self.H[k]  # (L, M, N)
        L, M, N = Hk.shape
        flat = np.moveaxis(Hk, 0, 1).reshape(M, L * N)  # column l*N + n
        return [flat[:, np.asarray(e, dtype=int)] for e in assignment.elements]

    def effective(self, ris_phases: np.ndarray) -> np.ndarray:
        """``b_k = h_k + sum_l H_{kl} theta_l`` with full per-RIS phase vectors (..., L, N)."""
        if self.f.shape[-2] == 0:
            return self.h.copy()
        # sum_l G_l (f_kl * theta_l) avoids materializing H
        weighted = self.f * ris_phases[..., None, :, :]
        return self.h + np.einsum("...lmn,...kln->...km", self.G, weighted)


def block_streams(seed: int, drop: int, block: int):
    """Generators for (direct channels, RIS channels, pilot noise) of one block."""
    return tuple(stream(seed, BLOCK_STREAM, drop, block, purpose) for purpose in range(3))


def _draw(scenario: Scenario, rng_direct, rng_ris) -> dict[str, np.ndarray]:
    K, M, N, L = scenario.K, scenario.config.M, scenario.config.N, scenario.L
    out = {
        "ph": random_phases(rng_direct, scenario.direct_specular.shape[:2]),
        "w": complex_normal(rng_direct, (K, M)),
    }
    if L:
        S = scenario.bs_ris_specular.shape[1]
        out["pf"] = random_phases(rng_ris, scenario.ris_ue_specular.shape[:3])
        out["wf"] = complex_normal(rng_ris, (K, L, N))
        out["pg"] = random_phases(rng_ris, (L, S - 1))
        out["W"] = complex_normal(rng_ris, (L, M, N))
    return out


def _assemble(scenario: Scenario, d: dict[str, np.ndarray]) -> ChannelRealization:
    """Turn raw draws with a leading block axis into channels."""
    K, M, N, L = scenario.K, scenario.config.M, scenario.config.N, scenario.L
    T = d["w"].shape[0]
    h = (np.einsum("tks,ksm->tkm", d["ph"], scenario.direct_specular)
         + np.einsum("kmn,tkn->tkm", scenario.direct_sqrt, d["w"]))
    if L == 0:
        return ChannelRealization(h, np.zeros((T, K, 0, N), complex), np.zeros((T, 0, M, N), complex))
    f = (np.einsum("tkls,klsn->tkln", d["pf"], scenario.ris_ue_specular)
         + np.einsum("klnj,tklj->tkln", scenario.ris_ue_sqrt, d["wf"]))
    pg = np.concatenate([np.ones((T, L, 1)), d["pg"]], axis=-1)
    sqrt_bs, sqrt_ris = scenario.bs_ris_sqrt
    G = np.einsum("tls,lsmn->tlmn", pg, scenario.bs_ris_specular) + sqrt_bs @ d["W"] @ sqrt_ris
    return ChannelRealization(h, f, G)


def sample_block(scenario: Scenario, rng_direct: np.random.Generator,
                 rng_ris: np.random.Generator) -> ChannelRealization:
    """Independent realization of every link in the scenario for one block."""
    d = _draw(scenario, rng_direct, rng_ris)
    stacked = _assemble(scenario, {k: v[None] for k, v in d.items()})
    return ChannelRealization(stacked.h[0], stacked.f[0], stacked.G[0])


def sample_blocks(scenario: Scenario, seed: int, drop: int, blocks) -> tuple[ChannelRealization, list]:
    """Stacked realizations for the given block indices plus each block's pilot-noise generator.

    Block ``t`` always draws from its own ``(seed, drop, t)`` streams, so the
    result does not depend on how blocks are batched.
    """
    draws, noise_rngs = [], []
    for t in blocks:
        rd, rr, rn = block_streams(seed, drop, t)
        draws.append(_draw(scenario, rd, rr))
        noise_rngs.append(rn)
    stacked = {key: np.stack([d[key] for d in draws]) for key in draws[0]}
    return _assemble(scenario, stacked), noise_rngs
