import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import crandn
from ris_mimo.channel import (
    block_streams,
    cascade,
    effective_channel,
    sample_bs_ris_channel,
    sample_block,
    sample_blocks,
    sample_direct_channel,
)
from ris_mimo.config import ScenarioConfig
from ris_mimo.scenario import BsRisStatistics, LinkStatistics, build_scenario


def _link(spec, corr):
    return LinkStatistics(np.atleast_2d(spec).astype(complex), corr.astype(complex))


def test_diffuse_direct_channel_moments(rng):
    M = 4
    h = sample_direct_channel(_link(np.zeros((0, M)), np.eye(M)), rng, 100_000)
    assert np.linalg.norm(h.mean(0)) <= 0.02 * np.sqrt(M)
    cov = h.T @ h.conj() / len(h)
    np.testing.assert_allclose(cov, np.eye(M), atol=0.05)


def test_specular_only_keeps_magnitudes(rng):
    spec = crandn(rng, 1, 5)
    h = sample_direct_channel(_link(spec, np.zeros((5, 5))), rng, 50)
    np.testing.assert_allclose(np.abs(h), np.tile(np.abs(spec), (50, 1)))


def test_zero_statistics_zero_channel(rng):
    h = sample_direct_channel(_link(np.zeros((1, 3)), np.zeros((3, 3))), rng)
    assert not np.any(h)


def test_fixed_los_only(rng):
    G1 = crandn(rng, 1, 3, 4)
    stats = BsRisStatistics(G1, np.zeros((3, 3)), np.zeros((4, 4)))
    G = sample_bs_ris_channel(stats, rng, 10)
    np.testing.assert_allclose(G, np.broadcast_to(G1[0], G.shape))


def _kron_stats(rng, M, N):
    A = crandn(rng, M, M)
    B = crandn(rng, N, N)
    return BsRisStatistics(np.zeros((1, M, N), complex), A @ A.conj().T, B @ B.conj().T)


def test_identity_kronecker_covariance(rng):
    stats = BsRisStatistics(np.zeros((1, 2, 3), complex), np.eye(2), np.eye(3))
    G = sample_bs_ris_channel(stats, rng, 100_000)
    vec = G.transpose(0, 2, 1).reshape(len(G), -1)  # column-major vec
    cov = vec.T @ vec.conj() / len(vec)
    np.testing.assert_allclose(cov, np.eye(6), atol=0.05)


def test_general_kronecker_covariance(rng):
    stats = _kron_stats(rng, 2, 3)
    G = sample_bs_ris_channel(stats, rng, 200_000)
    vec = G.transpose(0, 2, 1).reshape(len(G), -1)
    cov = vec.T @ vec.conj() / len(vec)
    ref = np.kron(stats.corr_ris.T, stats.corr_bs)
    assert np.max(np.abs(cov - ref)) <= 0.05 * np.max(np.abs(ref))


def test_cascade_examples(rng):
    G = crandn(rng, 2, 2)
    np.testing.assert_array_equal(cascade(G, np.ones(2)), G)
    assert not np.any(cascade(G, np.zeros(2)))
    f = crandn(rng, 2)
    np.testing.assert_allclose(cascade(G, f), G @ np.diag(f))
    with pytest.raises(ValueError):
        cascade(G, np.ones(3))


def test_effective_channel_examples(rng):
    h = crandn(rng, 4)
    np.testing.assert_array_equal(effective_channel(h, [], []), h)
    g, fn, alpha = crandn(rng, 4), 0.3 - 0.2j, 1.1
    b = effective_channel(h, [cascade(g[:, None], np.array([fn]))], [np.array([np.exp(1j * alpha)])])
    np.testing.assert_allclose(b, h + np.exp(1j * alpha) * g * fn)
    with pytest.raises(ValueError):
        effective_channel(h, [g[:, None]], [np.array([0.5])])


def test_effective_channel_matches_per_element_form(rng):
    # sum_j G'_j diag(phi_j) f'_kj  versus  sum_j H'_kj phi_j on a 4x4 instance
    M = 4
    h = crandn(rng, M)
    G = [crandn(rng, M, 2), crandn(rng, M, 2)]
    f = [crandn(rng, 2), crandn(rng, 2)]
    phi = [np.exp(1j * rng.uniform(0, 6.3, 2)) for _ in range(2)]
    direct = h + sum(Gj @ np.diag(pj) @ fj for Gj, pj, fj in zip(G, phi, f))
    np.testing.assert_allclose(effective_channel(h, [cascade(g, ff) for g, ff in zip(G, f)], phi), direct)


@given(st.integers(0, 3))
def test_realization_effective_matches_subset_form(seed):
    cfg = ScenarioConfig(M=6, N=4, K=3, R=2)
    sc = _scenario(cfg)
    ch = sample_block(sc, *block_streams(seed, 0, 0)[:2])
    rng = np.random.default_rng(seed)
    theta = np.exp(1j * rng.uniform(0, 6.3, (cfg.L, cfg.N)))
    b = ch.effective(theta)
    phases = [theta[l] if l is not None else np.zeros(0) for l in sc.assignment.ris_of_ue]
    for k in range(cfg.K):
        sub = ch.subset_cascaded(k, sc.assignment)
        np.testing.assert_allclose(b[k], effective_channel(ch.h[k], sub, phases), atol=1e-15)


_CACHE = {}


def _scenario(cfg):
    key = repr(cfg)
    if key not in _CACHE:
        _CACHE[key] = build_scenario(cfg, 0)
    return _CACHE[key]


def test_batched_sampling_matches_single_blocks():
    cfg = ScenarioConfig(M=6, N=16, K=3, R=2)
    sc = _scenario(cfg)
    stacked, _ = sample_blocks(sc, cfg.seed, 0, [3, 4, 5])
    for i, t in enumerate([3, 4, 5]):
        one = sample_block(sc, *block_streams(cfg.seed, 0, t)[:2])
        np.testing.assert_array_equal(stacked.h[i], one.h)
        np.testing.assert_array_equal(stacked.f[i], one.f)
        np.testing.assert_array_equal(stacked.G[i], one.G)


def test_sampled_moments_match_statistics():
    cfg = ScenarioConfig(M=4, N=4, K=2, R=1)
    sc = _scenario(cfg)
    ch, _ = sample_blocks(sc, 1, 0, range(20_000))
    for k, link in enumerate(sc.bs_ue):
        h = ch.h[:, k]
        cov = h.T @ h.conj() / len(h)
        assert np.max(np.abs(cov - link.mean_corr)) <= 0.05 * np.max(np.abs(link.mean_corr))
    G = ch.G[:, 0]
    st_ = sc.bs_ris[0]
    # random-phase speculars s >= 2 vanish in the mean; the LOS term stays
    assert np.max(np.abs(G.mean(0) - st_.specular[0])) <= 0.05 * np.max(np.abs(st_.specular[0]))


def test_conventional_realization_has_no_ris():
    cfg = ScenarioConfig(M=4, N=4, K=2, R=1, fading_variant="conventional")
    ch, _ = sample_blocks(build_scenario(cfg, 0), 0, 0, range(2))
    assert ch.f.shape == (2, 2, 0, 4) and ch.H.shape == (2, 2, 0, 4, 4)
    np.testing.assert_array_equal(ch.effective(np.zeros((2, 0, 4))), ch.h)


def test_channel_power_and_block_decorrelation():
    cfg = ScenarioConfig(M=4, N=4, K=2, R=1)
    sc = _scenario(cfg)
    ch, _ = sample_blocks(sc, 2, 0, range(100_000))
    for k, link in enumerate(sc.bs_ue):
        power = np.mean(np.sum(np.abs(ch.h[:, k]) ** 2, axis=1))
        assert power == pytest.approx(np.trace(link.mean_corr).real, rel=0.02)
    # LOS term of G is identical on every draw; the rest decorrelates block to block
    G = ch.G[:, 0] - sc.bs_ris[0].specular[0]
    h = ch.h[:, 0]
    for x in (G.reshape(len(G), -1), h):
        lag = np.mean(np.sum(x[1:] * x[:-1].conj(), axis=1)) / np.mean(np.sum(np.abs(x) ** 2, axis=1))
        assert abs(lag) <= 0.02
