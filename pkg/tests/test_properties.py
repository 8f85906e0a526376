"""Property-based checks of the selection rules, codes and sessions."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from noisyfb import kernels
from noisyfb.channel import ChannelParams, NoiseStream
from noisyfb.codebook import build_orthogonal, build_phase2, build_simplex
from noisyfb.decoder import MixtureConfig, make_decoder
from noisyfb.harness import RunConfig, run_trials
from noisyfb.protocol import Ranking, run_baseline, run_session, select_group

finite = st.floats(-50, 50, allow_nan=False)


def _ranking(d):
    order = np.argsort(d, kind="stable")
    return Ranking(tuple(int(i) for i in order), np.asarray(d)[order])


@given(d=arrays(float, st.integers(2, 8), elements=finite),
       tau2=st.floats(0, 1), tau3=st.floats(0, 1), A1=st.floats(0.1, 20))
def test_selection_partition(d, tau2, tau3, A1):
    sel = select_group(_ranking(d), A1, tau2, tau3)
    M = d.size
    assert 2 <= sel.k <= min(4, M) and len(sel.members) == sel.k
    s = np.sort(d)
    rule1 = M == 2 or s[2] - s[1] >= 2 * A1 * tau2
    rule2 = not rule1 and (M == 3 or s[3] - s[2] >= 2 * A1 * tau3)
    # exactly one outcome holds
    assert (sel.k == 2) == rule1
    assert (sel.k == 3) == rule2
    # members are the k closest messages
    assert np.max(d[list(sel.members)]) <= np.min(
        np.delete(d, list(sel.members)), initial=np.inf)


@given(d=arrays(float, st.integers(4, 8), elements=finite),
       tau2=st.floats(0, 1), tau3=st.floats(0, 1), A1=st.floats(0.1, 20),
       f=st.floats(0, 1))
def test_selection_monotone_in_thresholds(d, tau2, tau3, A1, f):
    # shrinking the thresholds can only make the group smaller
    r = _ranking(d)
    assert select_group(r, A1, f * tau2, f * tau3).k <= select_group(r, A1, tau2, tau3).k


@given(d=arrays(float, st.tuples(st.integers(1, 5), st.integers(2, 8)), elements=finite),
       tau2=st.floats(0, 1), tau3=st.floats(0, 1), A1=st.floats(0.1, 20))
def test_kernel_selection_matches_protocol(d, tau2, tau3, A1):
    k, members = kernels.select_groups(d, 2 * A1 * tau2, 2 * A1 * tau3)
    for s in range(d.shape[0]):
        sel = select_group(_ranking(d[s]), A1, tau2, tau3)
        assert k[s] == sel.k
        assert tuple(members[s, :sel.k]) == sel.members


@settings(max_examples=25, deadline=None)
@given(M=st.integers(2, 6), tau2=st.floats(0, 0.4), tau3=st.floats(0, 0.4),
       sigma2=st.floats(0, 1), seed=st.integers(0, 2 ** 31))
def test_selection_frequencies_sum_to_one(M, tau2, tau3, sigma2, seed):
    p = ChannelParams.from_sigma2(1.0, sigma2, 16, M, tau2=tau2, tau3=tau3)
    stats = run_trials(RunConfig(p, trials=30, seed=seed, decoder=MixtureConfig(64)))
    assert sum(stats.k_freq.values()) == pytest.approx(1.0)
    assert all(k <= M for k, v in stats.k_freq.items() if v > 0)


@settings(max_examples=30, deadline=None)
@given(M=st.integers(2, 7), half=st.integers(8, 12), A=st.floats(0.05, 5),
       beta=st.floats(0.1, 3), sigma2=st.floats(0, 2), seed=st.integers(0, 10 ** 6))
def test_session_energy_audit(M, half, A, beta, sigma2, seed):
    p = ChannelParams.from_sigma2(A, sigma2, 2 * half, M, beta=beta)
    noise = NoiseStream(seed)
    t = run_session(noise.message(M), p, noise, make_decoder("mixture", MixtureConfig(32)))
    assert t.energy == pytest.approx(p.total_energy, rel=1e-12)
    assert t.x.size == p.n and 0 <= t.decision < M
    b = run_baseline(t.true_message, p, NoiseStream(seed))
    assert b.energy == pytest.approx(p.total_energy, rel=1e-12)


@given(M=st.integers(1, 12), extra=st.integers(0, 5), E=st.floats(1e-3, 1e3))
def test_orthogonal_invariants(M, extra, E):
    c = build_orthogonal(M, M + extra, E)
    c.validate()
    D = c.distances()
    off = D[~np.eye(M, dtype=bool)]
    assert np.allclose(off, 2 * E, rtol=1e-12)


@given(k=st.integers(2, 4), E=st.floats(1e-3, 1e3))
def test_simplex_invariants(k, E):
    c = build_simplex(k, E)
    c.validate()
    off = c.distances()[~np.eye(k, dtype=bool)]
    assert np.allclose(off, 2 * E * k / (k - 1), rtol=1e-12)
    assert np.allclose(c.codewords.sum(axis=0), 0, atol=1e-9 * np.sqrt(E))


@given(data=st.data(), M=st.integers(2, 9), E=st.floats(1e-2, 1e2))
def test_phase2_invariants(data, M, E):
    k = data.draw(st.integers(2, min(4, M)))
    members = data.draw(st.permutations(range(M)))[:k]
    code = build_phase2(members, M, M + 3, E)
    w = code.codewords
    assert np.allclose((w * w).sum(axis=1), E, rtol=1e-12)
    D = code.as_codebook().distances()
    for a in range(M):
        for b in range(a + 1, M):
            both = a in members and b in members
            target = 2 * E * k / (k - 1) if both else 2 * E
            assert D[a, b] == pytest.approx(target, rel=1e-9)
