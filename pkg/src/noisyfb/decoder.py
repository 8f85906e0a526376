"""Receiver-side decoding when the phase-II code is not known exactly.

The receiver does not see the transmitter's observation ``z'``, only its
own ``y'``. Given ``y'``, ``z' = y' + sigma * eta'`` with fresh standard
Gaussian ``eta'``, so the phase-II likelihood of message ``j`` is the
mixture

    p(y'' | y', j)  ∝  E_{z'|y'} exp((y'', x''_j(z')) - A2 / 2)

over the codes the transmitter may have switched to. :func:`decode`
estimates the expectation by sampling ``z'`` (common samples for all
messages); :func:`decode_exact` evaluates it by deterministic quadrature
over the ordered group-selection events. :func:`decode_naive` ignores
the feedback noise altogether.

Because the phase-I code is the scaled standard basis, the selection
depends on ``z'`` only through its first ``M`` coordinates; the samplers
draw just those.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy.special import logsumexp, ndtr

from . import kernels
from .channel import ChannelParams
from .codebook import build_phase2, group_slot_table
from .errors import DomainError
from .protocol import phase_one_code, transmitter_selection

__all__ = [
    "MixtureConfig",
    "PosteriorReport",
    "phase_one_loglik",
    "sample_transmitter_distances",
    "mixture_log_likelihoods",
    "mixture_log_likelihood",
    "group_weights",
    "group_weights_exact",
    "outcome_probabilities",
    "exact_log_likelihoods",
    "decode",
    "decode_exact",
    "decode_naive",
    "decode_phase_one",
    "posterior_report",
    "make_decoder",
    "EXACT_MAX_M",
]

EXACT_MAX_M = 6


@dataclass(frozen=True)
class MixtureConfig:
    """Accuracy knobs of the mixture decoder and its quadrature oracle."""

    num_samples: int = 4096
    log_domain: bool = True
    oracle_quadrature_points: int = 40

    def __post_init__(self):
        if self.num_samples < 1:
            raise DomainError("num_samples must be at least 1")
        if not self.log_domain:
            raise DomainError("only log-domain evaluation is supported")
        if self.oracle_quadrature_points < 2:
            raise DomainError("oracle_quadrature_points must be at least 2")


@dataclass(frozen=True, eq=False)
class PosteriorReport:
    """Per-message log-likelihoods and optional group weights.

    ``loglik[j] = (x'_j, y') + log E exp((y'', x''_j) - A2/2)``, both up to
    constants shared by all messages. ``weights`` maps ``k`` in
    ``{0, 1, 2, 3, 4}`` to ``P(|x''_i - x''_ref|^2 = delta_k | y')``
    (``weights[1]`` is always 0).
    """

    loglik: np.ndarray
    weights: dict | None = None
    pair: tuple | None = None

    @property
    def decision(self) -> int:
        return int(np.argmax(self.loglik))


def phase_one_loglik(y_prime, params: ChannelParams) -> np.ndarray:
    """``(x'_j, y')`` for every message (log-likelihood up to a constant)."""
    code = phase_one_code(params.M, params.n1, params.A1)
    return code.codewords @ np.asarray(y_prime, dtype=float)


def _feedback_normals(sampler, S: int, M: int) -> np.ndarray:
    if isinstance(sampler, np.random.Generator):
        return sampler.standard_normal((S, M))
    eta = np.asarray(sampler, dtype=float)
    if eta.ndim != 2 or eta.shape[1] != M:
        raise DomainError(f"pre-drawn normals must have shape (S, {M})")
    return eta


def sample_transmitter_distances(y_prime, params: ChannelParams, sampler,
                                 num_samples: int) -> np.ndarray:
    """Transmitter distances for samples of ``z' | y'``, shape ``(S, M)``.

    Row ``s`` is ``-2 (x'_j, z'_s)``, which differs from ``|z'_s - x'_j|^2``
    by a per-row constant and so induces the same ranking and gaps.
    `sampler` is a Generator or an ``(S, M)`` array of standard normals.
    """
    M = params.M
    y = np.asarray(y_prime, dtype=float)[:M]
    eta = _feedback_normals(sampler, num_samples, M)
    out = eta * params.sigma
    out += y
    out *= -2.0 * math.sqrt(params.A1)
    return out


def _phase_two_correlations(y_double_prime, params: ChannelParams):
    ydd = np.asarray(y_double_prime, dtype=float)
    slot_vals = group_slot_table(params.A2) @ ydd[:3]
    rest_vals = math.sqrt(params.A2) * ydd[3:]
    return slot_vals, rest_vals


def _known_code_values(y_prime, y_double_prime, params):
    # sigma = 0: the receiver knows the transmitter's selection exactly
    sel = transmitter_selection(y_prime, params)
    code2 = build_phase2(sel, params.M, params.n1, params.A2)
    return code2.codewords @ np.asarray(y_double_prime, dtype=float)


def mixture_log_likelihoods(y_prime, y_double_prime, params: ChannelParams,
                            sampler, config: MixtureConfig = MixtureConfig()
                            ) -> np.ndarray:
    """Monte Carlo ``log E_{z'|y'} exp((y'', x''_j(z')) - A2/2)`` for all ``j``."""
    if params.sigma == 0:
        return _known_code_values(y_prime, y_double_prime, params) - params.A2 / 2
    dist = sample_transmitter_distances(y_prime, params, sampler, config.num_samples)
    slot_vals, rest_vals = _phase_two_correlations(y_double_prime, params)
    ll = kernels.mixture_loglik(dist, params.gap2, params.gap3, slot_vals, rest_vals)
    return ll - params.A2 / 2


def mixture_log_likelihood(y_prime, y_double_prime, j: int, params: ChannelParams,
                           sampler, config: MixtureConfig = MixtureConfig()) -> float:
    """Mixture log-likelihood of a single message `j`."""
    return float(mixture_log_likelihoods(y_prime, y_double_prime, params,
                                         sampler, config)[j])


def decode(y_prime, y_double_prime, params: ChannelParams, sampler,
           config: MixtureConfig = MixtureConfig()) -> int:
    """Posterior decision with the sampled mixture likelihood.

    Every mixture term lies between the smallest and largest phase-II
    correlation any message can be assigned, so when the phase-I lead of
    the best message exceeds that spread the decision is returned without
    sampling (the result is the same either way).
    """
    p1 = phase_one_loglik(y_prime, params)
    if params.sigma > 0:
        spread = _correlation_spread(y_double_prime, params)
        top2 = np.partition(p1, -2)[-2:]
        if top2[1] - top2[0] > spread:
            return int(np.argmax(p1))
    stat = p1 + mixture_log_likelihoods(y_prime, y_double_prime, params,
                                        sampler, config)
    return int(np.argmax(stat))


def _correlation_spread(y_double_prime, params: ChannelParams) -> float:
    slot_vals, rest_vals = _phase_two_correlations(y_double_prime, params)
    kmax = min(4, params.M)
    vals = [slot_vals[k, :k] for k in range(2, kmax + 1)]
    vals.append(rest_vals[:params.M - 2])
    vals = np.concatenate(vals)
    return float(vals.max() - vals.min())


def decode_phase_one(y_prime, params: ChannelParams) -> int:
    """Decision from ``y'`` alone (phase-II observations discarded)."""
    return int(np.argmax(phase_one_loglik(y_prime, params)))


def _classify_pair(k, members, i: int, ref: int) -> np.ndarray:
    has_i = (members == i).any(axis=1)
    has_ref = (members == ref).any(axis=1)
    return np.where(has_i & has_ref, k, 0)


def group_weights(y_prime, i: int, params: ChannelParams, sampler,
                  config: MixtureConfig = MixtureConfig(), ref: int = 0) -> dict:
    """Sampled probabilities that the pair ``(ref, i)`` ends up at distance
    ``delta_k``: ``k`` if both land in a selected group of size ``k``,
    ``0`` otherwise."""
    if i == ref:
        raise DomainError("pair members must differ")
    if params.sigma == 0:
        sel = transmitter_selection(y_prime, params)
        cls = np.array([sel.k if (i in sel and ref in sel) else 0])
    else:
        dist = sample_transmitter_distances(y_prime, params, sampler,
                                            config.num_samples)
        k, members = kernels.select_groups(dist, params.gap2, params.gap3)
        cls = _classify_pair(k.astype(int), members, i, ref)
    counts = np.bincount(cls, minlength=5)
    return {kk: counts[kk] / cls.size for kk in range(5)}


# -- deterministic oracle ---------------------------------------------------

@lru_cache(maxsize=32)
def _rules(q: int):
    x, w = hermegauss(q)
    g, gw = leggauss(q)
    return x, w / math.sqrt(2 * math.pi), g, gw


def _interval_nodes(lo, width, s, q):
    """Composite Gauss-Legendre nodes on ``[lo, lo + width]`` (``lo`` is an
    array of left ends); panels are at most ``2 s`` wide."""
    _, _, g, gw = _rules(q)
    panels = max(1, min(256, math.ceil(width / (2.0 * s))))
    h = width / panels
    offs = (np.arange(panels)[:, None] * h + (g[None, :] + 1.0) * h / 2).ravel()
    wts = np.tile(gw * h / 2, panels)
    return lo[:, None] + offs[None, :], wts


def outcome_probabilities(y_prime, params: ChannelParams, q: int = 40):
    """Probability of every ordered group the transmitter can select, given ``y'``.

    Returns ``(groups, probs)`` where ``groups`` is a list of member tuples
    in rank order. The transmitter scores ``u_j = y'_j + sigma eta_j`` are
    independent Gaussians; each event is integrated by Gauss-Hermite over
    the third-ranked score and composite Gauss-Legendre over the intervals
    the neighbouring ranks are confined to.
    """
    M = params.M
    if M > EXACT_MAX_M:
        raise DomainError(f"exact decoding supports M <= {EXACT_MAX_M}, got {M}")
    y = np.asarray(y_prime, dtype=float)
    if params.sigma == 0:
        sel = transmitter_selection(y, params)
        return [sel.members], np.ones(1)

    mu = y[:M]
    s = params.sigma
    root = math.sqrt(params.A1)
    g2 = root * params.tau2
    g3 = root * params.tau3
    x, w, _, _ = _rules(q)
    everyone = set(range(M))

    def cdf(t, r):  # P(u_r <= t)
        return ndtr((t - mu[r]) / s)

    def pdf(t, r):
        z = (t - mu[r]) / s
        return np.exp(-0.5 * z * z) / (s * math.sqrt(2 * math.pi))

    def upper_pair(a, b, wn):
        # int_w^{w+g2} f_b(v) P(u_a > v) dv at every outer node
        if g2 == 0:
            return np.zeros_like(wn)
        v, vw = _interval_nodes(wn, g2, s, q)
        return (pdf(v, b) * (1.0 - cdf(v, a))) @ vw

    groups, probs = [], []
    for a, b in itertools.permutations(range(M), 2):
        vn = mu[b] + s * x
        f = 1.0 - cdf(vn, a)
        for r in everyone - {a, b}:
            f = f * cdf(vn - g2, r)
        groups.append((a, b))
        probs.append(f @ w)
    if M >= 3:
        for a, b, c in itertools.permutations(range(M), 3):
            wn = mu[c] + s * x
            f = upper_pair(a, b, wn)
            for r in everyone - {a, b, c}:
                f = f * cdf(wn - g3, r)
            groups.append((a, b, c))
            probs.append(f @ w)
    if M >= 4:
        for a, b, c, d in itertools.permutations(range(M), 4):
            if g3 == 0:
                groups.append((a, b, c, d))
                probs.append(0.0)
                continue
            wn = mu[c] + s * x
            f = upper_pair(a, b, wn)
            rest = everyone - {a, b, c, d}
            if rest:
                sn, sw = _interval_nodes(wn - g3, g3, s, q)
                inner = pdf(sn, d)
                for r in rest:
                    inner = inner * cdf(sn, r)
                lower = inner @ sw
            else:
                lower = cdf(wn, d) - cdf(wn - g3, d)
            groups.append((a, b, c, d))
            probs.append((f * lower) @ w)
    return groups, np.asarray(probs, dtype=float)


@lru_cache(maxsize=4096)
def _phase2_words(members: tuple, M: int, n1: int, A2: float) -> np.ndarray:
    return build_phase2(members, M, n1, A2).codewords


def exact_log_likelihoods(y_prime, y_double_prime, params: ChannelParams,
                          q: int = 40) -> np.ndarray:
    """Quadrature counterpart of :func:`mixture_log_likelihoods`."""
    groups, probs = outcome_probabilities(y_prime, params, q)
    ydd = np.asarray(y_double_prime, dtype=float)
    keep = probs > 0
    vals = np.array([_phase2_words(g, params.M, params.n1, params.A2) @ ydd
                     for g, k in zip(groups, keep) if k])
    logp = np.log(probs[keep])
    return logsumexp(logp[:, None] + vals, axis=0) - params.A2 / 2


def decode_exact(y_prime, y_double_prime, params: ChannelParams,
                 config: MixtureConfig = MixtureConfig()) -> int:
    """Posterior decision with the mixture evaluated by quadrature (M <= 6)."""
    stat = phase_one_loglik(y_prime, params) + exact_log_likelihoods(
        y_prime, y_double_prime, params, config.oracle_quadrature_points)
    return int(np.argmax(stat))


def group_weights_exact(y_prime, i: int, params: ChannelParams, q: int = 40,
                        ref: int = 0) -> dict:
    """Quadrature counterpart of :func:`group_weights`."""
    if i == ref:
        raise DomainError("pair members must differ")
    groups, probs = outcome_probabilities(y_prime, params, q)
    out = dict.fromkeys(range(5), 0.0)
    for g, p in zip(groups, probs):
        key = len(g) if (i in g and ref in g) else 0
        out[key] += p
    return out


def decode_naive(y_prime, y_double_prime, params: ChannelParams) -> int:
    """Minimum-distance decoding pretending the feedback was noiseless.

    The receiver rebuilds the phase-II code from its own ``y'`` and decodes
    against the concatenated code.
    """
    code1 = phase_one_code(params.M, params.n1, params.A1)
    sel = transmitter_selection(y_prime, params)
    words2 = _phase2_words(sel.members, params.M, params.n1, params.A2)
    d1 = code1.codewords - np.asarray(y_prime, dtype=float)
    d2 = words2 - np.asarray(y_double_prime, dtype=float)
    dist = np.einsum("ij,ij->i", d1, d1) + np.einsum("ij,ij->i", d2, d2)
    return int(np.argmin(dist))


def posterior_report(y_prime, y_double_prime, params: ChannelParams, sampler,
                     config: MixtureConfig = MixtureConfig(),
                     pair: tuple | None = None) -> PosteriorReport:
    """Log-likelihoods of all messages, plus group weights for `pair`."""
    if isinstance(sampler, np.random.Generator) and pair is not None:
        # independent draws for the weights; the likelihoods keep theirs
        eta_ll = sampler.standard_normal((config.num_samples, params.M))
        eta_w = sampler.standard_normal((config.num_samples, params.M))
    else:
        eta_ll = eta_w = sampler
    ll = phase_one_loglik(y_prime, params) + mixture_log_likelihoods(
        y_prime, y_double_prime, params, eta_ll, config)
    weights = None
    if pair is not None:
        ref, i = pair
        weights = group_weights(y_prime, i, params, eta_w, config, ref=ref)
    return PosteriorReport(ll, weights, pair)


def make_decoder(kind: str = "mixture", config: MixtureConfig = MixtureConfig()
                 ) -> Callable:
    """Decoder handle ``f(y', y'', params, rng) -> index`` for sessions."""
    if kind == "mixture":
        return lambda y1, y2, params, rng: decode(y1, y2, params, rng, config)
    if kind == "exact":
        return lambda y1, y2, params, rng: decode_exact(y1, y2, params, config)
    if kind == "naive":
        return lambda y1, y2, params, rng: decode_naive(y1, y2, params)
    raise DomainError(f"unknown decoder kind {kind!r}")
