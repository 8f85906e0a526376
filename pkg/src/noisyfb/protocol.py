"""The one-switch transmission strategy and the no-feedback baseline.

Messages are 0-based indices ``0 .. M-1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .channel import ChannelParams, NoiseStream, feedback, forward
from .codebook import Codebook, PhaseTwoCode, build_orthogonal, build_phase2
from .errors import DomainError

__all__ = [
    "Ranking",
    "GroupSelection",
    "Transcript",
    "phase_one_code",
    "baseline_code",
    "rank",
    "select_group",
    "transmitter_selection",
    "run_session",
    "run_baseline",
    "min_distance_decision",
]

#: ``decoder(y_prime, y_double_prime, params, rng) -> message index``
Decoder = Callable[[np.ndarray, np.ndarray, ChannelParams, np.random.Generator], int]


@dataclass(frozen=True)
class Ranking:
    """Messages sorted by squared distance to an observation.

    ``order[r]`` is the message at rank ``r`` and ``distances[r]`` its
    distance; equal distances keep ascending message order.
    """

    order: tuple
    distances: np.ndarray

    def top(self, k: int) -> tuple:
        return self.order[:k]


@dataclass(frozen=True)
class GroupSelection:
    """The transmitter's group: ``members`` in rank order, ``k`` of them."""

    k: int
    members: tuple

    def __contains__(self, j):
        return j in self.members


@dataclass(frozen=True, eq=False)
class Transcript:
    """Everything observed in one transmission session."""

    true_message: int
    x: np.ndarray
    y_prime: np.ndarray
    z_prime: Optional[np.ndarray]
    y_double_prime: np.ndarray
    selection: Optional[GroupSelection]
    decision: int

    @property
    def correct(self) -> bool:
        return self.decision == self.true_message

    @property
    def coordination_failure(self) -> bool:
        """True message left out of the transmitter's group."""
        return self.selection is not None and self.true_message not in self.selection

    @property
    def energy(self) -> float:
        return float(self.x @ self.x)


@lru_cache(maxsize=64)
def phase_one_code(M: int, n1: int, A1: float) -> Codebook:
    """Phase-I orthogonal code of energy `A1` and length `n1`."""
    return build_orthogonal(M, n1, A1)


@lru_cache(maxsize=64)
def baseline_code(M: int, n: int, energy: float) -> Codebook:
    """Single-phase orthogonal code of the no-feedback comparison arm."""
    return build_orthogonal(M, n, energy)


def rank(codebook: Codebook, obs) -> Ranking:
    """Rank all codewords by squared distance to `obs` (closest first)."""
    obs = np.asarray(obs, dtype=float)
    if obs.shape != (codebook.dim,):
        raise DomainError(
            f"observation of shape {obs.shape} does not match code dimension {codebook.dim}")
    diff = codebook.codewords - obs
    dist = np.einsum("ij,ij->i", diff, diff)
    order = np.argsort(dist, kind="stable")
    return Ranking(tuple(int(i) for i in order), dist[order])


def select_group(ranking: Ranking, A1: float, tau2: float, tau3: float) -> GroupSelection:
    """Pick the group size from the gaps in the sorted distances.

    Rule 1: ``k = 2`` if ``d(3) - d(2) >= 2 A1 tau2``; otherwise rule 2:
    ``k = 3`` if ``d(4) - d(3) >= 2 A1 tau3``; otherwise ``k = 4``. With
    fewer than four messages the rules needing missing ranks are skipped
    and ``k`` is capped at ``M``.
    """
    d = ranking.distances
    M = len(d)
    if M < 2:
        raise DomainError("need at least two messages")
    if M == 2 or d[2] - d[1] >= 2.0 * A1 * tau2:
        k = 2
    elif M == 3 or d[3] - d[2] >= 2.0 * A1 * tau3:
        k = 3
    else:
        k = 4
    return GroupSelection(k, ranking.top(k))


def transmitter_selection(z_prime, params: ChannelParams) -> GroupSelection:
    """Group chosen by the transmitter from its phase-I observation."""
    code = phase_one_code(params.M, params.n1, params.A1)
    return select_group(rank(code, z_prime), params.A1, params.tau2, params.tau3)


def min_distance_decision(codewords: np.ndarray, obs) -> int:
    """Closest codeword to `obs`, smallest index on ties."""
    diff = np.asarray(codewords) - np.asarray(obs, dtype=float)
    return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))


def run_session(true_message: int, params: ChannelParams, noise: NoiseStream,
                decoder: Decoder) -> Transcript:
    """Transmit one message with the one-switch scheme and decode it.

    Phase I sends the orthogonal codeword of energy ``A1``; the transmitter
    observes the fed-back block, selects its group and switches to the
    composite phase-II code of energy ``A2``. The receiver decodes from
    ``(y', y'')``.
    """
    M, n1 = params.M, params.n1
    if not 0 <= true_message < M:
        raise DomainError(f"message {true_message} outside range(0, {M})")
    code1 = phase_one_code(M, n1, params.A1)
    x1 = code1[true_message]
    y1 = forward(x1, noise)
    z1 = feedback(y1, params.sigma, noise)
    selection = select_group(rank(code1, z1), params.A1, params.tau2, params.tau3)
    code2: PhaseTwoCode = build_phase2(selection, M, n1, params.A2)
    x2 = code2.codeword(true_message)
    y2 = forward(x2, noise)
    decision = int(decoder(y1, y2, params, noise.decoder))
    return Transcript(true_message, np.concatenate([x1, x2]), y1, z1, y2,
                      selection, decision)


def run_baseline(true_message: int, params: ChannelParams,
                 noise: NoiseStream) -> Transcript:
    """No-feedback arm: orthogonal code of energy ``nA`` over all ``n`` slots,
    minimum-distance decoding."""
    M, n = params.M, params.n
    if M > n:
        raise DomainError(f"M={M} exceeds block length {n}")
    if not 0 <= true_message < M:
        raise DomainError(f"message {true_message} outside range(0, {M})")
    code = baseline_code(M, n, params.total_energy)
    x = code[true_message]
    y = forward(x, noise)
    decision = min_distance_decision(code.codewords, y)
    return Transcript(true_message, x.copy(), y, None, np.empty(0), None, decision)
