"""Orthogonal, simplex and composite phase-II codes.

All codes are real, equal-energy and deterministic given their inputs.
Coordinates are 0-based: the phase-II block has ``n1`` slots, the first
:data:`GROUP_SLOTS` of which are reserved for the selected group and the
remaining ``n1 - 3`` carry the orthogonal code of the unselected messages.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DimensionDeficitError, DomainError

__all__ = [
    "GROUP_SLOTS",
    "Codebook",
    "PhaseTwoCode",
    "build_orthogonal",
    "build_simplex",
    "build_phase2",
    "group_slot_table",
    "pairwise_sq_distances",
]

#: Number of phase-II slots reserved for the selected group.
GROUP_SLOTS = 3

KINDS = ("orthogonal", "simplex", "composite")


def pairwise_sq_distances(words: np.ndarray) -> np.ndarray:
    """Matrix of squared Euclidean distances between the rows of `words`."""
    words = np.asarray(words, dtype=float)
    diff = words[:, None, :] - words[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


@dataclass(frozen=True, eq=False)
class Codebook:
    """A set of equal-energy real codewords.

    Attributes
    ----------
    codewords : ndarray, shape (M, dim)
        One codeword per row.
    energy : float
        Squared norm shared by every codeword.
    kind : str
        ``"orthogonal"``, ``"simplex"`` or ``"composite"``.
    """

    codewords: np.ndarray
    energy: float
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown code kind {self.kind!r}")
        words = np.asarray(self.codewords, dtype=float)
        if words.ndim != 2:
            raise DomainError("codewords must be a 2-D array")
        words.setflags(write=False)
        object.__setattr__(self, "codewords", words)

    @property
    def size(self) -> int:
        return self.codewords.shape[0]

    @property
    def dim(self) -> int:
        return self.codewords.shape[1]

    def __len__(self):
        return self.size

    def __getitem__(self, j):
        return self.codewords[j]

    def distances(self) -> np.ndarray:
        return pairwise_sq_distances(self.codewords)

    def validate(self, rtol: float = 1e-9) -> None:
        """Raise ``ValueError`` if a geometric invariant of the kind fails."""
        words = self.codewords
        e = self.energy
        norms = np.einsum("ij,ij->i", words, words)
        if not np.allclose(norms, e, rtol=rtol, atol=0.0):
            raise ValueError(f"codeword energies {norms} differ from {e}")
        gram = words @ words.T
        off = gram[~np.eye(self.size, dtype=bool)]
        if self.kind == "orthogonal":
            if np.any(np.abs(off) > rtol * e):
                raise ValueError("orthogonal code has non-zero inner products")
        elif self.kind == "simplex":
            k = self.size
            if np.any(np.abs(off + e / (k - 1)) > rtol * e):
                raise ValueError("simplex inner products are not -E/(k-1)")
            if np.any(np.abs(words.sum(axis=0)) > rtol * np.sqrt(e)):
                raise ValueError("simplex code is not centred")


def build_orthogonal(M: int, dim: int, energy: float) -> Codebook:
    """Scaled standard-basis code: codeword ``i`` is ``sqrt(energy) * e_i``."""
    if energy <= 0:
        raise DomainError(f"energy must be positive, got {energy}")
    if M < 1:
        raise DomainError(f"need at least one codeword, got M={M}")
    if M > dim:
        raise DimensionDeficitError(
            f"{M} orthogonal codewords do not fit in {dim} dimensions")
    words = np.zeros((M, dim))
    words[np.arange(M), np.arange(M)] = np.sqrt(energy)
    return Codebook(words, float(energy), "orthogonal")


@lru_cache(maxsize=None)
def _helmert(k: int) -> np.ndarray:
    # Columns are the centred basis vectors e_i - 1/k expressed in an
    # orthonormal basis of the sum-zero hyperplane; squared norm (k-1)/k.
    h = np.zeros((k - 1, k))
    for m in range(1, k):
        h[m - 1, :m] = 1.0
        h[m - 1, m] = -m
        h[m - 1] /= np.sqrt(m * (m + 1))
    h.setflags(write=False)
    return h


def build_simplex(k: int, energy: float) -> Codebook:
    """Regular k-simplex of `k` codewords in ``k - 1`` dimensions.

    Pairwise squared distance is ``2 * energy * k / (k - 1)``. For ``k = 2``
    the two codewords are ``+sqrt(energy)`` and ``-sqrt(energy)``.
    """
    if k not in (2, 3, 4):
        raise DomainError(f"simplex size must be 2, 3 or 4, got {k}")
    if energy <= 0:
        raise DomainError(f"energy must be positive, got {energy}")
    scale = np.sqrt(energy * k / (k - 1))
    return Codebook(scale * _helmert(k).T, float(energy), "simplex")


def group_slot_table(energy: float) -> np.ndarray:
    """Simplex codewords embedded in the reserved slots, indexed by k.

    Returns an array ``T`` of shape ``(5, 4, GROUP_SLOTS)`` where
    ``T[k, p]`` is the reserved-slot content of the group member ranked
    ``p`` when a group of size ``k`` is selected. Unused entries are zero.
    """
    table = np.zeros((5, 4, GROUP_SLOTS))
    for k in (2, 3, 4):
        words = build_simplex(k, energy).codewords
        table[k, :k, : k - 1] = words
    return table


@dataclass(frozen=True, eq=False)
class PhaseTwoCode:
    """Composite phase-II code chosen by the transmitter after phase I.

    Attributes
    ----------
    selected : tuple of int
        Group members in ascending index order; member ``p`` gets simplex
        codeword ``p``. The assignment depends only on the set, so a swap of
        ranks inside the group leaves every codeword unchanged.
    rest : tuple of int
        Unselected messages in ascending order; the ``r``-th gets the
        ``r``-th orthogonal codeword in slots ``3 .. n1-1``.
    group_code, rest_code : Codebook
        The simplex and orthogonal component codes, in their own coordinates.
    codewords : ndarray, shape (M, n1)
        Full phase-II codeword of every message.
    """

    selected: tuple
    rest: tuple
    group_code: Codebook
    rest_code: Codebook | None
    codewords: np.ndarray
    total_length: int

    @property
    def k(self) -> int:
        return len(self.selected)

    @property
    def energy(self) -> float:
        return self.group_code.energy

    def codeword(self, j: int) -> np.ndarray:
        return self.codewords[j]

    def as_codebook(self) -> Codebook:
        return Codebook(self.codewords, self.energy, "composite")


def build_phase2(selection, M: int, n1: int, A2: float) -> PhaseTwoCode:
    """Assemble the phase-II code for a group selection.

    Parameters
    ----------
    selection : GroupSelection or sequence of int
        Selected message indices (2 to 4 of them); their order is ignored.
    M : int
        Total number of messages.
    n1 : int
        Phase-II length.
    A2 : float
        Phase-II energy of every codeword.
    """
    members: Sequence[int] = getattr(selection, "members", selection)
    members = tuple(int(m) for m in members)
    k = len(members)
    if k not in (2, 3, 4):
        raise DomainError(f"group size must be 2, 3 or 4, got {k}")
    if len(set(members)) != k or min(members) < 0 or max(members) >= M:
        raise DomainError(f"invalid group {members} for M={M}")
    if A2 <= 0:
        raise DomainError(f"energy must be positive, got {A2}")
    n_rest = M - k
    if n1 < GROUP_SLOTS or n_rest > n1 - GROUP_SLOTS:
        raise DimensionDeficitError(
            f"{n_rest} rest codewords do not fit in {n1 - GROUP_SLOTS} slots")

    members = tuple(sorted(members))
    chosen = set(members)
    rest = tuple(j for j in range(M) if j not in chosen)
    group = build_simplex(k, A2)
    words = np.zeros((M, n1))
    words[list(members), : k - 1] = group.codewords
    rest_code = None
    if n_rest:
        rest_code = build_orthogonal(n_rest, n1 - GROUP_SLOTS, A2)
        words[list(rest), GROUP_SLOTS:] = rest_code.codewords
    words.setflags(write=False)
    return PhaseTwoCode(members, rest, group, rest_code, words, n1)
