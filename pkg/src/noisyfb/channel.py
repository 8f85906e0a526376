"""Forward AWGN channel, passive noisy feedback link and seeded noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "ChannelParams",
    "NoiseStream",
    "InjectedNoise",
    "forward",
    "feedback",
]

# sub-stream identifiers inside one trial
_FORWARD, _FEEDBACK, _DECODER, _MESSAGE = range(4)


@dataclass(frozen=True)
class ChannelParams:
    """Block length, power budget and switching-scheme parameters.

    ``A`` is the per-symbol power, so every codeword has total energy
    ``n * A`` split as ``A1 = nA / (1 + beta)`` on phase I and
    ``A2 = beta * A1`` on phase II. The switch happens at ``n1 = n / 2``.
    """

    A: float
    sigma: float
    n: int
    M: int
    beta: float = 0.5
    tau2: float = 0.15
    tau3: float = 0.05

    def __post_init__(self):
        if not self.A > 0:
            raise DomainError(f"A must be positive, got {self.A}")
        if not self.sigma >= 0:
            raise DomainError(f"sigma must be non-negative, got {self.sigma}")
        if self.n < 2 or self.n % 2:
            raise DomainError(f"n must be a positive even integer, got {self.n}")
        if not self.beta > 0:
            raise DomainError(f"beta must be positive, got {self.beta}")
        if self.tau2 < 0 or self.tau3 < 0:
            raise DomainError("thresholds tau2, tau3 must be non-negative")
        if self.M < 2:
            raise DomainError(f"need at least two messages, got M={self.M}")
        if self.M > self.n1 - 1:
            raise DomainError(
                f"M={self.M} exceeds n1 - 1 = {self.n1 - 1} (phase-II capacity)")

    @classmethod
    def from_sigma2(cls, A, sigma2, n, M, **kw) -> "ChannelParams":
        return cls(A=A, sigma=math.sqrt(sigma2), n=n, M=M, **kw)

    @property
    def n1(self) -> int:
        return self.n // 2

    @property
    def sigma2(self) -> float:
        return self.sigma ** 2

    @property
    def total_energy(self) -> float:
        return self.n * self.A

    @property
    def A1(self) -> float:
        return self.total_energy / (1.0 + self.beta)

    @property
    def A2(self) -> float:
        return self.beta * self.A1

    @property
    def gap2(self) -> float:
        """Rule-1 threshold on ``d(3) - d(2)``."""
        return 2.0 * self.A1 * self.tau2

    @property
    def gap3(self) -> float:
        """Rule-2 threshold on ``d(4) - d(3)``."""
        return 2.0 * self.A1 * self.tau3


class NoiseStream:
    """Reproducible noise for one trial.

    Forward noise, feedback noise, decoder sampling and the choice of the
    true message come from four disjoint child streams of
    ``SeedSequence(master_seed, spawn_key=(trial_index,))``, so equal
    ``(master_seed, trial_index)`` pairs replay bit-identical draws.
    """

    def __init__(self, master_seed: int, trial_index: int = 0):
        if master_seed < 0 or trial_index < 0:
            raise DomainError("seed and trial index must be non-negative")
        self.master_seed = int(master_seed)
        self.trial_index = int(trial_index)
        self._gens: dict[int, np.random.Generator] = {}
        self.draws = {"forward": 0, "feedback": 0, "decoder": 0}

    def _gen(self, sub: int) -> np.random.Generator:
        g = self._gens.get(sub)
        if g is None:
            ss = np.random.SeedSequence(
                self.master_seed, spawn_key=(self.trial_index, sub))
            g = self._gens[sub] = np.random.Generator(np.random.PCG64(ss))
        return g

    def forward_noise(self, size: int) -> np.ndarray:
        self.draws["forward"] += size
        return self._gen(_FORWARD).standard_normal(size)

    def feedback_noise(self, size: int) -> np.ndarray:
        self.draws["feedback"] += size
        return self._gen(_FEEDBACK).standard_normal(size)

    @property
    def decoder(self) -> np.random.Generator:
        """Generator reserved for the receiver's internal sampling."""
        return self._gen(_DECODER)

    def message(self, M: int) -> int:
        """Uniformly random true message index in ``range(M)``."""
        return int(self._gen(_MESSAGE).integers(M))


class InjectedNoise(NoiseStream):
    """Noise stream with prescribed (default all-zero) channel noise.

    Forward and feedback draws are served from the given arrays, consumed
    left to right; the decoder and message streams stay seeded.
    """

    def __init__(self, forward=None, feedback=None, master_seed: int = 0,
                 trial_index: int = 0):
        super().__init__(master_seed, trial_index)
        self._fixed = {
            "forward": None if forward is None else np.asarray(forward, float),
            "feedback": None if feedback is None else np.asarray(feedback, float),
        }
        self._pos = {"forward": 0, "feedback": 0}

    def _take(self, name: str, size: int) -> np.ndarray:
        src = self._fixed[name]
        start = self._pos[name]
        self._pos[name] += size
        self.draws[name] += size
        if src is None:
            return np.zeros(size)
        if start + size > src.size:
            raise DomainError(f"injected {name} noise exhausted")
        return src[start:start + size].copy()

    def forward_noise(self, size: int) -> np.ndarray:
        return self._take("forward", size)

    def feedback_noise(self, size: int) -> np.ndarray:
        return self._take("feedback", size)


def forward(x, noise: NoiseStream) -> np.ndarray:
    """Pass a block through the forward channel: ``y = x + xi``."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("channel input must be finite")
    return x + noise.forward_noise(x.size)


def feedback(y, sigma: float, noise: NoiseStream) -> np.ndarray:
    """What the transmitter sees of the receiver's outputs: ``z = y + sigma eta``.

    The feedback stream is consumed even when ``sigma == 0`` so that runs at
    different noise levels share their remaining draws.
    """
    if sigma < 0:
        raise DomainError(f"sigma must be non-negative, got {sigma}")
    y = np.asarray(y, dtype=float)
    eta = noise.feedback_noise(y.size)
    if sigma == 0:
        return y.copy()
    return y + sigma * eta
