"""Zero-rate transmission over an AWGN channel with noisy passive feedback.

Simulation of the one-switch adaptive coding scheme (orthogonal phase I,
feedback-driven simplex/orthogonal phase II, mixture decoding) and a
numerical checker for its error-exponent bounds.
"""

from .channel import ChannelParams, InjectedNoise, NoiseStream, feedback, forward
from .codebook import (Codebook, PhaseTwoCode, build_orthogonal, build_phase2,
                       build_simplex)
from .decoder import (MixtureConfig, decode, decode_exact, decode_naive,
                      mixture_log_likelihoods)
from .errors import ConfigError, DimensionDeficitError, DomainError
from .kernels import BACKEND
from .protocol import (GroupSelection, Ranking, Transcript, rank, run_baseline,
                       run_session, select_group)

__version__ = "0.1.0"

__all__ = [
    "ChannelParams", "InjectedNoise", "NoiseStream", "feedback", "forward",
    "Codebook", "PhaseTwoCode", "build_orthogonal", "build_phase2", "build_simplex",
    "MixtureConfig", "decode", "decode_exact", "decode_naive",
    "mixture_log_likelihoods", "ConfigError", "DimensionDeficitError",
    "DomainError", "BACKEND", "GroupSelection", "Ranking", "Transcript", "rank",
    "run_baseline", "run_session", "select_group",
]
