"""Design-level indicators of two-phase selection variability.

The working size moves away from ``n`` only when consecutive sorted
probabilities at the top of the design are spread apart, so the gap
profile of the top block is what these indicators summarize.  ``d1``
weights the gaps by how far down the block they sit, ``d2`` and ``d3``
rescale the worst gap by the population size and by ``ln(n)``.  Flat-top
designs (all top probabilities equal) score zero on all three.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .design import DesignSpec
from .errors import TooSmallError

__all__ = ["DesignProfile", "profile_design", "indicator_curve"]


@dataclass(frozen=True)
class DesignProfile:
    """Gap indicators plus basic shape facts for one design.

    ``min_scaled_pi`` and ``max_scaled_pi`` are the extremes of
    ``N * pi_k / n``, the probabilities relative to the equal-probability
    level; they profile how unequal the design is without gating it.
    """

    size: int
    n: int
    d1: float
    d2: float
    d3: float
    min_scaled_pi: float
    max_scaled_pi: float
    sampling_fraction: float
    max_top_gap: float


def profile_design(design: DesignSpec) -> DesignProfile:
    """Compute the gap indicators of a validated design.

    Needs ``n >= 2``; with a single top unit there are no internal gaps
    to profile.
    """
    N, n = design.size, design.n
    if n < 2:
        raise TooSmallError(f"need a sample size of at least 2, got {n}")
    top = design.pi[N - n :]
    gaps = np.diff(top)
    weights = np.arange(n - 1, 0, -1, dtype=np.float64)
    d1 = float(np.dot(weights, gaps)) / n
    worst = float(gaps.max())
    return DesignProfile(
        size=N,
        n=n,
        d1=d1,
        d2=N * worst,
        d3=math.log(n) * worst,
        min_scaled_pi=float(design.pi[0]) * N / n,
        max_scaled_pi=float(design.pi[-1]) * N / n,
        sampling_fraction=n / N,
        max_top_gap=worst,
    )


def indicator_curve(designs: Iterable[DesignSpec]) -> list[DesignProfile]:
    """Profile a family of designs, preserving the given order."""
    return [profile_design(d) for d in designs]
