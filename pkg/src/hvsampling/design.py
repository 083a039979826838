"""Two-phase fixed-size unequal-probability sampling.

The design takes target inclusion probabilities ``pi`` that sum to an
integer ``n`` and selects exactly ``n`` distinct units so that every unit's
realized inclusion probability equals its target.  Selection runs in two
phases:

* phase 1 draws a random working size ``n_prime`` in ``1..n`` from the
  ``delta`` distribution built off the top-``n`` gaps of the sorted
  probabilities, then rescales the probabilities into a split vector
  ``pi0`` whose entries sum to ``n_prime`` over the first ``n_big`` units
  and equal 1 afterwards;
* phase 2 selects ``n_prime`` units among the first ``n_big`` using either
  a draw-by-draw scheme (one categorical draw per selection) or a
  single left-to-right scan with evolving acceptance probabilities.  The
  two variants induce the same sampling distribution.

Everything here works in sorted space: units are re-indexed so that
``pi`` is ascending, and ``perm`` maps sorted positions back to the
caller's order.  Ties keep their original relative order, so equal
probabilities never make results order-dependent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSizeError,
    DimensionMismatchError,
    NonIntegerSizeError,
    NonProbabilityError,
    NumericalUnderflowError,
    OutOfRangeError,
    ProbabilityOverflowError,
    ZeroPrefixError,
)
from .rng import RngStream

__all__ = [
    "VARIANTS",
    "DesignSpec",
    "SplitOutcome",
    "SampleSelection",
    "validate_design",
    "phase1_deltas",
    "split_probabilities",
    "phase1_split",
    "phase2_draw_by_draw",
    "phase2_sequential",
    "hv_sample",
    "categorical_indices",
]

VARIANTS = ("sequential", "draw_by_draw")

INTEGER_SUM_TOL = 1e-9
UNDERFLOW_TOL = 1e-12


@dataclass(frozen=True)
class DesignSpec:
    """Validated design in sorted space.

    Attributes
    ----------
    pi : ndarray
        Inclusion probabilities sorted ascending, each strictly in (0, 1).
    n : int
        Fixed sample size; equals ``pi.sum()`` up to 1e-9.
    perm : ndarray
        ``perm[k]`` is the caller-order position of sorted unit ``k``.
    cum : ndarray
        Prefix sums of ``pi``.
    """

    pi: np.ndarray
    n: int
    perm: np.ndarray
    cum: np.ndarray

    @property
    def size(self) -> int:
        return self.pi.shape[0]


@dataclass(frozen=True)
class SplitOutcome:
    """Phase-1 result: working size and split probability vector.

    ``pi0`` sums to ``n_prime`` over the first ``n_big`` entries and is
    exactly 1 from ``n_big`` on (those units are selected with certainty).
    ``delta`` is the distribution ``n_prime`` was (or would be) drawn from.
    """

    design: DesignSpec
    n_prime: int
    n_big: int
    pi0: np.ndarray
    cum0: np.ndarray
    delta: np.ndarray


@dataclass(frozen=True)
class SampleSelection:
    """Final sample: sorted-space unit indices plus the phase-1 state."""

    split: SplitOutcome
    units_sorted: np.ndarray
    units_original: np.ndarray
    indicators: np.ndarray

    @property
    def design(self) -> DesignSpec:
        return self.split.design


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def validate_design(pi, *, tol: float = INTEGER_SUM_TOL) -> DesignSpec:
    """Check and normalize raw inclusion probabilities.

    Parameters
    ----------
    pi : array_like
        Target inclusion probabilities in the caller's unit order.

    Returns
    -------
    DesignSpec

    Raises
    ------
    NonProbabilityError
        If any entry is not finite or lies outside the open interval (0, 1).
    NonIntegerSizeError
        If the sum is farther than ``tol`` from the nearest integer.
    DegenerateSizeError
        If the implied size is 0 or the population size.
    """
    raw = np.asarray(pi, dtype=np.float64)
    if raw.ndim != 1 or raw.size == 0:
        raise NonProbabilityError("pi must be a non-empty 1-d array")
    bad = ~np.isfinite(raw) | (raw <= 0.0) | (raw >= 1.0)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise NonProbabilityError(f"unit {k + 1}")
    total = float(raw.sum())
    n = int(round(total))
    if abs(total - n) > tol:
        raise NonIntegerSizeError(
            f"probabilities sum to {total!r}, not within {tol} of an integer"
        )
    if n < 1 or n >= raw.size:
        raise DegenerateSizeError(f"implied size {n} of {raw.size} units")
    perm = np.argsort(raw, kind="stable")
    srt = raw[perm]
    return DesignSpec(
        pi=_frozen(srt),
        n=n,
        perm=_frozen(perm.astype(np.int64)),
        cum=_frozen(np.cumsum(srt)),
    )


def phase1_deltas(design: DesignSpec) -> np.ndarray:
    """Distribution of the working size over ``1..n``.

    Entry ``i`` (1-based) is proportional to the gap between consecutive
    sorted probabilities at the top of the design, with the probability
    above the highest unit taken as 1.  The entries are nonnegative and
    sum to 1 up to rounding.
    """
    N, n = design.size, design.n
    pref = float(design.cum[N - n - 1])
    if pref <= 0.0:
        raise ZeroPrefixError(f"prefix sum of the bottom {N - n} units is zero")
    ext = np.append(design.pi, 1.0)
    gaps = np.diff(ext[N - n :])
    i = np.arange(1, n + 1, dtype=np.float64)
    base = float(design.pi[N - n])
    return _frozen(gaps * (pref + i * base) / pref)


def split_probabilities(design: DesignSpec, n_prime: int) -> SplitOutcome:
    """Split probability vector for a given working size.

    Parameters
    ----------
    design : DesignSpec
    n_prime : int
        Working size, must lie in ``1..n``.

    Returns
    -------
    SplitOutcome
        ``pi0`` is nondecreasing, strictly below 1 before ``n_big`` and
        exactly 1 after; its first ``n_big`` entries sum to ``n_prime``.
    """
    N, n = design.size, design.n
    n_prime = int(n_prime)
    if not 1 <= n_prime <= n:
        raise OutOfRangeError(f"working size {n_prime} outside 1..{n}")
    pref = float(design.cum[N - n - 1])
    if pref <= 0.0:
        raise ZeroPrefixError(f"prefix sum of the bottom {N - n} units is zero")
    base = float(design.pi[N - n])
    D = pref + n_prime * base
    n_big = N - (n - n_prime)
    head = N - n + 1
    pi0 = np.empty(N, dtype=np.float64)
    pi0[:head] = n_prime * design.pi[:head] / D
    pi0[head:n_big] = n_prime * base / D
    pi0[n_big:] = 1.0
    return SplitOutcome(
        design=design,
        n_prime=n_prime,
        n_big=n_big,
        pi0=_frozen(pi0),
        cum0=_frozen(np.cumsum(pi0)),
        delta=phase1_deltas(design),
    )


def categorical_indices(cum_weights: np.ndarray, u) -> np.ndarray:
    """Inverse-CDF selection; zero-weight atoms are never chosen.

    ``u`` may be a scalar or an array of uniforms in [0, 1); one uniform
    yields one index.  Weights need not be normalized.
    """
    total = cum_weights[-1]
    idx = np.searchsorted(cum_weights, np.asarray(u) * total, side="right")
    return np.minimum(idx, len(cum_weights) - 1)


def phase1_split(design: DesignSpec, rng: RngStream) -> SplitOutcome:
    """Draw the working size from ``delta`` and build the split vector.

    Consumes exactly one uniform from ``rng``.
    """
    delta = phase1_deltas(design)
    cdelta = np.cumsum(delta)
    if cdelta[-1] <= 0.0:
        raise ZeroPrefixError("size distribution has zero total mass")
    idx = int(categorical_indices(cdelta, rng.uniform()))
    return split_probabilities(design, idx + 1)


def _draw_weights(split: SplitOutcome, j: int, lo: int, hi: int) -> np.ndarray:
    """Unnormalized selection weights for draw ``j`` over window ``lo..hi``.

    Window bounds are 1-based inclusive.  The weights sum to the
    probability that the previous selection state occurs, so the caller
    normalizes before drawing.
    """
    npr = split.n_prime
    pi0, cum0 = split.pi0, split.cum0
    frac = (npr - j + 1) / npr
    w = frac * pi0[lo - 1 : hi].copy()
    if hi > lo:
        ls = np.arange(lo, hi)
        denom = npr - cum0[ls - 1]
        if np.any(denom <= 0.0):
            raise NumericalUnderflowError(
                f"draw {j}: exhausted working mass inside the window"
            )
        factors = 1.0 - (npr - j) * pi0[ls - 1] / denom
        if np.any(factors < -UNDERFLOW_TOL):
            raise NumericalUnderflowError(f"draw {j}: negative carry-over factor")
        np.clip(factors, 0.0, None, out=factors)
        w[1:] *= np.cumprod(factors)
    return w


def _finish_selection(split: SplitOutcome, indicators: np.ndarray) -> SampleSelection:
    design = split.design
    units_sorted = np.flatnonzero(indicators).astype(np.int64)
    return SampleSelection(
        split=split,
        units_sorted=_frozen(units_sorted),
        units_original=_frozen(design.perm[units_sorted]),
        indicators=_frozen(indicators),
    )


def phase2_draw_by_draw(split: SplitOutcome, rng: RngStream) -> SampleSelection:
    """Select the working sample one unit at a time.

    Draw ``j`` picks a unit after the previous pick from a window closed
    at ``N - n + j``; each draw consumes one uniform.  Units past
    ``n_big`` enter the sample with certainty.
    """
    design = split.design
    N, n = design.size, design.n
    indicators = np.zeros(N, dtype=np.int8)
    prev = 0
    for j in range(1, split.n_prime + 1):
        lo, hi = prev + 1, N - n + j
        w = _draw_weights(split, j, lo, hi)
        cw = np.cumsum(w)
        if cw[-1] <= 0.0:
            raise NumericalUnderflowError(f"draw {j}: window weights sum to zero")
        picked = lo + int(categorical_indices(cw, rng.uniform()))
        indicators[picked - 1] = 1
        prev = picked
    indicators[split.n_big :] = 1
    return _finish_selection(split, indicators)


def phase2_sequential(split: SplitOutcome, rng: RngStream) -> SampleSelection:
    """Select the working sample in one left-to-right scan.

    Unit ``t`` is accepted with probability
    ``(slots left) * pi0[t] / (n_prime - mass seen)``; the final unit of
    the working window takes whatever slot count remains.  Exactly one
    uniform is consumed per scanned unit regardless of the outcome, which
    keeps the stream position independent of the path taken.
    """
    design = split.design
    N = design.size
    npr, n_big = split.n_prime, split.n_big
    pi0, cum0 = split.pi0, split.cum0
    indicators = np.zeros(N, dtype=np.int8)
    us = rng.uniforms(n_big - 1)
    count = 0
    for t in range(1, n_big):
        slots = npr - count
        left = n_big - t + 1
        if slots == 0:
            p = 0.0
        elif slots == left:
            # every remaining unit must be taken; exact, not a rounding fix
            p = 1.0
        else:
            seen = cum0[t - 2] if t >= 2 else 0.0
            p = slots * pi0[t - 1] / (npr - seen)
            if p > 1.0 + UNDERFLOW_TOL:
                raise ProbabilityOverflowError(
                    f"acceptance probability {p!r} at position {t}"
                )
            p = min(max(p, 0.0), 1.0)
        if us[t - 1] < p:
            indicators[t - 1] = 1
            count += 1
    final = npr - count
    if final not in (0, 1):
        raise ProbabilityOverflowError(
            f"{final} slots left for the last working unit"
        )
    indicators[n_big - 1] = final
    indicators[n_big:] = 1
    return _finish_selection(split, indicators)


def hv_sample(
    design: DesignSpec, rng: RngStream, variant: str = "sequential"
) -> SampleSelection:
    """Run both phases and return a complete selection.

    Parameters
    ----------
    design : DesignSpec
    rng : RngStream
        Consumed in order: one uniform for the working size, then the
        phase-2 draws.
    variant : str
        ``"sequential"`` or ``"draw_by_draw"``; both induce the same
        distribution over samples.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    split = phase1_split(design, rng)
    if variant == "sequential":
        return phase2_sequential(split, rng)
    return phase2_draw_by_draw(split, rng)


def check_lengths(design: DesignSpec, arr, name: str = "y") -> np.ndarray:
    """Coerce a caller-order variable to float64 and check its length."""
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 1 or out.shape[0] != design.size:
        raise DimensionMismatchError(
            f"{name} has length {out.shape[0] if out.ndim == 1 else out.shape}, "
            f"design has {design.size} units"
        )
    if not np.all(np.isfinite(out)):
        raise DimensionMismatchError(f"{name} contains non-finite values")
    return out
