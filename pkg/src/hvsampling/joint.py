"""Exact first- and second-order inclusion probabilities.

``conditional_joint`` evaluates the closed-form pairwise probabilities
given a phase-1 split; ``unconditional_joint`` mixes those over the
working-size distribution.  ``enumerate_distribution`` walks every
possible execution path of either phase-2 variant and returns the exact
distribution over samples; it is the oracle the closed forms are checked
against and is capped at small population sizes.

All matrices live in sorted space, match the design's unit order after
mapping through ``perm``, and carry first-order probabilities on the
diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import (
    VARIANTS,
    DesignSpec,
    SplitOutcome,
    _draw_weights,
    phase1_deltas,
    split_probabilities,
)
from .errors import DivideByZeroError, TooLargeError

__all__ = [
    "DEFAULT_ENUM_CAP",
    "JointMatrix",
    "ExactDistribution",
    "conditional_joint",
    "unconditional_joint",
    "enumerate_phase2",
    "enumerate_distribution",
    "moments_from_distribution",
    "total_variation",
]

DEFAULT_ENUM_CAP = 12


@dataclass(frozen=True)
class JointMatrix:
    """Symmetric matrix of pairwise inclusion probabilities, sorted space.

    ``kind`` is ``"conditional"`` (given a split, ``n_prime`` set) or
    ``"unconditional"``.  The diagonal holds first-order probabilities.
    """

    values: np.ndarray
    kind: str
    n_prime: int | None = None

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class ExactDistribution:
    """Exact distribution over samples as frozenset -> probability.

    Keys are 0-based sorted-space unit indices; every key has exactly
    ``n`` elements and the probabilities sum to 1 up to rounding.
    """

    entries: dict[frozenset[int], float]
    size: int
    n: int

    def mass(self) -> float:
        return float(sum(self.entries.values()))


def conditional_joint(split: SplitOutcome) -> JointMatrix:
    """Pairwise inclusion probabilities given the phase-1 split.

    For working units ``k < l`` the probability factors into a product of
    pass-over terms up to ``k`` times selection terms at ``k`` and ``l``;
    pairs with one certain unit reduce to the split probability of the
    working one, and pairs of certain units are 1.
    """
    design = split.design
    N = design.size
    npr, n_big = split.n_prime, split.n_big
    pi0, cum0 = split.pi0, split.cum0
    M = np.zeros((N, N), dtype=np.float64)
    if npr >= 2:
        p = pi0[:n_big] / npr
        denom = npr - cum0[: n_big - 1]
        if np.any(denom <= 0.0):
            raise DivideByZeroError("working mass exhausted before the last unit")
        P = pi0[: n_big - 1] / denom
        passed = np.concatenate(([1.0], np.cumprod(1.0 - P)[:-1]))
        lead = npr * (npr - 1) * passed * P
        block = np.zeros((n_big, n_big))
        block[: n_big - 1, :] = np.outer(lead, p)
        block = np.triu(block, k=1)
        block = block + block.T
        M[:n_big, :n_big] = block
    M[:n_big, n_big:] = pi0[:n_big, None]
    M[n_big:, :n_big] = pi0[None, :n_big]
    M[n_big:, n_big:] = 1.0
    np.fill_diagonal(M, pi0)
    return JointMatrix(values=M, kind="conditional", n_prime=npr)


def unconditional_joint(design: DesignSpec) -> JointMatrix:
    """Pairwise inclusion probabilities under the full two-phase design.

    Mixes the conditional matrices over the working-size distribution in
    ascending size order, then pins the diagonal to the target
    probabilities (the mixture identity gives them up to rounding).
    """
    delta = phase1_deltas(design)
    N = design.size
    M = np.zeros((N, N), dtype=np.float64)
    for i, d in enumerate(delta, start=1):
        if d == 0.0:
            continue
        M += d * conditional_joint(split_probabilities(design, i)).values
    np.fill_diagonal(M, design.pi)
    return JointMatrix(values=M, kind="unconditional", n_prime=None)


def _enum_guard(N: int, max_units: int | None) -> None:
    cap = DEFAULT_ENUM_CAP if max_units is None else int(max_units)
    if N > cap:
        raise TooLargeError(f"enumeration over {N} units exceeds the cap of {cap}")


def enumerate_phase2(
    split: SplitOutcome, variant: str = "sequential", max_units: int | None = None
) -> ExactDistribution:
    """Exact sample distribution of one phase-2 variant given a split.

    Walks every branch the algorithm can take, multiplying branch
    probabilities; zero-probability branches are pruned, so each sample
    accumulates the exact mass the variant assigns it.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    design = split.design
    N, n = design.size, design.n
    _enum_guard(N, max_units)
    npr, n_big = split.n_prime, split.n_big
    certain = tuple(range(n_big, N))
    out: dict[frozenset[int], float] = {}

    def record(chosen: tuple[int, ...], prob: float) -> None:
        if prob <= 0.0:
            return
        key = frozenset(chosen + certain)
        out[key] = out.get(key, 0.0) + prob

    if variant == "draw_by_draw":

        def rec_draw(j: int, prev: int, chosen: tuple[int, ...], prob: float) -> None:
            if j > npr:
                record(chosen, prob)
                return
            lo, hi = prev + 1, N - n + j
            w = _draw_weights(split, j, lo, hi)
            total = w.sum()
            if total <= 0.0:
                return
            for off, wk in enumerate(w):
                if wk <= 0.0:
                    continue
                k = lo + off
                rec_draw(j + 1, k, chosen + (k - 1,), prob * wk / total)

        rec_draw(1, 0, (), 1.0)
    else:
        pi0, cum0 = split.pi0, split.cum0

        def rec_seq(t: int, count: int, chosen: tuple[int, ...], prob: float) -> None:
            if t == n_big:
                final = npr - count
                if final == 1:
                    record(chosen + (n_big - 1,), prob)
                elif final == 0:
                    record(chosen, prob)
                return
            slots = npr - count
            left = n_big - t + 1
            if slots == 0:
                p = 0.0
            elif slots == left:
                p = 1.0
            else:
                seen = cum0[t - 2] if t >= 2 else 0.0
                p = slots * pi0[t - 1] / (npr - seen)
                p = min(max(p, 0.0), 1.0)
            if p > 0.0:
                rec_seq(t + 1, count + 1, chosen + (t - 1,), prob * p)
            if p < 1.0:
                rec_seq(t + 1, count, chosen, prob * (1.0 - p))

        rec_seq(1, 0, (), 1.0)
    return ExactDistribution(entries=out, size=N, n=n)


def enumerate_distribution(
    design: DesignSpec, variant: str = "sequential", max_units: int | None = None
) -> ExactDistribution:
    """Exact distribution over samples under the full two-phase design."""
    _enum_guard(design.size, max_units)
    delta = phase1_deltas(design)
    out: dict[frozenset[int], float] = {}
    for i, d in enumerate(delta, start=1):
        if d == 0.0:
            continue
        cond = enumerate_phase2(
            split_probabilities(design, i), variant, max_units=max_units
        )
        for key, prob in cond.entries.items():
            out[key] = out.get(key, 0.0) + d * prob
    return ExactDistribution(entries=out, size=design.size, n=design.n)


def moments_from_distribution(
    dist: ExactDistribution, kind: str = "unconditional", n_prime: int | None = None
) -> JointMatrix:
    """First and second moments of the inclusion indicators.

    Off-diagonal entries are pairwise inclusion probabilities, the
    diagonal first-order ones.
    """
    N = dist.size
    M = np.zeros((N, N), dtype=np.float64)
    for key, prob in dist.entries.items():
        idx = np.fromiter(key, count=len(key), dtype=np.int64)
        M[np.ix_(idx, idx)] += prob
    return JointMatrix(values=M, kind=kind, n_prime=n_prime)


def total_variation(a: ExactDistribution, b: ExactDistribution) -> float:
    """Total-variation distance between two exact sample distributions."""
    keys = set(a.entries) | set(b.entries)
    acc = 0.0
    for key in keys:
        acc += abs(a.entries.get(key, 0.0) - b.entries.get(key, 0.0))
    return 0.5 * acc
