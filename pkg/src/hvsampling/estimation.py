"""Design-based estimators of a population total.

Two weighting schemes coexist for the two-phase design: the plain
inverse-probability estimator weights by the target probabilities ``pi``,
while the conditional one weights by the realized split probabilities
``pi0`` and is unbiased given the phase-1 outcome.  The conditional
variance of the latter has an unbiased estimator of the
squared-difference form built from the conditional joint probabilities.

``xi0`` and ``ht_variance_lower_bound`` expose the inter-split
variability of the plain estimator: its variance decomposes into the
variance of ``xi0`` across working sizes plus the mean conditional
variance, and the last term of the decomposition yields a closed-form
lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .design import DesignSpec, SampleSelection, SplitOutcome, check_lengths, phase1_deltas
from .errors import DimensionMismatchError, ZeroJointError
from .joint import JointMatrix, conditional_joint

__all__ = [
    "EstimateResult",
    "ht_total",
    "cht_total",
    "syg_variance",
    "xi0",
    "ht_variance_lower_bound",
    "expected_inverse_nprime",
]


@dataclass(frozen=True)
class EstimateResult:
    """Point estimate of a total with the matching mean per unit."""

    estimator_kind: str
    total: float
    mean: float
    variance_estimate: float | None = None


def ht_total(selection: SampleSelection, y, design: DesignSpec | None = None) -> EstimateResult:
    """Inverse-probability estimate weighted by the target ``pi``.

    ``y`` is in the caller's unit order; ``design`` defaults to the one
    the selection was drawn from and must match it when given.
    """
    design = _resolve_design(selection, design)
    yv = check_lengths(design, y)
    k = selection.units_sorted
    total = float(np.sum(yv[design.perm[k]] / design.pi[k]))
    return EstimateResult(estimator_kind="HT", total=total, mean=total / design.size)


def cht_total(
    selection: SampleSelection,
    y,
    design: DesignSpec | None = None,
    with_variance: bool = False,
) -> EstimateResult:
    """Estimate weighted by the realized split probabilities ``pi0``.

    Unbiased conditionally on the phase-1 outcome; units past the
    working window carry weight 1.  With ``with_variance`` the
    squared-difference variance estimator is attached.
    """
    design = _resolve_design(selection, design)
    yv = check_lengths(design, y)
    k = selection.units_sorted
    total = float(np.sum(yv[design.perm[k]] / selection.split.pi0[k]))
    var = syg_variance(selection, yv) if with_variance else None
    return EstimateResult(
        estimator_kind="CHT", total=total, mean=total / design.size, variance_estimate=var
    )


def syg_variance(
    selection: SampleSelection, y, joint: JointMatrix | None = None
) -> float:
    """Unbiased estimator of the conditional variance of ``cht_total``.

    Sums ``-(pi_kl0 - pi_k0 pi_l0)/pi_kl0`` times the squared difference
    of expanded values over sampled working-unit pairs.  Nonnegative
    whenever the pairwise probabilities do not exceed the product of the
    marginals, which this design guarantees.
    """
    split = selection.split
    design = split.design
    yv = check_lengths(design, y)
    if joint is None:
        joint = conditional_joint(split)
    elif joint.kind != "conditional" or joint.n_prime != split.n_prime:
        raise ZeroJointError(
            "joint matrix is not conditional on the selection's split"
        )
    w = selection.units_sorted[selection.units_sorted < split.n_big]
    if w.size <= 1:
        return 0.0
    sub = joint.values[np.ix_(w, w)]
    off = ~np.eye(w.size, dtype=bool)
    if np.any(sub[off] <= 0.0):
        raise ZeroJointError("a sampled pair has zero joint probability")
    pk = split.pi0[w]
    e = yv[design.perm[w]] / pk
    coef = (sub - np.outer(pk, pk)) / sub
    sq = (e[:, None] - e[None, :]) ** 2
    v = -0.5 * float(np.sum(coef[off] * sq[off]))
    return 0.0 if v < 0.0 else v


def xi0(split: SplitOutcome, y, design: DesignSpec | None = None) -> float:
    """Deterministic split-level summary driving phase-1 variability.

    Equals the expansion-weighted covariance between the variable and the
    shift from target to split probabilities; its mean over working sizes
    is zero and its variance is the phase-1 share of the plain
    estimator's variance.
    """
    if design is None:
        design = split.design
    yv = check_lengths(design, y)
    ys = yv[design.perm]
    return float(np.sum(ys / design.pi * (split.pi0 - design.pi)))


def ht_variance_lower_bound(design: DesignSpec, y) -> float:
    """Closed-form lower bound on the plain estimator's variance.

    Uses only the top working size: the bound is that size's weight times
    the squared split-level summary, every other term in the
    decomposition being nonnegative.
    """
    yv = check_lengths(design, y)
    ys = yv[design.perm]
    N, n = design.size, design.n
    pref = float(design.cum[N - n - 1])
    base = float(design.pi[N - n])
    Dn = pref + n * base
    bottom = float(np.sum(ys[: N - n]))
    top = ys[N - n :]
    top_pi = design.pi[N - n :]
    shift = (n / Dn - 1.0) * bottom + float(
        np.sum(top * (n * base / (top_pi * Dn) - 1.0))
    )
    delta = phase1_deltas(design)
    return float(delta[-1]) * shift * shift


def expected_inverse_nprime(design: DesignSpec) -> float:
    """Mean of the reciprocal working size, in closed form.

    Equals the gap-weighted harmonic sum plus a correction from the
    lowest working probability; also equals the reciprocal-weighted sum
    of the size distribution, which tests verify.
    """
    N, n = design.size, design.n
    pref = float(design.cum[N - n - 1])
    base = float(design.pi[N - n])
    ext = np.append(design.pi, 1.0)
    gaps = np.diff(ext[N - n :])
    i = np.arange(1, n + 1, dtype=np.float64)
    return float(np.sum(gaps / i)) + base * (1.0 - base) / pref


def _resolve_design(selection: SampleSelection, design: DesignSpec | None) -> DesignSpec:
    own = selection.split.design
    if design is None:
        return own
    if design.size != own.size or design.n != own.n:
        raise DimensionMismatchError("design does not match the selection")
    return design
