"""Shared test utilities: random valid designs and exact moments.

``random_design`` builds probability vectors that pass validation by
construction (integer sum, strict interior), retrying the rare draw
where normalization pushes an entry against 1.
"""

import numpy as np

from hvsampling.design import DesignSpec, SampleSelection, split_probabilities, validate_design


def random_design(rng, size=None, n=None) -> DesignSpec:
    """A valid design with the requested shape, uniform over a wide family.

    ``size`` defaults to 3..8 (enumeration range), ``n`` to 2..size-1.
    """
    if size is None:
        size = int(rng.integers(3, 9))
    if n is None:
        n = int(rng.integers(2, size)) if size > 3 else 2
    for _ in range(500):
        w = rng.gamma(2.0, 1.0, size=size) + 1e-3
        pi = n * w / w.sum()
        if pi.max() < 0.995 and pi.min() > 1e-4:
            return validate_design(pi)
    # gamma draws keep saturating; fall back to a near-flat feasible design
    pi = np.full(size, n / size)
    pi += rng.uniform(-0.5, 0.5) * 1e-3 * np.linspace(-1.0, 1.0, size)
    pi *= n / pi.sum()
    return validate_design(pi)


def selection_for(design, key, n_prime) -> SampleSelection:
    """Build the selection object for a known sample, bypassing the rng."""
    split = split_probabilities(design, n_prime)
    ind = np.zeros(design.size, dtype=np.int8)
    for k in key:
        ind[k] = 1
    units = np.flatnonzero(ind).astype(np.int64)
    return SampleSelection(
        split=split,
        units_sorted=units,
        units_original=design.perm[units],
        indicators=ind,
    )


def exact_variance(dist, values_by_unit) -> tuple[float, float]:
    """Mean and variance of a sample statistic under an exact distribution.

    ``values_by_unit`` maps a sorted-space unit index to its contribution;
    the statistic is the sum over the sample.
    """
    mean = 0.0
    second = 0.0
    for key, prob in dist.entries.items():
        stat = sum(values_by_unit[k] for k in key)
        mean += prob * stat
        second += prob * stat * stat
    return mean, second - mean * mean
