"""Replicated sampling studies over a grid of sample sizes.

The harness draws ``replicates`` independent samples per grid point and
reports the Monte Carlo variance of each requested estimator, plus the
variance ratio against the previous grid point.  Replicate ``b`` at
sample size ``n`` always uses the stream keyed
``(master_seed, mix64(n, b))``, and the vectorized engine reproduces the
serial sampler exactly: replicates are grouped by the drawn working
size, every group shares the split vectors computed by
``split_probabilities``, and acceptance probabilities are evaluated with
the same float expressions the serial scan uses.  One uniform is
consumed per scan position whatever the outcome, so stream positions
never depend on the path taken.

``empirical_inclusion_check`` compares realized inclusion frequencies
against the targets, switching to exact enumeration when the design is
small enough.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .design import (
    VARIANTS,
    DesignSpec,
    categorical_indices,
    hv_sample,
    phase1_deltas,
    split_probabilities,
)
from .errors import (
    InfeasibleGridError,
    ProbabilityOverflowError,
    TooFewReplicatesError,
)
from .estimation import cht_total, ht_total
from .joint import DEFAULT_ENUM_CAP, enumerate_distribution, moments_from_distribution
from .populations import MODEL_NAMES, Population, PopulationConfig, generate_population, pps_probabilities
from .rng import RngStream, mix64, philox_generator

__all__ = [
    "Scenario",
    "McCell",
    "McReport",
    "run_scenario",
    "empirical_inclusion_check",
]

ESTIMATORS = ("HT", "CHT")

# sizing for the vectorized engine; bounds keep chunk temporaries ~100MB
_ROW_BUDGET_BYTES = 1.6e8
_MIN_CHUNK = 64
_MAX_CHUNK = 8192
_OVERFLOW_TOL = 1e-12


@dataclass(frozen=True)
class Scenario:
    """One study: a size grid over a fixed or regenerated population.

    Exactly one of ``population`` and ``recipe`` must be set.  With a
    recipe, each grid point regenerates the population at size
    ``round(n / fraction)`` from the same seed, holding the sampling
    fraction constant across the grid.
    """

    grid: tuple[int, ...]
    replicates: int
    master_seed: int
    variant: str = "sequential"
    estimators: tuple[str, ...] = ESTIMATORS
    variables: tuple[str, ...] = MODEL_NAMES
    population: Population | None = None
    recipe: PopulationConfig | None = None
    fraction: float | None = None
    track_inclusion: bool = False

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(int(n) for n in self.grid))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "variables", tuple(self.variables))
        if (self.population is None) == (self.recipe is None):
            raise InfeasibleGridError("set exactly one of population and recipe")
        if self.recipe is not None and not (
            self.fraction is not None and 0.0 < self.fraction < 1.0
        ):
            raise InfeasibleGridError("recipe mode needs a fraction in (0, 1)")
        if len(self.grid) == 0 or any(n < 1 for n in self.grid):
            raise InfeasibleGridError("grid must hold positive sample sizes")
        if any(b >= a for a, b in zip(self.grid[1:], self.grid)):
            raise InfeasibleGridError("grid must be strictly ascending")
        if self.replicates < 2:
            raise TooFewReplicatesError(
                f"need at least 2 replicates, got {self.replicates}"
            )
        if self.variant not in VARIANTS:
            raise InfeasibleGridError(f"unknown variant {self.variant!r}")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise InfeasibleGridError(f"unknown estimators {bad}")


@dataclass(frozen=True)
class McCell:
    """Variance summary of one (n, variable, estimator) combination.

    ``mean_estimate`` and ``v_mc`` are on the mean scale (estimated total
    divided by population size); ``true_total`` stays on the total scale.
    """

    n: int
    variable: str
    estimator: str
    mean_estimate: float
    true_total: float
    v_mc: float
    rv_mc: float | None


@dataclass(frozen=True)
class McReport:
    """All cells of a scenario plus optional inclusion frequencies."""

    cells: tuple[McCell, ...]
    population_sizes: dict[int, int]
    inclusion: dict[int, np.ndarray] | None = None

    def cell(self, n: int, variable: str, estimator: str) -> McCell:
        for c in self.cells:
            if c.n == n and c.variable == variable and c.estimator == estimator:
                return c
        raise KeyError((n, variable, estimator))


def _materialize(scenario: Scenario, n: int):
    if scenario.population is not None:
        pop = scenario.population
    else:
        N = int(round(n / scenario.fraction))
        if N <= n:
            raise InfeasibleGridError(f"fraction {scenario.fraction} at n={n}")
        pop = generate_population(dataclasses.replace(scenario.recipe, size=N))
    if n >= pop.size:
        raise InfeasibleGridError(f"sample size {n} of population {pop.size}")
    missing = [v for v in scenario.variables if v not in pop.y]
    if missing:
        raise InfeasibleGridError(f"population lacks variables {missing}")
    design = pps_probabilities(pop.x, n)
    ys = {name: pop.y[name] for name in scenario.variables}
    return design, ys


def _chunk_rows(N: int) -> int:
    r = int(_ROW_BUDGET_BYTES / (8 * max(N, 1)))
    return max(_MIN_CHUNK, min(_MAX_CHUNK, r))


def _replicate_values_sequential(
    design: DesignSpec,
    ys: dict[str, np.ndarray],
    replicates: int,
    master_seed: int,
    n_key: int,
    estimators: tuple[str, ...],
    want_counts: bool,
):
    """Per-replicate estimator values via the grouped vectorized scan."""
    N, n = design.size, design.n
    pref = float(design.cum[N - n - 1])
    base = float(design.pi[N - n])
    cdelta = np.cumsum(phase1_deltas(design))
    eff = np.minimum(design.pi, base)

    names = list(ys)
    y_sorted = {v: ys[v][design.perm] for v in names}
    ht_w = {v: y_sorted[v] / design.pi for v in names}
    # split weights differ from these by the scalar D/n_prime only
    wt = {v: y_sorted[v] / eff for v in names}
    suff_wt = {v: np.concatenate((np.cumsum(wt[v][::-1])[::-1], [0.0])) for v in names}
    suff_y = {v: np.concatenate((np.cumsum(y_sorted[v][::-1])[::-1], [0.0])) for v in names}

    values = {
        (v, est): np.empty(replicates) for v in names for est in estimators
    }
    counts = np.zeros(N, dtype=np.int64) if want_counts else None

    rows = _chunk_rows(N)
    for start in range(0, replicates, rows):
        stop = min(start + rows, replicates)
        gens = [
            philox_generator(master_seed, mix64(n_key, b)) for b in range(start, stop)
        ]
        u0 = np.array([g.random() for g in gens])
        nprimes = np.asarray(categorical_indices(cdelta, u0)) + 1
        uniq = np.unique(nprimes)
        splits = [split_probabilities(design, int(v)) for v in uniq]
        gidx = np.searchsorted(uniq, nprimes)
        ind = _scan_rows(design, splits, gidx, gens)
        if want_counts:
            counts += ind.sum(axis=0, dtype=np.int64)
        if names:
            find = ind.astype(np.float64)
            npf = nprimes.astype(np.float64)
            D = pref + npf * base
            nb = np.array([s.n_big for s in splits], dtype=np.int64)[gidx]
            for v in names:
                if "HT" in estimators:
                    values[v, "HT"][start:stop] = find @ ht_w[v]
                if "CHT" in estimators:
                    m1 = find @ wt[v]
                    values[v, "CHT"][start:stop] = (D / npf) * (
                        m1 - suff_wt[v][nb]
                    ) + suff_y[v][nb]
    return values, counts


def _scan_rows(design, splits, gidx, gens) -> np.ndarray:
    """Indicator rows for replicates with mixed working sizes.

    One pass over unit positions; a row stops participating once its
    working window ends.  Float expressions match the serial scan
    exactly, so each row equals what ``phase2_sequential`` would produce
    from the same stream.
    """
    N = design.size
    R = len(gens)
    pi0s = np.stack([s.pi0 for s in splits])
    cum0s = np.stack([s.cum0 for s in splits])
    vals = np.array([s.n_prime for s in splits], dtype=np.int64)[gidx]
    nb = np.array([s.n_big for s in splits], dtype=np.int64)[gidx]
    steps = nb - 1
    T = int(steps.max())
    U = np.empty((R, T))
    for r, g in enumerate(gens):
        U[r, : steps[r]] = g.random(int(steps[r]))
    ind = np.zeros((R, N), dtype=np.int8)
    count = np.zeros(R, dtype=np.int64)
    for t in range(1, T + 1):
        active = t <= steps
        slots = vals - count
        left = nb - t + 1
        seen = cum0s[gidx, t - 2] if t >= 2 else np.zeros(R)
        denom = np.where(active, vals - seen, 1.0)
        p = slots * pi0s[gidx, t - 1] / denom
        free = active & (slots != 0) & (slots != left)
        if np.any(p[free] > 1.0 + _OVERFLOW_TOL):
            raise ProbabilityOverflowError(
                f"acceptance probability above 1 at position {t}"
            )
        np.clip(p, 0.0, 1.0, out=p)
        p[slots == left] = 1.0
        p[slots == 0] = 0.0
        take = active & (U[:, t - 1] < p)
        ind[take, t - 1] = 1
        count += take
    final = vals - count
    if np.any((final != 0) & (final != 1)):
        raise ProbabilityOverflowError("slot count left for the last working unit")
    ind[np.arange(R), nb - 1] = final
    ind[np.arange(N)[None, :] >= nb[:, None]] = 1
    return ind


def _replicate_values_serial(
    design: DesignSpec,
    ys: dict[str, np.ndarray],
    replicates: int,
    master_seed: int,
    n_key: int,
    estimators: tuple[str, ...],
    want_counts: bool,
    variant: str,
):
    names = list(ys)
    values = {(v, est): np.empty(replicates) for v in names for est in estimators}
    counts = np.zeros(design.size, dtype=np.int64) if want_counts else None
    for b in range(replicates):
        sel = hv_sample(design, RngStream(master_seed, mix64(n_key, b)), variant)
        if want_counts:
            counts += sel.indicators
        for v in names:
            if "HT" in estimators:
                values[v, "HT"][b] = ht_total(sel, ys[v]).total
            if "CHT" in estimators:
                values[v, "CHT"][b] = cht_total(sel, ys[v]).total
    return values, counts


def _replicate_values(design, ys, replicates, master_seed, n_key, estimators, want_counts, variant):
    if variant == "sequential":
        return _replicate_values_sequential(
            design, ys, replicates, master_seed, n_key, estimators, want_counts
        )
    return _replicate_values_serial(
        design, ys, replicates, master_seed, n_key, estimators, want_counts, variant
    )


def run_scenario(scenario: Scenario) -> McReport:
    """Run every grid point and collect variance cells in grid order.

    Replicate totals are rescaled to mean estimates (total over population
    size) before aggregation, so ``v_mc`` is the population variance of the
    replicate mean estimates; ``rv_mc`` divides it by the same cell at the
    previous grid point and is ``None`` at the first point or when the
    previous variance is 0.
    """
    cells: list[McCell] = []
    sizes: dict[int, int] = {}
    inclusion: dict[int, np.ndarray] = {}
    prev: dict[tuple[str, str], float] = {}
    for n in scenario.grid:
        design, ys = _materialize(scenario, n)
        sizes[n] = design.size
        values, counts = _replicate_values(
            design,
            ys,
            scenario.replicates,
            scenario.master_seed,
            n,
            scenario.estimators,
            scenario.track_inclusion,
            scenario.variant,
        )
        if scenario.track_inclusion:
            freq = np.empty(design.size)
            freq[design.perm] = counts / scenario.replicates
            inclusion[n] = freq
        for v in scenario.variables:
            true_total = float(np.sum(ys[v]))
            for est in scenario.estimators:
                arr = values[v, est] / design.size
                m = float(arr.mean())
                v_mc = float(np.mean((arr - m) ** 2))
                last = prev.get((v, est))
                rv = None if last is None or last <= 0.0 else v_mc / last
                cells.append(
                    McCell(
                        n=n,
                        variable=v,
                        estimator=est,
                        mean_estimate=m,
                        true_total=true_total,
                        v_mc=v_mc,
                        rv_mc=rv,
                    )
                )
                prev[(v, est)] = v_mc
    return McReport(
        cells=tuple(cells),
        population_sizes=sizes,
        inclusion=inclusion if scenario.track_inclusion else None,
    )


def empirical_inclusion_check(
    target,
    replicates: int = 0,
    master_seed: int = 0,
    *,
    variant: str = "sequential",
    method: str = "auto",
):
    """Compare realized inclusion frequencies against the targets.

    ``target`` is a design, or a scenario (then every grid point is
    checked and a dict keyed by ``n`` comes back).  Rows are
    ``(unit, pi, freq, z_score, flagged)`` in the caller's unit order;
    ``flagged`` marks ``|z| > 4``.  ``method`` is ``"simulate"``,
    ``"enumerate"``, or ``"auto"`` (enumerate when the design is small
    enough); the exact path reports a zero z-score.
    """
    if isinstance(target, Scenario):
        out = {}
        for n in target.grid:
            design, _ = _materialize(target, n)
            out[n] = empirical_inclusion_check(
                design,
                replicates or target.replicates,
                master_seed or target.master_seed,
                variant=target.variant,
                method=method,
            )
        return out

    design: DesignSpec = target
    N = design.size
    if method == "auto":
        method = "enumerate" if N <= 8 else "simulate"
    pi_caller = np.empty(N)
    pi_caller[design.perm] = design.pi
    if method == "enumerate":
        marg = np.diag(
            moments_from_distribution(
                enumerate_distribution(design, variant, max_units=DEFAULT_ENUM_CAP)
            ).values
        )
        freq = np.empty(N)
        freq[design.perm] = marg
        z = np.zeros(N)
    else:
        floor = float(np.min(design.pi * (1.0 - design.pi))) * replicates
        if floor < 25.0:
            raise TooFewReplicatesError(
                f"min pi(1-pi)*B is {floor:.1f}, need at least 25"
            )
        _, counts = _replicate_values(
            design, {}, replicates, master_seed, design.n, (), True, variant
        )
        freq = np.empty(N)
        freq[design.perm] = counts / replicates
        z = (freq - pi_caller) / np.sqrt(pi_caller * (1.0 - pi_caller) / replicates)
    return [
        (k + 1, float(pi_caller[k]), float(freq[k]), float(z[k]), bool(abs(z[k]) > 4.0))
        for k in range(N)
    ]
