"""Operations behind the HTTP endpoints.

The CLI calls these same functions in process, so file handling aside,
both front ends exercise one code path.  Functions take and return core
types; the FastAPI layer adapts them to the wire models.
"""

from __future__ import annotations

import numpy as np

from ..design import (
    DesignSpec,
    SampleSelection,
    hv_sample,
    split_probabilities,
    validate_design,
)
from ..diagnostics import DesignProfile, indicator_curve, profile_design
from ..errors import OutOfRangeError
from ..estimation import EstimateResult, cht_total, ht_total
from ..joint import (
    JointMatrix,
    conditional_joint,
    enumerate_distribution,
    moments_from_distribution,
    total_variation,
    unconditional_joint,
)
from ..montecarlo import McReport, Scenario, empirical_inclusion_check, run_scenario
from ..populations import (
    Population,
    PopulationConfig,
    generate_population,
    pps_probabilities,
)
from ..rng import RngStream
from ..tables import selection_from_table

__all__ = [
    "design_from_input",
    "sample_op",
    "joint_op",
    "first_order_op",
    "enumerate_op",
    "estimate_op",
    "profile_op",
    "curve_op",
    "generate_op",
    "simulate_op",
    "inclusion_op",
]


def design_from_input(pi=None, x=None, n=None) -> DesignSpec:
    if pi is not None:
        return validate_design(pi)
    return pps_probabilities(x, n)


def sample_op(
    design: DesignSpec, seed: int, stream_id: int = 0, variant: str = "sequential"
) -> SampleSelection:
    return hv_sample(design, RngStream(seed, stream_id), variant)


def joint_op(design: DesignSpec, kind: str, n_prime: int | None) -> JointMatrix:
    if kind == "unconditional":
        return unconditional_joint(design)
    if kind == "conditional":
        if n_prime is None:
            raise OutOfRangeError("conditional joint needs n_prime")
        return conditional_joint(split_probabilities(design, n_prime))
    raise OutOfRangeError(f"kind must be conditional or unconditional, got {kind!r}")


def first_order_op(design: DesignSpec) -> np.ndarray:
    pi = np.empty(design.size)
    pi[design.perm] = design.pi
    return pi


def enumerate_op(design: DesignSpec, max_units: int | None = None):
    """Enumerate both variants; report their distance and marginal errors."""
    seq = enumerate_distribution(design, "sequential", max_units=max_units)
    draw = enumerate_distribution(design, "draw_by_draw", max_units=max_units)
    err = {}
    for label, dist in (("sequential", seq), ("draw_by_draw", draw)):
        marg = np.diag(moments_from_distribution(dist).values)
        err[label] = float(np.max(np.abs(marg - design.pi)))
    report = {
        "size": design.size,
        "n": design.n,
        "sample_count": len(seq.entries),
        "tv_distance": total_variation(seq, draw),
        "mass_sequential": seq.mass(),
        "mass_draw_by_draw": draw.mass(),
        "max_marginal_error_sequential": err["sequential"],
        "max_marginal_error_draw_by_draw": err["draw_by_draw"],
    }
    return seq, draw, report


def estimate_op(
    pi, pi0, in_sample, y, estimator: str = "cht", with_variance: bool = False
) -> tuple[EstimateResult, SampleSelection]:
    selection = selection_from_table(pi, pi0, in_sample)
    est = estimator.lower()
    if est == "ht":
        return ht_total(selection, y), selection
    if est == "cht":
        return cht_total(selection, y, with_variance=with_variance), selection
    raise OutOfRangeError(f"estimator must be ht or cht, got {estimator!r}")


def profile_op(design: DesignSpec) -> DesignProfile:
    return profile_design(design)


def curve_op(recipe: str, fraction: float, grid, seed: int) -> list[DesignProfile]:
    """Profile the designs a recipe induces along a sample-size grid."""
    designs = []
    for n in grid:
        N = int(round(n / fraction))
        config = PopulationConfig(size_distribution=recipe, size=N, seed=seed)
        pop = generate_population(config)
        designs.append(pps_probabilities(pop.x, n))
    return indicator_curve(designs)


def generate_op(config: PopulationConfig) -> Population:
    return generate_population(config)


def simulate_op(scenario: Scenario) -> McReport:
    return run_scenario(scenario)


def inclusion_op(
    design: DesignSpec,
    replicates: int,
    seed: int,
    variant: str = "sequential",
    method: str = "auto",
):
    return empirical_inclusion_check(
        design, replicates, seed, variant=variant, method=method
    )


def scenario_from_recipe(
    grid,
    replicates: int,
    seed: int,
    recipe: str,
    fraction: float,
    population_seed: int,
    variant: str,
    estimators,
    variables,
) -> Scenario:
    size0 = max(int(round(grid[0] / fraction)), 2)
    config = PopulationConfig(
        size_distribution=recipe, size=size0, seed=population_seed
    )
    return Scenario(
        grid=tuple(grid),
        replicates=replicates,
        master_seed=seed,
        variant=variant,
        estimators=tuple(estimators),
        variables=tuple(variables),
        recipe=config,
        fraction=fraction,
    )
