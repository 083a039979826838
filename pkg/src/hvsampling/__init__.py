"""Fixed-size unequal-probability sampling toolkit.

Core pieces: the two-phase selection design (`design`), exact joint
inclusion probabilities and an enumeration oracle (`joint`), total
estimators with variance machinery (`estimation`), design diagnostics
(`diagnostics`), synthetic populations (`populations`), and a replicated
study harness (`montecarlo`).  A CLI and a FastAPI service wrap the same
operations.
"""

__version__ = "0.1.0"

from .design import (
    DesignSpec,
    SampleSelection,
    SplitOutcome,
    hv_sample,
    phase1_deltas,
    phase1_split,
    phase2_draw_by_draw,
    phase2_sequential,
    split_probabilities,
    validate_design,
)
from .diagnostics import DesignProfile, indicator_curve, profile_design
from .errors import HvError
from .estimation import (
    EstimateResult,
    cht_total,
    expected_inverse_nprime,
    ht_total,
    ht_variance_lower_bound,
    syg_variance,
    xi0,
)
from .joint import (
    ExactDistribution,
    JointMatrix,
    conditional_joint,
    enumerate_distribution,
    enumerate_phase2,
    moments_from_distribution,
    total_variation,
    unconditional_joint,
)
from .montecarlo import (
    McCell,
    McReport,
    Scenario,
    empirical_inclusion_check,
    run_scenario,
)
from .populations import (
    MODEL_NAMES,
    Population,
    PopulationConfig,
    generate_population,
    pps_probabilities,
)
from .rng import RngStream, mix64

__all__ = [
    "__version__",
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
    "JointMatrix",
    "ExactDistribution",
    "conditional_joint",
    "unconditional_joint",
    "enumerate_phase2",
    "enumerate_distribution",
    "moments_from_distribution",
    "total_variation",
    "EstimateResult",
    "ht_total",
    "cht_total",
    "syg_variance",
    "xi0",
    "ht_variance_lower_bound",
    "expected_inverse_nprime",
    "DesignProfile",
    "profile_design",
    "indicator_curve",
    "Population",
    "PopulationConfig",
    "MODEL_NAMES",
    "generate_population",
    "pps_probabilities",
    "Scenario",
    "McCell",
    "McReport",
    "run_scenario",
    "empirical_inclusion_check",
    "RngStream",
    "mix64",
    "HvError",
]
