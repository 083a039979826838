"""Synthetic populations for design studies.

A population is a positive size variable ``x`` plus four study variables
with different mean shapes in ``x``: linear, quadratic, exponential, and
a quadratic with a bump near the center.  Coefficients are calibrated on
the realized ``x`` draw so that every variable hits the target mean and
standard deviation and the systematic part contributes a fixed share of
the spread; the calibrated values are recorded so a population can be
regenerated or audited from its manifest.

Draws are inverse-CDF transforms of counter-based uniform streams, so a
``(recipe, size, seed)`` triple pins the population exactly on any
platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .design import DesignSpec, validate_design
from .errors import NonProbabilityError, OutOfRangeError, SaturatedError
from .rng import RngStream, mix64

__all__ = [
    "RECIPES",
    "MODEL_NAMES",
    "PopulationConfig",
    "Population",
    "generate_population",
    "pps_probabilities",
]

RECIPES = ("gamma", "lognormal")
MODEL_NAMES = ("linear", "quadratic", "exponential", "bump")

_TINY = 1e-15


@dataclass(frozen=True)
class PopulationConfig:
    """Recipe, size, seed, and moment targets for one synthetic population."""

    size_distribution: str
    size: int
    seed: int
    target_y_mean: float = 20.0
    target_y_sd: float = 3.0
    signal_sd: float = 2.6

    def __post_init__(self):
        if self.size_distribution not in RECIPES:
            raise OutOfRangeError(
                f"recipe must be one of {RECIPES}, got {self.size_distribution!r}"
            )
        if self.size < 10:
            raise OutOfRangeError(f"population size {self.size} is too small")
        if not (0.0 < self.signal_sd < self.target_y_sd):
            raise OutOfRangeError("signal spread must sit strictly below the total")
        if self.target_y_mean <= 0.0:
            raise OutOfRangeError("target mean must be positive")


@dataclass(frozen=True)
class Population:
    """Realized population: sizes, study variables, calibrated coefficients."""

    x: np.ndarray
    y: dict[str, np.ndarray]
    mu_x: float
    config: PopulationConfig | None = None
    coefficients: dict[str, dict[str, float]] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.x.shape[0]

    def y_columns(self):
        """Study variables in canonical order, for writers."""
        return [(name, self.y[name]) for name in MODEL_NAMES]


def _open_uniforms(stream: RngStream, size: int) -> np.ndarray:
    # keep quantile transforms off the +-inf endpoints
    u = stream.uniforms(size)
    return np.clip(u, _TINY, 1.0 - _TINY)


def _draw_x(config: PopulationConfig) -> np.ndarray:
    u = _open_uniforms(RngStream(config.seed, mix64("x")), config.size)
    if config.size_distribution == "gamma":
        return stats.gamma.ppf(u, a=4.0, scale=0.5) + 8.0
    return np.exp(1.0 + 0.35 * stats.norm.ppf(u)) + 7.0


def _calibrate_exponential(z: np.ndarray, cv_target: float) -> float:
    """Slope for which exp(slope * z) has the target coefficient of variation."""

    def cv(a: float) -> float:
        w = np.exp(a * z)
        return float(w.std() / w.mean())

    lo, hi = 1e-8, 5.0
    if cv(hi) < cv_target:
        raise OutOfRangeError("exponential calibration target out of reach")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cv(mid) < cv_target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


def _calibrate(z: np.ndarray, config: PopulationConfig) -> dict[str, dict[str, float]]:
    s = config.signal_sd
    mean = config.target_y_mean
    sigma = float(np.sqrt(config.target_y_sd**2 - s**2))
    q = z**2
    g = np.exp(-(z**2))
    out: dict[str, dict[str, float]] = {}

    a1 = s / float(z.std())
    out["linear"] = {"a0": mean, "a1": a1, "sigma": sigma}

    b1 = s / float(q.std())
    out["quadratic"] = {"a0": mean - b1 * float(q.mean()), "a1": b1, "sigma": sigma}

    c1 = _calibrate_exponential(z, s / mean)
    w = np.exp(c1 * z)
    c0 = float(np.log(mean / w.mean()))
    out["exponential"] = {"a0": c0, "a1": c1, "sigma": sigma}

    # var(a1*q - a2*g) = s^2, positive root; a2 and the bump width are fixed
    a2, a3 = 3.0, 1.0
    A = float(q.var())
    B = -2.0 * a2 * float(np.mean((q - q.mean()) * (g - g.mean())))
    C = a2**2 * float(g.var()) - s**2
    disc = B * B - 4.0 * A * C
    if disc < 0.0:
        raise OutOfRangeError("bump calibration has no real solution")
    d1 = (-B + np.sqrt(disc)) / (2.0 * A)
    d0 = mean - (d1 * float(q.mean()) - a2 * float(g.mean()))
    out["bump"] = {"a0": d0, "a1": d1, "a2": a2, "a3": a3, "sigma": sigma}
    return out


def _signal(name: str, z: np.ndarray, c: dict[str, float]) -> np.ndarray:
    if name == "linear":
        return c["a0"] + c["a1"] * z
    if name == "quadratic":
        return c["a0"] + c["a1"] * z**2
    if name == "exponential":
        return np.exp(c["a0"] + c["a1"] * z)
    return c["a0"] + c["a1"] * z**2 - c["a2"] * np.exp(-c["a3"] * z**2)


def generate_population(
    config: PopulationConfig,
    coefficients: dict[str, dict[str, float]] | None = None,
) -> Population:
    """Draw a population and its four study variables.

    Parameters
    ----------
    config : PopulationConfig
    coefficients : dict, optional
        Skip calibration and use these coefficient sets verbatim; keys
        must cover all four model names.  Noise streams are drawn the
        same way either way, so overriding coefficients changes only the
        deterministic part.
    """
    x = _draw_x(config)
    mu_x = float(x.mean())
    z = x - mu_x
    coef = _calibrate(z, config) if coefficients is None else coefficients
    y: dict[str, np.ndarray] = {}
    for name in MODEL_NAMES:
        c = coef[name]
        u = _open_uniforms(RngStream(config.seed, mix64(name)), config.size)
        eps = stats.norm.ppf(u)
        y[name] = _signal(name, z, c) + c["sigma"] * eps
    return Population(x=x, y=y, mu_x=mu_x, config=config, coefficients=coef)


def pps_probabilities(x, n: int) -> DesignSpec:
    """Size-proportional inclusion probabilities for a fixed sample size.

    Raises
    ------
    SaturatedError
        If any allocation ``n * x_k / sum(x)`` reaches 1.  No capping is
        applied; the caller must shrink ``n`` or trim the sizes.
    """
    xv = np.asarray(x, dtype=np.float64)
    if xv.ndim != 1 or xv.size == 0:
        raise NonProbabilityError("x must be a non-empty 1-d array")
    if not np.all(np.isfinite(xv)) or np.any(xv <= 0.0):
        k = int(np.flatnonzero(~np.isfinite(xv) | (xv <= 0.0))[0])
        raise NonProbabilityError(f"size variable at unit {k + 1} is not positive")
    n = int(n)
    pi = n * xv / float(xv.sum())
    sat = np.flatnonzero(pi >= 1.0)
    if sat.size:
        listed = ", ".join(str(int(k) + 1) for k in sat[:10])
        more = "" if sat.size <= 10 else f" and {sat.size - 10} more"
        raise SaturatedError(
            f"unit {listed}{more} saturates at probability >= 1", units=sat
        )
    return validate_design(pi)
