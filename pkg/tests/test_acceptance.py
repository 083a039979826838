"""Release gate: every numbered claim the package must hold, one test each.

A verbose run reads as the checklist.  Tolerances here are contractual;
loosening one to get a green run hides a real regression.  The two
simulation claims (08, 09) share one module-scoped campaign so the gate
stays under a couple of minutes.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from hvsampling.cli import argv_from_manifest, main
from hvsampling.design import phase1_deltas, split_probabilities, validate_design
from hvsampling.estimation import (
    expected_inverse_nprime,
    ht_variance_lower_bound,
    syg_variance,
    xi0,
)
from hvsampling.joint import (
    conditional_joint,
    enumerate_distribution,
    enumerate_phase2,
    moments_from_distribution,
    total_variation,
    unconditional_joint,
)
from hvsampling.montecarlo import Scenario, empirical_inclusion_check, run_scenario
from hvsampling.populations import (
    PopulationConfig,
    generate_population,
    pps_probabilities,
)
from hvsampling.api import service

from helpers import random_design, selection_for

N_GRID = (400, 800, 1200, 1600, 2000)
SCENARIO_SEED = 20260822
RECIPE_POP_SEED = 314
CURVE_POP_SEED = 2
ZCHECK_POP_SEED = 11
ZCHECK_MASTER_SEED = 7


@pytest.fixture(scope="module")
def battery():
    """54 random designs covering every (N, n) with N in 3..8, n in 1..N-1."""
    rng = np.random.default_rng(20260822)
    designs = []
    for N in range(3, 9):
        for n in range(1, N):
            for _ in range(2):
                designs.append(random_design(rng, size=N, n=n))
    return designs


def _wide_designs(seed):
    """1000 valid designs up to N = 5000, work bounded by n*N <= 2e5.

    Gamma weights give spread-out probabilities; the rare saturating
    draw falls back to weights in [1, 2), which cannot saturate at
    fractions below 0.45.
    """
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        r = rng.random()
        if r < 0.6:
            N = int(rng.integers(3, 51))
        elif r < 0.85:
            N = int(rng.integers(51, 501))
        else:
            N = int(rng.integers(501, 5001))
        f = rng.uniform(0.02, 0.45)
        n = max(1, min(N - 1, int(f * N), 200_000 // N))
        w = rng.gamma(2.0, 1.0, N) + 1e-3
        pi = n * w / w.sum()
        if pi.max() >= 0.995:
            w = 1.0 + rng.random(N)
            pi = n * w / w.sum()
        yield validate_design(pi)


@pytest.fixture(scope="module")
def recipe_reports():
    """B = 10^4 campaigns over both recipes, all variables, both estimators."""
    out = {}
    for recipe in ("gamma", "lognormal"):
        sc = Scenario(
            grid=N_GRID,
            replicates=10_000,
            master_seed=SCENARIO_SEED,
            recipe=PopulationConfig(recipe, size=2000, seed=RECIPE_POP_SEED),
            fraction=0.2,
        )
        out[recipe] = run_scenario(sc)
    return out


def test_gate_01_both_variants_induce_the_same_design(battery):
    """Enumerated sample distributions of the two phase-2 procedures
    coincide (total variation below 1e-12) on every battery design."""
    assert len(battery) >= 50
    for d in battery:
        seq = enumerate_distribution(d, "sequential")
        draw = enumerate_distribution(d, "draw_by_draw")
        assert total_variation(seq, draw) < 1e-12


def test_gate_02_first_order_probabilities_respected(battery):
    """Enumerated marginals equal the target pi to 1e-12; on a 200-unit
    size-proportional design no unit drifts past |z| = 4 at B = 10^6."""
    for d in battery:
        marg = np.diag(moments_from_distribution(enumerate_distribution(d)).values)
        assert float(np.max(np.abs(marg - d.pi))) < 1e-12

    pop = generate_population(PopulationConfig("gamma", 200, ZCHECK_POP_SEED))
    design = pps_probabilities(pop.x, 40)
    rows = empirical_inclusion_check(
        design, replicates=10**6, master_seed=ZCHECK_MASTER_SEED, method="simulate"
    )
    worst = max(abs(r[3]) for r in rows)
    assert worst < 4.0
    assert not any(r[4] for r in rows)


def test_gate_03_size_distribution_and_split_mixture():
    """Size weights sum to one and mix the split probabilities back into
    the target pi, to 1e-12, on 1000 designs up to N = 5000."""
    for d in _wide_designs(90210):
        delta = phase1_deltas(d)
        assert abs(float(delta.sum()) - 1.0) < 1e-12
        mix = np.zeros(d.size)
        for i in range(1, d.n + 1):
            if delta[i - 1] > 0.0:
                mix += delta[i - 1] * split_probabilities(d, i).pi0
        assert float(np.max(np.abs(mix - d.pi))) < 1e-12


def test_gate_04_pairwise_probabilities(battery):
    """Closed-form conditional joints equal the conditioned enumeration
    to 1e-12, never exceed the product of marginals by more than 1e-12,
    and the worked 3-unit numbers come out exactly."""
    for d in battery:
        for i in range(1, d.n + 1):
            s = split_probabilities(d, i)
            jm = conditional_joint(s)
            ref = moments_from_distribution(enumerate_phase2(s))
            assert float(np.max(np.abs(jm.values - ref.values))) < 1e-12
            off = ~np.eye(d.size, dtype=bool)
            excess = jm.values - np.outer(s.pi0, s.pi0)
            assert float(excess[off].max()) <= 1e-12

    worked = validate_design([0.5, 0.7, 0.8])
    cond = conditional_joint(split_probabilities(worked, 2)).values
    for (k, l), want in {(0, 1): 5 / 19, (0, 2): 5 / 19, (1, 2): 9 / 19}.items():
        assert abs(cond[k, l] - want) < 1e-12
    unc = unconditional_joint(worked).values
    for (k, l), want in {(0, 1): 0.2, (0, 2): 0.3, (1, 2): 0.5}.items():
        assert abs(unc[k, l] - want) < 1e-12


def test_gate_05_estimators_and_variance_estimator_unbiased(battery):
    """Plain weighting is unbiased, split weighting is conditionally
    unbiased, and the squared-difference variance estimator hits the
    exact conditional variance (working sizes of 2 and up), all to
    1e-10; the estimate is nonnegative on every sample."""
    rng = np.random.default_rng(51)
    for d in battery:
        y = rng.uniform(0.0, 1.0, d.size)
        ys = y[d.perm]
        t_y = float(y.sum())

        dist = enumerate_distribution(d)
        e_ht = sum(
            p * sum(ys[k] / d.pi[k] for k in key) for key, p in dist.entries.items()
        )
        assert abs(e_ht - t_y) <= 1e-10

        for i in range(1, d.n + 1):
            s = split_probabilities(d, i)
            cond = enumerate_phase2(s)
            chts = {
                key: sum(ys[k] / s.pi0[k] for k in key)
                for key in cond.entries
            }
            e_cht = sum(p * chts[key] for key, p in cond.entries.items())
            assert abs(e_cht - t_y) <= 1e-10
            vhat = {
                key: syg_variance(selection_for(d, key, i), y)
                for key in cond.entries
            }
            assert all(v >= 0.0 for v in vhat.values())
            if i >= 2:
                var_cht = sum(
                    p * (chts[key] - e_cht) ** 2
                    for key, p in cond.entries.items()
                )
                e_vhat = sum(p * vhat[key] for key, p in cond.entries.items())
                assert abs(e_vhat - var_cht) <= 1e-10


def test_gate_06_variance_decomposition_and_lower_bound(battery):
    """Between-split plus within-split variance reproduces the full
    enumerated variance of the plain estimator to 1e-10, and that
    variance never falls below the closed-form bound minus 1e-12."""
    rng = np.random.default_rng(52)
    for d in battery:
        y = rng.uniform(0.0, 1.0, d.size)
        ys = y[d.perm]

        dist = enumerate_distribution(d)
        hts = {
            key: sum(ys[k] / d.pi[k] for k in key) for key in dist.entries
        }
        e_ht = sum(p * hts[key] for key, p in dist.entries.items())
        v_ht = sum(p * (hts[key] - e_ht) ** 2 for key, p in dist.entries.items())

        delta = phase1_deltas(d)
        acc = 0.0
        for i in range(1, d.n + 1):
            if delta[i - 1] == 0.0:
                continue
            s = split_probabilities(d, i)
            cond = enumerate_phase2(s)
            vals = {
                key: sum(ys[k] / d.pi[k] for k in key) for key in cond.entries
            }
            m = sum(p * vals[key] for key, p in cond.entries.items())
            var_i = sum(p * (vals[key] - m) ** 2 for key, p in cond.entries.items())
            x = xi0(s, y)
            acc += float(delta[i - 1]) * (x * x + var_i)
        assert abs(v_ht - acc) <= 1e-10
        assert v_ht >= ht_variance_lower_bound(d, y) - 1e-12


def test_gate_07_expected_inverse_working_size():
    """The closed form equals the weight-reciprocal sum to 1e-12 on 1000
    random designs."""
    for d in _wide_designs(90211):
        delta = phase1_deltas(d)
        harmonic = float(np.sum(delta / np.arange(1, d.n + 1)))
        assert abs(expected_inverse_nprime(d) - harmonic) < 1e-12


def test_gate_08_variance_ratio_bands(recipe_reports):
    """Gamma recipe, quadratic variable, f = 0.2: growing the sample
    from 400 to 2000 leaves the plain estimator's variance ratio inside
    [0.3, 1.1] while the split-weighted estimator drops below 0.35."""
    rep = recipe_reports["gamma"]
    ht = rep.cell(2000, "quadratic", "HT").v_mc / rep.cell(400, "quadratic", "HT").v_mc
    cht = (
        rep.cell(2000, "quadratic", "CHT").v_mc
        / rep.cell(400, "quadratic", "CHT").v_mc
    )
    assert 0.3 <= ht <= 1.1
    assert cht < 0.35


def test_gate_09_split_weighted_ratios_stay_below_unity(recipe_reports):
    """Consecutive variance ratios of the split-weighted estimator sit
    below 1.05 in at least 90% of the 32 (recipe, variable, n) cells."""
    total = passing = 0
    for recipe in ("gamma", "lognormal"):
        rep = recipe_reports[recipe]
        for v in ("linear", "quadratic", "exponential", "bump"):
            for n in N_GRID[1:]:
                rv = rep.cell(n, v, "CHT").rv_mc
                total += 1
                passing += rv is not None and rv < 1.05
    assert total == 32
    assert passing >= math.ceil(0.9 * total)


def test_gate_10_gap_indicator_curve():
    """The size-scaled worst gap grows strictly along the n grid for
    both recipes while the weighted-gap indicator stays within a factor
    of 2 across the grid."""
    for recipe in ("gamma", "lognormal"):
        profs = service.curve_op(recipe, 0.2, N_GRID, CURVE_POP_SEED)
        d2 = [p.d2 for p in profs]
        assert all(b > a for a, b in zip(d2, d2[1:]))
        d1 = [p.d1 for p in profs]
        assert max(d1) / min(d1) < 2.0


def test_gate_11_cli_replay_is_byte_identical(tmp_path, monkeypatch):
    """Re-running any subcommand from its recorded manifest reproduces
    the output files byte for byte."""
    monkeypatch.chdir(tmp_path)
    runner = CliRunner()
    Path("units.csv").write_text("unit_id,pi\n1,0.5\n2,0.7\n3,0.8\n")
    Path("y.csv").write_text("unit_id,y\n1,2.0\n2,0.5\n3,5.0\n")

    flows = [
        ("generate", ["--recipe", "gamma", "--size", "40", "--seed", "3",
                      "--out", "pop.csv"], ["pop.csv"]),
        ("sample", ["--pi", "units.csv", "--seed", "5", "--out", "s.csv"],
         ["s.csv"]),
        ("probs", ["--pi", "units.csv", "--joint", "unconditional",
                   "--out", "j.csv"], ["j.csv"]),
        ("estimate", ["--sample", "s.csv", "--y", "y.csv", "--out", "est.json"],
         ["est.json"]),
        ("diagnostics", ["--recipe", "gamma", "--grid", "10,20",
                         "--out", "curve.csv"], ["curve.csv"]),
        ("enumerate", ["--pi", "units.csv", "--out", "dist.csv"],
         ["dist.csv", "dist.csv.report.json"]),
        ("simulate", ["--recipe", "gamma", "--fraction", "0.2", "--grid", "4,8",
                      "--replicates", "120", "--seed", "9", "--out", "rep.csv"],
         ["rep.csv"]),
    ]
    for subcommand, argv, outputs in flows:
        res = runner.invoke(main, [subcommand, *argv])
        assert res.exit_code == 0, f"{subcommand}: {res.output}"
        manifest = json.loads(Path(outputs[0] + ".manifest.json").read_text())
        remap = {p: p + ".replay" for p in outputs}
        re_argv = [remap.get(a, a) for a in argv_from_manifest(manifest)]
        res2 = runner.invoke(main, re_argv)
        assert res2.exit_code == 0, f"{subcommand} replay: {res2.output}"
        for p in outputs:
            assert Path(remap[p]).read_bytes() == Path(p).read_bytes(), p
