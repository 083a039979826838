"""File formats: CSV tables and JSON run manifests.

Writers are deterministic byte for byte: floats are serialized with
``repr`` (shortest exact round-trip), rows keep the caller's unit order,
and nothing here embeds a timestamp.  Manifests do carry a creation
time, which is why replay comparisons hash the outputs listed in the
manifest rather than the manifest file itself.
"""

from __future__ import annotations

import csv
import hashlib
import json
from datetime import datetime, timezone

import numpy as np

from .design import (
    DesignSpec,
    SampleSelection,
    split_probabilities,
    validate_design,
)
from .errors import DimensionMismatchError, NonProbabilityError
from .populations import MODEL_NAMES, Population

__all__ = [
    "read_units_csv",
    "write_sample_csv",
    "read_sample_csv",
    "selection_from_table",
    "write_population_csv",
    "read_population_csv",
    "write_profile_csv",
    "write_report_csv",
    "write_distribution_csv",
    "sha256_file",
    "build_manifest",
    "write_manifest",
    "manifest_path_for",
]

_SPLIT_MATCH_TOL = 1e-9


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def read_units_csv(path: str) -> tuple[list[str], dict[str, np.ndarray]]:
    """Read a unit table; returns ids and all numeric columns found.

    The first column is the unit id; every other column is parsed as
    float.  Order is preserved.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 2:
        raise NonProbabilityError(f"{path}: need a header and at least two columns")
    header = [h.strip() for h in rows[0]]
    ids: list[str] = []
    cols: dict[str, list[float]] = {h: [] for h in header[1:]}
    for r in rows[1:]:
        if not r:
            continue
        ids.append(r[0])
        for h, cell in zip(header[1:], r[1:]):
            try:
                cols[h].append(float(cell))
            except ValueError as exc:
                raise NonProbabilityError(
                    f"{path}: bad value {cell!r} in column {h}"
                ) from exc
    return ids, {h: np.asarray(v) for h, v in cols.items()}


def write_sample_csv(
    path: str,
    unit_ids: list[str],
    selection: SampleSelection,
) -> None:
    """One row per population unit in caller order: pi, pi0, membership."""
    design = selection.design
    N = design.size
    pi = np.empty(N)
    pi[design.perm] = design.pi
    pi0 = np.empty(N)
    pi0[design.perm] = selection.split.pi0
    ind = np.empty(N, dtype=np.int64)
    ind[design.perm] = selection.indicators
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["unit_id", "pi", "pi0", "in_sample"])
        for k in range(N):
            w.writerow([unit_ids[k], _fmt(pi[k]), _fmt(pi0[k]), int(ind[k])])


def read_sample_csv(path: str):
    ids, cols = read_units_csv(path)
    for need in ("pi", "pi0", "in_sample"):
        if need not in cols:
            raise NonProbabilityError(f"{path}: missing column {need}")
    return ids, cols["pi"], cols["pi0"], cols["in_sample"].astype(np.int64)


def selection_from_table(pi, pi0, indicators) -> SampleSelection:
    """Rebuild a selection from a written sample table.

    Validates the design, infers the working size from the number of
    certainty units, and checks the stored split vector against the
    recomputed one; mismatches mean the table does not belong to the
    design it claims.
    """
    design = validate_design(pi)
    N, n = design.size, design.n
    pi0 = np.asarray(pi0, dtype=np.float64)
    ind = np.asarray(indicators)
    if pi0.shape[0] != N or ind.shape[0] != N:
        raise DimensionMismatchError("pi0 and in_sample must cover every unit")
    certain = int(np.sum(pi0 == 1.0))
    n_prime = n - certain
    if not 1 <= n_prime <= n:
        raise DimensionMismatchError(
            f"{certain} certainty units are inconsistent with size {n}"
        )
    split = split_probabilities(design, n_prime)
    if float(np.max(np.abs(split.pi0 - pi0[design.perm]))) > _SPLIT_MATCH_TOL:
        raise DimensionMismatchError("stored split probabilities do not match the design")
    if int(ind.sum()) != n:
        raise DimensionMismatchError(
            f"sample has {int(ind.sum())} units, design fixes {n}"
        )
    ind_sorted = np.asarray(ind, dtype=np.int8)[design.perm]
    if np.any(ind_sorted[split.n_big :] != 1):
        raise DimensionMismatchError("a certainty unit is marked out of the sample")
    units_sorted = np.flatnonzero(ind_sorted).astype(np.int64)
    return SampleSelection(
        split=split,
        units_sorted=units_sorted,
        units_original=design.perm[units_sorted],
        indicators=ind_sorted,
    )


def write_population_csv(path: str, pop: Population) -> None:
    """Columns unit_id, x, then y1..y4 in canonical model order."""
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["unit_id", "x", "y1", "y2", "y3", "y4"])
        ys = [pop.y[name] for name in MODEL_NAMES]
        for k in range(pop.size):
            w.writerow([k + 1, _fmt(pop.x[k])] + [_fmt(col[k]) for col in ys])


def read_population_csv(path: str):
    ids, cols = read_units_csv(path)
    if "x" not in cols:
        raise NonProbabilityError(f"{path}: missing column x")
    y = {}
    for j, name in enumerate(MODEL_NAMES, start=1):
        col = f"y{j}"
        if col in cols:
            y[name] = cols[col]
    return ids, cols["x"], y


def write_profile_csv(path: str, profiles) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["n", "d1", "d2", "d3", "min_scaled_pi", "max_scaled_pi"])
        for p in profiles:
            w.writerow(
                [
                    p.n,
                    _fmt(p.d1),
                    _fmt(p.d2),
                    _fmt(p.d3),
                    _fmt(p.min_scaled_pi),
                    _fmt(p.max_scaled_pi),
                ]
            )


def write_report_csv(path: str, report) -> None:
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["n", "variable", "estimator", "v_mc", "rv_mc"])
        for c in report.cells:
            w.writerow(
                [
                    c.n,
                    c.variable,
                    c.estimator,
                    _fmt(c.v_mc),
                    "" if c.rv_mc is None else _fmt(c.rv_mc),
                ]
            )


def write_distribution_csv(path: str, dist, unit_ids: list[str], design: DesignSpec) -> None:
    """Exact distribution rows sorted by descending probability then units."""
    rows = []
    for key, prob in dist.entries.items():
        caller = sorted(int(design.perm[k]) for k in key)
        label = " ".join(unit_ids[k] for k in caller)
        rows.append((label, prob))
    rows.sort(key=lambda r: (-r[1], r[0]))
    with open(path, "w", newline="") as fh:
        w = _writer(fh)
        w.writerow(["units", "probability"])
        for label, prob in rows:
            w.writerow([label, _fmt(prob)])


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def build_manifest(
    subcommand: str,
    arguments: dict,
    inputs: list[str],
    outputs: list[str],
    version: str,
    extra: dict | None = None,
) -> dict:
    m = {
        "tool": "hvsampling",
        "version": version,
        "subcommand": subcommand,
        "arguments": arguments,
        "inputs": [{"path": p, "sha256": sha256_file(p)} for p in inputs],
        "outputs": [{"path": p, "sha256": sha256_file(p)} for p in outputs],
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        m.update(extra)
    return m


def manifest_path_for(out_path: str) -> str:
    return out_path + ".manifest.json"


def write_manifest(path: str, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
