"""On-disk formats: points CSV, keypoints JSON, plan CSV, report JSON.

All indices are 0-based everywhere.  Floats are written with ``%.17g`` so a
write/read round trip reproduces every float64 bit-for-bit, and JSON files
are written with sorted keys so identical runs produce identical bytes.

Points CSV    header ``x0,...,x{d-1},weight``; one point per row.  The
              weight column may be omitted, in which case weights default
              to the uniform ``1/count``.
Keypoints     ``{"indexing": 0, "pairs": [[i, j], ...]}``.
Plan CSV      first line ``# shape m n``.  Dense (one row per line) when
              ``min(m, n) <= 512``; otherwise sparse triplets under an
              ``i,j,value`` header, row-major, nonzeros only.
Report JSON   summary of one solver run, validated against REPORT_SCHEMA.
"""

from __future__ import annotations

import csv
import json

import numpy as np
from jsonschema import validate as _validate_schema

from .core import InvalidParameters, KeypointPairing, NonFiniteInput

__all__ = [
    "FLOAT_FMT",
    "SPARSE_THRESHOLD",
    "REPORT_SCHEMA",
    "read_points",
    "write_points",
    "read_keypoints",
    "write_keypoints",
    "read_plan",
    "write_plan",
    "read_report",
    "write_report",
]

FLOAT_FMT = "%.17g"
SPARSE_THRESHOLD = 512

REPORT_SCHEMA = {
    "type": "object",
    "properties": {
        "method": {"type": "string"},
        "solver_tag": {"type": "string"},
        "shape": {
            "type": "array",
            "items": {"type": "integer", "minimum": 1},
            "minItems": 2,
            "maxItems": 2,
        },
        "n_keypoints": {"type": "integer", "minimum": 0},
        "objective": {"type": "number"},
        "row_marginal_error": {"type": "number", "minimum": 0},
        "col_marginal_error": {"type": "number", "minimum": 0},
        "transported_mass": {"type": "number", "minimum": 0},
        "iterations": {"type": "integer", "minimum": 0},
        "converged": {"type": "boolean"},
        "dual_objective": {"type": ["number", "null"]},
        "wall_ms": {"type": ["number", "null"]},
        "parameters": {
            "type": "object",
            "properties": {
                "epsilon": {"type": "number"},
                "rho": {"type": "number"},
                "alpha": {"type": "number"},
                "divergence": {"type": "string"},
                "mass_budget": {"type": ["number", "null"]},
            },
            "required": ["epsilon", "rho", "alpha", "divergence", "mass_budget"],
            "additionalProperties": False,
        },
    },
    "required": [
        "method",
        "solver_tag",
        "shape",
        "n_keypoints",
        "objective",
        "row_marginal_error",
        "col_marginal_error",
        "transported_mass",
        "iterations",
        "converged",
        "dual_objective",
        "wall_ms",
        "parameters",
    ],
    "additionalProperties": False,
}


def _fmt(x: float) -> str:
    return FLOAT_FMT % float(x)


def read_points(path):
    """Load a points CSV; returns ``(points, weights)`` float64 arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise InvalidParameters(f"{path}: empty points file")
    header = [c.strip() for c in rows[0]]
    has_weight = header[-1] == "weight"
    dim = len(header) - 1 if has_weight else len(header)
    expected = [f"x{k}" for k in range(dim)] + (["weight"] if has_weight else [])
    if dim < 1 or header != expected:
        raise InvalidParameters(
            f"{path}: header must be x0,...,x{{d-1}}[,weight], got {','.join(header)!r}"
        )
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise InvalidParameters(f"{path}: non-numeric cell ({exc})") from exc
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != len(header):
        raise InvalidParameters(f"{path}: every row needs {len(header)} columns")
    if not np.all(np.isfinite(data)):
        raise NonFiniteInput(f"{path}: contains non-finite values")
    weights = data[:, dim] if has_weight else np.full(data.shape[0], 1.0 / data.shape[0])
    return np.ascontiguousarray(data[:, :dim]), np.ascontiguousarray(weights)


def write_points(path, points, weights) -> None:
    pts = np.asarray(points, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] != w.shape[0]:
        raise InvalidParameters(
            f"{pts.shape[0]} points but {w.shape[0]} weights"
        )
    dim = pts.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write(",".join([f"x{k}" for k in range(dim)] + ["weight"]) + "\n")
        for row, wi in zip(pts, w):
            fh.write(",".join(_fmt(c) for c in row) + "," + _fmt(wi) + "\n")


def read_keypoints(path) -> KeypointPairing:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidParameters(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "pairs" not in doc:
        raise InvalidParameters(f'{path}: expected an object with "indexing" and "pairs"')
    if doc.get("indexing") != 0:
        raise InvalidParameters(
            f'{path}: "indexing" must be 0 (0-based), got {doc.get("indexing")!r}'
        )
    pairs = doc["pairs"]
    if not isinstance(pairs, list) or not all(
        isinstance(p, list) and len(p) == 2 and all(isinstance(c, int) for c in p)
        for p in pairs
    ):
        raise InvalidParameters(f'{path}: "pairs" must be a list of [i, j] integer pairs')
    return KeypointPairing(tuple((p[0], p[1]) for p in pairs))


def write_keypoints(path, keypoints: KeypointPairing) -> None:
    doc = {"indexing": 0, "pairs": [[i, j] for i, j in keypoints.pairs]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_plan(path, plan_values) -> None:
    P = np.asarray(plan_values, dtype=np.float64)
    if P.ndim != 2:
        raise InvalidParameters(f"plan must be 2-D, got shape {P.shape}")
    m, n = P.shape
    with open(path, "w", newline="") as fh:
        fh.write(f"# shape {m} {n}\n")
        if min(m, n) <= SPARSE_THRESHOLD:
            for row in P:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        else:
            fh.write("i,j,value\n")
            for i, j in zip(*np.nonzero(P)):
                fh.write(f"{i},{j},{_fmt(P[i, j])}\n")


def read_plan(path) -> np.ndarray:
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# shape "):
            raise InvalidParameters(f"{path}: missing '# shape m n' line")
        try:
            m, n = (int(tok) for tok in first[len("# shape "):].split())
        except ValueError as exc:
            raise InvalidParameters(f"{path}: malformed shape line {first!r}") from exc
        rest = [line.strip() for line in fh if line.strip()]
    if rest and rest[0] == "i,j,value":
        P = np.zeros((m, n))
        for line in rest[1:]:
            si, sj, sv = line.split(",")
            i, j = int(si), int(sj)
            if not (0 <= i < m and 0 <= j < n):
                raise InvalidParameters(f"{path}: index ({i}, {j}) outside shape ({m}, {n})")
            P[i, j] = float(sv)
        return P
    data = [[float(c) for c in line.split(",")] for line in rest]
    P = np.array(data, dtype=np.float64)
    if P.shape != (m, n):
        raise InvalidParameters(f"{path}: body shape {P.shape} does not match header ({m}, {n})")
    return P


def write_report(path, report: dict) -> None:
    _validate_schema(instance=report, schema=REPORT_SCHEMA)
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_report(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    _validate_schema(instance=doc, schema=REPORT_SCHEMA)
    return doc
