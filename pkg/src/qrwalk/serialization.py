"""JSON and CSV formats shared by the command line and the library.

Complex numbers are ``[re, im]`` pairs; matrices are
``{"rows", "cols", "entries"}`` with entries in row-major order.  JSON floats
are written with Python's shortest round-trip representation, so reading a
file back reproduces every double exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .channel import ClassicalUnitary, QuantumChannel, build_classical_unitary, make_channel
from .limit.driver import DriverSpec
from .limit.sde import SDEModel
from .obtuse import ObtuseSystem
from .tensor3 import ThreeTensor

CSV_SCHEMA = "v1"
CSV_DIGITS = 10


class FormatError(ValueError):
    """Malformed input document."""


# -- JSON encoding -----------------------------------------------------------------


def enc_complex(z) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def dec_complex(x) -> complex:
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(isinstance(a, (int, float)) for a in x):
        return complex(x[0], x[1])
    raise FormatError(f"expected a number or [re, im] pair, got {x!r}")


def enc_vector(v) -> list[list[float]]:
    return [enc_complex(z) for z in np.asarray(v).ravel()]


def dec_vector(x) -> np.ndarray:
    if not isinstance(x, list):
        raise FormatError("expected a list of complex entries")
    return np.array([dec_complex(z) for z in x], dtype=complex)


def enc_matrix(m) -> dict:
    m = np.asarray(m)
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]), "entries": enc_vector(m)}


def dec_matrix(x) -> np.ndarray:
    try:
        rows, cols, entries = int(x["rows"]), int(x["cols"]), x["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"matrix needs rows, cols and entries: {exc}") from None
    flat = dec_vector(entries)
    if flat.size != rows * cols:
        raise FormatError(f"matrix declares {rows}x{cols} but has {flat.size} entries")
    return flat.reshape(rows, cols)


def _require(doc, *keys):
    if not isinstance(doc, dict):
        raise FormatError("expected a JSON object")
    missing = [k for k in keys if k not in doc]
    if missing:
        raise FormatError(f"missing field(s): {', '.join(missing)}")


def obtuse_to_json(s: ObtuseSystem) -> dict:
    return {
        "dim": s.dim,
        "vectors": [enc_vector(v) for v in s.vectors],
        "probabilities": [float(p) for p in s.probabilities],
    }


def obtuse_from_json(doc) -> np.ndarray:
    """Raw vectors (validation is left to the caller)."""
    _require(doc, "vectors")
    return np.array([dec_vector(v) for v in doc["vectors"]])


def tensor_to_json(t: ThreeTensor, tol: float = 0.0) -> dict:
    c = t.coeffs
    idx = np.argwhere(np.abs(c) > tol)
    return {"n": t.n, "coeffs": [[int(i), int(j), int(k), *enc_complex(c[i, j, k])] for i, j, k in idx]}


def tensor_from_json(doc) -> ThreeTensor:
    _require(doc, "n", "coeffs")
    n = int(doc["n"])
    c = np.zeros((n + 1,) * 3, dtype=complex)
    for row in doc["coeffs"]:
        if len(row) != 5:
            raise FormatError("tensor coefficients are [i, j, k, re, im]")
        i, j, k = (int(a) for a in row[:3])
        if not all(0 <= a <= n for a in (i, j, k)):
            raise FormatError(f"index ({i}, {j}, {k}) outside 0..{n}")
        c[i, j, k] = complex(row[3], row[4])
    return ThreeTensor(c)


def classical_unitary_to_json(u: ClassicalUnitary) -> dict:
    dec = u.decomposition
    return {
        "dim_sys": u.dim_sys,
        "dim_env": u.dim_env,
        "branches": [{"phi": enc_vector(phi), "unitary": enc_matrix(ui)} for phi, ui in u.branches],
        "probabilities": [float(p) for p in u.probabilities],
        "values": [enc_vector(v) for v in u.rv.values],
        "A": enc_matrix(u.a),
        "B": [enc_matrix(b) for b in u.b],
        "reconstruction_residual": dec.residual,
    }


def classical_unitary_from_json(doc) -> ClassicalUnitary:
    """Builds from ``branches``; derived fields, if present, are recomputed rather than trusted."""
    _require(doc, "branches")
    branches = []
    for b in doc["branches"]:
        _require(b, "phi", "unitary")
        branches.append((dec_vector(b["phi"]), dec_matrix(b["unitary"])))
    return build_classical_unitary(branches)


def channel_to_json(ch: QuantumChannel) -> dict:
    return {"dim": ch.dim, "krauss": [enc_matrix(k) for k in ch.krauss]}


def channel_from_json(doc) -> QuantumChannel:
    _require(doc, "krauss")
    return make_channel([dec_matrix(k) for k in doc["krauss"]])


def driver_to_json(d: DriverSpec) -> dict:
    return {
        "n_brownian": d.n_brownian,
        "n_poisson": d.n_poisson,
        "intensities": [float(x) for x in d.intensities],
        "mixing": enc_matrix(d.mixing),
        "kind": d.kind,
    }


def driver_from_json(doc) -> DriverSpec:
    _require(doc, "n_brownian", "n_poisson", "intensities", "mixing")
    return DriverSpec(
        int(doc["n_brownian"]), int(doc["n_poisson"]), np.array(doc["intensities"], dtype=float),
        dec_matrix(doc["mixing"]), doc.get("kind", "custom"),
    )


def model_to_json(m: SDEModel) -> dict:
    return {"A_tilde": enc_matrix(m.a_tilde), "B_tilde": [enc_matrix(b) for b in m.b_tilde], "driver": driver_to_json(m.driver)}


def model_from_json(doc) -> SDEModel:
    _require(doc, "A_tilde", "B_tilde", "driver")
    return SDEModel(dec_matrix(doc["A_tilde"]), np.array([dec_matrix(b) for b in doc["B_tilde"]]), driver_from_json(doc["driver"]))


def dumps(doc) -> str:
    """JSON text; non-finite floats are rejected."""
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


# -- CSV ---------------------------------------------------------------------------


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return repr(x)
    return f"{x:.{CSV_DIGITS}g}"


class CsvReport:
    """CSV text with ``#`` header lines: schema version, seed, optional timestamp."""

    def __init__(self, header: list[str], seed: int | None, timestamp: bool = True, meta: dict | None = None):
        self.buf = io.StringIO()
        self.buf.write(f"# schema={CSV_SCHEMA}\n")
        self.buf.write(f"# seed={seed}\n")
        for k, v in (meta or {}).items():
            self.buf.write(f"# {k}={v}\n")
        if timestamp:
            self.buf.write(f"# generated={datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
        self.writer = csv.writer(self.buf, lineterminator="\n")
        self.writer.writerow(header)

    def row(self, values) -> None:
        self.writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in values])

    def text(self) -> str:
        return self.buf.getvalue()


def read_csv(text: str) -> tuple[dict, list[dict]]:
    """Parse a report back into ``(meta, rows)``; values stay strings."""
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key] = val
        else:
            body.append(line)
    return meta, list(csv.DictReader(body))

