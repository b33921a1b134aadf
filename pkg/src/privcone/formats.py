"""Mechanism files, JSON reports and their plain-text rendering.

Rationals travel as ``"num/den"`` strings.  Floats are written with 17
significant digits so that a report reloads to the same doubles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ParseError
from .mechanisms import PramSpec, RRSpec, SamplingSpec
from .noisecone import NoiseKind, NoiseSpec, Window, choose_window, parse_pmf_table
from .numerics import DatasetOrder, LabeledMatrix, MechanismMatrix, parse_rational
from .rowcone import ConstraintSystem, LinearConstraint, Relation, Verdict

SCHEMA = "privcone/1"


@dataclass(frozen=True)
class MechanismFile:
    """A parsed mechanism file: exactly one of the fields is set."""

    kind: str
    matrix: MechanismMatrix | None = None
    rr: RRSpec | None = None
    pram: PramSpec | None = None
    gamma: Fraction | None = None
    sampling: SamplingSpec | None = None
    noise: NoiseSpec | None = None
    window: Window | None = None

    def mechanism_matrix(self) -> MechanismMatrix:
        from .mechanisms import pram_matrix, rr_matrix, sampling_matrix

        if self.matrix is not None:
            return self.matrix
        if self.rr is not None:
            return rr_matrix(self.rr)
        if self.pram is not None:
            return pram_matrix(self.pram)
        if self.sampling is not None:
            return sampling_matrix(self.sampling)
        raise ParseError("noise mechanisms have no exact matrix; use the noise subcommand")


def _require(obj: dict, key: str):
    if key not in obj:
        raise ParseError(f"missing field {key!r}")
    return obj[key]


def _int(obj: dict, key: str) -> int:
    v = _require(obj, key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"field {key!r} must be an integer, got {v!r}")
    return v


def _float(obj: dict, key: str) -> float:
    v = _require(obj, key)
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ParseError(f"field {key!r} must be a number, got {v!r}")
    try:
        return float(Fraction(v)) if isinstance(v, str) else float(v)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"field {key!r}: {exc}") from exc


def matrix_from_json(obj: dict, stochastic: bool = True) -> LabeledMatrix:
    rows = _require(obj, "row_labels")
    cols = _require(obj, "col_labels")
    entries = _require(obj, "entries")
    if not isinstance(entries, list) or not all(isinstance(r, list) for r in entries):
        raise ParseError("entries must be a list of rows")
    parsed = tuple(tuple(parse_rational(v) for v in row) for row in entries)
    order = obj.get("order")
    try:
        order = DatasetOrder(order) if order is not None else None
    except ValueError:
        raise ParseError(f"unknown dataset order {order!r}") from None
    try:
        if stochastic:
            return MechanismMatrix(tuple(rows), tuple(cols), parsed, order)
        return LabeledMatrix(tuple(rows), tuple(cols), parsed)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def matrix_to_json(m: LabeledMatrix) -> dict:
    out = {"schema": SCHEMA, "type": "matrix",
           "row_labels": list(m.row_labels), "col_labels": list(m.col_labels),
           "entries": [[rational(v) for v in row] for row in m.entries]}
    order = getattr(m, "order", None)
    if order is not None:
        out["order"] = order.value
    return out


def parse_mechanism(obj: Any, base: Path | None = None) -> MechanismFile:
    if not isinstance(obj, dict):
        raise ParseError("a mechanism file must hold a JSON object")
    schema = obj.get("schema")
    if schema != SCHEMA:
        raise ParseError(f"schema must be {SCHEMA!r}, got {schema!r}")
    kind = _require(obj, "type")
    if kind == "matrix":
        return MechanismFile(kind, matrix=matrix_from_json(obj))
    if kind == "randomized_response":
        return MechanismFile(kind, rr=RRSpec(parse_rational(_require(obj, "p")), _int(obj, "k")))
    if kind == "pram":
        q = _require(obj, "q")
        if not isinstance(q, dict):
            raise ParseError("pram field 'q' must be a matrix object")
        qm = matrix_from_json(q)
        gamma = parse_rational(obj["gamma"]) if "gamma" in obj else None
        return MechanismFile(kind, pram=PramSpec(MechanismMatrix.from_matrix(qm, DatasetOrder.LEX_TUPLES),
                                                 _int(obj, "k")), gamma=gamma)
    if kind == "sampling":
        return MechanismFile(kind, sampling=SamplingSpec(parse_rational(_require(obj, "p")),
                                                         _int(obj, "n"), _int(obj, "w")))
    if kind == "noise":
        return _parse_noise(obj, base)
    raise ParseError(f"unknown mechanism type {kind!r}")


def _parse_noise(obj: dict, base: Path | None) -> MechanismFile:
    kind = _require(obj, "kind")
    try:
        nk = NoiseKind(kind)
    except ValueError:
        raise ParseError(f"unknown noise kind {kind!r}") from None
    tol = _float(obj, "tolerance") if "tolerance" in obj else 1e-12
    if nk in (NoiseKind.GEOMETRIC, NoiseKind.DNB):
        spec = NoiseSpec(nk, p=_float(obj, "p"), r=_int(obj, "r") if "r" in obj else 1)
        if nk is NoiseKind.GEOMETRIC and spec.r != 1:
            raise ParseError("geometric noise has r = 1")
    elif nk is NoiseKind.SKELLAM:
        spec = NoiseSpec(nk, l1=_float(obj, "l1"), l2=_float(obj, "l2"))
    else:
        if "table" in obj:
            rows = obj["table"]
            if not isinstance(rows, list):
                raise ParseError("table must be a list of [k, value] pairs")
            table = {}
            for pair in rows:
                if not isinstance(pair, list) or len(pair) != 2:
                    raise ParseError(f"bad table entry {pair!r}")
                try:
                    table[int(pair[0])] = float(pair[1])
                except (TypeError, ValueError):
                    raise ParseError(f"bad table entry {pair!r}") from None
        else:
            path = Path(_require(obj, "table_file"))
            if base is not None and not path.is_absolute():
                path = base / path
            try:
                table = parse_pmf_table(path.read_text())
            except OSError as exc:
                raise ParseError(f"cannot read pmf table: {exc}") from exc
        spec = NoiseSpec(nk, table=table)
    window = Window(_int(obj, "window"), tol) if "window" in obj else choose_window(spec, tol)
    return MechanismFile("noise", noise=spec, window=window)


def load_mechanism(path: str | Path) -> MechanismFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    return parse_mechanism(obj, path.parent)


# -- report serialization -------------------------------------------------

def rational(v) -> str:
    v = Fraction(v)
    return f"{v.numerator}/{v.denominator}"


def float17(v: float) -> str:
    v = float(v)
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return format(v, ".17g")


def _prepare(obj, floats: list):
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, Fraction):
        return rational(obj)
    if isinstance(obj, int):
        return obj
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        floats.append(float(obj))
        return f"@@float{len(floats) - 1}@@"
    if isinstance(obj, dict):
        return {str(k): _prepare(v, floats) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_prepare(v, floats) for v in obj]
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dumps(report: dict) -> str:
    """Deterministic JSON: insertion order kept, floats at 17 significant digits."""
    floats: list[float] = []
    prepared = _prepare(report, floats)
    text = json.dumps(prepared, indent=2, ensure_ascii=False)
    for i, v in enumerate(floats):
        rendered = float17(v)
        if not math.isfinite(v):
            rendered = json.dumps(rendered)
        text = text.replace(f'"@@float{i}@@"', rendered, 1)
    return text + "\n"


def constraint_to_json(c: LinearConstraint) -> dict:
    out = {"coefficients": [int(v) if v.denominator == 1 else rational(v) for v in c.coefficients],
           "relation": c.relation.value}
    if c.label:
        out["label"] = c.label
    return out


def system_to_json(s: ConstraintSystem) -> dict:
    return {"provenance": s.provenance.value,
            "order": s.order.value if s.order else None,
            "labels": list(s.labels),
            "constraints": [constraint_to_json(c) for c in s]}


def verdict_to_json(v: Verdict) -> dict:
    out = {"status": v.status.value, "values": [rational(x) for x in v.values]}
    if v.witness is not None:
        out["witness"] = v.witness
    return out


def guarantee_to_json(r) -> dict:
    return {"verdict": r.verdict.value, "checked": r.checked, "skipped": list(r.skipped),
            "witnesses": [{"output": w.output,
                           "prior": [rational(q) if isinstance(q, Fraction) else q for q in _flat(w.prior)],
                           "query": w.query,
                           "prior_preference": [rational(x) for x in w.prior_preference],
                           "posterior_preference": [rational(x) for x in w.posterior_preference]}
                          for w in sorted(r.witnesses, key=lambda w: (w.output, w.query, str(w.prior)))]}


def _flat(prior):
    out = []
    for v in prior:
        if isinstance(v, tuple):
            out.extend(v)
        else:
            out.append(v)
    return out


def trace_to_json(t) -> dict:
    return {"eliminated": t.variable,
            "parents": [list(p) for p in t.parents],
            "result": system_to_json(t.result)}


# -- plain text -----------------------------------------------------------

def _term(coef: Fraction, label: str) -> str:
    if coef == 1:
        return f"x{label}"
    return f"{coef}·x{label}"


def render_constraint(c: LinearConstraint, labels) -> str:
    """``a·x1 + b·x2 ≥ c·x3`` with negative terms moved to the right-hand side."""
    lhs = [_term(v, lab) for v, lab in zip(c.coefficients, labels) if v > 0]
    rhs = [_term(-v, lab) for v, lab in zip(c.coefficients, labels) if v < 0]
    op = {Relation.GE: "≥", Relation.EQ: "=", Relation.GT: ">"}[c.relation]
    return f"{' + '.join(lhs) or '0'} {op} {' + '.join(rhs) or '0'}"


def render_system(s: ConstraintSystem) -> str:
    head = f"{s.provenance.value}: {len(s)} constraints over {len(s.labels)} datasets"
    return "\n".join([head] + [f"  {render_constraint(c, s.labels)}" for c in s])
