"""Row cones: generating constraint systems, membership tests, and reading
constraints as statements about an attacker's posterior.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import AllZero, DimensionMismatch, ParseError, SingularAtHalf
from .mechanisms import (
    MISSING,
    RRSpec,
    SamplingSpec,
    agreements,
    bit_labels,
    label_separator,
    split_label,
    tuple_labels,
)
from .numerics import (
    DatasetOrder,
    LabeledMatrix,
    check_dim,
    dot,
    integer_scaled,
    parse_rational,
)


class Relation(str, enum.Enum):
    GE = ">=0"
    EQ = "=0"
    GT = ">0"


class Provenance(str, enum.Enum):
    EXACT = "exact-row-cone"
    APPROXIMATION = "approximation-cone"


@dataclass(frozen=True)
class LinearConstraint:
    """Homogeneous constraint ``sum_i coefficients[i] * x_i  (>= | = | >)  0``."""

    coefficients: tuple[Fraction, ...]
    relation: Relation = Relation.GE
    label: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(Fraction(c) for c in self.coefficients))
        object.__setattr__(self, "relation", Relation(self.relation))

    @property
    def trivial(self) -> bool:
        return not any(self.coefficients)

    def normalized(self) -> "LinearConstraint":
        """Integer coefficients with gcd 1; equalities start with a positive term."""
        if self.trivial:
            return self
        ints = integer_scaled(self.coefficients)
        if self.relation is Relation.EQ:
            first = next(v for v in ints if v)
            if first < 0:
                ints = [-v for v in ints]
        return LinearConstraint(tuple(Fraction(v) for v in ints), self.relation, self.label)

    def value(self, x: Sequence[Fraction]) -> Fraction:
        return dot(self.coefficients, x)

    def holds(self, x: Sequence[Fraction]) -> bool:
        v = self.value(x)
        if self.relation is Relation.GE:
            return v >= 0
        if self.relation is Relation.EQ:
            return v == 0
        return v > 0


class Status(str, enum.Enum):
    INSIDE = "inside"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class Verdict:
    status: Status
    values: tuple[Fraction, ...]
    witness: str | None = None

    @property
    def ok(self) -> bool:
        return self.status is not Status.OUTSIDE


def _classify(values: Sequence[Fraction], names: Sequence[str], strict: Sequence[bool] | None = None) -> Verdict:
    for i, (v, name) in enumerate(zip(values, names)):
        if v < 0 or (strict is not None and strict[i] and v == 0):
            return Verdict(Status.OUTSIDE, tuple(values), name)
    if all(v > 0 for v in values):
        return Verdict(Status.INSIDE, tuple(values))
    return Verdict(Status.BOUNDARY, tuple(values))


@dataclass(frozen=True)
class ConstraintSystem:
    """A (possibly approximate) row cone described by homogeneous constraints.

    Constraints are normalized and deduplicated on construction; all-zero
    ``>=0``/``=0`` constraints are dropped.
    """

    labels: tuple[str, ...]
    constraints: tuple[LinearConstraint, ...]
    order: DatasetOrder | None = None
    provenance: Provenance = Provenance.EXACT

    def __post_init__(self):
        labels = tuple(self.labels)
        seen = set()
        kept = []
        for c in self.constraints:
            if len(c.coefficients) != len(labels):
                raise DimensionMismatch(f"constraint of length {len(c.coefficients)} over {len(labels)} datasets")
            if c.trivial:
                if c.relation is Relation.GT:
                    raise ParseError("the constraint 0 > 0 is unsatisfiable")
                continue
            c = c.normalized()
            key = (c.coefficients, c.relation)
            if key in seen:
                continue
            seen.add(key)
            kept.append(c)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "constraints", tuple(kept))
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    def __len__(self) -> int:
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def keys(self) -> set:
        return {(c.coefficients, c.relation) for c in self.constraints}

    def check(self, x: Sequence[Fraction]) -> Verdict:
        if len(x) != len(self.labels):
            raise DimensionMismatch(f"vector of length {len(x)} against {len(self.labels)} datasets")
        values = []
        names = []
        strict = []
        for i, c in enumerate(self.constraints):
            v = c.value(x)
            if c.relation is Relation.EQ:
                # an equality contributes both v >= 0 and -v >= 0
                values.extend((v, -v))
                names.extend((c.label or f"#{i}",) * 2)
                strict.extend((False, False))
            else:
                values.append(v)
                names.append(c.label or f"#{i}")
                strict.append(c.relation is Relation.GT)
        return _classify(values, names, strict)

    def satisfied_by(self, x: Sequence[Fraction]) -> bool:
        return self.check(x).ok

    def split_equalities(self) -> "ConstraintSystem":
        out = []
        for c in self.constraints:
            if c.relation is Relation.EQ:
                out.append(LinearConstraint(c.coefficients, Relation.GE, c.label))
                out.append(LinearConstraint(tuple(-v for v in c.coefficients), Relation.GE, c.label))
            else:
                out.append(c)
        return ConstraintSystem(self.labels, tuple(out), self.order, self.provenance)


def membership(x: Sequence[Fraction], inverse: LabeledMatrix) -> Verdict:
    """Dual-cone test: dot ``x`` with every column of the inverse.

    The witness of an ``OUTSIDE`` verdict is the label of the first column with
    a negative dot product.
    """
    x = tuple(Fraction(v) for v in x)
    if len(x) != inverse.shape[0]:
        raise DimensionMismatch(f"vector of length {len(x)} against an inverse with {inverse.shape[0]} rows")
    values = [dot(x, col) for col in inverse.columns()]
    return _classify(values, inverse.col_labels)


@dataclass(frozen=True)
class CnfReport:
    holds: bool
    rows: dict
    offending: tuple[tuple[str, str], ...]

    def __bool__(self) -> bool:
        return self.holds


def cnf_membership(m: LabeledMatrix, inverse: LabeledMatrix) -> CnfReport:
    """``m`` is in the closure of the inverted mechanism iff ``m @ inverse >= 0``."""
    if m.shape[1] != inverse.shape[0]:
        raise DimensionMismatch(f"mechanism with {m.shape[1]} datasets against an inverse with {inverse.shape[0]} rows")
    product = m @ inverse
    offending = []
    rows = {}
    for label, row in zip(m.row_labels, product.entries):
        verdict = _classify(row, inverse.col_labels)
        rows[label] = verdict
        offending.extend((label, c) for c, v in zip(inverse.col_labels, row) if v < 0)
    return CnfReport(not offending, rows, tuple(offending))


def constraints_from_inverse(inverse: LabeledMatrix, order: DatasetOrder | None = None) -> ConstraintSystem:
    """One ``>=0`` constraint per inverse column (exact when the inverse exists)."""
    cons = tuple(LinearConstraint(col, Relation.GE, f"col {label}")
                 for label, col in zip(inverse.col_labels, inverse.columns()))
    return ConstraintSystem(inverse.row_labels, cons, order, Provenance.EXACT)


def rr_constraints(spec: RRSpec) -> ConstraintSystem:
    """Row cone of randomized response, one constraint per bit string ``s``.

    The coefficient on ``x_i`` is ``p^a (p-1)^(k-a)`` with ``a`` the number of
    positions where ``s`` and ``D_i`` agree (a positive multiple of column
    ``s`` of the inverse).  ``p`` is first replaced by ``max(p, 1-p)``.
    """
    p = spec.effective_p
    if p == Fraction(1, 2):
        raise SingularAtHalf("RR_1/2 has no inverse: every output is independent of the input")
    labels = bit_labels(spec.k)
    k = spec.k
    powers = [p ** a * (p - 1) ** (k - a) for a in range(k + 1)]
    cons = tuple(LinearConstraint(tuple(powers[agreements(s, d)] for d in labels), Relation.GE, f"s={s}")
                 for s in labels)
    return ConstraintSystem(labels, cons, DatasetOrder.REVERSE_LEX_BITS, Provenance.EXACT)


def _kron_vectors(vectors):
    out = [Fraction(1)]
    for v in vectors:
        out = [a * b for a in out for b in v]
    return out


def frapp_approx_constraints(gamma, n: int, k: int, values: Sequence[str] | None = None) -> ConstraintSystem:
    """Kronecker approximation cone of gamma-FRAPP on k tuples over N values.

    One constraint ``x . kron_l (p e_{i_l} - (1-p) e_{j_l}) >= 0`` for every
    choice of index pairs, ``p = gamma / (1 + gamma)``.
    """
    gamma = parse_rational(gamma)
    if gamma < 1:
        raise ParseError(f"gamma must be >= 1, got {gamma}")
    if values is None:
        values = tuple(chr(ord("a") + i) for i in range(n))
    if len(values) != n:
        raise ParseError(f"{len(values)} tuple values given for N = {n}")
    check_dim(n ** k)
    p = gamma / (1 + gamma)
    labels = tuple_labels(values, k)
    factors = {}
    for i in range(n):
        for j in range(n):
            v = [Fraction(0)] * n
            v[i] += p
            v[j] -= 1 - p
            factors[(i, j)] = v
    cons = []
    pairs = list(itertools.product(range(n), repeat=2))
    for combo in itertools.product(pairs, repeat=k):
        coeffs = _kron_vectors(factors[ij] for ij in combo)
        name = ",".join(f"{values[i]}/{values[j]}" for i, j in combo)
        cons.append(LinearConstraint(tuple(coeffs), Relation.GE, name))
    return ConstraintSystem(labels, tuple(cons), DatasetOrder.LEX_TUPLES, Provenance.APPROXIMATION)


def is_subdataset(sub: Sequence[str], sup: Sequence[str]) -> bool:
    """True iff ``sup`` turns into ``sub`` by blanking some tuples."""
    return all(a == b or a == MISSING for a, b in zip(sub, sup))


def blank_count(ds: Sequence[str]) -> int:
    return sum(t == MISSING for t in ds)


def sampling_constraints(spec: SamplingSpec) -> ConstraintSystem:
    """Exact row cone of sampling (drop, then sort).

    Equalities tie together datasets that are permutations of one another;
    one inequality per dataset ``D_i`` sums ``x_j (-(1-p))^blank(D_i, D_j)``
    over its sub-datasets ``D_j``.
    """
    symbols = spec.symbols
    sep = label_separator(symbols)
    labels = tuple_labels(symbols, spec.w)
    split = [split_label(lab, sep) for lab in labels]
    n = len(labels)
    cons = []
    classes: dict[tuple, list[int]] = {}
    for i, ds in enumerate(split):
        classes.setdefault(tuple(sorted(ds, key=symbols.index)), []).append(i)
    for members in classes.values():
        head = members[0]
        for other in members[1:]:
            coeffs = [Fraction(0)] * n
            coeffs[head] += 1
            coeffs[other] -= 1
            cons.append(LinearConstraint(tuple(coeffs), Relation.EQ, f"{labels[head]}={labels[other]}"))
    q = -(1 - spec.p)
    for i, di in enumerate(split):
        coeffs = [Fraction(0)] * n
        for j, dj in enumerate(split):
            if is_subdataset(dj, di):
                coeffs[j] = q ** (blank_count(dj) - blank_count(di))
        cons.append(LinearConstraint(tuple(coeffs), Relation.GE, f"sub {labels[i]}"))
    return ConstraintSystem(labels, tuple(cons), DatasetOrder.LEX_TUPLES, Provenance.EXACT)


def permutation_constraints(spec: SamplingSpec) -> ConstraintSystem:
    """Row cone of sorting alone: equal coordinates on permutation classes."""
    full = sampling_constraints(spec)
    eqs = tuple(c for c in full if c.relation is Relation.EQ)
    return ConstraintSystem(full.labels, eqs, full.order, Provenance.EXACT)


@dataclass(frozen=True)
class SemanticStatement:
    """Posterior statement carried by one inequality.

    Under the prior ``prior_weights`` (proportional to the absolute
    coefficients), every output leaves ``P(S2 | w) <= alpha * P(S1 | w)``;
    ``odds_increase`` bounds how far the posterior odds of S2 vs. S1 can rise
    above the prior odds (``None`` when S2 is empty and the bound is vacuous).
    """

    s1: tuple[str, ...]
    s2: tuple[str, ...]
    alpha: Fraction
    prior_weights: tuple[Fraction, ...]
    odds_increase: Fraction | None

    def describe(self) -> str:
        if not self.s2:
            return "vacuous: every coefficient is nonnegative"
        a = "" if self.alpha == 1 else f"{self.alpha} * "
        return (f"P(data in {{{', '.join(self.s2)}}} | w) <= {a}P(data in {{{', '.join(self.s1)}}} | w); "
                f"posterior odds rise by at most {self.odds_increase}")


def interpret_constraint(c: LinearConstraint, labels: Sequence[str]) -> SemanticStatement:
    if c.relation is Relation.EQ:
        raise ParseError("equalities are read as pairs of inequalities; split them first")
    if c.trivial:
        raise AllZero("constraint has no nonzero coefficient")
    if len(labels) != len(c.coefficients):
        raise DimensionMismatch(f"{len(labels)} labels for {len(c.coefficients)} coefficients")
    total = sum((abs(v) for v in c.coefficients), Fraction(0))
    weights = tuple(abs(v) / total for v in c.coefficients)
    s1 = tuple(lab for lab, v in zip(labels, c.coefficients) if v > 0)
    s2 = tuple(lab for lab, v in zip(labels, c.coefficients) if v < 0)
    w1 = sum((w for w, v in zip(weights, c.coefficients) if v > 0), Fraction(0))
    w2 = sum((w for w, v in zip(weights, c.coefficients) if v < 0), Fraction(0))
    return SemanticStatement(s1, s2, Fraction(1), weights, (w1 / w2) if w2 else None)


def check_rows(m: LabeledMatrix, system: ConstraintSystem) -> dict[str, Verdict]:
    if m.shape[1] != len(system.labels):
        raise DimensionMismatch(f"mechanism over {m.shape[1]} datasets against a system over {len(system.labels)}")
    return {label: system.check(row) for label, row in zip(m.row_labels, m.entries)}
