"""Exact rational matrices with labeled rows and columns.

Every finite-domain computation in privcone runs on :class:`fractions.Fraction`
so that cone membership at the boundary (dot products that are exactly zero)
is decided without rounding.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass
from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, Sequence

from .errors import DimensionMismatch, DomainTooLarge, NotStochastic, ParseError, SingularMatrix

Rational = Fraction

DEFAULT_MAX_DIM = 4096


def max_dim() -> int:
    """Largest allowed row or column count (``PRIVCONE_MAX_DIM`` overrides)."""
    raw = os.environ.get("PRIVCONE_MAX_DIM")
    if raw is None:
        return DEFAULT_MAX_DIM
    try:
        value = int(raw)
    except ValueError as exc:
        raise ParseError(f"PRIVCONE_MAX_DIM must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ParseError("PRIVCONE_MAX_DIM must be positive")
    return value


def check_dim(n: int, what: str = "domain") -> None:
    cap = max_dim()
    if n > cap:
        raise DomainTooLarge(f"{what} of size {n} exceeds the cap of {cap}")


def parse_rational(value) -> Fraction:
    """Parse ``"num/den"``, an integer, or a decimal string exactly.

    Floats are rejected unless they are integral: a binary float almost never
    denotes the rational the user meant.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ParseError(f"not a rational: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if value.is_integer():
            return Fraction(int(value))
        raise ParseError(f"rationals must be given as strings like '2/3', got float {value!r}")
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"not a rational: {value!r}") from exc
    raise ParseError(f"not a rational: {value!r}")


def render_rational(r: Fraction) -> str:
    return str(Fraction(r))


class DatasetOrder(str, enum.Enum):
    """Canonical enumeration of the input datasets of a mechanism."""

    REVERSE_LEX_BITS = "reverse-lex-bits"
    LEX_TUPLES = "lex-tuples"


@dataclass(frozen=True)
class LabeledMatrix:
    """Dense matrix of exact rationals with opaque string labels.

    Columns are indexed by datasets and rows by outputs when the matrix is a
    mechanism.  Labels are kept in the order supplied; nothing here reorders.
    """

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    entries: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        rows = tuple(str(x) for x in self.row_labels)
        cols = tuple(str(x) for x in self.col_labels)
        entries = tuple(tuple(Fraction(v) for v in row) for row in self.entries)
        if len(entries) != len(rows):
            raise DimensionMismatch(f"{len(entries)} entry rows for {len(rows)} row labels")
        for row in entries:
            if len(row) != len(cols):
                raise DimensionMismatch(f"entry row of length {len(row)} for {len(cols)} column labels")
        if len(set(rows)) != len(rows):
            raise ValueError("duplicate row labels")
        if len(set(cols)) != len(cols):
            raise ValueError("duplicate column labels")
        object.__setattr__(self, "row_labels", rows)
        object.__setattr__(self, "col_labels", cols)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def identity(cls, labels: Sequence[str]) -> "LabeledMatrix":
        n = len(labels)
        return cls(tuple(labels), tuple(labels),
                   tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n)))

    @classmethod
    def zeros(cls, row_labels: Sequence[str], col_labels: Sequence[str]) -> "LabeledMatrix":
        return cls(tuple(row_labels), tuple(col_labels),
                   tuple(tuple(Fraction(0) for _ in col_labels) for _ in row_labels))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.row_labels), len(self.col_labels)

    def row(self, i: int) -> tuple[Fraction, ...]:
        return self.entries[i]

    def column(self, j: int) -> tuple[Fraction, ...]:
        return tuple(row[j] for row in self.entries)

    def columns(self) -> list[tuple[Fraction, ...]]:
        return [self.column(j) for j in range(len(self.col_labels))]

    def entry(self, row_label: str, col_label: str) -> Fraction:
        return self.entries[self.row_labels.index(row_label)][self.col_labels.index(col_label)]

    def transpose(self) -> "LabeledMatrix":
        return LabeledMatrix(self.col_labels, self.row_labels, tuple(zip(*self.entries)) or ())

    def relabeled(self, row_labels=None, col_labels=None) -> "LabeledMatrix":
        return LabeledMatrix(tuple(row_labels or self.row_labels),
                             tuple(col_labels or self.col_labels), self.entries)

    def __matmul__(self, other: "LabeledMatrix") -> "LabeledMatrix":
        if self.shape[1] != other.shape[0]:
            raise DimensionMismatch(f"cannot multiply {self.shape} by {other.shape}")
        cols = other.columns()
        out = tuple(tuple(sum((a * b for a, b in zip(row, col) if a and b), Fraction(0)) for col in cols)
                    for row in self.entries)
        return LabeledMatrix(self.row_labels, other.col_labels, out)

    def __add__(self, other: "LabeledMatrix") -> "LabeledMatrix":
        if self.shape != other.shape:
            raise DimensionMismatch(f"cannot add {self.shape} and {other.shape}")
        return LabeledMatrix(self.row_labels, self.col_labels,
                             tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(self.entries, other.entries)))

    def scaled(self, c) -> "LabeledMatrix":
        c = Fraction(c)
        return LabeledMatrix(self.row_labels, self.col_labels,
                             tuple(tuple(c * v for v in row) for row in self.entries))

    def column_sums(self) -> tuple[Fraction, ...]:
        return tuple(sum(col, Fraction(0)) for col in self.columns())

    def is_column_stochastic(self) -> bool:
        if any(v < 0 for row in self.entries for v in row):
            return False
        return all(s == 1 for s in self.column_sums())

    def select_columns(self, labels: Sequence[str]) -> "LabeledMatrix":
        idx = [self.col_labels.index(lab) for lab in labels]
        return LabeledMatrix(self.row_labels, tuple(labels),
                             tuple(tuple(row[j] for j in idx) for row in self.entries))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.shape[0]}x{self.shape[1]})"


@dataclass(frozen=True, repr=False)
class MechanismMatrix(LabeledMatrix):
    """Column-stochastic matrix representation of a mechanism.

    Entry ``(i, j)`` is the probability of output ``row_labels[i]`` on input
    dataset ``col_labels[j]``.
    """

    order: DatasetOrder | None = None

    def __post_init__(self):
        super().__post_init__()
        for row in self.entries:
            for v in row:
                if v < 0:
                    raise NotStochastic(f"negative entry {v}")
        for label, s in zip(self.col_labels, self.column_sums()):
            if s != 1:
                raise NotStochastic(f"column {label!r} sums to {s}")

    @classmethod
    def from_matrix(cls, m: LabeledMatrix, order: DatasetOrder | None = None) -> "MechanismMatrix":
        return cls(m.row_labels, m.col_labels, m.entries, order)

    def postprocess(self, a: LabeledMatrix) -> "MechanismMatrix":
        """Matrix of running this mechanism and then the channel ``a``."""
        return MechanismMatrix.from_matrix(a @ self, self.order)


def _join(a: str, b: str, sep: str) -> str:
    return f"{a}{sep}{b}"


def kronecker(a: LabeledMatrix, b: LabeledMatrix, sep: str = "") -> LabeledMatrix:
    """Kronecker product with ``a`` as the major (block) index.

    Labels of the product are ``label_a + sep + label_b``.
    """
    m, n = a.shape
    mm, nn = b.shape
    check_dim(m * mm, "row count")
    check_dim(n * nn, "column count")
    rows = tuple(_join(x, y, sep) for x in a.row_labels for y in b.row_labels)
    cols = tuple(_join(x, y, sep) for x in a.col_labels for y in b.col_labels)
    entries = tuple(
        tuple(av * bv for av in arow for bv in brow)
        for arow in a.entries for brow in b.entries
    )
    return LabeledMatrix(rows, cols, entries)


def kronecker_power(a: LabeledMatrix, k: int, sep: str = "") -> LabeledMatrix:
    if k < 1:
        raise ValueError("Kronecker power needs k >= 1")
    check_dim(a.shape[0] ** k, "row count")
    check_dim(a.shape[1] ** k, "column count")
    out = a
    for _ in range(k - 1):
        out = kronecker(out, a, sep)
    return out


def _clear_denominators(entries) -> tuple[list[list[int]], int]:
    scale = 1
    for row in entries:
        for v in row:
            scale = lcm(scale, v.denominator)
    return [[int(v * scale) for v in row] for row in entries], scale


def invert(m: LabeledMatrix) -> LabeledMatrix:
    """Exact inverse by fraction-free Gauss-Jordan elimination.

    The matrix is scaled to integers, reduced with Bareiss' division-free
    update (every intermediate division is exact), and only the final
    ``adjugate / determinant`` step produces fractions.  The inverse has the
    row labels of ``m``'s columns and the column labels of ``m``'s rows.
    """
    n, ncols = m.shape
    if n != ncols:
        raise DimensionMismatch(f"cannot invert a {n}x{ncols} matrix")
    a, scale = _clear_denominators(m.entries)
    aug = [row + [int(i == j) for j in range(n)] for i, row in enumerate(a)]
    width = 2 * n
    prev = 1
    for k in range(n):
        pivot = next((r for r in range(k, n) if aug[r][k] != 0), None)
        if pivot is None:
            raise SingularMatrix(f"matrix is singular (no pivot in column {m.col_labels[k]!r})")
        if pivot != k:
            aug[k], aug[pivot] = aug[pivot], aug[k]
        pk = aug[k]
        d = pk[k]
        for i in range(n):
            if i == k:
                continue
            ri = aug[i]
            f = ri[k]
            aug[i] = [(d * ri[j] - f * pk[j]) // prev for j in range(width)]
        prev = d
    det = prev
    inv = tuple(tuple(Fraction(aug[i][n + j] * scale, aug[i][i]) for j in range(n)) for i in range(n))
    assert all(aug[i][i] == det for i in range(n))
    return LabeledMatrix(m.col_labels, m.row_labels, inv)


def column_l1_norms(m: LabeledMatrix) -> tuple[Fraction, ...]:
    return tuple(sum((abs(v) for v in col), Fraction(0)) for col in m.columns())


def dot(x: Sequence[Fraction], y: Sequence[Fraction]) -> Fraction:
    if len(x) != len(y):
        raise DimensionMismatch(f"vectors of length {len(x)} and {len(y)}")
    return sum((a * b for a, b in zip(x, y) if a and b), Fraction(0))


def integer_scaled(vec: Iterable[Fraction]) -> list[int]:
    """Positive integer multiple of ``vec`` (same signs, same ratios)."""
    vec = [Fraction(v) for v in vec]
    scale = 1
    for v in vec:
        scale = lcm(scale, v.denominator)
    ints = [int(v * scale) for v in vec]
    g = 0
    for v in ints:
        g = gcd(g, v)
    if g > 1:
        ints = [v // g for v in ints]
    return ints
