"""Matrix representations of finite-domain mechanisms.

Randomized response runs over bit strings in reverse-lexicographic order
(``11..1`` first).  PRAM/FRAPP and the sampling mechanisms run over tuple
sequences in lexicographic order, with the missing value ``"?"`` sorted last.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainTooLarge, ParseError, SingularAtHalf
from .numerics import (
    DatasetOrder,
    LabeledMatrix,
    MechanismMatrix,
    check_dim,
    kronecker_power,
    parse_rational,
)

MISSING = "?"
MAX_BITS = 12


@dataclass(frozen=True)
class RRSpec:
    p: Fraction
    k: int

    def __post_init__(self):
        p = parse_rational(self.p)
        object.__setattr__(self, "p", p)
        if not 0 <= p <= 1:
            raise ParseError(f"p must lie in [0, 1], got {p}")
        if not isinstance(self.k, int) or self.k < 1:
            raise ParseError(f"k must be a positive integer, got {self.k!r}")
        if self.k > MAX_BITS:
            raise DomainTooLarge(f"k = {self.k} exceeds {MAX_BITS} bits")
        check_dim(2 ** self.k)

    @property
    def effective_p(self) -> Fraction:
        """``max(p, 1 - p)``: RR_p and RR_{1-p} have the same closure."""
        return max(self.p, 1 - self.p)


@dataclass(frozen=True)
class PramSpec:
    q: MechanismMatrix
    k: int

    def __post_init__(self):
        n, n2 = self.q.shape
        if n != n2:
            raise ParseError(f"PRAM transition matrix must be square, got {n}x{n2}")
        if tuple(self.q.row_labels) != tuple(self.q.col_labels):
            raise ParseError("PRAM transition matrix must use the same labels for rows and columns")
        if not isinstance(self.k, int) or self.k < 1:
            raise ParseError(f"k must be a positive integer, got {self.k!r}")
        check_dim(n ** self.k)


@dataclass(frozen=True)
class SamplingSpec:
    p: Fraction
    n_tuple_values: int
    w: int

    def __post_init__(self):
        p = parse_rational(self.p)
        object.__setattr__(self, "p", p)
        if not 0 < p <= 1:
            raise ParseError(f"retention probability must lie in (0, 1], got {p}")
        if self.n_tuple_values < 1 or self.w < 1:
            raise ParseError("need at least one tuple value and one individual")
        if self.n_tuple_values > len(string.ascii_lowercase):
            raise ParseError("at most 26 tuple values are supported")
        check_dim((self.n_tuple_values + 1) ** self.w)

    @property
    def tuple_values(self) -> tuple[str, ...]:
        return tuple(string.ascii_lowercase[: self.n_tuple_values])

    @property
    def symbols(self) -> tuple[str, ...]:
        return self.tuple_values + (MISSING,)


def label_separator(labels) -> str:
    """Concatenate single-character labels directly, otherwise join with commas."""
    return "" if all(len(x) == 1 for x in labels) else ","


def split_label(label: str, sep: str) -> tuple[str, ...]:
    return tuple(label) if sep == "" else tuple(label.split(sep))


def bit_labels(k: int) -> tuple[str, ...]:
    """All length-k bit strings, ``11..1`` first."""
    n = 2 ** k
    return tuple(format(n - 1 - i, f"0{k}b") for i in range(n))


def tuple_labels(symbols, w: int) -> tuple[str, ...]:
    sep = label_separator(symbols)
    return tuple(sep.join(t) for t in itertools.product(symbols, repeat=w))


def agreements(a: str, b: str) -> int:
    return sum(x == y for x, y in zip(a, b))


def bernoulli_block(p: Fraction) -> LabeledMatrix:
    p = Fraction(p)
    return LabeledMatrix(("1", "0"), ("1", "0"), ((p, 1 - p), (1 - p, p)))


def rr_matrix(spec: RRSpec) -> MechanismMatrix:
    """Randomized response on k bits: the k-fold Kronecker power of B(p)."""
    m = kronecker_power(bernoulli_block(spec.p), spec.k)
    return MechanismMatrix.from_matrix(m, DatasetOrder.REVERSE_LEX_BITS)


def rr_inverse(spec: RRSpec) -> LabeledMatrix:
    """Closed-form inverse of :func:`rr_matrix`.

    Entry ``(i, j)`` is ``p^a (p-1)^(k-a) / (2p-1)^k`` where ``a`` counts the
    positions in which ``D_i`` and ``D_j`` agree, i.e. the RR entry with every
    ``1-p`` replaced by ``p-1``.
    """
    p, k = spec.p, spec.k
    if p == Fraction(1, 2):
        raise SingularAtHalf("RR_1/2 is not invertible")
    labels = bit_labels(k)
    denom = (2 * p - 1) ** k
    powers = [p ** a * (p - 1) ** (k - a) / denom for a in range(k + 1)]
    entries = tuple(tuple(powers[agreements(di, dj)] for dj in labels) for di in labels)
    return LabeledMatrix(labels, labels, entries)


def pram_matrix(spec: PramSpec) -> MechanismMatrix:
    """PRAM on k tuples: the k-fold Kronecker power of the per-tuple matrix."""
    sep = label_separator(spec.q.col_labels)
    m = kronecker_power(spec.q, spec.k, sep)
    return MechanismMatrix.from_matrix(m, DatasetOrder.LEX_TUPLES)


def check_gamma_amplification(q: LabeledMatrix, gamma) -> bool:
    """True iff ``p*col_i - (1-p)*col_j >= 0`` for all columns, ``p = gamma/(1+gamma)``."""
    gamma = parse_rational(gamma)
    if gamma < 1:
        raise ParseError(f"gamma must be >= 1, got {gamma}")
    p = gamma / (1 + gamma)
    cols = q.columns()
    for ci in cols:
        for cj in cols:
            if any(p * a - (1 - p) * b < 0 for a, b in zip(ci, cj)):
                return False
    return True


def drop_block(p: Fraction, n: int) -> LabeledMatrix:
    """The (N+1)x(N+1) matrix that keeps a tuple w.p. p and blanks it otherwise."""
    p = Fraction(p)
    symbols = tuple(string.ascii_lowercase[:n]) + (MISSING,)
    rows = []
    for i in range(n + 1):
        row = []
        for j in range(n + 1):
            if i == j:
                row.append(Fraction(1) if i == n else p)
            elif i == n:
                row.append(1 - p)
            else:
                row.append(Fraction(0))
        rows.append(tuple(row))
    return LabeledMatrix(symbols, symbols, tuple(rows))


def drop_matrix(spec: SamplingSpec) -> MechanismMatrix:
    sep = label_separator(spec.symbols)
    m = kronecker_power(drop_block(spec.p, spec.n_tuple_values), spec.w, sep)
    return MechanismMatrix.from_matrix(m, DatasetOrder.LEX_TUPLES)


def _sorted_label(label: str, symbols, sep: str) -> str:
    rank = {s: i for i, s in enumerate(symbols)}
    return sep.join(sorted(split_label(label, sep), key=rank.__getitem__))


def sort_matrix(n_tuple_values: int, w: int) -> MechanismMatrix:
    """0/1 matrix sending every dataset to its sorted version (``?`` last)."""
    spec = SamplingSpec(Fraction(1), n_tuple_values, w)
    symbols = spec.symbols
    sep = label_separator(symbols)
    labels = tuple_labels(symbols, w)
    index = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)
    cols = [index[_sorted_label(lab, symbols, sep)] for lab in labels]
    entries = tuple(tuple(Fraction(int(cols[j] == i)) for j in range(n)) for i in range(n))
    return MechanismMatrix(labels, labels, entries, DatasetOrder.LEX_TUPLES)


def sampling_matrix(spec: SamplingSpec) -> MechanismMatrix:
    """Drop each tuple independently, then sort."""
    return drop_matrix(spec).postprocess(sort_matrix(spec.n_tuple_values, spec.w))


def position_permutation_matrix(n_tuple_values: int, w: int, perm) -> MechanismMatrix:
    """0/1 matrix moving the tuple in position ``perm[i]`` to position ``i``."""
    perm = tuple(perm)
    if sorted(perm) != list(range(w)):
        raise ParseError(f"{perm} is not a permutation of {w} positions")
    spec = SamplingSpec(Fraction(1), n_tuple_values, w)
    sep = label_separator(spec.symbols)
    labels = tuple_labels(spec.symbols, w)
    index = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)
    target = []
    for lab in labels:
        parts = split_label(lab, sep)
        target.append(index[sep.join(parts[perm[i]] for i in range(w))])
    entries = tuple(tuple(Fraction(int(target[j] == i)) for j in range(n)) for i in range(n))
    return MechanismMatrix(labels, labels, entries, DatasetOrder.LEX_TUPLES)
