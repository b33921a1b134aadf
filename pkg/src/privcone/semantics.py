"""Brute-force Bayesian attackers.

Priors, posteriors, and exhaustive checks of the parity-protection and
differential-privacy guarantees that follow from a row cone.  Everything is
exact except the ``e^eps`` comparison in :func:`dp_check`.
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import DimensionMismatch, OrderMismatch, ParseError, UnknownTupleValue, ZeroEvidence
from .mechanisms import (
    MISSING,
    SamplingSpec,
    bit_labels,
    label_separator,
    split_label,
    tuple_labels,
)
from .numerics import DatasetOrder, LabeledMatrix, MechanismMatrix, dot, integer_scaled, parse_rational

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BitPrior:
    """Independent bits; ``q[i]`` is the prior probability that bit i+1 is 1."""

    q: tuple[Fraction, ...]

    def __post_init__(self):
        q = tuple(parse_rational(v) for v in self.q)
        if not q:
            raise ParseError("a bit prior needs at least one bit")
        for v in q:
            if not 0 <= v <= 1:
                raise ParseError(f"bit probability {v} outside [0, 1]")
        object.__setattr__(self, "q", q)

    @property
    def k(self) -> int:
        return len(self.q)


@dataclass(frozen=True)
class ParityQuery:
    """Subset of 1-based bit positions whose parity the attacker cares about."""

    j: frozenset[int]

    def __post_init__(self):
        j = frozenset(int(v) for v in self.j)
        if not j:
            raise ParseError("parity query needs a nonempty subset")
        if min(j) < 1:
            raise ParseError("bit positions are 1-based")
        object.__setattr__(self, "j", j)

    def validate(self, k: int) -> None:
        if max(self.j) > k:
            raise ParseError(f"bit {max(self.j)} out of range for k = {k}")

    def __str__(self) -> str:
        return "{" + ",".join(str(v) for v in sorted(self.j)) + "}"


@dataclass(frozen=True)
class TuplePairPrior:
    """Two remaining candidates per tuple; ``q[i]`` is the probability of ``pairs[i][0]``."""

    pairs: tuple[tuple[str, str], ...]
    q: tuple[Fraction, ...]

    def __post_init__(self):
        pairs = tuple((str(a), str(b)) for a, b in self.pairs)
        q = tuple(parse_rational(v) for v in self.q)
        if len(pairs) != len(q):
            raise ParseError("one probability per tuple pair")
        for a, b in pairs:
            if a == b:
                raise ParseError(f"candidate pair ({a}, {b}) must be two distinct values")
        if any(not 0 <= v <= 1 for v in q):
            raise ParseError("pair probabilities must lie in [0, 1]")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "q", q)

    @property
    def bit_prior(self) -> BitPrior:
        return BitPrior(self.q)


class Outcome(str, enum.Enum):
    HOLDS = "holds"
    VIOLATED = "violated"


@dataclass(frozen=True)
class Witness:
    output: str
    prior: tuple
    query: str
    prior_preference: tuple[Fraction, Fraction]
    posterior_preference: tuple[Fraction, Fraction]


@dataclass
class GuaranteeReport:
    verdict: Outcome = Outcome.HOLDS
    witnesses: list[Witness] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)
    checked: int = 0

    @property
    def holds(self) -> bool:
        return self.verdict is Outcome.HOLDS

    def add(self, w: Witness) -> None:
        self.witnesses.append(w)
        self.verdict = Outcome.VIOLATED

    def merge(self, other: "GuaranteeReport") -> None:
        for w in other.witnesses:
            self.add(w)
        self.skipped.extend(other.skipped)
        self.checked += other.checked


def _bits(label: str) -> tuple[int, ...]:
    return tuple(int(c) for c in label)


def bit_prior_to_dataset_prior(prior: BitPrior, order: DatasetOrder = DatasetOrder.REVERSE_LEX_BITS) -> tuple[Fraction, ...]:
    if order is not DatasetOrder.REVERSE_LEX_BITS:
        raise OrderMismatch(f"bit priors are defined over reverse-lex bit strings, not {order}")
    out = []
    for label in bit_labels(prior.k):
        prob = Fraction(1)
        for q, b in zip(prior.q, _bits(label)):
            prob *= q if b else 1 - q
        out.append(prob)
    return tuple(out)


def posterior(prior: Sequence[Fraction], likelihood: Sequence[Fraction]) -> tuple[Fraction, ...]:
    if len(prior) != len(likelihood):
        raise DimensionMismatch(f"prior of length {len(prior)} against likelihood of length {len(likelihood)}")
    joint = [Fraction(a) * Fraction(b) for a, b in zip(prior, likelihood)]
    evidence = sum(joint, Fraction(0))
    if evidence == 0:
        raise ZeroEvidence("output has zero probability under the prior")
    return tuple(v / evidence for v in joint)


def _parity_signs(labels: Sequence[str], query: ParityQuery) -> list[int]:
    idx = [j - 1 for j in sorted(query.j)]
    return [1 if sum(int(lab[i]) for i in idx) % 2 == 0 else -1 for lab in labels]


def parity_split(dist: Sequence[Fraction], query: ParityQuery, labels: Sequence[str] | None = None) -> tuple[Fraction, Fraction]:
    """``(P(even), P(odd))`` of the bits in ``query`` under ``dist``."""
    if labels is None:
        k = len(dist).bit_length() - 1
        if 2 ** k != len(dist):
            raise DimensionMismatch(f"{len(dist)} is not a power of two")
        labels = bit_labels(k)
    query.validate(len(labels[0]))
    even = odd = Fraction(0)
    for v, s in zip(dist, _parity_signs(labels, query)):
        if s > 0:
            even += v
        else:
            odd += v
    return even, odd


def parity_split_closed_form(prior: BitPrior, query: ParityQuery) -> tuple[Fraction, Fraction]:
    prod = Fraction(1)
    for j in query.j:
        prod *= 1 - 2 * prior.q[j - 1]
    return (1 + prod) / 2, (1 - prod) / 2


def _preference_kept(prior_diff: Fraction, post_diff) -> bool:
    # weak inequalities: a prior tie demands a posterior tie
    if prior_diff > 0:
        return post_diff >= 0
    if prior_diff < 0:
        return post_diff <= 0
    return post_diff == 0


def verify_parity_protection(m: LabeledMatrix, prior: BitPrior, query: ParityQuery) -> GuaranteeReport:
    """Check that no output flips the attacker's weak parity preference."""
    k = prior.k
    labels = bit_labels(k)
    if tuple(m.col_labels) != labels:
        raise OrderMismatch("mechanism columns must be the reverse-lex bit strings of length "
                            f"{k}")
    if isinstance(m, MechanismMatrix) and m.order not in (None, DatasetOrder.REVERSE_LEX_BITS):
        raise OrderMismatch(f"mechanism is ordered {m.order.value}")
    query.validate(k)
    dprior = bit_prior_to_dataset_prior(prior)
    signs = _parity_signs(labels, query)
    signed = [s * v for s, v in zip(signs, dprior)]
    prior_pref = parity_split(dprior, query, labels)
    prior_diff = prior_pref[0] - prior_pref[1]
    report = GuaranteeReport()
    for out, row in zip(m.row_labels, m.entries):
        if dot(dprior, row) == 0:
            log.info("output %s has zero evidence under q=%s; skipped", out, prior.q)
            report.skipped.append(out)
            continue
        report.checked += 1
        if _preference_kept(prior_diff, dot(signed, row)):
            continue
        post = parity_split(posterior(dprior, row), query, labels)
        report.add(Witness(out, prior.q, str(query), prior_pref, post))
    return report


def prior_grid(denominator: int, extra: Iterable[Fraction] = ()) -> tuple[Fraction, ...]:
    values = {Fraction(i, denominator) for i in range(denominator + 1)}
    values.update(Fraction(v) for v in extra)
    return tuple(sorted(values))


def admissible(q: Fraction, p: Fraction) -> bool:
    p = max(p, 1 - p)
    return q >= p or q <= 1 - p


def sweep_parity_protection(m: LabeledMatrix, p, grid_denominator: int = 8,
                            max_witnesses: int = 20) -> GuaranteeReport:
    """Exhaustive check over product priors on a grid.

    Every bit prior ``q_i`` ranges over ``{0, 1/d, ..., 1} U {p, 1-p}``; every
    nonempty ``J`` whose bits all have ``q_j >= p`` or ``q_j <= 1-p`` is
    tested against every output.  Rows and priors are scaled to integers once
    so only signs are compared in the inner loop.
    """
    p = parse_rational(p)
    labels = tuple(m.col_labels)
    k = len(labels[0])
    if labels != bit_labels(k):
        raise OrderMismatch("sweep needs a mechanism over reverse-lex bit strings")
    rows = [integer_scaled(row) for row in m.entries]
    grid = prior_grid(grid_denominator, (p, 1 - p))
    subsets = [frozenset(c) for r in range(1, k + 1) for c in itertools.combinations(range(1, k + 1), r)]
    signs = {J: _parity_signs(labels, ParityQuery(J)) for J in subsets}
    report = GuaranteeReport()
    for q in itertools.product(grid, repeat=k):
        bp = BitPrior(q)
        dprior = bit_prior_to_dataset_prior(bp)
        iprior = integer_scaled(dprior)
        for J in subsets:
            if not all(admissible(q[j - 1], p) for j in J):
                continue
            sg = signs[J]
            signed = [s * v for s, v in zip(sg, iprior)]
            prior_diff = sum(signed)
            for out, row in zip(m.row_labels, rows):
                if not any(a and b for a, b in zip(iprior, row)):
                    continue
                report.checked += 1
                post_diff = sum(a * b for a, b in zip(signed, row))
                if _preference_kept(prior_diff, post_diff):
                    continue
                if len(report.witnesses) < max_witnesses:
                    query = ParityQuery(J)
                    idx = m.row_labels.index(out)
                    prior_pref = parity_split(dprior, query, labels)
                    post = parity_split(posterior(dprior, m.entries[idx]), query, labels)
                    report.add(Witness(out, q, str(query), prior_pref, post))
                else:
                    report.verdict = Outcome.VIOLATED
    return report


def find_parity_violation(m: LabeledMatrix, p) -> Witness | None:
    """Search the extreme attackers ``q_i in {p, 1-p}`` over every ``J``."""
    p = parse_rational(p)
    labels = tuple(m.col_labels)
    k = len(labels[0])
    for q in itertools.product((p, 1 - p), repeat=k):
        for r in range(k, 0, -1):
            for J in itertools.combinations(range(1, k + 1), r):
                rep = verify_parity_protection(m, BitPrior(q), ParityQuery(frozenset(J)))
                if rep.witnesses:
                    return rep.witnesses[0]
    return None


def restrict_mechanism(m: LabeledMatrix, pairs: TuplePairPrior) -> LabeledMatrix:
    """Keep the 2^k columns consistent with the candidate pairs.

    Columns are relabeled as bit strings in reverse-lex order, with the first
    candidate of each pair read as bit 1.  Rows are unchanged; the result is
    a likelihood table, not a mechanism.
    """
    k = len(pairs.pairs)
    values = sorted({v for lab in m.col_labels for v in _guess_split(lab, k)})
    sep = label_separator(values)
    known = set(values)
    for a, b in pairs.pairs:
        for v in (a, b):
            if v not in known:
                raise UnknownTupleValue(f"tuple value {v!r} does not occur in the mechanism's datasets")
    cols = []
    for bits in bit_labels(k):
        chosen = [pair[0] if bit == "1" else pair[1] for pair, bit in zip(pairs.pairs, bits)]
        cols.append(sep.join(chosen))
    missing = [c for c in cols if c not in m.col_labels]
    if missing:
        raise UnknownTupleValue(f"dataset {missing[0]!r} is not a column of the mechanism")
    sub = m.select_columns(cols)
    return LabeledMatrix(m.row_labels, bit_labels(k), sub.entries)


def _guess_split(label: str, k: int) -> tuple[str, ...]:
    if "," in label:
        return tuple(label.split(","))
    if len(label) != k:
        raise UnknownTupleValue(f"cannot split dataset label {label!r} into {k} tuples")
    return tuple(label)


@dataclass(frozen=True)
class DPReport:
    holds: bool
    epsilon: float
    max_ratio: Fraction | None
    max_log_ratio: float
    worst_pair: tuple[str, str] | None
    worst_output: str | None

    def __bool__(self) -> bool:
        return self.holds


def hamming_neighbors(labels: Sequence[str]) -> list[tuple[int, int]]:
    """Ordered index pairs of datasets that differ in exactly one position."""
    out = []
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            if len(a) == len(b) and sum(x != y for x, y in zip(a, b)) == 1:
                out.append((i, j))
    return out


def dp_check(m: LabeledMatrix, neighbors: Sequence[tuple[int, int]], epsilon: float,
             rel_tol: float = 1e-12) -> DPReport:
    """Pointwise ``M[w, i] <= e^eps M[w, j]`` over outputs and neighbor pairs.

    The worst ratio is found exactly; only its logarithm is compared with
    ``epsilon`` (with relative tolerance ``rel_tol``).
    """
    if epsilon < 0:
        raise ParseError("epsilon must be nonnegative")
    worst: Fraction | None = Fraction(0)
    worst_pair = worst_out = None
    infinite = False
    for out, row in zip(m.row_labels, m.entries):
        for i, j in neighbors:
            a, b = row[i], row[j]
            if a == 0:
                continue
            if b == 0:
                if not infinite:
                    infinite = True
                    worst_pair, worst_out = (m.col_labels[i], m.col_labels[j]), out
                continue
            r = a / b
            if not infinite and (worst_pair is None or r > worst):
                worst, worst_pair, worst_out = r, (m.col_labels[i], m.col_labels[j]), out
    if infinite:
        return DPReport(False, epsilon, None, math.inf, worst_pair, worst_out)
    log_ratio = math.log(worst) if worst else -math.inf
    holds = log_ratio <= epsilon + rel_tol * max(1.0, abs(epsilon))
    return DPReport(holds, epsilon, worst, log_ratio, worst_pair, worst_out)


def _assignments(records: Sequence[str]) -> list[tuple[str, ...]]:
    return sorted(set(itertools.permutations(records)))


def verify_sampling_parity(m: LabeledMatrix, spec: SamplingSpec, q, records: Sequence[str]) -> GuaranteeReport:
    """Attacker who knows the multiset of records but not who holds which.

    Each individual participated independently with probability ``q``; every
    assignment of ``records`` to individuals is equally likely a priori.  For
    every output with positive evidence this checks (a) the posterior over
    assignments equals the prior and permutation-equivalent datasets keep
    their prior odds, and (b) the number of non-participants is weakly more
    likely even than odd.
    """
    q = parse_rational(q)
    if not 0 <= q <= 1:
        raise ParseError(f"participation probability {q} outside [0, 1]")
    records = tuple(records)
    if len(records) != spec.w:
        raise ParseError(f"{len(records)} records for a population of {spec.w}")
    for r in records:
        if r not in spec.tuple_values:
            raise UnknownTupleValue(f"record value {r!r} not among {spec.tuple_values}")
    symbols = spec.symbols
    sep = label_separator(symbols)
    labels = tuple_labels(symbols, spec.w)
    if tuple(m.col_labels) != labels:
        raise OrderMismatch("mechanism columns must be the lex-ordered sampling datasets")
    index = {lab: i for i, lab in enumerate(labels)}
    sigmas = _assignments(records)
    p_sigma = Fraction(1, len(sigmas))

    # joint prior over (assignment, dataset)
    joint: dict[tuple, dict[int, Fraction]] = {}
    dprior = [Fraction(0)] * len(labels)
    for sigma in sigmas:
        part = {}
        for mask in itertools.product((True, False), repeat=spec.w):
            ds = tuple(v if keep else MISSING for v, keep in zip(sigma, mask))
            prob = p_sigma
            for keep in mask:
                prob *= q if keep else 1 - q
            if prob == 0:
                continue
            i = index[sep.join(ds)]
            part[i] = part.get(i, Fraction(0)) + prob
            dprior[i] += prob
        joint[sigma] = part

    split = [split_label(lab, sep) for lab in labels]
    report = GuaranteeReport()
    for out, row in zip(m.row_labels, m.entries):
        evidence = dot(dprior, row)
        if evidence == 0:
            report.skipped.append(out)
            continue
        report.checked += 1
        post_sigma = {s: sum((v * row[i] for i, v in part.items()), Fraction(0)) / evidence
                      for s, part in joint.items()}
        for s in sigmas:
            if post_sigma[s] != p_sigma:
                report.add(Witness(out, (q, records), f"assignment {sep.join(s)}",
                                   (p_sigma, 1 - p_sigma), (post_sigma[s], 1 - post_sigma[s])))
                break
        for i, j in itertools.combinations(range(len(labels)), 2):
            if dprior[i] and dprior[j] and sorted(split[i]) == sorted(split[j]):
                if row[i] != row[j]:
                    report.add(Witness(out, (q, records), f"odds {labels[i]}:{labels[j]}",
                                       (dprior[i], dprior[j]), (dprior[i] * row[i], dprior[j] * row[j])))
        post = posterior(dprior, row)
        even = sum((v for v, ds in zip(post, split) if sum(t == MISSING for t in ds) % 2 == 0), Fraction(0))
        if even < 1 - even:
            prior_even = sum((v for v, ds in zip(dprior, split) if sum(t == MISSING for t in ds) % 2 == 0),
                             Fraction(0))
            report.add(Witness(out, (q, records), "parity of non-participants",
                               (prior_even, 1 - prior_even), (even, 1 - even)))
    return report


def sampling_threshold(p) -> Fraction:
    """Smallest participation probability covered by the sampling guarantee."""
    p = parse_rational(p)
    return 1 / (2 - p)
