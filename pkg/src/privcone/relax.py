"""Exact Fourier-Motzkin elimination over homogeneous constraint systems."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import IncompleteDerivation, ParseError
from .mechanisms import RRSpec
from .rowcone import ConstraintSystem, LinearConstraint, Provenance, Relation, rr_constraints


@dataclass(frozen=True)
class EliminationTrace:
    """One elimination step.

    ``parents[i]`` names the input constraints behind output constraint i:
    a 1-tuple for a carried constraint, or ``(upper, lower)`` for a
    combination of a positive- and a negative-coefficient parent.
    """

    variable: str
    parents: tuple[tuple[int, ...], ...]
    source: ConstraintSystem
    result: ConstraintSystem
    ancestors: tuple[frozenset, ...] = ()


def _index(system: ConstraintSystem, variable) -> int:
    if isinstance(variable, int):
        if not 0 <= variable < len(system.labels):
            raise ParseError(f"variable index {variable} out of range")
        return variable
    try:
        return system.labels.index(str(variable))
    except ValueError:
        raise ParseError(f"unknown variable {variable!r}") from None


def _inequalities(system: ConstraintSystem) -> ConstraintSystem:
    if any(c.relation is Relation.GT for c in system):
        raise ParseError("strict constraints cannot be eliminated")
    if any(c.relation is Relation.EQ for c in system):
        return system.split_equalities()
    return system


def fourier_motzkin_eliminate(system: ConstraintSystem, variable,
                              ancestors: Sequence[frozenset] | None = None,
                              max_ancestors: int | None = None) -> EliminationTrace:
    """Project out ``variable``; equalities are split into two inequalities first.

    ``ancestors`` optionally tags each input constraint with the set of
    original constraints it was built from.  Combinations whose tag exceeds
    ``max_ancestors`` are dropped (Chernikov's rule), which removes only
    redundant constraints.
    """
    system = _inequalities(system)
    v = _index(system, variable)
    cons = system.constraints
    if ancestors is None:
        ancestors = [frozenset([i]) for i in range(len(cons))]
    if len(ancestors) != len(cons):
        raise ParseError("one ancestor set per constraint")
    pos = [i for i, c in enumerate(cons) if c.coefficients[v] > 0]
    neg = [i for i, c in enumerate(cons) if c.coefficients[v] < 0]
    candidates: list[tuple[LinearConstraint, tuple[int, ...], frozenset]] = []
    for i, c in enumerate(cons):
        if c.coefficients[v] == 0:
            candidates.append((c, (i,), ancestors[i]))
    for i, j in itertools.product(pos, neg):
        hist = ancestors[i] | ancestors[j]
        if max_ancestors is not None and len(hist) > max_ancestors:
            continue
        a, b = cons[i].coefficients, cons[j].coefficients
        # |n_v| * P + p_v * N cancels the variable with nonnegative weights
        wa, wb = -b[v], a[v]
        combo = tuple(wa * x + wb * y for x, y in zip(a, b))
        candidates.append((LinearConstraint(combo, Relation.GE, f"({i})+({j})"), (i, j), hist))
    kept, parents, hists, seen = [], [], [], {}
    for c, par, hist in candidates:
        if c.trivial:
            continue
        n = c.normalized()
        key = n.coefficients
        if key in seen:
            slot = seen[key]
            if len(hist) < len(hists[slot]):
                parents[slot], hists[slot] = par, hist
            continue
        seen[key] = len(kept)
        kept.append(n)
        parents.append(par)
        hists.append(hist)
    result = ConstraintSystem(system.labels, tuple(kept), system.order, Provenance.APPROXIMATION)
    assert len(result) == len(kept)
    return EliminationTrace(system.labels[v], tuple(parents), system, result, tuple(hists))


def eliminate_all(system: ConstraintSystem, variables: Sequence, prune: bool = True) -> list[EliminationTrace]:
    """Eliminate ``variables`` in order, pruning with Chernikov's rule by default."""
    traces = []
    ancestors = None
    for step, var in enumerate(variables, 1):
        t = fourier_motzkin_eliminate(system, var, ancestors, step + 1 if prune else None)
        traces.append(t)
        system, ancestors = t.result, t.ancestors
    return traces


@dataclass(frozen=True)
class DerivationStep:
    pair: tuple[str, str]
    traces: tuple[EliminationTrace, ...]


@dataclass(frozen=True)
class Derivation:
    alpha: Fraction
    system: ConstraintSystem
    steps: tuple[DerivationStep, ...]


def _hamming1_pairs(labels: Sequence[str]) -> list[tuple[int, int]]:
    return [(i, j) for i, j in itertools.combinations(range(len(labels)), 2)
            if sum(a != b for a, b in zip(labels[i], labels[j])) == 1]


def derive_dp_trace(spec: RRSpec) -> Derivation:
    """Relax the RR row cone down to pairwise ratio constraints, with traces.

    For every pair of neighboring bit strings, all other coordinates are
    eliminated from the exact cone; two-variable constraints on that pair
    are kept.  Every ``x_i <= (p/(1-p)) x_j`` must appear, otherwise
    :class:`IncompleteDerivation` is raised.
    """
    if spec.k > 3:
        raise ParseError("the elimination walkthrough is supported for k <= 3")
    full = rr_constraints(spec)
    labels = full.labels
    p = spec.effective_p
    alpha = p / (1 - p)
    kept: list[LinearConstraint] = []
    steps = []
    for i, j in _hamming1_pairs(labels):
        others = [v for v in range(len(labels)) if v not in (i, j)]
        traces = eliminate_all(full, others)
        steps.append(DerivationStep((labels[i], labels[j]), tuple(traces)))
        for c in traces[-1].result:
            nz = [t for t, v in enumerate(c.coefficients) if v]
            if sorted(nz) == [i, j] and c.coefficients[i] * c.coefficients[j] < 0:
                kept.append(c)
    system = ConstraintSystem(labels, tuple(kept), full.order, Provenance.APPROXIMATION)
    keys = system.keys()
    for i, j in _hamming1_pairs(labels):
        for a, b in ((i, j), (j, i)):
            need = [Fraction(0)] * len(labels)
            need[b] = alpha
            need[a] = Fraction(-1)
            target = LinearConstraint(tuple(need)).normalized()
            if (target.coefficients, Relation.GE) not in keys:
                raise IncompleteDerivation(
                    f"x_{labels[a]} <= {alpha} x_{labels[b]} is not among the projected constraints")
    return Derivation(alpha, system, tuple(steps))


def derive_dp_from_rr(spec: RRSpec) -> ConstraintSystem:
    return derive_dp_trace(spec).system
