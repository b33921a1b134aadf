import random
from fractions import Fraction

import pytest
from hypothesis import strategies as st

from privcone.numerics import LabeledMatrix, MechanismMatrix


def random_stochastic(rng: random.Random, n_rows: int, col_labels, row_labels=None, max_weight: int = 9,
                      sparsity: float = 0.0) -> MechanismMatrix:
    """Column-stochastic rational matrix with small integer weights."""
    row_labels = row_labels or tuple(f"w{i}" for i in range(n_rows))
    cols = []
    for _ in col_labels:
        weights = [0 if rng.random() < sparsity else rng.randint(0, max_weight) for _ in range(n_rows)]
        if not any(weights):
            weights[rng.randrange(n_rows)] = 1
        total = sum(weights)
        cols.append([Fraction(w, total) for w in weights])
    entries = tuple(tuple(col[i] for col in cols) for i in range(n_rows))
    return MechanismMatrix(tuple(row_labels), tuple(col_labels), entries)


def random_rational_vector(rng: random.Random, n: int, lo: int = -9, hi: int = 9, den: int = 7):
    return tuple(Fraction(rng.randint(lo * den, hi * den), rng.randint(1, den)) for _ in range(n))


def brute_matmul(a, b):
    """Schoolbook product on raw nested lists; independent of LabeledMatrix."""
    return [[sum((a[i][t] * b[t][j] for t in range(len(b))), Fraction(0)) for j in range(len(b[0]))]
            for i in range(len(a))]


def identity_entries(n):
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


@pytest.fixture
def rng():
    return random.Random(20240611)


rationals = st.fractions(min_value=-20, max_value=20, max_denominator=12)
probabilities = st.fractions(min_value=0, max_value=1, max_denominator=12)


@st.composite
def stochastic_matrices(draw, n_rows=None, n_cols=None, max_dim=4):
    r = draw(st.integers(1, max_dim)) if n_rows is None else n_rows
    c = draw(st.integers(1, max_dim)) if n_cols is None else n_cols
    cols = []
    for _ in range(c):
        w = draw(st.lists(st.integers(0, 6), min_size=r, max_size=r))
        if not any(w):
            w[0] = 1
        s = sum(w)
        cols.append([Fraction(x, s) for x in w])
    entries = tuple(tuple(col[i] for col in cols) for i in range(r))
    return LabeledMatrix(tuple(f"r{i}" for i in range(r)), tuple(f"c{j}" for j in range(c)), entries)


# acceptance criteria append "criterion N: PASS|FAIL ..." lines here
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
