from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from privcone.errors import DimensionMismatch, DomainTooLarge, NotStochastic, ParseError, SingularMatrix
from privcone.numerics import (
    LabeledMatrix,
    MechanismMatrix,
    column_l1_norms,
    integer_scaled,
    invert,
    kronecker,
    kronecker_power,
    max_dim,
    parse_rational,
    render_rational,
)

from conftest import brute_matmul, identity_entries, rationals, stochastic_matrices

F = Fraction


def mat(rows, prefix="c"):
    n, m = len(rows), len(rows[0])
    return LabeledMatrix(tuple(f"r{i}" for i in range(n)), tuple(f"{prefix}{j}" for j in range(m)), rows)


def B(p):
    p = F(p)
    return LabeledMatrix(("1", "0"), ("1", "0"), ((p, 1 - p), (1 - p, p)))


class TestKronecker:
    def test_identity_product_is_identity(self):
        i2 = LabeledMatrix.identity(("a", "b"))
        out = kronecker(i2, i2)
        assert out.entries == LabeledMatrix.identity(out.row_labels).entries
        assert out.shape == (4, 4)

    def test_bernoulli_square_at_two_thirds(self):
        out = kronecker(B(F(2, 3)), B(F(2, 3)))
        assert out.row_labels == ("11", "10", "01", "00")
        expected = [[F(4, 9), F(2, 9), F(2, 9), F(1, 9)],
                    [F(2, 9), F(4, 9), F(1, 9), F(2, 9)],
                    [F(2, 9), F(1, 9), F(4, 9), F(2, 9)],
                    [F(1, 9), F(2, 9), F(2, 9), F(4, 9)]]
        assert [list(r) for r in out.entries] == expected

    def test_a_index_is_major(self):
        a = mat(((1, 2), (3, 4)))
        b = mat(((0, 5), (6, 7)), "d")
        np.testing.assert_array_equal(np.array(kronecker(a, b).entries, dtype=float),
                                      np.kron([[1, 2], [3, 4]], [[0, 5], [6, 7]]))
        assert kronecker(a, b).col_labels == ("c0d0", "c0d1", "c1d0", "c1d1")

    def test_separator_joins_labels(self):
        out = kronecker(B(F(1, 2)), B(F(1, 2)), sep=",")
        assert out.col_labels[1] == "1,0"

    @settings(max_examples=60, deadline=None)
    @given(stochastic_matrices(max_dim=3), stochastic_matrices(max_dim=3))
    def test_stochastic_inputs_give_stochastic_output(self, a, b):
        b = b.relabeled(col_labels=tuple(f"x{j}" for j in range(b.shape[1])))
        out = kronecker(a, b)
        assert out.is_column_stochastic()

    @settings(max_examples=60, deadline=None)
    @given(st.data())
    def test_column_sums_multiply(self, data):
        a = mat(data.draw(st.lists(st.lists(rationals, min_size=2, max_size=2), min_size=2, max_size=3)))
        b = mat(data.draw(st.lists(st.lists(rationals, min_size=3, max_size=3), min_size=1, max_size=2)), "d")
        sums = kronecker(a, b).column_sums()
        expected = tuple(x * y for x in a.column_sums() for y in b.column_sums())
        assert sums == expected

    def test_power_respects_cap(self, monkeypatch):
        monkeypatch.setenv("PRIVCONE_MAX_DIM", "8")
        with pytest.raises(DomainTooLarge):
            kronecker_power(B(F(2, 3)), 4)
        assert kronecker_power(B(F(2, 3)), 3).shape == (8, 8)

    def test_bad_cap_env(self, monkeypatch):
        monkeypatch.setenv("PRIVCONE_MAX_DIM", "lots")
        with pytest.raises(ParseError):
            max_dim()


class TestInvert:
    def test_two_by_two(self):
        inv = invert(B(F(2, 3)))
        assert [list(r) for r in inv.entries] == [[2, -1], [-1, 2]]

    def test_identity(self):
        i3 = LabeledMatrix.identity(("a", "b", "c"))
        assert invert(i3).entries == i3.entries

    def test_singular(self):
        with pytest.raises(SingularMatrix):
            invert(B(F(1, 2)))

    def test_non_square(self):
        with pytest.raises(DimensionMismatch):
            invert(mat(((1, 2, 3), (4, 5, 6))))

    def test_labels_transpose(self):
        m = LabeledMatrix(("o1", "o2"), ("d1", "d2"), ((2, 1), (1, 1)))
        inv = invert(m)
        assert inv.row_labels == ("d1", "d2") and inv.col_labels == ("o1", "o2")

    def test_needs_row_swap(self):
        m = mat(((0, 1, 2), (1, 0, 3), (4, -3, 8)))
        assert brute_matmul([list(r) for r in invert(m).entries], [list(r) for r in m.entries]) == identity_entries(3)

    @settings(max_examples=150, deadline=None)
    @given(st.integers(1, 5).flatmap(lambda n: st.lists(st.lists(rationals, min_size=n, max_size=n),
                                                         min_size=n, max_size=n)))
    def test_exact_two_sided_inverse(self, rows):
        m = mat(rows)
        raw = [list(r) for r in m.entries]
        try:
            inv = invert(m)
        except SingularMatrix:
            assert _det(raw) == 0
            return
        iv = [list(r) for r in inv.entries]
        n = len(raw)
        assert brute_matmul(iv, raw) == identity_entries(n)
        assert brute_matmul(raw, iv) == identity_entries(n)

    @settings(max_examples=40, deadline=None)
    @given(st.data())
    def test_inverse_of_kronecker_is_kronecker_of_inverses(self, data):
        def square(n):
            return data.draw(st.lists(st.lists(rationals, min_size=n, max_size=n), min_size=n, max_size=n))

        a = mat(square(data.draw(st.integers(1, 2))))
        b = mat(square(data.draw(st.integers(1, 2))), "d")
        try:
            ia, ib = invert(a), invert(b)
        except SingularMatrix:
            return
        assert invert(kronecker(a, b)).entries == kronecker(ia, ib).entries


def _det(rows):
    # Laplace expansion, fine for n <= 5
    n = len(rows)
    if n == 1:
        return rows[0][0]
    return sum((-1) ** j * rows[0][j] * _det([r[:j] + r[j + 1:] for r in rows[1:]]) for j in range(n))


class TestNorms:
    def test_example(self):
        assert column_l1_norms(mat(((2, -1), (-1, 2)))) == (3, 3)

    def test_identity(self):
        assert column_l1_norms(LabeledMatrix.identity(("a", "b", "c"))) == (1, 1, 1)

    def test_zero(self):
        assert column_l1_norms(LabeledMatrix.zeros(("a",), ("x", "y"))) == (0, 0)


class TestRationals:
    @given(rationals)
    def test_round_trip(self, r):
        assert parse_rational(render_rational(r)) == r

    def test_lowest_terms(self):
        r = parse_rational("6/8")
        assert (r.numerator, r.denominator) == (3, 4)

    @pytest.mark.parametrize("bad", ["x", "1/0", 0.3, None, True])
    def test_rejects(self, bad):
        with pytest.raises(ParseError):
            parse_rational(bad)

    def test_integral_float_ok(self):
        assert parse_rational(2.0) == 2

    def test_integer_scaled_keeps_ratios(self):
        assert integer_scaled([F(1, 9), F(-2, 9), F(4, 6)]) == [1, -2, 6]


class TestMechanismMatrix:
    def test_rejects_negative(self):
        with pytest.raises(NotStochastic):
            MechanismMatrix(("a", "b"), ("x",), ((F(3, 2),), (F(-1, 2),)))

    def test_rejects_bad_sum(self):
        with pytest.raises(NotStochastic):
            MechanismMatrix(("a", "b"), ("x",), ((F(1, 2),), (F(1, 3),)))

    def test_duplicate_labels(self):
        with pytest.raises(ValueError):
            LabeledMatrix(("a", "a"), ("x",), ((1,), (0,)))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            LabeledMatrix(("a", "b"), ("x",), ((1,),))

    def test_postprocess(self):
        m = MechanismMatrix.from_matrix(B(F(2, 3)))
        flip = LabeledMatrix(("1", "0"), ("1", "0"), ((0, 1), (1, 0)))
        out = m.postprocess(flip)
        assert out.entries == B(F(1, 3)).entries
