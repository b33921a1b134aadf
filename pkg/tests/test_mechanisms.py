import itertools
import random
from fractions import Fraction

import pytest

from privcone.errors import DomainTooLarge, ParseError, SingularAtHalf
from privcone.mechanisms import (
    PramSpec,
    RRSpec,
    SamplingSpec,
    bit_labels,
    check_gamma_amplification,
    drop_matrix,
    position_permutation_matrix,
    pram_matrix,
    rr_inverse,
    rr_matrix,
    sampling_matrix,
    sort_matrix,
    tuple_labels,
)
from privcone.numerics import DatasetOrder, LabeledMatrix, MechanismMatrix, invert

from conftest import random_stochastic

F = Fraction
PS = [F(2, 3), F(3, 4), F(9, 10), F(1, 5)]
SYMBOLS = ("a", "b", "?")
LABELS9 = ("aa", "ab", "a?", "ba", "bb", "b?", "?a", "?b", "??")


def drop_figure(p):
    """The 9x9 drop matrix for T = {a, b}, W = 2, typed out entry by entry."""
    q = 1 - p
    rows = {
        "aa": {"aa": p * p},
        "ab": {"ab": p * p},
        "a?": {"aa": p * q, "ab": p * q, "a?": p},
        "ba": {"ba": p * p},
        "bb": {"bb": p * p},
        "b?": {"ba": p * q, "bb": p * q, "b?": p},
        "?a": {"aa": p * q, "ba": p * q, "?a": p},
        "?b": {"ab": p * q, "bb": p * q, "?b": p},
        "??": {"aa": q * q, "ab": q * q, "a?": q, "ba": q * q, "bb": q * q, "b?": q, "?a": q, "?b": q, "??": 1},
    }
    return [[rows[r].get(c, F(0)) for c in LABELS9] for r in LABELS9]


SORT_FIGURE_ONES = {("aa", "aa"), ("ab", "ab"), ("ab", "ba"), ("a?", "a?"), ("a?", "?a"),
                    ("bb", "bb"), ("b?", "b?"), ("b?", "?b"), ("??", "??")}


class TestRandomizedResponse:
    def test_one_bit(self):
        m = rr_matrix(RRSpec(F(2, 3), 1))
        assert m.row_labels == ("1", "0")
        assert [list(r) for r in m.entries] == [[F(2, 3), F(1, 3)], [F(1, 3), F(2, 3)]]

    @pytest.mark.parametrize("k", range(1, 7))
    def test_closed_form_entries(self, k):
        p = F(3, 5)
        m = rr_matrix(RRSpec(p, k))
        for i, di in enumerate(bit_labels(k)):
            for j, dj in enumerate(bit_labels(k)):
                flips = sum(a != b for a, b in zip(di, dj))
                assert m.entries[i][j] == p ** (k - flips) * (1 - p) ** flips

    def test_two_bits_pattern(self):
        p = F(3, 4)
        m = rr_matrix(RRSpec(p, 2))
        q = 1 - p
        assert m.entries[0] == (p * p, p * q, q * p, q * q)
        assert m.entries[3] == (q * q, q * p, p * q, p * p)

    def test_p_one_is_identity(self):
        m = rr_matrix(RRSpec(F(1), 2))
        assert m.entries == LabeledMatrix.identity(m.row_labels).entries

    def test_order_and_labels(self):
        m = rr_matrix(RRSpec(F(2, 3), 3))
        assert m.order is DatasetOrder.REVERSE_LEX_BITS
        assert m.col_labels[0] == "111" and m.col_labels[-1] == "000"

    @pytest.mark.parametrize("p", PS)
    def test_flip_all_composition(self, p):
        for k in (1, 2, 3):
            flip = rr_matrix(RRSpec(F(0), k))
            assert (flip @ rr_matrix(RRSpec(1 - p, k))).entries == rr_matrix(RRSpec(p, k)).entries

    def test_inverse_at_two_thirds(self):
        inv = rr_inverse(RRSpec(F(2, 3), 1))
        assert [list(r) for r in inv.entries] == [[2, -1], [-1, 2]]

    @pytest.mark.parametrize("p", PS)
    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_inverse_matches_generic_inversion(self, p, k):
        spec = RRSpec(p, k)
        assert rr_inverse(spec).entries == invert(rr_matrix(spec)).entries

    def test_inverse_at_half(self):
        with pytest.raises(SingularAtHalf):
            rr_inverse(RRSpec(F(1, 2), 1))

    @pytest.mark.parametrize("bad", [F(-1, 3), F(4, 3)])
    def test_bad_p(self, bad):
        with pytest.raises(ParseError):
            RRSpec(bad, 2)

    def test_bad_k(self):
        with pytest.raises(ParseError):
            RRSpec(F(2, 3), 0)
        with pytest.raises(DomainTooLarge):
            RRSpec(F(2, 3), 13)

    def test_effective_p(self):
        assert RRSpec(F(1, 4), 2).effective_p == F(3, 4)


class TestPram:
    def test_single_tuple_is_q(self, rng):
        q = random_stochastic(rng, 3, ("a", "b", "c"), ("a", "b", "c"))
        assert pram_matrix(PramSpec(q, 1)).entries == q.entries

    def test_identity(self):
        q = MechanismMatrix.from_matrix(LabeledMatrix.identity(("a", "b", "c")))
        m = pram_matrix(PramSpec(q, 2))
        assert m.entries == LabeledMatrix.identity(m.row_labels).entries
        assert m.col_labels[:3] == ("aa", "ab", "ac")

    def test_bernoulli_matches_rr_after_relabel(self):
        p = F(2, 3)
        q = MechanismMatrix(("a", "b"), ("a", "b"), ((p, 1 - p), (1 - p, p)))
        pram = pram_matrix(PramSpec(q, 2))
        rr = rr_matrix(RRSpec(p, 2))
        to_bits = {"a": "1", "b": "0"}
        for i, ri in enumerate(pram.row_labels):
            for j, cj in enumerate(pram.col_labels):
                bits_r = "".join(to_bits[c] for c in ri)
                bits_c = "".join(to_bits[c] for c in cj)
                assert pram.entries[i][j] == rr.entry(bits_r, bits_c)

    def test_multichar_labels_use_commas(self):
        q = MechanismMatrix.from_matrix(LabeledMatrix.identity(("x1", "x2")))
        assert pram_matrix(PramSpec(q, 2)).col_labels[1] == "x1,x2"

    def test_rejects_nonsquare(self, rng):
        q = random_stochastic(rng, 3, ("a", "b"))
        with pytest.raises(ParseError):
            PramSpec(q, 2)


class TestGammaAmplification:
    def test_boundary_case(self):
        q = LabeledMatrix(("a", "b"), ("a", "b"), ((F(2, 3), F(1, 3)), (F(1, 3), F(2, 3))))
        assert check_gamma_amplification(q, 2)

    def test_identity_fails(self):
        assert not check_gamma_amplification(LabeledMatrix.identity(("a", "b")), 2)

    @pytest.mark.parametrize("gamma", [1, F(3, 2), 5])
    def test_uniform(self, gamma):
        third = F(1, 3)
        q = LabeledMatrix(("a", "b", "c"), ("a", "b", "c"), ((third,) * 3,) * 3)
        assert check_gamma_amplification(q, gamma)

    def test_matches_ratio_definition(self, rng):
        for _ in range(50):
            q = random_stochastic(rng, 3, ("a", "b", "c"), ("a", "b", "c"), max_weight=4)
            gamma = F(rng.randint(2, 8), 2)
            ratio_ok = all(row[i] <= gamma * row[j] for row in q.entries for i in range(3) for j in range(3))
            assert check_gamma_amplification(q, gamma) == ratio_ok

    def test_gamma_below_one(self):
        with pytest.raises(ParseError):
            check_gamma_amplification(LabeledMatrix.identity(("a",)), F(1, 2))


class TestSampling:
    @pytest.mark.parametrize("p", [F(1, 2), F(1, 3), F(7, 9)])
    def test_drop_matches_figure(self, p):
        m = drop_matrix(SamplingSpec(p, 2, 2))
        assert m.col_labels == LABELS9 and m.row_labels == LABELS9
        assert [list(r) for r in m.entries] == drop_figure(p)

    def test_drop_single_individual(self):
        p = F(2, 5)
        m = drop_matrix(SamplingSpec(p, 2, 1))
        assert m.col_labels == SYMBOLS
        assert [list(r) for r in m.entries] == [[p, 0, 0], [0, p, 0], [1 - p, 1 - p, 1]]

    def test_drop_p_one_identity(self):
        m = drop_matrix(SamplingSpec(F(1), 3, 2))
        assert m.entries == LabeledMatrix.identity(m.row_labels).entries

    def test_sort_matches_figure(self):
        m = sort_matrix(2, 2)
        for i, r in enumerate(LABELS9):
            for j, c in enumerate(LABELS9):
                assert m.entries[i][j] == (1 if (r, c) in SORT_FIGURE_ONES else 0)

    def test_sort_single_individual_identity(self):
        m = sort_matrix(4, 1)
        assert m.entries == LabeledMatrix.identity(m.row_labels).entries

    @pytest.mark.parametrize("n,w", [(2, 2), (1, 3), (3, 2), (2, 3)])
    def test_sort_idempotent(self, n, w):
        s = sort_matrix(n, w)
        assert (s @ s).entries == s.entries

    def test_sampling_is_product(self):
        spec = SamplingSpec(F(1, 3), 2, 2)
        expected = sort_matrix(2, 2) @ drop_matrix(spec)
        assert sampling_matrix(spec).entries == expected.entries

    def test_sampling_p_one_single_individual(self):
        m = sampling_matrix(SamplingSpec(F(1), 2, 1))
        assert m.entries == LabeledMatrix.identity(m.row_labels).entries

    @pytest.mark.parametrize("p", [F(1, 2), F(1, 3)])
    def test_drop_commutes_with_position_permutations(self, p):
        spec = SamplingSpec(p, 2, 3)
        d = drop_matrix(spec)
        for perm in itertools.permutations(range(3)):
            pm = position_permutation_matrix(2, 3, perm)
            assert (d @ pm).entries == (pm @ d).entries

    @pytest.mark.parametrize("n,w", [(2, 2), (2, 3), (3, 2)])
    def test_sort_absorbs_a_presort(self, n, w):
        spec = SamplingSpec(F(2, 5), n, w)
        s, d = sort_matrix(n, w), drop_matrix(spec)
        assert (s @ d @ s).entries == (s @ d).entries

    def test_sort_and_drop_do_not_commute_literally(self):
        # drop after sorting can blank the first slot; sort after dropping cannot
        spec = SamplingSpec(F(1, 2), 2, 2)
        s, d = sort_matrix(2, 2), drop_matrix(spec)
        sd, ds = s @ d, d @ s
        assert sd.entry("b?", "ab") == F(1, 4) and ds.entry("b?", "ab") == 0
        assert ds.entry("?b", "ab") == F(1, 4) and sd.entry("?b", "ab") == 0

    def test_tuple_labels_lex_with_blank_last(self):
        assert tuple_labels(SYMBOLS, 2) == LABELS9

    def test_cap(self, monkeypatch):
        monkeypatch.setenv("PRIVCONE_MAX_DIM", "26")
        with pytest.raises(DomainTooLarge):
            SamplingSpec(F(1, 2), 2, 3)
        SamplingSpec(F(1, 2), 2, 2)

    @pytest.mark.parametrize("p", [F(0), F(3, 2)])
    def test_bad_p(self, p):
        with pytest.raises(ParseError):
            SamplingSpec(p, 2, 2)

    def test_permutation_argument_checked(self):
        with pytest.raises(ParseError):
            position_permutation_matrix(2, 2, (0, 0))


def test_every_constructor_is_stochastic():
    rng = random.Random(3)
    q = random_stochastic(rng, 3, ("a", "b", "c"), ("a", "b", "c"))
    mats = [rr_matrix(RRSpec(F(5, 7), 3)), pram_matrix(PramSpec(q, 2)),
            drop_matrix(SamplingSpec(F(1, 3), 2, 3)), sort_matrix(3, 2),
            sampling_matrix(SamplingSpec(F(3, 4), 3, 2))]
    for m in mats:
        assert m.is_column_stochastic()
