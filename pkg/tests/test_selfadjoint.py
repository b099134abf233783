import itertools
from fractions import Fraction
from math import comb

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rvl.chain import LinearOperator, build_chain_equation, linearize
from rvl.expr import ONE, ZERO, Const, Exp, Int, differentiate, fn, is_zero, normalize, x
from rvl.selfadjoint import (adjoint, closed_form_weight, enumerate_index_set, format_report,
                             fourth_order_conditions, fourth_order_residuals, is_self_adjoint,
                             lagrange_identity_check, odd_coefficient_closed_form,
                             odd_coefficient_from_adjoint, odd_coefficient_recurrence,
                             odd_coefficient_recurrence_corrected, recurrence_report,
                             second_order_multiplier, self_adjoint_fourth_order_form,
                             self_adjoint_operator, symbolic_even_coeffs)

r = [fn(f"r{i}") for i in range(7)]
a0, a1 = fn("a0"), fn("a1")


def d(e, k=1):
    return differentiate(e, k)


def coefficient(i):
    small = st.integers(-2, 2)
    return st.tuples(small, small, small).map(
        lambda t: normalize((t[0] or 1) * r[i] + t[1] * x ** 2 + t[2] * x * fn(f"r{i}", 1)))


def operators(max_order):
    return st.integers(1, max_order).flatmap(
        lambda n: st.tuples(*[coefficient(i) for i in range(n + 1)]).map(
            lambda cs: LinearOperator(len(cs) - 1, cs)))


def self_adjoint_operators(orders=(1, 2)):
    def build(n, cs):
        return self_adjoint_operator(n, list(cs))
    return st.sampled_from(orders).flatmap(
        lambda n: st.tuples(*[coefficient(2 * i) for i in range(n + 1)]).map(lambda cs: build(n, cs)))


class TestAdjoint:
    def test_second_order(self):
        M = LinearOperator(2, tuple(r[:3]))
        N = adjoint(M)
        expected = (r[0], 2 * d(r[0]) - r[1], d(r[0], 2) - d(r[1]) + r[2])
        assert N.coeffs == tuple(normalize(e) for e in expected)

    def test_oscillator(self):
        M = LinearOperator(2, (1, 0, 1))
        assert adjoint(M) == M

    def test_first_order(self):
        M = LinearOperator(1, (r[0], r[1]))
        assert adjoint(M).coeffs == (normalize(-r[0]), normalize(r[1] - d(r[0])))

    @given(operators(6))
    def test_involution(self, M):
        assert adjoint(adjoint(M)) == M


class TestSelfAdjoint:
    def test_fourth_order_constant(self):
        assert is_self_adjoint(LinearOperator(4, (1, 0, 0, 0, 1)))

    def test_linearized_riccati(self):
        assert not is_self_adjoint(linearize(build_chain_equation(1)))

    def test_multiplier(self):
        op = linearize(build_chain_equation(1)).scaled(second_order_multiplier(a1))
        assert second_order_multiplier(a1) == normalize(Exp(Int(a1)))
        assert is_self_adjoint(op)

    def test_multiplier_trivial(self):
        assert second_order_multiplier(ZERO) == ONE

    def test_multiplier_opaque(self):
        c = fn("q")
        op = LinearOperator(2, (1, c, a0)).scaled(second_order_multiplier(c))
        assert is_self_adjoint(op)

    def test_linearized_third_order(self):
        assert not is_self_adjoint(linearize(build_chain_equation(3)))


class TestLagrangeIdentity:
    def test_examples(self):
        assert lagrange_identity_check(LinearOperator(2, (1, a1, a0)))
        assert lagrange_identity_check(LinearOperator(4, tuple(r[:5])))
        assert lagrange_identity_check(LinearOperator(1, (1, 0)))

    def test_wrong_partner_fails(self):
        M = LinearOperator(2, (1, a1, a0))
        assert not lagrange_identity_check(M, M)

    @given(operators(4))
    def test_random(self, M):
        assert lagrange_identity_check(M)

    def test_order_limit(self):
        with pytest.raises(ValueError):
            lagrange_identity_check(LinearOperator(7, (1,) + (0,) * 7))


class TestFourthOrder:
    def test_constant(self):
        res = fourth_order_residuals(LinearOperator(4, (1, 0, 0, 0, 1)))
        assert res.holds and is_zero(res.q)

    def test_linearized_third_order(self):
        assert not fourth_order_conditions(linearize(build_chain_equation(3)))

    def test_derivative_pair(self):
        M = LinearOperator(4, (1, 0, r[2], d(r[2]), r[4]))
        assert fourth_order_conditions(M)

    def test_wrong_order(self):
        with pytest.raises(ValueError):
            fourth_order_residuals(LinearOperator(2, (1, 0, 1)))

    @given(st.lists(st.tuples(st.booleans(), st.tuples(*[coefficient(i) for i in range(5)])),
                    min_size=20, max_size=20))
    def test_conditions_match_adjoint(self, cases):
        for make_self_adjoint, cs in cases:
            M = self_adjoint_operator(2, [cs[0], cs[2], cs[4]]) if make_self_adjoint \
                else LinearOperator(4, cs)
            assert fourth_order_conditions(M) == is_self_adjoint(M)

    def test_self_adjoint_form(self):
        M = self_adjoint_operator(2, [r[0], r[2], r[4]])
        assert self_adjoint_fourth_order_form(M) == M.apply("y")


class TestOddCoefficients:
    def test_n1(self):
        assert odd_coefficient_from_adjoint(1, [r[0], r[2]]) == [d(r[0])]

    def test_n2(self):
        r1, r3 = odd_coefficient_from_adjoint(2, [r[0], r[2], r[4]])
        assert r1 == normalize(2 * d(r[0]))
        assert r3 == normalize(d(r[2]) - d(r[0], 3))

    def test_unit_leading(self):
        assert odd_coefficient_from_adjoint(1, [ONE, r[2]]) == [ZERO]

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_makes_self_adjoint(self, n):
        assert is_self_adjoint(self_adjoint_operator(n, symbolic_even_coeffs(n)))

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_initial_condition(self, n):
        odd = odd_coefficient_from_adjoint(n, symbolic_even_coeffs(n))
        assert odd[0] == normalize(n * d(r[0]))

    def test_arity(self):
        with pytest.raises(ValueError):
            odd_coefficient_from_adjoint(2, [r[0], r[2]])


class TestRecurrence:
    def test_reference_instance(self):
        coeffs = [r[0], normalize(2 * d(r[0])), r[2]]
        value = odd_coefficient_recurrence(2, 1, coeffs)
        expected = Fraction(1, 2) * (4 * d(r[0], 3) - 3 * d(coeffs[1], 2) + d(r[2]))
        assert value == normalize(expected)
        assert value == normalize(Fraction(1, 2) * d(r[2]) - d(r[0], 3))

    def test_reference_differs_from_adjoint(self):
        coeffs = [r[0], normalize(2 * d(r[0])), r[2]]
        oracle = odd_coefficient_from_adjoint(2, [r[0], r[2], r[4]])[1]
        assert odd_coefficient_recurrence(2, 1, coeffs) != oracle
        assert odd_coefficient_recurrence_corrected(2, 1, coeffs) == oracle

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_corrected_recurrence_matches_adjoint(self, n):
        even = symbolic_even_coeffs(n)
        odd = odd_coefficient_from_adjoint(n, even)
        coeffs = [even[i // 2] if i % 2 == 0 else odd[i // 2] for i in range(2 * n + 1)]
        for k in range(1, n):
            assert odd_coefficient_recurrence_corrected(n, k, coeffs) == odd[k]

    def test_range(self):
        with pytest.raises(IndexError):
            odd_coefficient_recurrence(1, 1, [r[0], r[1], r[2]])
        with pytest.raises(IndexError):
            odd_coefficient_closed_form(2, 2, [r[0], r[2], r[4]])


class TestClosedForm:
    def test_leading_weight(self):
        assert closed_form_weight(4, 3) == Fraction(comb(4, 3), 2) - Fraction(1, 4) * comb(4, 1) * comb(3, 2)

    def test_trailing_weight(self):
        assert closed_form_weight(2, 1) == 1

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_matches_adjoint(self, n):
        even = symbolic_even_coeffs(n)
        odd = odd_coefficient_from_adjoint(n, even)
        for k in range(1, n):
            assert odd_coefficient_closed_form(n, k, even) == odd[k]


def brute_force_index_set(l, m):
    found = set()
    for tup in itertools.product(range(1, m + 1), repeat=l):
        if sum(tup) == m and tup[0] % 2 == 1 and tup[0] < m and all(k % 2 == 0 for k in tup[1:]):
            found.add(tup)
    return found


class TestIndexSets:
    def test_examples(self):
        assert set(enumerate_index_set(2, 5)) == {(1, 4), (3, 2)}
        assert set(enumerate_index_set(3, 5)) == {(1, 2, 2)}
        assert enumerate_index_set(2, 1) == []

    @pytest.mark.parametrize("l,m", [(l, m) for l in range(2, 6) for m in range(1, 12, 2)])
    def test_brute_force(self, l, m):
        got = enumerate_index_set(l, m)
        assert len(got) == len(set(got))
        assert set(got) == brute_force_index_set(l, m)

    @pytest.mark.parametrize("l,m", [(1, 3), (2, 4), (2, 0)])
    def test_preconditions(self, l, m):
        with pytest.raises(ValueError):
            enumerate_index_set(l, m)


class TestReport:
    def test_n2(self):
        lines = recurrence_report(2)
        initial, step, closed = lines
        assert initial.match
        assert step.index == 3 and not step.match
        assert step.oracle == normalize(d(r[2]) - d(r[0], 3))
        assert closed.match

    def test_format(self):
        text = format_report(recurrence_report(2))
        assert text.splitlines() == [
            "# initial",
            "r1: printed=(* 2 (dn r0 1)) oracle=(* 2 (dn r0 1)) match=yes",
            "# recurrence",
            "r3: printed=(+ (* -1 (dn r0 3)) (* 1/2 (dn r2 1))) "
            "oracle=(+ (* -1 (dn r0 3)) (dn r2 1)) match=no",
            "# closed-form",
            "r3: printed=(+ (* -1 (dn r0 3)) (dn r2 1)) oracle=(+ (* -1 (dn r0 3)) (dn r2 1)) match=yes",
        ]

    @pytest.mark.parametrize("n", [3, 4])
    def test_larger(self, n):
        lines = recurrence_report(n)
        assert [l.index for l in lines if l.method == "recurrence"] == list(range(3, 2 * n, 2))
        assert all(l.match for l in lines if l.method != "recurrence")
        assert not all(l.match for l in lines if l.method == "recurrence")


@given(self_adjoint_operators())
def test_constructed_operators_are_self_adjoint(M):
    assert is_self_adjoint(M)


def test_const_operator_equality():
    assert LinearOperator(2, (Const(1), 0, 1)) == LinearOperator(2, (1, 0, 1))
