import pytest
from hypothesis import given
from hypothesis import strategies as st

import forms
from rvl.chain import (LinearOperator, bind_alphas, build_chain_equation, cole_hopf_substitute,
                       cole_hopf_y_derivative, delinearize, linearization_certificate, linearize,
                       load_alpha_bindings, symbolic_alphas, theta_apply, theta_power)
from rvl.expr import (ONE, ZERO, Const, differentiate, fn, is_zero, max_order, normalize,
                      partial_derivative, x)

w, w1, w2 = fn("w"), fn("w", 1), fn("w", 2)


class TestTheta:
    def test_once(self):
        assert theta_apply(w) == normalize(w1 + w ** 2)

    def test_twice(self):
        assert theta_power(2) == normalize(w2 + 3 * w * w1 + w ** 3)

    def test_zero(self):
        assert theta_apply(ZERO) == ZERO


class TestChainEquation:
    def test_first_order(self):
        assert build_chain_equation(1).lhs == normalize(forms.RICCATI)

    def test_third_order(self):
        assert build_chain_equation(3).lhs == normalize(forms.RICCATI3)

    def test_zero_coefficients(self):
        eq = build_chain_equation(2, [0, 0, 0])
        assert eq.lhs == theta_power(2)

    def test_unit_leading_derivative(self):
        for N in range(1, 5):
            lhs = build_chain_equation(N).lhs
            assert max_order(lhs, "w") == N
            assert partial_derivative(lhs, fn("w", N)) == ONE

    @pytest.mark.parametrize("N,alphas", [(0, None), (2, [1, 2]), (-1, [])])
    def test_arity_errors(self, N, alphas):
        with pytest.raises(ValueError):
            build_chain_equation(N, alphas)


class TestColeHopf:
    @pytest.mark.parametrize("k,expected", [
        (0, ONE), (1, w), (2, w1 + w ** 2), (3, w2 + 3 * w * w1 + w ** 3)])
    def test_examples(self, k, expected):
        assert cole_hopf_y_derivative(k) == normalize(expected)

    @given(st.integers(0, 6))
    def test_recursion(self, k):
        # g_{k+1} = g_k' + w g_k, and y^(k) = g_k y differentiates consistently
        g, g_next = cole_hopf_y_derivative(k), cole_hopf_y_derivative(k + 1)
        assert g_next == normalize(differentiate(g) + w * g)

    def test_substitution_respects_derivatives(self):
        y = fn("y")
        for k in range(5):
            lhs = cole_hopf_substitute(fn("y", k + 1))
            rhs = cole_hopf_substitute(differentiate(fn("y", k)))
            assert lhs == rhs
        assert cole_hopf_substitute(fn("y", 2)) == normalize((w1 + w ** 2) * y)


class TestLinearize:
    def test_first_order(self):
        op = linearize(build_chain_equation(1))
        assert op.apply("y") == normalize(forms.LINEAR2)

    def test_third_order(self):
        op = linearize(build_chain_equation(3))
        assert op.apply("y") == normalize(forms.LINEAR4)

    def test_oscillator(self):
        op = linearize(build_chain_equation(1, [1, 0]))
        assert op.apply("y") == normalize(fn("y", 2) + fn("y"))

    @pytest.mark.parametrize("N", range(1, 6))
    def test_certificate(self, N):
        assert is_zero(linearization_certificate(build_chain_equation(N)))

    @given(st.integers(1, 3), st.lists(st.integers(-3, 3), min_size=4, max_size=4))
    def test_certificate_concrete(self, N, values):
        eq = build_chain_equation(N, [Const(v) + v * x for v in values[:N + 1]])
        assert is_zero(linearization_certificate(eq))


class TestDelinearize:
    def test_oscillator(self):
        op = LinearOperator(2, (1, 0, 1))
        assert delinearize(op).lhs == normalize(w1 + w ** 2 + 1)

    def test_first_order_pair(self):
        op = LinearOperator(2, (1, fn("a1"), fn("a0")))
        assert delinearize(op).lhs == normalize(forms.RICCATI)

    @pytest.mark.parametrize("N", range(1, 5))
    def test_round_trip(self, N):
        eq = build_chain_equation(N)
        assert delinearize(linearize(eq)) == eq

    def test_requires_unit_leading_coefficient(self):
        with pytest.raises(ValueError):
            delinearize(LinearOperator(2, (2, 0, 1)))


class TestLinearOperator:
    def test_validation(self):
        with pytest.raises(ValueError):
            LinearOperator(2, (1, 0))
        with pytest.raises(ValueError):
            LinearOperator(2, (0, 1, 1))

    def test_apply_to_expression(self):
        op = LinearOperator(2, (1, 0, 1))
        assert op.apply(x ** 3) == normalize(6 * x + x ** 3)


def test_binding_file(tmp_path):
    path = tmp_path / "alphas.txt"
    path.write_text("# oscillator\na0 = 1\na1 = (* 2 x)\n", encoding="utf-8")
    table = load_alpha_bindings(path)
    alphas = bind_alphas(symbolic_alphas(2), table)
    assert alphas == [ONE, normalize(2 * x)]
    eq = build_chain_equation(1, alphas)
    assert eq.lhs == normalize(w1 + w ** 2 + 2 * x * w + 1)
