"""Adjoint operators, self-adjointness tests, and odd-coefficient formulas for order 2n.

The adjoint expansion is the ground truth.  The reference recurrence for the
odd coefficients and its closed-form solution are audited against it by
:func:`recurrence_report`.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import List, Sequence, Tuple

from .chain import LinearOperator
from .expr import (ZERO, Const, Exp, Expr, Int, as_expr, differentiate, fn, is_zero,
                   normalize, partial_derivative, substitute)
from .render import render

IndexTuple = Tuple[int, ...]


def adjoint(M: LinearOperator) -> LinearOperator:
    """N(z) = sum_i (-1)^(n-i) d^(n-i)(r_i z), recollected by Leibniz' rule."""
    n = M.order
    out = [ZERO] * (n + 1)
    for i, r in enumerate(M.coeffs):
        m = n - i
        sign = -1 if m % 2 else 1
        deriv = r
        derivs = [r]
        for _ in range(m):
            deriv = differentiate(deriv)
            derivs.append(deriv)
        # d^m(r z) = sum_j C(m, j) r^(m-j) z^(j);  z^(j) sits at index n - j
        for j in range(m + 1):
            out[n - j] = out[n - j] + sign * comb(m, j) * derivs[m - j]
    return LinearOperator(n, tuple(out))


def is_self_adjoint(M: LinearOperator) -> bool:
    return all(is_zero(d) for d in adjoint(M) - M)


def euler_lagrange_expr(e: Expr, var: str) -> Expr:
    # local import: lagrangian depends on this module
    from .lagrangian import variational_derivative
    return variational_derivative(e, var)


def lagrange_identity_check(M: LinearOperator, N: LinearOperator = None,
                            y: str = "y", z: str = "z") -> bool:
    """True iff z M(y) - y N(z) is a total derivative (N defaults to the adjoint).

    A smooth expression is a total derivative iff its variational derivatives
    in every dependent variable vanish.
    """
    if M.order > 6:
        raise ValueError("order above 6 is outside the supported range")
    N = adjoint(M) if N is None else N
    bilinear = normalize(fn(z) * M.apply(y) - fn(y) * N.apply(z))
    return is_zero(euler_lagrange_expr(bilinear, y)) and is_zero(euler_lagrange_expr(bilinear, z))


def second_order_multiplier(alpha1: Expr) -> Expr:
    """exp(Int(alpha1)): makes y'' + alpha1 y' + alpha0 y self-adjoint."""
    return normalize(Exp(Int(as_expr(alpha1))))


@dataclass(frozen=True)
class FourthOrderConditions:
    """Residuals of r1 = 2 r0', q = r2 - r0'', q' = r3."""

    r1_residual: Expr
    q: Expr
    q_residual: Expr

    @property
    def holds(self) -> bool:
        return is_zero(self.r1_residual) and is_zero(self.q_residual)


def fourth_order_residuals(M: LinearOperator) -> FourthOrderConditions:
    if M.order != 4:
        raise ValueError("fourth-order conditions need an order-4 operator")
    r0, r1, r2, r3, _ = M.coeffs
    q = normalize(r2 - differentiate(r0, 2))
    return FourthOrderConditions(normalize(r1 - 2 * differentiate(r0)), q,
                                 normalize(differentiate(q) - r3))


def fourth_order_conditions(M: LinearOperator) -> bool:
    return fourth_order_residuals(M).holds


def self_adjoint_fourth_order_form(M: LinearOperator, y: str = "y") -> Expr:
    """(r0 y'')'' + (q y')' + r4 y with q = r2 - r0''."""
    res = fourth_order_residuals(M)
    r0, r4 = M.coeffs[0], M.coeffs[4]
    return normalize(differentiate(r0 * fn(y, 2), 2) + differentiate(res.q * fn(y, 1)) + r4 * fn(y))


# ---------------------------------------------------------------------------
# odd coefficients of a self-adjoint order-2n operator


def symbolic_even_coeffs(n: int) -> List[Expr]:
    return [fn(f"r{2 * i}") for i in range(n + 1)]


def odd_coefficient_from_adjoint(n: int, even_coeffs: Sequence[Expr]) -> List[Expr]:
    """r1, r3, ..., r_{2n-1} making the order-2n operator self-adjoint.

    Unknown odd coefficients enter as placeholder symbols; the z^(2n-2k-1)
    coefficient of adjoint(M) = M is linear in r_{2k+1} with all lower odd
    coefficients already known, so the system is solved top-down.
    """
    if len(even_coeffs) != n + 1:
        raise ValueError(f"need {n + 1} even coefficients")
    placeholders = [fn(f"_u{i}") for i in range(2 * n + 1)]
    coeffs: List[Expr] = list(placeholders)
    for i, c in enumerate(even_coeffs):
        coeffs[2 * i] = normalize(as_expr(c))
    odd: List[Expr] = []
    for k in range(n):
        idx = 2 * k + 1
        N = adjoint(LinearOperator(2 * n, tuple(coeffs)))
        eqn = normalize(N.coeffs[idx] - coeffs[idx])
        u = placeholders[idx]
        lead = partial_derivative(eqn, u)
        rest = normalize(substitute(eqn, u, ZERO))
        if not isinstance(lead, Const) or lead.value == 0:
            raise ValueError("non-triangular system")  # pragma: no cover
        value = normalize(rest * Const(-1 / lead.value))
        coeffs[idx] = value
        odd.append(value)
    return odd


def self_adjoint_operator(n: int, even_coeffs: Sequence[Expr]) -> LinearOperator:
    odd = odd_coefficient_from_adjoint(n, even_coeffs)
    coeffs = []
    for i in range(2 * n + 1):
        coeffs.append(even_coeffs[i // 2] if i % 2 == 0 else odd[i // 2])
    return LinearOperator(2 * n, tuple(coeffs))


def odd_coefficient_recurrence(n: int, k: int, coeffs: Sequence[Expr]) -> Expr:
    """r_{2k+1} by the reference recurrence, whose last term carries C(2n-2k-1, 2n-2k-1) = 1.

    ``coeffs`` holds r_0 .. r_{2k} (even ones plus already computed odd ones).
    """
    if not 1 <= k <= n - 1:
        raise IndexError(f"k={k} outside 1..{n - 1}")
    if len(coeffs) < 2 * k + 1:
        raise ValueError(f"need r_0 .. r_{2 * k}")
    low = 2 * n - 2 * k - 1
    total: Expr = ZERO
    for i in range(2 * k + 1):
        top = 2 * n - i if i < 2 * k else 2 * n - 2 * k - 1
        sign = -1 if i % 2 else 1
        total = total + sign * comb(top, low) * differentiate(coeffs[i], 2 * k + 1 - i)
    return normalize(total * Fraction(1, 2))


def odd_coefficient_recurrence_corrected(n: int, k: int, coeffs: Sequence[Expr]) -> Expr:
    """Same recurrence with every binomial C(2n-i, 2n-2k-1), as the adjoint expansion gives."""
    low = 2 * n - 2 * k - 1
    total: Expr = ZERO
    for i in range(2 * k + 1):
        sign = -1 if i % 2 else 1
        total = total + sign * comb(2 * n - i, low) * differentiate(coeffs[i], 2 * k + 1 - i)
    return normalize(total * Fraction(1, 2))


def enumerate_index_set(l: int, m: int) -> List[IndexTuple]:
    """Tuples (k1, ..., kl): k1 odd < m, the rest even positive, summing to m."""
    if l < 2 or m < 1 or m % 2 == 0:
        raise ValueError("need l >= 2 and odd m >= 1")
    out: List[IndexTuple] = []

    def evens(count: int, total: int):
        if count == 0:
            if total == 0:
                yield ()
            return
        for first in range(2, total - 2 * (count - 1) + 1, 2):
            for rest in evens(count - 1, total - first):
                yield (first,) + rest

    for k1 in range(1, m, 2):
        for tail in evens(l - 1, m - k1):
            out.append((k1,) + tail)
    return out


def closed_form_weight(top: int, m: int) -> Fraction:
    """Brace multiplying r_{2j}^(m) when top = 2n - 2j and m = 2k + 1 - 2j."""
    w = Fraction(comb(top, m), 2)
    for l in range(2, (m + 1) // 2 + 1):
        s = 0
        for tup in enumerate_index_set(l, m):
            prod, used = 1, 0
            for kk in tup:
                prod *= comb(top - used, kk)
                used += kk
            s += prod
        w += Fraction((-1) ** (l - 1), 2 ** l) * s
    return w


def odd_coefficient_closed_form(n: int, k: int, even_coeffs: Sequence[Expr]) -> Expr:
    """r_{2k+1} from the closed-form solution over the index sets."""
    if not 1 <= k <= n - 1:
        raise IndexError(f"k={k} outside 1..{n - 1}")
    total: Expr = ZERO
    for j in range(k + 1):
        m = 2 * k + 1 - 2 * j
        total = total + closed_form_weight(2 * n - 2 * j, m) * differentiate(even_coeffs[j], m)
    return normalize(total)


@dataclass(frozen=True)
class ReportLine:
    index: int
    method: str
    printed: Expr
    oracle: Expr

    @property
    def match(self) -> bool:
        return is_zero(normalize(self.printed - self.oracle))

    def __str__(self):
        return (f"r{self.index}: printed={render(self.printed, 'sexpr')} "
                f"oracle={render(self.oracle, 'sexpr')} match={'yes' if self.match else 'no'}")


def recurrence_report(n: int, even_coeffs: Sequence[Expr] = None) -> List[ReportLine]:
    """Compare recurrence and closed form against the adjoint oracle for order 2n.

    The recurrence is fed the oracle's lower odd coefficients so each line
    isolates a single step.
    """
    even = symbolic_even_coeffs(n) if even_coeffs is None else [normalize(as_expr(c)) for c in even_coeffs]
    odd = odd_coefficient_from_adjoint(n, even)
    coeffs = [even[i // 2] if i % 2 == 0 else odd[i // 2] for i in range(2 * n + 1)]
    lines = [ReportLine(1, "initial", normalize(n * differentiate(even[0])), odd[0])]
    for k in range(1, n):
        idx = 2 * k + 1
        lines.append(ReportLine(idx, "recurrence", odd_coefficient_recurrence(n, k, coeffs), odd[k]))
        lines.append(ReportLine(idx, "closed-form", odd_coefficient_closed_form(n, k, even), odd[k]))
    return lines


def format_report(lines: Sequence[ReportLine]) -> str:
    out = []
    for method in ("initial", "recurrence", "closed-form"):
        group = [str(line) for line in lines if line.method == method]
        if group:
            out.append(f"# {method}")
            out.extend(group)
    return "\n".join(out)
