"""Lagrangians from self-adjoint forms, Euler-Lagrange operator, and verification.

Lagrangians of chain equations carry ``exp(Int(w))`` factors, which are not
local in ``w``.  They are verified in the potential variable ``W`` with
``W' = w``: each ``w^(k)`` becomes ``W^(k+1)`` and ``Int(w)`` becomes ``W``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .chain import (OMEGA, LinearOperator, RiccatiChainEq, build_chain_equation,
                    cole_hopf_substitute, default_amplitude, linearize, symbolic_alphas)
from .expr import (ZERO, Exp, Expr, FunctionSymbol, Int, Sym, as_expr, differentiate, divide, fn,
                   free_symbols, is_zero, max_order, monomial_parts, normalize, partial_derivative, rewrite_atoms)
from .render import render
from .selfadjoint import is_self_adjoint, second_order_multiplier


class NotSelfAdjointError(ValueError):
    pass


@dataclass(frozen=True)
class Lagrangian:
    expr: Expr
    variable: str
    order: int
    waived: bool = False

    @classmethod
    def of(cls, expr: Expr, variable: str, waived: bool = False) -> "Lagrangian":
        expr = normalize(expr)
        return cls(expr, variable, max(max_order(expr, variable), 0), waived)

    def latex(self) -> str:
        return "L = " + render(self.expr, "latex")


def variational_derivative(e: Expr, var: str) -> Expr:
    """sum_i (-1)^i d^i/dx^i dL/d var^(i)."""
    e = normalize(e)
    total: Expr = ZERO
    for i in range(max_order(e, var) + 1):
        term = differentiate(partial_derivative(e, fn(var, i)), i)
        total = total + (term if i % 2 == 0 else -term)
    return normalize(total)


def euler_lagrange(L: Lagrangian) -> Expr:
    return variational_derivative(L.expr, L.variable)


def ansatz_lagrangian(Ms: LinearOperator, var: str = "y", waive: bool = False) -> Lagrangian:
    """L = var * Ms(var); ``Ms`` must be self-adjoint unless ``waive`` is set."""
    if not waive and not is_self_adjoint(Ms):
        raise NotSelfAdjointError("operator is not self-adjoint; pass waive=True to proceed")
    return Lagrangian.of(fn(var) * Ms.apply(var), var, waived=waive)


def gauge_subtract(L: Lagrangian, g: Expr) -> Lagrangian:
    return Lagrangian.of(L.expr - differentiate(g), L.variable, L.waived)


def standard_gauge(L: Lagrangian) -> Expr:
    """c y y^(m-1) for a Lagrangian y (c y^(m) + ...); subtracting it lowers the order by one."""
    var, m = L.variable, L.order
    c = partial_derivative(partial_derivative(L.expr, fn(var, m)), fn(var))
    if m < 2 or is_zero(c):
        return ZERO
    return normalize(c * fn(var) * fn(var, m - 1))


# ---------------------------------------------------------------------------
# chain Lagrangians


def _resolve(alphas: Optional[Sequence[Expr]], count: int):
    alphas = symbolic_alphas(count) if alphas is None else [normalize(as_expr(a)) for a in alphas]
    if len(alphas) != count:
        raise ValueError(f"expected {count} coefficients, got {len(alphas)}")
    return alphas


def linear_lagrangian(N: int, alphas: Optional[Sequence[Expr]] = None) -> Lagrangian:
    """Lagrangian in y for the linearization of the order-N chain equation.

    N = 1 uses the integrating multiplier exp(Int(a1)); higher orders use
    y * M(y) with M the linearized operator as it stands.
    """
    alphas = _resolve(alphas, N + 1)
    op = linearize(build_chain_equation(N, alphas))
    if N == 1:
        op = op.scaled(second_order_multiplier(alphas[1]))
        return ansatz_lagrangian(op, "y", waive=not is_self_adjoint(op))
    return ansatz_lagrangian(op, "y", waive=True)


def _to_omega(L_y: Lagrangian, a: Optional[Expr]) -> Lagrangian:
    expr = cole_hopf_substitute(L_y.expr, "y", OMEGA, default_amplitude(a))
    return Lagrangian.of(expr, OMEGA.name, L_y.waived)


def riccati_lagrangian(alphas: Optional[Sequence[Expr]] = None, a: Optional[Expr] = None) -> Lagrangian:
    """a^2 exp(Int(a1) + 2 Int(w)) (w' + w^2 + a1 w + a0)."""
    return _to_omega(linear_lagrangian(1, alphas), a)


def riccati3_lagrangian(alphas: Optional[Sequence[Expr]] = None, a: Optional[Expr] = None) -> Lagrangian:
    """a^2 exp(2 Int(w)) (S1 + S2) for the third-order chain equation."""
    return _to_omega(linear_lagrangian(3, alphas), a)


def riccati3_parts(alphas: Optional[Sequence[Expr]] = None):
    """(S1, S2): the terms of the third-order Lagrangian with and without a3 w'' / w''' ."""
    a0, a1, a2, a3 = _resolve(alphas, 4)
    w, w1, w2, w3 = (fn("w", k) for k in range(4))
    s1 = w3 + 4 * w * w2 + a3 * w2 + 3 * w1 ** 2 + 6 * w ** 2 * w1 + 3 * a3 * w * w1
    s2 = a2 * w1 + w ** 4 + a3 * w ** 3 + a2 * w ** 2 + a1 * w + a0
    return normalize(s1), normalize(s2)


def general_odd_lagrangian(n: int, alphas: Optional[Sequence[Expr]] = None,
                           a: Optional[Expr] = None) -> Lagrangian:
    """Lagrangian of the order-(2n-1) chain equation: a^2 e^{2 Int w} times its left side."""
    if n < 1:
        raise ValueError("n must be positive")
    alphas = _resolve(alphas, 2 * n)
    op = linearize(build_chain_equation(2 * n - 1, alphas))
    L_y = ansatz_lagrangian(op, "y", waive=True)
    return _to_omega(L_y, a)


# ---------------------------------------------------------------------------
# verification


def _int_of(e: Expr, var: str) -> bool:
    found = []

    def look(a):
        if isinstance(a, Int) and any(isinstance(s, FunctionSymbol) and s.name == var
                                      for s in _atoms_of(a.arg)):
            found.append(a)
        return None

    rewrite_atoms(e, look)
    return bool(found)


def _atoms_of(e: Expr):
    return free_symbols(e)


def to_potential(e: Expr, var: str = "w", potential: str = "W") -> Expr:
    """Rewrite var^(k) -> potential^(k+1) and Int(var) -> potential."""
    def replace(a):
        if isinstance(a, FunctionSymbol) and a.name == var:
            return fn(potential, a.order + 1)
        if isinstance(a, Int):
            if a.arg == fn(var):
                return fn(potential)
            if any(isinstance(s, FunctionSymbol) and s.name == var for s in _atoms_of(a.arg)):
                raise ValueError(f"cannot express {render(a)} through the potential")
        return None
    return rewrite_atoms(e, replace)


def from_potential(e: Expr, var: str = "w", potential: str = "W") -> Expr:
    def replace(a):
        if isinstance(a, FunctionSymbol) and a.name == potential:
            return Int(fn(var)) if a.order == 0 else fn(var, a.order - 1)
        return None
    return rewrite_atoms(e, replace)


@dataclass(frozen=True)
class Verification:
    ok: bool
    factor: Optional[Expr]
    residual: Expr
    euler_lagrange: Expr
    potential: Optional[str] = None
    note: str = ""

    def report(self) -> str:
        lines = []
        if self.potential:
            lines.append(f"# verified in potential variable {self.potential} (W' = w)")
        if self.ok:
            lines.append(f"factor={render(self.factor, 'sexpr')}")
        else:
            lines.append(f"residual={render(self.residual, 'sexpr')}")
        if self.note:
            lines.append(f"# {self.note}")
        return "\n".join(lines)


def _unit_factor(q: Expr) -> bool:
    """Nonzero constant times an exponential (named constants allowed)."""
    try:
        _, atoms = monomial_parts(q)
    except ValueError:
        return False
    return all(isinstance(a, (Exp, Sym)) for a, _ in atoms)


def verify_eom(L: Lagrangian, eom: Expr, var: Optional[str] = None,
               potential: str = "W") -> Verification:
    """Check euler_lagrange(L) = f * eom with f a constant times an exponential.

    Lagrangians with ``Int(var)`` are rewritten in ``potential`` first; the
    returned factor is mapped back (W -> Int(w)).
    """
    var = L.variable if var is None else var
    expr, target, pot = L.expr, normalize(eom), None
    if _int_of(expr, var):
        pot = potential
        expr = to_potential(expr, var, potential)
        target = to_potential(target, var, potential)
        el = variational_derivative(expr, potential)
    else:
        el = variational_derivative(expr, var)
    if is_zero(target):
        raise ValueError("equation of motion is identically zero")
    q, r = divide(el, target)
    back = (lambda e: from_potential(e, var, potential)) if pot else (lambda e: e)
    if is_zero(r) and not is_zero(q) and _unit_factor(q):
        return Verification(True, back(q), r, back(el), pot)
    note = "" if is_zero(r) else "Euler-Lagrange output is not proportional to the equation of motion"
    if is_zero(r):
        note = f"quotient {render(back(q), 'sexpr')} is not a constant times an exponential"
        r = normalize(el)
    return Verification(False, None, back(r), back(el), pot, note)


def riccati_chain_eom(N: int, alphas: Optional[Sequence[Expr]] = None) -> RiccatiChainEq:
    return build_chain_equation(N, alphas)


def check_linear_pair(Ms: LinearOperator, var: str = "y") -> Verification:
    """verify_eom for var * Ms(var) against Ms(var) = 0."""
    L = ansatz_lagrangian(Ms, var, waive=True)
    return verify_eom(L, Ms.apply(var), var)


__all__ = [
    "Lagrangian", "NotSelfAdjointError", "Verification", "variational_derivative",
    "euler_lagrange", "ansatz_lagrangian", "gauge_subtract", "standard_gauge",
    "linear_lagrangian", "riccati_lagrangian", "riccati3_lagrangian", "riccati3_parts",
    "general_odd_lagrangian", "to_potential", "from_potential", "verify_eom", "check_linear_pair",
]
