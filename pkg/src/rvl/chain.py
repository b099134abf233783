"""Riccati chain equations, their Cole-Hopf linearizations, and linear operators."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from .expr import (ONE, ZERO, Exp, Expr, FunctionSymbol, Int, Sym, as_expr, differentiate, fn,
                   is_zero, max_order, normalize, substitute, substitute_all_orders)
from .render import parse

OMEGA = fn("w")


def symbolic_alphas(count: int) -> List[Expr]:
    """Opaque coefficient functions a0 .. a{count-1}."""
    return [fn(f"a{j}") for j in range(count)]


@dataclass(frozen=True)
class LinearOperator:
    """``sum_i coeffs[i] * f^(order - i)``; ``coeffs[0]`` multiplies the top derivative."""

    order: int
    coeffs: tuple

    def __post_init__(self):
        coeffs = tuple(normalize(as_expr(c)) for c in self.coeffs)
        if len(coeffs) != self.order + 1:
            raise ValueError(f"order-{self.order} operator needs {self.order + 1} coefficients")
        if self.order < 1:
            raise ValueError("operator order must be positive")
        if is_zero(coeffs[0]):
            raise ValueError("leading coefficient is identically zero")
        object.__setattr__(self, "coeffs", coeffs)

    def apply(self, f: Union[str, Expr]) -> Expr:
        """M(f); a string names an unknown function."""
        if isinstance(f, str):
            terms = [c * fn(f, self.order - i) for i, c in enumerate(self.coeffs)]
        else:
            terms = [c * differentiate(f, self.order - i) for i, c in enumerate(self.coeffs)]
        return normalize(sum(terms, ZERO))

    def scaled(self, factor: Expr) -> "LinearOperator":
        return LinearOperator(self.order, tuple(factor * c for c in self.coeffs))

    def __sub__(self, other: "LinearOperator") -> List[Expr]:
        if self.order != other.order:
            raise ValueError("operators of different order")
        return [normalize(a - b) for a, b in zip(self.coeffs, other.coeffs)]


@dataclass(frozen=True)
class RiccatiChainEq:
    order: int
    alphas: tuple
    lhs: Expr


def theta_apply(e: Expr, omega: FunctionSymbol = OMEGA) -> Expr:
    """(d/dx + omega) e."""
    return normalize(differentiate(e) + omega * e)


def theta_power(k: int, omega: FunctionSymbol = OMEGA) -> Expr:
    """theta^k applied to omega; theta^0 omega = omega."""
    e: Expr = omega
    for _ in range(k):
        e = theta_apply(e, omega)
    return e


def build_chain_equation(N: int, alphas: Optional[Sequence[Expr]] = None,
                         omega: FunctionSymbol = OMEGA) -> RiccatiChainEq:
    if N < 1:
        raise ValueError("chain order must be a positive integer")
    alphas = symbolic_alphas(N + 1) if alphas is None else [as_expr(a) for a in alphas]
    if len(alphas) != N + 1:
        raise ValueError(f"order {N} needs {N + 1} coefficients, got {len(alphas)}")
    powers = [omega]
    for _ in range(N):
        powers.append(theta_apply(powers[-1], omega))
    lhs = powers[N] + alphas[0]
    for j in range(1, N + 1):
        lhs = lhs + alphas[j] * powers[j - 1]
    return RiccatiChainEq(N, tuple(normalize(a) for a in alphas), normalize(lhs))


def cole_hopf_y_derivative(k: int, omega: FunctionSymbol = OMEGA) -> Expr:
    """g_k with y^(k) = g_k * y when omega = y'/y."""
    g: Expr = ONE
    for _ in range(k):
        g = theta_apply(g, omega)
    return g


def linearize(eq: RiccatiChainEq) -> LinearOperator:
    n = eq.order + 1
    # r_{n-j} = alpha_j
    return LinearOperator(n, (ONE,) + tuple(reversed(eq.alphas)))


def delinearize(op: LinearOperator) -> RiccatiChainEq:
    if op.coeffs[0] != ONE:
        raise ValueError("leading coefficient must be 1; divide through first")
    alphas = [op.coeffs[op.order - j] for j in range(op.order)]
    return build_chain_equation(op.order - 1, alphas)


def cole_hopf_substitute(e: Expr, y: str = "y", omega: FunctionSymbol = OMEGA,
                         amplitude: Optional[Expr] = None) -> Expr:
    """Replace each y^(k) by g_k * Y where Y is ``amplitude`` (default: y itself).

    With ``amplitude = a*exp(Int(omega))`` this is the substitution y = a e^{int omega}.
    """
    base = fn(y) if amplitude is None else amplitude
    out = e
    for k in range(max_order(e, y), -1, -1):
        out = substitute(out, fn(y, k), cole_hopf_y_derivative(k, omega) * base)
    return normalize(out)


def linearization_certificate(eq: RiccatiChainEq, y: str = "y") -> Expr:
    """M(y) with y^(k) -> g_k y, minus lhs * y.  Zero iff the linearization is exact."""
    op = linearize(eq)
    return normalize(cole_hopf_substitute(op.apply(y), y) - eq.lhs * fn(y))


def bind(e: Expr, table: Dict[str, Expr]) -> Expr:
    """Specialize coefficient functions; derivative orders follow the bound expression."""
    return substitute_all_orders(e, table) if table else normalize(e)


def bind_alphas(alphas: Sequence[Expr], table: Dict[str, Expr]) -> List[Expr]:
    return [bind(a, table) for a in alphas]


def load_alpha_bindings(path: Union[str, Path]) -> Dict[str, Expr]:
    """Read ``aJ = <sexpr>`` lines; blank lines and ``#`` comments are skipped."""
    table: Dict[str, Expr] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, rhs = line.partition("=")
        name = name.strip()
        if not sep or not name:
            raise ValueError(f"{path}:{lineno}: expected 'NAME = <sexpr>'")
        table[name] = normalize(parse(rhs.strip()))
    return table


def default_amplitude(a: Optional[Expr] = None, omega: FunctionSymbol = OMEGA) -> Expr:
    """a * exp(Int(omega)), the Cole-Hopf inverse with integration constant a."""
    a = Sym("a") if a is None else as_expr(a)
    return normalize(a * Exp(Int(omega)))
