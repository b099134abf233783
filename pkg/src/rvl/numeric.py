"""Numerical checks: RK4 integration, Cole-Hopf consistency, actions and first variations."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .chain import RiccatiChainEq, cole_hopf_y_derivative
from .expr import (Add, Const, Exp, Expr, FunctionSymbol, Int, Mul, Pow, Sym, X,
                   differentiate, fn, is_zero, max_order, normalize, partial_derivative,
                   rewrite_atoms, substitute, x as X_VAR)
from .lagrangian import Lagrangian, _int_of
from .render import parse

BLOWUP = 1e12
DEFAULT_STEP = 1e-3


class UnboundSymbolError(KeyError):
    pass


@dataclass(frozen=True)
class Trajectory:
    """Samples of a dependent variable and its derivatives on a uniform grid.

    ``values[:, k]`` is the k-th derivative for k < order; ``top`` holds the
    order-th derivative as given by the equation.
    """

    variable: str
    x: np.ndarray
    values: np.ndarray
    top: np.ndarray
    h: float
    events: Tuple[str, ...] = ()

    @property
    def order(self) -> int:
        return self.values.shape[1]

    def __len__(self):
        return len(self.x)

    def derivative(self, k: int) -> np.ndarray:
        if k < self.order:
            return self.values[:, k]
        if k == self.order:
            return self.top
        raise ValueError(f"derivative {k} of {self.variable} not available (order {self.order})")

    def columns(self) -> Dict[Tuple[str, int], np.ndarray]:
        cols = {(self.variable, k): self.values[:, k] for k in range(self.order)}
        cols[(self.variable, self.order)] = self.top
        return cols

    def slice(self, start: int, stop: int) -> "Trajectory":
        return Trajectory(self.variable, self.x[start:stop], self.values[start:stop],
                          self.top[start:stop], self.h, self.events)

    @classmethod
    def from_functions(cls, variable: str, x: np.ndarray, derivatives: Sequence[Callable]):
        """Tabulate closed-form derivatives 0..n (the last one is stored as ``top``)."""
        x = np.asarray(x, dtype=float)
        cols = [np.asarray(f(x), dtype=float) * np.ones_like(x) for f in derivatives]
        h = float(x[1] - x[0]) if len(x) > 1 else 0.0
        return cls(variable, x, np.column_stack(cols[:-1]), cols[-1], h)

    def to_csv(self, path: Union[str, Path, None] = None) -> str:
        header = ", ".join(["x"] + [f"v{k}" for k in range(self.order)])
        lines = [header]
        for i in range(len(self.x)):
            lines.append(", ".join(f"{v:.12e}" for v in (self.x[i], *self.values[i])))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def uniform_grid(x0: float, x1: float, h: float = DEFAULT_STEP) -> np.ndarray:
    """Uniform grid from x0 to x1; the step is snapped so the grid ends exactly at x1."""
    if not h > 0:
        raise ValueError("step must be positive")
    n = int(round((x1 - x0) / h))
    if n < 1:
        raise ValueError("grid needs at least one step")
    return np.linspace(x0, x1, n + 1)


# ---------------------------------------------------------------------------
# coefficient bindings


def _exact(v: float) -> Fraction:
    return Fraction(repr(float(v))) if not isinstance(v, (int, Fraction)) else Fraction(v)


@dataclass
class CoefficientBinding:
    """Concrete values for coefficient functions and named constants.

    ``symbolic`` entries are constants or expressions in x (derivatives follow
    exactly); ``tables`` entries are sampled ``(xs, ys)`` pairs interpolated
    linearly, with derivatives by repeated ``np.gradient``.
    """

    symbolic: Dict[str, Expr] = field(default_factory=dict)
    tables: Dict[str, Tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    @classmethod
    def constants(cls, **values) -> "CoefficientBinding":
        return cls({k: Const(_exact(v)) for k, v in values.items()})

    def bind(self, name: str, value) -> "CoefficientBinding":
        sym = dict(self.symbolic)
        sym[name] = value if isinstance(value, Expr) else Const(_exact(value))
        return CoefficientBinding(sym, dict(self.tables))

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "CoefficientBinding":
        """Lines ``NAME = const <decimal>``, ``NAME = table <csv>`` or ``NAME = <sexpr>``."""
        path = Path(path)
        out = cls()
        for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            name, sep, rhs = (s.strip() for s in line.partition("="))
            if not sep or not name:
                raise ValueError(f"{path}:{lineno}: expected 'NAME = ...'")
            kind, _, arg = rhs.partition(" ")
            if kind == "const":
                out.symbolic[name] = Const(Fraction(arg.strip()))
            elif kind == "table":
                table = Path(arg.strip())
                if not table.is_absolute():
                    table = path.parent / table
                data = np.loadtxt(table, delimiter=",", ndmin=2, comments="#")
                out.tables[name] = (data[:, 0], data[:, 1])
            else:
                out.symbolic[name] = normalize(parse(rhs))
        return out

    def specialize(self, e: Expr) -> Expr:
        if not self.symbolic:
            return e
        cache: dict = {}

        def replace(a):
            if isinstance(a, FunctionSymbol) and a.name in self.symbolic:
                key = (a.name, a.order)
                if key not in cache:
                    cache[key] = differentiate(self.symbolic[a.name], a.order)
                return cache[key]
            if isinstance(a, Sym) and a.name in self.symbolic:
                return self.symbolic[a.name]
            return None
        return rewrite_atoms(e, replace)

    def table_value(self, name: str, order: int, xv):
        xs, ys = self.tables[name]
        vals = ys
        for _ in range(order):
            vals = np.gradient(vals, xs)
        return np.interp(xv, xs, vals)


# ---------------------------------------------------------------------------
# numeric evaluation


def _compile(e: Expr, binding: CoefficientBinding) -> Callable[[dict], object]:
    """Closure evaluating ``e`` given env {'x': ..., (name, k): ...}; arrays or scalars."""
    if isinstance(e, Const):
        v = float(e.value)
        return lambda env: v
    if isinstance(e, X):
        return lambda env: env["x"]
    if isinstance(e, Sym):
        name = e.name

        def const(env):
            raise UnboundSymbolError(f"constant {name!r} is not bound")
        return const
    if isinstance(e, FunctionSymbol):
        key = (e.name, e.order)
        if e.name in binding.tables:
            return lambda env: binding.table_value(key[0], key[1], env["x"])

        def look(env):
            try:
                return env[key]
            except KeyError:
                raise UnboundSymbolError(f"{key[0]} (derivative {key[1]}) is not bound") from None
        return look
    if isinstance(e, Add):
        parts = [_compile(t, binding) for t in e.terms]
        return lambda env: sum(p(env) for p in parts) if parts else 0.0
    if isinstance(e, Mul):
        parts = [_compile(t, binding) for t in e.factors]

        def prod(env):
            out = 1.0
            for p in parts:
                out = out * p(env)
            return out
        return prod
    if isinstance(e, Pow):
        base, k = _compile(e.base, binding), e.exponent
        return lambda env: base(env) ** k if k >= 0 else 1.0 / base(env) ** (-k)
    if isinstance(e, Exp):
        arg = _compile(e.arg, binding)
        return lambda env: np.exp(arg(env))
    if isinstance(e, Int):
        arg = _compile(e.arg, binding)

        def integral(env):
            xv = env["x"]
            if np.ndim(xv) == 0:
                raise ValueError("antiderivatives need grid evaluation")
            vals = np.asarray(arg(env), dtype=float) * np.ones_like(xv)
            return cumulative_trapezoid(vals, xv, initial=0.0)
        return integral
    raise TypeError(e)


def evaluate(e: Expr, binding: CoefficientBinding, traj: Trajectory,
             index: Optional[int] = None):
    """Value of ``e`` along ``traj`` (array), or at one sample when ``index`` is given.

    Antiderivatives are cumulative trapezoidal integrals from the first sample.
    """
    fnc = _compile(binding.specialize(e), binding)
    env = {"x": traj.x, **traj.columns()}
    vals = np.asarray(fnc(env), dtype=float) * np.ones_like(traj.x)
    return vals if index is None else float(vals[index])


def action(L: Lagrangian, binding: CoefficientBinding, traj: Trajectory) -> float:
    """Composite trapezoidal quadrature of L along the trajectory."""
    return float(np.trapezoid(evaluate(L.expr, binding, traj), traj.x))


# ---------------------------------------------------------------------------
# integration


def _explicit_rhs(eq: Expr, var: str):
    n = max_order(eq, var)
    if n < 1:
        raise ValueError(f"equation has no derivative of {var}")
    top = fn(var, n)
    if partial_derivative(eq, top) != Const(1):
        raise ValueError("highest derivative must enter linearly with unit coefficient")
    rhs = normalize(-substitute(eq, top, Const(0)))
    return n, rhs


def integrate(eq: Expr, var: str, binding: CoefficientBinding, init: Sequence[float],
              x0: float, x1: float, h: float = DEFAULT_STEP) -> Trajectory:
    """Classical RK4 for ``eq = 0`` solved for the highest derivative of ``var``.

    A sample exceeding 1e12 in magnitude (or non-finite) ends the run; the
    trajectory is truncated and the event recorded.
    """
    eq = binding.specialize(eq)
    n, rhs = _explicit_rhs(eq, var)
    if len(init) != n:
        raise ValueError(f"need {n} initial values, got {len(init)}")
    f = _compile(rhs, binding)
    grid = uniform_grid(x0, x1, h)
    h = float(grid[1] - grid[0])
    keys = [(var, k) for k in range(n)]

    def deriv(xv, s):
        env = {"x": xv}
        env.update(zip(keys, s))
        out = np.empty(n)
        out[:-1] = s[1:]
        out[-1] = f(env)
        return out

    states = np.empty((len(grid), n))
    states[0] = np.asarray(init, dtype=float)
    events: List[str] = []
    last = len(grid)
    with np.errstate(all="ignore"):
        for i in range(len(grid) - 1):
            s, xv = states[i], grid[i]
            k1 = deriv(xv, s)
            k2 = deriv(xv + h / 2, s + h / 2 * k1)
            k3 = deriv(xv + h / 2, s + h / 2 * k2)
            k4 = deriv(xv + h, s + h * k3)
            nxt = s + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(nxt)) or np.max(np.abs(nxt)) > BLOWUP:
                events.append(f"blow-up near x={grid[i + 1]:.6g}")
                last = i + 1
                break
            states[i + 1] = nxt
    grid, states = grid[:last], states[:last]
    env = {"x": grid}
    env.update({k: states[:, j] for j, k in enumerate(keys)})
    top = np.asarray(f(env), dtype=float) * np.ones_like(grid)
    return Trajectory(var, grid, states, top, h, tuple(events))


def step_halving_order(eq: Expr, var: str, binding: CoefficientBinding, init: Sequence[float],
                       x0: float, at: float, exact: float, h: float, halvings: int = 3) -> float:
    """Observed order: least-squares slope of log2(error at ``at``) over h, h/2, ..., h/2^halvings."""
    steps, errs = [], []
    for i in range(halvings + 1):
        step = h / 2 ** i
        tr = integrate(eq, var, binding, init, x0, at, step)
        steps.append(step)
        errs.append(abs(tr.derivative(0)[-1] - exact))
    slope, _ = np.polyfit(np.log2(steps), np.log2(errs), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# Cole-Hopf consistency


@dataclass(frozen=True)
class ConsistencyResult:
    deviation: float
    window: Tuple[float, float]
    omega: Trajectory


def _largest_window(mask: np.ndarray, breaks: np.ndarray) -> Tuple[int, int]:
    """Longest run of True in ``mask`` not crossing an index flagged in ``breaks``."""
    best, start = (0, 0), None
    for i, ok in enumerate(np.append(mask, False)):
        if start is not None and (not ok or breaks[i]):
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
        if ok and start is None:
            start = i
    return best


def omega_initial_data(y_derivs: Sequence[float], N: int) -> List[float]:
    """omega, omega', ..., omega^(N-1) at a point from y, y', ..., y^(N) there."""
    y0 = y_derivs[0]
    known: Dict[Tuple[str, int], float] = {}
    for j in range(N):
        g = cole_hopf_y_derivative(j + 1)
        lower = normalize(substitute(g, fn("w", j), Const(0)))
        env = {"x": 0.0, **known}
        rest = float(_compile(lower, CoefficientBinding())(env)) if not is_zero(lower) else 0.0
        known[("w", j)] = y_derivs[j + 1] / y0 - rest
    return [known[("w", j)] for j in range(N)]


def cole_hopf_consistency(y_traj: Trajectory, eq: RiccatiChainEq,
                          binding: CoefficientBinding, threshold: float = 1e-8) -> ConsistencyResult:
    """Max |omega - y'/y| with omega integrated from matching initial data.

    Only the largest window on which y keeps its sign and |y| stays above
    ``threshold * max|y|`` is used.
    """
    y = y_traj.derivative(0)
    scale = float(np.max(np.abs(y))) if len(y) else 0.0
    mask = np.abs(y) > threshold * scale if scale > 0 else np.zeros(len(y), bool)
    breaks = np.append(False, np.sign(y[1:]) != np.sign(y[:-1]))
    lo, hi = _largest_window(mask, np.append(breaks, False))
    if hi - lo < 2:
        raise ValueError("y vanishes on the sampled grid; no window for omega = y'/y")
    N = eq.order
    init = omega_initial_data([y_traj.derivative(k)[lo] for k in range(N + 1)], N)
    om = integrate(eq.lhs, "w", binding, init, float(y_traj.x[lo]), float(y_traj.x[hi - 1]), y_traj.h)
    m = min(len(om), hi - lo)
    ratio = y_traj.derivative(1)[lo:lo + m] / y[lo:lo + m]
    dev = float(np.max(np.abs(om.derivative(0)[:m] - ratio)))
    return ConsistencyResult(dev, (float(y_traj.x[lo]), float(y_traj.x[lo + m - 1])), om)


# ---------------------------------------------------------------------------
# first variation

Bump = Union[Expr, Callable[[np.ndarray, int], np.ndarray]]


def polynomial_bump(x0: float, x1: float, power: int = 4) -> Expr:
    """((x - x0)(x1 - x))^power: vanishes with power-1 derivatives at both ends."""
    a, b = Const(_exact(x0)), Const(_exact(x1))
    return normalize(((X_VAR - a) * (b - X_VAR)) ** power)


def sine_bump(x0: float, x1: float, power: int = 4) -> Callable[[np.ndarray, int], np.ndarray]:
    """sin^power(pi (x - x0)/(x1 - x0)) with exact derivatives of any order."""
    c = math.pi / (x1 - x0)

    def bump(xv, k):
        theta = c * (np.asarray(xv, dtype=float) - x0)
        total = np.zeros_like(theta, dtype=complex)
        for j in range(power + 1):
            freq = (power - 2 * j) * c
            total += math.comb(power, j) * (-1) ** j * (1j * freq) ** k * np.exp(1j * (power - 2 * j) * theta)
        return np.real(total / (2j) ** power)
    return bump


def _bump_derivs(bump: Bump, xv: np.ndarray, count: int) -> List[np.ndarray]:
    if isinstance(bump, Expr):
        out, e = [], normalize(bump)
        for _ in range(count):
            f = _compile(e, CoefficientBinding())
            out.append(np.asarray(f({"x": xv}), dtype=float) * np.ones_like(xv))
            e = differentiate(e)
        return out
    return [np.asarray(bump(xv, k), dtype=float) * np.ones_like(xv) for k in range(count)]


def first_variation_residual(L: Lagrangian, binding: CoefficientBinding, traj: Trajectory,
                             bump: Bump, eps: float = 1e-4, support_tol: float = 1e-9) -> float:
    """|S(traj + eps b) - S(traj - eps b)| / (2 eps).

    Lagrangians containing Int(var) are varied through the potential:
    var^(k) moves by eps b^(k+1), so b and its first ``L.order`` derivatives must
    vanish at both ends; otherwise derivatives below ``L.order`` must vanish.
    """
    shift = 1 if _int_of(L.expr, L.variable) else 0
    needed = L.order + 1
    derivs = _bump_derivs(bump, traj.x, needed + shift)
    scale = max(1.0, max(float(np.max(np.abs(d))) for d in derivs))
    for j in range(L.order + shift):
        if abs(derivs[j][0]) > support_tol * scale or abs(derivs[j][-1]) > support_tol * scale:
            raise ValueError(f"bump derivative {j} does not vanish at the endpoints")

    if L.order > traj.order:
        raise ValueError("trajectory does not carry enough derivatives for this Lagrangian")

    def moved(sign):
        cols = [traj.derivative(k) + sign * eps * derivs[k + shift] for k in range(needed)]
        values = np.column_stack(cols[:-1]) if len(cols) > 1 else np.empty((len(traj.x), 0))
        return Trajectory(traj.variable, traj.x, values, cols[-1], traj.h)

    return abs(action(L, binding, moved(+1)) - action(L, binding, moved(-1))) / (2 * eps)
