"""Expression kernel: tree nodes, canonical form, total and partial derivatives.

Trees are built freely with the arithmetic operators and are brought to a
canonical shape by :func:`normalize`.  Internally every tree maps to a
Laurent polynomial over *atoms* (``x``, named constants, function symbols,
``exp`` and ``Int`` nodes) with exact rational coefficients; the canonical
tree is the deterministic rendering of that polynomial.  Two expressions are
equal iff their canonical trees are structurally identical.

Canonical conventions:

* at most one ``Exp`` atom per monomial, always to the first power
  (``exp(u)*exp(v) -> exp(u+v)``, ``exp(u)**k -> exp(k*u)``);
* ``Int`` is linear: rational factors and named constants are pulled out,
  so every ``Int`` atom wraps a monic monomial (or ``1``).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, Iterable, Tuple, Union

__all__ = [
    "Expr", "Const", "X", "Sym", "FunctionSymbol", "Add", "Mul", "Pow", "Exp", "Int",
    "fn", "sym", "as_expr", "ZERO", "ONE", "x",
    "normalize", "differentiate", "partial_derivative", "substitute", "substitute_all_orders",
    "free_symbols", "max_order", "coefficient", "is_zero", "expr_sum", "expr_product",
    "divide", "monomial_parts", "rewrite_atoms",
]

Number = Union[int, Fraction]


class Expr:
    """Base class of all expression nodes.  Nodes are immutable."""

    def __add__(self, other):
        return Add((self, as_expr(other)))

    def __radd__(self, other):
        return Add((as_expr(other), self))

    def __sub__(self, other):
        return Add((self, Mul((Const(-1), as_expr(other)))))

    def __rsub__(self, other):
        return Add((as_expr(other), Mul((Const(-1), self))))

    def __mul__(self, other):
        return Mul((self, as_expr(other)))

    def __rmul__(self, other):
        return Mul((as_expr(other), self))

    def __neg__(self):
        return Mul((Const(-1), self))

    def __pow__(self, k: int):
        if not isinstance(k, int):
            raise TypeError("only integer exponents are supported")
        return Pow(self, k)

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return Mul((self, Const(Fraction(1) / other)))
        return Mul((self, Pow(as_expr(other), -1)))

    def __hash__(self):
        h = self.__dict__.get("_h")
        if h is None:
            h = hash((type(self).__name__,) + tuple(self.__dict__[f] for f in self.__dataclass_fields__))
            object.__setattr__(self, "_h", h)
        return h

    def __str__(self):
        from .render import render
        return render(self, "plain")

    def diff(self, times: int = 1) -> "Expr":
        e = self
        for _ in range(times):
            e = differentiate(e)
        return e


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))

    __hash__ = Expr.__hash__


@dataclass(frozen=True, eq=True)
class X(Expr):
    """The independent variable."""

    __hash__ = Expr.__hash__


@dataclass(frozen=True, eq=True)
class Sym(Expr):
    """Named constant (x-derivative zero), e.g. the integration constant ``a``."""

    name: str

    __hash__ = Expr.__hash__


@dataclass(frozen=True, eq=True)
class FunctionSymbol(Expr):
    """Unknown function of x after ``order`` derivatives."""

    name: str
    order: int = 0

    def bumped(self, k: int = 1) -> "FunctionSymbol":
        return FunctionSymbol(self.name, self.order + k)

    __hash__ = Expr.__hash__


@dataclass(frozen=True, eq=True)
class Add(Expr):
    terms: Tuple[Expr, ...]

    __hash__ = Expr.__hash__


@dataclass(frozen=True, eq=True)
class Mul(Expr):
    factors: Tuple[Expr, ...]

    __hash__ = Expr.__hash__


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: int

    __hash__ = Expr.__hash__


@dataclass(frozen=True, eq=True)
class Exp(Expr):
    arg: Expr

    __hash__ = Expr.__hash__


@dataclass(frozen=True, eq=True)
class Int(Expr):
    """Formal antiderivative with respect to x."""

    arg: Expr

    __hash__ = Expr.__hash__


ZERO = Const(0)
ONE = Const(1)
x = X()


def fn(name: str, order: int = 0) -> FunctionSymbol:
    return FunctionSymbol(name, order)


def sym(name: str) -> Sym:
    return Sym(name)


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, Fraction)):
        return Const(Fraction(v))
    raise TypeError(f"cannot convert {type(v).__name__} to Expr")


def expr_sum(items: Iterable) -> Expr:
    return Add(tuple(as_expr(i) for i in items))


def expr_product(items: Iterable) -> Expr:
    return Mul(tuple(as_expr(i) for i in items))


# ---------------------------------------------------------------------------
# ordering

_NAME_RE = re.compile(r"^([A-Za-z_]+?)(\d*)$")
# x < alphas < r's < q < w < W < y < z < anything else
_FAMILY_RANK = {"a": 2, "r": 3, "q": 4, "w": 5, "W": 6, "y": 7, "z": 8}


def _name_key(name: str):
    m = _NAME_RE.match(name)
    if m is None:
        return (9, name, 0)
    base, idx = m.group(1), m.group(2)
    if base in ("a", "r") and not idx:
        return (9, name, 0)
    return (_FAMILY_RANK.get(base, 9), base, int(idx) if idx else -1)


def _atom_key(a: Expr):
    k = a.__dict__.get("_k")
    if k is not None:
        return k
    if isinstance(a, X):
        k = (1, "", 0, 0, "")
    elif isinstance(a, Sym):
        k = (0, a.name, 0, 0, "")
    elif isinstance(a, FunctionSymbol):
        r, base, idx = _name_key(a.name)
        k = (r, base, idx, a.order, "")
    elif isinstance(a, Int):
        from .render import render
        k = (20, "", 0, 0, render(a.arg, "sexpr"))
    elif isinstance(a, Exp):
        from .render import render
        k = (30, "", 0, 0, render(a.arg, "sexpr"))
    else:  # pragma: no cover - atoms are closed
        raise TypeError(a)
    object.__setattr__(a, "_k", k)
    return k


def _mono_key(mono):
    deg = sum(e for a, e in mono if not isinstance(a, Exp))
    return (deg, tuple((_atom_key(a), e) for a, e in mono))


# ---------------------------------------------------------------------------
# polynomial engine
#
# Poly: dict mapping monomial -> nonzero Fraction.
# monomial: tuple of (atom, nonzero int exponent), sorted by _atom_key.

Poly = Dict[tuple, Fraction]
_ONE_MONO: tuple = ()


def _sorted_mono(d: dict) -> tuple:
    return tuple(sorted(((a, e) for a, e in d.items() if e != 0), key=lambda t: _atom_key(t[0])))


def _mono_mul(m1: tuple, m2: tuple):
    """Product of two canonical monomials (exponentials merged)."""
    if not m1:
        return m2
    if not m2:
        return m1
    d = dict(m1)
    for a, e in m2:
        d[a] = d.get(a, 0) + e
    exps = [a for a in d if isinstance(a, Exp)]
    if exps and (len(exps) > 1 or d[exps[0]] != 1):
        arg: Poly = {}
        for a in exps:
            _add_into(arg, _poly(a.arg), Fraction(d.pop(a)))
        if arg:
            d[_make_exp(arg)] = 1
    return _sorted_mono(d)


def _add_into(acc: Poly, p: Poly, scale: Fraction = Fraction(1)):
    for m, c in p.items():
        v = acc.get(m, 0) + c * scale
        if v:
            acc[m] = v
        else:
            acc.pop(m, None)


def _padd(*ps: Poly) -> Poly:
    acc: Poly = {}
    for p in ps:
        _add_into(acc, p)
    return acc


def _pscale(p: Poly, c: Fraction) -> Poly:
    if not c:
        return {}
    return {m: v * c for m, v in p.items()}


def _pmul(p: Poly, q: Poly) -> Poly:
    if len(p) > len(q):
        p, q = q, p
    acc: Poly = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = _mono_mul(m1, m2)
            v = acc.get(m, 0) + c1 * c2
            if v:
                acc[m] = v
            else:
                acc.pop(m, None)
    return acc


def _ppow(p: Poly, k: int) -> Poly:
    if k == 0:
        return {_ONE_MONO: Fraction(1)}
    if k < 0:
        if len(p) != 1:
            raise ValueError("negative powers are supported for monomials only")
        (m, c), = p.items()
        return _mono_pow(m, c, k)
    if len(p) == 1:
        (m, c), = p.items()
        return _mono_pow(m, c, k)
    result = {_ONE_MONO: Fraction(1)}
    base = p
    while k:
        if k & 1:
            result = _pmul(result, base)
        k >>= 1
        if k:
            base = _pmul(base, base)
    return result


def _mono_pow(m: tuple, c: Fraction, k: int) -> Poly:
    d: dict = {}
    arg: Poly = {}
    for a, e in m:
        if isinstance(a, Exp):
            _add_into(arg, _poly(a.arg), Fraction(e * k))
        else:
            d[a] = e * k
    if arg:
        d[_make_exp(arg)] = 1
    return {_sorted_mono(d): c ** k}


def _atom_poly(a: Expr) -> Poly:
    return {((a, 1),): Fraction(1)}


def _make_exp(arg: Poly) -> Exp:
    node = Exp(_from_poly(arg))
    return node


def _make_int(arg: Poly) -> Poly:
    """Linear formal antiderivative: constants and named constants pulled out."""
    out: Poly = {}
    for m, c in arg.items():
        inner = tuple((a, e) for a, e in m if not isinstance(a, Sym))
        outer = tuple((a, e) for a, e in m if isinstance(a, Sym))
        node = Int(_from_poly({inner: Fraction(1)}))
        mono = _sorted_mono(dict(outer + ((node, 1),)))
        v = out.get(mono, 0) + c
        if v:
            out[mono] = v
        else:
            out.pop(mono, None)
    return out


def _poly(e: Expr) -> Poly:
    p = e.__dict__.get("_p")
    if p is not None:
        return p
    if isinstance(e, Const):
        p = {_ONE_MONO: e.value} if e.value else {}
    elif isinstance(e, (X, Sym, FunctionSymbol)):
        p = _atom_poly(e)
    elif isinstance(e, Add):
        p = _padd(*(_poly(t) for t in e.terms))
    elif isinstance(e, Mul):
        p = {_ONE_MONO: Fraction(1)}
        for f in e.factors:
            p = _pmul(p, _poly(f))
            if not p:
                break
    elif isinstance(e, Pow):
        p = _ppow(_poly(e.base), e.exponent)
    elif isinstance(e, Exp):
        arg = _poly(e.arg)
        p = {_ONE_MONO: Fraction(1)} if not arg else _atom_poly(_make_exp(arg))
    elif isinstance(e, Int):
        p = _make_int(_poly(e.arg))
    else:
        raise TypeError(f"not an expression node: {e!r}")
    object.__setattr__(e, "_p", p)
    return p


def _term_tree(m: tuple, c: Fraction) -> Expr:
    factors = [] if c == 1 else [Const(c)]
    for a, e in m:
        factors.append(a if e == 1 else Pow(a, e))
    if not factors:
        return Const(c)
    if len(factors) == 1:
        return factors[0]
    return Mul(tuple(factors))


def _from_poly(p: Poly) -> Expr:
    if not p:
        node = Const(0)
    else:
        monos = sorted(p, key=_mono_key)
        terms = [_term_tree(m, p[m]) for m in monos]
        node = terms[0] if len(terms) == 1 else Add(tuple(terms))
    object.__setattr__(node, "_p", p)
    return node


# ---------------------------------------------------------------------------
# public operations


def normalize(e: Expr) -> Expr:
    """Canonical form of ``e``."""
    return _from_poly(_poly(as_expr(e)))


def is_zero(e: Expr) -> bool:
    return not _poly(as_expr(e))


def _d_atom(a: Expr) -> Poly:
    if isinstance(a, X):
        return {_ONE_MONO: Fraction(1)}
    if isinstance(a, Sym):
        return {}
    if isinstance(a, FunctionSymbol):
        return _atom_poly(a.bumped())
    if isinstance(a, Exp):
        return _pmul(_diff(_poly(a.arg)), _atom_poly(a))
    if isinstance(a, Int):
        return _poly(a.arg)
    raise TypeError(a)


def _chain(p: Poly, d_atom: Callable[[Expr], Poly]) -> Poly:
    """Sum over atoms of (d monomial / d atom) * d_atom(atom)."""
    acc: Poly = {}
    cache: dict = {}
    for m, c in p.items():
        for i, (a, e) in enumerate(m):
            da = cache.get(a)
            if da is None:
                da = cache[a] = d_atom(a)
            if not da:
                continue
            if e == 1:
                rest = m[:i] + m[i + 1:]
            elif isinstance(a, Exp):
                rest = m  # never happens for canonical monomials
            else:
                rest = m[:i] + ((a, e - 1),) + m[i + 1:]
            scale = c * e
            for m2, c2 in da.items():
                mm = _mono_mul(rest, m2)
                v = acc.get(mm, 0) + scale * c2
                if v:
                    acc[mm] = v
                else:
                    acc.pop(mm, None)
    return acc


def _diff(p: Poly) -> Poly:
    return _chain(p, _d_atom)


def differentiate(e: Expr, times: int = 1) -> Expr:
    """Total x-derivative, applied ``times`` times, in canonical form."""
    p = _poly(as_expr(e))
    for _ in range(times):
        p = _diff(p)
    return _from_poly(p)


def _contains(p: Poly, s: Expr) -> bool:
    for m in p:
        for a, _ in m:
            if a == s:
                return True
            if isinstance(a, (Exp, Int)) and _contains(_poly(a.arg), s):
                return True
    return False


def _partial(p: Poly, s: FunctionSymbol) -> Poly:
    def d_atom(a):
        if a == s:
            return {_ONE_MONO: Fraction(1)}
        if isinstance(a, Exp):
            inner = _partial(_poly(a.arg), s)
            return _pmul(inner, _atom_poly(a)) if inner else {}
        if isinstance(a, Int) and _contains(_poly(a.arg), s):
            raise ValueError(
                f"{s.name} occurs under an antiderivative; rewrite in a potential variable first")
        return {}
    return _chain(p, d_atom)


def partial_derivative(e: Expr, s: FunctionSymbol) -> Expr:
    """Formal partial with respect to the occurrence ``s``; other orders held fixed."""
    return _from_poly(_partial(_poly(as_expr(e)), s))


def _rebuild(p: Poly, replace: Callable[[Expr], Union[Poly, None]]) -> Poly:
    """Rewrite atoms; ``replace`` returns a Poly for atoms it rewrites, else None."""
    cache: dict = {}

    def atom(a):
        r = cache.get(a)
        if r is not None:
            return r
        r = replace(a)
        if r is None:
            if isinstance(a, Exp):
                arg = _rebuild(_poly(a.arg), replace)
                r = {_ONE_MONO: Fraction(1)} if not arg else _atom_poly(_make_exp(arg))
            elif isinstance(a, Int):
                r = _make_int(_rebuild(_poly(a.arg), replace))
            else:
                r = _atom_poly(a)
        cache[a] = r
        return r

    acc: Poly = {}
    for m, c in p.items():
        term: Poly = {_ONE_MONO: c}
        for a, e in m:
            term = _pmul(term, _ppow(atom(a), e))
            if not term:
                break
        _add_into(acc, term)
    return acc


def substitute(e: Expr, target: Expr, replacement: Expr) -> Expr:
    """Replace every occurrence of the atom ``target`` (exact order only)."""
    target = as_expr(target)
    rp = _poly(as_expr(replacement))
    return _from_poly(_rebuild(_poly(as_expr(e)), lambda a: rp if a == target else None))


def substitute_all_orders(e: Expr, table: Dict[str, Expr]) -> Expr:
    """Bind function names to expressions, rewriting every derivative order consistently."""
    derived: dict = {}

    def replace(a):
        if isinstance(a, FunctionSymbol) and a.name in table:
            key = (a.name, a.order)
            if key not in derived:
                derived[key] = _poly(differentiate(table[a.name], a.order)) if a.order else _poly(
                    as_expr(table[a.name]))
            return derived[key]
        return None

    return _from_poly(_rebuild(_poly(as_expr(e)), replace))


def free_symbols(e: Expr) -> set:
    """Function symbols, named constants and x occurring anywhere in ``e``."""
    out = set()

    def walk(p):
        for m in p:
            for a, _ in m:
                if isinstance(a, (Exp, Int)):
                    walk(_poly(a.arg))
                else:
                    out.add(a)
    walk(_poly(as_expr(e)))
    return out


def max_order(e: Expr, name: str) -> int:
    """Highest derivative order of ``name`` in ``e``; -1 if absent."""
    orders = [s.order for s in free_symbols(e) if isinstance(s, FunctionSymbol) and s.name == name]
    return max(orders, default=-1)


def coefficient(e: Expr, s: FunctionSymbol) -> Expr:
    """Coefficient of ``s`` in an expression linear in ``s``."""
    return partial_derivative(e, s)


def divide(num: Expr, den: Expr):
    """Multivariate division of ``num`` by ``den`` with exponentials as units.

    Returns ``(quotient, remainder)`` with ``num = quotient*den + remainder``.
    Monomials are ordered lexicographically over the non-exponential atoms;
    the leading term of ``den`` must be a single monomial.
    """
    N = dict(_poly(as_expr(num)))
    D = _poly(as_expr(den))
    if not D:
        raise ZeroDivisionError("division by zero expression")
    universe = set()
    for p in (N, D):
        for m in p:
            universe.update(a for a, _ in m if not isinstance(a, Exp))
    order = sorted(universe, key=_atom_key, reverse=True)
    pos = {a: i for i, a in enumerate(order)}
    vcache: dict = {}

    def vec(m):
        v = vcache.get(m)
        if v is None:
            lst = [0] * len(order)
            for a, e in m:
                if not isinstance(a, Exp):
                    lst[pos[a]] = e
            v = vcache[m] = tuple(lst)
        return v

    lead = max(D, key=vec)
    if sum(1 for m in D if vec(m) == vec(lead)) != 1:
        raise ValueError("leading coefficient of the divisor is not a unit")
    (inv_mono, inv_c), = _mono_pow(lead, D[lead], -1).items()
    lead_vec = vec(lead)
    Q: Poly = {}
    R: Poly = {}
    steps = 0
    while N:
        steps += 1
        if steps > 200000:
            raise RuntimeError("division did not terminate")
        m = max(N, key=lambda t: (vec(t), _mono_key(t)))
        c = N.pop(m)
        mv = vec(m)
        if all(a >= b for a, b in zip(mv, lead_vec)):
            qm = _mono_mul(m, inv_mono)
            qc = c * inv_c
            _add_into(Q, {qm: qc})
            for dm, dc in D.items():
                if dm == lead:
                    continue
                pm = _mono_mul(qm, dm)
                v = N.get(pm, 0) - qc * dc
                if v:
                    N[pm] = v
                else:
                    N.pop(pm, None)
        else:
            R[m] = c
    return _from_poly(Q), _from_poly(R)


def monomial_parts(e: Expr):
    """For a single-term expression: (coefficient, atoms as (atom, exponent) tuple)."""
    p = _poly(as_expr(e))
    if len(p) != 1:
        raise ValueError("not a single term")
    (m, c), = p.items()
    return c, m


def common_factor(e: Expr):
    """(f, rest) with e = f * rest, f the product of atoms shared by every term."""
    p = _poly(as_expr(e))
    if len(p) < 2:
        return ONE, _from_poly(p)
    monos = [dict(m) for m in p]
    shared = {}
    for a, k in monos[0].items():
        ks = [m.get(a, 0) for m in monos]
        if all(v > 0 for v in ks):
            shared[a] = min(ks)
    if not shared:
        return ONE, _from_poly(p)
    rest: Poly = {}
    for m, c in p.items():
        d = dict(m)
        for a, k in shared.items():
            d[a] -= k
        rest[_sorted_mono(d)] = c
    return _from_poly({_sorted_mono(shared): Fraction(1)}), _from_poly(rest)


def rewrite_atoms(e: Expr, replace: Callable[[Expr], Union[Expr, None]]) -> Expr:
    """Rewrite atoms (also inside exp and Int); ``replace`` returns None to keep an atom."""
    def rp(a):
        r = replace(a)
        return None if r is None else _poly(as_expr(r))
    return _from_poly(_rebuild(_poly(as_expr(e)), rp))
