"""Serialization of expressions: plain text, LaTeX, and the s-expression wire format.

The s-expression grammar::

    atom  := -?[0-9]+ | -?[0-9]+/[0-9]+ | x
    node  := (+ e...) | (* e...) | (^ e k) | (exp e) | (int e)
           | (dn NAME k) | (fn NAME) | (sym NAME)

``(fn NAME)`` is shorthand for ``(dn NAME 0)``; ``(sym NAME)`` is a named
constant such as the integration constant ``a``.
"""
from __future__ import annotations

import re
from fractions import Fraction
from typing import Callable, Iterable, Optional

from .expr import (Add, Const, Exp, Expr, FunctionSymbol, Int, Mul, Pow, Sym, X, normalize)

__all__ = ["render", "parse", "ParseError", "UnknownSymbolError", "is_declared_name",
           "DEFAULT_CONSTANTS"]

FORMATS = ("plain", "latex", "sexpr")
DEFAULT_CONSTANTS = frozenset({"a"})
_DECLARED_RE = re.compile(r"^(w|y|z|W|q|a\d+|r\d+)$")


def is_declared_name(name: str) -> bool:
    return bool(_DECLARED_RE.match(name))


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownSymbolError(ParseError):
    pass


def render(e: Expr, format: str = "plain") -> str:
    """Deterministic text of the canonical form of ``e``."""
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}")
    e = normalize(e)
    if format == "sexpr":
        return _sexpr(e)
    if format == "latex":
        return _infix(e, _LATEX)
    return _infix(e, _PLAIN)


# ---------------------------------------------------------------------------
# s-expressions


def _num(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def _sexpr(e: Expr) -> str:
    if isinstance(e, Const):
        return _num(e.value)
    if isinstance(e, X):
        return "x"
    if isinstance(e, Sym):
        return f"(sym {e.name})"
    if isinstance(e, FunctionSymbol):
        return f"(dn {e.name} {e.order})"
    if isinstance(e, Add):
        return "(+ " + " ".join(_sexpr(t) for t in e.terms) + ")"
    if isinstance(e, Mul):
        return "(* " + " ".join(_sexpr(t) for t in e.factors) + ")"
    if isinstance(e, Pow):
        return f"(^ {_sexpr(e.base)} {e.exponent})"
    if isinstance(e, Exp):
        return f"(exp {_sexpr(e.arg)})"
    if isinstance(e, Int):
        return f"(int {_sexpr(e.arg)})"
    raise TypeError(e)


_TOKEN_RE = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")
_INT_RE = re.compile(r"^-?[0-9]+$")
_RAT_RE = re.compile(r"^-?[0-9]+/[0-9]+$")


def _tokens(text: str):
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                return
            raise ParseError("unexpected character", pos)
        start = m.start(m.lastindex)
        yield m.group(m.lastindex), start
        pos = m.end()


def parse(text: str, names: Optional[Iterable[str]] = None,
          constants: Iterable[str] = DEFAULT_CONSTANTS) -> Expr:
    """Parse the s-expression form.

    ``names`` extends the declared function names (w, y, z, W, q, aJ, rJ).
    The result is the tree as written; apply :func:`normalize` for canonical form.
    """
    extra = set(names or ())
    consts = set(constants)

    def declared(name):
        return name in extra or is_declared_name(name)

    toks = list(_tokens(text))
    if not toks:
        raise ParseError("empty input", 0)
    pos = 0

    def expect_atom():
        nonlocal pos
        if pos >= len(toks):
            raise ParseError("unexpected end of input", len(text))
        tok, at = toks[pos]
        if tok in "()":
            raise ParseError(f"expected atom, found {tok!r}", at)
        pos += 1
        return tok, at

    def parse_int(tok, at):
        if not _INT_RE.match(tok):
            raise ParseError(f"expected integer, found {tok!r}", at)
        return int(tok)

    def node():
        nonlocal pos
        if pos >= len(toks):
            raise ParseError("unexpected end of input", len(text))
        tok, at = toks[pos]
        pos += 1
        if tok == ")":
            raise ParseError("unexpected ')'", at)
        if tok != "(":
            if tok == "x":
                return X()
            if _INT_RE.match(tok):
                return Const(int(tok))
            if _RAT_RE.match(tok):
                num, den = tok.split("/")
                if int(den) == 0:
                    raise ParseError("zero denominator", at)
                return Const(Fraction(int(num), int(den)))
            raise ParseError(f"unexpected atom {tok!r}", at)
        op, op_at = expect_atom()
        if op in ("+", "*"):
            args = []
            while pos < len(toks) and toks[pos][0] != ")":
                args.append(node())
            close()
            return Add(tuple(args)) if op == "+" else Mul(tuple(args))
        if op == "^":
            base = node()
            k = parse_int(*expect_atom())
            close()
            return Pow(base, k)
        if op in ("exp", "int"):
            arg = node()
            close()
            return Exp(arg) if op == "exp" else Int(arg)
        if op in ("dn", "fn"):
            name, name_at = expect_atom()
            if not declared(name):
                raise UnknownSymbolError(f"undeclared function name {name!r}", name_at)
            k = parse_int(*expect_atom()) if op == "dn" else 0
            if k < 0:
                raise ParseError("negative derivative order", name_at)
            close()
            return FunctionSymbol(name, k)
        if op == "sym":
            name, name_at = expect_atom()
            if name not in consts:
                raise UnknownSymbolError(f"undeclared constant {name!r}", name_at)
            close()
            return Sym(name)
        raise ParseError(f"unknown operator {op!r}", op_at)

    def close():
        nonlocal pos
        if pos >= len(toks):
            raise ParseError("missing ')'", len(text))
        tok, at = toks[pos]
        if tok != ")":
            raise ParseError(f"expected ')', found {tok!r}", at)
        pos += 1

    result = node()
    if pos != len(toks):
        raise ParseError("trailing input", toks[pos][1])
    return result


# ---------------------------------------------------------------------------
# infix renderers


class _Style:
    def __init__(self, name: Callable[[FunctionSymbol], str], const: Callable[[Sym], str],
                 number: Callable[[Fraction], str], times: str, power: Callable[[str, int], str],
                 exp: Callable[[str], str], integral: Callable[[str], str],
                 paren: Callable[[str], str]):
        self.name = name
        self.const = const
        self.number = number
        self.times = times
        self.power = power
        self.exp = exp
        self.integral = integral
        self.paren = paren


def _plain_name(f: FunctionSymbol) -> str:
    if f.order <= 3:
        return f.name + "'" * f.order
    return f"{f.name}^({f.order})"


_GREEK = {"w": r"\omega"}


def _latex_name(f: FunctionSymbol) -> str:
    m = re.match(r"^([ar])(\d+)$", f.name)
    if m:
        base = (r"\alpha" if m.group(1) == "a" else "r") + "_{" + m.group(2) + "}"
    else:
        base = _GREEK.get(f.name, f.name)
    if f.order == 0:
        return base
    if f.order <= 3:
        return base + "'" * f.order
    return base + "^{(" + str(f.order) + ")}"


def _latex_number(v: Fraction) -> str:
    if v.denominator == 1:
        return str(v.numerator)
    sign = "-" if v < 0 else ""
    return sign + r"\frac{" + str(abs(v.numerator)) + "}{" + str(v.denominator) + "}"


def _latex_power(base: str, k: int) -> str:
    if "^" in base:
        base = r"\left(" + base + r"\right)"
    return base + "^{" + str(k) + "}"


def _plain_power(base: str, k: int) -> str:
    return f"{base}^{k}" if k >= 0 else f"{base}^({k})"


_PLAIN = _Style(_plain_name, lambda s: s.name, _num, "*", _plain_power,
                lambda s: f"exp({s})", lambda s: f"int({s})", lambda s: f"({s})")
_LATEX = _Style(_latex_name, lambda s: s.name, _latex_number, " ", _latex_power,
                lambda s: "e^{" + s + "}", lambda s: r"\int " + s + r"\,dx",
                lambda s: r"\left(" + s + r"\right)")


def _negated(t: Expr):
    """(True, |t|) if the term carries a negative leading coefficient."""
    if isinstance(t, Const) and t.value < 0:
        return True, Const(-t.value)
    if isinstance(t, Mul) and isinstance(t.factors[0], Const) and t.factors[0].value < 0:
        c = -t.factors[0].value
        rest = t.factors[1:]
        if c == 1:
            return True, rest[0] if len(rest) == 1 else Mul(rest)
        return True, Mul((Const(c),) + rest)
    return False, t


def _infix(e: Expr, st: _Style) -> str:
    if isinstance(e, Add):
        parts = []
        for i, t in enumerate(e.terms):
            neg, body = _negated(t)
            text = _infix(body, st)
            if i == 0:
                parts.append(("-" if neg else "") + text)
            else:
                parts.append((" - " if neg else " + ") + text)
        return "".join(parts)
    if isinstance(e, Const):
        return st.number(e.value)
    if isinstance(e, X):
        return "x"
    if isinstance(e, Sym):
        return st.const(e)
    if isinstance(e, FunctionSymbol):
        return st.name(e)
    if isinstance(e, Mul):
        neg, body = _negated(e)
        if neg:
            return "-" + _infix(body, st)
        parts = [_factor(f, st) for f in e.factors]
        return st.times.join(parts)
    if isinstance(e, Pow):
        return st.power(_factor(e.base, st), e.exponent)
    if isinstance(e, Exp):
        return st.exp(_infix(e.arg, st))
    if isinstance(e, Int):
        return st.integral(_infix(e.arg, st))
    raise TypeError(e)


def _factor(e: Expr, st: _Style) -> str:
    text = _infix(e, st)
    if isinstance(e, (Add, Mul)) or (isinstance(e, Const) and (e.value < 0 or e.value.denominator != 1)
                                     and st is _PLAIN):
        return st.paren(text)
    return text
