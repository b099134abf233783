"""Command-line interface.

Exit codes: 0 success, 2 usage/arity, 3 policy refusal, 4 verification
failure, 5 numeric blow-up (partial output is still written).
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import chain, lagrangian as lag, numeric, selfadjoint
from .expr import ONE, Const, Expr, common_factor, fn, is_zero, normalize
from .render import parse, render

EXIT_OK, EXIT_USAGE, EXIT_POLICY, EXIT_VERIFY, EXIT_BLOWUP = 0, 2, 3, 4, 5
DEFAULT_MAX_ORDER = 7


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _max_order() -> int:
    raw = os.environ.get("RVL_MAX_ORDER", str(DEFAULT_MAX_ORDER))
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"RVL_MAX_ORDER must be an integer, got {raw!r}") from None


def _check_order(N: int):
    if N < 1:
        raise UsageError(f"--order must be a positive integer, got {N}")
    cap = _max_order()
    if N > cap:
        raise UsageError(f"--order {N} exceeds RVL_MAX_ORDER={cap}; term counts grow combinatorially")


def _alphas(args, N: int) -> List[Expr]:
    alphas = chain.symbolic_alphas(N + 1)
    if args.alphas:
        table = chain.load_alpha_bindings(args.alphas)
        alphas = chain.bind_alphas(alphas, table)
    return alphas


def _fmt(e: Expr, args) -> str:
    return render(e, args.format)


def _fmt_factored(e: Expr, args) -> str:
    """Shared atoms pulled in front (latex/plain only; sexpr stays canonical)."""
    f, rest = common_factor(e)
    if args.format == "sexpr" or f == ONE:
        return _fmt(e, args)
    if args.format == "latex":
        return f"{render(f, 'latex')} \\left({render(rest, 'latex')}\\right)"
    return f"{render(f, 'plain')}*({render(rest, 'plain')})"


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args, out: List[str]) -> int:
    _check_order(args.order)
    eq = chain.build_chain_equation(args.order, _alphas(args, args.order))
    out.append(f"{_fmt(eq.lhs, args)} = 0")
    return EXIT_OK


def cmd_linearize(args, out: List[str]) -> int:
    _check_order(args.order)
    eq = chain.build_chain_equation(args.order, _alphas(args, args.order))
    op = chain.linearize(eq)
    out.append(f"{_fmt(op.apply('y'), args)} = 0")
    if args.round_trip:
        cert = chain.linearization_certificate(eq)
        back = chain.delinearize(op)
        out.append(f"certificate: {render(cert, 'sexpr')}")
        out.append(f"round-trip: {'ok' if back == eq else 'mismatch'}")
        if not is_zero(cert) or back != eq:
            return EXIT_VERIFY
    return EXIT_OK


def _read_operator(path: str) -> chain.LinearOperator:
    coeffs = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, rhs = (s.strip() for s in line.partition("="))
        if not sep or not name.startswith("r") or not name[1:].isdigit():
            raise UsageError(f"{path}:{lineno}: expected 'rI = <sexpr>'")
        coeffs[int(name[1:])] = normalize(parse(rhs))
    if not coeffs:
        raise UsageError(f"{path}: no coefficients")
    n = max(coeffs)
    return chain.LinearOperator(n, tuple(coeffs.get(i, Const(0)) for i in range(n + 1)))


def cmd_selfadjoint(args, out: List[str]) -> int:
    if args.recurrence:
        key, _, val = args.recurrence.partition("=")
        if key.strip() != "n" or not val.strip().isdigit() or int(val) < 1:
            raise UsageError("--recurrence expects n=<k> with k >= 1")
        n = int(val)
        out.append(f"# order-{2 * n} self-adjoint operator, odd coefficients")
        out.append(selfadjoint.format_report(selfadjoint.recurrence_report(n)))
        return EXIT_OK
    if args.operator:
        op = _read_operator(args.operator)
    elif args.order:
        _check_order(args.order)
        op = chain.linearize(chain.build_chain_equation(args.order, _alphas(args, args.order)))
    else:
        raise UsageError("selfadjoint needs an operator file, --order, or --recurrence")
    out.append(f"M(y) = {_fmt(op.apply('y'), args)}")
    ok = selfadjoint.is_self_adjoint(op)
    out.append(f"self-adjoint: {'yes' if ok else 'no'}")
    if not ok:
        out.append(f"adjoint N(z) = {_fmt(selfadjoint.adjoint(op).apply('z'), args)}")
    if op.order == 4:
        res = selfadjoint.fourth_order_residuals(op)
        out.append(f"condition r1 - 2r0': residual={render(res.r1_residual, 'sexpr')}")
        out.append(f"condition q' - r3: residual={render(res.q_residual, 'sexpr')} "
                   f"(q={render(res.q, 'sexpr')})")
    return EXIT_OK


def cmd_lagrangian(args, out: List[str]) -> int:
    N = args.order
    _check_order(N)
    if N % 2 == 0:
        out.append(f"refused: order {N} is even; its linearization has odd order {N + 1} and no "
                   "self-adjoint form, so only odd-order chain equations get a Lagrangian")
        return EXIT_POLICY
    alphas = _alphas(args, N)
    eq = chain.build_chain_equation(N, alphas)
    if N == 1:
        L = lag.riccati_lagrangian(alphas)
    elif N == 3:
        L = lag.riccati3_lagrangian(alphas)
    else:
        L = lag.general_odd_lagrangian((N + 1) // 2, alphas)
    out.append(f"L = {_fmt_factored(L.expr, args)}")
    if N == 3:
        s1, s2 = lag.riccati3_parts(alphas)
        out.append(f"S1 = {_fmt(s1, args)}")
        out.append(f"S2 = {_fmt(s2, args)}")
    L_y = lag.linear_lagrangian(N, alphas)
    op_sa = not L_y.waived
    result = lag.verify_eom(L, eq.lhs)
    out.append(result.report())
    if not result.ok and not op_sa:
        out.append("# linearized operator is not self-adjoint for these coefficients; "
                   "reproduction of the chain equation is not asserted")
    if args.reduce_gauge:
        g = lag.standard_gauge(L_y)
        reduced = lag.gauge_subtract(L_y, g)
        out.append(f"L_y = {_fmt(L_y.expr, args)}")
        out.append(f"gauge = d/dx({_fmt(g, args)})")
        out.append(f"L_y reduced (order {reduced.order}) = {_fmt(reduced.expr, args)}")
        same = is_zero(normalize(lag.euler_lagrange(reduced) - lag.euler_lagrange(L_y)))
        out.append(f"gauge invariance: {'yes' if same else 'no'}")
    if not result.ok and op_sa:
        return EXIT_VERIFY
    return EXIT_OK


def _binding(args) -> numeric.CoefficientBinding:
    b = numeric.CoefficientBinding.from_file(args.alphas) if args.alphas else numeric.CoefficientBinding()
    for j in range(args.order + 1):
        v = getattr(args, f"a{j}", None)
        if v is not None:
            b = b.bind(f"a{j}", Fraction(v))
        elif f"a{j}" not in b.symbolic and f"a{j}" not in b.tables:
            b = b.bind(f"a{j}", 0)
    return b.bind("a", 1) if "a" not in b.symbolic else b


def _num(v: float) -> str:
    return f"{v:.12f}"


def _sample_lines(tr: numeric.Trajectory, label: str) -> List[str]:
    idx = {0, len(tr) - 1}
    lo, hi = math.ceil(tr.x[0] - 1e-12), math.floor(tr.x[-1] + 1e-12)
    for k in range(lo, hi + 1):
        i = int(round((k - tr.x[0]) / tr.h))
        if 0 <= i < len(tr) and abs(tr.x[i] - k) < 1e-9:
            idx.add(i)
    return [f"x={_num(tr.x[i])} {label}={_num(tr.derivative(0)[i])}" for i in sorted(idx)]


def _init(args, n: int, default: List[float]) -> List[float]:
    init = args.init if args.init is not None else default
    if len(init) != n:
        raise UsageError(f"--init needs {n} values")
    return [float(v) for v in init]


def cmd_numeric(args, out: List[str]) -> int:
    _check_order(args.order)
    if args.range is None:
        oscillator = args.sub == "variation" and args.system == "oscillator"
        args.range = [0.0, math.pi if oscillator else 1.2]
    x0, x1 = args.range
    b = _binding(args)
    code = EXIT_OK
    if args.sub == "riccati":
        eq = chain.build_chain_equation(args.order)
        tr = numeric.integrate(eq.lhs, "w", b, _init(args, args.order, [0.0] * args.order), x0, x1, args.step)
        out.extend(_sample_lines(tr, "w"))
    elif args.sub == "colehopf":
        eq = chain.build_chain_equation(args.order)
        lin = chain.linearize(eq).apply("y")
        y_init = _init(args, args.order + 1, [1.0] + [0.0] * args.order)
        tr = numeric.integrate(lin, "y", b, y_init, x0, x1, args.step)
        res = numeric.cole_hopf_consistency(tr, eq, b)
        out.append(f"window=[{_num(res.window[0])}, {_num(res.window[1])}]")
        out.append(f"deviation={res.deviation:.3e}")
        passed = res.deviation < args.tol
        out.append("PASS" if passed else "FAIL")
        code = EXIT_OK if passed else EXIT_VERIFY
    else:
        tr, ratio = _variation(args, b, x0, x1, out)
        out.append(f"ratio={ratio:.3e}")
        passed = ratio < args.tol
        out.append("PASS" if passed else "FAIL")
        code = EXIT_OK if passed else EXIT_VERIFY
    for ev in tr.events:
        out.append(f"event: {ev}")
    if args.out:
        tr.to_csv(args.out)
    if tr.events:
        return EXIT_BLOWUP
    return code


def _variation(args, b, x0, x1, out):
    p = args.perturb
    if args.system == "oscillator":
        y = fn("y")
        L = lag.Lagrangian.of(y ** 2 - fn("y", 1) ** 2, "y")
        eom = fn("y", 2) + y
        tr = numeric.integrate(eom, "y", b, _init(args, 2, [1.0, 0.0]), x0, x1, args.step)
        shifted = [tr.derivative(0) + p * (tr.x - x0), tr.derivative(1) + p]
        tr = numeric.Trajectory("y", tr.x, np.column_stack(shifted), tr.top, tr.h, tr.events)
    else:
        eq = chain.build_chain_equation(1)
        L = lag.riccati_lagrangian()
        eom = eq.lhs
        tr = numeric.integrate(eq.lhs, "w", b, _init(args, 1, [0.0]), x0, x1, args.step)
        tr = numeric.Trajectory("w", tr.x, tr.values + p, tr.top, tr.h, tr.events)
    sym = lag.verify_eom(L, eom)
    out.append(f"symbolic: {sym.report().splitlines()[-1]}")
    x_end = float(tr.x[-1])
    bump = numeric.sine_bump(x0, x_end, 4)
    ratio = numeric.first_variation_residual(L, b, tr, bump, args.eps)
    return tr, ratio


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--order", "-N", type=int, default=None)
    common.add_argument("--alphas", help="coefficient binding file")
    common.add_argument("--format", choices=("plain", "latex", "sexpr"), default="latex")
    common.add_argument("--out", help="write output to this path")

    p = _Parser(prog="rvl", description="Lagrangians for odd-order Riccati chain equations")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("generate", parents=[common], help="chain equation of a given order")
    lin = sub.add_parser("linearize", parents=[common], help="Cole-Hopf linearization")
    lin.add_argument("--round-trip", action="store_true")
    sa = sub.add_parser("selfadjoint", parents=[common], help="self-adjointness report")
    sa.add_argument("operator", nargs="?", help="file with lines 'rI = <sexpr>'")
    sa.add_argument("--recurrence", metavar="n=K")
    lg = sub.add_parser("lagrangian", parents=[common], help="Lagrangian and verification")
    lg.add_argument("--reduce-gauge", action="store_true")

    num = sub.add_parser("numeric", help="numerical diagnostics")
    nsub = num.add_subparsers(dest="sub", required=True, parser_class=_Parser)
    for name in ("riccati", "colehopf", "variation"):
        q = nsub.add_parser(name, parents=[common])
        q.add_argument("--range", type=float, nargs=2, default=None, metavar=("A", "B"))
        q.add_argument("--step", type=float, default=numeric.DEFAULT_STEP)
        q.add_argument("--init", type=float, nargs="+")
        q.add_argument("--tol", type=float, default=1e-6 if name == "colehopf" else 1e-3)
        for j in range(8):
            q.add_argument(f"--a{j}", type=str, default=None)
        if name == "variation":
            q.add_argument("--system", choices=("oscillator", "riccati"), default="oscillator")
            q.add_argument("--perturb", type=float, default=0.0)
            q.add_argument("--eps", type=float, default=1e-4)
    return p


COMMANDS = {"generate": cmd_generate, "linearize": cmd_linearize, "selfadjoint": cmd_selfadjoint,
            "lagrangian": cmd_lagrangian, "numeric": cmd_numeric}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    out: List[str] = []
    try:
        args = parser.parse_args(argv)
        if args.order is None and not (args.command == "selfadjoint"):
            args.order = 1
        code = COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"rvl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"rvl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = "\n".join(out) + "\n"
    target = getattr(args, "out", None)
    if target and args.command != "numeric":
        Path(target).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
