"""Symbolic and numeric tools for Riccati-chain equations and their Lagrangians."""
from .chain import (LinearOperator, RiccatiChainEq, build_chain_equation, cole_hopf_y_derivative,
                    delinearize, linearization_certificate, linearize, theta_apply, theta_power)
from .expr import (Const, Exp, Expr, FunctionSymbol, Int, Sym, differentiate, fn, normalize,
                   partial_derivative, substitute, x)
from .lagrangian import (Lagrangian, NotSelfAdjointError, ansatz_lagrangian, euler_lagrange,
                         gauge_subtract, general_odd_lagrangian, riccati3_lagrangian,
                         riccati_lagrangian, verify_eom)
from .render import ParseError, UnknownSymbolError, parse, render
from .selfadjoint import (adjoint, enumerate_index_set, is_self_adjoint, lagrange_identity_check,
                          odd_coefficient_from_adjoint, recurrence_report)

__version__ = "0.1.0"

__all__ = [
    "LinearOperator", "RiccatiChainEq", "build_chain_equation", "cole_hopf_y_derivative",
    "delinearize", "linearization_certificate", "linearize", "theta_apply", "theta_power",
    "Const", "Exp", "Expr", "FunctionSymbol", "Int", "Sym", "differentiate", "fn", "normalize",
    "partial_derivative", "substitute", "x",
    "Lagrangian", "NotSelfAdjointError", "ansatz_lagrangian", "euler_lagrange", "gauge_subtract",
    "general_odd_lagrangian", "riccati3_lagrangian", "riccati_lagrangian", "verify_eom",
    "ParseError", "UnknownSymbolError", "parse", "render",
    "adjoint", "enumerate_index_set", "is_self_adjoint", "lagrange_identity_check",
    "odd_coefficient_from_adjoint", "recurrence_report",
]
