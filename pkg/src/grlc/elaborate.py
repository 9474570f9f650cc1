"""Surface-to-fine-grained elaboration.

Compound subterms in value positions are let-bound left to right; value
expressions used as whole programs are wrapped in return.  Elaboration is
semantics-preserving up to these administrative lets and is the identity on
programs already in fine-grained shape.
"""

from __future__ import annotations

from grlc.names import fresh
from grlc.syntax import (App, Case, FineExpr, Let, MatchPair, MatchUnit,
                         Proj, Ret, SAPair, SApp, SCase, SInl, SInr, SLet,
                         SMatchPair, SPair, SProj, SRecFun, SSeq, SUnit,
                         SVar, SurfaceExpr, TypeError_, VAPair, VFun, VInl,
                         VInr, VPair, VUnit, VVar, ValueExpr)

Binding = tuple[str, FineExpr]


def elaborate(e: SurfaceExpr) -> FineExpr:
    match e:
        case SVar(_) | SUnit() | SRecFun(_, _, _) | SPair(_, _, _, _) | \
                SInl(_, _) | SInr(_, _) | SAPair(_, _, _, _):
            binds, v = elaborate_value(e)
            return _wrap(binds, Ret(v))
        case SApp(fn, arg, grade):
            b1, vf = elaborate_value(fn)
            b2, va = elaborate_value(arg)
            return _wrap(b1 + b2, App(vf, va, grade))
        case SSeq(first, second):
            b, v = elaborate_value(first)
            return _wrap(b, MatchUnit(v, elaborate(second)))
        case SMatchPair(x, y, scr, body):
            b, v = elaborate_value(scr)
            return _wrap(b, MatchPair(x, y, v, elaborate(body)))
        case SCase(scr, x1, left, x2, right):
            b, v = elaborate_value(scr)
            return _wrap(b, Case(v, x1, elaborate(left), x2, elaborate(right)))
        case SProj(i, body):
            b, v = elaborate_value(body)
            return _wrap(b, Proj(i, v))
        case SLet(x, bound, body, ann):
            return Let(x, elaborate(bound), elaborate(body), ann)
    raise TypeError_(f"elaborate: unknown node {e!r}")


def elaborate_value(e: SurfaceExpr) -> tuple[list[Binding], ValueExpr]:
    match e:
        case SVar(n):
            return [], VVar(n)
        case SUnit():
            return [], VUnit()
        case SRecFun(f, x, body):
            return [], VFun(f, x, elaborate(body))
        case SPair(g1, left, right, g2):
            b1, v1 = elaborate_value(left)
            b2, v2 = elaborate_value(right)
            return b1 + b2, VPair(g1, v1, v2, g2)
        case SAPair(g1, left, right, g2):
            b1, v1 = elaborate_value(left)
            b2, v2 = elaborate_value(right)
            return b1 + b2, VAPair(g1, v1, v2, g2)
        case SInl(g, body):
            b, v = elaborate_value(body)
            return b, VInl(g, v)
        case SInr(g, body):
            b, v = elaborate_value(body)
            return b, VInr(g, v)
        case _:
            fe = elaborate(e)
            if isinstance(fe, Ret):
                return [], fe.value
            x = fresh("v")
            return [(x, fe)], VVar(x)


def _wrap(binds: list[Binding], body: FineExpr) -> FineExpr:
    for name, bound in reversed(binds):
        body = Let(name, bound, body)
    return body
