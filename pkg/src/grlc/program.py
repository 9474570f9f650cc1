"""Loading whole .gr programs into runnable configurations.

A loaded program yields the fine-grained main expression (definitions it
mentions wrapped as annotated lets) and the initial environment from the
``where`` block.  Where-block values may reference definitions by name; those
are inlined, so stored values only depend on other environment entries.

Expected-verdict headers for the corpus harness are comment lines of shape
``-- expect <mode>[@<algebra>]: <verdict>``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from grlc.algebra import GradeAlgebra
from grlc.contexts import GradeContext
from grlc.elaborate import elaborate
from grlc.eval_exhaust import Environment
from grlc.parser import ParseError, Program, parse_program
from grlc.syntax import (FineExpr, GType, Ret, SApp, SAPair, SCase, SInl,
                         SInr, SLet, SMatchPair, SPair, SProj, SRecFun,
                         SSeq, SUnit, SVar, SurfaceExpr, free_vars, is_value)

_EXPECT = re.compile(r"^--\s*expect\s+([\w-]+)(?:@([\w:,.-]+))?\s*:\s*([\w-]+)")


@dataclass
class Loaded:
    algebra: GradeAlgebra
    program: Program
    main: Optional[FineExpr]
    env: Environment
    env_uses: dict[str, GradeContext]
    main_type: Optional[GType]
    expectations: list[tuple[str, Optional[str], str]] = field(default_factory=list)


def subst_surface(e: SurfaceExpr, name: str, repl: SurfaceExpr) -> SurfaceExpr:
    """Capture-naive substitution; definition bodies are closed up to other
    definition/environment names, which never collide with local binders
    thanks to parse-time freshness of desugared binders."""
    match e:
        case SVar(n):
            return repl if n == name else e
        case SUnit():
            return e
        case SRecFun(f, x, b):
            if name in (f, x):
                return e
            return SRecFun(f, x, subst_surface(b, name, repl))
        case SApp(fn, a, g):
            return SApp(subst_surface(fn, name, repl), subst_surface(a, name, repl), g)
        case SSeq(a, b):
            return SSeq(subst_surface(a, name, repl), subst_surface(b, name, repl))
        case SPair(g1, l, r, g2):
            return SPair(g1, subst_surface(l, name, repl), subst_surface(r, name, repl), g2)
        case SAPair(g1, l, r, g2):
            return SAPair(g1, subst_surface(l, name, repl), subst_surface(r, name, repl), g2)
        case SMatchPair(x, y, scr, body):
            nb = body if name in (x, y) else subst_surface(body, name, repl)
            return SMatchPair(x, y, subst_surface(scr, name, repl), nb)
        case SInl(g, b):
            return SInl(g, subst_surface(b, name, repl))
        case SInr(g, b):
            return SInr(g, subst_surface(b, name, repl))
        case SCase(scr, x1, l, x2, r):
            nl = l if x1 == name else subst_surface(l, name, repl)
            nr = r if x2 == name else subst_surface(r, name, repl)
            return SCase(subst_surface(scr, name, repl), x1, nl, x2, nr)
        case SProj(i, b):
            return SProj(i, subst_surface(b, name, repl))
        case SLet(x, bound, body, ann):
            nb = body if x == name else subst_surface(body, name, repl)
            return SLet(x, subst_surface(bound, name, repl), nb, ann)
    raise ParseError(f"subst: unknown node {e!r}")


def parse_expectations(text: str) -> list[tuple[str, Optional[str], str]]:
    out = []
    for line in text.splitlines():
        m = _EXPECT.match(line.strip())
        if m:
            out.append((m.group(1), m.group(2), m.group(3)))
    return out


def load_program(text: str, algebra: GradeAlgebra) -> Loaded:
    prog = parse_program(text, algebra)
    defs = dict(prog.defs)

    def inline_defs(e: SurfaceExpr) -> SurfaceExpr:
        # repeated expansion; definitions may reference earlier ones
        for _ in range(len(prog.defs) + 1):
            used = free_vars(e) & set(defs)
            if not used:
                return e
            for name in used:
                e = subst_surface(e, name, defs[name])
        raise ParseError("circular definition references")

    env_items = []
    env_uses: dict[str, GradeContext] = {}
    for entry in prog.env:
        fe = elaborate(inline_defs(entry.value))
        if not isinstance(fe, Ret) or not is_value(fe.value):
            raise ParseError(f"environment entry {entry.name} is not a value")
        env_items.append((entry.name, entry.grade, fe.value))
        if entry.uses is not None:
            env_uses[entry.name] = GradeContext.of(algebra, entry.uses)

    env = Environment.of(algebra, env_items)
    if not env.is_closed():
        bad = [n for n, _, v in env.entries
               if not free_vars(v) <= set(env.domain())]
        raise ParseError(f"environment not closed: {bad}")

    main_fine = None
    if prog.main is not None:
        main_fine = elaborate(prog.assembled_main())

    return Loaded(
        algebra=algebra,
        program=prog,
        main=main_fine,
        env=env,
        env_uses=env_uses,
        main_type=prog.sigs.get("main"),
        expectations=parse_expectations(text),
    )

