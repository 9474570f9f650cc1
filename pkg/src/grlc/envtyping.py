"""Environment and configuration typing.

An environment types against the context extracted from it: the sum of the
scaled per-value demands plus a residual must sit below the extracted
context.  A configuration types when the expression's demand is covered by a
residual; in strict mode the residual must be consumed exactly up to
discardability (no waste), in permissive mode arbitrary slack is allowed.

Annotated environments additionally check each stored annotation against the
direct usage obtained by typechecking the value.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from grlc.algebra import Grade, GradeAlgebra
from grlc.contexts import GradeContext
from grlc.eval_exhaust import Environment
from grlc.syntax import (AnnotatedValue, FineExpr, GType, Type, ValueExpr,
                         honest, pretty_value, type_equal)
from grlc.typing import (CheckFailure, Checker, Derivation, TGC, tgc_add,
                         tgc_leq, tgc_scale)


@dataclass
class EnvTyping:
    extracted: dict[str, tuple[Grade, Type]]  # the context the env offers
    used: TGC                                 # sum of scaled value demands
    residual: TGC
    value_derivs: dict[str, Derivation] = field(default_factory=dict)


@dataclass
class ConfigTyping:
    derivation: Derivation
    env_typing: EnvTyping
    demand: TGC
    mode: str


def _value_types(entries, types: Optional[dict[str, Type]],
                 algebra: GradeAlgebra) -> dict[str, Type]:
    """Types for every environment entry: declared signatures first, shape
    synthesis as fallback."""
    checker = Checker(algebra)
    out: dict[str, Type] = dict(types or {})
    # two passes so later entries can mention earlier ones inside closures
    for x, _, v in entries:
        if x in out:
            continue
        val = v.value if isinstance(v, AnnotatedValue) else v
        t = checker.synth_value_type(val, out)
        if t is None:
            raise CheckFailure(
                "type-mismatch", x,
                "cannot infer the stored value's type; declare a signature")
        out[x] = t
    return out


def check_env(env, types: Optional[dict[str, Type]] = None,
              budget: int = 64) -> EnvTyping:
    """Type an environment, returning the maximal residual context.

    Works on plain environments (values) and annotated environments
    (annotated values); in the latter case each annotation must be covered by
    the direct usage context of its value.
    """
    algebra = env.algebra
    tenv = _value_types(env.entries, types, algebra)
    used = TGC.of(algebra)
    derivs: dict[str, Derivation] = {}
    extracted: dict[str, tuple[Grade, Type]] = {}
    for x, r_x, stored in env.entries:
        extracted[x] = (r_x, tenv[x])
        d = _check_stored(stored, GType(tenv[x], algebra.one), tenv, budget, x)
        derivs[x] = d
        used = tgc_add(used, tgc_scale(r_x, d.demand))
    residual: dict[str, tuple[Grade, Type]] = {}
    for x, (r_x, t_x) in extracted.items():
        cands = algebra.residuals(r_x, used.grade(x), 16)
        if not cands:
            raise CheckFailure(
                "grade-unsatisfiable", x,
                f"stored values already use {used.grade(x)!r} of the "
                f"available {r_x!r}")
        residual[x] = (cands[0], t_x)
    for x in used.support():
        if x not in extracted:
            raise CheckFailure("type-mismatch", x,
                               "stored values reference a variable outside "
                               "the environment")
    return EnvTyping(extracted=extracted, used=used,
                     residual=TGC.of(algebra, residual), value_derivs=derivs)


def _check_stored(stored, gty: GType, tenv, budget, location) -> Derivation:
    if isinstance(stored, AnnotatedValue):
        return check_annotated_with_types(stored, gty, tenv, budget)
    checker = Checker(gty.grade.algebra, budget)
    for d in checker.value_gen(stored, gty, tenv):
        return d
    raise checker.failure(location)


def check_annotated_with_types(av: AnnotatedValue, gty: GType,
                               tenv: dict[str, Type],
                               budget: int = 64) -> Derivation:
    """Annotated-value typing: the value types at grade one under some
    context whose grades cover the annotation; the demand is that context
    scaled by the target grade."""
    algebra = gty.grade.algebra
    if not honest(av.uses, av.value):
        raise CheckFailure("type-mismatch", pretty_value(av.value),
                           f"annotation {av.uses!r} is not honest")
    checker = Checker(algebra, budget)
    last_fail = None
    for d in checker.value_gen(av.value, GType(gty.ty, algebra.one), tenv):
        joint: dict[str, tuple[Grade, Type]] = {}
        ok = True
        names = set(d.demand.support()) | set(av.uses.support())
        for x in sorted(names):
            have, want = d.demand.grade(x), av.uses.get(x)
            t = d.demand.type_of(x) or tenv.get(x)
            if t is None:
                ok = False
                last_fail = f"no type known for annotated variable {x}"
                break
            ubs = algebra.upper_bounds(have, want, 4)
            if not ubs:
                ok = False
                last_fail = (f"{x}: annotation {want!r} incompatible with "
                             f"direct usage {have!r}")
                break
            joint[x] = (ubs[0], t)
        if not ok:
            continue
        gamma_ctx = TGC.of(algebra, joint)
        demand = tgc_scale(gty.grade, gamma_ctx)
        checks = [("ctx-leq", d.demand, gamma_ctx)]
        # annotation covered: av.uses <= grades of gamma_ctx
        for x in av.uses.support():
            checks.append(("leq", av.uses.get(x), gamma_ctx.grade(x)))
        return Derivation("t-val", pretty_value(av.value), gty, demand,
                          checks=checks, premises=[d])
    if last_fail is not None:
        raise CheckFailure("grade-unsatisfiable", pretty_value(av.value),
                           last_fail)
    raise checker.failure(pretty_value(av.value))


def check_annotated(ctx: TGC, av: AnnotatedValue, gty: GType,
                    budget: int = 64) -> Derivation:
    """Public annotated-value check against a given context."""
    tenv = {x: t for x, _, t in ctx.entries}
    d = check_annotated_with_types(av, gty, tenv, budget)
    ok, why = tgc_leq(d.demand, ctx)
    if not ok:
        raise CheckFailure("grade-unsatisfiable", pretty_value(av.value),
                           f"needs {d.demand!r}, have {ctx!r} ({why})")
    d.checks = d.checks + [("ctx-leq", d.demand, ctx)]
    return d


class WasteFailure(CheckFailure):
    """Strict-mode rejection: a residual resource can never be consumed."""

    def __init__(self, location: str, detail: str):
        super().__init__("grade-unsatisfiable", location, detail)
        self.waste = True


def check_config(expr: Union[ValueExpr, FineExpr], env, gty: GType,
                 mode: str = "strict",
                 types: Optional[dict[str, Type]] = None,
                 budget: int = 64,
                 is_value_expr: bool = False) -> ConfigTyping:
    """Type a configuration <E | env> at the given graded type.

    strict: the environment residual must exactly cover E's demand, leftover
    grades must be discardable.  permissive: extra slack is allowed.
    """
    algebra = env.algebra
    env_t = check_env(env, types, budget)
    tenv = {x: t for x, (_, t) in env_t.extracted.items()}
    if types:
        tenv.update(types)
    checker = Checker(algebra, budget)
    if is_value_expr:
        gen = checker.value_gen(expr, gty, tenv)
    elif isinstance(expr, AnnotatedValue):
        gen = iter([check_annotated_with_types(expr, gty, tenv, budget)])
    else:
        gen = checker.expr_gen(expr, gty, tenv)

    waste_detail = None
    cover_detail = None
    for d in gen:
        demand = d.demand
        outside = [x for x in demand.support() if x not in env_t.extracted]
        if outside:
            raise CheckFailure("type-mismatch", ", ".join(outside),
                               "demand on variables outside the environment")
        ok = True
        chosen: dict[str, tuple[Grade, Type]] = {}
        for x, (r_x, t_x) in env_t.extracted.items():
            td = demand.type_of(x)
            if td is not None and not type_equal(td, t_x):
                raise CheckFailure("type-mismatch", x,
                                   f"environment offers {t_x!r}, "
                                   f"program needs {td!r}")
            if mode == "permissive":
                need = algebra.add(env_t.used.grade(x), demand.grade(x))
                if not algebra.residuals(r_x, need, 1):
                    ok = False
                    cover_detail = (f"{x}: cannot cover usage {need!r} "
                                    f"out of {r_x!r}")
                    break
                chosen[x] = (demand.grade(x), t_x)
                continue
            cands = algebra.residuals(r_x, env_t.used.grade(x), 16)
            want = demand.grade(x)
            good = [c for c in cands
                    if (algebra.leq(want, c) if x in demand
                        else algebra.is_discardable(c))]
            if not good:
                ok = False
                if cands and x not in demand:
                    waste_detail = (f"{x}: residual {cands[0]!r} can neither "
                                    f"be used nor discarded")
                else:
                    cover_detail = (f"{x}: demand {want!r} not covered by "
                                    f"residual candidates of {r_x!r}")
                break
            chosen[x] = (good[0], t_x)
        if ok:
            residual = TGC.of(algebra, chosen)
            root = Derivation(
                "t-conf" if not (isinstance(expr, AnnotatedValue)) else "t-res",
                d.term, gty, demand,
                checks=[("ctx-leq", demand, residual)]
                if mode == "strict" else [],
                premises=[d] + list(env_t.value_derivs.values()))
            env_t.residual = residual
            return ConfigTyping(derivation=root, env_typing=env_t,
                                demand=demand, mode=mode)
    if waste_detail is not None:
        raise WasteFailure("configuration", waste_detail)
    if cover_detail is not None:
        raise CheckFailure("grade-unsatisfiable", "configuration", cover_detail)
    raise checker.failure("configuration")
