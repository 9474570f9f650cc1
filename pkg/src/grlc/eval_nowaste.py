"""No-waste big-step evaluation.

Refines the exhaust-checking semantics in three ways: axioms produce only
no-waste results (the value's claimed usage, scaled by the evaluation grade,
must transitively cover the environment up to discardability), variable
replacement may leave only residuals that still satisfy that condition, and
rules with several subterms split the environment between them.

Splitting, residual choice, and annotation synthesis are all searched
depth-first: demand-guided candidates first, bounded enumeration after.
Search failures are memoized per configuration; exceeding the node budget
gives a distinct undetermined outcome, fuel exhaustion a diverging one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from grlc.algebra import Grade, GradeAlgebra
from grlc.contexts import GradeContext, ctx_add, ctx_scale, vec_mat_mul
from grlc.names import fresh
from grlc.nowaste import (AnnotatedEnvironment, EnvironmentError_, env_closure,
                          env_sum, no_waste)
from grlc.syntax import (AnnotatedValue, App, Case, FineExpr, Let, MatchPair,
                         MatchUnit, Proj, Ret, VAPair, VFun, VInl, VInr,
                         VPair, VUnit, VVar, ValueExpr, free_vars, honest,
                         pretty_fine, pretty_value, rename_expr)


@dataclass
class NwOutcome:
    kind: str  # 'converged' | 'stuck' | 'fuel' | 'undetermined'
    value: Optional[AnnotatedValue] = None
    env: Optional[AnnotatedEnvironment] = None
    reason: str = ""  # 'type-error' | 'exhaustion' | 'waste'
    location: str = ""
    detail: str = ""
    steps: int = 0
    used: Optional[GradeContext] = None
    added: Optional[GradeContext] = None

    @property
    def converged(self):
        return self.kind == "converged"

    def __repr__(self):
        if self.kind == "converged":
            return f"NwConverged({self.value!r}, {self.env!r})"
        if self.kind == "fuel":
            return f"NwFuelExhausted({self.steps})"
        if self.kind == "undetermined":
            return "NwUndetermined(budget)"
        return f"NwStuck({self.reason} at {self.location}: {self.detail})"


class _FuelAbort(Exception):
    pass


class _BudgetAbort(Exception):
    pass


class _Acct:
    """Immutable accounting of consumed and freshly added grades."""

    __slots__ = ("used", "added")

    def __init__(self, used: GradeContext, added: GradeContext):
        self.used = used
        self.added = added

    @staticmethod
    def empty(alg) -> "_Acct":
        z = GradeContext.of(alg)
        return _Acct(z, z)

    def plus(self, other: "_Acct") -> "_Acct":
        return _Acct(ctx_add(self.used, other.used),
                     ctx_add(self.added, other.added))

    def consume(self, x: str, r: Grade) -> "_Acct":
        return _Acct(ctx_add(self.used, GradeContext.of(r.algebra, {x: r})),
                     self.added)

    def bind(self, x: str, g: Grade) -> "_Acct":
        return _Acct(self.used,
                     ctx_add(self.added, GradeContext.of(g.algebra, {x: g})))


class _Search:
    def __init__(self, algebra: GradeAlgebra, nodes: int = 100_000,
                 split_width: int = 32, width: int = 5):
        self.algebra = algebra
        self.nodes = nodes
        self.split_width = split_width
        self.width = width
        self.first_stuck: Optional[NwOutcome] = None
        self.memo_failed: set = set()

    def tick(self):
        self.nodes -= 1
        if self.nodes <= 0:
            raise _BudgetAbort()

    def stuck(self, reason, location, detail):
        # waste overrides a previously recorded exhaustion: the rule was
        # applicable resource-wise but refused for no-waste reasons
        if self.first_stuck is None or (
                reason == "waste" and self.first_stuck.reason == "exhaustion"):
            self.first_stuck = NwOutcome("stuck", reason=reason,
                                         location=location, detail=detail)

    def nonzero_cands(self):
        alg = self.algebra
        out = [alg.one]
        for g in alg.nonzero_grades(self.width + 1):
            if g not in out:
                out.append(g)
        return out[: self.width]


# ---------------------------------------------------------------------------
# environment splitting
# ---------------------------------------------------------------------------


def _transitive_hint(env: AnnotatedEnvironment, term, grade: Grade
                     ) -> GradeContext:
    alg = env.algebra
    direct = GradeContext.of(
        alg, {x: grade for x in free_vars(term) & set(env.domain())})
    return vec_mat_mul(direct, env_closure(env))


def split_env(env: AnnotatedEnvironment, demand1: GradeContext,
              demand2: GradeContext, limit: int = 32
              ) -> list[tuple[AnnotatedEnvironment, AnnotatedEnvironment]]:
    """Candidate splits rho1 + rho2 <= rho, demand-guided first.

    Values are shared, only grades split; both sides keep the full domain so
    later sums never conflict.
    """
    alg = env.algebra
    per_var: list[tuple[str, list[tuple[Grade, Grade]]]] = []
    for x, r_x, _ in env.entries:
        pairs: list[tuple[Grade, Grade]] = []

        def push(a: Grade):
            rest = alg.residuals(r_x, a, 1)
            if rest:
                pair = (a, rest[0])
                if pair not in pairs:
                    pairs.append(pair)

        d1, d2 = demand1.get(x), demand2.get(x)
        push(d1)                       # give side 1 exactly its demand
        comp = alg.residuals(r_x, d2, 1)
        if comp:                       # give side 2 its demand, rest to 1
            push(comp[0])
        push(alg.zero)                 # everything to side 2
        push(r_x)                      # everything to side 1
        for g in alg.nonzero_grades(4):
            push(g)
        per_var.append((x, pairs[:6]))

    out: list[tuple[AnnotatedEnvironment, AnnotatedEnvironment]] = []

    def build(i: int, acc: list):
        if len(out) >= limit:
            return
        if i == len(per_var):
            left = AnnotatedEnvironment(
                alg, tuple((x, a, v) for (x, (a, _)), (_, _, v)
                           in zip(acc, env.entries)))
            right = AnnotatedEnvironment(
                alg, tuple((x, b, v) for (x, (_, b)), (_, _, v)
                           in zip(acc, env.entries)))
            out.append((left, right))
            return
        x, pairs = per_var[i]
        for pair in pairs:
            acc.append((x, pair))
            build(i + 1, acc)
            acc.pop()
            if len(out) >= limit:
                return

    build(0, [])
    return out


# ---------------------------------------------------------------------------
# annotation synthesis and decomposition
# ---------------------------------------------------------------------------


def _synth_annotations(v: ValueExpr, env: AnnotatedEnvironment, r: Grade,
                       state: _Search) -> Iterator[GradeContext]:
    """Candidate honest annotations for a fun/unit axiom, largest claims
    (exact transitive demand) first."""
    alg = state.algebra
    fvs = sorted(free_vars(v) & set(env.domain()))
    grades_ctx = env.grades()
    relevant = list(fvs)
    for x, r_x, _ in env.entries:
        # a discardable claim may be needed to cover a non-discardable offer
        if x not in relevant and not alg.is_discardable(r_x):
            relevant.append(x)
    per_var: list[tuple[str, list[Grade]]] = []
    for x in relevant:
        available = grades_ctx.get(x)
        carrier = alg.enumerate()
        if carrier is not None:
            cands = [g for g in carrier if alg.leq(alg.mul(r, g), available)]
        else:
            cands = []
            for g in [available] + alg.factor_candidates(available, alg.one, 3):
                if alg.leq(alg.mul(r, g), available) and g not in cands:
                    cands.append(g)
            for g in (alg.one, alg.zero):
                if alg.leq(alg.mul(r, g), available) and g not in cands:
                    cands.append(g)
        if x not in fvs:
            cands = [g for g in cands if alg.is_discardable(g)]
        ordered = sorted(cands, key=lambda g: alg._sort_key(g.value), reverse=True)[: state.width]
        if alg.zero not in ordered:
            ordered.append(alg.zero)
        per_var.append((x, ordered))

    budget = [state.split_width]

    def build(i: int, acc: dict) -> Iterator[GradeContext]:
        if budget[0] <= 0:
            return
        if i == len(per_var):
            budget[0] -= 1
            yield GradeContext.of(alg, dict(acc))
            return
        x, cands = per_var[i]
        for g in cands:
            acc[x] = g
            yield from build(i + 1, acc)
            del acc[x]

    yield from build(0, {})


def _decompose_annotation(gamma: GradeContext, g1: Grade, g2: Grade,
                          fv1: set, fv2: set, state: _Search
                          ) -> Iterator[tuple[GradeContext, GradeContext]]:
    """Pairs (gamma1, gamma2), honest for the components, with
    gamma <= g1*gamma1 + g2*gamma2."""
    alg = state.algebra

    def options(gx: Grade, x: str) -> list[tuple[Grade, Grade]]:
        cands1 = [c for c in [alg.zero] + alg.factor_candidates(gx, g1, 4)
                  if x in fv1 or alg.is_discardable(c)]
        cands2 = [c for c in [alg.zero] + alg.factor_candidates(gx, g2, 4)
                  if x in fv2 or alg.is_discardable(c)]
        out = []
        for a in cands1[:4]:
            for b in cands2[:4]:
                lhs = alg.add(alg.mul(g1, a), alg.mul(g2, b))
                if alg.leq(gx, lhs) and (a, b) not in out:
                    out.append((a, b))
        return out[:5]

    per_var = [(x, options(g, x)) for x, g in gamma.entries]
    if any(not opts for _, opts in per_var):
        state.stuck("waste", repr(gamma),
                    "stored annotation cannot be split between components")
        return
    budget = [state.split_width]

    def build(i: int, a1: dict, a2: dict):
        if budget[0] <= 0:
            return
        if i == len(per_var):
            budget[0] -= 1
            yield (GradeContext.of(alg, dict(a1)), GradeContext.of(alg, dict(a2)))
            return
        x, opts = per_var[i]
        for ga, gb in opts:
            a1[x], a2[x] = ga, gb
            yield from build(i + 1, a1, a2)
            del a1[x], a2[x]

    yield from build(0, {}, {})


# ---------------------------------------------------------------------------
# the evaluator
# ---------------------------------------------------------------------------


def nw_value_gen(v: ValueExpr, env: AnnotatedEnvironment, r: Grade,
                 state: _Search
                 ) -> Iterator[tuple[AnnotatedValue, AnnotatedEnvironment, _Acct]]:
    alg = state.algebra
    state.tick()
    match v:
        case VVar(x):
            found = env.lookup(x)
            if found is None:
                state.stuck("type-error", x, f"unbound variable {x}")
                return
            s, av = found
            cands = alg.residuals(s, r, 16)[: state.width + 4]
            if not cands:
                state.stuck("exhaustion", x,
                            f"cannot consume {r!r} out of {s!r}")
                return
            produced = False
            for s_new in cands:
                env2 = env.with_grade(x, s_new)
                if no_waste(ctx_scale(r, av.uses), env2):
                    produced = True
                    yield av, env2, _Acct.empty(alg).consume(x, r)
                else:
                    state.stuck(
                        "waste", x,
                        f"requirement {ctx_scale(r, av.uses)!r} * closure "
                        f"not below {env2.grades()!r}")
            if not produced:
                return
        case VUnit() | VFun(_, _, _):
            rule = "unit" if isinstance(v, VUnit) else "fun"
            found_any = False
            for gamma in _synth_annotations(v, env, r, state):
                if no_waste(ctx_scale(r, gamma), env):
                    found_any = True
                    yield AnnotatedValue(gamma, v), env, _Acct.empty(alg)
            if not found_any:
                state.stuck("waste", pretty_value(v),
                            f"no honest annotation makes rule ({rule}) "
                            f"no-waste in {env.grades()!r}")
        case VPair(g1, v1, v2, g2):
            h1 = _transitive_hint(env, v1, alg.mul(r, g1))
            h2 = _transitive_hint(env, v2, alg.mul(r, g2))
            for rho1, rho2 in split_env(env, h1, h2, state.split_width):
                for av1, rho1b, a1 in nw_value_gen(v1, rho1, alg.mul(r, g1), state):
                    for av2, rho2b, a2 in nw_value_gen(v2, rho2, alg.mul(r, g2), state):
                        gamma = ctx_add(ctx_scale(g1, av1.uses),
                                        ctx_scale(g2, av2.uses))
                        value = AnnotatedValue(
                            gamma, VPair(g1, av1.value, av2.value, g2))
                        try:
                            final = env_sum(rho1b, rho2b)
                        except EnvironmentError_:
                            continue
                        yield value, final, a1.plus(a2)
        case VInl(g, v1) | VInr(g, v1):
            cons = VInl if isinstance(v, VInl) else VInr
            for av1, rho1, a1 in nw_value_gen(v1, env, alg.mul(r, g), state):
                yield (AnnotatedValue(ctx_scale(g, av1.uses),
                                      cons(g, av1.value)), rho1, a1)
        case VAPair(_, _, _, _):
            state.stuck("type-error", pretty_value(v),
                        "additive pairs are outside the no-waste semantics")
        case _:
            state.stuck("type-error", pretty_value(v), "not a value expression")


def nw_eval_gen(e: FineExpr, env: AnnotatedEnvironment, r: Grade, fuel: int,
                state: _Search
                ) -> Iterator[tuple[AnnotatedValue, AnnotatedEnvironment,
                                    int, _Acct]]:
    alg = state.algebra
    state.tick()
    if fuel <= 0:
        raise _FuelAbort()
    fuel -= 1
    key = (pretty_fine(e), repr(env), repr(r))
    if key in state.memo_failed:
        return
    produced = False
    match e:
        case Ret(v):
            if alg.satisfies_nonzero(r):
                cands = [r]
            else:
                cands = [g for g in alg.covers(r, state.width)
                         if alg.satisfies_nonzero(g)]
            for s in cands:
                for av, rho, acct in nw_value_gen(v, env, s, state):
                    produced = True
                    yield av, rho, fuel, acct
        case Let(x, e1, e2, _):
            h1 = _transitive_hint(env, e1, alg.one)
            h2 = _transitive_hint(env, e2, alg.one)
            for s in state.nonzero_cands() + [alg.zero]:
                for rho1, rho2 in split_env(env, h1, h2, state.split_width):
                    for av1, rho1b, f1, a1 in nw_eval_gen(e1, rho1, s, fuel, state):
                        x2 = fresh(x)
                        body = rename_expr(e2, x, x2)
                        try:
                            joined = env_sum(rho1b, rho2).bind(x2, s, av1)
                        except EnvironmentError_:
                            continue
                        for av, rho, f2, a2 in nw_eval_gen(body, joined, r,
                                                           f1, state):
                            produced = True
                            yield av, rho, f2, a1.bind(x2, s).plus(a2)
        case App(v1, v2, ann):
            h1 = _transitive_hint(env, v1, alg.one)
            h2 = _transitive_hint(env, v2, alg.one)
            for rho1, rho2 in split_env(env, h1, h2, state.split_width):
                for s_fn in _fn_grades(v1, rho1, state):
                    for av1, rho1b, a1 in nw_value_gen(v1, rho1, s_fn, state):
                        if not isinstance(av1.value, VFun):
                            state.stuck("type-error", pretty_fine(e),
                                        f"applied non-function "
                                        f"{pretty_value(av1.value)}")
                            continue
                        fn = av1.value
                        s1_cands = [ann] if ann is not None else state.nonzero_cands()
                        for s1 in s1_cands:
                            if not alg.satisfies_nonzero(s1):
                                continue
                            for s2 in alg.residuals(s_fn, s1, 4):
                                for t_arg in (state.nonzero_cands() + [alg.zero])[: state.width]:
                                    for av2, rho2b, a2 in nw_value_gen(v2, rho2, t_arg, state):
                                        f2, x2 = fresh(fn.fname), fresh(fn.param)
                                        body = rename_expr(
                                            rename_expr(fn.body, fn.fname, f2),
                                            fn.param, x2)
                                        try:
                                            joined = (env_sum(rho1b, rho2b)
                                                      .bind(f2, s2, av1)
                                                      .bind(x2, t_arg, av2))
                                        except EnvironmentError_:
                                            continue
                                        for out in nw_eval_gen(body, joined, r,
                                                               fuel, state):
                                            produced = True
                                            acc = (a1.plus(a2)
                                                   .bind(f2, s2).bind(x2, t_arg)
                                                   .plus(out[3]))
                                            yield out[0], out[1], out[2], acc
        case MatchUnit(v, body):
            h1 = _transitive_hint(env, v, alg.one)
            h2 = _transitive_hint(env, body, alg.one)
            for s in state.nonzero_cands():
                for rho1, rho2 in split_env(env, h1, h2, state.split_width):
                    for av1, rho1b, a1 in nw_value_gen(v, rho1, s, state):
                        if not isinstance(av1.value, VUnit):
                            state.stuck("type-error", pretty_fine(e),
                                        "matched non-unit")
                            continue
                        try:
                            joined = env_sum(rho1b, rho2)
                        except EnvironmentError_:
                            continue
                        for out in nw_eval_gen(body, joined, r, fuel, state):
                            produced = True
                            yield out[0], out[1], out[2], a1.plus(out[3])
        case MatchPair(x, y, v, body):
            h1 = _transitive_hint(env, v, alg.one)
            h2 = _transitive_hint(env, body, alg.one)
            for s in state.nonzero_cands():
                for rho1, rho2 in split_env(env, h1, h2, state.split_width):
                    for av1, rho1b, a1 in nw_value_gen(v, rho1, s, state):
                        if not isinstance(av1.value, VPair):
                            state.stuck("type-error", pretty_fine(e),
                                        "matched non-pair")
                            continue
                        w = av1.value
                        for gam1, gam2 in _decompose_annotation(
                                av1.uses, w.g1, w.g2,
                                free_vars(w.left), free_vars(w.right), state):
                            x2, y2 = fresh(x), fresh(y)
                            body2 = rename_expr(rename_expr(body, x, x2), y, y2)
                            gx, gy = alg.mul(s, w.g1), alg.mul(s, w.g2)
                            try:
                                joined = (env_sum(rho1b, rho2)
                                          .bind(x2, gx, AnnotatedValue(gam1, w.left))
                                          .bind(y2, gy, AnnotatedValue(gam2, w.right)))
                            except EnvironmentError_:
                                continue
                            for out in nw_eval_gen(body2, joined, r, fuel, state):
                                produced = True
                                acc = (a1.bind(x2, gx).bind(y2, gy)
                                       .plus(out[3]))
                                yield out[0], out[1], out[2], acc
        case Case(v, x1, left, x2, right):
            h1 = _transitive_hint(env, v, alg.one)
            h2 = _transitive_hint(env, Case(VUnit(), x1, left, x2, right), alg.one)
            for t in state.nonzero_cands():
                for rho1, rho2 in split_env(env, h1, h2, state.split_width):
                    for av1, rho1b, a1 in nw_value_gen(v, rho1, t, state):
                        if isinstance(av1.value, VInl):
                            binder, branch = x1, left
                        elif isinstance(av1.value, VInr):
                            binder, branch = x2, right
                        else:
                            state.stuck("type-error", pretty_fine(e),
                                        "matched non-injection")
                            continue
                        w = av1.value
                        for gam1 in _decompose_injection(av1.uses, w.grade,
                                                         free_vars(w.body), state):
                            y = fresh(binder)
                            branch2 = rename_expr(branch, binder, y)
                            gy = alg.mul(t, w.grade)
                            try:
                                joined = (env_sum(rho1b, rho2)
                                          .bind(y, gy, AnnotatedValue(gam1, w.body)))
                            except EnvironmentError_:
                                continue
                            for out in nw_eval_gen(branch2, joined, r, fuel, state):
                                produced = True
                                yield (out[0], out[1], out[2],
                                       a1.bind(y, gy).plus(out[3]))
        case Proj(_, _):
            state.stuck("type-error", pretty_fine(e),
                        "projections are outside the no-waste semantics")
        case _:
            state.stuck("type-error", repr(e), "not an expression")
    if not produced:
        state.memo_failed.add(key)


def _fn_grades(fn: ValueExpr, env: AnnotatedEnvironment, state: _Search):
    alg = state.algebra
    out = []
    if isinstance(fn, VVar):
        found = env.lookup(fn.name)
        if found is not None and not alg.is_zero(found[0]):
            out.append(found[0])
    for g in state.nonzero_cands():
        if g not in out:
            out.append(g)
    return out[: state.width]


def _decompose_injection(gamma: GradeContext, g: Grade, fvs: set,
                         state: _Search) -> Iterator[GradeContext]:
    """gamma1 candidates, honest for the payload, with gamma <= g*gamma1."""
    alg = state.algebra
    per_var = []
    for x, gx in gamma.entries:
        cands = [c for c in [alg.zero] + alg.factor_candidates(gx, g, 4)
                 if alg.leq(gx, alg.mul(g, c))
                 and (x in fvs or alg.is_discardable(c))]
        if not cands:
            state.stuck("waste", x, "annotation cannot be pushed into payload")
            return
        per_var.append((x, cands[:4]))

    def build(i, acc):
        if i == len(per_var):
            yield GradeContext.of(alg, dict(acc))
            return
        x, cands = per_var[i]
        for c in cands:
            acc[x] = c
            yield from build(i + 1, acc)
            del acc[x]

    yield from build(0, {})


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def nw_eval_value(v: ValueExpr, env: AnnotatedEnvironment, r: Grade,
                  nodes: int = 100_000) -> NwOutcome:
    state = _Search(env.algebra, nodes=nodes)
    try:
        for av, rho, acct in nw_value_gen(v, env, r, state):
            return NwOutcome("converged", value=av, env=rho,
                             used=acct.used, added=acct.added)
    except _BudgetAbort:
        return NwOutcome("undetermined", detail="backtrack budget exhausted")
    if state.first_stuck is not None:
        return state.first_stuck
    return NwOutcome("stuck", reason="exhaustion", location=pretty_value(v),
                     detail="no applicable rule")


def nw_eval(e: FineExpr, env: AnnotatedEnvironment, r: Grade,
            fuel: int = 100_000, nodes: int = 100_000) -> NwOutcome:
    state = _Search(env.algebra, nodes=nodes)
    try:
        for av, rho, fleft, acct in nw_eval_gen(e, env, r, fuel, state):
            return NwOutcome("converged", value=av, env=rho,
                             steps=fuel - fleft, used=acct.used,
                             added=acct.added)
    except _FuelAbort:
        return NwOutcome("fuel", steps=fuel)
    except _BudgetAbort:
        return NwOutcome("undetermined", detail="backtrack budget exhausted")
    if state.first_stuck is not None:
        return state.first_stuck
    return NwOutcome("stuck", reason="exhaustion", location=pretty_fine(e),
                     detail="no applicable rule")
