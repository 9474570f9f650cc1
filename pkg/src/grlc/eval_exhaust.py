"""Resource-aware big-step evaluation with exhaustion checking.

Configurations pair an expression with an environment mapping variables to a
grade (the allowed usage left) and a value.  Replacing a variable consumes
part of its grade: the rule picks a residual s' with  r + s' <= s.  The
semantics is nondeterministic in that residual and in the various rule
grades; evaluation therefore runs as a depth-first search whose first branch
follows deterministic defaults (the `exact` strategy) and whose remaining
branches realize bounded backtracking.

Fuel bounds the number of expression-judgment rule applications; running out
of fuel along a still-progressing branch aborts the search and reports a
possibly-diverging outcome, standing in for the divergence result of the
coinductive reading of the rules.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from grlc.algebra import Grade, GradeAlgebra
from grlc.contexts import GradeContext
from grlc.names import fresh
from grlc.syntax import (App, Case, FineExpr, Let, MatchPair, MatchUnit,
                         Proj, Ret, VAPair, VFun, VInl, VInr, VPair, VUnit,
                         VVar, ValueExpr, free_vars, pretty_fine,
                         pretty_value, rename_expr)


@dataclass(frozen=True)
class Environment:
    """Ordered map variable -> (grade, value); insertion order preserved."""

    algebra: GradeAlgebra
    entries: tuple[tuple[str, Grade, ValueExpr], ...]

    @staticmethod
    def of(algebra: GradeAlgebra, items) -> "Environment":
        return Environment(algebra, tuple(items))

    def lookup(self, x: str):
        for name, g, v in self.entries:
            if name == x:
                return g, v
        return None

    def with_grade(self, x: str, g: Grade) -> "Environment":
        out = tuple((n, g if n == x else gr, v) for n, gr, v in self.entries)
        return Environment(self.algebra, out)

    def bind(self, x: str, g: Grade, v: ValueExpr) -> "Environment":
        if self.lookup(x) is not None:
            raise ValueError(f"variable {x} already bound")
        return Environment(self.algebra, self.entries + ((x, g, v),))

    def domain(self) -> list[str]:
        return [n for n, _, _ in self.entries]

    def grades(self) -> GradeContext:
        return GradeContext.of(self.algebra,
                               {n: g for n, g, _ in self.entries})

    def is_closed(self) -> bool:
        dom = set(self.domain())
        return all(free_vars(v) <= dom for _, _, v in self.entries)

    def to_json(self):
        return {n: {"grade": repr(g), "value": pretty_value(v)}
                for n, g, v in self.entries}

    def __repr__(self):
        inner = ", ".join(f"{n}:{g!r}" for n, g, _ in self.entries)
        return "{" + inner + "}"


@dataclass
class Outcome:
    kind: str  # 'converged' | 'stuck' | 'fuel'
    value: Optional[ValueExpr] = None
    env: Optional[Environment] = None
    reason: str = ""       # 'type-error' | 'exhaustion' for stuck
    location: str = ""
    detail: str = ""
    steps: int = 0
    trace: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.kind == "converged"

    def __repr__(self):
        if self.kind == "converged":
            return f"Converged({pretty_value(self.value)}, {self.env!r})"
        if self.kind == "fuel":
            return f"FuelExhausted({self.steps})"
        return f"Stuck({self.reason} at {self.location}: {self.detail})"


class _FuelAbort(Exception):
    pass


class _BudgetAbort(Exception):
    pass


class _Search:
    """Shared state of one evaluation search."""

    def __init__(self, algebra: GradeAlgebra, strategy: str, budget: int,
                 trace: bool, width: int = 6):
        self.algebra = algebra
        self.strategy = strategy
        self.budget = budget
        self.trace = trace
        self.width = 1 if strategy == "exact" else width
        self.first_stuck: Optional[Outcome] = None
        self.counters: dict[str, int] = {}

    def count(self, rule: str):
        self.counters[rule] = self.counters.get(rule, 0) + 1

    def cut(self, candidates: list) -> list:
        return candidates[: self.width]

    def tick(self):
        self.budget -= 1
        if self.budget <= 0:
            raise _BudgetAbort()

    def stuck(self, reason: str, location: str, detail: str):
        if self.first_stuck is None:
            self.first_stuck = Outcome("stuck", reason=reason,
                                       location=location, detail=detail)

    def nonzero_cands(self) -> list[Grade]:
        alg = self.algebra
        out = [alg.one]
        for g in alg.nonzero_grades(self.width + 1):
            if g not in out:
                out.append(g)
        return self.cut(out)


def _tr(state: _Search, rule: str, redex: str, grade: Grade,
        before: Environment, after: Environment) -> list:
    if not state.trace:
        return []
    return [{"rule": rule, "redex": redex, "grade": repr(grade),
             "env_before": before.to_json(), "env_after": after.to_json()}]


def eval_value_gen(v: ValueExpr, env: Environment, r: Grade,
                   state: _Search) -> Iterator[tuple[ValueExpr, Environment, list]]:
    alg = state.algebra
    match v:
        case VVar(x):
            found = env.lookup(x)
            if found is None:
                state.stuck("type-error", x, f"unbound variable {x}")
                return
            s, val = found
            cands = state.cut(alg.residuals(s, r, 16))
            if not cands:
                state.stuck("exhaustion", x,
                            f"cannot consume {r!r} out of {s!r}: "
                            f"no s' with {r!r} + s' <= {s!r}")
                return
            for s_new in cands:
                env2 = env.with_grade(x, s_new)
                yield val, env2, _tr(state, "var", x, r, env, env2)
        case VFun(_, _, _):
            yield v, env, _tr(state, "fun", pretty_value(v), r, env, env)
        case VUnit():
            yield v, env, _tr(state, "unit", "unit", r, env, env)
        case VPair(g1, v1, v2, g2):
            for w1, env1, t1 in eval_value_gen(v1, env, alg.mul(r, g1), state):
                for w2, env2, t2 in eval_value_gen(v2, env1, alg.mul(r, g2), state):
                    yield (VPair(g1, w1, w2, g2), env2,
                           t1 + t2 + _tr(state, "pair", pretty_value(v), r, env, env2))
        case VInl(g, v1):
            for w, env1, t in eval_value_gen(v1, env, alg.mul(r, g), state):
                yield VInl(g, w), env1, t + _tr(state, "inl", pretty_value(v), r, env, env1)
        case VInr(g, v1):
            for w, env1, t in eval_value_gen(v1, env, alg.mul(r, g), state):
                yield VInr(g, w), env1, t + _tr(state, "inr", pretty_value(v), r, env, env1)
        case VAPair(g1, v1, v2, g2):
            # both components start from the same environment and must agree
            # on the final one
            for w1, env1, t1 in eval_value_gen(v1, env, alg.mul(r, g1), state):
                for w2, env2, t2 in eval_value_gen(v2, env, alg.mul(r, g2), state):
                    if env1 == env2:
                        yield (VAPair(g1, w1, w2, g2), env2,
                               t1 + t2 + _tr(state, "apair", pretty_value(v), r, env, env2))
                    else:
                        state.stuck("exhaustion", pretty_value(v),
                                    "additive components consume differently")
        case _:
            state.stuck("type-error", pretty_value(v), "not a value expression")


def _fn_grade_cands(fn: ValueExpr, env: Environment, state: _Search) -> list[Grade]:
    alg = state.algebra
    out: list[Grade] = []
    if isinstance(fn, VVar):
        found = env.lookup(fn.name)
        if found is not None and not alg.is_zero(found[0]):
            out.append(found[0])  # consume the whole availability first
    for g in [alg.one] + alg.nonzero_grades(state.width):
        if g not in out:
            out.append(g)
    return state.cut(out)


def eval_expr_gen(e: FineExpr, env: Environment, r: Grade, fuel: int,
                  state: _Search) -> Iterator[tuple[ValueExpr, Environment, int, list]]:
    alg = state.algebra
    state.tick()
    if fuel <= 0:
        raise _FuelAbort()
    fuel -= 1
    match e:
        case Ret(v):
            state.count("ret")
            if alg.satisfies_nonzero(r):
                cands = [r]
            else:
                cands = [g for g in alg.covers(r, state.width)
                         if alg.satisfies_nonzero(g)]
            if not cands:
                state.stuck("exhaustion", pretty_fine(e),
                            f"no nonzero grade covers {r!r}")
            for s in cands:
                for w, env1, t in eval_value_gen(v, env, s, state):
                    yield w, env1, fuel, t + _tr(state, "ret", pretty_fine(e), r, env, env1)
        case Let(x, e1, e2, _):
            state.count("let")
            for s in state.cut(state.nonzero_cands() + [alg.zero]):
                for v1, env1, f1, t1 in eval_expr_gen(e1, env, s, fuel, state):
                    x2 = fresh(x)
                    body = rename_expr(e2, x, x2)
                    env2 = env1.bind(x2, s, v1)
                    for w, env3, f2, t2 in eval_expr_gen(body, env2, r, f1, state):
                        yield (w, env3, f2,
                               t1 + t2 + _tr(state, "let", pretty_fine(e), r, env, env3))
        case App(vfn, varg, ann):
            state.count("app")
            for s_fn in _fn_grade_cands(vfn, env, state):
                for fval, env1, t1 in eval_value_gen(vfn, env, s_fn, state):
                    if not isinstance(fval, VFun):
                        state.stuck("type-error", pretty_fine(e),
                                    f"applied non-function {pretty_value(fval)}")
                        continue
                    s1_cands = [ann] if ann is not None else state.nonzero_cands()
                    for s1 in s1_cands:
                        if not alg.satisfies_nonzero(s1):
                            continue
                        for s2 in state.cut(alg.residuals(s_fn, s1, 16)):
                            for t_arg in state.cut(state.nonzero_cands() + [alg.zero]):
                                for aval, env2, t2 in eval_value_gen(varg, env1, t_arg, state):
                                    f2 = fresh(fval.fname)
                                    x2 = fresh(fval.param)
                                    body = rename_expr(
                                        rename_expr(fval.body, fval.fname, f2),
                                        fval.param, x2)
                                    env3 = env2.bind(f2, s2, fval).bind(x2, t_arg, aval)
                                    for w, env4, f1, t3 in eval_expr_gen(body, env3, r, fuel, state):
                                        yield (w, env4, f1, t1 + t2 + t3 +
                                               _tr(state, "app", pretty_fine(e), r, env, env4))
        case MatchUnit(v, body):
            state.count("match-u")
            for s in state.nonzero_cands():
                for w, env1, t1 in eval_value_gen(v, env, s, state):
                    if not isinstance(w, VUnit):
                        state.stuck("type-error", pretty_fine(e),
                                    f"matched non-unit {pretty_value(w)}")
                        continue
                    for w2, env2, f1, t2 in eval_expr_gen(body, env1, r, fuel, state):
                        yield (w2, env2, f1,
                               t1 + t2 + _tr(state, "match-u", pretty_fine(e), r, env, env2))
        case MatchPair(x, y, v, body):
            state.count("match-p")
            for s in state.nonzero_cands():
                for w, env1, t1 in eval_value_gen(v, env, s, state):
                    if not isinstance(w, VPair):
                        state.stuck("type-error", pretty_fine(e),
                                    f"matched non-pair {pretty_value(w)}")
                        continue
                    x2, y2 = fresh(x), fresh(y)
                    body2 = rename_expr(rename_expr(body, x, x2), y, y2)
                    env2 = (env1.bind(x2, alg.mul(s, w.g1), w.left)
                                .bind(y2, alg.mul(s, w.g2), w.right))
                    for w2, env3, f1, t2 in eval_expr_gen(body2, env2, r, fuel, state):
                        yield (w2, env3, f1,
                               t1 + t2 + _tr(state, "match-p", pretty_fine(e), r, env, env3))
        case Case(v, x1, left, x2, right):
            state.count("case")
            for s in state.nonzero_cands():
                for w, env1, t1 in eval_value_gen(v, env, s, state):
                    if isinstance(w, VInl):
                        binder, branch, rule = x1, left, "match-l"
                    elif isinstance(w, VInr):
                        binder, branch, rule = x2, right, "match-r"
                    else:
                        state.stuck("type-error", pretty_fine(e),
                                    f"matched non-injection {pretty_value(w)}")
                        continue
                    y = fresh(binder)
                    branch2 = rename_expr(branch, binder, y)
                    env2 = env1.bind(y, alg.mul(s, w.grade), w.body)
                    for w2, env3, f1, t2 in eval_expr_gen(branch2, env2, r, fuel, state):
                        yield (w2, env3, f1,
                               t1 + t2 + _tr(state, rule, pretty_fine(e), r, env, env3))
        case Proj(i, v):
            state.count("proj")
            g_i_of = lambda w: w.g1 if i == 1 else w.g2
            probe = [alg.one] + alg.nonzero_grades(state.width)
            for s in state.cut([g for g in probe]):
                for w, env1, t1 in eval_value_gen(v, env, s, state):
                    if not isinstance(w, VAPair):
                        state.stuck("type-error", pretty_fine(e),
                                    f"projected non-additive-pair {pretty_value(w)}")
                        continue
                    if not alg.leq(r, alg.mul(s, g_i_of(w))):
                        state.stuck("exhaustion", pretty_fine(e),
                                    f"{r!r} not <= {s!r}*{g_i_of(w)!r}")
                        continue
                    comp = w.left if i == 1 else w.right
                    yield (comp, env1, fuel,
                           t1 + _tr(state, "proj", pretty_fine(e), r, env, env1))
        case _:
            state.stuck("type-error", repr(e), "not an expression")


def eval_value(v: ValueExpr, env: Environment, r: Grade,
               strategy: str = "search", budget: int = 10_000,
               trace: bool = False) -> Outcome:
    """Evaluate a value expression; converges or sticks, never diverges."""
    state = _Search(env.algebra, strategy, budget, trace)
    try:
        for w, env1, t in eval_value_gen(v, env, r, state):
            return Outcome("converged", value=w, env=env1, trace=t)
    except _BudgetAbort:
        return Outcome("stuck", reason="exhaustion", location=pretty_value(v),
                       detail="backtrack budget exhausted")
    if state.first_stuck is not None:
        return state.first_stuck
    return Outcome("stuck", reason="exhaustion", location=pretty_value(v),
                   detail="no applicable rule")


def eval_expr(e: FineExpr, env: Environment, r: Grade, fuel: int = 100_000,
              strategy: str = "search", budget: int = 10_000,
              trace: bool = False) -> Outcome:
    """Evaluate an expression under fuel, searching rule-grade choices.

    The first search branch follows the deterministic defaults (full
    consumption of an applied function variable, grade one elsewhere, largest
    residuals); under strategy 'exact' it is the only branch.
    """
    state = _Search(env.algebra, strategy, budget, trace)
    try:
        for w, env1, fleft, t in eval_expr_gen(e, env, r, fuel, state):
            return Outcome("converged", value=w, env=env1,
                           steps=fuel - fleft, trace=t,
                           counters=state.counters)
    except _FuelAbort:
        return Outcome("fuel", steps=fuel, counters=state.counters)
    except _BudgetAbort:
        return Outcome("stuck", reason="exhaustion", location=pretty_fine(e),
                       detail="backtrack budget exhausted",
                       counters=state.counters)
    if state.first_stuck is not None:
        state.first_stuck.counters = state.counters
        return state.first_stuck
    return Outcome("stuck", reason="exhaustion", location=pretty_fine(e),
                   detail="no applicable rule", counters=state.counters)
