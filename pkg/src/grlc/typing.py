"""The graded type checker.

Checking is syntax-directed with subsumption fused into every rule: each
rule synthesizes the least context demand that supports the target graded
type, and the caller compares demands against what is actually available
(pointwise order with absence read as zero, so leftovers must be
discardable).  Grade choice points -- the application grade, scrutinee
grades, let binding grades, residual splits -- are resolved by annotations
first, then algebra search hooks, then bounded backtracking.

Value rules derive any target grade directly (the grade only scales the
demand); expression rules enforce the nonzero side conditions and the
application's  target <= r * cod  obligation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from grlc.algebra import Grade, GradeAlgebra
from grlc.contexts import GradeContext
from grlc.syntax import (App, Case, FineExpr, FunT, GType, Let, MatchPair,
                         MatchUnit, Proj, Ret, SumT, TensorT, Type, UnitT,
                         VAPair, VFun, VInl, VInr, VPair, VUnit, VVar,
                         ValueExpr, WithT, free_vars, pretty_fine,
                         pretty_value, type_equal, unfold_head)


class CheckFailure(Exception):
    def __init__(self, kind: str, location: str, detail: str):
        super().__init__(f"{kind} at {location}: {detail}")
        self.kind = kind  # 'type-mismatch' | 'grade-unsatisfiable'
        self.location = location
        self.detail = detail

    def to_json(self):
        return {"kind": self.kind, "location": self.location,
                "detail": self.detail}


# ---------------------------------------------------------------------------
# type-and-grade contexts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TGC:
    """Type-and-grade context: variable -> (grade, non-graded type).

    Zero-grade entries are dropped; unused variables never constrain types.
    """

    algebra: GradeAlgebra
    entries: tuple[tuple[str, Grade, Type], ...]

    @staticmethod
    def of(algebra: GradeAlgebra, mapping=None) -> "TGC":
        mapping = mapping or {}
        items = tuple(sorted(
            (x, g, t) for x, (g, t) in mapping.items()
            if not algebra.is_zero(g)))
        return TGC(algebra, items)

    def to_dict(self):
        return {x: (g, t) for x, g, t in self.entries}

    def grade(self, x: str) -> Grade:
        for n, g, _ in self.entries:
            if n == x:
                return g
        return self.algebra.zero

    def type_of(self, x: str) -> Optional[Type]:
        for n, _, t in self.entries:
            if n == x:
                return t
        return None

    def support(self):
        return [n for n, _, _ in self.entries]

    def __contains__(self, x):
        return any(n == x for n, _, _ in self.entries)

    def drop(self, names) -> "TGC":
        gone = set(names)
        return TGC(self.algebra,
                   tuple(e for e in self.entries if e[0] not in gone))

    def grades(self) -> GradeContext:
        return GradeContext.of(self.algebra,
                               {n: g for n, g, _ in self.entries})

    def __repr__(self):
        inner = ", ".join(f"{n}:{g!r} {t!r}" for n, g, t in self.entries)
        return "{" + inner + "}"


def tgc_add(a: TGC, b: TGC) -> TGC:
    alg = a.algebra
    out = a.to_dict()
    for x, g, t in b.entries:
        if x in out:
            g0, t0 = out[x]
            if not type_equal(t0, t):
                raise CheckFailure("type-mismatch", x,
                                   f"used at both {t0!r} and {t!r}")
            out[x] = (alg.add(g0, g), t0)
        else:
            out[x] = (g, t)
    return TGC.of(alg, out)


def tgc_scale(r: Grade, a: TGC) -> TGC:
    alg = a.algebra
    return TGC.of(alg, {x: (alg.mul(r, g), t) for x, g, t in a.entries})


def tgc_leq(a: TGC, b: TGC) -> tuple[bool, str]:
    """a <= b with absence read as zero; same-type required when both
    present.  Returns (ok, failing detail)."""
    alg = a.algebra
    names = set(a.support()) | set(b.support())
    for x in sorted(names):
        ta, tb = a.type_of(x), b.type_of(x)
        if ta is not None and tb is not None and not type_equal(ta, tb):
            return False, f"{x}: type {ta!r} vs {tb!r}"
        if not alg.leq(a.grade(x), b.grade(x)):
            return False, (f"{x}: {a.grade(x)!r} not <= {b.grade(x)!r}")
    return True, ""


# ---------------------------------------------------------------------------
# derivations
# ---------------------------------------------------------------------------


@dataclass
class Derivation:
    rule: str
    term: str
    gty: GType
    demand: TGC
    checks: list = field(default_factory=list)  # replayable side conditions
    premises: list = field(default_factory=list)

    def replay(self) -> bool:
        """Re-validate every side condition against the algebra."""
        alg = self.demand.algebra
        for c in self.checks:
            match c:
                case ("leq", a, b):
                    if not alg.leq(a, b):
                        return False
                case ("nonzero", g):
                    if not alg.satisfies_nonzero(g):
                        return False
                case ("grade-eq", a, b):
                    if a != b:
                        return False
                case ("ctx-leq", a, b):
                    if not tgc_leq(a, b)[0]:
                        return False
                case ("type-equal", t1, t2):
                    if not type_equal(t1, t2):
                        return False
                case _:
                    return False
        return all(p.replay() for p in self.premises)

    def rules_used(self) -> list[str]:
        out = [self.rule]
        for p in self.premises:
            out.extend(p.rules_used())
        return out


# ---------------------------------------------------------------------------
# checker
# ---------------------------------------------------------------------------


class _Budget:
    """Backtracking allowance: first alternatives are free, each further
    alternative at any choice point consumes one unit."""

    def __init__(self, choices: int):
        self.left = choices

    def spend(self) -> bool:
        if self.left <= 0:
            return False
        self.left -= 1
        return True


def _cut(budget: _Budget, candidates: list) -> Iterator:
    for i, c in enumerate(candidates):
        if i > 0 and not budget.spend():
            return
        yield c


class Checker:
    def __init__(self, algebra: GradeAlgebra, budget: int = 64, width: int = 4):
        self.algebra = algebra
        self.width = width
        self.budget = _Budget(budget)
        self.type_error: Optional[CheckFailure] = None
        self.grade_error: Optional[CheckFailure] = None

    # -- failure bookkeeping ------------------------------------------------
    def fail_type(self, location: str, detail: str):
        if self.type_error is None:
            self.type_error = CheckFailure("type-mismatch", location, detail)

    def fail_grade(self, location: str, detail: str):
        if self.grade_error is None:
            self.grade_error = CheckFailure("grade-unsatisfiable", location, detail)

    def failure(self, location: str) -> CheckFailure:
        return (self.type_error or self.grade_error
                or CheckFailure("grade-unsatisfiable", location,
                                "no derivation within search budget"))

    # -- type synthesis (shapes only) ----------------------------------------
    def synth_value_type(self, v: ValueExpr, tenv: dict[str, Type]) -> Optional[Type]:
        match v:
            case VVar(x):
                return tenv.get(x)
            case VUnit():
                return UnitT()
            case VPair(g1, v1, v2, g2):
                t1 = self.synth_value_type(v1, tenv)
                t2 = self.synth_value_type(v2, tenv)
                if t1 is None or t2 is None:
                    return None
                return TensorT(GType(t1, g1), GType(t2, g2))
            case VAPair(g1, v1, v2, g2):
                t1 = self.synth_value_type(v1, tenv)
                t2 = self.synth_value_type(v2, tenv)
                if t1 is None or t2 is None:
                    return None
                return WithT(GType(t1, g1), GType(t2, g2))
            case _:
                return None

    def synth_expr_type(self, e: FineExpr, tenv: dict[str, Type]) -> Optional[Type]:
        match e:
            case Ret(v):
                return self.synth_value_type(v, tenv)
            case Let(x, e1, e2, ann):
                t1 = ann.ty if ann is not None else self.synth_expr_type(e1, tenv)
                if t1 is None:
                    return None
                return self.synth_expr_type(e2, {**tenv, x: t1})
            case App(v1, _, _):
                tf = self.synth_value_type(v1, tenv)
                if tf is None:
                    return None
                tf = unfold_head(tf)
                return tf.cod.ty if isinstance(tf, FunT) else None
            case MatchUnit(_, body):
                return self.synth_expr_type(body, tenv)
            case MatchPair(x, y, v, body):
                tv = self.synth_value_type(v, tenv)
                if tv is None:
                    return None
                tv = unfold_head(tv)
                if not isinstance(tv, TensorT):
                    return None
                return self.synth_expr_type(body, {**tenv, x: tv.left.ty,
                                                   y: tv.right.ty})
            case Case(v, x1, l, x2, r):
                tv = self.synth_value_type(v, tenv)
                if tv is None:
                    return None
                tv = unfold_head(tv)
                if not isinstance(tv, SumT):
                    return None
                t = self.synth_expr_type(l, {**tenv, x1: tv.left.ty})
                if t is not None:
                    return t
                return self.synth_expr_type(r, {**tenv, x2: tv.right.ty})
            case Proj(i, v):
                tv = self.synth_value_type(v, tenv)
                if tv is None:
                    return None
                tv = unfold_head(tv)
                if not isinstance(tv, WithT):
                    return None
                return (tv.left if i == 1 else tv.right).ty
        return None

    # -- candidates -----------------------------------------------------------
    def nonzero_cands(self) -> list[Grade]:
        alg = self.algebra
        out = [alg.one]
        for g in alg.nonzero_grades(self.width + 1):
            if g not in out:
                out.append(g)
        return out[: self.width]

    def resolve_rec_grade(self, fun: FunT, recursive: bool) -> list[FunT]:
        """An arrow written without a recursion grade gets zero for
        syntactically non-recursive functions and is searched otherwise."""
        if fun.rec is not None:
            return [fun]
        if not recursive:
            return [FunT(fun.dom, self.algebra.zero, fun.cod)]
        cands = self.algebra.recursion_grades(self.width)
        out = [FunT(fun.dom, s, fun.cod) for s in cands]
        return out or [FunT(fun.dom, self.algebra.zero, fun.cod)]

    def join_gen(self, a: TGC, b: TGC, location: str) -> Iterator[TGC]:
        """Contexts above both a and b, built from per-variable upper bounds."""
        alg = self.algebra
        names = sorted(set(a.support()) | set(b.support()))
        per_var: list[tuple[str, Type, list[Grade]]] = []
        for x in names:
            ta, tb = a.type_of(x), b.type_of(x)
            if ta is not None and tb is not None and not type_equal(ta, tb):
                self.fail_type(location, f"{x}: branch types {ta!r} vs {tb!r}")
                return
            ubs = alg.upper_bounds(a.grade(x), b.grade(x), self.width)
            if not ubs:
                self.fail_grade(location,
                                f"no grade covers both {a.grade(x)!r} and "
                                f"{b.grade(x)!r} for {x}")
                return
            per_var.append((x, ta or tb, ubs))

        def build(i: int, acc: dict) -> Iterator[TGC]:
            if i == len(per_var):
                yield TGC.of(alg, dict(acc))
                return
            x, t, ubs = per_var[i]
            for g in _cut(self.budget, ubs):
                acc[x] = (g, t)
                yield from build(i + 1, acc)
                del acc[x]

        yield from build(0, {})

    # -- value expressions ------------------------------------------------------
    def value_gen(self, v: ValueExpr, gty: GType,
                  tenv: dict[str, Type]) -> Iterator[Derivation]:
        alg = self.algebra
        r = gty.grade
        try:
            ty = unfold_head(gty.ty)
        except Exception as exc:
            self.fail_type(pretty_value(v), str(exc))
            return
        match v:
            case VVar(x):
                tx = tenv.get(x)
                if tx is None:
                    self.fail_type(x, "variable not in scope")
                    return
                if not type_equal(tx, ty):
                    self.fail_type(x, f"has type {tx!r}, wanted {ty!r}")
                    return
                demand = TGC.of(alg, {x: (r, tx)})
                yield Derivation("t-var", x, gty, demand,
                                 checks=[("type-equal", tx, gty.ty)])
            case VUnit():
                if not isinstance(ty, UnitT):
                    self.fail_type("unit", f"wanted {ty!r}")
                    return
                yield Derivation("t-unit", "unit", gty, TGC.of(alg))
            case VFun(f, x, body):
                if not isinstance(ty, FunT):
                    self.fail_type(pretty_value(v), f"wanted {ty!r}, got a function")
                    return
                recursive = f in free_vars(body)
                for fun in _cut(self.budget, self.resolve_rec_grade(ty, recursive)):
                    tenv2 = {**tenv, f: fun, x: fun.dom.ty}
                    for d_body in self.expr_gen(body, fun.cod, tenv2):
                        db = d_body.demand
                        ok_f = alg.leq(db.grade(f), fun.rec)
                        ok_x = alg.leq(db.grade(x), fun.dom.grade)
                        if not ok_f:
                            self.fail_grade(
                                pretty_value(v),
                                f"recursive use {db.grade(f)!r} of {f} not <= "
                                f"recursion grade {fun.rec!r}")
                            continue
                        if not ok_x:
                            self.fail_grade(
                                pretty_value(v),
                                f"parameter use {db.grade(x)!r} not <= "
                                f"{fun.dom.grade!r}")
                            continue
                        demand = tgc_scale(r, db.drop([f, x]))
                        yield Derivation(
                            "t-fun", pretty_value(v), GType(fun, r), demand,
                            checks=[("leq", db.grade(f), fun.rec),
                                    ("leq", db.grade(x), fun.dom.grade)],
                            premises=[d_body])
            case VPair(g1, v1, v2, g2):
                if not isinstance(ty, TensorT):
                    self.fail_type(pretty_value(v), f"wanted {ty!r}, got a pair")
                    return
                if g1 != ty.left.grade or g2 != ty.right.grade:
                    self.fail_grade(pretty_value(v),
                                    f"pair grades ({g1!r},{g2!r}) vs type "
                                    f"({ty.left.grade!r},{ty.right.grade!r})")
                    return
                for d1 in self.value_gen(v1, ty.left, tenv):
                    for d2 in self.value_gen(v2, ty.right, tenv):
                        demand = tgc_scale(r, tgc_add(d1.demand, d2.demand))
                        yield Derivation(
                            "t-pair", pretty_value(v), gty, demand,
                            checks=[("grade-eq", g1, ty.left.grade),
                                    ("grade-eq", g2, ty.right.grade)],
                            premises=[d1, d2])
            case VInl(g, v1) | VInr(g, v1):
                if not isinstance(ty, SumT):
                    self.fail_type(pretty_value(v), f"wanted {ty!r}, got an injection")
                    return
                side = ty.left if isinstance(v, VInl) else ty.right
                rule = "t-inl" if isinstance(v, VInl) else "t-inr"
                if g != side.grade:
                    self.fail_grade(pretty_value(v),
                                    f"injection grade {g!r} vs type {side.grade!r}")
                    return
                for d1 in self.value_gen(v1, side, tenv):
                    demand = tgc_scale(r, d1.demand)
                    yield Derivation(rule, pretty_value(v), gty, demand,
                                     checks=[("grade-eq", g, side.grade)],
                                     premises=[d1])
            case VAPair(g1, v1, v2, g2):
                if not isinstance(ty, WithT):
                    self.fail_type(pretty_value(v), f"wanted {ty!r}, got &-pair")
                    return
                if g1 != ty.left.grade or g2 != ty.right.grade:
                    self.fail_grade(pretty_value(v), "&-pair grades differ from type")
                    return
                for d1 in self.value_gen(v1, ty.left, tenv):
                    for d2 in self.value_gen(v2, ty.right, tenv):
                        for joint in self.join_gen(d1.demand, d2.demand,
                                                   pretty_value(v)):
                            ok1, _ = tgc_leq(d1.demand, joint)
                            ok2, _ = tgc_leq(d2.demand, joint)
                            if not (ok1 and ok2):
                                continue
                            yield Derivation(
                                "t-apair", pretty_value(v), gty,
                                tgc_scale(r, joint),
                                checks=[("ctx-leq", d1.demand, joint),
                                        ("ctx-leq", d2.demand, joint)],
                                premises=[d1, d2])
            case _:
                self.fail_type(repr(v), "not a value expression")

    # -- expressions -------------------------------------------------------------
    def expr_gen(self, e: FineExpr, gty: GType,
                 tenv: dict[str, Type]) -> Iterator[Derivation]:
        alg = self.algebra
        rho = gty.grade
        match e:
            case Ret(v):
                if alg.satisfies_nonzero(rho):
                    cands = [rho]
                else:
                    cands = [g for g in alg.covers(rho, self.width)
                             if alg.satisfies_nonzero(g)]
                    if not cands:
                        self.fail_grade(pretty_fine(e),
                                        f"no nonzero grade covers {rho!r}")
                for s in _cut(self.budget, cands):
                    for d in self.value_gen(v, GType(gty.ty, s), tenv):
                        yield Derivation("t-ret", pretty_fine(e), gty, d.demand,
                                         checks=[("nonzero", s),
                                                 ("leq", rho, s)],
                                         premises=[d])
            case Let(x, e1, e2, ann):
                t1 = ann.ty if ann is not None else self.synth_expr_type(e1, tenv)
                if t1 is None:
                    self.fail_type(pretty_fine(e),
                                   f"cannot infer the type of {x}; annotate it")
                    return
                rec_bound = isinstance(e1, Ret) and isinstance(e1.value, VFun)
                recursive = (rec_bound and e1.value.fname in free_vars(e1.value.body))
                t1_cands = (self.resolve_rec_grade(t1, recursive)
                            if isinstance(t1, FunT) else [t1])
                for t1r in _cut(self.budget, t1_cands):
                    for d2 in self.expr_gen(e2, gty, {**tenv, x: t1r}):
                        delta = d2.demand.grade(x)
                        covers = [delta] + [c for c in alg.covers(delta, self.width)
                                            if c != delta]
                        for r1 in _cut(self.budget, covers[: self.width]):
                            for d1 in self.expr_gen(e1, GType(t1r, r1), tenv):
                                demand = tgc_add(d1.demand, d2.demand.drop([x]))
                                yield Derivation(
                                    "t-let", pretty_fine(e), gty, demand,
                                    checks=[("leq", delta, r1)],
                                    premises=[d1, d2])
            case App(v1, v2, ann):
                tf = self.synth_value_type(v1, tenv)
                if tf is None:
                    self.fail_type(pretty_fine(e),
                                   "cannot infer the applied function's type")
                    return
                tf_head = unfold_head(tf)
                if not isinstance(tf_head, FunT):
                    self.fail_type(pretty_fine(e), f"applied non-function {tf!r}")
                    return
                if tf_head.rec is None:
                    tf_head = FunT(tf_head.dom, alg.zero, tf_head.cod)
                if not type_equal(tf_head.cod.ty, gty.ty):
                    self.fail_type(pretty_fine(e),
                                   f"result {tf_head.cod.ty!r}, wanted {gty.ty!r}")
                    return
                r1, s, r2 = tf_head.dom.grade, tf_head.rec, tf_head.cod.grade
                if ann is not None:
                    cands = [ann]
                else:
                    cands = []
                    if alg.leq(rho, alg.mul(alg.one, r2)):
                        cands.append(alg.one)
                    for c in alg.factor_candidates(rho, r2, self.width + 2):
                        if c not in cands:
                            cands.append(c)
                cands = [c for c in cands if alg.satisfies_nonzero(c)]
                if not cands:
                    self.fail_grade(pretty_fine(e),
                                    f"no nonzero r with {rho!r} <= r*{r2!r}")
                for r in _cut(self.budget, cands[: self.width + 1]):
                    if not alg.leq(rho, alg.mul(r, r2)):
                        self.fail_grade(pretty_fine(e),
                                        f"{rho!r} not <= {r!r}*{r2!r}")
                        continue
                    fn_grade = alg.add(r, alg.mul(r, s))
                    for d1 in self.value_gen(v1, GType(tf_head, fn_grade), tenv):
                        for d2 in self.value_gen(v2, GType(tf_head.dom.ty,
                                                           alg.mul(r, r1)), tenv):
                            demand = tgc_add(d1.demand, d2.demand)
                            yield Derivation(
                                "t-app", pretty_fine(e), gty, demand,
                                checks=[("nonzero", r),
                                        ("leq", rho, alg.mul(r, r2))],
                                premises=[d1, d2])
            case MatchUnit(v, body):
                for s in _cut(self.budget, self.nonzero_cands()):
                    for d1 in self.value_gen(v, GType(UnitT(), s), tenv):
                        for d2 in self.expr_gen(body, gty, tenv):
                            demand = tgc_add(d1.demand, d2.demand)
                            yield Derivation("t-match-u", pretty_fine(e), gty,
                                             demand, checks=[("nonzero", s)],
                                             premises=[d1, d2])
            case MatchPair(x, y, v, body):
                tv = self.synth_value_type(v, tenv)
                if tv is None:
                    self.fail_type(pretty_fine(e), "cannot infer scrutinee type")
                    return
                tvh = unfold_head(tv)
                if not isinstance(tvh, TensorT):
                    self.fail_type(pretty_fine(e), f"matched non-pair {tv!r}")
                    return
                p1, p2 = tvh.left.grade, tvh.right.grade
                for s in _cut(self.budget, self.nonzero_cands()):
                    for d1 in self.value_gen(v, GType(tvh, s), tenv):
                        tenv2 = {**tenv, x: tvh.left.ty, y: tvh.right.ty}
                        for d2 in self.expr_gen(body, gty, tenv2):
                            bx, by = d2.demand.grade(x), d2.demand.grade(y)
                            if not alg.leq(bx, alg.mul(s, p1)):
                                self.fail_grade(
                                    pretty_fine(e),
                                    f"{x} used {bx!r}, bound at {s!r}*{p1!r}")
                                continue
                            if not alg.leq(by, alg.mul(s, p2)):
                                self.fail_grade(
                                    pretty_fine(e),
                                    f"{y} used {by!r}, bound at {s!r}*{p2!r}")
                                continue
                            demand = tgc_add(d1.demand, d2.demand.drop([x, y]))
                            yield Derivation(
                                "t-match-p", pretty_fine(e), gty, demand,
                                checks=[("nonzero", s),
                                        ("leq", bx, alg.mul(s, p1)),
                                        ("leq", by, alg.mul(s, p2))],
                                premises=[d1, d2])
            case Case(v, x1, left, x2, right):
                tv = self.synth_value_type(v, tenv)
                if tv is None:
                    self.fail_type(pretty_fine(e), "cannot infer scrutinee type")
                    return
                tvh = unfold_head(tv)
                if not isinstance(tvh, SumT):
                    self.fail_type(pretty_fine(e), f"matched non-sum {tv!r}")
                    return
                p1, p2 = tvh.left.grade, tvh.right.grade
                for s in _cut(self.budget, self.nonzero_cands()):
                    for d1 in self.value_gen(v, GType(tvh, s), tenv):
                        for dl in self.expr_gen(left, gty,
                                                {**tenv, x1: tvh.left.ty}):
                            bx = dl.demand.grade(x1)
                            if not alg.leq(bx, alg.mul(s, p1)):
                                self.fail_grade(pretty_fine(e),
                                                f"{x1} used {bx!r}, bound at "
                                                f"{s!r}*{p1!r}")
                                continue
                            for dr in self.expr_gen(right, gty,
                                                    {**tenv, x2: tvh.right.ty}):
                                by = dr.demand.grade(x2)
                                if not alg.leq(by, alg.mul(s, p2)):
                                    self.fail_grade(
                                        pretty_fine(e),
                                        f"{x2} used {by!r}, bound at "
                                        f"{s!r}*{p2!r}")
                                    continue
                                for joint in self.join_gen(
                                        dl.demand.drop([x1]),
                                        dr.demand.drop([x2]), pretty_fine(e)):
                                    okl, _ = tgc_leq(dl.demand.drop([x1]), joint)
                                    okr, _ = tgc_leq(dr.demand.drop([x2]), joint)
                                    if not (okl and okr):
                                        continue
                                    demand = tgc_add(d1.demand, joint)
                                    yield Derivation(
                                        "t-match-in", pretty_fine(e), gty,
                                        demand,
                                        checks=[("nonzero", s),
                                                ("leq", bx, alg.mul(s, p1)),
                                                ("leq", by, alg.mul(s, p2))],
                                        premises=[d1, dl, dr])
            case Proj(i, v):
                tv = self.synth_value_type(v, tenv)
                if tv is None:
                    self.fail_type(pretty_fine(e), "cannot infer scrutinee type")
                    return
                tvh = unfold_head(tv)
                if not isinstance(tvh, WithT):
                    self.fail_type(pretty_fine(e), f"projected non-&-pair {tv!r}")
                    return
                side = tvh.left if i == 1 else tvh.right
                if not type_equal(side.ty, gty.ty):
                    self.fail_type(pretty_fine(e),
                                   f"component {side.ty!r}, wanted {gty.ty!r}")
                    return
                cands = [c for c in ([alg.one]
                                     + alg.factor_candidates(rho, side.grade,
                                                             self.width + 2))
                         if alg.satisfies_nonzero(c)]
                seen = []
                for c in cands:
                    if c not in seen:
                        seen.append(c)
                for s in _cut(self.budget, seen[: self.width + 1]):
                    if not alg.leq(rho, alg.mul(s, side.grade)):
                        self.fail_grade(pretty_fine(e),
                                        f"{rho!r} not <= {s!r}*{side.grade!r}")
                        continue
                    for d1 in self.value_gen(v, GType(tvh, s), tenv):
                        yield Derivation(
                            "t-proj", pretty_fine(e), gty, d1.demand,
                            checks=[("nonzero", s),
                                    ("leq", rho, alg.mul(s, side.grade))],
                            premises=[d1])
            case _:
                self.fail_type(repr(e), "not an expression")


# ---------------------------------------------------------------------------
# public checking API
# ---------------------------------------------------------------------------


def _finish(checker: Checker, gen, ctx: TGC, location: str) -> Derivation:
    best_detail = None
    for d in gen:
        ok, why = tgc_leq(d.demand, ctx)
        if ok:
            d.checks = d.checks + [("ctx-leq", d.demand, ctx)]
            return d
        if best_detail is None:
            best_detail = f"needs {d.demand!r}, have {ctx!r} ({why})"
    if best_detail is not None:
        raise CheckFailure("grade-unsatisfiable", location, best_detail)
    raise checker.failure(location)


def check_value(ctx: TGC, v: ValueExpr, gty: GType,
                budget: int = 64,
                tenv_extra: Optional[dict[str, Type]] = None) -> Derivation:
    """Derivation of ctx |- v : gty, or CheckFailure."""
    checker = Checker(ctx.algebra, budget)
    tenv = {x: t for x, _, t in ctx.entries}
    if tenv_extra:
        tenv.update(tenv_extra)
    return _finish(checker, checker.value_gen(v, gty, tenv), ctx,
                   pretty_value(v))


def check_expr(ctx: TGC, e: FineExpr, gty: GType,
               budget: int = 64,
               tenv_extra: Optional[dict[str, Type]] = None) -> Derivation:
    """Derivation of ctx |- e : gty, or CheckFailure."""
    checker = Checker(ctx.algebra, budget)
    tenv = {x: t for x, _, t in ctx.entries}
    if tenv_extra:
        tenv.update(tenv_extra)
    return _finish(checker, checker.expr_gen(e, gty, tenv), ctx, pretty_fine(e))
