"""Abstract syntax: surface expressions, fine-grained expressions, values,
annotated values, and graded equi-recursive types.

The fine-grained language stratifies terms into value expressions (never
diverging, possibly resource-consuming) and expressions (sequenced through
let-in, possibly diverging).  Values are value expressions whose variables
all sit under a lambda.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from grlc.algebra import Grade, GradeAlgebra
from grlc.contexts import GradeContext


# ---------------------------------------------------------------------------
# Graded types
# ---------------------------------------------------------------------------


class Type:
    """Non-graded type; regular trees via explicit mu binders."""


@dataclass(frozen=True)
class GType:
    """A graded type: a non-graded type paired with a grade."""

    ty: "Type"
    grade: Grade

    def __repr__(self):
        return f"{self.ty!r}_{{{self.grade!r}}}"


@dataclass(frozen=True)
class UnitT(Type):
    def __repr__(self):
        return "Unit"


@dataclass(frozen=True)
class FunT(Type):
    dom: GType
    rec: Optional[Grade]  # recursion grade; None = unannotated (zero, searchable)
    cod: GType

    def __repr__(self):
        ann = "" if self.rec is None else f"_{{{self.rec!r}}}"
        return f"({self.dom!r} ->{ann} {self.cod!r})"


@dataclass(frozen=True)
class TensorT(Type):
    left: GType
    right: GType

    def __repr__(self):
        return f"({self.left!r} * {self.right!r})"


@dataclass(frozen=True)
class SumT(Type):
    left: GType
    right: GType

    def __repr__(self):
        return f"({self.left!r} + {self.right!r})"


@dataclass(frozen=True)
class WithT(Type):
    """Additive (cartesian) product."""

    left: GType
    right: GType

    def __repr__(self):
        return f"({self.left!r} & {self.right!r})"


@dataclass(frozen=True)
class TVar(Type):
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True)
class Mu(Type):
    var: str
    body: Type

    def __repr__(self):
        return f"(mu {self.var}. {self.body!r})"


class TypeError_(Exception):
    """Static type errors (shape mismatches, ill-formed recursive types)."""


def subst_type(ty: Type, name: str, replacement: Type) -> Type:
    match ty:
        case TVar(n):
            return replacement if n == name else ty
        case UnitT():
            return ty
        case Mu(v, body):
            if v == name:
                return ty
            return Mu(v, subst_type(body, name, replacement))
        case FunT(dom, rec, cod):
            return FunT(GType(subst_type(dom.ty, name, replacement), dom.grade), rec,
                        GType(subst_type(cod.ty, name, replacement), cod.grade))
        case TensorT(l, r):
            return TensorT(GType(subst_type(l.ty, name, replacement), l.grade),
                           GType(subst_type(r.ty, name, replacement), r.grade))
        case SumT(l, r):
            return SumT(GType(subst_type(l.ty, name, replacement), l.grade),
                        GType(subst_type(r.ty, name, replacement), r.grade))
        case WithT(l, r):
            return WithT(GType(subst_type(l.ty, name, replacement), l.grade),
                         GType(subst_type(r.ty, name, replacement), r.grade))
    raise TypeError_(f"unknown type node {ty!r}")


def is_contractive(ty: Type) -> bool:
    """Mu bodies must not be (chains of) the bound variable itself."""

    def guarded(t: Type, pending: set[str]) -> bool:
        match t:
            case TVar(n):
                return n not in pending
            case Mu(v, body):
                return guarded(body, pending | {v})
            case _:
                return True

    match ty:
        case Mu(v, body):
            return guarded(body, {v}) and is_contractive(body)
        case FunT(d, _, c):
            return is_contractive(d.ty) and is_contractive(c.ty)
        case TensorT(l, r) | SumT(l, r) | WithT(l, r):
            return is_contractive(l.ty) and is_contractive(r.ty)
        case _:
            return True


def unfold_head(ty: Type) -> Type:
    """Strip top-level mu binders by unfolding; terminates on contractive types."""
    seen = 0
    while isinstance(ty, Mu):
        ty = subst_type(ty.body, ty.var, ty)
        seen += 1
        if seen > 64:
            raise TypeError_("non-contractive recursive type")
    if isinstance(ty, TVar):
        raise TypeError_(f"unbound type variable {ty.name}")
    return ty


def _rec_grade_equal(s1, s2) -> bool:
    # an omitted recursion grade reads as zero
    if s1 is None and s2 is None:
        return True
    if s1 is None:
        return s2.algebra.is_zero(s2)
    if s2 is None:
        return s1.algebra.is_zero(s1)
    return s1 == s2


def type_equal(t1: Type, t2: Type) -> bool:
    """Equi-recursive equality: the two types denote the same regular tree.

    Decided by bisimulation with a visited-pair set; grades are compared by
    algebra equality.
    """
    visited: set[tuple[Type, Type]] = set()

    def go(a: Type, b: Type) -> bool:
        a, b = unfold_head(a), unfold_head(b)
        if (a, b) in visited:
            return True
        visited.add((a, b))
        match a, b:
            case UnitT(), UnitT():
                return True
            case FunT(d1, s1, c1), FunT(d2, s2, c2):
                return (_rec_grade_equal(s1, s2)
                        and d1.grade == d2.grade and c1.grade == c2.grade
                        and go(d1.ty, d2.ty) and go(c1.ty, c2.ty))
            case TensorT(l1, r1), TensorT(l2, r2):
                return (l1.grade == l2.grade and r1.grade == r2.grade
                        and go(l1.ty, l2.ty) and go(r1.ty, r2.ty))
            case SumT(l1, r1), SumT(l2, r2):
                return (l1.grade == l2.grade and r1.grade == r2.grade
                        and go(l1.ty, l2.ty) and go(r1.ty, r2.ty))
            case WithT(l1, r1), WithT(l2, r2):
                return (l1.grade == l2.grade and r1.grade == r2.grade
                        and go(l1.ty, l2.ty) and go(r1.ty, r2.ty))
            case _:
                return False

    return go(t1, t2)


# ---------------------------------------------------------------------------
# Surface syntax
# ---------------------------------------------------------------------------


class SurfaceExpr:
    pass


@dataclass(frozen=True)
class SVar(SurfaceExpr):
    name: str


@dataclass(frozen=True)
class SRecFun(SurfaceExpr):
    fname: str
    param: str
    body: SurfaceExpr


@dataclass(frozen=True)
class SApp(SurfaceExpr):
    fn: SurfaceExpr
    arg: SurfaceExpr
    grade: Optional[Grade] = None  # the otherwise-arbitrary application grade


@dataclass(frozen=True)
class SUnit(SurfaceExpr):
    pass


@dataclass(frozen=True)
class SSeq(SurfaceExpr):
    """match-unit; e1 ; e2."""

    first: SurfaceExpr
    second: SurfaceExpr


@dataclass(frozen=True)
class SPair(SurfaceExpr):
    g1: Grade
    left: SurfaceExpr
    right: SurfaceExpr
    g2: Grade


@dataclass(frozen=True)
class SMatchPair(SurfaceExpr):
    x: str
    y: str
    scrutinee: SurfaceExpr
    body: SurfaceExpr


@dataclass(frozen=True)
class SInl(SurfaceExpr):
    grade: Grade
    body: SurfaceExpr


@dataclass(frozen=True)
class SInr(SurfaceExpr):
    grade: Grade
    body: SurfaceExpr


@dataclass(frozen=True)
class SCase(SurfaceExpr):
    scrutinee: SurfaceExpr
    x1: str
    left: SurfaceExpr
    x2: str
    right: SurfaceExpr


@dataclass(frozen=True)
class SAPair(SurfaceExpr):
    g1: Grade
    left: SurfaceExpr
    right: SurfaceExpr
    g2: Grade


@dataclass(frozen=True)
class SProj(SurfaceExpr):
    index: int  # 1 or 2
    body: SurfaceExpr


@dataclass(frozen=True)
class SLet(SurfaceExpr):
    name: str
    bound: SurfaceExpr
    body: SurfaceExpr
    ann: Optional[GType] = None  # from a signature, when assembled from defs


# ---------------------------------------------------------------------------
# Fine-grained syntax
# ---------------------------------------------------------------------------


class ValueExpr:
    pass


class FineExpr:
    pass


@dataclass(frozen=True)
class VVar(ValueExpr):
    name: str


@dataclass(frozen=True)
class VFun(ValueExpr):
    fname: str
    param: str
    body: FineExpr


@dataclass(frozen=True)
class VUnit(ValueExpr):
    pass


@dataclass(frozen=True)
class VPair(ValueExpr):
    g1: Grade
    left: ValueExpr
    right: ValueExpr
    g2: Grade


@dataclass(frozen=True)
class VInl(ValueExpr):
    grade: Grade
    body: ValueExpr


@dataclass(frozen=True)
class VInr(ValueExpr):
    grade: Grade
    body: ValueExpr


@dataclass(frozen=True)
class VAPair(ValueExpr):
    g1: Grade
    left: ValueExpr
    right: ValueExpr
    g2: Grade


@dataclass(frozen=True)
class Ret(FineExpr):
    value: ValueExpr


@dataclass(frozen=True)
class Let(FineExpr):
    name: str
    bound: FineExpr
    body: FineExpr
    ann: Optional[GType] = None


@dataclass(frozen=True)
class App(FineExpr):
    fn: ValueExpr
    arg: ValueExpr
    grade: Optional[Grade] = None


@dataclass(frozen=True)
class MatchUnit(FineExpr):
    scrutinee: ValueExpr
    body: FineExpr


@dataclass(frozen=True)
class MatchPair(FineExpr):
    x: str
    y: str
    scrutinee: ValueExpr
    body: FineExpr


@dataclass(frozen=True)
class Case(FineExpr):
    scrutinee: ValueExpr
    x1: str
    left: FineExpr
    x2: str
    right: FineExpr


@dataclass(frozen=True)
class Proj(FineExpr):
    index: int
    body: ValueExpr


Expr = Union[ValueExpr, FineExpr]


# ---------------------------------------------------------------------------
# Values and annotated values
# ---------------------------------------------------------------------------


def is_value(v: ValueExpr) -> bool:
    """Values: value expressions with no free variables outside lambdas."""
    match v:
        case VVar(_):
            return False
        case VFun(_, _, _) | VUnit():
            return True
        case VPair(_, l, r, _) | VAPair(_, l, r, _):
            return is_value(l) and is_value(r)
        case VInl(_, b) | VInr(_, b):
            return is_value(b)
    return False


@dataclass(frozen=True)
class AnnotatedValue:
    """A value paired with a grade context declaring its direct resource usage."""

    uses: GradeContext
    value: ValueExpr

    def __repr__(self):
        return f"<{self.uses!r}, {pretty_value(self.value)}>"


# ---------------------------------------------------------------------------
# Free variables, substitution, honesty
# ---------------------------------------------------------------------------


def free_vars(e) -> set[str]:
    match e:
        case SVar(n) | VVar(n):
            return {n}
        case SUnit() | VUnit():
            return set()
        case SRecFun(f, x, b) | VFun(f, x, b):
            return free_vars(b) - {f, x}
        case SApp(fn, arg, _) | App(fn, arg, _):
            return free_vars(fn) | free_vars(arg)
        case SSeq(a, b) | MatchUnit(a, b):
            return free_vars(a) | free_vars(b)
        case SPair(_, l, r, _) | VPair(_, l, r, _) | SAPair(_, l, r, _) | VAPair(_, l, r, _):
            return free_vars(l) | free_vars(r)
        case SMatchPair(x, y, scr, body) | MatchPair(x, y, scr, body):
            return free_vars(scr) | (free_vars(body) - {x, y})
        case SInl(_, b) | SInr(_, b) | VInl(_, b) | VInr(_, b):
            return free_vars(b)
        case SCase(scr, x1, l, x2, r) | Case(scr, x1, l, x2, r):
            return free_vars(scr) | (free_vars(l) - {x1}) | (free_vars(r) - {x2})
        case SProj(_, b) | Proj(_, b):
            return free_vars(b)
        case SLet(x, bound, body, _) | Let(x, bound, body, _):
            return free_vars(bound) | (free_vars(body) - {x})
        case Ret(v):
            return free_vars(v)
        case AnnotatedValue(_, v):
            return free_vars(v)
    raise TypeError_(f"free_vars: unknown node {e!r}")


def honest(gamma: GradeContext, e) -> bool:
    """gamma is honest for e: non-discardable entries all occur free in e."""
    alg = gamma.algebra
    fvs = free_vars(e)
    return all(alg.is_discardable(g) or x in fvs for x, g in gamma.entries)


def rename_value(v: ValueExpr, old: str, new: str) -> ValueExpr:
    match v:
        case VVar(n):
            return VVar(new) if n == old else v
        case VUnit():
            return v
        case VFun(f, x, b):
            if old in (f, x):
                return v
            return VFun(f, x, rename_expr(b, old, new))
        case VPair(g1, l, r, g2):
            return VPair(g1, rename_value(l, old, new), rename_value(r, old, new), g2)
        case VInl(g, b):
            return VInl(g, rename_value(b, old, new))
        case VInr(g, b):
            return VInr(g, rename_value(b, old, new))
        case VAPair(g1, l, r, g2):
            return VAPair(g1, rename_value(l, old, new), rename_value(r, old, new), g2)
    raise TypeError_(f"rename_value: unknown node {v!r}")


def rename_expr(e: FineExpr, old: str, new: str) -> FineExpr:
    match e:
        case Ret(v):
            return Ret(rename_value(v, old, new))
        case Let(x, bound, body, ann):
            nb = rename_expr(bound, old, new)
            return Let(x, nb, body if x == old else rename_expr(body, old, new), ann)
        case App(fn, arg, g):
            return App(rename_value(fn, old, new), rename_value(arg, old, new), g)
        case MatchUnit(scr, body):
            return MatchUnit(rename_value(scr, old, new), rename_expr(body, old, new))
        case MatchPair(x, y, scr, body):
            ns = rename_value(scr, old, new)
            nb = body if old in (x, y) else rename_expr(body, old, new)
            return MatchPair(x, y, ns, nb)
        case Case(scr, x1, l, x2, r):
            ns = rename_value(scr, old, new)
            nl = l if x1 == old else rename_expr(l, old, new)
            nr = r if x2 == old else rename_expr(r, old, new)
            return Case(ns, x1, nl, x2, nr)
        case Proj(i, b):
            return Proj(i, rename_value(b, old, new))
    raise TypeError_(f"rename_expr: unknown node {e!r}")


# ---------------------------------------------------------------------------
# Stratification validation and pretty printing
# ---------------------------------------------------------------------------


def validate_fine(e) -> bool:
    """Structural check that the fine-grained stratification holds."""
    match e:
        case VVar(_) | VUnit():
            return True
        case VFun(_, _, b):
            return isinstance(b, FineExpr) and validate_fine(b)
        case VPair(_, l, r, _) | VAPair(_, l, r, _):
            return (isinstance(l, ValueExpr) and isinstance(r, ValueExpr)
                    and validate_fine(l) and validate_fine(r))
        case VInl(_, b) | VInr(_, b):
            return isinstance(b, ValueExpr) and validate_fine(b)
        case Ret(v):
            return isinstance(v, ValueExpr) and validate_fine(v)
        case Let(_, bound, body, _):
            return (isinstance(bound, FineExpr) and isinstance(body, FineExpr)
                    and validate_fine(bound) and validate_fine(body))
        case App(fn, arg, _):
            return (isinstance(fn, ValueExpr) and isinstance(arg, ValueExpr)
                    and validate_fine(fn) and validate_fine(arg))
        case MatchUnit(scr, body):
            return (isinstance(scr, ValueExpr) and isinstance(body, FineExpr)
                    and validate_fine(scr) and validate_fine(body))
        case MatchPair(_, _, scr, body):
            return (isinstance(scr, ValueExpr) and isinstance(body, FineExpr)
                    and validate_fine(scr) and validate_fine(body))
        case Case(scr, _, l, _, r):
            return (isinstance(scr, ValueExpr) and isinstance(l, FineExpr)
                    and isinstance(r, FineExpr)
                    and validate_fine(scr) and validate_fine(l) and validate_fine(r))
        case Proj(_, b):
            return isinstance(b, ValueExpr) and validate_fine(b)
    return False


def _ann(g1: Grade, g2: Grade) -> str:
    alg = g1.algebra
    if g1 == alg.one and g2 == alg.one:
        return ""
    return f"_{{{g1!r},{g2!r}}}"


def pretty_value(v: ValueExpr) -> str:
    match v:
        case VVar(n):
            return n
        case VUnit():
            return "unit"
        case VFun(f, x, b):
            return f"rec {f}.\\{x}. {pretty_fine(b)}"
        case VPair(g1, l, r, g2):
            return f"<{pretty_value(l)}, {pretty_value(r)}>{_ann(g1, g2)}"
        case VAPair(g1, l, r, g2):
            return f"<{pretty_value(l)} | {pretty_value(r)}>{_ann(g1, g2)}"
        case VInl(g, b):
            ann = "" if g == g.algebra.one else f"_{{{g!r}}}"
            return f"inl{ann} {pretty_value(b)}"
        case VInr(g, b):
            ann = "" if g == g.algebra.one else f"_{{{g!r}}}"
            return f"inr{ann} {pretty_value(b)}"
    return repr(v)


def pretty_fine(e: FineExpr) -> str:
    match e:
        case Ret(v):
            return f"return {pretty_value(v)}"
        case Let(x, bound, body, _):
            return f"let {x} = {pretty_fine(bound)} in {pretty_fine(body)}"
        case App(fn, arg, g):
            at = "" if g is None else f" @[{g!r}]"
            return f"({pretty_value(fn)}{at} {pretty_value(arg)})"
        case MatchUnit(scr, body):
            return f"{pretty_value(scr)}; {pretty_fine(body)}"
        case MatchPair(x, y, scr, body):
            return f"match {pretty_value(scr)} with <{x}, {y}> -> {pretty_fine(body)}"
        case Case(scr, x1, l, x2, r):
            return (f"case {pretty_value(scr)} with inl {x1} -> {pretty_fine(l)} "
                    f"or inr {x2} -> {pretty_fine(r)}")
        case Proj(i, b):
            kw = "fst" if i == 1 else "snd"
            return f"{kw} {pretty_value(b)}"
    return repr(e)


def pretty_surface(e: SurfaceExpr) -> str:
    match e:
        case SVar(n):
            return n
        case SUnit():
            return "unit"
        case SRecFun(f, x, b):
            return f"rec {f}.\\{x}. {pretty_surface(b)}"
        case SApp(fn, arg, g):
            at = "" if g is None else f" @[{g!r}]"
            return f"({pretty_surface(fn)}{at} {pretty_surface(arg)})"
        case SSeq(a, b):
            return f"({pretty_surface(a)}; {pretty_surface(b)})"
        case SPair(g1, l, r, g2):
            return f"<{pretty_surface(l)}, {pretty_surface(r)}>{_ann(g1, g2)}"
        case SAPair(g1, l, r, g2):
            return f"<{pretty_surface(l)} | {pretty_surface(r)}>{_ann(g1, g2)}"
        case SMatchPair(x, y, scr, body):
            return f"match {pretty_surface(scr)} with <{x}, {y}> -> {pretty_surface(body)}"
        case SInl(g, b):
            ann = "" if g == g.algebra.one else f"_{{{g!r}}}"
            return f"inl{ann} {pretty_surface(b)}"
        case SInr(g, b):
            ann = "" if g == g.algebra.one else f"_{{{g!r}}}"
            return f"inr{ann} {pretty_surface(b)}"
        case SCase(scr, x1, l, x2, r):
            return (f"case {pretty_surface(scr)} with inl {x1} -> {pretty_surface(l)} "
                    f"or inr {x2} -> {pretty_surface(r)}")
        case SProj(i, b):
            kw = "fst" if i == 1 else "snd"
            return f"{kw} {pretty_surface(b)}"
        case SLet(x, bound, body, _):
            return f"let {x} = {pretty_surface(bound)} in {pretty_surface(body)}"
    return repr(e)
