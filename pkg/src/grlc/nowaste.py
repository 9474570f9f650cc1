"""Annotated environments and the no-waste relation.

Every stored value carries a grade context declaring its direct resource
usage; the dependency graph of an environment collects those contexts as
edge weights.  A grade context gamma uses an environment with no waste when
its transitive demand, gamma times the reflexive-transitive closure of the
dependency graph, sits below what the environment offers -- pointwise, with
uncovered leftovers required to be discardable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Union

from grlc.algebra import Grade, GradeAlgebra
from grlc.contexts import (GradeContext, GradeGraph, GradeMatrix, closure,
                           ctx_leq, ctx_scale, is_acyclic, vec_mat_mul)
from grlc.eval_exhaust import Environment
from grlc.syntax import AnnotatedValue, ValueExpr, free_vars, honest


class EnvironmentError_(Exception):
    """Ill-formed annotated environment: open, cyclic, or dishonest."""


@dataclass(frozen=True)
class AnnotatedEnvironment:
    """Ordered map variable -> (grade, annotated value)."""

    algebra: GradeAlgebra
    entries: tuple[tuple[str, Grade, AnnotatedValue], ...]

    @staticmethod
    def of(algebra: GradeAlgebra, items, validate: bool = True
           ) -> "AnnotatedEnvironment":
        env = AnnotatedEnvironment(algebra, tuple(items))
        if validate:
            env.validate()
        return env

    def validate(self):
        dom = set(self.domain())
        for x, _, av in self.entries:
            if not free_vars(av.value) <= dom:
                raise EnvironmentError_(
                    f"{x}: stored value mentions variables outside the "
                    f"environment: {sorted(free_vars(av.value) - dom)}")
            if not honest(av.uses, av.value):
                raise EnvironmentError_(
                    f"{x}: annotation {av.uses!r} is not honest for the value")
        if not is_acyclic(graph_of_env(self)):
            raise EnvironmentError_("environment dependency graph is cyclic")

    def lookup(self, x: str):
        for name, g, v in self.entries:
            if name == x:
                return g, v
        return None

    def with_grade(self, x: str, g: Grade) -> "AnnotatedEnvironment":
        out = tuple((n, g if n == x else gr, v) for n, gr, v in self.entries)
        return AnnotatedEnvironment(self.algebra, out)

    def bind(self, x: str, g: Grade, v: AnnotatedValue) -> "AnnotatedEnvironment":
        if self.lookup(x) is not None:
            raise EnvironmentError_(f"variable {x} already bound")
        return AnnotatedEnvironment(self.algebra, self.entries + ((x, g, v),))

    def domain(self) -> list[str]:
        return [n for n, _, _ in self.entries]

    def grades(self) -> GradeContext:
        return GradeContext.of(self.algebra, {n: g for n, g, _ in self.entries})

    def to_json(self):
        return {n: {"grade": repr(g), "uses": v.uses.to_json(),
                    "value": repr(v)} for n, g, v in self.entries}

    def __repr__(self):
        inner = ", ".join(f"{n}:{g!r} uses{v.uses!r}" for n, g, v in self.entries)
        return "{" + inner + "}"


def env_sum(a: AnnotatedEnvironment,
            b: AnnotatedEnvironment) -> AnnotatedEnvironment:
    """Grades add; a variable in both must carry the same value."""
    alg = a.algebra
    bmap = {n: (g, v) for n, g, v in b.entries}
    out = []
    for n, g, v in a.entries:
        if n in bmap:
            g2, v2 = bmap.pop(n)
            if v2 != v:
                raise EnvironmentError_(f"conflicting values for {n} in sum")
            out.append((n, alg.add(g, g2), v))
        else:
            out.append((n, g, v))
    for n, g, v in b.entries:
        if n in bmap:
            out.append((n, g, v))
    return AnnotatedEnvironment(alg, tuple(out))


def graph_of_env(env: AnnotatedEnvironment) -> GradeGraph:
    edges = {}
    for x, _, av in env.entries:
        for y, g in av.uses.entries:
            edges[(x, y)] = g
    return GradeGraph.of(env.algebra, edges)


@lru_cache(maxsize=4096)
def _closure_cached(graph: GradeGraph) -> GradeMatrix:
    return closure(graph)


def env_closure(env: AnnotatedEnvironment) -> GradeMatrix:
    return _closure_cached(graph_of_env(env))


def no_waste(gamma: GradeContext, env: AnnotatedEnvironment) -> bool:
    """gamma (transitively) uses env with no waste."""
    demand = vec_mat_mul(gamma, env_closure(env))
    return ctx_leq(demand, env.grades())


def reachable(env: AnnotatedEnvironment, roots: Iterable[str]) -> set[str]:
    """Least set containing the roots and closed under stored-value free
    variables."""
    seen = set(roots)
    frontier = list(seen)
    while frontier:
        x = frontier.pop()
        found = env.lookup(x)
        if found is None:
            continue
        for y in free_vars(found[1].value):
            if y not in seen:
                seen.add(y)
                frontier.append(y)
    return seen


def erase(x: Union[AnnotatedValue, AnnotatedEnvironment]
          ) -> Union[ValueExpr, Environment]:
    """Drop usage annotations, yielding plain values/environments."""
    if isinstance(x, AnnotatedValue):
        return x.value
    return Environment(x.algebra,
                       tuple((n, g, av.value) for n, g, av in x.entries))


def annotate_env(env: Environment,
                 uses: Optional[dict[str, GradeContext]] = None,
                 validate: bool = True) -> AnnotatedEnvironment:
    """Attach usage annotations (default empty) to a plain environment."""
    uses = uses or {}
    alg = env.algebra
    items = [(n, g, AnnotatedValue(uses.get(n, GradeContext.of(alg)), v))
             for n, g, v in env.entries]
    return AnnotatedEnvironment.of(alg, items, validate=validate)


# ---------------------------------------------------------------------------
# the semantic no-waste characterization of configurations
# ---------------------------------------------------------------------------


@dataclass
class NwConfigResult:
    holds: bool
    witness: Optional[GradeContext] = None
    note: str = ""


def _gamma_candidates(alg: GradeAlgebra, available: Grade,
                      can_be_relevant: bool, width: int) -> list[Grade]:
    """Candidate claims for one variable, exact-cover first."""
    carrier = alg.enumerate()
    if carrier is not None:
        cands = [g for g in carrier if alg.leq(g, available)]
    else:
        cands = [g for g in {available, alg.one, alg.zero}
                 if alg.leq(g, available)]
        for g in alg.nonzero_grades(width):
            if alg.leq(g, available) and g not in cands:
                cands.append(g)
    if not can_be_relevant:
        cands = [g for g in cands if alg.is_discardable(g)]
    ordered = sorted(cands, key=lambda g: alg._sort_key(g.value), reverse=True)[: width + 1]
    if alg.zero not in ordered:
        ordered.append(alg.zero)
    return ordered


def nw_config(expr, env: AnnotatedEnvironment, budget: int = 20_000
              ) -> NwConfigResult:
    """Search for an honest grade context gamma with no_waste(gamma, env).

    Complete for finite-carrier algebras restricted to the environment's
    domain; bounded otherwise.
    """
    alg = env.algebra
    fvs = free_vars(expr) & set(env.domain())
    per_var: list[tuple[str, list[Grade]]] = []
    for x, r_x, _ in env.entries:
        cands = _gamma_candidates(alg, r_x, x in fvs, 6)
        per_var.append((x, cands))

    count = [0]

    def search(i: int, acc: dict) -> Optional[GradeContext]:
        if count[0] > budget:
            return None
        if i == len(per_var):
            gamma = GradeContext.of(alg, dict(acc))
            count[0] += 1
            if no_waste(gamma, env):
                return gamma
            return None
        x, cands = per_var[i]
        for g in cands:
            acc[x] = g
            got = search(i + 1, acc)
            if got is not None:
                return got
        del acc[x]
        return None

    gamma = search(0, {})
    if gamma is not None:
        return NwConfigResult(True, gamma)
    note = ("refuted by exhaustive search over the carrier"
            if alg.enumerate() is not None and count[0] <= budget
            else "no witness within budget")
    return NwConfigResult(False, None, note)
