"""Grade contexts, grade graphs and grade matrices.

Grade contexts are finite-support maps from variables to grades; grade graphs
map variable pairs to grades with finite support and describe direct
dependencies between environment entries.  Grade matrices generalize graphs:
every row is a grade context, and only finitely many rows differ from a
default diagonal pattern.  The reflexive-transitive closure of an acyclic
grade graph, computed as the finite power sum, turns direct dependencies into
transitive ones; the no-waste relation compares a transitive demand against
what an environment offers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from grlc.algebra import Grade, GradeAlgebra


@dataclass(frozen=True)
class GradeContext:
    """Finite-support map variable -> grade; absent means zero.

    Zero entries are dropped at construction, so dict equality is semantic
    equality.
    """

    algebra: GradeAlgebra
    entries: tuple[tuple[str, Grade], ...]

    @staticmethod
    def of(algebra: GradeAlgebra, mapping: Optional[dict[str, Grade]] = None) -> "GradeContext":
        mapping = mapping or {}
        items = tuple(sorted(
            (x, g) for x, g in mapping.items() if not algebra.is_zero(g)))
        return GradeContext(algebra, items)

    def to_dict(self) -> dict[str, Grade]:
        return dict(self.entries)

    def get(self, x: str) -> Grade:
        for k, v in self.entries:
            if k == x:
                return v
        return self.algebra.zero

    def support(self) -> list[str]:
        return [k for k, _ in self.entries]

    def __contains__(self, x) -> bool:
        return any(k == x for k, _ in self.entries)

    def __repr__(self):
        inner = ", ".join(f"{k}:{v!r}" for k, v in self.entries)
        return "{" + inner + "}"

    def restrict(self, keep: Iterable[str]) -> "GradeContext":
        keep = set(keep)
        return GradeContext.of(self.algebra,
                               {k: v for k, v in self.entries if k in keep})

    def drop(self, names: Iterable[str]) -> "GradeContext":
        gone = set(names)
        return GradeContext.of(self.algebra,
                               {k: v for k, v in self.entries if k not in gone})

    def to_json(self):
        return {k: repr(v) for k, v in self.entries}


def ctx_add(g1: GradeContext, g2: GradeContext) -> GradeContext:
    """Pointwise sum; support within the union of supports."""
    alg = g1.algebra
    out = g1.to_dict()
    for x, v in g2.entries:
        out[x] = alg.add(out[x], v) if x in out else v
    return GradeContext.of(alg, out)


def ctx_scale(r: Grade, g: GradeContext) -> GradeContext:
    """Pointwise left multiplication by r."""
    alg = g.algebra
    return GradeContext.of(alg, {x: alg.mul(r, v) for x, v in g.entries})


def ctx_leq(g1: GradeContext, g2: GradeContext) -> bool:
    """Pointwise order with absence read as zero.

    Variables present only in g2 must be discardable: this is the no-waste
    reading of context approximation.
    """
    alg = g1.algebra
    names = set(g1.support()) | set(g2.support())
    return all(alg.leq(g1.get(x), g2.get(x)) for x in names)


def ctx_sum(contexts: Iterable[GradeContext], algebra: GradeAlgebra) -> GradeContext:
    acc = GradeContext.of(algebra)
    for c in contexts:
        acc = ctx_add(acc, c)
    return acc


# ---------------------------------------------------------------------------
# Grade graphs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GradeGraph:
    """Finite-support map (variable, variable) -> grade."""

    algebra: GradeAlgebra
    edges: tuple[tuple[tuple[str, str], Grade], ...]

    @staticmethod
    def of(algebra: GradeAlgebra,
           mapping: Optional[dict[tuple[str, str], Grade]] = None) -> "GradeGraph":
        mapping = mapping or {}
        items = tuple(sorted(
            (e, g) for e, g in mapping.items() if not algebra.is_zero(g)))
        return GradeGraph(algebra, items)

    def get(self, x: str, y: str) -> Grade:
        for (a, b), g in self.edges:
            if (a, b) == (x, y):
                return g
        return self.algebra.zero

    def row(self, x: str) -> GradeContext:
        return GradeContext.of(self.algebra,
                               {b: g for (a, b), g in self.edges if a == x})

    def nodes(self) -> list[str]:
        out = set()
        for (a, b), _ in self.edges:
            out.add(a)
            out.add(b)
        return sorted(out)

    def non_source_nodes(self) -> list[str]:
        """Nodes with at least one incoming nonzero edge."""
        return sorted({b for (_, b), _ in self.edges})

    def __repr__(self):
        inner = ", ".join(f"{a}->{b}:{g!r}" for (a, b), g in self.edges)
        return "{" + inner + "}"

    def to_json(self):
        return {f"{a}->{b}": repr(g) for (a, b), g in self.edges}


def path_weight(graph: GradeGraph, path: list[str]) -> Grade:
    """Weight of a node sequence: one for a single node, otherwise the
    product of edge grades along the path."""
    if not path:
        raise ValueError("path must be nonempty")
    alg = graph.algebra
    w = alg.one
    for a, b in zip(path, path[1:]):
        w = alg.mul(graph.get(a, b), w)
    return w


def is_acyclic(graph: GradeGraph) -> bool:
    """Cycle detection on the digraph of individually nonzero edges.

    Complete for integral algebras: there a cycle of nonzero edges has a
    nonzero weight.
    """
    succ: dict[str, list[str]] = {}
    for (a, b), _ in graph.edges:
        succ.setdefault(a, []).append(b)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {n: WHITE for n in graph.nodes()}

    for start in graph.nodes():
        if color[start] != WHITE:
            continue
        # iterative DFS; (node, child-iterator) stack
        stack = [(start, iter(succ.get(start, ())))]
        color[start] = GREY
        while stack:
            node, children = stack[-1]
            advanced = False
            for m in children:
                if color[m] == GREY:
                    return False
                if color[m] == WHITE:
                    color[m] = GREY
                    stack.append((m, iter(succ.get(m, ()))))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()
    return True


class CyclicGraphError(Exception):
    """Raised when an operation requires an acyclic grade graph."""


# ---------------------------------------------------------------------------
# Grade matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GradeMatrix:
    """Row-finite matrix over grades.

    Only rows differing from the default diagonal pattern are stored; an
    unstored row for x reads {x: diag}.  diag = one gives the identity
    pattern, diag = zero the zero pattern, so graphs (zero default) and
    closures (identity default) share one representation.
    """

    algebra: GradeAlgebra
    rows: tuple[tuple[str, GradeContext], ...]
    diag: Grade

    @staticmethod
    def of(algebra: GradeAlgebra, rows: dict[str, GradeContext],
           diag: Grade) -> "GradeMatrix":
        kept = {}
        for x, row in rows.items():
            default = GradeContext.of(algebra, {x: diag})
            if row != default:
                kept[x] = row
        return GradeMatrix(algebra, tuple(sorted(kept.items())), diag)

    @staticmethod
    def identity(algebra: GradeAlgebra) -> "GradeMatrix":
        return GradeMatrix.of(algebra, {}, algebra.one)

    @staticmethod
    def zero(algebra: GradeAlgebra) -> "GradeMatrix":
        return GradeMatrix.of(algebra, {}, algebra.zero)

    @staticmethod
    def from_graph(graph: GradeGraph) -> "GradeMatrix":
        rows = {x: graph.row(x) for x in graph.nodes()}
        return GradeMatrix.of(graph.algebra, rows, graph.algebra.zero)

    def row(self, x: str) -> GradeContext:
        for k, v in self.rows:
            if k == x:
                return v
        return GradeContext.of(self.algebra, {x: self.diag})

    def get(self, x: str, y: str) -> Grade:
        return self.row(x).get(y)

    def explicit_keys(self) -> list[str]:
        return [k for k, _ in self.rows]

    def __repr__(self):
        inner = "; ".join(f"{k}:{v!r}" for k, v in self.rows)
        return f"Matrix(diag={self.diag!r}; {inner})"


def vec_mat_mul(gamma: GradeContext, m: GradeMatrix) -> GradeContext:
    """(gamma . M)(x) = sum over y of gamma(y) * M(y, x)."""
    alg = gamma.algebra
    acc = GradeContext.of(alg)
    for y, g in gamma.entries:
        acc = ctx_add(acc, ctx_scale(g, m.row(y)))
    return acc


def matrix_mul(m1: GradeMatrix, m2: GradeMatrix) -> GradeMatrix:
    alg = m1.algebra
    keys = set(m1.explicit_keys()) | set(m2.explicit_keys())
    rows = {x: vec_mat_mul(m1.row(x), m2) for x in keys}
    return GradeMatrix.of(alg, rows, alg.mul(m1.diag, m2.diag))


def matrix_add(m1: GradeMatrix, m2: GradeMatrix) -> GradeMatrix:
    alg = m1.algebra
    keys = set(m1.explicit_keys()) | set(m2.explicit_keys())
    rows = {x: ctx_add(m1.row(x), m2.row(x)) for x in keys}
    return GradeMatrix.of(alg, rows, alg.add(m1.diag, m2.diag))


def closure(graph: GradeGraph) -> GradeMatrix:
    """Reflexive-transitive closure of an acyclic grade graph.

    Computed as the sum of powers G^0 .. G^n where n is the number of
    non-source nodes; larger powers vanish on acyclic graphs.
    """
    if not is_acyclic(graph):
        raise CyclicGraphError(f"graph has a nonzero-weight cycle: {graph!r}")
    alg = graph.algebra
    g = GradeMatrix.from_graph(graph)
    acc = GradeMatrix.identity(alg)
    power = GradeMatrix.identity(alg)
    for _ in range(len(graph.non_source_nodes())):
        power = matrix_mul(power, g)
        acc = matrix_add(acc, power)
    return acc


def closure_paths_oracle(graph: GradeGraph) -> GradeMatrix:
    """Closure by brute-force path enumeration; test oracle only.

    Sums the weights of all paths up to length n (longer ones weigh zero on
    an acyclic graph) between every pair of graph nodes.
    """
    if not is_acyclic(graph):
        raise CyclicGraphError("oracle needs an acyclic graph")
    alg = graph.algebra
    nodes = graph.nodes()
    n = len(graph.non_source_nodes())
    rows: dict[str, dict[str, Grade]] = {x: {} for x in nodes}

    def extend(path):
        x, y = path[0], path[-1]
        w = path_weight(graph, path)
        if not alg.is_zero(w):
            row = rows[x]
            row[y] = alg.add(row.get(y, alg.zero), w)
        if len(path) - 1 < n:
            for z in nodes:
                extend(path + [z])

    for x in nodes:
        rows[x][x] = alg.one  # the empty path
        for z in nodes:
            extend([x, z])
    ctx_rows = {x: GradeContext.of(alg, row) for x, row in rows.items()}
    return GradeMatrix.of(alg, ctx_rows, alg.one)


def matrices_equal(m1: GradeMatrix, m2: GradeMatrix) -> bool:
    """Equality on the joint explicit support plus the diagonal default."""
    if m1.diag != m2.diag:
        return False
    keys = set(m1.explicit_keys()) | set(m2.explicit_keys())
    return all(m1.row(x) == m2.row(x) for x in keys)
