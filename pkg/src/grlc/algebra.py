"""Grade algebras: ordered semirings in which r below zero forces r = zero.

A grade algebra packages a carrier, a partial order ``leq``, a commutative
additive monoid ``(add, zero)`` and a multiplicative monoid ``(mul, one)``,
with distributivity, annihilation by zero, and monotonicity of both
operations.  Grades annotate how much (or in which mode) a resource may be
used; the order models permitted over-approximation of usage.

Built-in algebras are constructed from an expression string, e.g.
``"linearity"``, ``"ext:nat-leq"`` or ``"smash:linearity,privacy"``; see
:func:`build_algebra`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterator, Optional


class GradeError(Exception):
    """Misuse of grades: cross-algebra operands, unknown literals, bad specs."""


class _Infinity:
    """Symbolic top element used by linearity/affinity/ext/real-ext carriers."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "inf"


INF = _Infinity()


class _AdjoinedZero:
    """The fresh zero adjoined by the r0 construction (and by smash products)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "0"


ZERO_HAT = _AdjoinedZero()


@dataclass(frozen=True)
class Grade:
    """An element of one specific algebra's carrier.

    Grades from different algebras never mix; every operation checks
    provenance and raises :class:`GradeError` on a mismatch.
    """

    algebra: "GradeAlgebra"
    value: Any

    def __repr__(self):
        return self.algebra.format(self.value)

    def __eq__(self, other):
        if not isinstance(other, Grade):
            return NotImplemented
        return self.algebra is other.algebra and self.value == other.value

    def __hash__(self):
        return hash((id(self.algebra), self.value))

    # Convenience operators; the algebra does the real work.
    def __add__(self, other: "Grade") -> "Grade":
        return self.algebra.add(self, other)

    def __mul__(self, other: "Grade") -> "Grade":
        return self.algebra.mul(self, other)

    def __le__(self, other: "Grade") -> bool:
        return self.algebra.leq(self, other)


class GradeAlgebra:
    """Abstract grade algebra.

    Subclasses implement the raw operations on carrier values (methods with a
    ``_v`` suffix); this base class wraps them with provenance checks and
    provides generic search hooks based on carrier enumeration.  Instances are
    immutable and safe to share between threads.
    """

    name: str = "?"

    # -- raw operations on carrier values -------------------------------
    def _leq_v(self, a, b) -> bool:
        raise NotImplementedError

    def _add_v(self, a, b):
        raise NotImplementedError

    def _mul_v(self, a, b):
        raise NotImplementedError

    def _zero_v(self):
        raise NotImplementedError

    def _one_v(self):
        raise NotImplementedError

    def _sort_key(self, v):
        """Total order refining leq where possible; used only for deterministic output."""
        raise NotImplementedError

    def _carrier(self) -> Optional[list]:
        """The full carrier for finite algebras, else None."""
        return None

    def _sample_values(self) -> list:
        """A finite, deterministic sample of the carrier for law checking."""
        carrier = self._carrier()
        if carrier is not None:
            return carrier
        raise NotImplementedError

    def format(self, v) -> str:
        return repr(v)

    def parse_literal(self, text: str):
        """Parse a grade literal into a carrier value; None if unrecognized."""
        raise NotImplementedError

    # -- wrapped API -----------------------------------------------------
    def _check(self, *grades: Grade):
        for g in grades:
            if not isinstance(g, Grade) or g.algebra is not self:
                raise GradeError(
                    f"grade {g!r} does not belong to algebra {self.name}"
                )

    def grade(self, v) -> Grade:
        return Grade(self, v)

    @property
    def zero(self) -> Grade:
        return Grade(self, self._zero_v())

    @property
    def one(self) -> Grade:
        return Grade(self, self._one_v())

    def leq(self, a: Grade, b: Grade) -> bool:
        self._check(a, b)
        return self._leq_v(a.value, b.value)

    def add(self, a: Grade, b: Grade) -> Grade:
        self._check(a, b)
        return Grade(self, self._add_v(a.value, b.value))

    def mul(self, a: Grade, b: Grade) -> Grade:
        self._check(a, b)
        return Grade(self, self._mul_v(a.value, b.value))

    def is_zero(self, a: Grade) -> bool:
        self._check(a)
        return a.value == self._zero_v()

    def is_discardable(self, a: Grade) -> bool:
        """True iff zero <= a, i.e. the amount a may be left unused."""
        self._check(a)
        return self._leq_v(self._zero_v(), a.value)

    def is_trivial(self) -> bool:
        """A grade algebra is trivial iff one <= zero (single-point carrier)."""
        return self._leq_v(self._one_v(), self._zero_v())

    def satisfies_nonzero(self, a: Grade) -> bool:
        """The `grade is not zero` side condition of the semantics and typing
        rules.  Vacuous in a trivial algebra, where the single point carries
        no usage information and the calculus degenerates to the plain one."""
        return self.is_trivial() or not self.is_zero(a)

    def enumerate(self) -> Optional[list[Grade]]:
        """All grades, sorted deterministically, for finite carriers; else None."""
        carrier = self._carrier()
        if carrier is None:
            return None
        return [Grade(self, v) for v in sorted(carrier, key=self._sort_key)]

    def sample(self) -> list[Grade]:
        """Deterministic sample used by law checking on infinite carriers."""
        return [Grade(self, v) for v in self._sample_values()]

    def parse(self, text: str) -> Grade:
        v = self.parse_literal(text.strip())
        if v is None:
            raise GradeError(f"unknown grade literal {text!r} for algebra {self.name}")
        return Grade(self, v)

    # -- search hooks ----------------------------------------------------
    def residuals(self, s: Grade, r: Grade, limit: int = 16) -> list[Grade]:
        """Candidates s' with r + s' <= s, largest residual first.

        Exhaustive for finite carriers, best-effort otherwise.  An empty list
        means no residual exists: consuming r out of s is impossible.
        """
        self._check(s, r)
        if limit < 1:
            raise ValueError("limit must be >= 1")
        out = self._residuals_v(s.value, r.value, limit)
        return [Grade(self, v) for v in out[:limit]]

    def _residuals_v(self, s, r, limit) -> list:
        carrier = self._carrier()
        if carrier is None:
            raise NotImplementedError(f"{self.name}: no residual search")
        good = [v for v in carrier if self._leq_v(self._add_v(r, v), s)]
        return sorted(good, key=self._sort_key, reverse=True)

    def factor_candidates(self, goal: Grade, factor: Grade, limit: int = 16) -> list[Grade]:
        """Candidates r with goal <= r * factor, smallest factor first."""
        self._check(goal, factor)
        if limit < 1:
            raise ValueError("limit must be >= 1")
        out = self._factors_v(goal.value, factor.value, limit)
        return [Grade(self, v) for v in out[:limit]]

    def _factors_v(self, goal, factor, limit) -> list:
        carrier = self._carrier()
        if carrier is None:
            raise NotImplementedError(f"{self.name}: no factor search")
        good = [v for v in carrier if self._leq_v(goal, self._mul_v(v, factor))]
        return sorted(good, key=self._sort_key)

    def upper_bounds(self, a: Grade, b: Grade, limit: int = 8) -> list[Grade]:
        """Candidates g with a <= g and b <= g, smallest first."""
        self._check(a, b)
        out = self._ubs_v(a.value, b.value, limit)
        return [Grade(self, v) for v in out[:limit]]

    def _ubs_v(self, a, b, limit) -> list:
        carrier = self._carrier()
        if carrier is not None:
            good = [v for v in carrier if self._leq_v(a, v) and self._leq_v(b, v)]
            return sorted(good, key=self._sort_key)
        # total-order style fallback
        if self._leq_v(a, b):
            return [b]
        if self._leq_v(b, a):
            return [a]
        s = self._add_v(a, b)
        if self._leq_v(a, s) and self._leq_v(b, s):
            return [s]
        return []

    def nonzero_grades(self, limit: int = 8) -> list[Grade]:
        """Nonzero grades in ascending order; choice points for rule search."""
        out = self._nonzero_v(limit)
        return [Grade(self, v) for v in out[:limit]]

    def _nonzero_v(self, limit) -> list:
        carrier = self._carrier()
        if carrier is None:
            raise NotImplementedError
        zero = self._zero_v()
        return sorted((v for v in carrier if v != zero), key=self._sort_key)

    def covers(self, r: Grade, limit: int = 8) -> list[Grade]:
        """Nonzero grades g with r <= g, smallest first (subsumption climbs)."""
        self._check(r)
        zero = self._zero_v()
        out = [v for v in self._nonzero_v(limit * 2) if self._leq_v(r.value, v)]
        if r.value != zero and not any(v == r.value for v in out):
            out.insert(0, r.value)
        return [Grade(self, v) for v in out[:limit]]

    def recursion_grades(self, limit: int = 4) -> list[Grade]:
        """Grades s admitting r != 0 with r + r*s <= s: candidates for
        recursion grades of self-calling functions.  Largest first."""
        carrier = self._carrier()
        if carrier is None:
            return []
        zero = self._zero_v()
        nonzero = [v for v in carrier if v != zero]
        good = []
        for s in carrier:
            for r in nonzero:
                if self._leq_v(self._add_v(r, self._mul_v(r, s)), s):
                    good.append(s)
                    break
        return [Grade(self, v) for v in sorted(good, key=self._sort_key, reverse=True)[:limit]]


# ---------------------------------------------------------------------------
# Natural-number counting
# ---------------------------------------------------------------------------


class NatLeq(GradeAlgebra):
    """Bounded counting: naturals with the usual order, sum and product."""

    name = "nat-leq"

    def _leq_v(self, a, b):
        return a <= b

    def _add_v(self, a, b):
        return a + b

    def _mul_v(self, a, b):
        return a * b

    def _zero_v(self):
        return 0

    def _one_v(self):
        return 1

    def _sort_key(self, v):
        return v

    def _sample_values(self):
        return list(range(0, 8)) + [12, 25]

    def format(self, v):
        return str(v)

    def parse_literal(self, text):
        return int(text) if text.isdigit() else None

    def _residuals_v(self, s, r, limit):
        if r > s:
            return []
        return list(range(s - r, max(-1, s - r - limit), -1))

    def _factors_v(self, goal, factor, limit):
        if factor == 0:
            return list(range(limit)) if goal == 0 else []
        lo = -(-goal // factor)
        return list(range(lo, lo + limit))

    def _ubs_v(self, a, b, limit):
        return [max(a, b)]

    def _nonzero_v(self, limit):
        return list(range(1, limit + 1))


class NatEq(NatLeq):
    """Exact counting: naturals ordered by equality, forbidding approximation."""

    name = "nat-eq"

    def _leq_v(self, a, b):
        return a == b

    def _sample_values(self):
        return list(range(0, 8)) + [12, 25]

    def _residuals_v(self, s, r, limit):
        return [s - r] if s >= r else []

    def _factors_v(self, goal, factor, limit):
        if factor == 0:
            return list(range(limit)) if goal == 0 else []
        return [goal // factor] if goal % factor == 0 else []

    def _ubs_v(self, a, b, limit):
        return [a] if a == b else []


# ---------------------------------------------------------------------------
# Linearity / affinity / trivial
# ---------------------------------------------------------------------------


def _lin_add(a, b):
    if a is INF or b is INF:
        return INF
    n = a + b
    return INF if n > 1 else n


def _lin_mul(a, b):
    if a == 0 or b == 0:
        return 0
    if a is INF or b is INF:
        return INF
    return 1


class Linearity(GradeAlgebra):
    """{0, 1, inf} with 0 <= inf and 1 <= inf; 1 is not discardable."""

    name = "linearity"

    def _leq_v(self, a, b):
        return a == b or b is INF

    def _add_v(self, a, b):
        return _lin_add(a, b)

    def _mul_v(self, a, b):
        return _lin_mul(a, b)

    def _zero_v(self):
        return 0

    def _one_v(self):
        return 1

    def _sort_key(self, v):
        return 2 if v is INF else v

    def _carrier(self):
        return [0, 1, INF]

    def format(self, v):
        return "inf" if v is INF else str(v)

    def parse_literal(self, text):
        if text in ("inf", "w", "omega"):
            return INF
        if text in ("0", "1"):
            return int(text)
        return None


class Affinity(Linearity):
    """Same operations as linearity, totally ordered 0 <= 1 <= inf."""

    name = "affinity"

    def _leq_v(self, a, b):
        return self._sort_key(a) <= self._sort_key(b)


class Trivial(GradeAlgebra):
    """The one-point grade algebra; all structure collapses to inf."""

    name = "trivial"

    def _leq_v(self, a, b):
        return True

    def _add_v(self, a, b):
        return INF

    def _mul_v(self, a, b):
        return INF

    def _zero_v(self):
        return INF

    def _one_v(self):
        return INF

    def _sort_key(self, v):
        return 0

    def _carrier(self):
        return [INF]

    def format(self, v):
        return "inf"

    def parse_literal(self, text):
        return INF


# ---------------------------------------------------------------------------
# Privacy levels: 0 <= priv <= pub, sum = join, product = meet
# ---------------------------------------------------------------------------


class Privacy(GradeAlgebra):
    """Three privacy levels; a lattice with an adjoined unused level.

    Carrier 0 < priv < pub: addition is join (least restrictive wins) and
    multiplication is meet (most restrictive wins), so pub is the
    multiplicative unit and 0 annihilates.
    """

    name = "privacy"
    _names = {0: "0", 1: "priv", 2: "pub"}

    def _leq_v(self, a, b):
        return a <= b

    def _add_v(self, a, b):
        return max(a, b)

    def _mul_v(self, a, b):
        return min(a, b)

    def _zero_v(self):
        return 0

    def _one_v(self):
        return 2

    def _sort_key(self, v):
        return v

    def _carrier(self):
        return [0, 1, 2]

    def format(self, v):
        return self._names[v]

    def parse_literal(self, text):
        for k, n in self._names.items():
            if text == n:
                return k
        if text in ("private",):
            return 1
        if text in ("public",):
            return 2
        return None


# ---------------------------------------------------------------------------
# Extended non-negative reals
# ---------------------------------------------------------------------------


class RealExt(GradeAlgebra):
    """[0, inf] with exact rational arithmetic and a symbolic infinity."""

    name = "real-ext"

    def _leq_v(self, a, b):
        if b is INF:
            return True
        if a is INF:
            return False
        return a <= b

    def _add_v(self, a, b):
        if a is INF or b is INF:
            return INF
        return a + b

    def _mul_v(self, a, b):
        if a == 0 or b == 0:
            return Fraction(0)
        if a is INF or b is INF:
            return INF
        return a * b

    def _zero_v(self):
        return Fraction(0)

    def _one_v(self):
        return Fraction(1)

    def _sort_key(self, v):
        return (1, 0) if v is INF else (0, v)

    def _sample_values(self):
        return [Fraction(0), Fraction(1, 2), Fraction(1), Fraction(3, 2),
                Fraction(2), Fraction(7, 3), Fraction(5), INF]

    def format(self, v):
        if v is INF:
            return "inf"
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"

    def parse_literal(self, text):
        if text in ("inf", "w", "omega"):
            return INF
        try:
            return Fraction(text)
        except ValueError:
            return None

    def _residuals_v(self, s, r, limit):
        if s is INF:
            return [INF, Fraction(0)]
        if r is INF or r > s:
            return []
        top = s - r
        return [top] if top == 0 else [top, Fraction(0)]

    def _factors_v(self, goal, factor, limit):
        if factor is INF:
            return [] if goal is INF else [Fraction(0)] if goal == 0 else [self._one_v()]
        if factor == 0:
            return [Fraction(0)] if goal == 0 else []
        if goal is INF:
            return [INF]
        return [goal / factor]

    def _ubs_v(self, a, b, limit):
        if a is INF or b is INF:
            return [INF]
        return [max(a, b)]

    def _nonzero_v(self, limit):
        return [Fraction(1), Fraction(2), INF][:limit]


# ---------------------------------------------------------------------------
# Combinators: ext, product, interval, r0, smash
# ---------------------------------------------------------------------------


class Ext(GradeAlgebra):
    """Adjoin an unrestricted-usage top element to an algebra.

    inf absorbs addition; multiplication by inf yields inf except that
    multiplying by the base algebra's zero stays zero.
    """

    def __init__(self, base: GradeAlgebra):
        self.base = base
        self.name = f"ext:{base.name}"

    def _leq_v(self, a, b):
        if b is INF:
            return True
        if a is INF:
            return False
        return self.base._leq_v(a, b)

    def _add_v(self, a, b):
        if a is INF or b is INF:
            return INF
        return self.base._add_v(a, b)

    def _mul_v(self, a, b):
        z = self.base._zero_v()
        if a is INF:
            return z if b == z else INF
        if b is INF:
            return z if a == z else INF
        return self.base._mul_v(a, b)

    def _zero_v(self):
        return self.base._zero_v()

    def _one_v(self):
        return self.base._one_v()

    def _sort_key(self, v):
        return (1, 0) if v is INF else (0, self.base._sort_key(v))

    def _carrier(self):
        inner = self.base._carrier()
        if inner is None:
            return None
        return inner + [INF]

    def _sample_values(self):
        if self._carrier() is not None:
            return self._carrier()
        return self.base._sample_values() + [INF]

    def format(self, v):
        return "inf" if v is INF else self.base.format(v)

    def parse_literal(self, text):
        if text in ("inf", "w", "omega"):
            return INF
        return self.base.parse_literal(text)

    def _residuals_v(self, s, r, limit):
        if s is INF:
            return [INF, self.base._zero_v()]
        if r is INF:
            return []
        return self.base._residuals_v(s, r, limit)

    def _factors_v(self, goal, factor, limit):
        z = self.base._zero_v()
        if goal is INF:
            return [] if factor == z else [INF]
        if factor is INF:
            if goal == z:
                return [z]
            return [self.base._one_v()]
        out = self.base._factors_v(goal, factor, limit)
        if len(out) < limit and factor != z:
            out = out + [INF]
        return out

    def _ubs_v(self, a, b, limit):
        if a is INF or b is INF:
            return [INF]
        out = self.base._ubs_v(a, b, limit)
        return out if out else [INF]

    def _nonzero_v(self, limit):
        # inf early: it is the distinguished unrestricted grade
        base = self.base._nonzero_v(limit - 1) if limit > 1 else []
        if not base:
            return [INF]
        return [base[0], INF] + base[1:]

    def recursion_grades(self, limit=4):
        return [Grade(self, INF)]


class Product(GradeAlgebra):
    """Componentwise product of two grade algebras."""

    def __init__(self, left: GradeAlgebra, right: GradeAlgebra):
        self.left = left
        self.right = right
        self.name = f"product:{left.name},{right.name}"

    def _leq_v(self, a, b):
        return self.left._leq_v(a[0], b[0]) and self.right._leq_v(a[1], b[1])

    def _add_v(self, a, b):
        return (self.left._add_v(a[0], b[0]), self.right._add_v(a[1], b[1]))

    def _mul_v(self, a, b):
        return (self.left._mul_v(a[0], b[0]), self.right._mul_v(a[1], b[1]))

    def _zero_v(self):
        return (self.left._zero_v(), self.right._zero_v())

    def _one_v(self):
        return (self.left._one_v(), self.right._one_v())

    def _sort_key(self, v):
        return (self.left._sort_key(v[0]), self.right._sort_key(v[1]))

    def _carrier(self):
        cl, cr = self.left._carrier(), self.right._carrier()
        if cl is None or cr is None:
            return None
        return [(a, b) for a in cl for b in cr]

    def _sample_values(self):
        sl = self.left._sample_values()[:5]
        sr = self.right._sample_values()[:5]
        return [(a, b) for a in sl for b in sr]

    def format(self, v):
        return f"({self.left.format(v[0])},{self.right.format(v[1])})"

    def parse_literal(self, text):
        if not (text.startswith("(") and text.endswith(")")):
            return None
        depth, split = 0, -1
        for i, c in enumerate(text[1:-1], start=1):
            if c == "(":
                depth += 1
            elif c == ")":
                depth -= 1
            elif c == "," and depth == 0:
                split = i
                break
        if split < 0:
            return None
        a = self.left.parse_literal(text[1:split].strip())
        b = self.right.parse_literal(text[split + 1:-1].strip())
        if a is None or b is None:
            return None
        return (a, b)

    def _residuals_v(self, s, r, limit):
        ls = self.left._residuals_v(s[0], r[0], limit)
        rs = self.right._residuals_v(s[1], r[1], limit)
        out = [(a, b) for a in ls for b in rs]
        return sorted(out, key=self._sort_key, reverse=True)[:limit]

    def _factors_v(self, goal, factor, limit):
        ls = self.left._factors_v(goal[0], factor[0], limit)
        rs = self.right._factors_v(goal[1], factor[1], limit)
        out = [(a, b) for a in ls for b in rs]
        return sorted(out, key=self._sort_key)[:limit]

    def _ubs_v(self, a, b, limit):
        ls = self.left._ubs_v(a[0], b[0], limit)
        rs = self.right._ubs_v(a[1], b[1], limit)
        return sorted([(x, y) for x in ls for y in rs], key=self._sort_key)[:limit]

    def _nonzero_v(self, limit):
        zl, zr = self.left._zero_v(), self.right._zero_v()
        carrier = self._carrier()
        if carrier is not None:
            return sorted((v for v in carrier if v != (zl, zr)), key=self._sort_key)
        out = [(a, b)
               for a in [zl] + self.left._nonzero_v(limit)
               for b in [zr] + self.right._nonzero_v(limit)]
        return sorted((v for v in out if v != (zl, zr)), key=self._sort_key)[:limit]


class Interval(GradeAlgebra):
    """Intervals (lo, hi) with lo <= hi in the base algebra.

    The order is interval containment reversed on the left endpoint:
    (r, s) <= (r', s') iff r' <= r and s <= s'; operations are pointwise.
    """

    def __init__(self, base: GradeAlgebra):
        self.base = base
        self.name = f"interval:{base.name}"

    def _leq_v(self, a, b):
        return self.base._leq_v(b[0], a[0]) and self.base._leq_v(a[1], b[1])

    def _add_v(self, a, b):
        return (self.base._add_v(a[0], b[0]), self.base._add_v(a[1], b[1]))

    def _mul_v(self, a, b):
        return (self.base._mul_v(a[0], b[0]), self.base._mul_v(a[1], b[1]))

    def _zero_v(self):
        z = self.base._zero_v()
        return (z, z)

    def _one_v(self):
        o = self.base._one_v()
        return (o, o)

    def _sort_key(self, v):
        return (self.base._sort_key(v[0]), self.base._sort_key(v[1]))

    def _carrier(self):
        inner = self.base._carrier()
        if inner is None:
            return None
        return [(a, b) for a in inner for b in inner if self.base._leq_v(a, b)]

    def _sample_values(self):
        inner = self.base._sample_values()[:6]
        return [(a, b) for a in inner for b in inner if self.base._leq_v(a, b)]

    def format(self, v):
        return f"({self.base.format(v[0])},{self.base.format(v[1])})"

    def parse_literal(self, text):
        if not (text.startswith("(") and text.endswith(")")):
            return None
        parts = text[1:-1].split(",")
        if len(parts) != 2:
            return None
        a = self.base.parse_literal(parts[0].strip())
        b = self.base.parse_literal(parts[1].strip())
        if a is None or b is None or not self.base._leq_v(a, b):
            return None
        return (a, b)

    def _residuals_v(self, s, r, limit):
        # componentwise search, keeping only well-formed intervals
        los = self.base._residuals_v(s[0], r[0], limit)
        his = self.base._residuals_v(s[1], r[1], limit)
        out = [(a, b) for a in los for b in his if self.base._leq_v(a, b)]
        good = [v for v in out if self._leq_v(self._add_v(r, v), s)]
        return sorted(good, key=self._sort_key, reverse=True)[:limit]

    def _factors_v(self, goal, factor, limit):
        los = self.base._factors_v(goal[0], factor[0], limit)
        his = self.base._factors_v(goal[1], factor[1], limit)
        out = [(a, b) for a in los for b in his if self.base._leq_v(a, b)]
        good = [v for v in out if self._leq_v(goal, self._mul_v(v, factor))]
        return sorted(good, key=self._sort_key)[:limit]

    def _ubs_v(self, a, b, limit):
        # containment join: lower lows meet, higher highs join
        los = [x for x in (a[0], b[0]) if self.base._leq_v(x, a[0]) and self.base._leq_v(x, b[0])]
        his = self.base._ubs_v(a[1], b[1], limit)
        out = [(lo, hi) for lo in los for hi in his if self.base._leq_v(lo, hi)]
        good = [v for v in out if self._leq_v(a, v) and self._leq_v(b, v)]
        return sorted(good, key=self._sort_key)[:limit]

    def _nonzero_v(self, limit):
        carrier = self._carrier()
        z = self._zero_v()
        if carrier is not None:
            return sorted((v for v in carrier if v != z), key=self._sort_key)
        base = [self.base._zero_v()] + self.base._nonzero_v(limit)
        out = [(a, b) for a in base for b in base if self.base._leq_v(a, b)]
        return sorted((v for v in out if v != z), key=self._sort_key)[:limit]


class ZeroAdjoined(GradeAlgebra):
    """The r0 construction: adjoin a fresh zero, making the result reduced
    and integral.  The base algebra's old zero stays in the carrier as an
    ordinary element."""

    def __init__(self, base: GradeAlgebra):
        self.base = base
        self.name = f"r0:{base.name}"

    def _leq_v(self, a, b):
        if a is ZERO_HAT:
            return b is ZERO_HAT or self.base._leq_v(self.base._zero_v(), b)
        if b is ZERO_HAT:
            return False
        return self.base._leq_v(a, b)

    def _add_v(self, a, b):
        if a is ZERO_HAT:
            return b
        if b is ZERO_HAT:
            return a
        return self.base._add_v(a, b)

    def _mul_v(self, a, b):
        if a is ZERO_HAT or b is ZERO_HAT:
            return ZERO_HAT
        return self.base._mul_v(a, b)

    def _zero_v(self):
        return ZERO_HAT

    def _one_v(self):
        return self.base._one_v()

    def _sort_key(self, v):
        return (0, 0) if v is ZERO_HAT else (1, self.base._sort_key(v))

    def _carrier(self):
        inner = self.base._carrier()
        if inner is None:
            return None
        return [ZERO_HAT] + inner

    def _sample_values(self):
        if self._carrier() is not None:
            return self._carrier()
        return [ZERO_HAT] + self.base._sample_values()

    def format(self, v):
        return "0" if v is ZERO_HAT else self.base.format(v)

    def parse_literal(self, text):
        if text == "0":
            return ZERO_HAT
        return self.base.parse_literal(text)

    def _residuals_v(self, s, r, limit):
        if self._carrier() is not None:
            return super()._residuals_v(s, r, limit)
        if s is ZERO_HAT:
            return [ZERO_HAT] if r is ZERO_HAT else []
        if r is ZERO_HAT:
            out = [s]
            if self.base._leq_v(self.base._zero_v(), s):
                out.append(ZERO_HAT)
            return out
        out = list(self.base._residuals_v(s, r, limit))
        if self.base._leq_v(r, s):
            out.append(ZERO_HAT)
        return out

    def _factors_v(self, goal, factor, limit):
        if self._carrier() is not None:
            return super()._factors_v(goal, factor, limit)
        if goal is ZERO_HAT:
            return [ZERO_HAT]
        if factor is ZERO_HAT:
            return []
        return self.base._factors_v(goal, factor, limit)

    def _nonzero_v(self, limit):
        if self._carrier() is not None:
            return super()._nonzero_v(limit)
        return [self.base._zero_v()] + self.base._nonzero_v(limit - 1)


class Smash(GradeAlgebra):
    """Smash product: the zero-adjoined product with spurious pairs removed.

    The carrier keeps the fresh zero plus all pairs whose components are both
    nonzero.  Requires both operands to be non-trivial, reduced and integral,
    which guarantees closure under sum and product.
    """

    def __init__(self, left: GradeAlgebra, right: GradeAlgebra):
        for side in (left, right):
            _require_smash_operand(side)
        self.left = left
        self.right = right
        self.name = f"smash:{left.name},{right.name}"

    def _leq_v(self, a, b):
        if a is ZERO_HAT:
            if b is ZERO_HAT:
                return True
            return (self.left._leq_v(self.left._zero_v(), b[0])
                    and self.right._leq_v(self.right._zero_v(), b[1]))
        if b is ZERO_HAT:
            return False
        return self.left._leq_v(a[0], b[0]) and self.right._leq_v(a[1], b[1])

    def _add_v(self, a, b):
        if a is ZERO_HAT:
            return b
        if b is ZERO_HAT:
            return a
        return (self.left._add_v(a[0], b[0]), self.right._add_v(a[1], b[1]))

    def _mul_v(self, a, b):
        if a is ZERO_HAT or b is ZERO_HAT:
            return ZERO_HAT
        return (self.left._mul_v(a[0], b[0]), self.right._mul_v(a[1], b[1]))

    def _zero_v(self):
        return ZERO_HAT

    def _one_v(self):
        return (self.left._one_v(), self.right._one_v())

    def _sort_key(self, v):
        if v is ZERO_HAT:
            return (0, 0, 0)
        return (1, self.left._sort_key(v[0]), self.right._sort_key(v[1]))

    def _carrier(self):
        cl, cr = self.left._carrier(), self.right._carrier()
        if cl is None or cr is None:
            return None
        zl, zr = self.left._zero_v(), self.right._zero_v()
        return [ZERO_HAT] + [(a, b) for a in cl for b in cr if a != zl and b != zr]

    def _sample_values(self):
        if self._carrier() is not None:
            return self._carrier()
        zl, zr = self.left._zero_v(), self.right._zero_v()
        sl = [a for a in self.left._sample_values() if a != zl][:4]
        sr = [b for b in self.right._sample_values() if b != zr][:4]
        return [ZERO_HAT] + [(a, b) for a in sl for b in sr]

    def format(self, v):
        if v is ZERO_HAT:
            return "0"
        return f"({self.left.format(v[0])},{self.right.format(v[1])})"

    def parse_literal(self, text):
        if text == "0":
            return ZERO_HAT
        if not (text.startswith("(") and text.endswith(")")):
            return None
        parts = text[1:-1].split(",")
        if len(parts) != 2:
            return None
        a = self.left.parse_literal(parts[0].strip())
        b = self.right.parse_literal(parts[1].strip())
        if a is None or b is None:
            return None
        if a == self.left._zero_v() or b == self.right._zero_v():
            return None
        return (a, b)


def _require_smash_operand(alg: GradeAlgebra):
    """Smash operands must be non-trivial, reduced and integral; checked on
    full carriers when enumerable, on the deterministic sample otherwise."""
    if alg.is_trivial():
        raise GradeError(f"smash operand {alg.name} is trivial")
    report = check_laws(alg)
    if not report.flags["reduced"]:
        raise GradeError(f"smash operand {alg.name} is not reduced: "
                         f"{report.flag_witness['reduced']}")
    if not report.flags["integral"]:
        raise GradeError(f"smash operand {alg.name} is not integral: "
                         f"{report.flag_witness['integral']}")


# ---------------------------------------------------------------------------
# Algebra expressions
# ---------------------------------------------------------------------------

_BASE = {
    "nat-leq": NatLeq,
    "nat-eq": NatEq,
    "linearity": Linearity,
    "affinity": Affinity,
    "trivial": Trivial,
    "privacy": Privacy,
    "real-ext": RealExt,
}

_UNARY = {"ext": Ext, "r0": ZeroAdjoined, "interval": Interval}
_BINARY = {"product": Product, "smash": Smash}


_CACHE: dict[str, GradeAlgebra] = {}


def build_algebra(spec: str) -> GradeAlgebra:
    """Build an algebra from an expression string.

    Grammar: ``nat-leq | nat-eq | linearity | affinity | trivial | privacy |
    real-ext | ext:<A> | product:<A>,<B> | smash:<A>,<B> | r0:<A> |
    interval:<A>``.

    Equal spec strings return the same instance, so grades parsed in separate
    places against the same spec interoperate.
    """
    key = spec.strip()
    if key not in _CACHE:
        alg, rest = _parse_alg(key, 0)
        if rest != len(key):
            raise GradeError(f"trailing characters in algebra spec {spec!r}")
        _CACHE[key] = alg
    return _CACHE[key]


def _parse_alg(s: str, i: int) -> tuple[GradeAlgebra, int]:
    j = i
    while j < len(s) and (s[j].isalnum() or s[j] in "-_"):
        j += 1
    name = s[i:j]
    if name in _UNARY:
        if j >= len(s) or s[j] != ":":
            raise GradeError(f"{name} needs an argument, e.g. {name}:linearity")
        inner, j = _parse_alg(s, j + 1)
        return _UNARY[name](inner), j
    if name in _BINARY:
        if j >= len(s) or s[j] != ":":
            raise GradeError(f"{name} needs two arguments")
        a, j = _parse_alg(s, j + 1)
        if j >= len(s) or s[j] != ",":
            raise GradeError(f"{name} needs two comma-separated arguments")
        b, j = _parse_alg(s, j + 1)
        return _BINARY[name](a, b), j
    if name in _BASE:
        return _BASE[name](), j
    raise GradeError(f"unknown algebra {name!r}")


# ---------------------------------------------------------------------------
# Law checking
# ---------------------------------------------------------------------------


@dataclass
class LawReport:
    """Pass/fail per axiom with a counterexample witness on each failure,
    plus the derived classification flags."""

    algebra: str
    axioms: dict[str, bool]
    witnesses: dict[str, str]
    flags: dict[str, bool]
    flag_witness: dict[str, str]
    exhaustive: bool
    sample_size: int

    @property
    def ok(self) -> bool:
        return all(self.axioms.values())

    def to_json(self) -> dict:
        out = {}
        for axiom, passed in self.axioms.items():
            entry: dict[str, Any] = {"pass": passed}
            if not passed:
                entry["witness"] = self.witnesses[axiom]
            out[axiom] = entry
        return {
            "algebra": self.algebra,
            "exhaustive": self.exhaustive,
            "sample_size": self.sample_size,
            "axioms": out,
            "flags": self.flags,
        }


def _triples(values: list, exhaustive: bool, n_random: int) -> Iterator[tuple]:
    if exhaustive:
        yield from itertools.product(values, repeat=3)
    else:
        # deterministic pseudo-random triples over the sample
        import random

        rng = random.Random(0xC0FFEE)
        for _ in range(n_random):
            yield (rng.choice(values), rng.choice(values), rng.choice(values))


def check_laws(alg: GradeAlgebra, samples: Optional[list[Grade]] = None,
               n_random: int = 1000) -> LawReport:
    """Verify the ordered-semiring and grade-algebra axioms on samples.

    Uses the full carrier when the algebra is finite (exhaustive), otherwise
    the provided samples or the algebra's deterministic sample, drawing
    ``n_random`` triples for the three-variable laws.
    """
    carrier = alg.enumerate()
    exhaustive = carrier is not None and samples is None
    values = carrier if exhaustive else (samples or alg.sample())
    zero, one = alg.zero, alg.one

    axioms: dict[str, bool] = {}
    witnesses: dict[str, str] = {}

    def record(name: str, ok: bool, witness: str):
        if name not in axioms:
            axioms[name] = True
            witnesses[name] = ""
        if axioms[name] and not ok:
            axioms[name] = False
            witnesses[name] = witness

    for a in values:
        record("order-reflexive", alg.leq(a, a), f"{a} not <= {a}")
        record("add-zero-neutral", a + zero == a, f"{a}+0 = {a + zero}")
        record("mul-one-neutral-left", one * a == a, f"1*{a} = {one * a}")
        record("mul-one-neutral-right", a * one == a, f"{a}*1 = {a * one}")
        record("mul-zero-annihilates",
               a * zero == zero and zero * a == zero,
               f"{a}*0 = {a * zero}, 0*{a} = {zero * a}")
        record("grade-algebra-zero", (not alg.leq(a, zero)) or a == zero,
               f"{a} <= 0 but {a} != 0")

    for a, b in itertools.product(values, repeat=2) if exhaustive else (
            (x, y) for x, y, _ in _triples(values, False, n_random)):
        record("order-antisymmetric",
               not (alg.leq(a, b) and alg.leq(b, a)) or a == b,
               f"{a} <= {b} <= {a} but distinct")
        record("add-commutative", a + b == b + a,
               f"{a}+{b} = {a + b} but {b}+{a} = {b + a}")

    for a, b, c in _triples(values, exhaustive, n_random):
        record("order-transitive",
               not (alg.leq(a, b) and alg.leq(b, c)) or alg.leq(a, c),
               f"{a} <= {b} <= {c} but not {a} <= {c}")
        record("add-associative", (a + b) + c == a + (b + c),
               f"({a}+{b})+{c} != {a}+({b}+{c})")
        record("mul-associative", (a * b) * c == a * (b * c),
               f"({a}*{b})*{c} != {a}*({b}*{c})")
        record("distributes-left", a * (b + c) == a * b + a * c,
               f"{a}*({b}+{c}) != {a}*{b}+{a}*{c}")
        record("distributes-right", (b + c) * a == b * a + c * a,
               f"({b}+{c})*{a} != {b}*{a}+{c}*{a}")
        if alg.leq(a, b):
            record("add-monotone", alg.leq(a + c, b + c),
                   f"{a} <= {b} but not {a}+{c} <= {b}+{c}")
            record("mul-monotone",
                   alg.leq(a * c, b * c) and alg.leq(c * a, c * b),
                   f"{a} <= {b} but products not ordered with {c}")

    flags: dict[str, bool] = {}
    flag_witness: dict[str, str] = {}
    flags["affine"] = all(alg.is_discardable(a) for a in values)
    flag_witness["affine"] = next(
        (f"{a} not discardable" for a in values if not alg.is_discardable(a)), "")
    flags["trivial"] = alg.is_trivial()
    flag_witness["trivial"] = ""

    integral, int_wit = True, ""
    reduced, red_wit = True, ""
    for a, b in itertools.product(values, repeat=2):
        if integral and a * b == zero and a != zero and b != zero:
            integral, int_wit = False, f"{a}*{b} = 0 with nonzero factors"
        if reduced and a + b == zero and not (a == zero and b == zero):
            reduced, red_wit = False, f"{a}+{b} = 0 with a nonzero addend"
    flags["integral"], flag_witness["integral"] = integral, int_wit
    flags["reduced"], flag_witness["reduced"] = reduced, red_wit

    return LawReport(algebra=alg.name, axioms=axioms, witnesses=witnesses,
                     flags=flags, flag_witness=flag_witness,
                     exhaustive=exhaustive, sample_size=len(values))
