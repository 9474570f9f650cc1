import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grlc.algebra import (GradeAlgebra, GradeError, build_algebra, check_laws)

ROSTER = [
    "nat-leq", "nat-eq", "linearity", "affinity", "trivial", "privacy",
    "real-ext", "ext:nat-leq", "interval:nat-leq", "interval:linearity",
    "product:linearity,linearity", "smash:linearity,privacy",
    "r0:product:linearity,linearity", "ext:privacy",
]


def alg(spec):
    return build_algebra(spec)


def g(spec, lit):
    a = alg(spec)
    return a.parse(str(lit))


# ---------------------------------------------------------------------------
# leq / add / mul on the paper's instances
# ---------------------------------------------------------------------------

def test_linearity_order():
    a = alg("linearity")
    assert a.leq(g("linearity", 1), g("linearity", "inf"))
    assert a.leq(g("linearity", 0), g("linearity", "inf"))
    assert not a.leq(g("linearity", 0), g("linearity", 1))
    for x in a.enumerate():
        assert a.leq(x, x)


def test_linearity_add_collapses_above_one():
    a = alg("linearity")
    one = a.one
    assert a.add(one, one) == g("linearity", "inf")


def test_bounded_counting_arith():
    a = alg("nat-leq")
    assert a.add(g("nat-leq", 2), g("nat-leq", 3)) == g("nat-leq", 5)
    assert a.mul(g("nat-leq", 2), g("nat-leq", 3)) == g("nat-leq", 6)


def test_privacy_join_meet():
    a = alg("privacy")
    priv, pub = g("privacy", "priv"), g("privacy", "pub")
    assert a.add(priv, pub) == pub
    assert a.mul(priv, pub) == priv
    assert a.mul(a.zero, priv) == a.zero
    assert a.one == pub


def test_mul_zero_annihilates_everywhere():
    for spec in ROSTER:
        a = alg(spec)
        vals = a.enumerate() or a.sample()
        for x in vals:
            assert a.mul(a.zero, x) == a.zero
            assert a.mul(x, a.zero) == a.zero


def test_cross_algebra_mixing_is_an_error():
    a, b = alg("linearity"), alg("affinity")
    with pytest.raises(GradeError):
        a.add(a.one, b.one)
    with pytest.raises(GradeError):
        a.leq(b.zero, a.one)


# ---------------------------------------------------------------------------
# discardability
# ---------------------------------------------------------------------------

def test_discardable():
    assert not alg("linearity").is_discardable(g("linearity", 1))
    assert alg("affinity").is_discardable(g("affinity", 1))
    for spec in ROSTER:
        a = alg(spec)
        assert a.is_discardable(a.zero)


def test_discardable_two_sided_ideal():
    for spec in ROSTER:
        a = alg(spec)
        vals = a.enumerate() or a.sample()
        disc = [x for x in vals if a.is_discardable(x)]
        for x, y in itertools.product(disc, disc):
            assert a.is_discardable(a.add(x, y))
        for x in disc:
            for s in vals:
                assert a.is_discardable(a.mul(x, s))
                assert a.is_discardable(a.mul(s, x))


# ---------------------------------------------------------------------------
# residuals / factor_candidates
# ---------------------------------------------------------------------------

def test_residuals_bounded_counting():
    a = alg("nat-leq")
    out = a.residuals(g("nat-leq", 3), g("nat-leq", 1), 10)
    assert out == [g("nat-leq", v) for v in (2, 1, 0)]


def test_residuals_linearity():
    a = alg("linearity")
    assert a.residuals(a.one, a.one, 10) == [a.zero]


def test_residuals_zero_keeps_everything():
    for spec in ROSTER:
        a = alg(spec)
        vals = (a.enumerate() or a.sample())[:6]
        for s in vals:
            assert s in a.residuals(s, a.zero, 32)


def test_residuals_postcondition():
    for spec in ROSTER:
        a = alg(spec)
        vals = (a.enumerate() or a.sample())[:6]
        for s, r in itertools.product(vals, vals):
            for w in a.residuals(s, r, 8):
                assert a.leq(a.add(r, w), s)


def test_factor_candidates():
    a = alg("nat-leq")
    assert g("nat-leq", 1) in a.factor_candidates(g("nat-leq", 2), g("nat-leq", 2), 10)
    lin = alg("linearity")
    inf = g("linearity", "inf")
    assert inf in lin.factor_candidates(inf, lin.one, 10)
    for spec in ROSTER:
        x = alg(spec)
        f = (x.enumerate() or x.sample())[0]
        assert x.zero in x.factor_candidates(x.zero, f, 4)


def test_factor_postcondition():
    for spec in ROSTER:
        a = alg(spec)
        vals = (a.enumerate() or a.sample())[:6]
        for goal, factor in itertools.product(vals, vals):
            for w in a.factor_candidates(goal, factor, 8):
                assert a.leq(goal, a.mul(w, factor))


# ---------------------------------------------------------------------------
# build_algebra
# ---------------------------------------------------------------------------

def test_build_linearity_has_three_elements():
    assert len(alg("linearity").enumerate()) == 3


def test_build_smash_has_five_grades():
    assert len(alg("smash:linearity,privacy").enumerate()) == 5


def test_smash_order_matches_privacy_linearity_diagram():
    a = alg("smash:linearity,privacy")
    zero = a.zero
    op = a.parse("(1,priv)")
    ob = a.parse("(1,pub)")
    wp = a.parse("(inf,priv)")
    wb = a.parse("(inf,pub)")
    assert a.one == ob
    assert a.leq(zero, wp) and a.leq(zero, wb)
    assert not a.leq(zero, op) and not a.leq(zero, ob)
    assert a.leq(op, ob) and a.leq(op, wp) and a.leq(ob, wb) and a.leq(wp, wb)
    assert not a.leq(ob, wp) and not a.leq(wp, ob)


def test_build_r0_product_is_reduced_and_integral():
    report = check_laws(alg("r0:product:linearity,linearity"))
    assert report.ok
    assert report.flags["integral"] and report.flags["reduced"]


def test_build_rejects_bad_specs():
    with pytest.raises(GradeError):
        build_algebra("nonsense")
    with pytest.raises(GradeError):
        build_algebra("smash:trivial,linearity")
    with pytest.raises(GradeError):
        build_algebra("smash:product:linearity,linearity,privacy")


def test_nested_spec_parsing():
    a = build_algebra("product:r0:linearity,affinity")
    assert a.name == "product:r0:linearity,affinity"


def test_unknown_literal():
    with pytest.raises(GradeError):
        alg("nat-leq").parse("inf")


# ---------------------------------------------------------------------------
# check_laws
# ---------------------------------------------------------------------------

def test_laws_pass_on_roster():
    for spec in ROSTER:
        report = check_laws(alg(spec))
        assert report.ok, f"{spec}: {[k for k, v in report.axioms.items() if not v]}"


def test_bounded_counting_flags():
    report = check_laws(alg("nat-leq"))
    assert report.flags == {"affine": True, "trivial": False,
                            "integral": True, "reduced": True}


def test_product_not_integral_with_witness():
    report = check_laws(alg("product:linearity,linearity"))
    assert report.ok
    assert not report.flags["integral"]
    assert "0" in report.flag_witness["integral"]


def test_smash_reduced_and_integral():
    report = check_laws(alg("smash:linearity,linearity"))
    assert report.flags["integral"] and report.flags["reduced"]


def test_trivial_iff_one_below_zero():
    for spec in ROSTER:
        a = alg(spec)
        assert a.is_trivial() == a.leq(a.one, a.zero)
    assert alg("trivial").is_trivial()


class _BrokenMul(GradeAlgebra):
    """Negative control: multiplication is not monotone."""

    name = "broken"

    def _leq_v(self, a, b):
        return a <= b

    def _add_v(self, a, b):
        return min(a + b, 3)

    def _mul_v(self, a, b):
        # deliberately wrong: swaps order for one pair
        if (a, b) == (2, 2):
            return 0
        return min(a * b, 3)

    def _zero_v(self):
        return 0

    def _one_v(self):
        return 1

    def _sort_key(self, v):
        return v

    def _carrier(self):
        return [0, 1, 2, 3]

    def parse_literal(self, text):
        return int(text) if text.isdigit() else None


def test_broken_algebra_reports_monotonicity_failure():
    report = check_laws(_BrokenMul())
    assert not report.ok
    assert not report.axioms["mul-monotone"]
    assert report.witnesses["mul-monotone"]


# ---------------------------------------------------------------------------
# monoid/distributivity property sweep (random triples, seeded by hypothesis)
# ---------------------------------------------------------------------------

@st.composite
def _algebra_and_triple(draw):
    spec = draw(st.sampled_from(ROSTER))
    a = alg(spec)
    vals = a.enumerate() or a.sample()
    x = draw(st.sampled_from(vals))
    y = draw(st.sampled_from(vals))
    z = draw(st.sampled_from(vals))
    return a, x, y, z


@settings(max_examples=300, deadline=None)
@given(_algebra_and_triple())
def test_semiring_properties(data):
    a, x, y, z = data
    assert a.add(x, a.add(y, z)) == a.add(a.add(x, y), z)
    assert a.add(x, y) == a.add(y, x)
    assert a.mul(x, a.add(y, z)) == a.add(a.mul(x, y), a.mul(x, z))
    assert a.mul(a.add(y, z), x) == a.add(a.mul(y, x), a.mul(z, x))
    assert a.mul(x, a.zero) == a.zero
    if a.leq(x, y):
        assert a.leq(a.add(x, z), a.add(y, z))
        assert a.leq(a.mul(x, z), a.mul(y, z))
