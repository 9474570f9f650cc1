import pytest

from grlc.algebra import build_algebra
from grlc.elaborate import elaborate
from grlc.envtyping import (WasteFailure, check_annotated, check_config,
                            check_env)
from grlc.eval_exhaust import Environment
from grlc.parser import parse_expr, parse_gtype, parse_program
from grlc.syntax import (AnnotatedValue, FunT, GType, Ret, SumT, TensorT,
                         UnitT, VFun, VPair, VUnit, VVar, WithT)
from grlc.contexts import GradeContext
from grlc.typing import CheckFailure, TGC, check_expr, check_value

NAT = build_algebra("nat-leq")
EXT = build_algebra("ext:nat-leq")
EXTEQ = build_algebra("ext:nat-eq")
LIN = build_algebra("linearity")
PRIV = build_algebra("privacy")


def tgc(alg, **kw):
    return TGC.of(alg, {k: (alg.parse(str(g)), t) for k, (g, t) in kw.items()})


def fine(src, alg, **kw):
    return elaborate(parse_expr(src, alg, **kw))


# ---------------------------------------------------------------------------
# check_value basics
# ---------------------------------------------------------------------------

def test_var_rule():
    ctx = tgc(NAT, x=(1, UnitT()))
    d = check_value(ctx, VVar("x"), GType(UnitT(), NAT.one))
    assert d.rule == "t-var"
    assert d.replay()


def test_var_wrong_grade():
    ctx = tgc(NAT, x=(1, UnitT()))
    with pytest.raises(CheckFailure) as e:
        check_value(ctx, VVar("x"), GType(UnitT(), NAT.parse("2")))
    assert e.value.kind == "grade-unsatisfiable"


def test_unit_types_anywhere_discardable():
    ctx = tgc(NAT, x=(3, UnitT()))
    d = check_value(ctx, VUnit(), GType(UnitT(), NAT.parse("7")))
    assert d.replay()


def test_unit_not_under_linear_context():
    ctx = tgc(LIN, x=(1, UnitT()))
    with pytest.raises(CheckFailure):
        check_value(ctx, VUnit(), GType(UnitT(), LIN.one))


def test_pair_annotations_must_match_type():
    v = VPair(NAT.parse("2"), VUnit(), VUnit(), NAT.parse("3"))
    ty = TensorT(GType(UnitT(), NAT.parse("2")), GType(UnitT(), NAT.parse("3")))
    d = check_value(TGC.of(NAT), v, GType(ty, NAT.one))
    assert d.rule == "t-pair" and d.replay()
    bad = TensorT(GType(UnitT(), NAT.one), GType(UnitT(), NAT.parse("3")))
    with pytest.raises(CheckFailure):
        check_value(TGC.of(NAT), v, GType(bad, NAT.one))


# ---------------------------------------------------------------------------
# double / mult: counting parameter usage (section-5 functions)
# ---------------------------------------------------------------------------

ADD_SIG = "Nat ->_{inf} Nat -> Nat"

NAT_DECL = "Nat = zero + succ:Nat\n"


def _types(alg, extra=""):
    prog = parse_program(NAT_DECL + extra + "\nmain = unit\n", alg)
    return prog


def _double_fun(alg):
    prog = _types(alg)
    body = parse_expr("\\n. add n n", alg, types=prog.types, tags=prog.tags)
    return elaborate(body).value, prog.types["Nat"]


def test_double_param_graded_two_derivable():
    fun, nat_t = _double_fun(EXT)
    add_t = parse_gtype(ADD_SIG, EXT, types={"Nat": nat_t}).ty
    # a recursively-graded function is demanded at 1 + 1*inf = inf per use
    ctx = TGC.of(EXT, {"add": (EXT.parse("inf"), add_t)})
    target = FunT(GType(nat_t, EXT.parse("2")), EXT.zero, GType(nat_t, EXT.one))
    d = check_value(ctx, fun, GType(target, EXT.one))
    assert d.replay()


def test_double_param_graded_one_fails():
    fun, nat_t = _double_fun(EXT)
    add_t = parse_gtype(ADD_SIG, EXT, types={"Nat": nat_t}).ty
    ctx = TGC.of(EXT, {"add": (EXT.parse("inf"), add_t)})
    target = FunT(GType(nat_t, EXT.one), EXT.zero, GType(nat_t, EXT.one))
    with pytest.raises(CheckFailure):
        check_value(ctx, fun, GType(target, EXT.one))


# ---------------------------------------------------------------------------
# recursion grades: div (Ex 4.2)
# ---------------------------------------------------------------------------

DIV = "rec f.\\x. y; f x"


def _check_div(alg, rec_grade, cod_grade, y_grade="inf"):
    fun = elaborate(parse_expr(DIV, alg)).value
    ctx = TGC.of(alg, {"y": (alg.parse(y_grade), UnitT())})
    target = FunT(GType(UnitT(), alg.one), rec_grade, GType(UnitT(), cod_grade))
    return check_value(ctx, fun, GType(target, alg.one))


def test_div_no_recursion_grade_solves_nat():
    # under bounded counting no s satisfies (r + r*s) <= s with r nonzero
    for s in ("0", "1", "3", "7"):
        with pytest.raises(CheckFailure) as e:
            _check_div(NAT, NAT.parse(s), NAT.one, y_grade="5")
        assert e.value.kind == "grade-unsatisfiable"


def test_div_typable_with_infinite_recursion_grade():
    d = _check_div(EXT, EXT.parse("inf"), EXT.one)
    assert d.replay()


def test_div_unannotated_recursion_grade_is_searched():
    fun = elaborate(parse_expr(DIV, EXT)).value
    ctx = TGC.of(EXT, {"y": (EXT.parse("inf"), UnitT())})
    target = FunT(GType(UnitT(), EXT.one), None, GType(UnitT(), EXT.one))
    d = check_value(ctx, fun, GType(target, EXT.one))
    assert d.replay()
    with pytest.raises(CheckFailure):
        fun_nat = elaborate(parse_expr(DIV, NAT)).value
        ctx_nat = TGC.of(NAT, {"y": (NAT.parse("9"), UnitT())})
        target_nat = FunT(GType(UnitT(), NAT.one), None, GType(UnitT(), NAT.one))
        check_value(ctx_nat, fun_nat, GType(target_nat, NAT.one))


def test_div_privacy_private_recursion_forbids_public_result():
    priv, pub = PRIV.parse("priv"), PRIV.parse("pub")
    d = _check_div(PRIV, priv, priv, y_grade="pub")
    assert d.replay()
    with pytest.raises(CheckFailure):
        _check_div(PRIV, priv, pub, y_grade="pub")
    # with a public recursion grade the public result is fine
    d2 = _check_div(PRIV, pub, pub, y_grade="pub")
    assert d2.replay()


# ---------------------------------------------------------------------------
# length under exact counting (section 5)
# ---------------------------------------------------------------------------

LIST_DECLS = """
Nat = zero + succ:Nat
NatList = empty + cons:(Nat * NatList)
"""

LENGTH = ("rec len.\\ls. match ls with empty -> zero "
          "or cons ls1 -> match ls1 with <_, tl> -> succ (len tl)")


def _length_check(alg, param_grade):
    prog = parse_program(LIST_DECLS + "main = unit\n", alg)
    fun = elaborate(parse_expr(LENGTH, alg, types=prog.types, tags=prog.tags)).value
    nat_t, list_t = prog.types["Nat"], prog.types["NatList"]
    target = FunT(GType(list_t, alg.parse(param_grade)), alg.parse("inf"),
                  GType(nat_t, alg.one))
    return check_value(TGC.of(alg), fun, GType(target, alg.one))


def test_length_typable_under_bounded_counting():
    assert _length_check(EXT, "1").replay()


def test_length_fails_under_exact_counting():
    with pytest.raises(CheckFailure):
        _length_check(EXTEQ, "1")


def test_length_exact_counting_needs_unrestricted_list():
    assert _length_check(EXTEQ, "inf").replay()


# ---------------------------------------------------------------------------
# additive product (Fig 11)
# ---------------------------------------------------------------------------

def test_projection_discards_other_component_exact_counting():
    # with the tensor product this is untypable under exact counting; the
    # additive product types because only one component is extracted
    alg = build_algebra("nat-eq")
    pair_t = WithT(GType(UnitT(), alg.one), GType(UnitT(), alg.one))
    ctx = TGC.of(alg, {"p": (alg.one, pair_t)})
    d = check_expr(ctx, fine("fst p", alg), GType(UnitT(), alg.one))
    assert d.rule == "t-proj" and d.replay()


def test_tensor_match_cannot_discard_under_exact_counting():
    alg = build_algebra("nat-eq")
    pair_t = TensorT(GType(UnitT(), alg.one), GType(UnitT(), alg.one))
    ctx = TGC.of(alg, {"p": (alg.one, pair_t)})
    with pytest.raises(CheckFailure):
        check_expr(ctx, fine("match p with <a, b> -> return a", alg),
                   GType(UnitT(), alg.one))


def test_apair_needs_joint_context():
    # nat-eq: components using x once and twice have no common context
    alg = build_algebra("nat-eq")
    ctx = TGC.of(alg, {"x": (alg.parse("3"), UnitT())})
    ty = WithT(GType(TensorT(GType(UnitT(), alg.one), GType(UnitT(), alg.one)),
                     alg.one),
               GType(UnitT(), alg.one))
    v = elaborate(parse_expr("<<x, x> | x>", alg)).value
    with pytest.raises(CheckFailure):
        check_value(ctx, v, GType(ty, alg.one))
    lin_ish = build_algebra("nat-leq")
    ctx2 = TGC.of(lin_ish, {"x": (lin_ish.parse("2"), UnitT())})
    ty2 = WithT(GType(TensorT(GType(UnitT(), lin_ish.one),
                              GType(UnitT(), lin_ish.one)), lin_ish.one),
                GType(UnitT(), lin_ish.one))
    v2 = elaborate(parse_expr("<<x, x> | x>", lin_ish)).value
    d = check_value(ctx2, v2, GType(ty2, lin_ish.one))
    assert d.replay()


# ---------------------------------------------------------------------------
# environments and configurations (Fig 9, Remark 4.3)
# ---------------------------------------------------------------------------

def test_check_env_unit_entry():
    env = Environment.of(NAT, [("x", NAT.one, VUnit())])
    et = check_env(env)
    assert et.residual.grade("x") == NAT.one
    assert et.residual.type_of("x") == UnitT()


def test_check_env_closure_consumes_dependency():
    lam = VFun("f", "z", Ret(VVar("x")))
    # the parameter is unused, so under linearity its grade must be zero
    fun_t = FunT(GType(UnitT(), LIN.zero), LIN.zero, GType(UnitT(), LIN.one))
    env = Environment.of(LIN, [("x", LIN.one, VUnit()),
                               ("y", LIN.one, lam)])
    et = check_env(env, types={"y": fun_t})
    # x's availability is claimed by y's closure: residual only offers y
    assert et.residual.grade("y") == LIN.one
    assert et.residual.grade("x") == LIN.zero


def test_config_strict_rejects_wasted_linear_resource():
    env = Environment.of(LIN, [("x", LIN.parse("inf"), VUnit()),
                               ("y", LIN.one, VUnit())])
    with pytest.raises(WasteFailure):
        check_config(fine("return x", LIN), env, GType(UnitT(), LIN.one),
                     mode="strict")


def test_config_permissive_allows_waste():
    env = Environment.of(LIN, [("x", LIN.parse("inf"), VUnit()),
                               ("y", LIN.one, VUnit())])
    ct = check_config(fine("return x", LIN), env, GType(UnitT(), LIN.one),
                      mode="permissive")
    assert ct.mode == "permissive"


def test_config_strict_accepts_exact_consumption():
    env = Environment.of(LIN, [("x", LIN.one, VUnit()),
                               ("y", LIN.one, VUnit())])
    ct = check_config(fine("x; return y", LIN), env, GType(UnitT(), LIN.one),
                      mode="strict")
    assert ct.derivation.replay()


# ---------------------------------------------------------------------------
# annotated values (Fig 16 t-val)
# ---------------------------------------------------------------------------

def test_annotated_unit_with_empty_uses():
    av = AnnotatedValue(GradeContext.of(LIN), VUnit())
    ctx = TGC.of(LIN, {"w": (LIN.parse("inf"), UnitT())})
    d = check_annotated(ctx, av, GType(UnitT(), LIN.one))
    assert d.rule == "t-val" and d.replay()


def test_annotated_closure_uses_covered():
    lam = VFun("f", "z", Ret(VPair(LIN.one, VVar("y"), VVar("w"), LIN.one)))
    uses = GradeContext.of(LIN, {"y": LIN.one, "w": LIN.one})
    av = AnnotatedValue(uses, lam)
    pair_t = TensorT(GType(UnitT(), LIN.one), GType(UnitT(), LIN.one))
    fun_t = FunT(GType(UnitT(), LIN.zero), LIN.zero, GType(pair_t, LIN.one))
    ctx = TGC.of(LIN, {"y": (LIN.one, UnitT()), "w": (LIN.one, UnitT())})
    d = check_annotated(ctx, av, GType(fun_t, LIN.one))
    assert d.replay()


def test_annotated_overclaim_fails():
    av = AnnotatedValue(GradeContext.of(LIN, {"y": LIN.one}), VUnit())
    ctx = TGC.of(LIN, {"y": (LIN.one, UnitT())})
    with pytest.raises(CheckFailure):
        check_annotated(ctx, av, GType(UnitT(), LIN.one))


# ---------------------------------------------------------------------------
# promotion / demotion properties on found derivations
# ---------------------------------------------------------------------------

def _sample_checks(alg):
    """(ctx, value, gty) triples that typecheck, for property sweeps."""
    u = UnitT()
    pair_t = TensorT(GType(u, alg.one), GType(u, alg.one))
    lam = VFun("f", "z", Ret(VVar("x")))
    fun_t = FunT(GType(u, alg.zero), alg.zero, GType(u, alg.one))
    double_use = {"nat-leq": "2", "ext:nat-leq": "2", "privacy": "pub",
                  "linearity": "inf"}[alg.name]
    return [
        (TGC.of(alg, {"x": (alg.one, u)}), VVar("x"), GType(u, alg.one)),
        (TGC.of(alg), VUnit(), GType(u, alg.one)),
        (TGC.of(alg, {"x": (alg.one, u)}), lam, GType(fun_t, alg.one)),
        (TGC.of(alg, {"x": (alg.parse(double_use), u)}),
         VPair(alg.one, VVar("x"), VVar("x"), alg.one),
         GType(pair_t, alg.one)),
    ]


def test_promotion_on_value_derivations():
    from grlc.typing import tgc_scale
    for alg in (NAT, EXT, PRIV):
        grades = [alg.one] + alg.nonzero_grades(3)
        for ctx, v, gty in _sample_checks(alg):
            check_value(ctx, v, gty)
            for s in grades:
                scaled_ctx = tgc_scale(s, ctx)
                # promotion may need the scaled context verbatim
                d2 = check_value(scaled_ctx, v,
                                 GType(gty.ty, alg.mul(s, gty.grade)))
                assert d2.replay()


def test_demotion_on_value_derivations():
    # if v checks at grade s*r, some context supports it at grade r
    for alg in (NAT, PRIV):
        for ctx, v, gty in _sample_checks(alg):
            for s in alg.nonzero_grades(2):
                big = GType(gty.ty, alg.mul(s, gty.grade))
                try:
                    check_value(TGC.of(alg, {x: (alg.mul(s, g), t)
                                             for x, g, t in ctx.entries}),
                                v, big)
                except CheckFailure:
                    continue
                d = check_value(ctx, v, gty)
                assert d.replay()


def test_fv_lemma_nondiscardable_demand_occurs_free():
    from grlc.syntax import free_vars
    for alg in (LIN, NAT):
        env_ctx = TGC.of(alg, {"a": (alg.one, UnitT()),
                               "b": (alg.parse("inf") if alg is LIN else alg.parse("3"),
                                     UnitT())})
        e = fine("a; return b", alg)
        d = check_expr(env_ctx, e, GType(UnitT(), alg.one))
        fvs = free_vars(e)
        for x, g, _ in d.demand.entries:
            if not alg.is_discardable(g):
                assert x in fvs
