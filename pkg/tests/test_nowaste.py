import pytest

from grlc.algebra import build_algebra
from grlc.contexts import GradeContext, ctx_add, ctx_leq, ctx_scale, vec_mat_mul
from grlc.elaborate import elaborate
from grlc.eval_exhaust import eval_expr, eval_value
from grlc.eval_nowaste import nw_eval, nw_eval_value, split_env
from grlc.nowaste import (AnnotatedEnvironment, EnvironmentError_, annotate_env,
                          env_closure, erase, graph_of_env, no_waste,
                          nw_config, reachable)
from grlc.parser import parse_expr
from grlc.syntax import (AnnotatedValue, Ret, VFun, VPair, VUnit, VVar,
                         free_vars, honest, pretty_value)

LIN = build_algebra("linearity")
NAT = build_algebra("nat-leq")
NATEQ = build_algebra("nat-eq")
EXT = build_algebra("ext:nat-leq")


def ctx(alg, **kw):
    return GradeContext.of(alg, {k: alg.parse(str(v)) for k, v in kw.items()})


def av(alg, value, **uses):
    return AnnotatedValue(ctx(alg, **uses), value)


def aenv(alg, *items):
    return AnnotatedEnvironment.of(
        alg, [(n, alg.parse(str(g)), v) for n, g, v in items])


def pair_lam(alg):
    # \_. <y, z> with direct usage {y:1, z:1}
    return VFun("f", "w", Ret(VPair(alg.one, VVar("y"), VVar("z"), alg.one)))


# ---------------------------------------------------------------------------
# graphs from environments, no_waste
# ---------------------------------------------------------------------------

def test_graph_of_env_edges():
    env = aenv(LIN,
               ("x", 1, av(LIN, pair_lam(LIN), y=1, z=1)),
               ("y", 1, av(LIN, VUnit())),
               ("z", 1, av(LIN, VUnit())))
    g = graph_of_env(env)
    assert g.get("x", "y") == LIN.one
    assert g.get("x", "z") == LIN.one
    assert g.get("y", "x") == LIN.zero
    assert graph_of_env(aenv(LIN)).edges == ()


def test_no_waste_transitive_example():
    env = aenv(LIN,
               ("x", 1, av(LIN, pair_lam(LIN), y=1, z=1)),
               ("y", 1, av(LIN, VUnit())),
               ("z", 1, av(LIN, VUnit())))
    assert no_waste(ctx(LIN, x=1), env)


def test_no_waste_linear_leftover_fails():
    env = aenv(LIN, ("x", 1, av(LIN, VUnit())), ("y", 1, av(LIN, VUnit())))
    assert not no_waste(ctx(LIN, x=1), env)


def test_no_waste_discardable_leftover_ok():
    env = aenv(LIN, ("x", 1, av(LIN, VUnit())), ("y", "inf", av(LIN, VUnit())))
    assert no_waste(ctx(LIN, x=1), env)


def test_environment_validation():
    with pytest.raises(EnvironmentError_):
        aenv(LIN, ("x", 1, av(LIN, VVar("nope") and pair_lam(LIN), y=1, z=1)))
    # dishonest annotation
    with pytest.raises(EnvironmentError_):
        aenv(LIN, ("x", 1, av(LIN, VUnit(), x=1)),)
    # cyclic dependency graph
    lamx = VFun("f", "w", Ret(VVar("x")))
    lamy = VFun("f", "w", Ret(VVar("y")))
    with pytest.raises(EnvironmentError_):
        aenv(LIN, ("x", 1, av(LIN, lamy, y=1)), ("y", 1, av(LIN, lamx, x=1)))


# ---------------------------------------------------------------------------
# reachable / erase
# ---------------------------------------------------------------------------

def test_reachable():
    env = aenv(LIN,
               ("x", 1, av(LIN, pair_lam(LIN), y=1, z=1)),
               ("y", 1, av(LIN, VUnit())),
               ("z", 1, av(LIN, VUnit())))
    assert reachable(env, {"x"}) == {"x", "y", "z"}
    assert reachable(env, set()) == set()
    assert reachable(env, {"y"}) == {"y"}


def test_erase():
    lam = pair_lam(LIN)
    assert erase(av(LIN, lam, y=1, z=1)) == lam
    env = aenv(LIN, ("x", 1, av(LIN, VUnit())))
    plain = erase(env)
    assert plain.entries == (("x", LIN.one, VUnit()),)


# ---------------------------------------------------------------------------
# nw_eval_value: section 6.3 stuck/converging variable lookups
# ---------------------------------------------------------------------------

def test_nw_var_waste_stuck_linear():
    env = aenv(LIN, ("x", 1, av(LIN, VUnit())), ("y", 1, av(LIN, VUnit())))
    out = nw_eval_value(VVar("x"), env, LIN.one)
    assert out.kind == "stuck" and out.reason == "waste"


def test_nw_var_converges_with_discardable_other():
    env = aenv(LIN, ("x", 1, av(LIN, VUnit())), ("y", "inf", av(LIN, VUnit())))
    out = nw_eval_value(VVar("x"), env, LIN.one)
    assert out.converged
    assert out.env.grades() == ctx(LIN, y="inf")
    assert pretty_value(out.value.value) == "unit"


def test_nw_unit_empty_env():
    out = nw_eval_value(VUnit(), aenv(LIN), LIN.one)
    assert out.converged
    assert out.value.uses == GradeContext.of(LIN)


def test_nw_unit_nondiscardable_env_stuck():
    env = aenv(LIN, ("y", 1, av(LIN, VUnit())))
    out = nw_eval_value(VUnit(), env, LIN.one)
    assert out.kind == "stuck" and out.reason == "waste"


# ---------------------------------------------------------------------------
# split_env
# ---------------------------------------------------------------------------

def test_split_demand_guided_first():
    env = aenv(NAT, ("x", 1, av(NAT, VUnit())), ("y", 1, av(NAT, VUnit())))
    splits = split_env(env, ctx(NAT, x=1), ctx(NAT, y=1))
    first = splits[0]
    assert first[0].grades() == ctx(NAT, x=1)
    assert first[1].grades() == ctx(NAT, y=1)


def test_split_candidates_cover_figure19_allocation():
    f = VFun("f", "w", Ret(VPair(NAT.one, VVar("x"), VVar("x"), NAT.one)))
    env = aenv(NAT, ("x", 12, av(NAT, VUnit())),
               ("y", 2, av(NAT, f, x=2)))
    splits = split_env(env, ctx(NAT, x=7), ctx(NAT, x=5, y=2), limit=32)
    allocs = [(s[0].grades().get("x"), s[1].grades().get("x")) for s in splits]
    assert (NAT.parse("7"), NAT.parse("5")) in allocs


def test_split_sums_below_original():
    env = aenv(NAT, ("x", 3, av(NAT, VUnit())), ("y", 2, av(NAT, VUnit())))
    for left, right in split_env(env, ctx(NAT, x=1), ctx(NAT)):
        total = ctx_add(left.grades(), right.grades())
        assert ctx_leq(total, env.grades())


# ---------------------------------------------------------------------------
# figures 17-19: whole reductions
# ---------------------------------------------------------------------------

def _fig17_env(alg, x_grade, y_grade):
    f = elaborate(parse_expr("\\z. <x, x>_{1,1}", alg)).value
    return aenv(alg,
                ("y", y_grade, av(alg, f, x=2)),
                ("x", x_grade, av(alg, VUnit())))


def _app_pair(alg):
    return elaborate(parse_expr("y <x, x>_{3,5}", alg))


def test_fig17_converges_and_consumes_everything():
    env = _fig17_env(NAT, 10, 1)
    out = nw_eval(_app_pair(NAT), env, NAT.one, fuel=200)
    assert out.converged, out
    g = out.env.grades()
    assert g.get("x") == NAT.zero and g.get("y") == NAT.zero
    # anything left over is discardable (here: bounded counting, all fine)
    assert no_waste(ctx_scale(NAT.one, out.value.uses), out.env)


def test_fig17_exact_counting_sticks_on_unused_argument():
    # the ignored argument is bound at a nonzero grade; under exact counting
    # that binding can neither be consumed nor discarded
    env = _fig17_env(NATEQ, 10, 1)
    out = nw_eval(_app_pair(NATEQ), env, NATEQ.one, fuel=400, nodes=200_000)
    assert out.kind == "stuck" and out.reason == "waste"


def test_fig18_bounded_counting_converges():
    env = _fig17_env(NAT, 12, 2)
    out = nw_eval(_app_pair(NAT), env, NAT.one, fuel=400)
    assert out.converged, out


def test_fig19_exact_counting_stuck_waste():
    env = _fig17_env(NATEQ, 12, 2)
    out = nw_eval(_app_pair(NATEQ), env, NATEQ.one, fuel=400, nodes=200_000)
    assert out.kind == "stuck", out
    assert out.reason == "waste"


def test_div_no_waste_fuel_exhausted():
    alg = EXT
    div = elaborate(parse_expr("rec f.\\x. y; f x", alg)).value
    env = aenv(alg,
               ("y", "inf", av(alg, VUnit())),
               ("f", "inf", av(alg, div, y="inf")),
               ("x", 1, av(alg, VUnit())))
    body = elaborate(parse_expr("y; f x", alg))
    out = nw_eval(body, env, alg.one, fuel=200, nodes=500_000)
    assert out.kind == "fuel"


# ---------------------------------------------------------------------------
# theorems at desk scale
# ---------------------------------------------------------------------------

def _nw_corpus(alg):
    """Small configurations that converge under the no-waste semantics."""
    confs = [
        ("return x", aenv(alg, ("x", 1, av(alg, VUnit())))),
        ("x; return y", aenv(alg, ("x", 1, av(alg, VUnit())),
                             ("y", 1, av(alg, VUnit())))),
        ("match p with <a, b> -> a; return b",
         aenv(alg, ("p", 1, av(alg, VPair(alg.one, VUnit(), VUnit(), alg.one))))),
    ]
    if alg is NAT:
        confs.append(("y <x, x>_{3,5}", _fig17_env(NAT, 10, 1)))
    return [(elaborate(parse_expr(src, alg)), env) for src, env in confs]


def test_nw_refines_erased_replay():
    for alg in (LIN, NAT, NATEQ):
        for e, env in _nw_corpus(alg):
            out = nw_eval(e, env, alg.one, fuel=300)
            assert out.converged, (alg.name, e)
            replay = eval_expr(e, erase(env), alg.one, fuel=300)
            assert replay.converged
            assert replay.value == erase(out.value)


def test_nw_sem_input_no_waste_and_output_no_waste():
    for alg in (LIN, NAT):
        for e, env in _nw_corpus(alg):
            out = nw_eval(e, env, alg.one, fuel=300)
            assert out.converged
            assert nw_config(e, env).holds
            assert no_waste(ctx_scale(alg.one, out.value.uses), out.env)


def test_balance_items():
    for alg in (LIN, NAT, NATEQ):
        for e, env in _nw_corpus(alg):
            out = nw_eval(e, env, alg.one, fuel=300)
            assert out.converged
            # item 1: the result is no-waste in the final environment
            demand = vec_mat_mul(ctx_scale(alg.one, out.value.uses),
                                 env_closure(out.env))
            assert ctx_leq(demand, out.env.grades())
            # item 3: final grades plus consumed below initial plus added
            lhs = ctx_add(out.env.grades(), out.used)
            rhs = ctx_add(env.grades(), out.added)
            assert ctx_leq(lhs, rhs), (alg.name, lhs, rhs)


def test_garbage_is_discardable():
    # nw_config true implies unreachable entries carry discardable grades
    envs = [
        aenv(LIN, ("x", 1, av(LIN, VUnit())), ("y", "inf", av(LIN, VUnit()))),
        aenv(NAT, ("x", 2, av(NAT, VUnit())), ("y", 3, av(NAT, VUnit()))),
        aenv(NATEQ, ("x", 1, av(NATEQ, VUnit())), ("y", 0, av(NATEQ, VUnit()))),
    ]
    for env in envs:
        expr = VVar("x")
        res = nw_config(expr, env)
        if not res.holds:
            continue
        for var in set(env.domain()) - reachable(env, free_vars(expr)):
            g = env.grades().get(var)
            assert env.algebra.is_discardable(g)


def test_honesty_preserved_on_results():
    for alg in (LIN, NAT):
        for e, env in _nw_corpus(alg):
            out = nw_eval(e, env, alg.one, fuel=300)
            assert out.converged
            assert honest(out.value.uses, out.value.value)


def test_var_residual_discardable_when_unreferenced():
    # after a (var) consumption with no other transitive demand on the
    # variable, the residual is discardable
    env = aenv(LIN, ("x", 1, av(LIN, VUnit())))
    out = nw_eval_value(VVar("x"), env, LIN.one)
    assert out.converged
    assert LIN.is_discardable(out.env.grades().get("x"))


# ---------------------------------------------------------------------------
# nw_config: semantic characterization (section 6.5)
# ---------------------------------------------------------------------------

def test_nw_config_transitive_use_holds():
    env = aenv(LIN,
               ("x", 1, av(LIN, pair_lam(LIN), y=1, z=1)),
               ("y", 1, av(LIN, VUnit())),
               ("z", 1, av(LIN, VUnit())))
    res = nw_config(VVar("x"), env)
    assert res.holds
    assert res.witness == ctx(LIN, x=1)


def test_nw_config_refuted_when_resource_unreachable():
    lam_y = VFun("f", "w", Ret(VVar("y")))
    env = aenv(LIN,
               ("x", 1, av(LIN, lam_y, y=1)),
               ("y", 1, av(LIN, VUnit())),
               ("z", 1, av(LIN, VUnit())))
    res = nw_config(VVar("x"), env)
    assert not res.holds
    assert res.note


def test_nw_config_ill_typed_but_no_waste():
    # if true then x else unit: no-waste even though ill-typed
    src = "Bool = true + false\nmain = if true then return x else return unit\n"
    from grlc.program import load_program
    loaded = load_program(src + "where\n  x : 1 = unit\n", LIN)
    env = annotate_env(loaded.env, loaded.env_uses)
    res = nw_config(loaded.main, env)
    assert res.holds
    out = nw_eval(loaded.main, env, LIN.one, fuel=100)
    assert out.converged
