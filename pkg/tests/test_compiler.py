import json
from fractions import Fraction

import numpy as np
import pytest

from homnet.compiler import (
    COMPILE_TARGETS,
    EquivConfig,
    check_equivalence,
    compile_eml_max_den,
    compile_eml_sum_den,
    compile_ghmlminus_sum,
    compile_hml_max,
    compile_rhml_mean,
    random_database,
    _single_value_family,
)
from homnet.logic import (
    And,
    EmlExists,
    GhmlMinusExists,
    HmlExists,
    Neg,
    Or,
    RhmlRatio,
    atom,
    builtin_formulas,
    eval_formula,
    is_strict_eml,
    strictify,
)
from homnet.matching import enumerate_patterns
from homnet.network import (
    Dhn,
    DhnLayer,
    network_to_obj,
    run,
    simple_flag,
)
from homnet.neural import RELU_STAR, rational_fnn
from homnet.relational import (
    GRAPH_SCHEMA,
    Schema,
    database,
    fact,
    is_connected,
    pointed,
)

B = builtin_formulas()
PE_SCHEMA = Schema({"E": 2, "P": 1})

# trimmed sweep for per-test equivalence checks; the acceptance gate runs
# the full-size configuration
FAST = EquivConfig(exhaustive_values=3, samples=60, max_values=5, seed=7)


def graph(*edges, extra=()):
    return database(GRAPH_SCHEMA, [fact("E", a, b) for a, b in edges], extra)


def sym(*pairs):
    out = []
    for a, b in pairs:
        out += [fact("E", a, b), fact("E", b, a)]
    return out


def rand_graphs(seed, n, max_values=5, schema=GRAPH_SCHEMA):
    rng = np.random.Generator(np.random.Philox(seed))
    return [random_database(schema, rng, max_values) for _ in range(n)]


def out_degree(db, v):
    return sum(1 for f in db.facts_of("E") if f.args[0] == v)


# ---------------------------------------------------------------------------
# construction shape


def test_depth_three_formula_gets_one_layer_per_subformula():
    # subformulas: E(x,x) block, E(x,y) block, Or, Neg -> k = 4
    phi = Neg(Or(HmlExists("x", (), (atom("E", "x", "x"),)), B["has_out_edge"]))
    net = compile_hml_max(phi)
    assert len(net.layers) == 4
    assert all(layer.out_dim == 4 for layer in net.layers)
    assert net.layers[0].in_dim == 0
    assert net.classify.coord == 3 and net.classify.threshold == Fraction(1)


def test_single_value_database_family_sizes():
    fam = _single_value_family(GRAPH_SCHEMA)
    assert len(fam) == 2  # bare value / loop value
    assert sorted(len(p.db.facts) for p in fam) == [0, 1]
    # one extra unary relation doubles the family twice over
    assert len(_single_value_family(PE_SCHEMA)) == 4


def test_sum_compilation_is_simple():
    net = compile_ghmlminus_sum(B["local_transitivity_counts"])
    flag = simple_flag(net)
    assert flag.simple, flag.problems


def test_connected_formula_compiles_to_connected_patterns():
    for phi in [B["out_degree_2"], B["local_transitivity_counts"], B["has_out_edge"]]:
        net = compile_ghmlminus_sum(phi)
        assert all(is_connected(q.pattern.db) for l in net.layers for q in l.queries)


def test_compilation_is_deterministic():
    for name, compile_fn, phi in [
        ("max-dhn", compile_hml_max, B["sink"]),
        ("sum-dhn", compile_ghmlminus_sum, B["out_degree_2"]),
        ("mean-dhn", compile_rhml_mean, B["triangle_ratio"]),
        ("max-den", compile_eml_max_den, B["sun_strict"]),
        ("sum-den", compile_eml_sum_den, B["sun_strict"]),
    ]:
        a = json.dumps(network_to_obj(compile_fn(phi)), sort_keys=True)
        b = json.dumps(network_to_obj(compile_fn(phi)), sort_keys=True)
        assert a == b, name


def test_target_registry_lists_all_five():
    assert sorted(COMPILE_TARGETS) == [
        "max-den",
        "max-dhn",
        "mean-dhn",
        "sum-den",
        "sum-dhn",
    ]


# ---------------------------------------------------------------------------
# max target semantics


def test_unary_atom_formula_accepts_exactly_tagged_values():
    phi = HmlExists("x", (), (atom("P", "x"),))
    net = compile_hml_max(phi, PE_SCHEMA)
    for db in rand_graphs(11, 100, schema=PE_SCHEMA):
        tagged = {f.args[0] for f in db.facts_of("P")}
        for v in sorted(db.adom):
            assert run(net, pointed(db, v)).accept == (v in tagged)


def test_negated_exists_accepts_exactly_sinks():
    net = compile_hml_max(B["sink"])
    for db in rand_graphs(12, 100):
        for v in sorted(db.adom):
            assert run(net, pointed(db, v)).accept == (out_degree(db, v) == 0)


def test_guarded_exists_matches_oracle():
    # some out-neighbor is itself a sink
    phi = HmlExists("x", ("y",), (atom("E", "x", "y"),), (("y", B["sink"]),))
    net = compile_hml_max(phi)
    for db in rand_graphs(13, 60):
        for v in sorted(db.adom):
            want = any(
                f.args[0] == v and out_degree(db, f.args[1]) == 0
                for f in db.facts_of("E")
            )
            assert run(net, pointed(db, v)).accept == want


def test_disjunction_with_identical_children_still_clamps():
    phi = Or(B["has_out_edge"], B["has_out_edge"])
    net = compile_hml_max(phi)
    assert len(net.layers) == 2  # the duplicate child shares a coordinate
    rep = check_equivalence(phi, net, FAST)
    assert rep.ok, rep.summary()


# ---------------------------------------------------------------------------
# sum target semantics


def test_counting_block_accepts_exactly_out_degree_two():
    net = compile_ghmlminus_sum(B["out_degree_2"])
    for db in rand_graphs(14, 100):
        for v in sorted(db.adom):
            assert run(net, pointed(db, v)).accept == (out_degree(db, v) >= 2)


def test_count_one_agrees_with_max_compilation():
    for phi in [
        B["has_out_edge"],
        B["sink"],
        HmlExists("x", ("y",), (atom("E", "x", "y"),), (("y", B["has_out_edge"]),)),
    ]:
        net_max = compile_hml_max(phi)
        net_sum = compile_ghmlminus_sum(phi)
        for db in rand_graphs(15, 40):
            for v in sorted(db.adom):
                p = pointed(db, v)
                assert run(net_max, p).accept == run(net_sum, p).accept


def test_guarded_counting_block():
    # at least two out-neighbors that are sinks
    phi = GhmlMinusExists(2, "x", ("y",), (atom("E", "x", "y"),), (("y", B["sink"]),))
    net = compile_ghmlminus_sum(phi)
    for db in rand_graphs(16, 60):
        for v in sorted(db.adom):
            hits = sum(
                1
                for f in db.facts_of("E")
                if f.args[0] == v and out_degree(db, f.args[1]) == 0
            )
            assert run(net, pointed(db, v)).accept == (hits >= 2)


def test_two_variable_counting_block():
    phi = GhmlMinusExists(
        3, "x", ("y", "z"), (atom("E", "x", "y"), atom("E", "y", "z"))
    )
    rep = check_equivalence(phi, compile_ghmlminus_sum(phi), FAST)
    assert rep.ok, rep.summary()


# ---------------------------------------------------------------------------
# embedding targets


def test_strict_block_requires_strict_input():
    with pytest.raises(ValueError, match="strictify"):
        compile_eml_max_den(B["has_out_edge"])
    with pytest.raises(ValueError, match="strictify"):
        compile_eml_sum_den(B["sun"])


def test_distinct_out_neighbor_matches_plain_oracle():
    # exists y != x with an edge x->y, strictified and compiled both ways
    phi = EmlExists("x", ("y",), (atom("E", "x", "y"),), (), (("x", "y"),))
    s = strictify(phi, GRAPH_SCHEMA)
    net_max = compile_eml_max_den(s)
    net_sum = compile_eml_sum_den(s)
    for db in rand_graphs(17, 50, max_values=5):
        for v in sorted(db.adom):
            want = any(
                f.args[0] == v and f.args[1] != v for f in db.facts_of("E")
            )
            p = pointed(db, v)
            assert run(net_max, p).accept == want
            assert run(net_sum, p).accept == want
            assert eval_formula(s, p) == want


def test_strictified_loop_block_accepts_exactly_loops():
    s = strictify(HmlExists("x", (), (atom("E", "x", "x"),)), GRAPH_SCHEMA)
    net = compile_eml_max_den(s)
    db = graph(("a", "a"), ("a", "b"), extra=["c"])
    assert run(net, pointed(db, "a")).accept
    assert not run(net, pointed(db, "b")).accept
    assert not run(net, pointed(db, "c")).accept


def test_strict_sun_distinguishes_unit_samples():
    phi = B["sun_strict"]
    assert is_strict_eml(phi, GRAPH_SCHEMA)
    s = strictify(phi, GRAPH_SCHEMA)  # already strict: the split is a no-op

    cyc = [(f"c{i}", f"c{(i + 1) % 6}") for i in range(6)]
    pend = [(f"c{i}", f"p{i}") for i in range(6)]
    pos_unit = database(GRAPH_SCHEMA, sym(*cyc, *pend))
    neg_unit = database(GRAPH_SCHEMA, sym(*cyc, *pend, ("p0", "leaf")))

    for compile_fn in (compile_eml_max_den, compile_eml_sum_den):
        net = compile_fn(s)
        for db, expect in [(pos_unit, True), (neg_unit, False)]:
            for root in ["c0", "c3"]:
                p = pointed(db, root)
                assert eval_formula(s, p) == expect
                assert run(net, p).accept == expect
        # the unpinned catalog variant agrees on these symmetric units
        assert eval_formula(B["sun"], pointed(pos_unit, "c0"))
        assert not eval_formula(B["sun"], pointed(neg_unit, "c0"))


def test_boolean_layers_spread_over_single_value_databases():
    s = strictify(Neg(HmlExists("x", (), (atom("E", "x", "x"),))), GRAPH_SCHEMA)
    net = compile_eml_max_den(s)
    neg_layer = net.layers[-1]
    assert len(neg_layer.queries) == 2
    assert all(len(q.pattern.db.adom) == 1 for q in neg_layer.queries)


# ---------------------------------------------------------------------------
# mean target semantics


def test_ratio_formula_on_fully_decorated_triangles_accepts():
    net = compile_rhml_mean(B["triangle_ratio"])
    db = graph(
        ("a", "b"), ("b", "c"), ("c", "a"), ("a", "a"), ("b", "b"), ("c", "c")
    )
    res = run(net, pointed(db, "a"))
    assert res.accept
    # ... and with one undecorated triangle alongside, the ratio is 1/2
    db2 = graph(
        ("a", "b"), ("b", "c"), ("c", "a"), ("a", "a"), ("b", "b"), ("c", "c"),
        ("a", "d"), ("d", "e"), ("e", "a"),
    )
    assert run(net, pointed(db2, "a")).accept  # 1/2 >= 1/2


def test_zero_denominator_convention():
    base = dict(
        free="x",
        vars=("y", "z"),
        mu=(),
        nu=(atom("E", "x", "y"), atom("E", "y", "z"), atom("E", "z", "x")),
    )
    db = graph(("a", "b"))  # no triangles anywhere
    weak = compile_rhml_mean(RhmlRatio(">=", Fraction(1, 2), **base))
    strict = compile_rhml_mean(RhmlRatio(">", Fraction(1, 2), **base))
    assert run(weak, pointed(db, "a")).accept
    assert not run(strict, pointed(db, "a")).accept


def test_mean_target_takes_plain_existentials():
    nested = Neg(
        HmlExists("x", ("y",), (atom("E", "x", "y"),), (("y", B["sink"]),))
    )
    for phi in [B["has_out_edge"], B["sink"], nested]:
        net = compile_rhml_mean(phi)
        for db in rand_graphs(18, 40):
            for v in sorted(db.adom):
                p = pointed(db, v)
                assert run(net, p).accept == eval_formula(phi, p)


def test_ratio_thresholds_are_exact():
    phi = RhmlRatio(
        ">=", Fraction(2, 3), "x", ("y",), (("y", B["has_out_edge"]),),
        (atom("E", "x", "y"),),
    )
    net = compile_rhml_mean(phi)
    # 2 of 3 out-neighbors have out-edges: exactly 2/3 >= 2/3
    db = graph(("r", "a"), ("r", "b"), ("r", "c"), ("a", "a"), ("b", "b"))
    assert run(net, pointed(db, "r")).accept
    strict = compile_rhml_mean(
        RhmlRatio(">", Fraction(2, 3), "x", ("y",), (("y", B["has_out_edge"]),),
                  (atom("E", "x", "y"),))
    )
    assert not run(strict, pointed(db, "r")).accept


# ---------------------------------------------------------------------------
# 0/1 purity of every compiled coordinate


def _assert_pure(net, dbs):
    for db in dbs:
        res = run(net, pointed(db, sorted(db.adom)[0]))
        for emb in res.trace[1:]:
            for v in sorted(db.adom):
                vec = emb.vec(v)
                assert all(isinstance(t, Fraction) for t in vec)
                assert set(vec) <= {Fraction(0), Fraction(1)}, (db, vec)


def test_compiled_coordinates_are_zero_or_one():
    dbs = rand_graphs(19, 25)
    _assert_pure(compile_hml_max(B["sink"]), dbs)
    _assert_pure(compile_ghmlminus_sum(B["local_transitivity_counts"]), dbs)
    _assert_pure(compile_rhml_mean(B["triangle_ratio"]), dbs)
    s = strictify(B["has_out_edge"], GRAPH_SCHEMA)
    _assert_pure(compile_eml_max_den(s), dbs)
    _assert_pure(compile_eml_sum_den(s), dbs)


# ---------------------------------------------------------------------------
# the equivalence checker


def test_check_equivalence_clean_on_compiled_nets():
    cases = [
        (B["sink"], compile_hml_max(B["sink"])),
        (B["out_degree_2"], compile_ghmlminus_sum(B["out_degree_2"])),
        (B["triangle_ratio"], compile_rhml_mean(B["triangle_ratio"])),
    ]
    s = strictify(HmlExists("x", (), (atom("E", "x", "x"),)), GRAPH_SCHEMA)
    cases.append((s, compile_eml_sum_den(s)))
    for phi, net in cases:
        rep = check_equivalence(phi, net, FAST)
        assert rep.ok, rep.summary()
        assert rep.exhaustive_checked == len(enumerate_patterns(GRAPH_SCHEMA, 3))
        assert rep.random_checked >= FAST.samples


def test_exhaustive_pool_covers_all_small_pointed_databases():
    # 2 + 16 + 512 labeled databases over 1..3 values collapse to 290
    # canonical pointed representatives
    assert len(enumerate_patterns(GRAPH_SCHEMA, 3)) == 290


def test_corrupted_weight_is_found():
    phi = B["sink"]
    net = compile_hml_max(phi)
    last = net.layers[-1]
    stage = last.combine.layers[0]
    bias = list(stage.bias)
    bias[net.classify.coord] += Fraction(1)  # force the root coordinate up
    bad = Dhn(
        net.layers[:-1]
        + (DhnLayer(last.queries, rational_fnn([list(r) for r in stage.weight], bias, RELU_STAR), last.norm),),
        net.classify,
    )
    rep = check_equivalence(phi, bad, EquivConfig(samples=500))
    assert not rep.ok
    assert any(d.source == "random" for d in rep.disagreements) or any(
        d.source == "exhaustive" for d in rep.disagreements
    )


def test_disagreement_records_point_to_real_failures():
    phi = B["has_out_edge"]
    net = compile_hml_max(Neg(phi))  # deliberately the wrong formula
    rep = check_equivalence(phi, net, FAST)
    assert not rep.ok
    d = rep.disagreements[0]
    assert eval_formula(phi, d.pdb) == d.formula_accepts
    assert run(net, d.pdb).accept == d.network_accepts
    assert d.formula_accepts != d.network_accepts


# ---------------------------------------------------------------------------
# input validation


def test_wrong_fragment_is_refused():
    with pytest.raises(ValueError):
        compile_hml_max(B["out_degree_2"])
    with pytest.raises(ValueError):
        compile_hml_max(B["triangle_ratio"])
    with pytest.raises(ValueError):
        compile_ghmlminus_sum(B["triangle_ratio"])
    with pytest.raises(ValueError):
        compile_rhml_mean(B["out_degree_2"])
    with pytest.raises(ValueError):
        compile_rhml_mean(B["sun"])


def test_formula_schema_must_fit():
    phi = HmlExists("x", (), (atom("P", "x"),))
    with pytest.raises(Exception):
        compile_hml_max(phi)  # graph schema has no P
