from dataclasses import replace
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homnet.analysis import (
    EmptinessResult,
    ball_size_bound,
    dependence_radius,
    emptiness_bounded,
    enumerate_bounded,
    max_degree,
    network_connected,
    subsumption_bounded,
    value_degree,
)
from homnet.compiler import compile_ghmlminus_sum, compile_hml_max
from homnet.logic import And, GhmlMinusExists, HmlExists, Neg, atom, builtin_formulas
from homnet.matching import canonical_key, enumerate_patterns
from homnet.network import Classifier, run
from homnet.neural import RELU_STAR, rational_fnn
from homnet.relational import GRAPH_SCHEMA, Schema, database, fact, is_connected

B = builtin_formulas()
PE_SCHEMA = Schema({"E": 2, "P": 1})

LOOP = HmlExists("x", (), (atom("E", "x", "x"),))
EDGE_NO_LOOP = And(B["has_out_edge"], Neg(LOOP))


def zero_classifier_net(phi):
    net = compile_hml_max(phi)
    width = net.layers[-1].out_dim
    dead = rational_fnn([[Fraction(0)] for _ in range(width)], [Fraction(0)], RELU_STAR)
    return replace(net, classify=Classifier(net=dead, coord=0, threshold=Fraction(1)))


def out_deg(db, v):
    return sum(1 for f in db.facts_of("E") if f.args[0] == v)


# ---------------------------------------------------------------------------
# enumeration


@pytest.mark.parametrize("bound", [1, 2, 99])
def test_enumeration_matches_independent_sweep(bound):
    mine = list(enumerate_bounded(GRAPH_SCHEMA, bound, 3))
    brute = [
        p
        for p in enumerate_patterns(GRAPH_SCHEMA, 3)
        if is_connected(p.db) and max_degree(p.db) <= bound
    ]
    assert len(mine) == len(brute)
    assert {canonical_key(p) for p in mine} == {canonical_key(p) for p in brute}


def test_enumeration_matches_sweep_on_mixed_schema():
    mine = list(enumerate_bounded(PE_SCHEMA, 2, 2))
    brute = [
        p
        for p in enumerate_patterns(PE_SCHEMA, 2)
        if is_connected(p.db) and max_degree(p.db) <= 2
    ]
    assert {canonical_key(p) for p in mine} == {canonical_key(p) for p in brute}


def test_enumeration_order_is_fact_layered_and_deterministic():
    a = list(enumerate_bounded(GRAPH_SCHEMA, 2, 3))
    b = list(enumerate_bounded(GRAPH_SCHEMA, 2, 3))
    assert a == b
    sizes = [len(p.db.facts) for p in a]
    assert sizes == sorted(sizes)
    assert sizes[0] == 0  # the bare root comes first


@settings(deadline=None, max_examples=25)
@given(bound=st.integers(0, 3), cap=st.integers(1, 3))
def test_enumeration_respects_its_own_bounds(bound, cap):
    seen = set()
    for pdb in enumerate_bounded(GRAPH_SCHEMA, bound, cap):
        assert pdb.root in pdb.db.adom
        assert len(pdb.db.adom) <= cap
        assert max_degree(pdb.db) <= bound
        assert is_connected(pdb.db)
        key = canonical_key(pdb)
        assert key not in seen
        seen.add(key)


# ---------------------------------------------------------------------------
# emptiness


def test_dead_classifier_is_empty_at_every_cap():
    net = zero_classifier_net(B["has_out_edge"])
    for cap in (1, 2, 3):
        res = emptiness_bounded(net, 2, cap)
        assert res.witness is None
        assert res.verdict.startswith("empty")


def test_tag_detector_witness_is_one_tagged_value():
    net = compile_hml_max(HmlExists("x", (), (atom("P", "x"),)), PE_SCHEMA)
    res = emptiness_bounded(net, 1, 1)
    w = res.witness
    assert w is not None
    assert w.db.adom == {"w0"}
    assert w.db.facts == frozenset({fact("P", "w0")})
    assert run(net, w).accept
    assert res.verdict == "witness"


def test_contradiction_is_empty_up_to_cap_four():
    phi = And(B["has_out_edge"], Neg(B["has_out_edge"]))
    for compiled in (compile_hml_max(phi), compile_ghmlminus_sum(phi)):
        res = emptiness_bounded(compiled, 2, 4)
        assert res.witness is None
        assert res.verdict == "empty-bounded"  # the cap is under the ball bound
        assert res.checked == sum(1 for _ in enumerate_bounded(GRAPH_SCHEMA, 2, 4))


def test_single_value_contradiction_is_settled_outright():
    # every pattern has one value, so the root's ball is the root itself and
    # a one-value sweep is already exhaustive
    net = compile_hml_max(And(LOOP, Neg(LOOP)))
    assert dependence_radius(net) == 0
    res = emptiness_bounded(net, 3, 1)
    assert res.verdict == "empty-definitive"


def test_degree_one_sweep_is_not_definitive_below_the_ball():
    # the smallest accepted input of this net is a 2-value edge of degree 1;
    # a cap-1 sweep must therefore stay "bounded", not declare emptiness
    net = compile_hml_max(EDGE_NO_LOOP)
    res = emptiness_bounded(net, 1, 1)
    assert res.witness is None
    assert res.verdict == "empty-bounded"
    found = emptiness_bounded(net, 1, 2)
    assert found.witness is not None
    assert found.witness.db.facts == frozenset({fact("E", "w0", "w1")})
    assert run(net, found.witness).accept


def test_disconnected_pattern_caps_the_verdict():
    # the inner block quantifies a variable that occurs in no atom, so its
    # pattern is disconnected and locality reasoning is off the table
    net = compile_hml_max(Neg(HmlExists("x", ("y",), ())))
    assert not network_connected(net)
    res = emptiness_bounded(net, 1, 3)
    assert res.witness is None
    assert res.verdict == "empty-bounded"
    assert res.size_cap >= ball_size_bound(GRAPH_SCHEMA, 1, dependence_radius(net))


@pytest.mark.parametrize("name", ["has_out_edge", "sink", "out_degree_2"])
def test_witnesses_self_verify(name):
    phi = B[name]
    net = compile_ghmlminus_sum(phi)
    res = emptiness_bounded(net, 2, 3)
    assert res.witness is not None
    assert run(net, res.witness).accept
    assert is_connected(res.witness.db)
    assert max_degree(res.witness.db) <= 2


def test_size_cap_must_be_positive():
    net = compile_hml_max(B["has_out_edge"])
    with pytest.raises(ValueError):
        emptiness_bounded(net, 2, 0)


# ---------------------------------------------------------------------------
# subsumption


def test_two_out_edges_subsumed_by_one():
    stronger = compile_ghmlminus_sum(B["out_degree_2"])
    weaker = compile_ghmlminus_sum(B["has_out_edge"])
    res = subsumption_bounded(stronger, weaker, 3, 3)
    assert res.counterexample is None
    assert res.verdict == "subsumed-bounded"
    settled = subsumption_bounded(stronger, weaker, 3, 4)
    assert settled.verdict == "subsumed-definitive"
    assert settled.size_cap >= ball_size_bound(GRAPH_SCHEMA, 3, 1)


def test_one_out_edge_not_subsumed_by_two():
    weaker = compile_ghmlminus_sum(B["has_out_edge"])
    stronger = compile_ghmlminus_sum(B["out_degree_2"])
    res = subsumption_bounded(weaker, stronger, 3, 3)
    c = res.counterexample
    assert c is not None
    assert out_deg(c.db, c.root) == 1
    assert run(weaker, c).accept and not run(stronger, c).accept
    assert res.verdict == "counterexample"


def test_net_subsumes_itself():
    net = compile_ghmlminus_sum(B["out_degree_2"])
    res = subsumption_bounded(net, net, 2, 3)
    assert res.counterexample is None


def test_equivalent_targets_subsume_both_ways():
    a = compile_hml_max(B["has_out_edge"])
    b = compile_ghmlminus_sum(B["has_out_edge"])
    assert subsumption_bounded(a, b, 2, 4).counterexample is None
    assert subsumption_bounded(b, a, 2, 4).counterexample is None


# ---------------------------------------------------------------------------
# locality bookkeeping


def test_ball_bound_arithmetic():
    assert ball_size_bound(GRAPH_SCHEMA, 1, 4) == 5  # a degree-1 chain
    assert ball_size_bound(GRAPH_SCHEMA, 4, 2) == 21  # 1 + 4 + 16
    assert ball_size_bound(GRAPH_SCHEMA, 0, 7) == 1
    assert ball_size_bound(Schema({"P": 1}), 5, 9) == 1  # unary facts never link


def test_degree_counts_incident_facts_once_each():
    db = database(
        GRAPH_SCHEMA,
        [fact("E", "a", "a"), fact("E", "a", "b"), fact("E", "b", "a")],
    )
    assert value_degree(db, "a") == 3  # the loop counts once
    assert value_degree(db, "b") == 2
    assert max_degree(db) == 3


def test_compiled_net_radius_and_connectivity():
    net = compile_hml_max(B["has_out_edge"])
    assert network_connected(net)
    assert dependence_radius(net) == 1


def test_summaries_name_the_outcome():
    net = compile_hml_max(B["has_out_edge"])
    found = emptiness_bounded(net, 2, 2)
    assert "witness" in found.summary()
    empty = emptiness_bounded(zero_classifier_net(B["has_out_edge"]), 2, 2)
    assert "none accepted" in empty.summary()
    sub = subsumption_bounded(net, net, 2, 2)
    assert "subsumed" in sub.summary() or "also accepted" in sub.summary()
