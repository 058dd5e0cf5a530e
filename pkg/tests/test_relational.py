import math

import pytest
from hypothesis import given, strategies as st

from homnet.relational import (
    GRAPH_SCHEMA,
    Database,
    DatabaseDocument,
    EmbeddedDatabase,
    Fact,
    PointedDatabase,
    Schema,
    SchemaError,
    adom,
    database,
    degree,
    diameter,
    document_from_obj,
    document_to_obj,
    empty_embedding,
    fact,
    gaifman,
    is_connected,
    pointed,
)


def graph(*edges, values=()):
    return database(GRAPH_SCHEMA, [fact("E", a, b) for a, b in edges], values)


class TestSchema:
    def test_arity_lookup(self):
        s = Schema({"E": 2, "P": 1})
        assert s.arity("E") == 2
        assert "P" in s and "Q" not in s

    def test_unknown_relation(self):
        with pytest.raises(SchemaError):
            Schema({"E": 2}).arity("R")

    def test_bad_arity(self):
        with pytest.raises(SchemaError):
            Schema({"E": -1})

    def test_nullary_relation_allowed(self):
        s = Schema({"Flag": 0})
        db = database(s, [fact("Flag")])
        assert adom(db) == frozenset()


class TestDatabase:
    def test_fact_typing(self):
        with pytest.raises(SchemaError):
            database(GRAPH_SCHEMA, [fact("E", "a")])
        with pytest.raises(SchemaError):
            database(GRAPH_SCHEMA, [fact("P", "a")])

    def test_fact_dedup(self):
        db = database(GRAPH_SCHEMA, [fact("E", "a", "b"), fact("E", "a", "b")])
        assert len(db.facts) == 1

    def test_adom_empty(self):
        assert adom(database(GRAPH_SCHEMA)) == frozenset()

    def test_adom_from_facts(self):
        assert adom(graph(("a", "b"))) == {"a", "b"}
        db = database(Schema({"E": 2, "P": 1}), [fact("E", "a", "b"), fact("P", "c")])
        assert adom(db) == {"a", "b", "c"}

    def test_isolated_values(self):
        db = graph(("a", "b"), values=["z"])
        assert adom(db) == {"a", "b", "z"}

    def test_root_must_be_in_adom(self):
        with pytest.raises(SchemaError):
            pointed(graph(("a", "b")), "c")
        # but an isolated declared value is fine
        pointed(database(GRAPH_SCHEMA, values=["v"]), "v")


class TestDegree:
    def test_single_edge(self):
        assert degree(graph(("a", "b"))) == 1

    def test_three_cycle(self):
        assert degree(graph(("a", "b"), ("b", "c"), ("c", "a"))) == 2

    def test_empty(self):
        assert degree(database(GRAPH_SCHEMA)) == 0

    def test_self_loop_counts_once(self):
        assert degree(graph(("a", "a"))) == 1

    def test_matches_brute_tally(self):
        # independent per-value tally
        edges = [("a", "b"), ("a", "c"), ("c", "b"), ("d", "a"), ("b", "b")]
        db = graph(*edges)
        tally = {}
        for x, y in set(edges):
            for v in {x, y}:
                tally[v] = tally.get(v, 0) + 1
        assert degree(db) == max(tally.values())


class TestGaifman:
    def test_ternary_fact_is_clique(self):
        db = database(Schema({"R": 3}), [fact("R", "a", "b", "c")])
        adj = gaifman(db)
        assert adj["a"] == {"b", "c"} and adj["b"] == {"a", "c"} and adj["c"] == {"a", "b"}

    def test_disjoint_edges(self):
        adj = gaifman(graph(("a", "b"), ("c", "d")))
        assert adj["a"] == {"b"} and adj["c"] == {"d"}

    def test_unary_fact_isolated(self):
        db = database(Schema({"P": 1}), [fact("P", "a")])
        assert gaifman(db) == {"a": set()}

    def test_no_self_loop_from_repeat(self):
        assert gaifman(graph(("a", "a"))) == {"a": set()}

    @given(st.lists(st.tuples(st.sampled_from("abcde"), st.sampled_from("abcde")), max_size=12))
    def test_symmetry(self, edges):
        adj = gaifman(graph(*edges))
        for u, nbrs in adj.items():
            for w in nbrs:
                assert u in adj[w]


class TestDiameterConnectivity:
    def test_path(self):
        assert diameter(pointed(graph(("a", "b"), ("b", "c")), "a")) == 2

    def test_unreachable_is_inf(self):
        db = database(Schema({"E": 2, "P": 1}), [fact("E", "a", "b"), fact("P", "c")])
        assert diameter(PointedDatabase(db, "a")) == math.inf

    def test_isolated_root(self):
        db = database(GRAPH_SCHEMA, values=["v"])
        assert diameter(pointed(db, "v")) == 0

    def test_connected_cases(self):
        assert is_connected(graph(("a", "b"), ("b", "c"), ("c", "a")))
        assert not is_connected(graph(("a", "b"), ("c", "d")))
        assert is_connected(database(GRAPH_SCHEMA, values=["v"]))
        assert is_connected(database(GRAPH_SCHEMA))  # empty

    @given(
        st.lists(st.tuples(st.sampled_from("abcdef"), st.sampled_from("abcdef")), max_size=15),
        st.tuples(st.sampled_from("abcdef"), st.sampled_from("abcdef")),
    )
    def test_adding_fact_never_increases_eccentricity(self, edges, extra):
        db = graph(*edges)
        if not db.adom:
            return
        root = sorted(db.adom)[0]
        if extra[0] not in db.adom or extra[1] not in db.adom:
            return
        before = diameter(pointed(db, root))
        after = diameter(pointed(graph(*edges, extra), root))
        assert after <= before


class TestEmbeddedDatabase:
    def test_total_and_sized(self):
        db = graph(("a", "b"))
        with pytest.raises(SchemaError):
            EmbeddedDatabase(db, 1, {"a": (0.0,)})  # missing b
        with pytest.raises(SchemaError):
            EmbeddedDatabase(db, 2, {"a": (0.0,), "b": (0.0, 1.0)})

    def test_empty_embedding_dim0(self):
        emb = empty_embedding(graph(("a", "b")))
        assert emb.dim == 0 and emb.vec("a") == ()


class TestJsonRoundTrip:
    def test_documented_example(self):
        obj = {
            "schema": {"E": 2, "P": 1},
            "facts": [["E", "a", "b"], ["P", "c"]],
            "root": "a",
        }
        doc = document_from_obj(obj)
        assert doc.pointed.root == "a"
        assert adom(doc.db) == {"a", "b", "c"}
        assert document_to_obj(doc) == {
            "schema": {"E": 2, "P": 1},
            "facts": [["E", "a", "b"], ["P", "c"]],
            "root": "a",
        }

    def test_round_trip_with_everything(self):
        doc = DatabaseDocument(
            db=graph(("a", "b"), values=["z"]),
            root="b",
            embedding={"a": (0.5,), "b": (1.0,), "z": (0.0,)},
            labels={"a": 1, "b": 0},
            meta={"seed": 7},
        )
        obj = document_to_obj(doc)
        doc2 = document_from_obj(obj)
        assert doc2.db == doc.db
        assert doc2.root == "b"
        assert doc2.embedding == doc.embedding
        assert doc2.labels == doc.labels
        assert doc2.meta == {"seed": 7}
        assert document_to_obj(doc2) == obj

    @given(
        st.lists(
            st.tuples(st.sampled_from("abcd"), st.sampled_from("abcd")), max_size=8
        ),
        st.sets(st.sampled_from(["x", "y"]), max_size=2),
    )
    def test_round_trip_random_graphs(self, edges, isolated):
        doc = DatabaseDocument(db=graph(*edges, values=isolated))
        assert document_from_obj(document_to_obj(doc)).db == doc.db
