"""Synthetic vertex-classification datasets with exact label oracles.

Two generators: chains of transitive orders thinned by random edge
deletion (directed; label = local transitivity of the vertex), and
disjoint sun components (symmetric; label = lying on a 6-cycle whose
every vertex keeps a degree-1 neighbor).  Each generator checks every
label it emits against the matching graph oracle before returning, and
the oracles themselves are cross-checked against logic-level formula
evaluation in the tests.

Everything is driven by a counter-based RNG (Philox), so a (seed,
parameters) pair pins the artifact down to the byte.  Constant scalar
input features are recorded in the document's meta block rather than
materialised per vertex.
"""

from __future__ import annotations

import numpy as np

from .relational import (
    GRAPH_SCHEMA,
    Database,
    DatabaseDocument,
    PointedDatabase,
    database,
    fact,
)

GENERATOR_VERSION = 1


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _out_adjacency(db: Database) -> dict[str, set[str]]:
    adj: dict[str, set[str]] = {v: set() for v in db.adom}
    for f in db.facts_of("E"):
        adj[f.args[0]].add(f.args[1])
    return adj


# ---------------------------------------------------------------------------
# local transitivity


def oracle_local_transitivity(db: Database, v: str, _adj=None) -> bool:
    """Every 2-step successor of v is also a direct successor."""
    adj = _out_adjacency(db) if _adj is None else _adj
    direct = adj[v]
    return all(u2 in direct for u1 in direct for u2 in adj[u1])


def gen_local_transitivity(
    seed: int, n_chains: int = 200, chain_len: int = 20, delete: int = 4000
) -> DatabaseDocument:
    """Disjoint transitive linear orders with a seeded random edge deletion.

    Starts from `n_chains` disjoint copies of the full order relation on
    `chain_len` vertices (every vertex locally transitive), then removes
    `delete` edges uniformly without replacement; labels come from the
    oracle, per vertex.
    """
    total = n_chains * chain_len * (chain_len - 1) // 2
    if delete > total:
        raise ValueError(f"cannot delete {delete} of {total} edges")
    names = [f"n{c:03d}v{i:02d}" for c in range(n_chains) for i in range(chain_len)]
    edges = [
        (f"n{c:03d}v{i:02d}", f"n{c:03d}v{j:02d}")
        for c in range(n_chains)
        for i in range(chain_len)
        for j in range(i + 1, chain_len)
    ]
    assert len(edges) == total
    rng = _rng(seed)
    doomed = set(rng.choice(total, size=delete, replace=False).tolist())
    kept = [e for i, e in enumerate(edges) if i not in doomed]
    used = {v for e in kept for v in e}
    db = database(
        GRAPH_SCHEMA,
        [fact("E", a, b) for a, b in kept],
        [v for v in names if v not in used],
    )
    adj = _out_adjacency(db)
    labels = {v: int(oracle_local_transitivity(db, v, adj)) for v in names}
    meta = {
        "dataset": "local-transitivity",
        "seed": seed,
        "n_chains": n_chains,
        "chain_len": chain_len,
        "deleted": delete,
        "features": {"dim": 1, "constant": 0.0},
        "generator_version": GENERATOR_VERSION,
    }
    return DatabaseDocument(db=db, labels=labels, meta=meta)


# ---------------------------------------------------------------------------
# sun components


def oracle_sun(db: Database, v: str, _adj=None) -> bool:
    """v lies on a directed 6-cycle of distinct vertices, each of which has
    an out-neighbor with exactly one out-neighbor.

    Mirrors the catalogued sun formula literally (single-direction cycle
    atoms; "degree 1" read as out-neighbor-set size 1), which coincides
    with the undirected reading on the symmetric graphs generated here.
    """
    adj = _out_adjacency(db) if _adj is None else _adj
    solo = {u for u, outs in adj.items() if len(outs) == 1}
    anchored = {u for u, outs in adj.items() if outs & solo}
    if v not in anchored:
        return False

    def extend(path: list[str]) -> bool:
        if len(path) == 6:
            return v in adj[path[-1]]
        return any(
            extend(path + [w])
            for w in adj[path[-1]]
            if w in anchored and w not in path
        )

    return extend([v])


def _cycle_names(prefix: str):
    return [f"{prefix}c{i}" for i in range(6)], [f"{prefix}p{i}" for i in range(6)]


def _basic_unit(prefix: str, edges: list, fatten_with=None, degree_room: int = 7):
    """A 6-cycle with one pendant per cycle vertex; `fatten_with` (an RNG)
    turns it into a spoiled unit by growing 1..degree_room extra leaves on
    at least one pendant.  Returns (cycle vertices, fattening leaves)."""
    cycle, pend = _cycle_names(prefix)
    for i in range(6):
        edges.append((cycle[i], cycle[(i + 1) % 6]))
        edges.append((cycle[i], pend[i]))
    leaves = []
    if fatten_with is not None:
        rng = fatten_with
        mask = rng.random(6) < 0.5
        if not mask.any():
            mask[int(rng.integers(6))] = True
        for i in np.flatnonzero(mask):
            for j in range(int(rng.integers(1, degree_room + 1))):
                leaf = f"{prefix}f{i}{j}"
                edges.append((pend[i], leaf))
                leaves.append(leaf)
    return cycle, leaves


def gen_sun(
    seed: int, n_pos: int = 100, n_neg: int = 100, max_extra_degree: int = 8
) -> DatabaseDocument:
    """Disjoint union of sun components over a symmetric irreflexive E.

    Positive components are plain suns, optionally with spoiled sub-units
    bridged onto cycle vertices (bridges are cut edges, so no new 6-cycles
    appear and the cycle's pendants keep degree 1).  Negative components
    grow 1..max_extra_degree-1 extra leaves on some pendants, denying at
    least one cycle vertex its degree-1 neighbor — which spoils the whole
    cycle.  Only the 6·n_pos + 6·n_neg cycle vertices carry labels.
    """
    rng = _rng(seed)
    edges: list[tuple[str, str]] = []
    labels: dict[str, int] = {}
    degree_room = max_extra_degree - 1  # leaves a pendant may gain: 1..7
    if degree_room < 1:
        raise ValueError("max_extra_degree must be at least 2")
    for u in range(n_pos):
        prefix = f"P{u:03d}"
        cycle, _ = _basic_unit(prefix, edges)
        host_degree = {c: 3 for c in cycle}
        for t in range(int(rng.integers(0, 3))):
            _, leaves = _basic_unit(
                f"{prefix}x{t}", edges, fatten_with=rng, degree_room=degree_room
            )
            hosts = [c for c in cycle if host_degree[c] < max_extra_degree]
            host = hosts[int(rng.integers(len(hosts)))]
            host_degree[host] += 1
            edges.append((leaves[int(rng.integers(len(leaves)))], host))
        labels.update({c: 1 for c in cycle})
    for u in range(n_neg):
        cycle, _ = _basic_unit(
            f"N{u:03d}", edges, fatten_with=rng, degree_room=degree_room
        )
        labels.update({c: 0 for c in cycle})

    facts = set()
    for a, b in edges:
        assert a != b
        facts.add(fact("E", a, b))
        facts.add(fact("E", b, a))
    db = database(GRAPH_SCHEMA, facts)
    adj = _out_adjacency(db)
    for v, lab in labels.items():
        assert oracle_sun(db, v, adj) == bool(lab), f"label oracle mismatch at {v}"
    meta = {
        "dataset": "sun",
        "seed": seed,
        "n_pos": n_pos,
        "n_neg": n_neg,
        "max_extra_degree": max_extra_degree,
        "attachment": "spoiled sub-units bridge leaf-to-cycle-vertex (degree "
        f"< {max_extra_degree}); bridges are cut edges",
        "features": {"dim": 1, "constant": 1.0},
        "generator_version": GENERATOR_VERSION,
    }
    return DatabaseDocument(db=db, labels=labels, meta=meta)


# ---------------------------------------------------------------------------
# query pattern catalog


def pattern_catalog_lt() -> tuple[PointedDatabase, ...]:
    """The 13 rooted directed patterns on at most 3 values used by the
    local-transitivity experiments: both single edges, every rooting of
    the 2-edge path/fork/join, the three rootings of the chorded triangle,
    and the directed 3-cycle."""
    shapes = [
        [("r", "a")],
        [("a", "r")],
        [("r", "a"), ("a", "b")],
        [("a", "r"), ("r", "b")],
        [("a", "b"), ("b", "r")],
        [("r", "a"), ("r", "b")],
        [("a", "r"), ("a", "b")],
        [("a", "r"), ("b", "r")],
        [("r", "a"), ("b", "a")],
        [("r", "a"), ("a", "b"), ("r", "b")],
        [("a", "r"), ("r", "b"), ("a", "b")],
        [("a", "b"), ("b", "r"), ("a", "r")],
        [("r", "a"), ("a", "b"), ("b", "r")],
    ]
    return tuple(
        PointedDatabase(database(GRAPH_SCHEMA, [fact("E", a, b) for a, b in s]), "r")
        for s in shapes
    )


# ---------------------------------------------------------------------------
# splits


def split(dataset: DatabaseDocument, seed: int, ratios=(0.6, 0.2, 0.2)):
    """Shuffle the labeled vertices and cut once: (train, val, test)."""
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError("need three non-negative ratios")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios sum to {sum(ratios)}, not 1")
    if dataset.labels is None:
        raise ValueError("dataset carries no labels to split")
    examples = sorted(dataset.labels)
    order = _rng(seed).permutation(len(examples))
    shuffled = [examples[i] for i in order]
    a = int(len(examples) * ratios[0])
    b = a + int(len(examples) * ratios[1])
    return tuple(shuffled[:a]), tuple(shuffled[a:b]), tuple(shuffled[b:])
