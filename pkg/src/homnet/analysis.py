"""Bounded-model search over a network's inputs.

`emptiness_bounded` asks whether a network accepts any pointed database of
bounded degree; `subsumption_bounded` asks whether one network's accepted
set sits inside another's.  Both enumerate connected pointed databases up
to a size cap (one canonical representative per isomorphism class, grown
by fact-addition search) and run the network on each.

A layer's output at a value only depends on values reachable within the
query patterns' radius, so a network with connected patterns cannot tell
a database from the ball around its root.  When the size cap covers every
possible ball — cap >= the degree-bounded ball-size bound at the network's
dependence radius — a negative sweep settles the question outright and the
result says so; otherwise the verdict is explicitly "up to the cap".
Networks with a disconnected pattern never get the strong verdict.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterator

from .matching import canonical_key
from .network import Dhn, run
from .relational import Database, Fact, PointedDatabase, Schema, is_connected

# ---------------------------------------------------------------------------
# degree and locality bookkeeping


def value_degree(db: Database, v: str) -> int:
    """Number of facts the value participates in."""
    return sum(1 for f in db.facts if v in f.args)


def max_degree(db: Database) -> int:
    return max((value_degree(db, v) for v in db.adom), default=0)


def network_connected(net: Dhn) -> bool:
    return all(
        is_connected(q.pattern.db) for layer in net.layers for q in layer.queries
    )


def dependence_radius(net: Dhn) -> int:
    """Each layer reads at most (pattern size - 1) steps from a value, so
    the root's final embedding depends on a ball of this radius."""
    widest = max(
        (len(q.pattern.db.adom) for layer in net.layers for q in layer.queries),
        default=1,
    )
    return len(net.layers) * (widest - 1)


def ball_size_bound(schema: Schema, degree_bound: int, radius: int) -> int:
    """Largest possible value count of a radius-ball in a database whose
    values each touch at most `degree_bound` facts."""
    max_arity = max(schema.relations.values(), default=0)
    branching = degree_bound * max(max_arity - 1, 0)
    if branching == 0:
        return 1
    if branching == 1:
        return radius + 1
    return (branching ** (radius + 1) - 1) // (branching - 1)


# ---------------------------------------------------------------------------
# enumeration of connected bounded-degree pointed databases


def enumerate_bounded(
    schema: Schema, degree_bound: int, size_cap: int
) -> Iterator[PointedDatabase]:
    """Connected pointed databases with at most `size_cap` values and every
    value in at most `degree_bound` facts, one canonical representative per
    isomorphism class, in breadth-first (fact count) order.

    Every such database is reached: order its facts so each prefix stays
    connected around the root; prefixes only shrink degrees and sizes, so
    the whole chain lies inside the search space.
    """
    if size_cap < 1:
        return
    seen: set = set()
    queue: deque[PointedDatabase] = deque()

    def admit(pdb: PointedDatabase):
        key = canonical_key(pdb)
        if key in seen:
            return None
        seen.add(key)
        queue.append(pdb)
        return pdb

    root_only = PointedDatabase(Database(schema, frozenset(), frozenset({"w0"})), "w0")
    out = admit(root_only)
    if out is not None:
        yield out
    while queue:
        pdb = queue.popleft()
        for ext in _one_fact_extensions(pdb, degree_bound, size_cap):
            got = admit(ext)
            if got is not None:
                yield got


def _one_fact_extensions(
    pdb: PointedDatabase, degree_bound: int, size_cap: int
) -> Iterator[PointedDatabase]:
    db = pdb.db
    values = sorted(db.adom)
    room = size_cap - len(values)
    for rel, arity in sorted(db.schema.relations.items()):
        fresh = [f"w{len(values) + i}" for i in range(min(room, max(arity - 1, 0)))]
        for args in itertools.product(values + fresh, repeat=arity):
            if not any(a in db.adom for a in args):
                continue  # a fact on fresh values alone would disconnect
            new_fact = Fact(rel, args)
            if new_fact in db.facts:
                continue
            used_fresh = [v for v in fresh if v in args]
            # fresh names must appear in first-occurrence order so every
            # candidate has one spelling
            order_seen = [a for a in args if a in used_fresh]
            canonical_fresh = sorted(set(order_seen), key=order_seen.index)
            if canonical_fresh != fresh[: len(canonical_fresh)]:
                continue
            new_db = Database(db.schema, db.facts | {new_fact}, db.extra_values)
            if any(
                value_degree(new_db, v) > degree_bound for v in set(args)
            ):
                continue
            yield PointedDatabase(new_db, pdb.root)


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class EmptinessResult:
    witness: PointedDatabase | None
    definitive: bool
    checked: int
    degree_bound: int
    size_cap: int

    @property
    def verdict(self) -> str:
        if self.witness is not None:
            return "witness"
        return "empty-definitive" if self.definitive else "empty-bounded"

    def summary(self) -> str:
        if self.witness is not None:
            w = self.witness
            return (
                f"witness after {self.checked} candidates: root {w.root} in {w.db!r}"
            )
        scope = (
            "no accepted database of this degree exists"
            if self.definitive
            else f"none accepted up to {self.size_cap} values"
        )
        return f"{scope} ({self.checked} candidates, degree <= {self.degree_bound})"


@dataclass(frozen=True)
class SubsumptionResult:
    counterexample: PointedDatabase | None
    definitive: bool
    checked: int
    degree_bound: int
    size_cap: int

    @property
    def verdict(self) -> str:
        if self.counterexample is not None:
            return "counterexample"
        return "subsumed-definitive" if self.definitive else "subsumed-bounded"

    def summary(self) -> str:
        if self.counterexample is not None:
            c = self.counterexample
            return (
                f"counterexample after {self.checked} candidates: "
                f"root {c.root} in {c.db!r}"
            )
        scope = (
            "every accepted database of this degree is also accepted"
            if self.definitive
            else f"subsumed up to {self.size_cap} values"
        )
        return f"{scope} ({self.checked} candidates, degree <= {self.degree_bound})"


def _covers_all_balls(net: Dhn, degree_bound: int, size_cap: int) -> bool:
    schema = net.layers[0].queries[0].pattern.db.schema
    return network_connected(net) and size_cap >= ball_size_bound(
        schema, degree_bound, dependence_radius(net)
    )


def emptiness_bounded(net: Dhn, degree_bound: int, size_cap: int) -> EmptinessResult:
    """First accepted connected pointed database within the bounds, if any.

    Acceptance of *some* bounded-degree database always reduces to a
    connected one (the ball around the root), so searching connected
    candidates loses nothing.
    """
    if size_cap < 1:
        raise ValueError("size cap must be at least 1")
    schema = net.layers[0].queries[0].pattern.db.schema
    checked = 0
    for pdb in enumerate_bounded(schema, degree_bound, size_cap):
        checked += 1
        if run(net, pdb).accept:
            return EmptinessResult(pdb, True, checked, degree_bound, size_cap)
    return EmptinessResult(
        None,
        _covers_all_balls(net, degree_bound, size_cap),
        checked,
        degree_bound,
        size_cap,
    )


def subsumption_bounded(
    net1: Dhn, net2: Dhn, degree_bound: int, size_cap: int
) -> SubsumptionResult:
    """First connected pointed database accepted by net1 but not net2."""
    if size_cap < 1:
        raise ValueError("size cap must be at least 1")
    schema = net1.layers[0].queries[0].pattern.db.schema
    checked = 0
    for pdb in enumerate_bounded(schema, degree_bound, size_cap):
        checked += 1
        if run(net1, pdb).accept and not run(net2, pdb).accept:
            return SubsumptionResult(pdb, True, checked, degree_bound, size_cap)
    definitive = _covers_all_balls(net1, degree_bound, size_cap) and _covers_all_balls(
        net2, degree_bound, size_cap
    )
    return SubsumptionResult(None, definitive, checked, degree_bound, size_cap)
