"""Schemas, facts, and (pointed / embedded) relational databases.

Everything downstream — matching, logic evaluation, network evaluation —
operates on the types in this module.  All of them are immutable after
construction and safe to share.

Values are opaque interned strings.  The active domain of a database is
the set of values occurring in its facts, plus any explicitly declared
isolated values (patterns such as a single vertex with no facts need
those).
"""

from __future__ import annotations

import json
import math
import sys
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence


class SchemaError(ValueError):
    """Raised when a fact or database violates its schema."""


@dataclass(frozen=True)
class Schema:
    """A finite set of relation names with arities.

    >>> s = Schema({"E": 2, "P": 1})
    >>> s.arity("E")
    2
    """

    relations: Mapping[str, int]

    def __post_init__(self):
        rels = dict(self.relations)
        for name, ar in rels.items():
            if not isinstance(name, str) or not name:
                raise SchemaError(f"bad relation name: {name!r}")
            if not isinstance(ar, int) or ar < 0:
                raise SchemaError(f"arity of {name} must be a non-negative integer, got {ar!r}")
        object.__setattr__(self, "relations", rels)

    def arity(self, name: str) -> int:
        try:
            return self.relations[name]
        except KeyError:
            raise SchemaError(f"unknown relation {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self.relations

    def __eq__(self, other):
        return isinstance(other, Schema) and dict(self.relations) == dict(other.relations)

    def __hash__(self):
        return hash(frozenset(self.relations.items()))


GRAPH_SCHEMA = Schema({"E": 2})


@dataclass(frozen=True)
class Fact:
    """One relational fact R(v1, ..., vn)."""

    rel: str
    args: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "rel", sys.intern(self.rel))
        object.__setattr__(self, "args", tuple(sys.intern(a) for a in self.args))

    def __repr__(self):
        return f"{self.rel}({','.join(self.args)})"


def fact(rel: str, *args: str) -> Fact:
    """Shorthand constructor: fact("E", "a", "b")."""
    return Fact(rel, tuple(args))


@dataclass(frozen=True)
class Database:
    """A finite set of facts over a schema, with optional isolated values.

    ``extra_values`` declares values that belong to the active domain
    without occurring in any fact.  Plain databases loaded from facts
    never need it; query patterns do.
    """

    schema: Schema
    facts: frozenset[Fact]
    extra_values: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        facts = frozenset(self.facts)
        for f in facts:
            if f.rel not in self.schema:
                raise SchemaError(f"fact {f} uses relation not in schema")
            if len(f.args) != self.schema.arity(f.rel):
                raise SchemaError(
                    f"fact {f} has {len(f.args)} args, schema says {self.schema.arity(f.rel)}"
                )
        object.__setattr__(self, "facts", facts)
        object.__setattr__(
            self, "extra_values", frozenset(sys.intern(v) for v in self.extra_values)
        )

    @property
    def adom(self) -> frozenset[str]:
        values = set(self.extra_values)
        for f in self.facts:
            values.update(f.args)
        return frozenset(values)

    def facts_of(self, rel: str) -> list[Fact]:
        return [f for f in self.facts if f.rel == rel]

    def __repr__(self):
        shown = ",".join(sorted(map(repr, self.facts)))
        iso = f" +{sorted(self.extra_values)}" if self.extra_values else ""
        return f"Database({{{shown}}}{iso})"


def database(schema: Schema, facts: Iterable[Fact] = (), values: Iterable[str] = ()) -> Database:
    return Database(schema, frozenset(facts), frozenset(values))


@dataclass(frozen=True)
class PointedDatabase:
    """A database with a distinguished root value."""

    db: Database
    root: str

    def __post_init__(self):
        object.__setattr__(self, "root", sys.intern(self.root))
        if self.root not in self.db.adom:
            raise SchemaError(f"root {self.root!r} not in active domain")

    @property
    def schema(self) -> Schema:
        return self.db.schema


def pointed(db: Database, root: str) -> PointedDatabase:
    return PointedDatabase(db, root)


Vector = tuple  # of float or Fraction; length == dim


@dataclass(frozen=True)
class EmbeddedDatabase:
    """A database together with a d-dimensional vector per value.

    ``dim`` may be 0: the empty embedding every network run starts from.
    """

    db: Database
    dim: int
    embedding: Mapping[str, Vector]

    def __post_init__(self):
        emb = dict(self.embedding)
        missing = self.db.adom - emb.keys()
        if missing:
            raise SchemaError(f"embedding missing values: {sorted(missing)[:5]}")
        for v, vec in emb.items():
            if len(vec) != self.dim:
                raise SchemaError(f"embedding of {v!r} has length {len(vec)}, expected {self.dim}")
        object.__setattr__(self, "embedding", emb)

    def vec(self, value: str) -> Vector:
        return self.embedding[value]


def empty_embedding(db: Database) -> EmbeddedDatabase:
    """The dimension-0 embedding (every value maps to the empty vector)."""
    return EmbeddedDatabase(db, 0, {v: () for v in db.adom})


def constant_embedding(db: Database, vec: Sequence) -> EmbeddedDatabase:
    vec = tuple(vec)
    return EmbeddedDatabase(db, len(vec), {v: vec for v in db.adom})


# ---------------------------------------------------------------------------
# structural measures


def adom(db: Database) -> frozenset[str]:
    """Active domain: the values used in facts plus declared isolated values."""
    return db.adom


def degree(db: Database) -> int:
    """Maximum number of facts any single value occurs in (0 if no facts)."""
    tally: dict[str, int] = {}
    for f in db.facts:
        for v in set(f.args):
            tally[v] = tally.get(v, 0) + 1
    return max(tally.values(), default=0)


def gaifman(db: Database) -> dict[str, set[str]]:
    """Co-occurrence adjacency over adom(db).

    Two distinct values are adjacent iff they appear together in some
    fact.  No self-loops: a value repeating inside one fact adds no edge.
    """
    adj: dict[str, set[str]] = {v: set() for v in db.adom}
    for f in db.facts:
        args = list(set(f.args))
        for i, u in enumerate(args):
            for w in args[i + 1 :]:
                adj[u].add(w)
                adj[w].add(u)
    return adj


def _bfs_dist(adj: Mapping[str, set[str]], start: str) -> dict[str, int]:
    dist = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def diameter(pdb: PointedDatabase) -> float:
    """Eccentricity of the root in the Gaifman graph; inf if disconnected."""
    adj = gaifman(pdb.db)
    dist = _bfs_dist(adj, pdb.root)
    if len(dist) < len(adj):
        return math.inf
    return float(max(dist.values(), default=0))


def is_connected(db: Database) -> bool:
    """True iff the Gaifman graph is connected (empty database counts as connected)."""
    values = db.adom
    if not values:
        return True
    adj = gaifman(db)
    start = next(iter(values))
    return len(_bfs_dist(adj, start)) == len(values)


# ---------------------------------------------------------------------------
# JSON interchange
#
# {"schema": {"E": 2}, "facts": [["E","a","b"]], "root": "a"?,
#  "values": [...]?, "embedding": {"a": [0.0]}?, "labels": {"a": 1}?,
#  "meta": {...}?}


@dataclass
class DatabaseDocument:
    """Everything one database JSON file can carry."""

    db: Database
    root: str | None = None
    embedding: dict[str, tuple] | None = None
    labels: dict[str, int] | None = None
    meta: dict | None = None

    @property
    def pointed(self) -> PointedDatabase:
        if self.root is None:
            raise ValueError("document has no root")
        return PointedDatabase(self.db, self.root)

    def embedded(self) -> EmbeddedDatabase:
        if self.embedding is None:
            raise ValueError("document has no embedding")
        dim = len(next(iter(self.embedding.values()), ()))
        return EmbeddedDatabase(self.db, dim, self.embedding)


def _num_to_json(x):
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return float(x)


def _num_from_json(x):
    if isinstance(x, str):
        num, _, den = x.partition("/")
        return Fraction(int(num), int(den) if den else 1)
    return float(x)


def document_to_obj(doc: DatabaseDocument) -> dict:
    db = doc.db
    obj: dict = {
        "schema": dict(sorted(db.schema.relations.items())),
        "facts": sorted([f.rel, *f.args] for f in db.facts),
    }
    if db.extra_values:
        obj["values"] = sorted(db.extra_values)
    if doc.root is not None:
        obj["root"] = doc.root
    if doc.embedding is not None:
        obj["embedding"] = {v: [_num_to_json(x) for x in vec] for v, vec in sorted(doc.embedding.items())}
    if doc.labels is not None:
        obj["labels"] = dict(sorted(doc.labels.items()))
    if doc.meta is not None:
        obj["meta"] = doc.meta
    return obj


def document_from_obj(obj: dict) -> DatabaseDocument:
    schema = Schema(obj["schema"])
    facts = frozenset(Fact(row[0], tuple(row[1:])) for row in obj.get("facts", ()))
    db = Database(schema, facts, frozenset(obj.get("values", ())))
    embedding = None
    if "embedding" in obj:
        embedding = {v: tuple(_num_from_json(x) for x in vec) for v, vec in obj["embedding"].items()}
    labels = None
    if "labels" in obj:
        labels = {v: int(y) for v, y in obj["labels"].items()}
    return DatabaseDocument(
        db=db,
        root=obj.get("root"),
        embedding=embedding,
        labels=labels,
        meta=obj.get("meta"),
    )


def save_document(doc: DatabaseDocument, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(document_to_obj(doc), fh, indent=1)
        fh.write("\n")


def load_document(path: str) -> DatabaseDocument:
    with open(path) as fh:
        return document_from_obj(json.load(fh))
