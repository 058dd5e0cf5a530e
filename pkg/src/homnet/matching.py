"""Matching patterns into databases: homomorphisms, injective maps, embeddings.

The enumerator is a plain backtracking search.  Variables (pattern values)
are ordered statically by descending fact incidence; candidates for each
variable come from per-relation indexes on the already-bound positions.
Patterns here are small (a handful of values), targets can be large.

The second half of the module is the count-conversion machinery: pattern
quotients, fact-supersets, canonical forms, and the triangular basis that
rewrites embedding counts as integer combinations of homomorphism counts
(and back).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .relational import (
    Database,
    Fact,
    PointedDatabase,
    Schema,
    SchemaError,
    database,
)


class MatchMode(Enum):
    HOM = "hom"
    INJECTIVE = "inj"
    EMBEDDING = "emb"


@dataclass(frozen=True)
class Homomorphism:
    """A value map from a pattern into a target."""

    mapping: Mapping[str, str]

    def __post_init__(self):
        object.__setattr__(self, "mapping", dict(self.mapping))

    def __getitem__(self, v: str) -> str:
        return self.mapping[v]

    def __eq__(self, other):
        return isinstance(other, Homomorphism) and self.mapping == other.mapping

    def __hash__(self):
        return hash(frozenset(self.mapping.items()))

    def __repr__(self):
        inner = ",".join(f"{k}>{v}" for k, v in sorted(self.mapping.items()))
        return f"Hom({inner})"


@dataclass
class Constraints:
    """Optional inequality and label side-conditions on matches.

    inequalities: unordered pairs of pattern values that must map to
    distinct targets.  labels: per pattern value, a predicate the target
    value must satisfy.
    """

    inequalities: frozenset[frozenset[str]] = frozenset()
    labels: Mapping[str, Callable[[str], bool]] = field(default_factory=dict)

    def __bool__(self):
        return bool(self.inequalities) or bool(self.labels)


NO_CONSTRAINTS = Constraints()


class _TargetIndex:
    """Per-relation position->value->tuples index over a target database."""

    def __init__(self, db: Database):
        self.adom_sorted = sorted(db.adom)
        self.by_rel: dict[str, list[tuple[str, ...]]] = {}
        self.by_pos: dict[str, dict[tuple[int, str], list[tuple[str, ...]]]] = {}
        self.fact_set: frozenset[Fact] = db.facts
        self.facts_touching: dict[str, list[Fact]] = {v: [] for v in db.adom}
        for f in sorted(db.facts, key=lambda f: (f.rel, f.args)):
            self.by_rel.setdefault(f.rel, []).append(f.args)
            pos = self.by_pos.setdefault(f.rel, {})
            for i, v in enumerate(f.args):
                pos.setdefault((i, v), []).append(f.args)
            for v in set(f.args):
                self.facts_touching[v].append(f)


def _variable_order(pattern: Database, root: str | None) -> list[str]:
    incidence: dict[str, int] = {v: 0 for v in pattern.adom}
    for f in pattern.facts:
        for v in set(f.args):
            incidence[v] += 1
    order = sorted(pattern.adom, key=lambda v: (-incidence[v], v))
    if root is not None:
        order.remove(root)
        order.insert(0, root)
    return order


def _check_embedding(pattern: Database, index: _TargetIndex, assign: dict[str, str]) -> bool:
    # reflection: every target fact inside the image must be the image of
    # a pattern fact
    inverse: dict[str, str] = {}
    for pv, tv in assign.items():
        inverse[tv] = pv
    image = set(inverse)
    seen: set[Fact] = set()
    for tv in image:
        for f in index.facts_touching[tv]:
            if f in seen:
                continue
            seen.add(f)
            if all(a in image for a in f.args):
                if Fact(f.rel, tuple(inverse[a] for a in f.args)) not in pattern.facts:
                    return False
    return True


def enumerate_matches(
    F: PointedDatabase,
    D: PointedDatabase,
    mode: MatchMode = MatchMode.HOM,
    constraints: Constraints = NO_CONSTRAINTS,
) -> Iterator[Homomorphism]:
    """Yield each match of F into D exactly once, in a deterministic order."""
    if F.schema != D.schema:
        raise SchemaError("pattern and target use different schemas")
    yield from _search(F.db, D.db, mode, constraints, root=(F.root, D.root))


def enumerate_unrooted(
    F: Database,
    D: Database,
    mode: MatchMode = MatchMode.HOM,
    constraints: Constraints = NO_CONSTRAINTS,
) -> Iterator[Homomorphism]:
    if F.schema != D.schema:
        raise SchemaError("pattern and target use different schemas")
    yield from _search(F, D, mode, constraints, root=None)


def _search(pattern, target, mode, constraints, root):
    index = _TargetIndex(target)
    order = _variable_order(pattern, root[0] if root else None)
    if not order:  # pattern with empty adom: the unique empty map
        yield Homomorphism({})
        return

    facts_of_var: dict[str, list[Fact]] = {v: [] for v in order}
    for f in pattern.facts:
        for v in set(f.args):
            facts_of_var[v].append(f)
    ineq: dict[str, list[str]] = {v: [] for v in order}
    for pair in constraints.inequalities:
        a, b = tuple(pair)
        ineq[a].append(b)
        ineq[b].append(a)

    injective = mode in (MatchMode.INJECTIVE, MatchMode.EMBEDDING)
    assign: dict[str, str] = {}
    used: set[str] = set()

    def candidates(v: str) -> Iterable[str]:
        if root and v == root[0]:
            return [root[1]]
        best: list[str] | None = None
        for f in facts_of_var[v]:
            bound = [(i, assign[a]) for i, a in enumerate(f.args) if a in assign]
            if not bound:
                continue
            # walk the shortest index list, filter on the rest
            key = min(bound, key=lambda iv: len(index.by_pos.get(f.rel, {}).get(iv, ())))
            tuples = index.by_pos.get(f.rel, {}).get(key, ())
            cand = set()
            positions = [i for i, a in enumerate(f.args) if a == v]
            for tup in tuples:
                if any(tup[i] != tv for i, tv in bound):
                    continue
                vals = {tup[i] for i in positions}
                if len(vals) == 1:
                    cand.add(vals.pop())
            if best is None or len(cand) < len(best):
                best = sorted(cand)
            if best is not None and not best:
                return []
        if best is None:
            return index.adom_sorted
        return best

    def consistent(v: str, tv: str) -> bool:
        if injective and tv in used:
            return False
        pred = constraints.labels.get(v)
        if pred is not None and not pred(tv):
            return False
        for w in ineq[v]:
            if w in assign and assign[w] == tv:
                return False
        # every pattern fact with all args now bound must hold in the target
        for f in facts_of_var[v]:
            args = []
            ok = True
            for a in f.args:
                if a == v:
                    args.append(tv)
                elif a in assign:
                    args.append(assign[a])
                else:
                    ok = False
                    break
            if ok and Fact(f.rel, tuple(args)) not in index.fact_set:
                return False
        return True

    def extend(depth: int) -> Iterator[Homomorphism]:
        if depth == len(order):
            if mode is MatchMode.EMBEDDING and not _check_embedding(pattern, index, assign):
                return
            yield Homomorphism(dict(assign))
            return
        v = order[depth]
        for tv in candidates(v):
            if not consistent(v, tv):
                continue
            assign[v] = tv
            if injective:
                used.add(tv)
            yield from extend(depth + 1)
            del assign[v]
            if injective:
                used.discard(tv)

    yield from extend(0)


def count_matches(
    F: PointedDatabase,
    D: PointedDatabase,
    mode: MatchMode = MatchMode.HOM,
    constraints: Constraints = NO_CONSTRAINTS,
) -> int:
    return sum(1 for _ in enumerate_matches(F, D, mode, constraints))


def count_unrooted(
    F: Database,
    D: Database,
    mode: MatchMode = MatchMode.HOM,
    constraints: Constraints = NO_CONSTRAINTS,
) -> int:
    return sum(1 for _ in enumerate_unrooted(F, D, mode, constraints))


# ---------------------------------------------------------------------------
# partitions and quotients


def partitions_of(values: Iterable[str]) -> Iterator[tuple[frozenset[str], ...]]:
    """All set partitions of ``values``, deterministically ordered."""
    vals = sorted(values)

    def rec(i: int, blocks: list[list[str]]) -> Iterator[tuple[frozenset[str], ...]]:
        if i == len(vals):
            yield tuple(frozenset(b) for b in blocks)
            return
        v = vals[i]
        for b in blocks:
            b.append(v)
            yield from rec(i + 1, blocks)
            b.pop()
        blocks.append([v])
        yield from rec(i + 1, blocks)
        blocks.pop()

    yield from rec(0, [])


def block_name(block: frozenset[str]) -> str:
    return "+".join(sorted(block))


def quotient(F: PointedDatabase, partition: Sequence[frozenset[str]]) -> PointedDatabase:
    """Merge the values inside each block of the partition.

    A fact holds between blocks iff some representatives realize it; the
    root becomes the block containing the old root.
    """
    blocks = list(partition)
    flat = [v for b in blocks for v in b]
    if len(flat) != len(set(flat)) or set(flat) != set(F.db.adom):
        raise ValueError("not a partition of the pattern's active domain")
    of: dict[str, str] = {}
    for b in blocks:
        name = block_name(b)
        for v in b:
            of[v] = name
    facts = frozenset(Fact(f.rel, tuple(of[a] for a in f.args)) for f in F.db.facts)
    used = {a for f in facts for a in f.args}
    extras = frozenset(block_name(b) for b in blocks) - used
    return PointedDatabase(Database(F.db.schema, facts, extras), of[F.root])


# ---------------------------------------------------------------------------
# isomorphism and canonical forms


def canonical_key(pdb: PointedDatabase, labels: Mapping[str, object] | None = None):
    """A hashable key equal for exactly the isomorphic pointed databases.

    Brute force over root-fixing bijections; fine for patterns with a
    handful of values.  Optional ``labels`` refine the isomorphism: a
    bijection must also carry each value's label onto an equal label.
    """
    values = sorted(pdb.db.adom)
    others = [v for v in values if v != pdb.root]
    rel_order = sorted(pdb.db.schema.relations)
    best = None
    for perm in itertools.permutations(others):
        idx = {pdb.root: 0}
        for i, v in enumerate(perm, start=1):
            idx[v] = i
        enc_facts = tuple(
            sorted((rel_order.index(f.rel), tuple(idx[a] for a in f.args)) for f in pdb.db.facts)
        )
        if labels is None:
            enc = enc_facts
        else:
            ordered = [pdb.root, *perm]
            enc = (enc_facts, tuple(labels.get(v) for v in ordered))
        if best is None or enc < best:
            best = enc
    if best is None:  # no values at all (patterns always have a root, but be safe)
        best = ((), ()) if labels is not None else ()
    return (len(values), best)


def pointed_isomorphic(A: PointedDatabase, B: PointedDatabase) -> bool:
    if A.db.schema != B.db.schema:
        return False
    if len(A.db.adom) != len(B.db.adom) or len(A.db.facts) != len(B.db.facts):
        return False
    return canonical_key(A) == canonical_key(B)


def all_possible_facts(schema: Schema, values: Iterable[str]) -> list[Fact]:
    vals = sorted(values)
    out = []
    for rel in sorted(schema.relations):
        for args in itertools.product(vals, repeat=schema.arity(rel)):
            out.append(Fact(rel, args))
    return out


def fact_supersets(F: PointedDatabase) -> Iterator[PointedDatabase]:
    """All databases with the same values and a superset of F's facts."""
    missing = [f for f in all_possible_facts(F.db.schema, F.db.adom) if f not in F.db.facts]
    base = F.db.facts
    for r in range(len(missing) + 1):
        for extra in itertools.combinations(missing, r):
            facts = base | frozenset(extra)
            used = {a for f in facts for a in f.args}
            extras = frozenset(F.db.adom) - used
            yield PointedDatabase(Database(F.db.schema, facts, extras), F.root)


# ---------------------------------------------------------------------------
# hom-count <-> emb-count bases
#
# Every homomorphism factors as a quotient projection followed by an
# injective map; every injective map factors as a fact-superset followed
# by an embedding.  Over a family closed under both operations this gives
# a unit-triangular integer system between hom counts and embedding
# counts, ordered by (fewer values first, more facts first).
#
# The family used here is every pointed database over the schema with at
# most n values, up to isomorphism.  That set is closed under quotients
# and supersets, and it can be shared by all patterns of the same size,
# which matters when converting many patterns in a row.


def enumerate_patterns(schema: Schema, max_values: int) -> list[PointedDatabase]:
    """Canonical representatives of every pointed database with <= n values."""
    out: list[PointedDatabase] = []
    seen: set = set()
    for k in range(1, max_values + 1):
        values = [f"w{i}" for i in range(k)]
        possible = all_possible_facts(schema, values)
        for r in range(len(possible) + 1):
            for chosen in itertools.combinations(possible, r):
                facts = frozenset(chosen)
                used = {a for f in facts for a in f.args}
                db = Database(schema, facts, frozenset(values) - used)
                pdb = PointedDatabase(db, values[0])
                key = canonical_key(pdb)
                if key not in seen:
                    seen.add(key)
                    out.append(pdb)
    out.sort(key=_family_order)
    return out


def _family_order(pdb: PointedDatabase):
    return (len(pdb.db.adom), -len(pdb.db.facts), canonical_key(pdb))


_SYSTEM_CACHE: dict = {}


def _basis_system(schema: Schema, max_values: int):
    """(members, index-of-key, M) with hom(A) = sum_C M[A,C] * emb(C).

    M is stored as {(row_index, col_index): positive int} and is
    unit-lower-triangular in the member order.
    """
    cache_key = (schema, max_values)
    if cache_key in _SYSTEM_CACHE:
        return _SYSTEM_CACHE[cache_key]
    n_possible = len(all_possible_facts(schema, [f"w{i}" for i in range(max_values)]))
    if n_possible > 12:
        raise ValueError(
            f"basis family over {max_values} values would enumerate 2^{n_possible} "
            "fact sets; this conversion is meant for small patterns"
        )
    members = enumerate_patterns(schema, max_values)
    index = {canonical_key(p): i for i, p in enumerate(members)}
    M: dict[tuple[int, int], int] = {}
    for ai, A in enumerate(members):
        for P in partitions_of(A.db.adom):
            q = quotient(A, P)
            for H in fact_supersets(q):
                ci = index[canonical_key(H)]
                assert ci <= ai, "matrix not triangular in family order"
                M[(ai, ci)] = M.get((ai, ci), 0) + 1
    for i in range(len(members)):
        assert M.get((i, i), 0) == 1, "diagonal entry is not 1"
    _SYSTEM_CACHE[cache_key] = (members, index, M)
    return members, index, M


def hom_from_emb_basis(F: PointedDatabase) -> list[tuple[PointedDatabase, Fraction]]:
    """Patterns G_i and coefficients c_i with hom(F, D) = sum c_i * emb(G_i, D)."""
    members, index, M = _basis_system(F.db.schema, len(F.db.adom))
    fi = index[canonical_key(F)]
    out = []
    for ci, pdb in enumerate(members):
        c = M.get((fi, ci), 0)
        if c:
            out.append((pdb, Fraction(c)))
    return out


def emb_from_hom_basis(F: PointedDatabase) -> list[tuple[PointedDatabase, Fraction]]:
    """Patterns G_i and coefficients c_i with emb(F, D) = sum c_i * hom(G_i, D).

    Solves y^T M = e_F over the family; M is unit-triangular, so the solve
    is a back-substitution from the largest member down, and the results
    are integers.
    """
    members, index, M = _basis_system(F.db.schema, len(F.db.adom))
    fi = index[canonical_key(F)]
    n = len(members)
    cols: dict[int, list[tuple[int, int]]] = {}
    for (ai, ci), m in M.items():
        if ai != ci:
            cols.setdefault(ci, []).append((ai, m))
    y = [Fraction(0)] * n
    for ci in range(n - 1, -1, -1):
        acc = Fraction(1) if ci == fi else Fraction(0)
        for ai, m in cols.get(ci, ()):
            if y[ai]:
                acc -= y[ai] * m
        y[ci] = acc  # diagonal is 1
    return [(members[i], y[i]) for i in range(n) if y[i]]
