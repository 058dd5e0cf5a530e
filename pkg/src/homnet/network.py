"""Homomorphism-query networks: layers, forward evaluation, conversion.

A network turns a pointed database into an accept/reject decision by
repeatedly re-embedding every value.  Each layer owns a few rooted
pattern queries; evaluating a query at a value aggregates, over all
matches of the pattern rooted there, the componentwise product of the
per-pattern-value transform outputs.  A combine function then merges the
query results into the value's next embedding.

Everything here runs in two modes: exact (Fraction weights and
embeddings, used by the compilers and the bounded-model analysis) and
float (trained models).  The mode is inferred from the weights unless
forced.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .matching import (
    MatchMode,
    all_possible_facts,
    block_name,
    canonical_key,
    enumerate_matches,
    fact_supersets,
    partitions_of,
    quotient,
)
from .neural import (
    IDENTITY,
    RELU_STAR,
    Fnn,
    float_layer,
    fnn_forward,
    fnn_from_obj,
    fnn_init,
    fnn_to_float,
    fnn_to_obj,
    layer_norm,
    leaky,
    rational_fnn,
    rational_layer,
)
from .relational import (
    GRAPH_SCHEMA,
    DatabaseDocument,
    EmbeddedDatabase,
    PointedDatabase,
    SchemaError,
    _num_from_json,
    _num_to_json,
    database,
    document_from_obj,
    document_to_obj,
    empty_embedding,
    fact,
    pointed,
)


class Agg(Enum):
    SUM = "sum"
    MAX = "max"
    MEAN = "mean"


def _as_factors(spec) -> tuple[Fnn, ...]:
    if isinstance(spec, Fnn):
        return (spec,)
    factors = tuple(spec)
    if not factors or not all(isinstance(f, Fnn) for f in factors):
        raise TypeError("transform must be an Fnn or a non-empty sequence of Fnns")
    return factors


@dataclass
class HomQuery:
    """A rooted pattern with one transform per pattern value.

    ``transforms`` maps each value to an Fnn, or to a sequence of Fnns
    whose outputs are multiplied componentwise (the converter below
    produces such products when it merges pattern values).
    """

    pattern: PointedDatabase
    transforms: Mapping[str, object]
    agg: Agg
    mode: MatchMode = MatchMode.HOM

    def __post_init__(self):
        normalized = {v: _as_factors(t) for v, t in self.transforms.items()}
        if set(normalized) != set(self.pattern.db.adom):
            missing = sorted(self.pattern.db.adom - normalized.keys())
            extra = sorted(normalized.keys() - self.pattern.db.adom)
            raise SchemaError(f"transforms do not cover the pattern: missing {missing}, extra {extra}")
        dims = {(f.in_dim, f.out_dim) for fs in normalized.values() for f in fs}
        if len({d for d, _ in dims}) > 1 or len({d for _, d in dims}) > 1:
            raise SchemaError(f"transforms disagree on dimensions: {sorted(dims)}")
        self.transforms = dict(sorted(normalized.items()))

    def factors(self, value: str) -> tuple[Fnn, ...]:
        return self.transforms[value]

    @property
    def in_dim(self) -> int:
        return next(iter(self.transforms.values()))[0].in_dim

    @property
    def out_dim(self) -> int:
        return next(iter(self.transforms.values()))[0].out_dim

    @property
    def exact(self) -> bool:
        return all(f.exact for fs in self.transforms.values() for f in fs)


@dataclass(frozen=True)
class RatioComparatorCombine:
    """Exact threshold comparison used by ratio-formula networks.

    Input layout: coordinate 0 is a mean-aggregated ratio, coordinate 1
    is 1 when the defining match set was non-empty and 0 otherwise, the
    remaining ``copy_dim`` coordinates pass through.  The output equals
    the pass-through block with coordinate ``coord`` overwritten by the
    comparison result; an empty match set decides the comparison by
    convention (non-strict -> 1, strict -> 0).
    """

    coord: int
    threshold: Fraction
    strict: bool
    copy_dim: int

    def __post_init__(self):
        if not 0 <= self.coord < self.copy_dim:
            raise ValueError("comparator coordinate out of range")

    @property
    def in_dim(self) -> int:
        return self.copy_dim + 2

    @property
    def out_dim(self) -> int:
        return self.copy_dim

    @property
    def exact(self) -> bool:
        return True


def apply_combine(combine, x, exact: bool):
    if isinstance(combine, Fnn):
        return fnn_forward(combine, x)
    ratio, hit = x[0], x[1]
    out = list(x[2:])
    if hit == 0:
        result = 0 if combine.strict else 1
    elif combine.strict:
        result = 1 if ratio > combine.threshold else 0
    else:
        result = 1 if ratio >= combine.threshold else 0
    out[combine.coord] = Fraction(result) if exact else float(result)
    if exact:
        return tuple(out)
    return np.asarray(out, dtype=float)


@dataclass
class DhnLayer:
    queries: tuple[HomQuery, ...]
    combine: object  # Fnn | RatioComparatorCombine
    norm: tuple[np.ndarray, np.ndarray] | None = None  # LayerNorm (gamma, beta), float mode only

    def __post_init__(self):
        self.queries = tuple(self.queries)
        if not self.queries:
            raise SchemaError("a layer needs at least one query")
        if len({q.in_dim for q in self.queries}) != 1:
            raise SchemaError("queries of one layer must share their input dim")
        total = sum(q.out_dim for q in self.queries)
        if self.combine.in_dim != total:
            raise SchemaError(
                f"combine expects {self.combine.in_dim} inputs, queries produce {total}"
            )
        if self.norm is not None:
            gamma, beta = self.norm
            self.norm = (np.asarray(gamma, dtype=float), np.asarray(beta, dtype=float))
            if self.norm[0].shape != (self.out_dim,) or self.norm[1].shape != (self.out_dim,):
                raise SchemaError("layer norm parameters must match the combine output dim")

    @property
    def in_dim(self) -> int:
        return self.queries[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.combine.out_dim

    @property
    def exact(self) -> bool:
        return self.norm is None and self.combine.exact and all(q.exact for q in self.queries)


@dataclass(frozen=True)
class Classifier:
    """Final decision: optionally an Fnn head, then a coordinate threshold."""

    net: Fnn | None = None
    coord: int = 0
    threshold: object = Fraction(1)
    strict: bool = False  # False: accept iff value >= threshold; True: strictly >

    @property
    def exact(self) -> bool:
        head = self.net is None or self.net.exact
        return head and not isinstance(self.threshold, float)


def apply_classifier(clf: Classifier, vec):
    """Return (accept, score) for one final root embedding."""
    if clf.net is not None:
        vec = fnn_forward(clf.net, vec)
    score = vec[clf.coord]
    accept = score > clf.threshold if clf.strict else score >= clf.threshold
    return bool(accept), score


@dataclass
class Dhn:
    layers: tuple[DhnLayer, ...]
    classify: Classifier

    def __post_init__(self):
        self.layers = tuple(self.layers)
        if not self.layers:
            raise SchemaError("a network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if b.in_dim != a.out_dim:
                raise SchemaError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
        last = self.layers[-1].out_dim
        clf = self.classify
        if clf.net is not None and clf.net.in_dim != last:
            raise SchemaError(f"classifier expects {clf.net.in_dim} inputs, network produces {last}")
        if clf.net is None and not 0 <= clf.coord < last:
            raise SchemaError("classifier coordinate out of range")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def exact(self) -> bool:
        return self.classify.exact and all(l.exact for l in self.layers)


@dataclass(frozen=True)
class SimpleFlag:
    """Syntactic witness for the decidable fragment of networks."""

    simple: bool
    problems: tuple[str, ...] = ()

    def __bool__(self):
        return self.simple


def simple_flag(net: Dhn) -> SimpleFlag:
    """Check that every FNN is one rational affine stage under ReluStar
    and the classifier thresholds a single raw coordinate."""
    problems = []

    def check_fnn(f: Fnn, what: str):
        if len(f.layers) != 1:
            problems.append(f"{what} has {len(f.layers)} affine stages")
        elif f.layers[0].act != RELU_STAR:
            problems.append(f"{what} uses {f.layers[0].act!r}, not ReluStar")
        if not f.exact:
            problems.append(f"{what} has float weights")

    for i, layer in enumerate(net.layers, start=1):
        for j, q in enumerate(layer.queries):
            for f in {f for fs in q.transforms.values() for f in fs}:
                check_fnn(f, f"layer {i} query {j} transform")
        if isinstance(layer.combine, Fnn):
            check_fnn(layer.combine, f"layer {i} combine")
        else:
            problems.append(f"layer {i} combine is a ratio comparator, not an FNN")
        if layer.norm is not None:
            problems.append(f"layer {i} applies LayerNorm")
    if net.classify.net is not None:
        problems.append("classifier runs an FNN before thresholding")
    if isinstance(net.classify.threshold, float):
        problems.append("classifier threshold is a float")
    return SimpleFlag(not problems, tuple(problems))


# ---------------------------------------------------------------------------
# forward evaluation


def _embedding_exact(emb: EmbeddedDatabase) -> bool:
    return all(not isinstance(x, float) for vec in emb.embedding.values() for x in vec)


def _pairwise(items: list, op):
    """Balanced reduction; keeps float products/sums stable and the
    result independent of the number of accumulation steps."""
    while len(items) > 1:
        items = [
            op(items[i], items[i + 1]) if i + 1 < len(items) else items[i]
            for i in range(0, len(items), 2)
        ]
    return items[0]


def _mul_exact(a: tuple, b: tuple) -> tuple:
    return tuple(x * y for x, y in zip(a, b))


def _transform_value(factors: tuple[Fnn, ...], vec, exact: bool):
    outs = [fnn_forward(f, vec) for f in factors]
    if exact:
        return _pairwise([tuple(o) for o in outs], _mul_exact)
    return _pairwise([np.asarray(o, dtype=float) for o in outs], np.multiply)


def eval_query(
    q: HomQuery,
    target: EmbeddedDatabase,
    root: str,
    exact: bool | None = None,
    tf_cache: dict | None = None,
):
    """Aggregate, over matches of the pattern rooted at ``root``, the
    componentwise product of the transform outputs along each match.

    Empty match sets aggregate to the zero vector under every
    aggregation.  Returns a tuple of Fractions (exact) or a float array.
    ``tf_cache`` optionally shares the (pattern value, target value)
    transform memo across calls that reuse the same query and target —
    the per-root calls of one layer pass, chiefly.
    """
    if q.pattern.db.schema != target.db.schema:
        raise SchemaError("query pattern and target use different schemas")
    if target.dim != q.in_dim:
        raise SchemaError(f"target embedding has dim {target.dim}, query expects {q.in_dim}")
    if exact is None:
        exact = q.exact and _embedding_exact(target)
    d = q.out_dim
    values = sorted(q.pattern.db.adom)  # fixed product order
    cache: dict[tuple[str, str], object] = {} if tf_cache is None else tf_cache

    def mu(v: str, u: str):
        key = (v, u)
        if key not in cache:
            vec = target.vec(u)
            if not exact:
                vec = np.asarray(vec, dtype=float)
            cache[key] = _transform_value(q.factors(v), vec, exact)
        return cache[key]

    total = None
    best = None
    count = 0
    zero = tuple(Fraction(0) for _ in range(d)) if exact else np.zeros(d)
    for h in enumerate_matches(q.pattern, pointed(target.db, root), q.mode):
        parts = [mu(v, h[v]) for v in values]
        prod = _pairwise(parts, _mul_exact if exact else np.multiply)
        count += 1
        if q.agg is Agg.MAX:
            if best is None:
                best = prod
            elif exact:
                best = tuple(max(a, b) for a, b in zip(best, prod))
            else:
                best = np.maximum(best, prod)
        else:
            if exact and not any(prod):
                continue
            if total is None:
                total = prod
            elif exact:
                total = tuple(a + b for a, b in zip(total, prod))
            else:
                total = total + prod
    if q.agg is Agg.MAX:
        return zero if best is None else best
    if total is None:
        total = zero
    elif count and q.agg is Agg.MEAN:
        if exact:
            total = tuple(x / count for x in total)
        else:
            total = total / count
    return total


def layer_apply(layer: DhnLayer, target: EmbeddedDatabase, exact: bool | None = None) -> EmbeddedDatabase:
    """Re-embed every value: combine(concatenated query results at it).

    Query results are memoized per (query object, root) within this one
    pass, so a query shared between slots is evaluated once per root.
    """
    if exact is None:
        exact = layer.exact and _embedding_exact(target)
    if layer.norm is not None and exact:
        raise ValueError("LayerNorm is float-only; run the layer in float mode")
    memo: dict[tuple[int, str], object] = {}
    tf_caches: dict[int, dict] = {}
    out = {}
    for u in sorted(target.db.adom):
        parts = []
        for q in layer.queries:
            key = (id(q), u)
            if key not in memo:
                memo[key] = eval_query(
                    q, target, u, exact, tf_cache=tf_caches.setdefault(id(q), {})
                )
            parts.append(memo[key])
        if exact:
            x: object = tuple(itertools.chain.from_iterable(parts))
        else:
            x = np.concatenate([np.asarray(p, dtype=float) for p in parts])
        y = apply_combine(layer.combine, x, exact)
        if layer.norm is not None:
            gamma, beta = layer.norm
            y = layer_norm(np.asarray(y, dtype=float), gamma, beta)
        out[u] = tuple(y) if exact else tuple(float(t) for t in y)
    return EmbeddedDatabase(target.db, layer.out_dim, out)


@dataclass(frozen=True)
class RunResult:
    accept: bool
    score: object
    trace: tuple[EmbeddedDatabase, ...]


def run(net: Dhn, pdb: PointedDatabase, features: EmbeddedDatabase | None = None) -> RunResult:
    """Forward pass from the empty (or given) embedding; classify the root.

    Compiled networks start from the dimension-0 embedding; trained
    networks take their input features through ``features``.
    """
    if features is None:
        emb = empty_embedding(pdb.db)
    else:
        if features.db != pdb.db:
            raise SchemaError("features belong to a different database")
        emb = features
    if emb.dim != net.in_dim:
        raise SchemaError(f"network expects input dim {net.in_dim}, got {emb.dim}")
    exact = net.exact and _embedding_exact(emb)
    if not exact:
        net = network_to_float(net)
    trace = [emb]
    for layer in net.layers:
        emb = layer_apply(layer, emb, exact)
        trace.append(emb)
    accept, score = apply_classifier(net.classify, emb.vec(pdb.root))
    return RunResult(accept, score, tuple(trace))


def network_to_float(net: Dhn) -> Dhn:
    """A copy with every FNN in float weights (thresholds become floats)."""

    def conv_q(q: HomQuery) -> HomQuery:
        tf = {v: tuple(fnn_to_float(f) for f in fs) for v, fs in q.transforms.items()}
        return HomQuery(q.pattern, tf, q.agg, q.mode)

    layers = []
    for layer in net.layers:
        com = fnn_to_float(layer.combine) if isinstance(layer.combine, Fnn) else layer.combine
        layers.append(DhnLayer(tuple(conv_q(q) for q in layer.queries), com, layer.norm))
    clf = net.classify
    head = fnn_to_float(clf.net) if clf.net is not None else None
    return Dhn(tuple(layers), Classifier(head, clf.coord, float(clf.threshold), clf.strict))


# ---------------------------------------------------------------------------
# embedding-mode -> homomorphism-mode conversion (sum aggregation)
#
# Over any target, a sum-aggregated embedding query equals an integer
# combination of sum-aggregated homomorphism queries.  The two moves are
# the classic count decompositions, lifted to weighted sums:
#
#   hom-sum(F, mu) = sum over partitions P of adom(F) of
#                    inj-sum(F/P, products of merged transforms)
#   inj-sum(F, mu) = sum over fact-supersets H of F of emb-sum(H, mu)
#
# so emb-sum(F) = hom-sum(F) minus every non-trivial (P, H) term, expanded
# recursively.  Merged pattern values multiply their transforms, which is
# why HomQuery admits transform products.


def _labels_after_quotient(labels: Mapping[str, tuple[int, ...]], partition) -> dict[str, tuple[int, ...]]:
    return {
        block_name(b): tuple(sorted(itertools.chain.from_iterable(labels[v] for v in b)))
        for b in partition
    }


def _emb_expansion(pdb: PointedDatabase, labels: dict[str, tuple[int, ...]], memo: dict):
    """emb-sum of (pattern, transform labels) as {canonical: (pattern, labels, coeff)}."""
    key = canonical_key(pdb, labels)
    if key in memo:
        return memo[key]
    out: dict = {key: [pdb, labels, Fraction(1)]}
    trivial_facts = pdb.db.facts
    for part in partitions_of(pdb.db.adom):
        base = quotient(pdb, part)
        merged = _labels_after_quotient(labels, part)
        discrete = len(part) == len(pdb.db.adom)
        for sup in fact_supersets(base):
            if discrete and sup.db.facts == trivial_facts:
                continue  # the term that is emb-sum of pdb itself
            for k, (p, l, c) in _emb_expansion(sup, merged, memo).items():
                if k in out:
                    out[k][2] -= c
                else:
                    out[k] = [p, l, -c]
    out = {k: v for k, v in out.items() if v[2] != 0}
    memo[key] = out
    return out


def _expand_embedding_query(q: HomQuery) -> list[tuple[HomQuery, Fraction]]:
    n_possible = len(all_possible_facts(q.pattern.db.schema, q.pattern.db.adom))
    if n_possible > 12:
        raise ValueError(
            f"pattern admits {n_possible} possible facts; exact conversion is limited to 12 "
            "(use smaller patterns)"
        )
    factor_list: list[Fnn] = []
    index: dict[int, int] = {}
    labels: dict[str, tuple[int, ...]] = {}
    for v in sorted(q.pattern.db.adom):
        ids = []
        for f in q.factors(v):
            if id(f) not in index:
                index[id(f)] = len(factor_list)
                factor_list.append(f)
            ids.append(index[id(f)])
        labels[v] = tuple(sorted(ids))
    memo: dict = {}
    expansion = _emb_expansion(q.pattern, labels, memo)
    out = []
    for key in sorted(expansion):
        p, lab, coeff = expansion[key]
        transforms = {v: tuple(factor_list[i] for i in lab[v]) for v in p.db.adom}
        out.append((HomQuery(p, transforms, Agg.SUM, MatchMode.HOM), coeff))
    return out


def den_to_dhn_sum(net: Dhn) -> Dhn:
    """Replace every embedding-mode query by homomorphism-mode queries.

    Exact: the converted network produces identical embeddings on every
    input.  The rational combination coefficients become an extra affine
    stage in front of each combine.  Only sum aggregation is linear in
    the match multiset, so anything else is an error, as is a ratio
    comparator combine (those belong to mean networks anyway).
    """
    new_layers = []
    for li, layer in enumerate(net.layers, start=1):
        groups: list[list[tuple[HomQuery, Fraction]]] = []
        changed = False
        for q in layer.queries:
            if q.agg is not Agg.SUM:
                raise ValueError(f"layer {li}: conversion requires sum aggregation, got {q.agg.value}")
            if q.mode is MatchMode.EMBEDDING:
                groups.append(_expand_embedding_query(q))
                changed = True
            elif q.mode is MatchMode.HOM:
                groups.append([(q, Fraction(1))])
            else:
                raise ValueError(f"layer {li}: cannot convert a {q.mode.value}-mode query")
        if not isinstance(layer.combine, Fnn):
            raise ValueError(f"layer {li}: ratio comparator combines are not sum networks")
        if not changed:
            new_layers.append(layer)
            continue
        queries = tuple(q for group in groups for q, _ in group)
        exact = layer.combine.exact
        n_in = sum(q.out_dim for q in queries)
        n_out = layer.combine.in_dim
        weight = [[Fraction(0)] * n_out for _ in range(n_in)]
        row = col = 0
        for group in groups:
            d = group[0][0].out_dim
            for _, coeff in group:
                for j in range(d):
                    weight[row + j][col + j] = coeff
                row += d
            col += d
        if exact:
            pre = rational_layer(weight, [0] * n_out, IDENTITY)
        else:
            pre = float_layer(np.array([[float(c) for c in r] for r in weight]), np.zeros(n_out), IDENTITY)
        combine = Fnn([pre, *layer.combine.layers])
        new_layers.append(DhnLayer(queries, combine, layer.norm))
    return Dhn(tuple(new_layers), net.classify)


# ---------------------------------------------------------------------------
# reference networks


def identity_fnn(dim: int, exact: bool = True) -> Fnn:
    if exact:
        eye = [[Fraction(i == j) for j in range(dim)] for i in range(dim)]
        return rational_fnn(eye, [0] * dim, IDENTITY)
    return Fnn([float_layer(np.eye(dim), np.zeros(dim), IDENTITY)])


def local_transitivity_network() -> Dhn:
    """Hand-built simple sum network deciding local transitivity.

    Layer 1 counts rooted homomorphisms of the two-edge path and of the
    chorded triangle (transforms are the constant 1, so the query values
    are the plain counts) and forms both clamped differences.  The path
    count always dominates, and the counts agree exactly when every
    two-step neighbor is also a direct neighbor.  Layer 2 turns
    "both differences zero" into a 0/1 coordinate for the threshold.
    """
    one = rational_fnn([], [1], RELU_STAR)  # R^0 -> (1)
    path = pointed(database(GRAPH_SCHEMA, [fact("E", "p", "q"), fact("E", "q", "r")]), "p")
    chord = pointed(
        database(GRAPH_SCHEMA, [fact("E", "p", "q"), fact("E", "q", "r"), fact("E", "p", "r")]),
        "p",
    )
    q_path = HomQuery(path, {v: one for v in "pqr"}, Agg.SUM)
    q_chord = HomQuery(chord, {v: one for v in "pqr"}, Agg.SUM)
    com1 = rational_fnn([[-1, 1], [1, -1]], [0, 0], RELU_STAR)
    copy2 = rational_fnn([[1, 0], [0, 1]], [0, 0], RELU_STAR)
    vertex = pointed(database(GRAPH_SCHEMA, values=["p"]), "p")
    q_copy = HomQuery(vertex, {"p": copy2}, Agg.SUM)
    com2 = rational_fnn([[-1], [-1]], [1], RELU_STAR)
    return Dhn(
        (DhnLayer((q_path, q_chord), com1), DhnLayer((q_copy,), com2)),
        Classifier(threshold=Fraction(1)),
    )


def gin_baseline(
    dims: Sequence[int],
    n_layers: int | None = None,
    rng: np.random.Generator | None = None,
    hidden: int = 32,
) -> Dhn:
    """Message-passing baseline written as a network over the graph schema.

    ``dims`` chains the embedding dimensions, input features first.  All
    layers carry the single-vertex and single-edge queries with identity
    transforms; the last layer adds the two-isolated-vertices global
    readout.  Learning lives entirely in the combines and the head.
    """
    dims = list(dims)
    if n_layers is None:
        n_layers = len(dims) - 1
    if n_layers != len(dims) - 1 or n_layers < 1:
        raise ValueError("need len(dims) == n_layers + 1 >= 2")
    if rng is None:
        rng = np.random.Generator(np.random.Philox(0))
    vertex = pointed(database(GRAPH_SCHEMA, values=["u"]), "u")
    edge = pointed(database(GRAPH_SCHEMA, [fact("E", "u", "w")]), "u")
    pair = pointed(database(GRAPH_SCHEMA, values=["u", "w"]), "u")
    layers = []
    for i in range(n_layers):
        d_in, d_out = dims[i], dims[i + 1]
        ident = identity_fnn(d_in, exact=False)
        queries = [
            HomQuery(vertex, {"u": ident}, Agg.SUM),
            HomQuery(edge, {"u": ident, "w": ident}, Agg.SUM),
        ]
        if i == n_layers - 1:
            queries.append(HomQuery(pair, {"u": ident, "w": ident}, Agg.SUM))
        total = sum(q.out_dim for q in queries)
        act = leaky()
        combine = fnn_init([total, hidden, hidden, hidden, d_out], [act, act, act, IDENTITY], rng)
        norm = (np.ones(d_out), np.zeros(d_out)) if i < n_layers - 1 else None
        layers.append(DhnLayer(tuple(queries), combine, norm))
    head = fnn_init([dims[-1], hidden, 1], [leaky(), IDENTITY], rng)
    return Dhn(tuple(layers), Classifier(head, 0, 0.0, strict=True))


# ---------------------------------------------------------------------------
# JSON interchange


def _transform_to_obj(factors: tuple[Fnn, ...]):
    if len(factors) == 1:
        return fnn_to_obj(factors[0])
    return {"product": [fnn_to_obj(f) for f in factors]}


def _transform_from_obj(obj):
    if isinstance(obj, dict) and "product" in obj:
        return tuple(fnn_from_obj(o) for o in obj["product"])
    return fnn_from_obj(obj)


def _combine_to_obj(combine):
    if isinstance(combine, Fnn):
        return {"fnn": fnn_to_obj(combine)}
    return {
        "ratio_comparator": {
            "coord": combine.coord,
            "threshold": _num_to_json(combine.threshold),
            "strict": combine.strict,
            "copy_dim": combine.copy_dim,
        }
    }


def _combine_from_obj(obj):
    if "fnn" in obj:
        return fnn_from_obj(obj["fnn"])
    rc = obj["ratio_comparator"]
    threshold = _num_from_json(rc["threshold"])
    if isinstance(threshold, float):
        threshold = Fraction(threshold)
    return RatioComparatorCombine(rc["coord"], threshold, rc["strict"], rc["copy_dim"])


def network_to_obj(net: Dhn) -> dict:
    layers = []
    for layer in net.layers:
        queries = []
        for q in layer.queries:
            queries.append(
                {
                    "pattern": document_to_obj(DatabaseDocument(q.pattern.db, root=q.pattern.root)),
                    "transforms": {v: _transform_to_obj(fs) for v, fs in q.transforms.items()},
                    "agg": q.agg.value,
                    "mode": q.mode.value,
                }
            )
        entry = {"queries": queries, "combine": _combine_to_obj(layer.combine)}
        if layer.norm is not None:
            entry["norm"] = {"gamma": layer.norm[0].tolist(), "beta": layer.norm[1].tolist()}
        layers.append(entry)
    clf = net.classify
    classify_obj: dict = {
        "coord": clf.coord,
        "threshold": _num_to_json(clf.threshold),
        "strict": clf.strict,
    }
    if clf.net is not None:
        classify_obj["fnn"] = fnn_to_obj(clf.net)
    return {"layers": layers, "classify": classify_obj}


def network_from_obj(obj: dict) -> Dhn:
    layers = []
    for entry in obj["layers"]:
        queries = []
        for qo in entry["queries"]:
            doc = document_from_obj(qo["pattern"])
            queries.append(
                HomQuery(
                    doc.pointed,
                    {v: _transform_from_obj(t) for v, t in qo["transforms"].items()},
                    Agg(qo["agg"]),
                    MatchMode(qo["mode"]),
                )
            )
        norm = None
        if "norm" in entry:
            norm = (np.asarray(entry["norm"]["gamma"]), np.asarray(entry["norm"]["beta"]))
        layers.append(DhnLayer(tuple(queries), _combine_from_obj(entry["combine"]), norm))
    co = obj["classify"]
    head = fnn_from_obj(co["fnn"]) if "fnn" in co else None
    clf = Classifier(head, co["coord"], _num_from_json(co["threshold"]), co["strict"])
    return Dhn(tuple(layers), clf)


def save_network(net: Dhn, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_obj(net), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_network(path: str) -> Dhn:
    with open(path) as fh:
        return network_from_obj(json.load(fh))
