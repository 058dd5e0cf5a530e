"""Training loop, metrics, and the two synthetic experiments.

Training evaluates networks on the whole graph at once.  Per query and
layer, a *plan* is compiled against the fixed dataset: acyclic
homomorphism patterns run as edge-level dynamic programs (sums directly;
max via attainable-interval tracking, since transform outputs may be
negative), and everything else — cyclic or injective patterns — runs off
a precomputed match table.  Both paths reduce through one chunked
gather-product-reduce operation that recomputes its intermediates during
backprop instead of retaining them, so memory stays flat regardless of
match counts.  The slow exact evaluator in `network` is the reference;
the property tests pin the planned forward to it.

Hyperparameters follow the experiment defaults recorded in each config:
transforms with one hidden layer, combines with three, LayerNorm between
layers, full-batch Adam on binary cross entropy with logits.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .datasets import gen_local_transitivity, gen_sun, pattern_catalog_lt, split
from .matching import MatchMode, enumerate_unrooted
from .network import (
    Agg,
    Classifier,
    Dhn,
    DhnLayer,
    HomQuery,
    gin_baseline,
)
from .neural import (
    IDENTITY,
    Fnn,
    FnnParams,
    SegmentLayout,
    Tensor,
    adam_step,
    fnn_init,
    leaky,
    t_bce_with_logits_mean,
    t_concat_cols,
    t_const,
    t_fnn,
    t_layer_norm,
    t_maximum,
    t_minimum,
    t_mul,
    t_param,
    t_rows,
)
from .relational import GRAPH_SCHEMA, Database, DatabaseDocument, PointedDatabase, database, fact, pointed


# ---------------------------------------------------------------------------
# gather-product-reduce

# The heavy tensors — gathered rows and their products over match tables —
# run in float32: counts and transform outputs in play stay far below the
# 2^24 integer ceiling, and the halved memory traffic roughly doubles the
# throughput of the fancy-indexing that dominates an epoch.  Everything
# after aggregation (combines, norms, the loss) stays float64.


class _Scatter:
    """Presorted reverse index for one match-table column, so the backward
    scatter runs as a grouped reduceat instead of element-wise add.at."""

    def __init__(self, col: np.ndarray):
        self.perm = np.argsort(col, kind="stable")
        grouped = col[self.perm]
        if len(grouped):
            self.starts = np.concatenate(([0], np.flatnonzero(np.diff(grouped)) + 1))
            self.uniq = grouped[self.starts]
        else:
            self.starts = self.uniq = grouped

    def add_into(self, target: np.ndarray, rows: np.ndarray):
        if len(self.uniq):
            target[self.uniq] += np.add.reduceat(rows[self.perm], self.starts, axis=0)


def _chunk_segments(ids: np.ndarray, lo: int, hi: int):
    """Local reduceat starts and their segment ids for ids[lo:hi]."""
    part = ids[lo:hi]
    starts = np.concatenate(([0], np.flatnonzero(np.diff(part)) + 1))
    return starts, part[starts]


def t_rows_reduce(
    T: Tensor,
    idx_cols: Sequence[np.ndarray],
    layout: SegmentLayout,
    kind: str,
    scatters: Sequence[_Scatter] | None = None,
    chunk: int = 1 << 18,
) -> Tensor:
    """Reduce, per segment, the row-wise product of T gathered at each
    index column.  kind: "sum" | "mean" | "max" | "min".  Rows are grouped
    by layout.ids (sorted); empty segments reduce to 0.

    The forward streams over row chunks and the backward recomputes the
    gathered products, so nothing of match-table size is retained between
    the passes.
    """
    n_rows = len(layout.ids)
    d = T.data.shape[1]
    extreme = kind in ("max", "min")
    ufunc = {"sum": np.add, "mean": np.add, "max": np.maximum, "min": np.minimum}[kind]
    out = np.zeros((layout.n_segments, d))
    seen = np.zeros(layout.n_segments, dtype=bool)
    D32 = T.data.astype(np.float32)
    for lo in range(0, n_rows, chunk):
        hi = min(lo + chunk, n_rows)
        P = D32[idx_cols[0][lo:hi]]
        if len(idx_cols) > 1:
            P = P.copy()
            for col in idx_cols[1:]:
                P *= D32[col[lo:hi]]
        starts, segs = _chunk_segments(layout.ids, lo, hi)
        vals = ufunc.reduceat(P, starts, axis=0)
        if extreme:
            old = np.where(seen[segs, None], out[segs], vals)
            out[segs] = ufunc(old, vals)
            seen[segs] = True
        else:
            out[segs] += vals
    if kind == "mean":
        out /= np.maximum(layout.counts, 1)[:, None]
    result = Tensor(out, parents=(T,))

    def back(g):
        if not T.requires_grad:
            return
        gT = np.zeros_like(T.data, dtype=float)
        g32 = g.astype(np.float32)
        gathered = [D32[col] for col in idx_cols]
        if extreme:
            P = gathered[0]
            if len(gathered) > 1:
                P = P.copy()
                for a in gathered[1:]:
                    P *= a
            dP = np.where(P == out[layout.ids].astype(np.float32), g32[layout.ids], np.float32(0.0))
        elif kind == "mean":
            dP = g32[layout.ids] / layout.counts[layout.ids][:, None]
        else:
            dP = g32[layout.ids]
        for k, col in enumerate(idx_cols):
            dk = dP
            for j, a in enumerate(gathered):
                if j != k:
                    dk = dk * a
            if scatters is not None:
                scatters[k].add_into(gT, dk)
            else:
                np.add.at(gT, col, dk.astype(float))
        T._accum(gT)

    result._backward = back
    return result


# ---------------------------------------------------------------------------
# dataset-side indexes and query plans


class GraphIndex:
    """Integer ids for a database's values plus its directed edge arrays."""

    def __init__(self, db: Database):
        self.db = db
        self.values = sorted(db.adom)
        self.vid = {v: i for i, v in enumerate(self.values)}
        self.n = len(self.values)
        pairs = sorted((self.vid[f.args[0]], self.vid[f.args[1]]) for f in db.facts_of("E"))
        self.src = np.array([p for p, _ in pairs], dtype=np.int64).reshape(-1)
        self.dst = np.array([q for _, q in pairs], dtype=np.int64).reshape(-1)
        self.edge_set = set(pairs)

    def pair_arrays(self, forward: bool, backward: bool):
        """(anchor_ids, other_ids) for value pairs (a, o) with E(a, o)
        required when `forward`, E(o, a) required when `backward`."""
        if forward and backward:
            keep = [(a, b) for (a, b) in zip(self.src, self.dst) if (b, a) in self.edge_set]
            a = np.array([p for p, _ in keep], dtype=np.int64).reshape(-1)
            o = np.array([q for _, q in keep], dtype=np.int64).reshape(-1)
            return a, o
        if forward:
            return self.src, self.dst
        return self.dst, self.src


def _sorted_by_anchor(anchor: np.ndarray, other: np.ndarray, n: int):
    order = np.argsort(anchor, kind="stable")
    return other[order], SegmentLayout(anchor[order], n)


class UnitPlan:
    """Single pattern value, no facts: the transform output itself."""

    def eval(self, T: Tensor) -> Tensor:
        return T


class GlobalPairPlan:
    """Root plus one unconstrained value, sum-aggregated: a multiplicative
    global readout T(u) * sum_w T(w)."""

    def __init__(self, n: int):
        self.layout = SegmentLayout(np.zeros(n, dtype=np.int64), 1)
        self.rows = np.arange(n)
        self.scatter = _Scatter(self.rows)

    def eval(self, T: Tensor) -> Tensor:
        total = t_rows_reduce(T, [self.rows], self.layout, "sum", [self.scatter])
        return t_mul(T, total)


@dataclass
class _TreeEdge:
    child: int  # index into the node order
    other_ids: np.ndarray
    layout: SegmentLayout
    scatter: _Scatter


class TreeSumPlan:
    """Sum over homomorphisms of an acyclic pattern, factorized bottom-up:
    each node's message is its transform value times the edge-summed
    messages of its children."""

    def __init__(self, nodes: list[list[_TreeEdge]]):
        self.nodes = nodes  # post-order; last entry is the pattern root

    def eval(self, T: Tensor) -> Tensor:
        msgs: list[Tensor] = []
        for edges in self.nodes:
            m = T
            for e in edges:
                recv = t_rows_reduce(msgs[e.child], [e.other_ids], e.layout, "sum", [e.scatter])
                m = t_mul(m, recv)
            msgs.append(m)
        return msgs[-1]


class TreeMaxPlan:
    """Max over homomorphisms of an acyclic pattern via attainable
    intervals: each subtree tracks the (min, max) product it can realize
    at every target value, edges take the hull over valid neighbors, and
    invalid roots (no match at all) are masked to the empty-max of 0.

    Edge arrays arrive pre-filtered to children that can complete their
    subtree, so hulls never absorb garbage."""

    def __init__(self, nodes: list[list[_TreeEdge]], root_valid: np.ndarray):
        self.nodes = nodes
        self.mask = t_const(root_valid.astype(float)[:, None])

    def eval(self, T: Tensor) -> Tensor:
        lohi: list[tuple[Tensor, Tensor]] = []
        for edges in self.nodes:
            lo, hi = T, T
            for e in edges:
                c_lo, c_hi = lohi[e.child]
                r_lo = t_rows_reduce(c_lo, [e.other_ids], e.layout, "min", [e.scatter])
                r_hi = t_rows_reduce(c_hi, [e.other_ids], e.layout, "max", [e.scatter])
                cands = [t_mul(lo, r_lo), t_mul(lo, r_hi), t_mul(hi, r_lo), t_mul(hi, r_hi)]
                lo = t_minimum(t_minimum(cands[0], cands[1]), t_minimum(cands[2], cands[3]))
                hi = t_maximum(t_maximum(cands[0], cands[1]), t_maximum(cands[2], cands[3]))
            lohi.append((lo, hi))
        return t_mul(lohi[-1][1], self.mask)


class TablePlan:
    """Explicit match table: one index column per pattern value, rows
    grouped by the root's image."""

    def __init__(self, idx_cols: list[np.ndarray], layout: SegmentLayout, kind: str):
        self.idx_cols = idx_cols
        self.layout = layout
        self.kind = kind
        self.scatters = [_Scatter(col) for col in idx_cols]

    def eval(self, T: Tensor) -> Tensor:
        return t_rows_reduce(T, self.idx_cols, self.layout, self.kind, self.scatters)


def _tree_shape(pattern: PointedDatabase):
    """(order, parent-edge facts) when the pattern is connected, loop-free
    and Gaifman-acyclic; None otherwise."""
    values = sorted(pattern.db.adom)
    pair_facts: dict[frozenset, list] = {}
    for f in pattern.db.facts:
        if f.rel != "E" or len(set(f.args)) != 2:
            return None
        pair_facts.setdefault(frozenset(f.args), []).append(f)
    if len(pair_facts) != len(values) - 1:
        return None
    adj: dict[str, list[str]] = {v: [] for v in values}
    for pair in pair_facts:
        a, b = sorted(pair)
        adj[a].append(b)
        adj[b].append(a)
    order = [pattern.root]
    parent: dict[str, str] = {}
    i = 0
    while i < len(order):
        for w in sorted(adj[order[i]]):
            if w not in parent and w != pattern.root:
                parent[w] = order[i]
                order.append(w)
        i += 1
    if len(order) != len(values):
        return None  # disconnected
    return order, parent, pair_facts


def _edge_requirements(pair_facts, child: str, par: str):
    facts = pair_facts[frozenset((child, par))]
    forward = any(f.args == (par, child) for f in facts)
    backward = any(f.args == (child, par) for f in facts)
    return forward, backward


def build_query_plan(q: HomQuery, gidx: GraphIndex):
    pattern = q.pattern
    values = sorted(pattern.db.adom)
    if len(values) == 1 and not pattern.db.facts:
        return UnitPlan()
    if len(values) == 2 and not pattern.db.facts and q.agg is Agg.SUM:
        return GlobalPairPlan(gidx.n)
    shape = _tree_shape(pattern) if q.mode is MatchMode.HOM else None
    if shape is not None and q.agg in (Agg.SUM, Agg.MAX):
        order, parent, pair_facts = shape
        pos = {v: i for i, v in enumerate(reversed(order))}  # post-order slots

        def edge_arrays(child_value: str, valid_child: np.ndarray | None):
            fwd, bwd = _edge_requirements(pair_facts, child_value, parent[child_value])
            anchor, other = gidx.pair_arrays(fwd, bwd)
            if valid_child is not None:
                keep = valid_child[other]
                anchor, other = anchor[keep], other[keep]
            return _sorted_by_anchor(anchor, other, gidx.n)

        if q.agg is Agg.SUM:
            nodes: list[list[_TreeEdge]] = [[] for _ in order]
            for v in reversed(order[1:]):
                other_ids, layout = edge_arrays(v, None)
                nodes[pos[parent[v]]].append(_TreeEdge(pos[v], other_ids, layout, _Scatter(other_ids)))
            return TreeSumPlan(nodes)
        # max: mark which targets can complete each subtree, to filter edges
        valid: dict[str, np.ndarray] = {v: np.ones(gidx.n, dtype=bool) for v in order}
        for v in reversed(order[1:]):
            fwd, bwd = _edge_requirements(pair_facts, v, parent[v])
            anchor, other = gidx.pair_arrays(fwd, bwd)
            reachable = np.zeros(gidx.n, dtype=bool)
            np.logical_or.at(reachable, anchor, valid[v][other])
            valid[parent[v]] &= reachable
        nodes = [[] for _ in order]
        for v in reversed(order[1:]):
            other_ids, layout = edge_arrays(v, valid[v])
            nodes[pos[parent[v]]].append(_TreeEdge(pos[v], other_ids, layout, _Scatter(other_ids)))
        return TreeMaxPlan(nodes, valid[pattern.root])
    # anything else: materialized match table
    rows = []
    for h in enumerate_unrooted(pattern.db, gidx.db, q.mode):
        rows.append(tuple(gidx.vid[h[v]] for v in values) + (gidx.vid[h[pattern.root]],))
    rows.sort(key=lambda r: r[-1])
    cols = np.array(rows, dtype=np.int64).reshape(len(rows), len(values) + 1)
    layout = SegmentLayout(cols[:, -1], gidx.n)
    kind = {Agg.SUM: "sum", Agg.MAX: "max", Agg.MEAN: "mean"}[q.agg]
    return TablePlan([cols[:, i] for i in range(len(values))], layout, kind)


# ---------------------------------------------------------------------------
# whole-model plans


def _is_frozen_identity(fnn: Fnn) -> bool:
    if len(fnn.layers) != 1 or fnn.layers[0].act.kind != "identity":
        return False
    w, b = np.asarray(fnn.layers[0].weight, dtype=float), np.asarray(fnn.layers[0].bias, dtype=float)
    return w.shape[0] == w.shape[1] and np.array_equal(w, np.eye(w.shape[0])) and not b.any()


@dataclass
class _QuerySlot:
    plan: object
    transform: Fnn | None  # None: pass the embedding straight through
    params: FnnParams | None


@dataclass
class _LayerSlot:
    slots: list[_QuerySlot]
    combine_params: FnnParams
    norm: tuple[Tensor, Tensor] | None


class ModelPlan:
    """A network bound to one graph: query plans plus parameter tensors."""

    def __init__(self, net: Dhn, gidx: GraphIndex, plan_cache: dict | None = None):
        if net.exact:
            raise ValueError("training plans need a float network")
        cache = plan_cache if plan_cache is not None else {}
        self.net = net
        self.gidx = gidx
        self.layers: list[_LayerSlot] = []
        for layer in net.layers:
            slots = []
            for q in layer.queries:
                factors = {fs for fs in q.transforms.values()}
                only = next(iter(factors))
                if not (len(factors) == 1 and len(only) == 1):
                    raise ValueError("plans support a single shared transform per query")
                mu = only[0]
                key = _plan_key(q)
                if key not in cache:
                    cache[key] = build_query_plan(q, gidx)
                if _is_frozen_identity(mu):
                    slots.append(_QuerySlot(cache[key], None, None))
                else:
                    slots.append(_QuerySlot(cache[key], mu, FnnParams(mu)))
            if not isinstance(layer.combine, Fnn):
                raise ValueError("plans support affine combines only")
            norm = None
            if layer.norm is not None:
                norm = (t_param(layer.norm[0]), t_param(layer.norm[1]))
            self.layers.append(_LayerSlot(slots, FnnParams(layer.combine), norm))
        if net.classify.net is None:
            raise ValueError("training needs a classifier head")
        self.head = FnnParams(net.classify.net)

    def parameters(self) -> list[Tensor]:
        out: list[Tensor] = []
        for layer in self.layers:
            for slot in layer.slots:
                if slot.params is not None:
                    out.extend(slot.params.all_tensors())
            out.extend(layer.combine_params.all_tensors())
            if layer.norm is not None:
                out.extend(layer.norm)
        out.extend(self.head.all_tensors())
        return out

    def forward(self, features: np.ndarray) -> Tensor:
        """Logits for every value of the graph, in GraphIndex order."""
        emb = t_const(np.asarray(features, dtype=float))
        for layer, spec in zip(self.layers, self.net.layers):
            parts = []
            for slot in layer.slots:
                T = emb if slot.transform is None else t_fnn(slot.transform, emb, slot.params)
                parts.append(slot.plan.eval(T))
            x = parts[0] if len(parts) == 1 else t_concat_cols(parts)
            y = t_fnn(spec.combine, x, layer.combine_params)
            if layer.norm is not None:
                y = t_layer_norm(y, *layer.norm)
            emb = y
        return t_fnn(self.net.classify.net, emb, self.head)


def _plan_key(q: HomQuery):
    facts = tuple(sorted((f.rel, f.args) for f in q.pattern.db.facts))
    extras = tuple(sorted(q.pattern.db.extra_values))
    return (facts, extras, q.pattern.root, q.mode.value, q.agg.value)


# ---------------------------------------------------------------------------
# metrics


def f1_score(scores, labels) -> float:
    """F1 of the positive class at logit threshold 0 (score > 0 predicts 1)."""
    scores = np.asarray(scores, dtype=float).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if len(scores) != len(labels) or len(scores) == 0:
        raise ValueError("need equally many scores and labels, at least one")
    pred = scores > 0.0
    pos = labels == 1
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    fn = int(np.sum(~pred & pos))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def auroc(scores, labels) -> float:
    """Rank statistic with tie-averaged ranks."""
    scores = np.asarray(scores, dtype=float).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if len(scores) != len(labels) or len(scores) == 0:
        raise ValueError("need equally many scores and labels, at least one")
    n_pos = int(np.sum(labels == 1))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both classes present")
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    uniq, inverse = np.unique(scores, return_inverse=True)
    first = np.searchsorted(sorted_scores, uniq, side="left") + 1
    last = np.searchsorted(sorted_scores, uniq, side="right")
    ranks = ((first + last) / 2.0)[inverse]
    pos_ranks = ranks[labels == 1].sum()
    return float((pos_ranks - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def metrics(scores, labels) -> tuple[float, float]:
    return f1_score(scores, labels), auroc(scores, labels)


# ---------------------------------------------------------------------------
# architectures


def sun_query_patterns() -> tuple[PointedDatabase, ...]:
    """Single edge and directed 6-cycle, the sun experiment's queries."""
    edge = pointed(database(GRAPH_SCHEMA, [fact("E", "u", "w")]), "u")
    cyc = [f"c{i}" for i in range(6)]
    cycle = pointed(
        database(GRAPH_SCHEMA, [fact("E", cyc[i], cyc[(i + 1) % 6]) for i in range(6)]),
        "c0",
    )
    return (edge, cycle)


def experiment_network(
    model: str,
    patterns: Sequence[PointedDatabase],
    mode: MatchMode,
    rng: np.random.Generator,
    in_dim: int = 1,
    n_layers: int = 3,
    dim: int = 32,
    hidden: int = 32,
) -> Dhn:
    """The trained architectures: per query one shared transform with a
    single hidden layer; combines with three hidden layers; LayerNorm
    between layers; a one-hidden-layer classifier head on a 0 threshold."""
    if model == "gin":
        return gin_baseline([in_dim] + [dim] * n_layers, rng=rng, hidden=hidden)
    agg = {"sum-dhn": Agg.SUM, "max-dhn": Agg.MAX}[model]
    layers = []
    d_in = in_dim
    act = leaky()
    for i in range(n_layers):
        queries = []
        for p in patterns:
            mu = fnn_init([d_in, hidden, dim], [act, IDENTITY], rng)
            queries.append(HomQuery(p, {v: mu for v in p.db.adom}, agg, mode))
        combine = fnn_init([len(patterns) * dim, hidden, hidden, hidden, dim], [act, act, act, IDENTITY], rng)
        norm = (np.ones(dim), np.zeros(dim)) if i < n_layers - 1 else None
        layers.append(DhnLayer(tuple(queries), combine, norm))
        d_in = dim
    head = fnn_init([dim, hidden, 1], [act, IDENTITY], rng)
    return Dhn(tuple(layers), Classifier(head, 0, 0.0, strict=True))


# ---------------------------------------------------------------------------
# training


MODELS = ("sum-dhn", "max-dhn", "gin")
DATASETS = ("lt", "sun", "custom")
_DEFAULT_EPOCHS = {"sum-dhn": 1000, "max-dhn": 1000, "gin": 10000}
_DEFAULT_LR = {"sum-dhn": 3e-4, "max-dhn": 3e-4, "gin": 1e-3}


@dataclass(frozen=True)
class TrainConfig:
    dataset: str
    model: str
    seed: int = 0
    dataset_seed: int = 0
    split_seed: int = 0
    epochs: int | None = None
    lr: float | None = None
    n_layers: int = 3
    dim: int = 32
    hidden: int = 32
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ValueError(f"unknown dataset {self.dataset!r}; pick from {DATASETS}")
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; pick from {MODELS}")
        if self.epochs is not None and self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.lr is not None and self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.n_layers < 1 or self.dim < 1 or self.hidden < 1:
            raise ValueError("layer counts and dimensions must be positive")

    @property
    def resolved_epochs(self) -> int:
        return self.epochs if self.epochs is not None else _DEFAULT_EPOCHS[self.model]

    @property
    def resolved_lr(self) -> float:
        return self.lr if self.lr is not None else _DEFAULT_LR[self.model]

    def echo(self) -> dict:
        return {
            "dataset": self.dataset,
            "model": self.model,
            "seed": self.seed,
            "dataset_seed": self.dataset_seed,
            "split_seed": self.split_seed,
            "epochs": self.resolved_epochs,
            "lr": self.resolved_lr,
            "n_layers": self.n_layers,
            "dim": self.dim,
            "hidden": self.hidden,
            "ratios": list(self.ratios),
            "init": "uniform +-sqrt(1/fan_in)",
            "leaky_slope": 0.01,
            "f1_threshold": "logit 0",
        }


@dataclass
class TrainResult:
    net: Dhn
    history: list[dict]
    config: dict
    val_f1: float
    test_f1: float
    test_auroc: float


def _load_dataset(config: TrainConfig) -> DatabaseDocument:
    if config.dataset == "lt":
        return gen_local_transitivity(config.dataset_seed)
    if config.dataset == "sun":
        return gen_sun(config.dataset_seed)
    raise ValueError("a custom dataset must be passed to train() directly")


def _query_setup(config: TrainConfig, patterns):
    if patterns is not None:
        return tuple(patterns), MatchMode.HOM
    if config.dataset == "sun":
        return sun_query_patterns(), MatchMode.INJECTIVE
    return pattern_catalog_lt(), MatchMode.HOM


def train(
    config: TrainConfig,
    doc: DatabaseDocument | None = None,
    patterns: Sequence[PointedDatabase] | None = None,
    mode: MatchMode | None = None,
    plan_cache: dict | None = None,
) -> TrainResult:
    """Full-batch training of one model on one dataset.

    history[k] records the loss and validation F1 of the weights *before*
    optimizer step k, so history[0] is the initial loss and history[1] is
    the state after one step.
    """
    if doc is None:
        doc = _load_dataset(config)
    if doc.labels is None:
        raise ValueError("dataset carries no labels")
    qpatterns, qmode = _query_setup(config, patterns)
    if mode is not None:
        qmode = mode
    rng = np.random.Generator(np.random.Philox([config.seed]))
    net = experiment_network(
        config.model, qpatterns, qmode, rng,
        n_layers=config.n_layers, dim=config.dim, hidden=config.hidden,
    )
    gidx = GraphIndex(doc.db)
    plan = ModelPlan(net, gidx, plan_cache)
    const = 1.0
    if doc.meta and isinstance(doc.meta.get("features"), dict):
        const = float(doc.meta["features"].get("constant", 1.0))
    features = np.full((gidx.n, 1), const)

    tr, va, te = split(doc, config.split_seed, config.ratios)
    tr_ids = np.array([gidx.vid[v] for v in tr], dtype=np.int64)
    va_ids = np.array([gidx.vid[v] for v in va], dtype=np.int64)
    te_ids = np.array([gidx.vid[v] for v in te], dtype=np.int64)
    y = {v: doc.labels[v] for v in doc.labels}
    y_tr = np.array([y[v] for v in tr], dtype=float)
    y_va = np.array([y[v] for v in va], dtype=float)
    y_te = np.array([y[v] for v in te], dtype=float)

    params = plan.parameters()
    state = None
    history: list[dict] = []
    for epoch in range(config.resolved_epochs):
        logits = plan.forward(features)
        loss = t_bce_with_logits_mean(t_rows(logits, tr_ids), y_tr)
        scores = logits.data[:, 0]
        history.append(
            {
                "epoch": epoch,
                "loss": float(loss.data),
                "val_f1": f1_score(scores[va_ids], y_va) if len(va_ids) else float("nan"),
            }
        )
        loss.backward()
        _, state = adam_step([p.data for p in params], [p.grad for p in params], state, config.resolved_lr)
        for p in params:
            p.grad = None
    final = plan.forward(features).data[:, 0]
    val_f1 = f1_score(final[va_ids], y_va) if len(va_ids) else float("nan")
    test_f1 = f1_score(final[te_ids], y_te) if len(te_ids) else float("nan")
    try:
        test_auroc = auroc(final[te_ids], y_te) if len(te_ids) else float("nan")
    except ValueError:
        test_auroc = float("nan")
    return TrainResult(net, history, config.echo(), val_f1, test_f1, test_auroc)


# ---------------------------------------------------------------------------
# experiments


def _experiment_models(name: str) -> tuple[str, ...]:
    if name == "lt":
        return ("sum-dhn", "max-dhn")
    if name == "sun":
        return ("sum-dhn", "gin")
    raise ValueError(f"unknown experiment {name!r}; pick 'lt' or 'sun'")


def run_experiment(
    name: str,
    n_runs: int = 3,
    seed: int = 0,
    epochs: int | None = None,
    dataset_seed: int = 0,
) -> dict:
    """Best-of-n_runs (by validation F1) per model; reports test metrics of
    the selected run plus mean and standard error across runs."""
    models = _experiment_models(name)
    base = TrainConfig(dataset=name, model=models[0], dataset_seed=dataset_seed)
    doc = _load_dataset(base)
    report_rows = []
    for model in models:
        cache: dict = {}
        configs = [
            TrainConfig(
                dataset=name,
                model=model,
                seed=seed * 1000 + r,
                dataset_seed=dataset_seed,
                split_seed=seed,
                epochs=epochs,
            )
            for r in range(n_runs)
        ]
        workers = min(n_runs, os.cpu_count() or 1)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: train(c, doc=doc, plan_cache=cache), configs))
        runs = [
            {
                "seed": c.seed,
                "val_f1": res.val_f1,
                "test_f1": res.test_f1,
                "test_auroc": res.test_auroc,
            }
            for c, res in zip(configs, results)
        ]
        best = max(range(n_runs), key=lambda i: runs[i]["val_f1"])
        f1s = [r["test_f1"] for r in runs]
        aucs = [r["test_auroc"] for r in runs]
        report_rows.append(
            {
                "model": model,
                "runs": runs,
                "selected": best,
                "test_f1": runs[best]["test_f1"],
                "test_auroc": runs[best]["test_auroc"],
                "mean_test_f1": float(np.mean(f1s)),
                "se_test_f1": _stderr(f1s),
                "mean_test_auroc": float(np.mean(aucs)),
                "se_test_auroc": _stderr(aucs),
                "config": results[best].config,
            }
        )
    return {
        "experiment": name,
        "n_runs": n_runs,
        "seed": seed,
        "dataset": dict(doc.meta or {}),
        "rows": report_rows,
    }


def _stderr(xs) -> float:
    if len(xs) < 2:
        return 0.0
    return float(np.std(xs, ddof=1) / math.sqrt(len(xs)))


def render_report(report: dict) -> str:
    """Aligned text table for one experiment report."""
    head = f"experiment: {report['experiment']}   runs per model: {report['n_runs']}"
    cols = ["model", "test F1", "test AUROC", "mean F1 +- se", "mean AUROC +- se"]
    rows = [
        [
            r["model"],
            f"{r['test_f1']:.4f}",
            f"{r['test_auroc']:.4f}",
            f"{r['mean_test_f1']:.4f} +- {r['se_test_f1']:.4f}",
            f"{r['mean_test_auroc']:.4f} +- {r['se_test_auroc']:.4f}",
        ]
        for r in report["rows"]
    ]
    widths = [max(len(c), *(len(row[i]) for row in rows)) for i, c in enumerate(cols)]
    lines = [head, "  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)
