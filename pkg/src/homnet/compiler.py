"""Formula-to-network compilation with machine-checked equivalence.

All five targets share one skeleton: enumerate the subformulas
children-first, devote one network layer to each, and let coordinate i of
every value's embedding carry the 0/1 truth of subformula i at that
value.  Negation and disjunction layers are affine bookkeeping on the
previous embedding; a quantifier block becomes a rooted query over its
atom pattern next to a copy query that drags the already-computed
coordinates forward.  The classifier thresholds the root formula's
coordinate.  What varies per target is the aggregator, the match mode,
and the block translation:

- max (plain existentials): guard-indicator transforms, max-aggregated.
- sum (counting existentials): the same query sum-aggregated is the
  witness count; the combine subtracts count-1 and clamps.
- embedding mode (strict blocks only): the block pins its induced
  pattern completely, so a single embedding query decides it; boolean
  layers fan out over every single-value database so that exactly one
  query fires at each value.
- mean (ratio quantifiers): a mean query is the satisfying fraction, a
  constant-one query flags emptiness, and an exact rational comparator
  writes the verdict.

Compilation is deterministic: one formula, one byte sequence.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .logic import (
    And,
    EmlExists,
    Evaluator,
    Formula,
    GhmlMinusExists,
    HmlExists,
    Neg,
    Or,
    RhmlRatio,
    check_schema,
    eval_formula,
    is_ghml_minus,
    is_hml,
    is_rhml,
    is_strict_eml,
    subformulas_postorder,
)
from .matching import MatchMode, all_possible_facts, enumerate_patterns
from .network import (
    Agg,
    Classifier,
    Dhn,
    DhnLayer,
    HomQuery,
    RatioComparatorCombine,
    apply_classifier,
    run,
)
from .neural import RELU_STAR, Fnn, rational_fnn
from .relational import GRAPH_SCHEMA, Database, PointedDatabase, Schema, fact

F0 = Fraction(0)
F1 = Fraction(1)


# ---------------------------------------------------------------------------
# shared affine pieces (all single-stage ReluStar, so max/sum nets stay simple)


def _matrix_fnn(rows, bias) -> Fnn:
    return rational_fnn(rows, bias, RELU_STAR)


def _eye_fnn(k: int) -> Fnn:
    return _matrix_fnn([[F1 if i == j else F0 for j in range(k)] for i in range(k)], [F0] * k)


def _zeros_fnn(in_dim: int, out_dim: int, bias=None) -> Fnn:
    rows = [[F0] * out_dim for _ in range(in_dim)]
    return _matrix_fnn(rows, list(bias) if bias is not None else [F0] * out_dim)


def _copy_fnn(in_dim: int, k: int) -> Fnn:
    """What a copy query applies at the single pattern value: zeros on the
    (empty) first-layer input, the identity afterwards."""
    return _zeros_fnn(0, k) if in_dim == 0 else _eye_fnn(k)


def _guard_fnn(in_dim: int, coords: list[int]) -> Fnn:
    """R^in -> (1) indicator: 1 iff every listed coordinate is 1.

    Sum of the coordinates minus (n-1), clamped; with no coordinates the
    constant 1."""
    if not coords:
        return _zeros_fnn(in_dim, 1, bias=[F1])
    rows = [[F0] for _ in range(in_dim)]
    for c in coords:
        rows[c][0] += F1
    return _matrix_fnn(rows, [F1 - len(coords)])


def _bool_matrix(k: int, i: int, writes: list[tuple[int, Fraction]], bias_i: Fraction):
    """Identity on R^k except column i, which is rebuilt from `writes`."""
    rows = [[F1 if r == c else F0 for c in range(k)] for r in range(k)]
    for r in range(k):
        rows[r][i] = F0
    for src, coeff in writes:
        rows[src][i] += coeff
    bias = [F0] * k
    bias[i] = bias_i
    return rows, bias


def _boolean_writes(node: Formula, coord: dict[Formula, int]):
    if isinstance(node, Neg):
        return [(coord[node.sub], Fraction(-1))], F1
    if isinstance(node, Or):
        return [(coord[node.left], F1), (coord[node.right], F1)], F0
    if isinstance(node, And):
        return [(coord[node.left], F1), (coord[node.right], F1)], Fraction(-1)
    raise TypeError(f"not a boolean connective: {type(node).__name__}")


# ---------------------------------------------------------------------------
# patterns


def _unit_pattern(schema: Schema) -> PointedDatabase:
    return PointedDatabase(Database(schema, frozenset(), frozenset({"u"})), "u")


def _block_pattern(schema: Schema, free: str, vars: tuple[str, ...], atoms) -> PointedDatabase:
    scope = (free, *vars)
    facts = frozenset(fact(a.rel, *a.args) for a in atoms)
    used = {v for f in facts for v in f.args}
    db = Database(schema, facts, frozenset(scope) - used)
    return PointedDatabase(db, free)


@lru_cache(maxsize=None)
def _single_value_family(schema: Schema) -> tuple[PointedDatabase, ...]:
    """Every database with exactly one value, in a fixed order.  At any
    value of any target exactly one member matches in embedding mode."""
    possible = all_possible_facts(schema, ["u"])
    out = []
    for n in range(len(possible) + 1):
        for chosen in itertools.combinations(possible, n):
            out.append(
                PointedDatabase(
                    Database(schema, frozenset(chosen), frozenset({"u"})), "u"
                )
            )
    return tuple(out)


def _guard_coords(node, coord: dict[Formula, int], guards) -> dict[str, list[int]]:
    scope = (node.free, *node.vars)
    per_value: dict[str, list[int]] = {z: [] for z in scope}
    for var, g in guards:
        per_value[var].append(coord[g])
    return per_value


# ---------------------------------------------------------------------------
# the two plain-homomorphism targets (max for plain blocks, sum for counting)


def _dhn_layers(order, coord, schema, agg: Agg) -> list[DhnLayer]:
    k = len(order)
    unit = _unit_pattern(schema)
    layers = []
    for i, node in enumerate(order):
        in_dim = 0 if i == 0 else k
        if isinstance(node, (Neg, Or, And)):
            rows, bias = _bool_matrix(k, i, *_boolean_writes(node, coord))
            q = HomQuery(unit, {"u": _matrix_fnn(rows, bias)}, agg)
            layers.append(DhnLayer((q,), _eye_fnn(k)))
            continue
        if isinstance(node, HmlExists):
            count = 1
        elif isinstance(node, GhmlMinusExists):
            count = node.count
        else:
            raise TypeError(f"cannot compile node {type(node).__name__} to this target")
        if agg is Agg.MAX and count != 1:
            raise ValueError("counting blocks need the sum target")
        pattern = _block_pattern(schema, node.free, node.vars, node.atoms)
        per_value = _guard_coords(node, coord, node.guards)
        transforms = {
            z: _guard_fnn(in_dim, coords) for z, coords in per_value.items()
        }
        block_q = HomQuery(pattern, transforms, agg)
        copy_q = HomQuery(unit, {"u": _copy_fnn(in_dim, k)}, agg)
        # combine: coordinate i from the block value minus (count-1); the
        # rest copied.  Input layout [block(1), copy(k)].
        rows = [[F0] * k for _ in range(1 + k)]
        rows[0][i] = F1
        for c in range(k):
            if c != i:
                rows[1 + c][c] = F1
        bias = [F0] * k
        bias[i] = Fraction(1 - count)
        layers.append(DhnLayer((block_q, copy_q), _matrix_fnn(rows, bias)))
    return layers


def compile_hml_max(phi: Formula, schema: Schema = GRAPH_SCHEMA) -> Dhn:
    """One-layer-per-subformula max network; plain existentials only."""
    if not is_hml(phi):
        raise ValueError("the max target compiles negation/disjunction/plain-existential formulas only")
    check_schema(phi, schema)
    order = subformulas_postorder(phi)
    coord = {node: i for i, node in enumerate(order)}
    layers = _dhn_layers(order, coord, schema, Agg.MAX)
    k = len(order)
    return Dhn(tuple(layers), Classifier(None, coord=k - 1, threshold=F1, strict=False))


def compile_ghmlminus_sum(phi: Formula, schema: Schema = GRAPH_SCHEMA) -> Dhn:
    """Sum-aggregated variant; counting blocks subtract count-1 and clamp."""
    if not is_ghml_minus(phi):
        raise ValueError("the sum target compiles formulas with plain or counting existentials only")
    check_schema(phi, schema)
    order = subformulas_postorder(phi)
    coord = {node: i for i, node in enumerate(order)}
    layers = _dhn_layers(order, coord, schema, Agg.SUM)
    k = len(order)
    return Dhn(tuple(layers), Classifier(None, coord=k - 1, threshold=F1, strict=False))


# ---------------------------------------------------------------------------
# embedding-mode targets (strict blocks)


def _den_layers(order, coord, schema, agg: Agg) -> list[DhnLayer]:
    k = len(order)
    family = _single_value_family(schema)
    n_fam = len(family)

    def wrap(rows, bias, n_queries, in_total):
        """com'(x_1..x_n) = com(sum x_i): stack the affine block; under sum
        aggregation clamp the raw query outputs first."""
        stacked = [list(r) for _ in range(n_queries) for r in rows]
        if agg is Agg.MAX:
            return _matrix_fnn(stacked, bias)
        clamp = _eye_fnn(in_total).layers[0]
        return Fnn([clamp, _matrix_fnn(stacked, bias).layers[0]])

    layers = []
    for i, node in enumerate(order):
        in_dim = 0 if i == 0 else k
        if isinstance(node, (Neg, Or, And)):
            rows, bias = _bool_matrix(k, i, *_boolean_writes(node, coord))
            f = _matrix_fnn(rows, bias)
            queries = tuple(
                HomQuery(pat, {"u": f}, agg, MatchMode.EMBEDDING) for pat in family
            )
            eye = [[F1 if r == c else F0 for c in range(k)] for r in range(k)]
            layers.append(DhnLayer(queries, wrap(eye, [F0] * k, n_fam, n_fam * k)))
            continue
        if isinstance(node, HmlExists):
            # strict zero-variable block: all atoms positive and complete
            node = EmlExists(node.free, (), node.atoms, (), (), node.guards)
        if not isinstance(node, EmlExists):
            raise TypeError(f"cannot compile node {type(node).__name__} to an embedding target")
        pattern = _block_pattern(schema, node.free, node.vars, node.atoms)
        per_value = _guard_coords(node, coord, node.guards)
        transforms = {z: _guard_fnn(in_dim, coords) for z, coords in per_value.items()}
        block_q = HomQuery(pattern, transforms, agg, MatchMode.EMBEDDING)
        copy_f = _copy_fnn(in_dim, k)
        copies = tuple(
            HomQuery(pat, {"u": copy_f}, agg, MatchMode.EMBEDDING) for pat in family
        )
        # input layout [block(1), copy_1(k), ..., copy_n(k)]
        rows = [[F0] * k for _ in range(1 + n_fam * k)]
        rows[0][i] = F1
        for t in range(n_fam):
            for c in range(k):
                if c != i:
                    rows[1 + t * k + c][c] = F1
        combine = _matrix_fnn(rows, [F0] * k)
        if agg is Agg.SUM:
            clamp = _eye_fnn(1 + n_fam * k).layers[0]
            combine = Fnn([clamp, combine.layers[0]])
        layers.append(DhnLayer((block_q, *copies), combine))
    return layers


def _compile_eml(phi: Formula, schema: Schema, agg: Agg) -> Dhn:
    if not is_strict_eml(phi, schema):
        raise ValueError(
            "embedding targets need every block to pin all inequalities and "
            "atom signs; run strictify first"
        )
    check_schema(phi, schema)
    order = subformulas_postorder(phi)
    coord = {node: i for i, node in enumerate(order)}
    layers = _den_layers(order, coord, schema, agg)
    k = len(order)
    return Dhn(tuple(layers), Classifier(None, coord=k - 1, threshold=F1, strict=False))


def compile_eml_max_den(phi: Formula, schema: Schema = GRAPH_SCHEMA) -> Dhn:
    """Embedding-mode max network for strict blocks."""
    return _compile_eml(phi, schema, Agg.MAX)


def compile_eml_sum_den(phi: Formula, schema: Schema = GRAPH_SCHEMA) -> Dhn:
    """Embedding-mode sum network; clamps raw sums before each combine."""
    return _compile_eml(phi, schema, Agg.SUM)


# ---------------------------------------------------------------------------
# mean target (ratio quantifiers, exact comparator combines)


def _to_ratio(phi: Formula, memo: dict | None = None) -> Formula:
    """Rewrite plain existentials as ratio blocks: a witness fraction
    strictly above zero among the atom matches, guards as the filter."""
    if memo is None:
        memo = {}
    if phi in memo:
        return memo[phi]
    if isinstance(phi, Neg):
        out: Formula = Neg(_to_ratio(phi.sub, memo))
    elif isinstance(phi, Or):
        out = Or(_to_ratio(phi.left, memo), _to_ratio(phi.right, memo))
    elif isinstance(phi, And):
        out = And(_to_ratio(phi.left, memo), _to_ratio(phi.right, memo))
    elif isinstance(phi, HmlExists):
        out = RhmlRatio(
            ">",
            F0,
            phi.free,
            phi.vars,
            tuple((v, _to_ratio(g, memo)) for v, g in phi.guards),
            phi.atoms,
        )
    elif isinstance(phi, RhmlRatio):
        out = RhmlRatio(
            phi.cmp,
            phi.threshold,
            phi.free,
            phi.vars,
            tuple((v, _to_ratio(g, memo)) for v, g in phi.mu),
            phi.nu,
        )
    else:
        raise TypeError(f"cannot compile node {type(phi).__name__} to the mean target")
    memo[phi] = out
    return out


def compile_rhml_mean(phi: Formula, schema: Schema = GRAPH_SCHEMA) -> Dhn:
    """Mean network with exact comparator combines on ratio layers."""
    if not is_rhml(phi):
        raise ValueError("the mean target compiles ratio/plain-existential formulas only")
    check_schema(phi, schema)
    phi = _to_ratio(phi)
    order = subformulas_postorder(phi)
    coord = {node: i for i, node in enumerate(order)}
    k = len(order)
    unit = _unit_pattern(schema)
    layers = []
    for i, node in enumerate(order):
        in_dim = 0 if i == 0 else k
        if isinstance(node, (Neg, Or, And)):
            rows, bias = _bool_matrix(k, i, *_boolean_writes(node, coord))
            q = HomQuery(unit, {"u": _matrix_fnn(rows, bias)}, Agg.MEAN)
            layers.append(DhnLayer((q,), _eye_fnn(k)))
            continue
        assert isinstance(node, RhmlRatio)
        pattern = _block_pattern(schema, node.free, node.vars, node.nu)
        per_value = _guard_coords_ratio(node, coord)
        ratio_q = HomQuery(
            pattern,
            {z: _guard_fnn(in_dim, coords) for z, coords in per_value.items()},
            Agg.MEAN,
        )
        hit_q = HomQuery(
            pattern,
            {z: _guard_fnn(in_dim, []) for z in per_value},
            Agg.MEAN,
        )
        copy_q = HomQuery(unit, {"u": _copy_fnn(in_dim, k)}, Agg.MEAN)
        combine = RatioComparatorCombine(
            coord=i,
            threshold=node.threshold,
            strict=(node.cmp == ">"),
            copy_dim=k,
        )
        layers.append(DhnLayer((ratio_q, hit_q, copy_q), combine))
    return Dhn(tuple(layers), Classifier(None, coord=k - 1, threshold=F1, strict=False))


def _guard_coords_ratio(node: RhmlRatio, coord) -> dict[str, list[int]]:
    scope = (node.free, *node.vars)
    per_value: dict[str, list[int]] = {z: [] for z in scope}
    for var, g in node.mu:
        per_value[var].append(coord[g])
    return per_value


COMPILE_TARGETS = {
    "max-dhn": compile_hml_max,
    "sum-dhn": compile_ghmlminus_sum,
    "max-den": compile_eml_max_den,
    "sum-den": compile_eml_sum_den,
    "mean-dhn": compile_rhml_mean,
}


# ---------------------------------------------------------------------------
# equivalence checking


@dataclass(frozen=True)
class EquivConfig:
    """Sweep sizes for `check_equivalence`.

    `exhaustive_values` bounds the complete small sweep; `samples` random
    databases with up to `max_values` values follow, every value checked
    as a root."""

    exhaustive_values: int = 3
    samples: int = 500
    max_values: int = 6
    seed: int = 0


@dataclass(frozen=True)
class Disagreement:
    source: str  # "exhaustive" or "random"
    pdb: PointedDatabase
    formula_accepts: bool
    network_accepts: bool


@dataclass
class EquivReport:
    exhaustive_checked: int
    random_checked: int
    disagreements: tuple[Disagreement, ...]
    elapsed: float

    @property
    def ok(self) -> bool:
        return not self.disagreements

    def summary(self) -> str:
        verdict = "ok" if self.ok else f"{len(self.disagreements)} disagreements"
        return (
            f"{verdict}: {self.exhaustive_checked} exhaustive + "
            f"{self.random_checked} random checks in {self.elapsed:.1f}s"
        )


@lru_cache(maxsize=8)
def _exhaustive_pool(schema: Schema, max_values: int):
    return enumerate_patterns(schema, max_values)


def random_database(schema: Schema, rng: np.random.Generator, max_values: int) -> Database:
    """One random database: value count and fact density both drawn."""
    n = int(rng.integers(1, max_values + 1))
    values = [f"v{i}" for i in range(n)]
    density = float(rng.uniform(0.08, 0.55))
    facts = frozenset(
        f for f in all_possible_facts(schema, values) if rng.random() < density
    )
    return Database(schema, facts, frozenset(values))


def check_equivalence(
    phi: Formula, net: Dhn, config: EquivConfig = EquivConfig()
) -> EquivReport:
    """Sweep the formula against the network: every pointed database up to
    the exhaustive bound (one canonical representative per isomorphism
    class — both sides are relabeling-invariant, which has its own
    property test), then seeded random databases checked at every value."""
    schema = net.layers[0].queries[0].pattern.db.schema
    check_schema(phi, schema)
    t0 = time.perf_counter()
    bad: list[Disagreement] = []

    n_exhaustive = 0
    for pdb in _exhaustive_pool(schema, config.exhaustive_values):
        want = eval_formula(phi, pdb)
        got = run(net, pdb).accept
        n_exhaustive += 1
        if want != got:
            bad.append(Disagreement("exhaustive", pdb, want, got))

    rng = np.random.Generator(np.random.Philox(config.seed))
    n_random = 0
    for _ in range(config.samples):
        db = random_database(schema, rng, config.max_values)
        values = sorted(db.adom)
        final = run(net, PointedDatabase(db, values[0])).trace[-1]
        ev = Evaluator(db)
        for v in values:
            want = ev.check(phi, v)
            got, _ = apply_classifier(net.classify, final.vec(v))
            n_random += 1
            if want != got:
                bad.append(Disagreement("random", PointedDatabase(db, v), want, got))

    return EquivReport(n_exhaustive, n_random, tuple(bad), time.perf_counter() - t0)
