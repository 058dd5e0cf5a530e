"""Unary formula ASTs, brute-force semantics, and surface syntax.

Five families share one tree:

- plain guarded existentials (conjunctions of atoms + unary subformulas),
- tuple-counting existentials ``exists>= k``,
- sequence-counting existentials (a chain of graded quantifiers over a
  disjunction of conjunctions) — evaluation only, no surface syntax,
- existentials that may also assert negated atoms and inequalities
  (with a strict normal form used by the embedding-mode compiler),
- ratio quantifiers comparing a witness fraction against a rational
  threshold.

Every formula has exactly one free variable, named by the node that owns
it; a guard ``(v, phi)`` applies the closed unary formula ``phi`` at the
value assigned to ``v``.  Evaluation is exact and intended as ground
truth for compiler testing: a backtracking join over each block's atoms
with per-(subformula, value) memoization, so whole-dataset sweeps with a
shared :class:`Evaluator` stay cheap.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

from .relational import Database, PointedDatabase, Schema, SchemaError, fact

# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Atom:
    """A relational atom over variables, e.g. E(x, y)."""

    rel: str
    args: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


def atom(rel: str, *args: str) -> Atom:
    return Atom(rel, args)


Guard = tuple[str, "Formula"]


def _as_guards(guards) -> tuple[Guard, ...]:
    return tuple((v, g) for v, g in guards)


def _scope_check(free: str, vars: tuple[str, ...], atoms, guards, label: str):
    if free in vars:
        raise ValueError(f"{label}: free variable {free!r} shadowed by a bound variable")
    if len(set(vars)) != len(vars):
        raise ValueError(f"{label}: repeated bound variable")
    scope = {free, *vars}
    for a in atoms:
        bad = [z for z in a.args if z not in scope]
        if bad:
            raise ValueError(f"{label}: atom {a.rel}{a.args} uses unbound {bad[0]!r}")
    for v, _ in guards:
        if v not in scope:
            raise ValueError(f"{label}: guard applied to unbound variable {v!r}")


@dataclass(frozen=True)
class Neg:
    sub: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class And:
    """Conjunction; kept in the tree for readability, compiled natively."""

    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class HmlExists:
    """exists vars . (atoms and guards) — all conjoined."""

    free: str
    vars: tuple[str, ...]
    atoms: tuple[Atom, ...] = ()
    guards: tuple[Guard, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "guards", _as_guards(self.guards))
        _scope_check(self.free, self.vars, self.atoms, self.guards, "exists")


@dataclass(frozen=True)
class GhmlMinusExists:
    """exists>= count vars . conjunction — at least `count` witness tuples."""

    count: int
    free: str
    vars: tuple[str, ...]
    atoms: tuple[Atom, ...] = ()
    guards: tuple[Guard, ...] = ()

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "guards", _as_guards(self.guards))
        _scope_check(self.free, self.vars, self.atoms, self.guards, "exists>=")


@dataclass(frozen=True)
class GhmlExists:
    """A chain of per-variable graded quantifiers over a disjunction of
    conjunctions.  Evaluation-only; not a compiler target."""

    counts: tuple[int, ...]
    free: str
    vars: tuple[str, ...]
    disjuncts: tuple[tuple[tuple[Atom, ...], tuple[Guard, ...]], ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(self.counts))
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(
            self,
            "disjuncts",
            tuple((tuple(a), _as_guards(g)) for a, g in self.disjuncts),
        )
        if len(self.counts) != len(self.vars):
            raise ValueError("need one count per quantified variable")
        if any(k < 1 for k in self.counts):
            raise ValueError("counts must be >= 1")
        if not self.disjuncts:
            raise ValueError("need at least one disjunct")
        for atoms, guards in self.disjuncts:
            _scope_check(self.free, self.vars, atoms, guards, "graded exists")


@dataclass(frozen=True)
class EmlExists:
    """Existential block that may assert negated atoms and inequalities."""

    free: str
    vars: tuple[str, ...]
    atoms: tuple[Atom, ...] = ()
    neg_atoms: tuple[Atom, ...] = ()
    inequalities: tuple[tuple[str, str], ...] = ()
    guards: tuple[Guard, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "neg_atoms", tuple(self.neg_atoms))
        object.__setattr__(
            self, "inequalities", tuple(tuple(p) for p in self.inequalities)
        )
        object.__setattr__(self, "guards", _as_guards(self.guards))
        _scope_check(
            self.free, self.vars, self.atoms + self.neg_atoms, self.guards, "exists!"
        )
        scope = {self.free, *self.vars}
        for a, b in self.inequalities:
            if a == b:
                raise ValueError(f"inequality {a!r} != {b!r} is trivially false")
            if a not in scope or b not in scope:
                raise ValueError(f"inequality uses unbound variable in ({a}, {b})")


@dataclass(frozen=True)
class RhmlRatio:
    """exists_{cmp t} vars . (mu, nu): among nu-witness tuples, the fraction
    also satisfying every mu guard compares against t.  A zero denominator
    satisfies >= and falsifies >."""

    cmp: str  # ">=" or ">"
    threshold: Fraction
    free: str
    vars: tuple[str, ...]
    mu: tuple[Guard, ...] = ()
    nu: tuple[Atom, ...] = ()

    def __post_init__(self):
        if self.cmp not in (">=", ">"):
            raise ValueError("comparator must be '>=' or '>'")
        object.__setattr__(self, "threshold", Fraction(self.threshold))
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "mu", _as_guards(self.mu))
        object.__setattr__(self, "nu", tuple(self.nu))
        _scope_check(self.free, self.vars, self.nu, self.mu, "ratio")


Formula = Union[Neg, Or, And, HmlExists, GhmlMinusExists, GhmlExists, EmlExists, RhmlRatio]

_BLOCK_KINDS = (HmlExists, GhmlMinusExists, GhmlExists, EmlExists, RhmlRatio)


def free_var(phi: Formula) -> str:
    while isinstance(phi, (Neg, Or, And)):
        phi = phi.sub if isinstance(phi, Neg) else phi.left
    return phi.free


def check_schema(phi: Formula, schema: Schema):
    """Raise SchemaError if any atom names a missing relation or has
    the wrong arity."""
    for node in walk(phi):
        for a in _node_atoms(node):
            if a.rel not in schema:
                raise SchemaError(f"unknown relation {a.rel!r}")
            if schema.arity(a.rel) != len(a.args):
                raise SchemaError(
                    f"{a.rel} expects {schema.arity(a.rel)} arguments, got {len(a.args)}"
                )


def _node_atoms(node: Formula) -> tuple[Atom, ...]:
    if isinstance(node, (HmlExists, GhmlMinusExists)):
        return node.atoms
    if isinstance(node, EmlExists):
        return node.atoms + node.neg_atoms
    if isinstance(node, RhmlRatio):
        return node.nu
    if isinstance(node, GhmlExists):
        return tuple(a for atoms, _ in node.disjuncts for a in atoms)
    return ()


def _node_guards(node: Formula) -> tuple[Guard, ...]:
    if isinstance(node, (HmlExists, GhmlMinusExists, EmlExists)):
        return node.guards
    if isinstance(node, RhmlRatio):
        return node.mu
    if isinstance(node, GhmlExists):
        return tuple(g for _, guards in node.disjuncts for g in guards)
    return ()


def children(phi: Formula) -> tuple[Formula, ...]:
    if isinstance(phi, Neg):
        return (phi.sub,)
    if isinstance(phi, (Or, And)):
        return (phi.left, phi.right)
    return tuple(g for _, g in _node_guards(phi))


def walk(phi: Formula) -> Iterator[Formula]:
    yield phi
    for c in children(phi):
        yield from walk(c)


def subformulas_postorder(phi: Formula) -> list[Formula]:
    """Deduplicated post-order: children precede parents, each distinct
    subformula listed once."""
    out: list[Formula] = []
    seen: set[Formula] = set()

    def rec(node: Formula):
        if node in seen:
            return
        for c in children(node):
            rec(c)
        seen.add(node)
        out.append(node)

    rec(phi)
    return out


# ---------------------------------------------------------------------------
# syntactic class membership


def is_hml(phi: Formula) -> bool:
    return all(isinstance(n, (Neg, Or, And, HmlExists)) for n in walk(phi))


def is_ghml_minus(phi: Formula) -> bool:
    return all(
        isinstance(n, (Neg, Or, And, HmlExists, GhmlMinusExists)) for n in walk(phi)
    )


def is_eml(phi: Formula) -> bool:
    return all(isinstance(n, (Neg, Or, And, HmlExists, EmlExists)) for n in walk(phi))


def is_rhml(phi: Formula) -> bool:
    # plain existentials are ratio quantifiers with t = 0 and cmp '>'
    return all(
        isinstance(n, (Neg, Or, And, HmlExists, RhmlRatio)) for n in walk(phi)
    )


def is_strict_eml(phi: Formula, schema: Schema) -> bool:
    """Strict form: every existential block pins all pairwise inequalities
    and assigns every possible atom positively or negatively."""
    if not is_eml(phi):
        return False
    for node in walk(phi):
        if isinstance(node, HmlExists):
            if node.vars:  # an unpinned block with bound variables
                return False
            # zero-variable blocks must still assign the free value's atoms
            node = EmlExists(node.free, (), node.atoms, (), (), node.guards)
        if not isinstance(node, EmlExists):
            continue
        scope = (node.free, *node.vars)
        want_pairs = {frozenset(p) for p in itertools.combinations(scope, 2)}
        have_pairs = {frozenset(p) for p in node.inequalities}
        if want_pairs != have_pairs:
            return False
        assigned = set(node.atoms) | set(node.neg_atoms)
        if set(node.atoms) & set(node.neg_atoms):
            return False
        for rel, ar in sorted(schema.relations.items()):
            for args in itertools.product(scope, repeat=ar):
                if Atom(rel, args) not in assigned:
                    return False
    return True


@dataclass(frozen=True)
class FormulaClass:
    connected: bool
    depth: int
    width: int
    counting_bound: int


def classify(phi: Formula) -> FormulaClass:
    """Syntactic parameters.  A formula is connected when every block's
    atoms mention the free variable, their co-occurrence graph is
    connected, and no quantified variable floats free of all atoms."""
    connected = True
    depth = 0
    width = 0
    bound = 1

    def block_connected(free, vars, atoms) -> bool:
        if not any(free in a.args for a in atoms):
            return False
        adj: dict[str, set[str]] = {v: set() for v in (free, *vars)}
        touched: set[str] = set()
        for a in atoms:
            touched.update(a.args)
            for p, q in itertools.combinations(set(a.args), 2):
                adj[p].add(q)
                adj[q].add(p)
        if set(vars) - touched:
            return False  # a quantified variable in no atom
        stack, seen = [free], {free}
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen == {free, *vars}

    for node in walk(phi):
        if not isinstance(node, _BLOCK_KINDS):
            continue
        width = max(width, len(node.vars))
        if isinstance(node, GhmlMinusExists):
            bound = max(bound, node.count)
        if isinstance(node, GhmlExists):
            bound = max(bound, *node.counts)
        if isinstance(node, GhmlExists):
            ok = all(
                block_connected(node.free, node.vars, atoms)
                for atoms, _ in node.disjuncts
            )
        elif isinstance(node, RhmlRatio):
            ok = block_connected(node.free, node.vars, node.nu)
        else:
            ok = block_connected(node.free, node.vars, _pos_atoms(node))
        connected = connected and ok

    def d(node: Formula) -> int:
        kids = children(node)
        below = max((d(c) for c in kids), default=0)
        return below + (1 if isinstance(node, _BLOCK_KINDS) else 0)

    depth = d(phi)
    return FormulaClass(connected, depth, width, bound)


def _pos_atoms(node) -> tuple[Atom, ...]:
    return node.atoms if not isinstance(node, RhmlRatio) else node.nu


# ---------------------------------------------------------------------------
# evaluation


class Evaluator:
    """Exact evaluation of formulas over one database.

    Build once per database and query many (formula, value) pairs; results
    for unary subformulas are memoized across queries, which makes
    whole-dataset label sweeps linear-ish instead of rescanning guards.
    """

    def __init__(self, db: Database):
        self.db = db
        self.adom = sorted(db.adom)
        self.facts = db.facts
        self.by_rel: dict[str, list[tuple[str, ...]]] = {}
        self.by_pos: dict[tuple[str, int, str], list[tuple[str, ...]]] = {}
        for f in db.facts:
            self.by_rel.setdefault(f.rel, []).append(f.args)
            for i, v in enumerate(f.args):
                self.by_pos.setdefault((f.rel, i, v), []).append(f.args)
        self._memo: dict[tuple[int, str], bool] = {}
        # memo keys use id(); keep every queried tree alive so ids stay valid
        self._roots: list[Formula] = []

    # -- public -------------------------------------------------------

    def check(self, phi: Formula, value: str) -> bool:
        if value not in self.db.adom:
            raise ValueError(f"value {value!r} not in the active domain")
        self._roots.append(phi)
        return self._check(phi, value)

    # -- recursion ----------------------------------------------------

    def _check(self, phi: Formula, value: str) -> bool:
        key = (id(phi), value)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        if isinstance(phi, Neg):
            res = not self._check(phi.sub, value)
        elif isinstance(phi, Or):
            res = self._check(phi.left, value) or self._check(phi.right, value)
        elif isinstance(phi, And):
            res = self._check(phi.left, value) and self._check(phi.right, value)
        elif isinstance(phi, HmlExists):
            res = (
                self._count_block(
                    value, phi.free, phi.vars, phi.atoms, (), (), phi.guards, limit=1
                )
                >= 1
            )
        elif isinstance(phi, GhmlMinusExists):
            res = (
                self._count_block(
                    value,
                    phi.free,
                    phi.vars,
                    phi.atoms,
                    (),
                    (),
                    phi.guards,
                    limit=phi.count,
                )
                >= phi.count
            )
        elif isinstance(phi, EmlExists):
            res = (
                self._count_block(
                    value,
                    phi.free,
                    phi.vars,
                    phi.atoms,
                    phi.neg_atoms,
                    phi.inequalities,
                    phi.guards,
                    limit=1,
                )
                >= 1
            )
        elif isinstance(phi, GhmlExists):
            res = self._graded_chain(phi, {phi.free: value}, 0)
        elif isinstance(phi, RhmlRatio):
            num, den = self._ratio_counts(phi, value)
            if den == 0:
                res = phi.cmp == ">="
            elif phi.cmp == ">=":
                res = Fraction(num, den) >= phi.threshold
            else:
                res = Fraction(num, den) > phi.threshold
        else:
            raise TypeError(f"not a formula node: {phi!r}")
        self._memo[key] = res
        return res

    # -- block satisfaction by backtracking ----------------------------

    def _count_block(self, value, free, vars, atoms, neg_atoms, ineqs, guards, limit):
        """Count assignments of `vars` satisfying the block, stopping at
        `limit` (None = exact count).  The free variable is pre-bound."""
        env: dict[str, str] = {free: value}

        guards_by_var: dict[str, list[Formula]] = {}
        for v, g in guards:
            guards_by_var.setdefault(v, []).append(g)
        for g in guards_by_var.get(free, []):
            if not self._check(g, value):
                return 0
        for a in atoms:
            if all(z == free for z in a.args):
                if tuple(value for _ in a.args) not in self._rel_set(a.rel):
                    return 0
        for a in neg_atoms:
            if all(z == free for z in a.args):
                if tuple(value for _ in a.args) in self._rel_set(a.rel):
                    return 0

        order = self._order_vars(vars, atoms, free)
        count = 0

        def extend(i) -> int:
            nonlocal count
            if i == len(order):
                count += 1
                return count
            v = order[i]
            for cand in self._candidates(v, atoms, env):
                env[v] = cand
                if self._consistent(v, env, atoms, neg_atoms, ineqs, guards_by_var):
                    extend(i + 1)
                    if limit is not None and count >= limit:
                        del env[v]
                        return count
                del env[v]
            return count

        extend(0)
        return count

    def _rel_set(self, rel):
        return set(map(tuple, self.by_rel.get(rel, ())))

    def _order_vars(self, vars, atoms, free):
        """Greedy: repeatedly pick the variable co-occurring with the most
        already-ordered names, so candidate lists come from fact indexes."""
        remaining = list(vars)
        placed = {free}
        order = []
        while remaining:
            def score(v):
                s = 0
                for a in atoms:
                    if v in a.args and any(z in placed for z in a.args):
                        s += 1
                return s

            best = max(remaining, key=lambda v: (score(v), -remaining.index(v)))
            order.append(best)
            placed.add(best)
            remaining.remove(best)
        return order

    def _candidates(self, v, atoms, env):
        best = None
        for a in atoms:
            if v not in a.args:
                continue
            others = [z for z in a.args if z != v]
            if all(z in env for z in others):
                pos = a.args.index(v)
                anchored = None
                for i, z in enumerate(a.args):
                    if z in env:
                        anchored = (i, env[z])
                        break
                if anchored is None:
                    lst = [t[pos] for t in self.by_rel.get(a.rel, ())]
                else:
                    lst = [
                        t[pos]
                        for t in self.by_pos.get((a.rel, *anchored), ())
                    ]
                if best is None or len(lst) < len(best):
                    best = lst
        if best is None:
            return self.adom
        seen = set()
        out = []
        for c in best:
            if c not in seen:
                seen.add(c)
                out.append(c)
        return out

    def _consistent(self, v, env, atoms, neg_atoms, ineqs, guards_by_var):
        for a in atoms:
            if v in a.args and all(z in env for z in a.args):
                if fact(a.rel, *(env[z] for z in a.args)) not in self.facts:
                    return False
        for a in neg_atoms:
            if v in a.args and all(z in env for z in a.args):
                if fact(a.rel, *(env[z] for z in a.args)) in self.facts:
                    return False
        for p, q in ineqs:
            if (p == v or q == v) and p in env and q in env:
                if env[p] == env[q]:
                    return False
        for g in guards_by_var.get(v, ()):
            if not self._check(g, env[v]):
                return False
        return True

    # -- graded chains and ratios ---------------------------------------

    def _graded_chain(self, phi: GhmlExists, env, i) -> bool:
        if i == len(phi.vars):
            return any(
                self._disjunct_holds(atoms, guards, env)
                for atoms, guards in phi.disjuncts
            )
        need = phi.counts[i]
        hits = 0
        for b in self.adom:
            env[phi.vars[i]] = b
            if self._graded_chain(phi, env, i + 1):
                hits += 1
                if hits >= need:
                    del env[phi.vars[i]]
                    return True
        env.pop(phi.vars[i], None)
        return hits >= need

    def _disjunct_holds(self, atoms, guards, env) -> bool:
        for a in atoms:
            if fact(a.rel, *(env[z] for z in a.args)) not in self.facts:
                return False
        return all(self._check(g, env[v]) for v, g in guards)

    def _ratio_counts(self, phi: RhmlRatio, value) -> tuple[int, int]:
        """(numerator, denominator): nu-witness tuples, and those among
        them passing every mu guard."""
        num = den = 0
        env = {phi.free: value}
        guards_by_var: dict[str, list[Formula]] = {}
        for v, g in phi.mu:
            guards_by_var.setdefault(v, []).append(g)

        order = self._order_vars(phi.vars, phi.nu, phi.free)

        def mu_holds(env) -> bool:
            return all(
                self._check(g, env[v]) for v, gs in guards_by_var.items() for g in gs
            )

        def extend(i):
            nonlocal num, den
            if i == len(order):
                den += 1
                if mu_holds(env):
                    num += 1
                return
            v = order[i]
            for cand in self._candidates(v, phi.nu, env):
                env[v] = cand
                if self._consistent(v, env, phi.nu, (), (), {}):
                    extend(i + 1)
                del env[v]

        # check atoms that involve only the free variable
        for a in phi.nu:
            if all(z == phi.free for z in a.args):
                if fact(a.rel, *(value for _ in a.args)) not in self.facts:
                    return (0, 0)
        extend(0)
        return num, den


def eval_formula(phi: Formula, pdb: PointedDatabase) -> bool:
    """Brute-force truth of the unary formula at the root."""
    return Evaluator(pdb.db).check(phi, pdb.root)


# ---------------------------------------------------------------------------
# strict form


def strictify(phi: Formula, schema: Schema, max_blocks: int = 20000) -> Formula:
    """Equivalent strict-form formula: each existential block determines
    its pattern completely (all pairwise inequalities, every atom assigned
    positively or negatively), with variable merges split into separate
    disjuncts.

    The split is exponential in block size; `max_blocks` caps the total
    disjuncts produced for a single block."""
    if not is_eml(phi):
        raise ValueError("strict form is defined for embedding-logic formulas")

    if isinstance(phi, Neg):
        return Neg(strictify(phi.sub, schema, max_blocks))
    if isinstance(phi, Or):
        return Or(strictify(phi.left, schema, max_blocks), strictify(phi.right, schema, max_blocks))
    if isinstance(phi, And):
        return And(strictify(phi.left, schema, max_blocks), strictify(phi.right, schema, max_blocks))

    if isinstance(phi, HmlExists):
        phi = EmlExists(phi.free, phi.vars, phi.atoms, (), (), phi.guards)
    if not isinstance(phi, EmlExists):
        raise ValueError(f"cannot strictify node {type(phi).__name__}")

    free = phi.free
    scope = (free, *phi.vars)
    guards = tuple((v, strictify(g, schema, max_blocks)) for v, g in phi.guards)
    blocks: list[Formula] = []

    forbidden = {frozenset(p) for p in phi.inequalities}
    for parts in _partitions(scope):
        rep: dict[str, str] = {}
        ok = True
        for block in parts:
            if any(frozenset((a, b)) in forbidden for a in block for b in block if a < b):
                ok = False
                break
            r = free if free in block else min(block)
            for z in block:
                rep[z] = r
        if not ok:
            continue
        reps = sorted({rep[z] for z in scope}, key=lambda r: (r != free, r))
        m_pos = {Atom(a.rel, tuple(rep[z] for z in a.args)) for a in phi.atoms}
        m_neg = {Atom(a.rel, tuple(rep[z] for z in a.args)) for a in phi.neg_atoms}
        if m_pos & m_neg:
            continue
        universe = [
            Atom(rel, args)
            for rel, ar in sorted(schema.relations.items())
            for args in itertools.product(reps, repeat=ar)
        ]
        frees = [a for a in universe if a not in m_pos and a not in m_neg]
        if len(blocks) + 2 ** len(frees) > max_blocks:
            raise ValueError(
                f"strict form would need more than {max_blocks} disjuncts; "
                "refuse rather than explode"
            )
        m_guards = tuple((rep[v], g) for v, g in guards)
        all_ineqs = tuple(itertools.combinations(reps, 2))
        for mask in itertools.product((False, True), repeat=len(frees)):
            pos = sorted(m_pos | {a for a, take in zip(frees, mask) if take},
                         key=lambda a: (a.rel, a.args))
            neg = [a for a in universe if a not in set(pos)]
            blocks.append(
                EmlExists(
                    free,
                    tuple(r for r in reps if r != free),
                    tuple(pos),
                    tuple(neg),
                    all_ineqs,
                    m_guards,
                )
            )
    if not blocks:
        # no consistent completion: an unsatisfiable block
        rels = sorted(schema.relations.items())
        if rels:
            rel, ar = rels[0]
            a = Atom(rel, tuple(free for _ in range(ar)))
            return EmlExists(free, (), (a,), (a,), (), ())
        return EmlExists(
            free, (), (), (), (), ((free, Neg(HmlExists(free, (), (), ()))),)
        )
    out = blocks[0]
    for b in blocks[1:]:
        out = Or(out, b)
    return out


def _partitions(items: tuple[str, ...]):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for sub in _partitions(rest):
        for i, block in enumerate(sub):
            yield sub[:i] + [block | {first}] + sub[i + 1 :]
        yield [{first}] + sub


# ---------------------------------------------------------------------------
# builtin catalog


def _loop(v="w") -> Formula:
    return HmlExists(v, (), (atom("E", v, v),), ())


def sun_formula() -> Formula:
    """x1 lies on a 6-cycle of distinct vertices, each of which has some
    neighbor with exactly one out-edge (a degree-1 neighbor on symmetric
    graphs)."""
    ge1 = EmlExists("u", ("z",), (atom("E", "u", "z"),))
    ge2 = EmlExists(
        "u",
        ("z1", "z2"),
        (atom("E", "u", "z1"), atom("E", "u", "z2")),
        (),
        (("z1", "z2"),),
    )
    exactly_one = And(ge1, Neg(ge2))
    pendant = EmlExists(
        "w", ("y",), (atom("E", "w", "y"),), (), (), (("y", exactly_one),)
    )
    xs = tuple(f"x{i}" for i in range(1, 7))
    cycle = tuple(
        atom("E", xs[i], xs[(i + 1) % 6]) for i in range(6)
    )
    ineqs = tuple(itertools.combinations(xs, 2))
    guards = tuple((v, pendant) for v in xs)
    return EmlExists("x1", xs[1:], cycle, (), ineqs, guards)


def sun_strict_formula() -> Formula:
    """Fully-pinned sun variant: an induced symmetric 6-cycle through x1
    whose every vertex has a symmetric degree-1 pendant, with every atom
    sign and inequality spelled out so each block is already strict.

    Agrees with `sun` on the symmetric, loop-free unit graphs the sun
    generator emits; the pinning is what makes the formula compilable to
    embedding-mode networks without a disjunct explosion."""
    ge2 = EmlExists(
        "u",
        ("z1", "z2"),
        (atom("E", "u", "z1"), atom("E", "u", "z2"),
         atom("E", "z1", "u"), atom("E", "z2", "u")),
        (atom("E", "u", "u"), atom("E", "z1", "z1"), atom("E", "z2", "z2"),
         atom("E", "z1", "z2"), atom("E", "z2", "z1")),
        (("u", "z1"), ("u", "z2"), ("z1", "z2")),
    )
    pendant = EmlExists(
        "w",
        ("y",),
        (atom("E", "w", "y"), atom("E", "y", "w")),
        (atom("E", "w", "w"), atom("E", "y", "y")),
        (("w", "y"),),
        (("y", Neg(ge2)),),
    )
    xs = tuple(f"x{i}" for i in range(1, 7))
    pos = tuple(atom("E", xs[i], xs[(i + 1) % 6]) for i in range(6)) + tuple(
        atom("E", xs[(i + 1) % 6], xs[i]) for i in range(6)
    )
    universe = [atom("E", v, w) for v in xs for w in xs]
    neg = tuple(a for a in universe if a not in set(pos))
    ineqs = tuple(itertools.combinations(xs, 2))
    return EmlExists("x1", xs[1:], pos, neg, ineqs, tuple((v, pendant) for v in xs))


def local_transitivity_formula() -> Formula:
    """Raw statement: no 2-step successor is missing the shortcut edge."""
    return Neg(
        EmlExists(
            "x",
            ("y1", "y2"),
            (atom("E", "x", "y1"), atom("E", "y1", "y2")),
            (atom("E", "x", "y2"),),
        )
    )


def local_transitivity_counts(bound: int) -> Formula:
    """Count-comparison form: for every n <= bound, having n two-step
    walks implies n of them close into a shortcut triangle.  Equivalent to
    local transitivity whenever the walk count is at most `bound`."""
    paths = (atom("E", "x", "y1"), atom("E", "y1", "y2"))
    tris = paths + (atom("E", "x", "y2"),)
    out: Formula | None = None
    for n in range(1, bound + 1):
        many_paths = GhmlMinusExists(n, "x", ("y1", "y2"), paths)
        many_tris = GhmlMinusExists(n, "x", ("y1", "y2"), tris)
        clause = Neg(And(many_paths, Neg(many_tris)))
        out = clause if out is None else And(out, clause)
    assert out is not None
    return out


def triangle_ratio_formula() -> Formula:
    """At least half of the triangles through x have all-looped vertices."""
    return RhmlRatio(
        ">=",
        Fraction(1, 2),
        "x",
        ("y", "z"),
        (("x", _loop()), ("y", _loop()), ("z", _loop())),
        (atom("E", "x", "y"), atom("E", "y", "z"), atom("E", "z", "x")),
    )


def builtin_formulas() -> dict[str, Formula]:
    return {
        "sun": sun_formula(),
        "sun_strict": sun_strict_formula(),
        "local_transitivity": local_transitivity_formula(),
        "local_transitivity_counts": local_transitivity_counts(9),
        "triangle_ratio": triangle_ratio_formula(),
        "has_out_edge": HmlExists("x", ("y",), (atom("E", "x", "y"),)),
        "sink": Neg(HmlExists("x", ("y",), (atom("E", "x", "y"),))),
        "out_degree_2": GhmlMinusExists(2, "x", ("y",), (atom("E", "x", "y"),)),
    }


# ---------------------------------------------------------------------------
# surface syntax: s-expressions
#
#   (exists (y) (and (E x y) (not (exists (z) (E y z)))))
#   (exists>= 2 (y) (E x y))
#   (exists! (y) (E x y) (not (E y x)) (!= x y))
#   (ratio>= 1/2 (y z) ((loop x) ...) ((E x y) ...))
#
# Relation names start with an upper-case letter; everything else is a
# keyword or a variable.  A formula's free variable is inferred as the
# unique variable left unbound.

_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def _tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text)


def _read(tokens: list[str], pos: int):
    tok = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            item, pos = _read(tokens, pos)
            items.append(item)
        if pos >= len(tokens):
            raise ValueError("unbalanced '('")
        return items, pos + 1
    if tok == ")":
        raise ValueError("unbalanced ')'")
    return tok, pos + 1


def parse_formula(text: str) -> Formula:
    tokens = _tokenize(text)
    if not tokens:
        raise ValueError("empty formula text")
    sexp, pos = _read(tokens, 0)
    if pos != len(tokens):
        raise ValueError("trailing input after formula")
    free = sorted(_free_vars(sexp))
    if len(free) > 1:
        raise ValueError(f"formula must have exactly one free variable, found {free}")
    # a formula that never mentions its free variable is constant; call it x
    return _build(sexp, free[0] if free else "x")


def _is_rel(head) -> bool:
    return isinstance(head, str) and head[:1].isupper()


def _free_vars(sexp, bound=frozenset()) -> set[str]:
    if isinstance(sexp, str):
        return set()
    head = sexp[0]
    if _is_rel(head):
        return {v for v in sexp[1:] if v not in bound}
    if head in ("not", "and", "or"):
        out = set()
        for sub in sexp[1:]:
            out |= _free_vars(sub, bound)
        return out
    if head == "!=":
        return {v for v in sexp[1:] if v not in bound}
    if head == "@":
        out = set() if sexp[1] in bound else {sexp[1]}
        return out | _free_vars(sexp[2], bound)
    if head in ("exists", "exists!"):
        inner = bound | set(sexp[1])
        out = set()
        for sub in sexp[2:]:
            out |= _free_vars(sub, inner)
        return out
    if head == "exists>=":
        inner = bound | set(sexp[2])
        out = set()
        for sub in sexp[3:]:
            out |= _free_vars(sub, inner)
        return out
    if head in ("ratio>=", "ratio>"):
        inner = bound | set(sexp[2])
        out = set()
        for sub in sexp[3] + sexp[4]:
            out |= _free_vars(sub, inner)
        return out
    raise ValueError(f"unknown form {head!r}")


def _build(sexp, free: str) -> Formula:
    if isinstance(sexp, str):
        raise ValueError(f"bare symbol {sexp!r} is not a formula")
    head = sexp[0]
    if _is_rel(head):
        # an atom used as a formula: a zero-variable existential
        return HmlExists(free, (), (Atom(head, tuple(sexp[1:])),), ())
    if head == "not":
        (sub,) = sexp[1:]
        return Neg(_build(sub, free))
    if head == "or":
        subs = [_build(s, free) for s in sexp[1:]]
        if len(subs) < 2:
            raise ValueError("(or ...) needs at least two disjuncts")
        out = subs[-1]
        for s in reversed(subs[:-1]):
            out = Or(s, out)
        return out
    if head == "and":
        subs = [_build(s, free) for s in sexp[1:]]
        if len(subs) < 2:
            raise ValueError("(and ...) needs at least two conjuncts")
        out = subs[-1]
        for s in reversed(subs[:-1]):
            out = And(s, out)
        return out
    if head in ("exists", "exists!", "exists>="):
        if head == "exists>=":
            count = int(sexp[1])
            vars = tuple(sexp[2])
            body = sexp[3:]
        else:
            count = None
            vars = tuple(sexp[1])
            body = sexp[2:]
        if len(body) == 1 and isinstance(body[0], list) and body[0][0] == "and":
            body = body[0][1:]
        atoms, negs, ineqs, guards = [], [], [], []
        scope = {free, *vars}
        for item in body:
            if _is_rel(item[0]):
                atoms.append(Atom(item[0], tuple(item[1:])))
            elif item[0] == "!=":
                ineqs.append((item[1], item[2]))
            elif (
                item[0] == "not"
                and isinstance(item[1], list)
                and _is_rel(item[1][0])
                and all(v in scope for v in item[1][1:])
            ):
                negs.append(Atom(item[1][0], tuple(item[1][1:])))
            else:
                gv, body = _unanchor(item, scope, default=free)
                guards.append((gv, _build(body, gv)))
        if head == "exists>=":
            if negs or ineqs:
                raise ValueError("counting blocks take only positive atoms")
            return GhmlMinusExists(count, free, vars, tuple(atoms), tuple(guards))
        if head == "exists!" or negs or ineqs:
            return EmlExists(
                free, vars, tuple(atoms), tuple(negs), tuple(ineqs), tuple(guards)
            )
        return HmlExists(free, vars, tuple(atoms), tuple(guards))
    if head in ("ratio>=", "ratio>"):
        t = _parse_rational(sexp[1])
        vars = tuple(sexp[2])
        scope = {free, *vars}
        mu = []
        for item in sexp[3]:
            gv, body = _unanchor(item, scope, default=free)
            mu.append((gv, _build(body, gv)))
        nu = []
        for item in sexp[4]:
            if not _is_rel(item[0]):
                raise ValueError("the witness part of a ratio block takes atoms only")
            nu.append(Atom(item[0], tuple(item[1:])))
        return RhmlRatio(
            ">=" if head == "ratio>=" else ">", t, free, vars, tuple(mu), tuple(nu)
        )
    raise ValueError(f"unknown form {head!r}")


def _guard_var(sexp, scope, default: str) -> str:
    fv = {v for v in _free_vars(sexp) if v in scope}
    if len(fv) > 1:
        raise ValueError(
            f"subformula must use exactly one in-scope variable, found {sorted(fv)}"
        )
    # constant subformulas apply anywhere; attach them to the block's free var
    return fv.pop() if fv else default


def _unanchor(item, scope, default: str):
    """Resolve a guard-position conjunct to (variable, body).

    `(@ v body)` pins the attachment explicitly — needed when the body
    never mentions its variable, so nothing else could identify it."""
    if isinstance(item, list) and item and item[0] == "@":
        if len(item) != 3 or not isinstance(item[1], str):
            raise ValueError("(@ var formula) takes exactly a variable and a body")
        if item[1] not in scope:
            raise ValueError(f"(@ {item[1]} ...) names an unbound variable")
        return item[1], item[2]
    return _guard_var(item, scope, default), item


def _parse_rational(tok: str) -> Fraction:
    num, _, den = tok.partition("/")
    return Fraction(int(num), int(den) if den else 1)


def print_formula(phi: Formula) -> str:
    return _print(phi, free_var(phi))


def _print(phi: Formula, shown: str) -> str:
    if isinstance(phi, Neg):
        return f"(not {_print(phi.sub, shown)})"
    if isinstance(phi, Or):
        return f"(or {_print(phi.left, shown)} {_print(phi.right, shown)})"
    if isinstance(phi, And):
        return f"(and {_print(phi.left, shown)} {_print(phi.right, shown)})"
    if isinstance(phi, (HmlExists, GhmlMinusExists, EmlExists)):
        ren = _renaming(phi, shown)
        parts = [
            f"({a.rel} {' '.join(ren[z] for z in a.args)})" for a in phi.atoms
        ]
        if isinstance(phi, EmlExists):
            parts += [
                f"(not ({a.rel} {' '.join(ren[z] for z in a.args)}))"
                for a in phi.neg_atoms
            ]
            parts += [f"(!= {ren[a]} {ren[b]})" for a, b in phi.inequalities]
        # an And guard is indistinguishable from the block's conjunction
        # sugar when re-parsed, so print it pre-split
        parts += [_anchored(g, ren[v]) for v, g in _split_and_guards(phi.guards)]
        vars_s = " ".join(ren[v] for v in phi.vars)
        if isinstance(phi, GhmlMinusExists):
            return f"(exists>= {phi.count} ({vars_s}) {' '.join(parts)})"
        marker = (
            "exists!"
            if isinstance(phi, EmlExists) and not (phi.neg_atoms or phi.inequalities)
            else "exists"
        )
        return f"({marker} ({vars_s}) {' '.join(parts)})"
    if isinstance(phi, RhmlRatio):
        ren = _renaming(phi, shown)
        mu = " ".join(_anchored(g, ren[v]) for v, g in phi.mu)
        # (mu guards sit in their own list, so And guards are unambiguous
        # there; only block bodies need the split above)
        nu = " ".join(
            f"({a.rel} {' '.join(ren[z] for z in a.args)})" for a in phi.nu
        )
        t = phi.threshold
        ts = str(t.numerator) if t.denominator == 1 else f"{t.numerator}/{t.denominator}"
        head = "ratio>=" if phi.cmp == ">=" else "ratio>"
        vars_s = " ".join(ren[v] for v in phi.vars)
        return f"({head} {ts} ({vars_s}) ({mu}) ({nu}))"
    if isinstance(phi, GhmlExists):
        raise ValueError("sequence-counting blocks have no surface syntax")
    raise TypeError(f"not a formula node: {phi!r}")


def _anchored(g: Formula, shown: str) -> str:
    """Print a guard body, pinning its variable with (@ ...) whenever the
    body alone would not reveal it."""
    body = _print(g, shown)
    return body if _free_occurs(g) else f"(@ {shown} {body})"


def _free_occurs(phi: Formula) -> bool:
    """Whether the formula's free variable is identifiable from its body:
    it appears in an atom or inequality, or a guard that itself passes
    this test is attached to it."""
    fv = free_var(phi)

    def occ(node: Formula) -> bool:
        if isinstance(node, (Neg, Or, And)):
            return any(occ(c) for c in children(node))
        if any(fv in a.args for a in _node_atoms(node)):
            return True
        if isinstance(node, EmlExists) and any(fv in p for p in node.inequalities):
            return True
        return any(v == fv and _free_occurs(g) for v, g in _node_guards(node))

    return occ(phi)


def _split_and_guards(guards) -> list[Guard]:
    out: list[Guard] = []
    for v, g in guards:
        stack = [g]
        while stack:
            top = stack.pop()
            if isinstance(top, And):
                stack.append(top.right)
                stack.append(top.left)
            else:
                out.append((v, top))
    return out


def _renaming(phi, shown: str) -> dict[str, str]:
    """Display the node's free variable as `shown`; rename any bound
    variable that would collide."""
    ren = {phi.free: shown}
    used = {shown}
    for v in phi.vars:
        name = v
        while name in used:
            name += "_"
        ren[v] = name
        used.add(name)
    return ren
