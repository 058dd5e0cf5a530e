"""Feed-forward nets and the numeric kit the network runtime trains with.

Two backends share one Fnn type:

- exact: weights are Fractions, evaluation is exact rational arithmetic.
  Compiled networks live here, where "every coordinate is exactly 0 or 1"
  is a meaningful statement.
- float: weights are numpy arrays, evaluation is float, and reverse-mode
  gradients are available (GradTape for a single Fnn, Tensor for the
  full network computation during training).

The Tensor op set is deliberately narrow: matmul, elementwise arithmetic,
the activations, row gathers and segment reductions — exactly what
evaluating and training the network runtime requires, nothing more.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

# ---------------------------------------------------------------------------
# activations


@dataclass(frozen=True)
class Act:
    kind: str
    slope: float = 0.0

    def __repr__(self):
        return f"Act({self.kind}{f', {self.slope}' if self.kind == 'leaky_relu' else ''})"


RELU = Act("relu")
RELU_STAR = Act("relu_star")
IDENTITY = Act("identity")
HEAVISIDE = Act("heaviside")


def leaky(slope: float = 0.01) -> Act:
    return Act("leaky_relu", slope)


def act_exact(act: Act, x: Fraction) -> Fraction:
    if act.kind == "identity":
        return x
    if act.kind == "relu":
        return x if x > 0 else Fraction(0)
    if act.kind == "relu_star":
        if x <= 0:
            return Fraction(0)
        return x if x < 1 else Fraction(1)
    if act.kind == "heaviside":
        return Fraction(1) if x >= 0 else Fraction(0)
    if act.kind == "leaky_relu":
        return x if x >= 0 else x * Fraction(act.slope).limit_denominator(10**9)
    raise ValueError(f"unknown activation {act.kind}")


def act_float(act: Act, x: np.ndarray) -> np.ndarray:
    if act.kind == "identity":
        return x
    if act.kind == "relu":
        return np.maximum(x, 0.0)
    if act.kind == "relu_star":
        return np.clip(x, 0.0, 1.0)
    if act.kind == "heaviside":
        return (x >= 0.0).astype(x.dtype)
    if act.kind == "leaky_relu":
        return np.where(x >= 0.0, x, act.slope * x)
    raise ValueError(f"unknown activation {act.kind}")


def act_derivative(act: Act, pre: np.ndarray) -> np.ndarray:
    """Derivative w.r.t. the pre-activation; 0 at ReLU-family kinks."""
    if act.kind == "identity":
        return np.ones_like(pre)
    if act.kind == "relu":
        return (pre > 0.0).astype(pre.dtype)
    if act.kind == "relu_star":
        return ((pre > 0.0) & (pre < 1.0)).astype(pre.dtype)
    if act.kind == "leaky_relu":
        return np.where(pre >= 0.0, 1.0, act.slope).astype(pre.dtype)
    if act.kind == "heaviside":
        raise ValueError("heaviside has no gradient; it is forward-only")
    raise ValueError(f"unknown activation {act.kind}")


# ---------------------------------------------------------------------------
# Fnn: affine layers with activations, exact or float


RationalMatrix = tuple  # of tuple of Fraction, shape (d_in, d_out)


@dataclass
class FnnLayer:
    weight: object  # RationalMatrix or np.ndarray of shape (d_in, d_out)
    bias: object  # tuple of Fraction or np.ndarray of shape (d_out,)
    act: Act

    @property
    def exact(self) -> bool:
        return not isinstance(self.weight, np.ndarray)

    @property
    def in_dim(self) -> int:
        return len(self.weight)

    @property
    def out_dim(self) -> int:
        return len(self.bias)


class Fnn:
    """A sequence of affine layers, each followed by an activation."""

    def __init__(self, layers: Sequence[FnnLayer]):
        if not layers:
            raise ValueError("an Fnn needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
        self.layers = list(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def exact(self) -> bool:
        return self.layers[0].exact

    def __repr__(self):
        dims = [self.in_dim] + [l.out_dim for l in self.layers]
        return f"Fnn({'x'.join(map(str, dims))}, {'exact' if self.exact else 'float'})"


def rational_layer(rows: Sequence[Sequence], bias: Sequence, act: Act = RELU_STAR) -> FnnLayer:
    w = tuple(tuple(Fraction(x) for x in row) for row in rows)
    b = tuple(Fraction(x) for x in bias)
    for row in w:
        if len(row) != len(b):
            raise ValueError("weight row length must equal bias length")
    return FnnLayer(w, b, act)


def rational_fnn(rows: Sequence[Sequence], bias: Sequence, act: Act = RELU_STAR) -> Fnn:
    return Fnn([rational_layer(rows, bias, act)])


def float_layer(weight: np.ndarray, bias: np.ndarray, act: Act) -> FnnLayer:
    return FnnLayer(np.asarray(weight), np.asarray(bias), act)


def fnn_forward(net: Fnn, x):
    """Evaluate; x is a tuple of Fractions (exact) or an array (float).

    Float mode broadcasts over leading row dimensions: (n, d_in) inputs
    give (n, d_out) outputs.
    """
    if net.exact:
        vec = tuple(x)
        for layer in net.layers:
            if len(vec) != layer.in_dim:
                raise ValueError(f"expected input of length {layer.in_dim}, got {len(vec)}")
            pre = list(layer.bias)
            for i, xi in enumerate(vec):
                if xi:
                    row = layer.weight[i]
                    for j in range(len(pre)):
                        if row[j]:
                            pre[j] += xi * row[j]
            vec = tuple(act_exact(layer.act, p) for p in pre)
        return vec
    out = np.asarray(x, dtype=float)
    for layer in net.layers:
        out = act_float(layer.act, out @ layer.weight + layer.bias)
    return out


@dataclass
class GradTape:
    """Primal values recorded by one float forward pass."""

    inputs: list  # input to each layer
    pres: list  # pre-activation of each layer


def fnn_forward_tape(net: Fnn, x: np.ndarray):
    if net.exact:
        raise ValueError("gradients are float-mode only")
    tape = GradTape(inputs=[], pres=[])
    out = np.asarray(x, dtype=float)
    for layer in net.layers:
        tape.inputs.append(out)
        pre = out @ layer.weight + layer.bias
        tape.pres.append(pre)
        out = act_float(layer.act, pre)
    return out, tape


def fnn_backward(net: Fnn, tape: GradTape, upstream: np.ndarray):
    """Reverse-mode gradients for every weight/bias and the input.

    Returns (weight_grads, bias_grads, input_grad), aligned with
    net.layers.
    """
    if len(tape.inputs) != len(net.layers):
        raise ValueError("tape does not match network")
    w_grads = [None] * len(net.layers)
    b_grads = [None] * len(net.layers)
    g = np.asarray(upstream, dtype=float)
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        g = g * act_derivative(layer.act, tape.pres[i])
        x = tape.inputs[i]
        if x.ndim == 1:
            w_grads[i] = np.outer(x, g)
            b_grads[i] = g
        else:
            w_grads[i] = x.T @ g
            b_grads[i] = g.sum(axis=0)
        g = g @ layer.weight.T
    return w_grads, b_grads, g


def fnn_to_float(net: Fnn) -> Fnn:
    if not net.exact:
        return net
    layers = [
        FnnLayer(
            np.array([[float(x) for x in row] for row in l.weight], dtype=float).reshape(
                l.in_dim, l.out_dim
            ),
            np.array([float(b) for b in l.bias], dtype=float),
            l.act,
        )
        for l in net.layers
    ]
    return Fnn(layers)


# --- serialization ----------------------------------------------------------


def _act_to_obj(act: Act):
    if act.kind == "leaky_relu":
        return {"kind": act.kind, "slope": act.slope}
    return {"kind": act.kind}


def _act_from_obj(obj) -> Act:
    return Act(obj["kind"], obj.get("slope", 0.0))


def _frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def fnn_to_obj(net: Fnn):
    layers = []
    for l in net.layers:
        if l.exact:
            layers.append(
                {
                    "weight": [[_frac_str(x) for x in row] for row in l.weight],
                    "bias": [_frac_str(b) for b in l.bias],
                    "act": _act_to_obj(l.act),
                    "in_dim": l.in_dim,
                    "out_dim": l.out_dim,
                }
            )
        else:
            layers.append(
                {
                    "weight": [[float(x) for x in row] for row in l.weight],
                    "bias": [float(b) for b in l.bias],
                    "act": _act_to_obj(l.act),
                    "in_dim": l.in_dim,
                    "out_dim": l.out_dim,
                }
            )
    return {"layers": layers}


def _parse_frac(s: str) -> Fraction:
    num, _, den = s.partition("/")
    return Fraction(int(num), int(den) if den else 1)


def fnn_from_obj(obj) -> Fnn:
    layers = []
    for lo in obj["layers"]:
        rows = lo["weight"]
        exact = any(isinstance(x, str) for row in rows for x in row) or any(
            isinstance(b, str) for b in lo["bias"]
        )
        if not rows:  # zero input dim: decide from the bias entries
            exact = any(isinstance(b, str) for b in lo["bias"])
        if exact:
            w = tuple(tuple(_parse_frac(str(x)) for x in row) for row in rows)
            b = tuple(_parse_frac(str(x)) for x in lo["bias"])
            layers.append(FnnLayer(w, b, _act_from_obj(lo["act"])))
        else:
            w = np.array(rows, dtype=float).reshape(lo["in_dim"], lo["out_dim"])
            layers.append(
                FnnLayer(w, np.array(lo["bias"], dtype=float), _act_from_obj(lo["act"]))
            )
    return Fnn(layers)


# ---------------------------------------------------------------------------
# optimizer and loss


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; params are modified in place.

    state is None on the first call; pass the returned state back in.
    """
    if state is None:
        state = {
            "t": 0,
            "m": [np.zeros_like(p) for p in params],
            "v": [np.zeros_like(p) for p in params],
        }
    state["t"] += 1
    t = state["t"]
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        if g is None:
            continue
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * (g * g)
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        p -= lr * mhat / (np.sqrt(vhat) + eps)
    return params, state


def bce_with_logits(logit: float, label: int):
    """Numerically stable binary cross entropy on one logit.

    Returns (loss, d loss / d logit)."""
    z = float(logit)
    y = float(label)
    loss = max(z, 0.0) - z * y + math.log1p(math.exp(-abs(z)))
    if z >= 0:
        sig = 1.0 / (1.0 + math.exp(-z))
    else:
        e = math.exp(z)
        sig = e / (1.0 + e)
    return loss, sig - y


def layer_norm(x, gamma, beta, eps=1e-5):
    """Normalize a vector (or each row) to zero mean / unit variance, then
    scale by gamma and shift by beta."""
    x = np.asarray(x, dtype=float)
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    xhat = (x - mu) / np.sqrt(var + eps)
    return xhat * np.asarray(gamma) + np.asarray(beta)


def layer_norm_tape(x, gamma, beta, eps=1e-5):
    x = np.asarray(x, dtype=float)
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    cache = (xhat, inv, np.asarray(gamma))
    return xhat * np.asarray(gamma) + np.asarray(beta), cache


def layer_norm_backward(cache, dy):
    """Gradients (dx, dgamma, dbeta) for layer_norm_tape's output."""
    xhat, inv, gamma = cache
    d = xhat.shape[-1]
    dy = np.asarray(dy, dtype=float)
    dxhat = dy * gamma
    # standard LayerNorm backward, vectorized over rows
    sum_dxhat = dxhat.sum(axis=-1, keepdims=True)
    sum_dxhat_xhat = (dxhat * xhat).sum(axis=-1, keepdims=True)
    dx = (dxhat - sum_dxhat / d - xhat * sum_dxhat_xhat / d) * inv
    if dy.ndim == 1:
        dgamma = dy * xhat
        dbeta = dy.copy()
    else:
        dgamma = (dy * xhat).sum(axis=0)
        dbeta = dy.sum(axis=0)
    return dx, dgamma, dbeta


# ---------------------------------------------------------------------------
# Tensor: reverse-mode autodiff over the handful of ops network training
# needs.  Parents/closures form a Wengert list; backward() runs it in
# reverse topological order.


class Tensor:
    __slots__ = ("data", "grad", "parents", "_backward", "requires_grad")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data)
        self.grad = None
        self.parents = parents
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data, dtype=g.dtype if g.dtype.kind == "f" else float)
        self.grad += g

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() starts from a scalar")
        topo: list[Tensor] = []
        seen = set()

        def visit(t: Tensor):
            if id(t) in seen or not t.requires_grad:
                return
            seen.add(id(t))
            for p in t.parents:
                visit(p)
            topo.append(t)

        visit(self)
        self.grad = np.ones_like(self.data, dtype=float)
        for t in reversed(topo):
            if t._backward is not None and t.grad is not None:
                t._backward(t.grad)

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor{self.shape}"


def t_const(data) -> Tensor:
    return Tensor(data)


def t_param(data) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=True)


def t_add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, parents=(a, b))

    def back(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.data.shape))

    out._backward = back
    return out


def t_sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data, parents=(a, b))

    def back(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(-g, b.data.shape))

    out._backward = back
    return out


def t_mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, parents=(a, b))

    def back(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.data.shape))

    out._backward = back
    return out


def t_scale(a: Tensor, s: float) -> Tensor:
    out = Tensor(a.data * s, parents=(a,))

    def back(g):
        if a.requires_grad:
            a._accum(g * s)

    out._backward = back
    return out


def _unbroadcast(g, shape):
    """Sum g down to `shape` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, (gs, s) in enumerate(zip(g.shape, shape)):
        if s == 1 and gs != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def t_matmul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data @ b.data, parents=(a, b))

    def back(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape))

    out._backward = back
    return out


def t_leaky_relu(a: Tensor, slope: float) -> Tensor:
    mask = a.data >= 0
    out = Tensor(np.where(mask, a.data, slope * a.data), parents=(a,))

    def back(g):
        if a.requires_grad:
            a._accum(np.where(mask, g, slope * g))

    out._backward = back
    return out


def t_relu_star(a: Tensor) -> Tensor:
    mask = (a.data > 0) & (a.data < 1)
    out = Tensor(np.clip(a.data, 0.0, 1.0), parents=(a,))

    def back(g):
        if a.requires_grad:
            a._accum(np.where(mask, g, 0.0))

    out._backward = back
    return out


def t_maximum(a: Tensor, b: Tensor) -> Tensor:
    take_a = a.data >= b.data
    out = Tensor(np.where(take_a, a.data, b.data), parents=(a, b))

    def back(g):
        if a.requires_grad:
            a._accum(_unbroadcast(np.where(take_a, g, 0.0), a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(np.where(take_a, 0.0, g), b.data.shape))

    out._backward = back
    return out


def t_minimum(a: Tensor, b: Tensor) -> Tensor:
    take_a = a.data <= b.data
    out = Tensor(np.where(take_a, a.data, b.data), parents=(a, b))

    def back(g):
        if a.requires_grad:
            a._accum(_unbroadcast(np.where(take_a, g, 0.0), a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(np.where(take_a, 0.0, g), b.data.shape))

    out._backward = back
    return out


def t_concat_cols(parts: Sequence[Tensor]) -> Tensor:
    out = Tensor(np.concatenate([p.data for p in parts], axis=-1), parents=tuple(parts))
    widths = [p.data.shape[-1] for p in parts]

    def back(g):
        start = 0
        for p, w in zip(parts, widths):
            if p.requires_grad:
                p._accum(g[..., start : start + w])
            start += w

    out._backward = back
    return out


def t_rows(a: Tensor, rows: slice | np.ndarray) -> Tensor:
    """Select rows (basic slice or index array); ad-hoc gather for small uses."""
    out = Tensor(a.data[rows], parents=(a,))

    def back(g):
        if a.requires_grad:
            ga = np.zeros_like(a.data, dtype=float)
            np.add.at(ga, rows, g)
            a._accum(ga)

    out._backward = back
    return out


class GatherPlan:
    """Precomputed gather of source rows by an index array, with a fast
    segment-sum backward (rows grouped by source index)."""

    def __init__(self, idx: np.ndarray, n_source: int):
        self.idx = np.asarray(idx, dtype=np.int64)
        self.n_source = n_source
        self.perm = np.argsort(self.idx, kind="stable")
        sorted_ids = self.idx[self.perm]
        self.starts = np.searchsorted(sorted_ids, np.arange(n_source))
        ends = np.searchsorted(sorted_ids, np.arange(n_source), side="right")
        self.counts = ends - self.starts
        self.nonempty = np.flatnonzero(self.counts)


def t_gather(a: Tensor, plan: GatherPlan) -> Tensor:
    out = Tensor(a.data[plan.idx], parents=(a,))

    def back(g):
        if not a.requires_grad:
            return
        gs = g[plan.perm]
        ga = np.zeros_like(a.data, dtype=float)
        if len(plan.nonempty):
            ga[plan.nonempty] = np.add.reduceat(gs, plan.starts[plan.nonempty], axis=0)
        a._accum(ga)

    out._backward = back
    return out


class SegmentLayout:
    """Rows pre-grouped by segment id (non-decreasing); reductions per segment.

    Empty segments reduce to 0 (the empty-aggregation convention).
    """

    def __init__(self, sorted_ids: np.ndarray, n_segments: int):
        ids = np.asarray(sorted_ids, dtype=np.int64)
        if len(ids) and np.any(np.diff(ids) < 0):
            raise ValueError("segment ids must be sorted")
        self.ids = ids
        self.n_segments = n_segments
        self.starts = np.searchsorted(ids, np.arange(n_segments))
        ends = np.searchsorted(ids, np.arange(n_segments), side="right")
        self.counts = (ends - self.starts).astype(np.int64)
        self.nonempty = np.flatnonzero(self.counts)


def t_segment_sum(a: Tensor, layout: SegmentLayout) -> Tensor:
    data = np.zeros((layout.n_segments,) + a.data.shape[1:], dtype=a.data.dtype)
    if len(layout.nonempty):
        data[layout.nonempty] = np.add.reduceat(
            a.data, layout.starts[layout.nonempty], axis=0
        )
    out = Tensor(data, parents=(a,))

    def back(g):
        if a.requires_grad:
            a._accum(g[layout.ids])

    out._backward = back
    return out


def t_segment_mean(a: Tensor, layout: SegmentLayout) -> Tensor:
    sums = np.zeros((layout.n_segments,) + a.data.shape[1:], dtype=float)
    if len(layout.nonempty):
        sums[layout.nonempty] = np.add.reduceat(
            a.data, layout.starts[layout.nonempty], axis=0
        )
    denom = np.maximum(layout.counts, 1).astype(float).reshape(
        (layout.n_segments,) + (1,) * (a.data.ndim - 1)
    )
    out = Tensor(sums / denom, parents=(a,))

    def back(g):
        if a.requires_grad:
            a._accum((g / denom)[layout.ids])

    out._backward = back
    return out


def _segment_extreme(a: Tensor, layout: SegmentLayout, kind: str) -> Tensor:
    ufunc = np.maximum if kind == "max" else np.minimum
    data = np.zeros((layout.n_segments,) + a.data.shape[1:], dtype=a.data.dtype)
    if len(layout.nonempty):
        data[layout.nonempty] = ufunc.reduceat(a.data, layout.starts[layout.nonempty], axis=0)
    out = Tensor(data, parents=(a,))

    def back(g):
        if not a.requires_grad:
            return
        winner = a.data == data[layout.ids]
        # route each segment/component's gradient to the first winning row
        cum = winner.astype(np.int64).cumsum(axis=0)
        row_start = layout.starts[layout.ids]
        base = cum[row_start] - winner[row_start]
        first = winner & ((cum - base) == 1)
        a._accum(np.where(first, g[layout.ids], 0.0))

    out._backward = back
    return out


def t_segment_max(a: Tensor, layout: SegmentLayout) -> Tensor:
    return _segment_extreme(a, layout, "max")


def t_segment_min(a: Tensor, layout: SegmentLayout) -> Tensor:
    return _segment_extreme(a, layout, "min")


def t_layer_norm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    y, cache = layer_norm_tape(a.data, gamma.data, beta.data, eps)
    out = Tensor(y, parents=(a, gamma, beta))

    def back(g):
        dx, dgamma, dbeta = layer_norm_backward(cache, g)
        if a.requires_grad:
            a._accum(dx)
        if gamma.requires_grad:
            gamma._accum(dgamma)
        if beta.requires_grad:
            beta._accum(dbeta)

    out._backward = back
    return out


def t_bce_with_logits_mean(logits: Tensor, labels: np.ndarray) -> Tensor:
    z = logits.data.reshape(-1)
    y = np.asarray(labels, dtype=float).reshape(-1)
    if z.shape != y.shape:
        raise ValueError("logits and labels differ in length")
    losses = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    out = Tensor(np.array(losses.mean()), parents=(logits,))

    def back(g):
        if logits.requires_grad:
            sig = 1.0 / (1.0 + np.exp(-z))
            logits._accum(((sig - y) * (float(g) / len(z))).reshape(logits.data.shape))

    out._backward = back
    return out


def t_fnn(net: Fnn, x: Tensor, params: "FnnParams") -> Tensor:
    """Run a float Fnn on a Tensor of rows using trainable parameters."""
    out = x
    for (w, b), layer in zip(params.tensors, net.layers):
        out = t_add(t_matmul(out, w), b)
        if layer.act.kind == "identity":
            continue
        if layer.act.kind == "leaky_relu":
            out = t_leaky_relu(out, layer.act.slope)
        elif layer.act.kind == "relu":
            out = t_maximum(out, t_const(np.zeros_like(out.data)))
        elif layer.act.kind == "relu_star":
            out = t_relu_star(out)
        else:
            raise ValueError(f"cannot train through activation {layer.act.kind}")
    return out


class FnnParams:
    """Tensor views of an Fnn's weights, shared across uses in one graph."""

    def __init__(self, net: Fnn):
        if net.exact:
            raise ValueError("training needs a float network")
        self.net = net
        self.tensors = [(t_param(l.weight), t_param(l.bias)) for l in net.layers]

    def all_tensors(self) -> list[Tensor]:
        return [t for pair in self.tensors for t in pair]

    def write_back(self):
        for (w, b), layer in zip(self.tensors, self.net.layers):
            layer.weight = w.data
            layer.bias = b.data


def fnn_init(dims: Sequence[int], acts: Sequence[Act], rng: np.random.Generator) -> Fnn:
    """Uniform +-sqrt(1/fan_in) initialization."""
    if len(acts) != len(dims) - 1:
        raise ValueError("need one activation per layer")
    layers = []
    for i, act in enumerate(acts):
        fan_in = max(dims[i], 1)
        bound = math.sqrt(1.0 / fan_in)
        w = rng.uniform(-bound, bound, size=(dims[i], dims[i + 1]))
        b = rng.uniform(-bound, bound, size=(dims[i + 1],))
        layers.append(FnnLayer(w, b, act))
    return Fnn(layers)
