"""Tape-based reverse-mode automatic differentiation over dense float64 arrays.

Everything trainable in this package is expressed through a :class:`Graph`
(the tape). Values are plain ``numpy.float64`` arrays, immutable once they
enter a graph. The op set is deliberately small: elementwise ``add``,
``sub``, ``mul`` (broadcasting only a scalar against an array), ``matmul``
and ``affine`` on 2-D arrays, ``gelu``/``sin``/``cos`` activations, and the
reductions ``sum``, ``mean``, ``mse``.

A graph is a single-use tape: after :func:`backward` it is released and any
further use raises :class:`GraphConsumedError`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Graph",
    "Node",
    "AdamState",
    "backward",
    "adam_step",
    "OPS",
    "DiffcoreError",
    "ShapeMismatchError",
    "NonFiniteError",
    "NonScalarRootError",
    "GraphConsumedError",
    "UnknownOpError",
]

# tanh approximation constants shared by gelu forward and its derivative
_GELU_C0 = 0.7978845608028654  # sqrt(2/pi)
_GELU_C1 = 0.044715


class DiffcoreError(Exception):
    """Base class for tape errors."""


class ShapeMismatchError(DiffcoreError):
    pass


class NonFiniteError(DiffcoreError):
    pass


class NonScalarRootError(DiffcoreError):
    pass


class GraphConsumedError(DiffcoreError):
    pass


class UnknownOpError(DiffcoreError):
    pass


def as_array(value) -> np.ndarray:
    """Coerce to a C-contiguous float64 ndarray (scalars become shape ())."""
    # np.ascontiguousarray would promote 0-d to 1-d; asarray keeps shape ()
    arr = np.asarray(value, dtype=np.float64, order="C")
    return arr


def _is_scalar(shape) -> bool:
    return shape == ()


def _check_elementwise(op: str, a: np.ndarray, b: np.ndarray) -> None:
    # Equal shapes always fine; otherwise exactly one side must be a scalar.
    if a.shape == b.shape or _is_scalar(a.shape) or _is_scalar(b.shape):
        return
    raise ShapeMismatchError(
        f"{op}: incompatible shapes {a.shape} and {b.shape} "
        "(only scalar-against-array broadcasting is supported)"
    )


def _reduce_to(grad: np.ndarray, shape) -> np.ndarray:
    # Collapse a broadcast gradient back onto a scalar operand.
    if grad.shape == shape:
        return grad
    return as_array(grad.sum())


def _gelu(x: np.ndarray) -> np.ndarray:
    # 0.5 * x * (1 + tanh(c0 * (x + c1 * x^3))), computed on scratch buffers
    u = x * x
    u *= _GELU_C1
    u += 1.0
    u *= x
    u *= _GELU_C0
    np.tanh(u, out=u)
    u += 1.0
    u *= x
    u *= 0.5
    return u


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    x2 = x * x
    inner = x2 * _GELU_C1
    inner += 1.0
    inner *= x
    inner *= _GELU_C0
    th = np.tanh(inner)
    sech2 = 1.0 - th * th
    dinner = x2 * (3.0 * _GELU_C1)
    dinner += 1.0
    dinner *= _GELU_C0
    out = th + 1.0
    out *= 0.5
    tail = sech2 * dinner
    tail *= x
    tail *= 0.5
    out += tail
    return out


# --- forward definitions -------------------------------------------------

def _fwd_add(a, b):
    _check_elementwise("add", a, b)
    return a + b


def _fwd_sub(a, b):
    _check_elementwise("sub", a, b)
    return a - b


def _fwd_mul(a, b):
    _check_elementwise("mul", a, b)
    return a * b


def _fwd_matmul(a, b):
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeMismatchError(
            f"matmul: expects 2-D operands, got shapes {a.shape} and {b.shape}"
        )
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(
            f"matmul: inner dimensions differ for shapes {a.shape} and {b.shape}"
        )
    return a @ b


def _fwd_affine(x, w, b):
    if x.ndim != 2 or w.ndim != 2 or b.ndim != 1:
        raise ShapeMismatchError(
            f"affine: expects x [n,k], w [k,m], b [m]; got {x.shape}, {w.shape}, {b.shape}"
        )
    if x.shape[1] != w.shape[0] or w.shape[1] != b.shape[0]:
        raise ShapeMismatchError(
            f"affine: incompatible shapes {x.shape}, {w.shape}, {b.shape}"
        )
    return x @ w + b


def _fwd_mse(a, b):
    if a.shape != b.shape:
        raise ShapeMismatchError(f"mse: operand shapes differ, {a.shape} vs {b.shape}")
    d = a - b
    return as_array(np.mean(d * d))


# --- backward definitions -------------------------------------------------
# Each vjp takes (grad_out, input values) and yields one gradient per input.

def _bwd_add(g, a, b):
    return _reduce_to(g, a.shape), _reduce_to(g, b.shape)


def _bwd_sub(g, a, b):
    return _reduce_to(g, a.shape), _reduce_to(-g, b.shape)


def _bwd_mul(g, a, b):
    return _reduce_to(g * b, a.shape), _reduce_to(g * a, b.shape)


def _bwd_matmul(g, a, b):
    return g @ b.T, a.T @ g


def _bwd_affine(g, x, w, b):
    return g @ w.T, x.T @ g, g.sum(axis=0)


def _bwd_gelu(g, x):
    return (g * _gelu_grad(x),)


def _bwd_sin(g, x):
    return (g * np.cos(x),)


def _bwd_cos(g, x):
    return (-g * np.sin(x),)


def _bwd_sum(g, x):
    return (np.full(x.shape, float(g)),)


def _bwd_mean(g, x):
    return (np.full(x.shape, float(g) / max(x.size, 1)),)


def _bwd_mse(g, a, b):
    scale = 2.0 * float(g) / max(a.size, 1)
    d = (a - b) * scale
    return d, -d


def _fwd_sum(x):
    return as_array(x.sum())


def _fwd_mean(x):
    return as_array(x.mean())


OPS = {
    # op: (forward, vjp, arity)
    "add": (_fwd_add, _bwd_add, 2),
    "sub": (_fwd_sub, _bwd_sub, 2),
    "mul": (_fwd_mul, _bwd_mul, 2),
    "matmul": (_fwd_matmul, _bwd_matmul, 2),
    "affine": (_fwd_affine, _bwd_affine, 3),
    "gelu": (_gelu, _bwd_gelu, 1),
    "sin": (np.sin, _bwd_sin, 1),
    "cos": (np.cos, _bwd_cos, 1),
    "sum": (_fwd_sum, _bwd_sum, 1),
    "mean": (_fwd_mean, _bwd_mean, 1),
    "mse": (_fwd_mse, _bwd_mse, 2),
}


class Node:
    """One tape entry: operation tag, parent ids, and the computed value."""

    __slots__ = ("op", "inputs", "value", "finite")

    def __init__(self, op: str, inputs: tuple, value: np.ndarray, finite: bool):
        self.op = op
        self.inputs = inputs
        self.value = value
        self.finite = finite


class Graph:
    """Append-only computation tape. Node ids are indices, so topological
    order is preserved by construction and every input id precedes its
    consumer."""

    def __init__(self):
        self.nodes: list[Node] = []
        self.released = False

    def __len__(self) -> int:
        return len(self.nodes)

    def _guard(self) -> None:
        if self.released:
            raise GraphConsumedError("graph was already released by backward()")

    def leaf(self, value) -> int:
        """Record an input array. The value is copied and frozen; non-finite
        entries are allowed but flagged, and will refuse to flow into ops."""
        self._guard()
        arr = as_array(value).copy()
        arr.flags.writeable = False
        finite = bool(np.isfinite(arr).all())
        self.nodes.append(Node("leaf", (), arr, finite))
        return len(self.nodes) - 1

    def apply(self, op: str, *input_ids: int) -> int:
        """Compute ``op`` over existing nodes and record the result."""
        self._guard()
        try:
            fwd, _, arity = OPS[op]
        except KeyError:
            raise UnknownOpError(f"unknown op {op!r}") from None
        if len(input_ids) != arity:
            raise DiffcoreError(f"{op}: expected {arity} inputs, got {len(input_ids)}")
        values = []
        for pos, nid in enumerate(input_ids):
            node = self.nodes[nid]
            if not node.finite:
                raise NonFiniteError(
                    f"{op}: operand {pos} (node {nid}, from {node.op!r}) contains NaN/Inf"
                )
            values.append(node.value)
        out = fwd(*values)
        out = out if isinstance(out, np.ndarray) else as_array(out)
        out.flags.writeable = False
        finite = bool(np.isfinite(out).all())
        self.nodes.append(Node(op, tuple(input_ids), out, finite))
        return len(self.nodes) - 1

    def value(self, nid: int) -> np.ndarray:
        return self.nodes[nid].value

    # sugar used all over the model/training code
    def add(self, a, b):
        return self.apply("add", a, b)

    def sub(self, a, b):
        return self.apply("sub", a, b)

    def mul(self, a, b):
        return self.apply("mul", a, b)

    def matmul(self, a, b):
        return self.apply("matmul", a, b)

    def affine(self, x, w, b):
        return self.apply("affine", x, w, b)

    def gelu(self, x):
        return self.apply("gelu", x)

    def sum(self, x):
        return self.apply("sum", x)

    def mean(self, x):
        return self.apply("mean", x)

    def mse(self, a, b):
        return self.apply("mse", a, b)


def backward(graph: Graph, root: int) -> dict[int, np.ndarray]:
    """Reverse sweep from a scalar ``root``.

    Returns d(root)/d(node) for every node id in the graph; nodes that do
    not influence the root (including untouched leaves) get exact zeros of
    matching shape. The graph is released afterwards.
    """
    if graph.released:
        raise GraphConsumedError("graph was already released by backward()")
    if not 0 <= root < len(graph.nodes):
        raise DiffcoreError(f"root id {root} out of range")
    root_node = graph.nodes[root]
    if not _is_scalar(root_node.value.shape):
        raise NonScalarRootError(
            f"backward root must be a scalar, got shape {root_node.value.shape}"
        )
    if not root_node.finite:
        raise NonFiniteError(f"backward root (node {root}) is non-finite")

    grads: dict[int, np.ndarray] = {root: np.ones(())}
    for nid in range(root, -1, -1):
        g = grads.get(nid)
        if g is None:
            continue
        node = graph.nodes[nid]
        if node.op == "leaf":
            continue
        _, vjp, _ = OPS[node.op]
        parent_values = [graph.nodes[pid].value for pid in node.inputs]
        parent_grads = vjp(g, *parent_values)
        for pid, pg in zip(node.inputs, parent_grads):
            if pid in grads:
                grads[pid] = grads[pid] + pg
            else:
                grads[pid] = pg

    out = {}
    for nid, node in enumerate(graph.nodes):
        g = grads.get(nid)
        out[nid] = np.zeros(node.value.shape) if g is None else as_array(g)
    graph.released = True
    return out


# --- optimizer ------------------------------------------------------------


@dataclass
class AdamState:
    """First/second moment accumulators plus step counter for Adam."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray], beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            step=0,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """Standard Adam update with bias correction. Returns new params and the
    advanced state; inputs are not mutated."""
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if set(params) != set(grads):
        raise ShapeMismatchError(
            f"param/grad name sets differ: {sorted(set(params) ^ set(grads))}"
        )
    for name, p in params.items():
        if p.shape != grads[name].shape or p.shape != state.m[name].shape:
            raise ShapeMismatchError(
                f"{name}: param shape {p.shape}, grad shape {grads[name].shape}, "
                f"state shape {state.m[name].shape}"
            )

    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1**t
    bias2 = 1.0 - b2**t
    new_params = {}
    new_m = {}
    new_v = {}
    for name, p in params.items():
        g = grads[name]
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * (g * g)
        update = (m / bias1) / (np.sqrt(v / bias2) + state.eps)
        new_params[name] = p - lr * update
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(
        m=new_m, v=new_v, step=t, beta1=b1, beta2=b2, eps=state.eps
    )
