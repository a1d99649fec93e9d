"""Minimal dense-tensor library with reverse-mode automatic differentiation.

Just enough machinery to express the retrieval model (attention stacks,
recurrent dialogue encoding, attentive pooling, contrastive loss) and train
its parameters. Tensors wrap row-major numpy arrays, always float64
internally; 32-bit data is accepted at I/O boundaries and upcast on entry.

Supported ranks are 0 (scalars), 1 (vectors) and 2 (matrices). The only
implicit broadcast is a 1-D vector over the rows of a matrix; anything else
requires an explicit reshape. Every operation registers its vector-Jacobian
product when it runs, so ``backward`` on a scalar root accumulates exact
analytic gradients into every reachable leaf with ``requires_grad``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

# Finite checks catch NaN/Inf the moment an op produces one. They follow
# Python's debug flag so `python -O` drops the overhead in production runs.
_FINITE_CHECKS = bool(__debug__)


def set_finite_checks(enabled: bool) -> None:
    """Globally enable/disable NaN/Inf detection on op outputs."""
    global _FINITE_CHECKS
    _FINITE_CHECKS = bool(enabled)


def finite_checks_enabled() -> bool:
    return _FINITE_CHECKS


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim > 2:
        raise ValueError(f"only scalars, vectors and matrices are supported, got shape {arr.shape}")
    return arr


class Tensor:
    """A node in the compute graph: a value plus an optional gradient buffer.

    Data is immutable after construction by convention; only ``grad`` is
    mutated (by ``backward`` and ``zero_grad``). Repeated ``backward`` calls
    accumulate into ``grad``.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp", "_op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        if _FINITE_CHECKS and not np.all(np.isfinite(self.data)):
            raise ValueError("non-finite values in tensor input")
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None
        self._op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every reachable requires_grad leaf.

        The root must be a scalar. Calling twice without zeroing grads adds
        the gradients again (they double exactly).
        """
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar root, got shape {self.shape}")

        # Iterative topological order; graphs can be a few thousand nodes deep.
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))

        seeds: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            out_grad = seeds.pop(id(node), None)
            if out_grad is None:
                continue
            if node.requires_grad:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += out_grad
            if node._vjp is None:
                continue
            for parent, contribution in zip(node._parents, node._vjp(out_grad)):
                if contribution is None:
                    continue
                acc = seeds.get(id(parent))
                if acc is None:
                    # Copy: vjps may hand out views or share one buffer
                    # between parents, and accumulation mutates in place.
                    seeds[id(parent)] = np.array(contribution)
                else:
                    acc += contribution

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op}, requires_grad={self.requires_grad})"


def _make(data: np.ndarray, parents: tuple[Tensor, ...], vjp, op: str) -> Tensor:
    if _FINITE_CHECKS and not np.all(np.isfinite(data)):
        raise ValueError(f"non-finite values in output of op '{op}'")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = any(p.requires_grad for p in parents)
    out.grad = None
    if out.requires_grad:
        out._parents = parents
        out._vjp = vjp
        out._op = op
    else:
        out._parents = ()
        out._vjp = None
        out._op = op
    return out


def _check_row_broadcast(a: Tensor, b: Tensor, op: str) -> bool:
    """True if b broadcasts over a (row vector over matrix, or scalar)."""
    if a.shape == b.shape:
        return False
    if a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]:
        return True
    if b.ndim == 0 and a.ndim > 0:
        return True
    raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a gradient back to the broadcast operand's shape."""
    if g.shape == shape:
        return g
    if shape == ():
        return np.asarray(g.sum())
    return g.sum(axis=0)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; also matrix + row vector, or tensor + scalar."""
    broadcast = _check_row_broadcast(a, b, "add")

    def vjp(g):
        gb = _unbroadcast(g, b.shape) if broadcast else g
        return g, gb

    return _make(a.data + b.data, (a, b), vjp, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    broadcast = _check_row_broadcast(a, b, "sub")

    def vjp(g):
        gb = -_unbroadcast(g, b.shape) if broadcast else -g
        return g, gb

    return _make(a.data - b.data, (a, b), vjp, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise (Hadamard) product; also matrix * row vector or * scalar."""
    broadcast = _check_row_broadcast(a, b, "mul")

    def vjp(g):
        ga = g * b.data
        gb = g * a.data
        if broadcast:
            gb = _unbroadcast(gb, b.shape)
        return ga, gb

    return _make(a.data * b.data, (a, b), vjp, "mul")


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply by a python constant (not differentiated through)."""
    factor = float(factor)

    def vjp(g):
        return (g * factor,)

    return _make(a.data * factor, (a,), vjp, "scale")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of two 2-D tensors."""
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects matrices, got shapes {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: inner dimensions disagree, {a.shape} x {b.shape}")

    def vjp(g):
        return g @ b.data.T, a.data.T @ g

    return _make(a.data @ b.data, (a, b), vjp, "matmul")


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ValueError(f"transpose expects a matrix, got shape {a.shape}")

    def vjp(g):
        return (g.T,)

    return _make(a.data.T.copy(), (a,), vjp, "transpose")


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    if int(np.prod(shape)) != a.data.size:
        raise ValueError(f"cannot reshape {a.shape} into {shape}")

    def vjp(g):
        return (g.reshape(a.shape),)

    return _make(a.data.reshape(shape).copy(), (a,), vjp, "reshape")


def concat_rows(parts: list[Tensor]) -> Tensor:
    """Stack matrices along rows."""
    if not parts:
        raise ValueError("concat_rows needs at least one tensor")
    datas = [p.data if p.ndim == 2 else p.data.reshape(1, -1) for p in parts]
    counts = [d.shape[0] for d in datas]
    offsets = np.cumsum([0] + counts)

    def vjp(g):
        return tuple(
            g[offsets[i]:offsets[i + 1]].reshape(parts[i].shape) for i in range(len(parts))
        )

    return _make(np.concatenate(datas, axis=0), tuple(parts), vjp, "concat_rows")


def concat_cols(parts: list[Tensor]) -> Tensor:
    """Stack matrices along columns."""
    if not parts:
        raise ValueError("concat_cols needs at least one tensor")
    counts = [p.shape[1] for p in parts]
    offsets = np.cumsum([0] + counts)

    def vjp(g):
        return tuple(g[:, offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return _make(np.concatenate([p.data for p in parts], axis=1), tuple(parts), vjp, "concat_cols")


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    if a.ndim != 2:
        raise ValueError(f"slice_rows expects a matrix, got shape {a.shape}")
    if not (0 <= start <= stop <= a.shape[0]):
        raise ValueError(f"row slice [{start}:{stop}] out of bounds for shape {a.shape}")

    def vjp(g):
        ga = np.zeros_like(a.data)
        ga[start:stop] = g
        return (ga,)

    return _make(a.data[start:stop].copy(), (a,), vjp, "slice_rows")


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if a.ndim != 2:
        raise ValueError(f"slice_cols expects a matrix, got shape {a.shape}")
    if not (0 <= start <= stop <= a.shape[1]):
        raise ValueError(f"column slice [{start}:{stop}] out of bounds for shape {a.shape}")

    def vjp(g):
        ga = np.zeros_like(a.data)
        ga[:, start:stop] = g
        return (ga,)

    return _make(a.data[:, start:stop].copy(), (a,), vjp, "slice_cols")


def gather_rows(table: Tensor, indices) -> Tensor:
    """Embedding-style lookup: pick rows of a matrix by integer index."""
    idx = np.asarray(indices, dtype=np.intp)
    if table.ndim != 2:
        raise ValueError(f"gather_rows expects a matrix table, got shape {table.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ValueError(f"row index out of range for table with {table.shape[0]} rows")

    def vjp(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        return (gt,)

    return _make(table.data[idx].copy(), (table,), vjp, "gather_rows")


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax with max subtraction for stability."""
    if a.ndim != 2:
        raise ValueError(f"softmax_rows expects a matrix, got shape {a.shape}")
    if a.shape[1] == 0:
        raise ValueError("softmax_rows: empty rows")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        dot = (g * y).sum(axis=1, keepdims=True)
        return (y * (g - dot),)

    return _make(y, (a,), vjp, "softmax_rows")


def log_softmax_rows(a: Tensor) -> Tensor:
    """Row-wise log-softmax, exact for constant rows (returns -log n)."""
    if a.ndim != 2:
        raise ValueError(f"log_softmax_rows expects a matrix, got shape {a.shape}")
    if a.shape[1] == 0:
        raise ValueError("log_softmax_rows: empty rows")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    y = shifted - lse
    p = np.exp(y)

    def vjp(g):
        return (g - p * g.sum(axis=1, keepdims=True),)

    return _make(y, (a,), vjp, "log_softmax_rows")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Row-wise layer normalisation with learnable gain and bias."""
    if x.ndim != 2:
        raise ValueError(f"layer_norm expects a matrix, got shape {x.shape}")
    if gain.shape != (x.shape[1],) or bias.shape != (x.shape[1],):
        raise ValueError(
            f"layer_norm gain/bias must be vectors of length {x.shape[1]}, "
            f"got {gain.shape} and {bias.shape}"
        )
    mean = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv

    def vjp(g):
        gy = g * gain.data
        n = x.shape[1]
        gx = inv * (gy - gy.mean(axis=1, keepdims=True)
                    - xhat * (gy * xhat).sum(axis=1, keepdims=True) / n)
        return gx, (g * xhat).sum(axis=0), g.sum(axis=0)

    return _make(xhat * gain.data + bias.data, (x, gain, bias), vjp, "layer_norm")


def normalize_rows(x: Tensor, eps: float = 1e-12) -> Tensor:
    """Scale each row to unit L2 norm (used by the cosine similarity hook)."""
    if x.ndim != 2:
        raise ValueError(f"normalize_rows expects a matrix, got shape {x.shape}")
    norms = np.sqrt((x.data * x.data).sum(axis=1, keepdims=True) + eps)
    y = x.data / norms

    def vjp(g):
        return ((g - y * (g * y).sum(axis=1, keepdims=True)) / norms,)

    return _make(y, (x,), vjp, "normalize_rows")


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def vjp(g):
        return (g * mask,)

    return _make(np.where(mask, a.data, 0.0), (a,), vjp, "relu")


_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a: Tensor) -> Tensor:
    """Exact GELU, x * Phi(x); smooth, so finite-difference checks stay tight."""
    cdf = 0.5 * (1.0 + erf(a.data / _SQRT2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * a.data * a.data)

    def vjp(g):
        return (g * (cdf + a.data * pdf),)

    return _make(a.data * cdf, (a,), vjp, "gelu")


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def vjp(g):
        return (g * (1.0 - y * y),)

    return _make(y, (a,), vjp, "tanh")


def log(a: Tensor) -> Tensor:
    def vjp(g):
        return (g / a.data,)

    return _make(np.log(a.data), (a,), vjp, "log")


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)

    def vjp(g):
        return (g * y,)

    return _make(y, (a,), vjp, "exp")


def reduce_sum(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape),)
        return (np.broadcast_to(np.expand_dims(g, axis) if not keepdims else g, a.shape),)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), vjp, "reduce_sum")


def reduce_mean(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else a.shape[axis]

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.shape),)
        gg = np.expand_dims(g, axis) if not keepdims else g
        return (np.broadcast_to(gg / count, a.shape),)

    return _make(a.data.mean(axis=axis, keepdims=keepdims), (a,), vjp, "reduce_mean")


def dot(a: Tensor, b: Tensor) -> Tensor:
    """Inner product of two vectors, returns a scalar tensor."""
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"dot expects two equal-length vectors, got {a.shape} and {b.shape}")
    return reduce_sum(mul(a, b))
