"""Shared test oracles: finite-difference gradient checking and brute-force
reference implementations kept deliberately independent of the library code
they verify."""

from __future__ import annotations

import numpy as np

from dtv.autograd import Tensor


def numeric_gradient(fn, value: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar-valued fn at value."""
    value = np.asarray(value, dtype=np.float64)
    grad = np.zeros_like(value)
    flat = value.reshape(-1)
    grad_flat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = float(fn(value))
        flat[i] = orig - h
        down = float(fn(value))
        flat[i] = orig
        grad_flat[i] = (up - down) / (2 * h)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    """Max elementwise relative error, ignoring entries where both sides
    are below the floor (finite differences are meaningless near zero)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = np.maximum(np.abs(a), np.abs(b))
    mask = scale > floor
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(a - b)[mask] / scale[mask]))


def check_gradients(build, inputs: dict[str, np.ndarray], h: float = 1e-5,
                    tol: float = 1e-4) -> float:
    """Compare reverse-mode gradients of a scalar graph against central
    differences for every named input. `build` maps {name: Tensor} to a
    scalar Tensor. Returns the worst relative error seen."""
    tensors = {name: Tensor(np.array(v, dtype=np.float64), requires_grad=True)
               for name, v in inputs.items()}
    out = build(tensors)
    if out.shape != ():
        raise AssertionError(f"gradcheck target must be scalar, got shape {out.shape}")
    out.backward()
    worst = 0.0
    for name, value in inputs.items():
        def scalar_fn(v, _name=name):
            probe = {n: Tensor(np.array(val, dtype=np.float64))
                     for n, val in inputs.items()}
            probe[_name] = Tensor(np.asarray(v, dtype=np.float64))
            return build(probe).data
        numeric = numeric_gradient(scalar_fn, np.array(value, dtype=np.float64), h=h)
        analytic = tensors[name].grad
        assert analytic is not None, f"no gradient reached input {name!r}"
        err = relative_error(analytic, numeric)
        assert err <= tol, f"gradient mismatch for {name!r}: rel err {err:.3e} > {tol}"
        worst = max(worst, err)
    return worst


def matmul_oracle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Triple-loop matrix product, no vectorization: the reference that
    fast implementations are checked against."""
    rows, inner = a.shape
    inner2, cols = b.shape
    assert inner == inner2
    out = np.zeros((rows, cols))
    for i in range(rows):
        for j in range(cols):
            acc = 0.0
            for k in range(inner):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def softmax_oracle(row: np.ndarray) -> np.ndarray:
    """Direct softmax from the definition, max-shifted for stability."""
    shifted = row - row.max()
    e = np.exp(shifted)
    return e / e.sum()


def ranks_oracle(scores: np.ndarray, gold: list[int], ids: list[str]) -> list[int]:
    """Full-sort rank of each gold video: sort candidates by (-score, id)
    and report the gold's 1-based position."""
    out = []
    for qi, g in enumerate(gold):
        order = sorted(range(len(ids)), key=lambda j: (-scores[qi, j], ids[j]))
        out.append(order.index(g) + 1)
    return out
