"""Dense tensor primitives: checked, deterministic, numpy-backed.

A "tensor" throughout the package is a C-contiguous ``numpy.ndarray`` of
float32 or float64. The helpers here validate shapes and dtypes up front
and surface non-finite results as errors instead of letting NaN/Inf
propagate silently. ``matmul`` routes through ``np.einsum`` (no BLAS
dispatch, single-threaded, fixed ascending inner-index accumulation) so
its results are reproducible bit-for-bit across runs and hosts.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionError, NumericError

FLOAT_DTYPES = (np.float32, np.float64)


def as_tensor(values, dtype=np.float64) -> np.ndarray:
    """Materialize ``values`` as a contiguous float tensor."""
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise DimensionError(f"unsupported dtype {dt}; use float32 or float64")
    return np.ascontiguousarray(values, dtype=dt)


def check_finite(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NumericError(f"{name} produced non-finite values")
    return arr


def _check_float(name: str, arr: np.ndarray) -> None:
    if arr.dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise DimensionError(f"{name} must be float32/float64, got {arr.dtype}")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of two rank-2 tensors of the same dtype.

    Accumulation happens in the operand dtype with the inner index ascending,
    so results are deterministic and exact for exactly-representable inputs.
    """
    _check_float("matmul lhs", a)
    _check_float("matmul rhs", b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects rank-2 operands, got {a.shape} x {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner extents differ: {a.shape} x {b.shape}")
    if a.dtype != b.dtype:
        raise DimensionError(f"matmul dtypes differ: {a.dtype} vs {b.dtype}")
    out = np.einsum("ik,kj->ij", a, b)
    return check_finite("matmul", out)


def softmax_channels(x: np.ndarray) -> np.ndarray:
    """Per-position softmax over the leading (channel) axis of a [C,H,W] tensor.

    The channel max is subtracted before exponentiation, so arbitrarily
    large logits cannot overflow.
    """
    _check_float("softmax_channels input", x)
    if x.ndim != 3 or x.shape[0] < 1:
        raise DimensionError(f"softmax_channels expects [C,H,W] with C >= 1, got {x.shape}")
    check_finite("softmax_channels input", x)
    shifted = x - x.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=0, keepdims=True)
    return check_finite("softmax_channels", out)


def finite_diff_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                         h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient oracle: (f(x+h*e_i) - f(x-h*e_i)) / 2h.

    ``x`` must be float64; every evaluation of ``f`` must be finite. This is
    the independent reference every hand-derived backward rule is checked
    against, so it never touches the autodiff machinery.
    """
    if x.dtype != np.dtype(np.float64):
        raise DimensionError(f"finite_diff_gradient requires float64 input, got {x.dtype}")
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"finite_diff_gradient: non-finite f at coordinate {i}")
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


# -- housekeeping ops ------------------------------------------------------
# All pure, shape-checked, deterministic; inputs are never mutated.

def zeros(shape: Sequence[int], dtype=np.float64) -> np.ndarray:
    return np.zeros(tuple(shape), dtype=np.dtype(dtype))


def full(shape: Sequence[int], value: float, dtype=np.float64) -> np.ndarray:
    return np.full(tuple(shape), value, dtype=np.dtype(dtype))


def reshape(x: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    target = tuple(shape)
    if int(np.prod(target)) != x.size:
        raise DimensionError(f"cannot reshape {x.shape} to {target}")
    return np.ascontiguousarray(x.reshape(target))


def transpose(x: np.ndarray, axes: Iterable[int] | None = None) -> np.ndarray:
    return np.ascontiguousarray(np.transpose(x, axes))


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise DimensionError(f"add shapes differ: {a.shape} vs {b.shape}")
    return check_finite("add", a + b)


def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise DimensionError(f"mul shapes differ: {a.shape} vs {b.shape}")
    return check_finite("mul", a * b)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def reduce_sum(x: np.ndarray, axes: tuple[int, ...] | None = None) -> np.ndarray:
    return check_finite("reduce_sum", np.asarray(x.sum(axis=axes)))


def reduce_mean(x: np.ndarray, axes: tuple[int, ...] | None = None) -> np.ndarray:
    if x.size == 0:
        raise NumericError("reduce_mean of an empty tensor is undefined")
    return check_finite("reduce_mean", np.asarray(x.mean(axis=axes)))
