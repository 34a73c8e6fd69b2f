"""Dense real and complex tensors with the products used by embedding models.

Storage is a flat row-major numpy buffer plus a tuple of mode dimensions.
Every operation returns a fresh tensor.  The array-level helpers
(``mm``, ``correlate`` and friends) are what the embedding code calls in its
inner loops; the :class:`Tensor` wrappers add shape checking on top.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np


class TensorError(ValueError):
    pass


def _as_buffer(data, complex_: bool | None = None) -> np.ndarray:
    arr = np.array(list(data) if not isinstance(data, np.ndarray) else data).reshape(-1)
    if complex_ or (complex_ is None and np.iscomplexobj(arr)):
        return arr.astype(complex)
    if np.iscomplexobj(arr):
        raise TensorError("complex data given to a real tensor")
    return arr.astype(float)


class Tensor:
    __slots__ = ("dims", "data")
    _complex: bool | None = None

    def __init__(self, dims: Iterable[int], data: Iterable):
        dims = tuple(int(a) for a in dims)
        if not dims:
            raise TensorError("a tensor needs at least one mode")
        if any(a < 1 for a in dims):
            raise TensorError(f"mode dimensions must be positive, got {dims}")
        buf = _as_buffer(data, self._complex)
        if buf.size != math.prod(dims):
            raise TensorError(f"{buf.size} values cannot fill dimensions {dims}")
        self.dims = dims
        self.data = buf

    @classmethod
    def of(cls, nested) -> "Tensor":
        arr = np.asarray(nested)
        return _wrap(arr.shape or (1,), arr)

    @classmethod
    def identity(cls, a: int) -> "Tensor":
        return Tensor((a, a), np.eye(a).reshape(-1))

    @classmethod
    def full(cls, dims, value: float) -> "Tensor":
        return Tensor(dims, np.full(math.prod(dims), value, dtype=float))

    @property
    def order(self) -> int:
        return len(self.dims)

    def array(self) -> np.ndarray:
        return self.data.reshape(self.dims)

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        if len(idx) != self.order:
            raise TensorError(f"index {idx} does not match order {self.order}")
        flat = 0
        for i, a in zip(idx, self.dims):
            if not 0 <= i < a:
                raise IndexError(f"index {idx} out of range for {self.dims}")
            flat = flat * a + i
        return self.data[flat].item()

    def conj(self) -> "Tensor":
        return _wrap(self.dims, np.conj(self.data))

    def real(self) -> "Tensor":
        return Tensor(self.dims, np.real(self.data))

    def __eq__(self, other):
        return isinstance(other, Tensor) and self.dims == other.dims and np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.dims, self.data.tobytes()))

    def __repr__(self):
        return f"{type(self).__name__}({self.dims}, {self.data.tolist()})"


class ComplexTensor(Tensor):
    __slots__ = ()
    _complex = True


def _wrap(dims, data) -> Tensor:
    cls = ComplexTensor if np.iscomplexobj(data) else Tensor
    return cls(dims, data)


# ---------------------------------------------------------------------------
# Array-level kernels

def mm(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Matrix product of 2-d arrays as a sum of rank-one outer products."""
    a, c = x.shape
    c2, b = y.shape
    if c != c2:
        raise TensorError(f"cannot multiply ({a},{c}) by ({c2},{b})")
    out = np.zeros((a, b), dtype=np.result_type(x, y))
    for k in range(c):
        out += x[:, k, None] * y[None, k, :]
    return out


def dot(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(x * y))


def correlate(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    a = x.shape[0]
    if y.shape[0] != a:
        raise TensorError(f"circular correlation needs equal lengths, got {a} and {y.shape[0]}")
    idx = (np.arange(a)[:, None] + np.arange(a)[None, :]) % a
    return np.sum(x[None, :] * y[idx], axis=1)


# ---------------------------------------------------------------------------
# Tensor-level operations

def lp_norm(x: Tensor, p: float) -> float:
    if p < 1:
        raise TensorError(f"L^p norm needs p >= 1, got {p}")
    if x.order != 1:
        raise TensorError("L^p norm is defined on vectors")
    return float(np.sum(np.abs(x.data) ** p) ** (1.0 / p))


def lpq_norm(x: Tensor, p: float, q: float) -> float:
    if p < 1 or q < 1:
        raise TensorError("L^{p,q} norm needs p, q >= 1")
    if x.order != 2:
        raise TensorError("L^{p,q} norm is defined on matrices")
    cols = np.sum(np.abs(x.array()) ** p, axis=0) ** (q / p)
    return float(np.sum(cols) ** (1.0 / q))


def matmul(x: Tensor, y: Tensor) -> Tensor:
    """Contract the last mode of ``x`` with the first mode of ``y``.

    The product of two vectors is returned as a one-element vector.
    """
    if x.dims[-1] != y.dims[0]:
        raise TensorError(f"cannot multiply {x.dims} by {y.dims}")
    left, right = x.dims[:-1], y.dims[1:]
    c = x.dims[-1]
    out = mm(x.data.reshape(math.prod(left), c), y.data.reshape(c, math.prod(right)))
    return _wrap(left + right or (1,), out.reshape(-1))


def hadamard(x: Tensor, y: Tensor) -> Tensor:
    if x.dims != y.dims:
        raise TensorError(f"Hadamard product needs equal dimensions, got {x.dims} and {y.dims}")
    return _wrap(x.dims, x.data * y.data)


def tensor_product(x: Tensor, y: Tensor) -> Tensor:
    return _wrap(x.dims + y.dims, (x.data[:, None] * y.data[None, :]).reshape(-1))


def n_mode_product(x: Tensor, y: Tensor, n: int) -> Tensor:
    """Transform mode ``n`` (counted from 1) of ``x`` by the matrix ``y``."""
    if y.order != 2:
        raise TensorError("the n-mode product takes a matrix as second argument")
    if not 1 <= n <= x.order:
        raise TensorError(f"mode {n} out of range for a tensor of order {x.order}")
    b, an = y.dims
    if x.dims[n - 1] != an:
        raise TensorError(f"mode {n} has dimension {x.dims[n - 1]}, matrix expects {an}")
    moved = np.moveaxis(x.array(), n - 1, -1)
    rest = moved.shape[:-1]
    flat = mm(moved.reshape(-1, an), y.array().T)
    out = np.moveaxis(flat.reshape(rest + (b,)), -1, n - 1)
    dims = x.dims[:n - 1] + (b,) + x.dims[n:]
    return _wrap(dims, np.ascontiguousarray(out).reshape(-1))


def circular_correlation(x: Tensor, y: Tensor) -> Tensor:
    if x.order != 1 or y.order != 1:
        raise TensorError("circular correlation is defined on vectors")
    return _wrap(x.dims, correlate(x.data, y.data))
