"""Reverse-mode automatic differentiation over numpy arrays.

Define-by-run tape: every operation on a ``Tensor`` records its parents and
a closure that scatters the output gradient back onto them. ``backward()``
on a scalar walks the recorded graph once in reverse topological order.
Gradients are exact for the recorded computation; the test suite pins them
against central finite differences.

Only the handful of operations the agents need are implemented: affine
maps, relu/tanh, elementwise arithmetic with broadcasting, concatenation,
and full reductions.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, reversing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A node in the gradient tape."""

    __slots__ = ("value", "grad", "_parents", "_backward")

    def __init__(self, value, _parents=(), _backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None  # allocated lazily during backward
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.value.shape

    def _accumulate(self, grad: np.ndarray) -> None:
        grad = _unbroadcast(np.asarray(grad, dtype=np.float64), self.value.shape)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    # ---- arithmetic -------------------------------------------------

    def __add__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)

        def back(out):
            self._accumulate(out.grad)
            other._accumulate(out.grad)

        return Tensor(self.value + other.value, (self, other), back)

    __radd__ = __add__

    def __mul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)

        def back(out):
            self._accumulate(out.grad * other.value)
            other._accumulate(out.grad * self.value)

        return Tensor(self.value * other.value, (self, other), back)

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def __sub__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        return self + (-other)

    def __rsub__(self, other):
        return Tensor(other) + (-self)

    def matmul(self, other: "Tensor") -> "Tensor":
        def back(out):
            self._accumulate(out.grad @ other.value.T)
            other._accumulate(self.value.T @ out.grad)

        return Tensor(self.value @ other.value, (self, other), back)

    __matmul__ = matmul

    # ---- nonlinearities ---------------------------------------------

    def relu(self) -> "Tensor":
        mask = self.value > 0.0

        def back(out):
            self._accumulate(out.grad * mask)

        return Tensor(np.where(mask, self.value, 0.0), (self,), back)

    def tanh(self) -> "Tensor":
        t = np.tanh(self.value)

        def back(out):
            self._accumulate(out.grad * (1.0 - t * t))

        return Tensor(t, (self,), back)

    # ---- reductions --------------------------------------------------

    def sum(self) -> "Tensor":
        def back(out):
            self._accumulate(np.full(self.value.shape, out.grad))

        return Tensor(self.value.sum(), (self,), back)

    def mean(self) -> "Tensor":
        n = self.value.size

        def back(out):
            self._accumulate(np.full(self.value.shape, out.grad / n))

        return Tensor(self.value.mean(), (self,), back)

    # ---- graph traversal ---------------------------------------------

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every upstream node."""
        if self.value.size != 1:
            raise ValueError("backward() requires a scalar output")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node)


def concat(tensors: Iterable[Tensor], axis: int = 1) -> Tensor:
    """Differentiable concatenation along `axis`."""
    ts = list(tensors)
    widths = [t.value.shape[axis] for t in ts]
    offsets = np.cumsum([0] + widths)

    def back(out):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * out.grad.ndim
            sl[axis] = slice(lo, hi)
            t._accumulate(out.grad[tuple(sl)])

    return Tensor(np.concatenate([t.value for t in ts], axis=axis), tuple(ts), back)
