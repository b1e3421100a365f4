"""Minimal reverse-mode automatic differentiation over numpy arrays.

Supports exactly the operations the training losses need (dense layers,
tanh/sigmoid/softplus, Gaussian log-densities, PPO ratio clipping and the
L2/cross-entropy critic losses).  Graphs are built functionally; calling
:meth:`Tensor.backward` on a scalar fills ``grad`` on every reachable
tensor created with ``requires_grad=True``.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tensor", "constant", "parameter"]


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce ``grad`` back to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """Node in the computation graph wrapping a float64 ndarray."""

    __slots__ = ("value", "grad", "requires_grad", "_parents")

    def __init__(self, value, requires_grad: bool = False, parents=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents  # tuple of (Tensor, vjp callable)

    @property
    def shape(self):
        return self.value.shape

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _lift(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    def _track(self, *pairs) -> tuple:
        return tuple((p, fn) for p, fn in pairs if p.requires_grad or p._parents)

    def __add__(self, other):
        other = self._lift(other)
        out = Tensor(self.value + other.value)
        out._parents = out._track(
            (self, lambda g: _unbroadcast(g, self.value.shape)),
            (other, lambda g: _unbroadcast(g, other.value.shape)),
        )
        return out

    __radd__ = __add__

    def __sub__(self, other):
        other = self._lift(other)
        out = Tensor(self.value - other.value)
        out._parents = out._track(
            (self, lambda g: _unbroadcast(g, self.value.shape)),
            (other, lambda g: _unbroadcast(-g, other.value.shape)),
        )
        return out

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        other = self._lift(other)
        out = Tensor(self.value * other.value)
        out._parents = out._track(
            (self, lambda g: _unbroadcast(g * other.value, self.value.shape)),
            (other, lambda g: _unbroadcast(g * self.value, other.value.shape)),
        )
        return out

    __rmul__ = __mul__

    def __neg__(self):
        out = Tensor(-self.value)
        out._parents = out._track((self, lambda g: -g))
        return out

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return self * other.reciprocal()
        return self * (1.0 / other)

    def reciprocal(self):
        out = Tensor(1.0 / self.value)
        out._parents = out._track((self, lambda g: -g / (self.value**2)))
        return out

    def __matmul__(self, other):
        other = self._lift(other)
        out = Tensor(self.value @ other.value)
        out._parents = out._track(
            (self, lambda g: g @ other.value.T),
            (other, lambda g: self.value.T @ g),
        )
        return out

    def square(self):
        out = Tensor(self.value * self.value)
        out._parents = out._track((self, lambda g: g * (2.0 * self.value)))
        return out

    def exp(self):
        val = np.exp(self.value)
        out = Tensor(val)
        out._parents = out._track((self, lambda g: g * val))
        return out

    def log(self):
        out = Tensor(np.log(self.value))
        out._parents = out._track((self, lambda g: g / self.value))
        return out

    def tanh(self):
        val = np.tanh(self.value)
        out = Tensor(val)
        out._parents = out._track((self, lambda g: g * (1.0 - val * val)))
        return out

    def sigmoid(self):
        val = 1.0 / (1.0 + np.exp(-self.value))
        out = Tensor(val)
        out._parents = out._track((self, lambda g: g * val * (1.0 - val)))
        return out

    def softplus(self):
        # log(1 + exp(x)), written to avoid overflow
        val = np.maximum(self.value, 0.0) + np.log1p(np.exp(-np.abs(self.value)))
        sig = 1.0 / (1.0 + np.exp(-self.value))
        out = Tensor(val)
        out._parents = out._track((self, lambda g: g * sig))
        return out

    def relu(self):
        mask = self.value > 0.0
        out = Tensor(np.where(mask, self.value, 0.0))
        out._parents = out._track((self, lambda g: g * mask))
        return out

    def maximum(self, other):
        other = self._lift(other)
        take_self = self.value >= other.value
        out = Tensor(np.where(take_self, self.value, other.value))
        out._parents = out._track(
            (self, lambda g: _unbroadcast(g * take_self, self.value.shape)),
            (other, lambda g: _unbroadcast(g * ~take_self, other.value.shape)),
        )
        return out

    def minimum(self, other):
        other = self._lift(other)
        take_self = self.value <= other.value
        out = Tensor(np.where(take_self, self.value, other.value))
        out._parents = out._track(
            (self, lambda g: _unbroadcast(g * take_self, self.value.shape)),
            (other, lambda g: _unbroadcast(g * ~take_self, other.value.shape)),
        )
        return out

    def clip(self, lo: float, hi: float):
        inside = (self.value >= lo) & (self.value <= hi)
        out = Tensor(np.clip(self.value, lo, hi))
        out._parents = out._track((self, lambda g: g * inside))
        return out

    def sum(self, axis=None):
        out = Tensor(self.value.sum(axis=axis))
        shape = self.value.shape

        def vjp(g):
            if axis is None:
                return np.broadcast_to(g, shape).copy()
            gg = np.expand_dims(g, axis)
            return np.broadcast_to(gg, shape).copy()

        out._parents = out._track((self, vjp))
        return out

    def mean(self, axis=None):
        n = self.value.size if axis is None else self.value.shape[axis]
        return self.sum(axis=axis) * (1.0 / n)

    # -- backward pass ------------------------------------------------------

    def backward(self) -> None:
        """Accumulate gradients of this scalar into the graph's leaves."""
        if self.value.size != 1:
            raise ValueError("backward() requires a scalar loss")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent, _ in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))

        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.value)}
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g
            for parent, vjp in node._parents:
                pg = vjp(g)
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def constant(value) -> Tensor:
    return Tensor(value)


def parameter(value) -> Tensor:
    return Tensor(value, requires_grad=True)
