"""Minimal reverse-mode gradient tape over the ops the paired networks need:
affine maps, smooth activations, elementwise add/scale, and squared-norm
reductions. Values are float64 numpy arrays, batched along the first axis
where applicable.
"""

from __future__ import annotations

import numpy as np


class Node:
    """One recorded value; `grad` is filled during the backward sweep."""

    __slots__ = ("value", "grad", "_parents", "_backward", "_forward")

    def __init__(self, value, parents=(), backward=None, forward=None):
        self.value = value
        self.grad = None
        self._parents = parents
        self._backward = backward
        self._forward = forward


class Tape:
    """Records an operation sequence; backward() walks it in reverse.

    Leaves are created with leaf(); every op returns a new Node. replay()
    re-executes the recorded forwards and reports whether every node's value
    is reproduced bitwise, which pins down that the recording is complete.
    """

    def __init__(self):
        self.nodes: list[Node] = []

    def leaf(self, value) -> Node:
        node = Node(np.asarray(value, dtype=float))
        self.nodes.append(node)
        return node

    def _record(self, parents, forward) -> Node:
        node = Node(forward(*[p.value for p in parents]), parents=parents, forward=forward)
        self.nodes.append(node)
        return node

    def affine(self, v: Node, weight: Node, bias: Node) -> Node:
        """v @ weight.T + bias for batched v (b, d_in) or a single vector."""
        node = self._record((v, weight, bias), lambda vv, w, b: vv @ w.T + b)
        v_val = v.value

        def backward(g):
            if v_val.ndim == 1:
                return (g @ weight.value, np.outer(g, v_val), g)
            return (g @ weight.value, g.T @ v_val, g.sum(axis=0))

        node._backward = backward
        return node

    def activation(self, v: Node, kind: str) -> Node:
        if kind == "tanh":
            node = self._record((v,), np.tanh)
            node._backward = lambda g: (g * (1.0 - node.value**2),)
        elif kind == "elu":
            def elu(x):
                return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))

            node = self._record((v,), elu)
            node._backward = lambda g: (
                g * np.where(v.value > 0, 1.0, node.value + 1.0),
            )
        else:
            raise ValueError(f"unknown activation {kind!r}")
        return node

    def add(self, a: Node, b: Node) -> Node:
        node = self._record((a, b), np.add)
        node._backward = lambda g: (g, g)
        return node

    def scale(self, v: Node, factor) -> Node:
        """Multiply by a constant scalar or broadcastable array (not a Node)."""
        factor = np.asarray(factor, dtype=float)
        node = self._record((v,), lambda vv: vv * factor)
        node._backward = lambda g: (g * factor,)
        return node

    def shift(self, v: Node, offset) -> Node:
        """Add a constant scalar or broadcastable array (not a Node)."""
        offset = np.asarray(offset, dtype=float)
        node = self._record((v,), lambda vv: vv + offset)
        node._backward = lambda g: (g,)
        return node

    def sq_norm(self, v: Node) -> Node:
        """Sum of squares over all entries (scalar output)."""
        node = self._record((v,), lambda vv: float(np.sum(vv * vv)))
        node._backward = lambda g: (2.0 * g * v.value,)
        return node

    def backward(self, root: Node, seed=1.0) -> None:
        """Accumulate grads of `root` w.r.t. every node, seeded with `seed`."""
        for node in self.nodes:
            node.grad = None
        root.grad = np.asarray(seed, dtype=float)
        for node in reversed(self.nodes):
            if node.grad is None or node._backward is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if parent.grad is None:
                    parent.grad = np.array(g, dtype=float)
                else:
                    parent.grad = parent.grad + g

    def replay(self) -> bool:
        """Re-run every recorded forward; True iff all values match bitwise."""
        for node in self.nodes:
            if node._forward is None:
                continue
            fresh = node._forward(*[p.value for p in node._parents])
            if not np.array_equal(
                np.asarray(fresh, dtype=float), np.asarray(node.value, dtype=float)
            ):
                return False
        return True
