"""A small reverse-mode differentiation tape over scalars.

Nodes are appended in evaluation order, so walking the tape backwards is a
reverse topological traversal.  Each node stores its parents together with
the local partial derivatives, computed eagerly in the forward pass.

Sorting is not an operation here: callers sort on ``.value`` and route the
variables accordingly, which makes the permutation a constant of the backward
pass (a valid subgradient away from ties).
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence


class Tape:
    def __init__(self):
        self._parents: list[tuple[int, ...]] = []
        self._partials: list[tuple[float, ...]] = []

    def __len__(self) -> int:
        return len(self._parents)

    def _push(self, value: float, parents=(), partials=()) -> "Var":
        if not math.isfinite(value):
            raise FloatingPointError(f"non-finite value {value} on the tape")
        self._parents.append(parents)
        self._partials.append(partials)
        return Var(self, len(self._parents) - 1, value)

    def var(self, value: float) -> "Var":
        """A leaf (input) variable."""
        return self._push(float(value))

    def vars(self, values: Iterable[float]) -> list["Var"]:
        return [self.var(v) for v in values]

    def sum(self, terms: Sequence) -> "Var":
        vs = [t for t in terms if isinstance(t, Var)]
        const = math.fsum(float(t) for t in terms if not isinstance(t, Var))
        return self._push(
            const + math.fsum(v.value for v in vs),
            tuple(v.index for v in vs),
            (1.0,) * len(vs),
        )

    def dot(self, a: Sequence, b: Sequence) -> "Var":
        """``sum_i a_i b_i`` recorded as one node."""
        parents, partials, total = [], [], []
        for x, y in zip(a, b):
            xv, yv = float(x), float(y)
            total.append(xv * yv)
            if isinstance(x, Var):
                parents.append(x.index)
                partials.append(yv)
            if isinstance(y, Var):
                parents.append(y.index)
                partials.append(xv)
        return self._push(math.fsum(total), tuple(parents), tuple(partials))

    def gradient(self, output: "Var", wrt: Sequence["Var"]) -> list[float]:
        """Adjoints of ``output`` with respect to ``wrt`` (one backward sweep)."""
        adj = [0.0] * (output.index + 1)
        adj[output.index] = 1.0
        parents, partials = self._parents, self._partials
        for i in range(output.index, -1, -1):
            a = adj[i]
            if a == 0.0:
                continue
            for p, d in zip(parents[i], partials[i]):
                adj[p] += a * d
        return [adj[v.index] if v.index <= output.index else 0.0 for v in wrt]


class Var:
    __slots__ = ("tape", "index", "value")

    def __init__(self, tape: Tape, index: int, value: float):
        self.tape = tape
        self.index = index
        self.value = value

    def __float__(self) -> float:
        return self.value

    def __repr__(self) -> str:
        return f"Var({self.value!r})"

    def __add__(self, other):
        if isinstance(other, Var):
            return self.tape._push(self.value + other.value, (self.index, other.index), (1.0, 1.0))
        return self.tape._push(self.value + float(other), (self.index,), (1.0,))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Var):
            return self.tape._push(self.value - other.value, (self.index, other.index), (1.0, -1.0))
        return self.tape._push(self.value - float(other), (self.index,), (1.0,))

    def __rsub__(self, other):
        return self.tape._push(float(other) - self.value, (self.index,), (-1.0,))

    def __neg__(self):
        return self.tape._push(-self.value, (self.index,), (-1.0,))

    def __mul__(self, other):
        if isinstance(other, Var):
            return self.tape._push(self.value * other.value, (self.index, other.index), (other.value, self.value))
        c = float(other)
        return self.tape._push(self.value * c, (self.index,), (c,))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            q = self.value / other.value
            return self.tape._push(q, (self.index, other.index), (1.0 / other.value, -q / other.value))
        c = float(other)
        return self.tape._push(self.value / c, (self.index,), (1.0 / c,))

    def __rtruediv__(self, other):
        q = float(other) / self.value
        return self.tape._push(q, (self.index,), (-q / self.value,))

    def sqrt(self) -> "Var":
        r = math.sqrt(self.value)
        return self.tape._push(r, (self.index,), (0.5 / r,))

    def exp(self) -> "Var":
        e = math.exp(self.value)
        return self.tape._push(e, (self.index,), (e,))

    def sigmoid(self) -> "Var":
        s = sigmoid(self.value)
        return self.tape._push(s, (self.index,), (s * (1.0 - s),))


def sigmoid(t: float) -> float:
    if t >= 0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def apply_sigmoid(v):
    return v.sigmoid() if isinstance(v, Var) else sigmoid(float(v))


def apply_sqrt(v):
    return v.sqrt() if isinstance(v, Var) else math.sqrt(float(v))
