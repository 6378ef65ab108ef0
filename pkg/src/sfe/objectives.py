"""Graph objectives (max clique, max independent set, cut) and exhaustive optima.

Sets are bitmasks over the nodes ``0..n-1``.  Objectives are written for
minimization: cliques and independent sets score negative, everything trivial
scores zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np

from .core import MAX_N, SetFunctionOracle, SizeLimitError, Subset, mask_elements

BRUTE_FORCE_MAX_N = 24


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph stored as per-node neighbour bitmasks."""

    n: int
    adjacency: tuple[int, ...]

    def __post_init__(self):
        if not 0 <= self.n <= MAX_N:
            raise SizeLimitError(f"graphs are limited to n <= {MAX_N}, got {self.n}")
        if len(self.adjacency) != self.n:
            raise ValueError("adjacency length differs from n")
        for i, row in enumerate(self.adjacency):
            if row >> self.n:
                raise ValueError(f"node {i} has a neighbour outside the graph")
            if row >> i & 1:
                raise ValueError(f"self-loop at node {i}")
            for j in mask_elements(row):
                if not self.adjacency[j] >> i & 1:
                    raise ValueError(f"adjacency not symmetric at ({i}, {j})")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        """Build from an edge list; duplicates collapse, self-loops and bad ids raise."""
        if n < 0 or n > MAX_N:
            raise SizeLimitError(f"graphs are limited to n <= {MAX_N}, got {n}")
        adj = [0] * n
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) has a node outside 0..{n - 1}")
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        return cls(n, tuple(adj))

    @classmethod
    def random(cls, n: int, p: float, rng: np.random.Generator) -> "Graph":
        """Erdos-Renyi ``G(n, p)``; pairs are drawn in ``(i < j)`` lexicographic order."""
        iu, ju = np.triu_indices(n, 1)
        keep = rng.random(len(iu)) < p
        return cls.from_edges(n, zip(iu[keep].tolist(), ju[keep].tolist()))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        full = (1 << n) - 1
        return cls(n, tuple(full & ~(1 << i) for i in range(n)))

    @classmethod
    def petersen(cls) -> "Graph":
        outer = [(i, (i + 1) % 5) for i in range(5)]
        spokes = [(i, i + 5) for i in range(5)]
        inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
        return cls.from_edges(10, outer + spokes + inner)

    def complement(self) -> "Graph":
        full = (1 << self.n) - 1
        return Graph(self.n, tuple(full & ~row & ~(1 << i) for i, row in enumerate(self.adjacency)))

    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i, row in enumerate(self.adjacency) for j in mask_elements(row) if i < j]

    @property
    def edge_count(self) -> int:
        return sum(row.bit_count() for row in self.adjacency) // 2

    def internal_edges(self, bits: int) -> int:
        return sum((self.adjacency[i] & bits).bit_count() for i in mask_elements(bits)) // 2

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adjacency[u] >> v & 1)

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges()]}


class Problem(str, Enum):
    MAX_CLIQUE = "maxclique"
    MAX_INDEPENDENT_SET = "mis"
    MAX_CUT = "maxcut"  # cut function only; no solver objective


@dataclass(frozen=True)
class ProblemKind:
    """``mis_form`` selects the independent-set objective: ``reconciled``
    (density complement, minimized by maximum independent sets) or ``literal``
    (``(|S|/n) q(S)^c``, minimized by the empty set)."""

    variant: Problem
    c: int = 2
    mis_form: str = "reconciled"

    def __post_init__(self):
        object.__setattr__(self, "variant", Problem(self.variant))
        if self.c < 1:
            raise ValueError("exponent c must be >= 1")
        if self.mis_form not in ("reconciled", "literal"):
            raise ValueError(f"unknown MIS form {self.mis_form!r}")


def edge_density(g: Graph, bits: int) -> float:
    """Internal edge density ``2 w(S) / (|S|^2 - |S|)``; 0 when ``|S| <= 1``."""
    k = bits.bit_count()
    if k <= 1:
        return 0.0
    return 2.0 * g.internal_edges(bits) / (k * k - k)


def clique_objective(g: Graph, c: int = 2) -> SetFunctionOracle:
    """``f(S) = -w(S) q(S)^c`` with ``w`` the internal edge count, 0 for ``|S| <= 1``."""
    if c < 1:
        raise ValueError("exponent c must be >= 1")

    def f(s: Subset) -> float:
        if len(s) <= 1:
            return 0.0
        w = g.internal_edges(s.bits)
        return -w * edge_density(g, s.bits) ** c

    return SetFunctionOracle(f, g.n, name="maxclique")


def mis_objective(g: Graph, c: int = 2, form: str = "reconciled") -> SetFunctionOracle:
    """Independent-set objective; see :class:`ProblemKind` for the two forms."""
    if c < 1:
        raise ValueError("exponent c must be >= 1")
    if form == "reconciled":
        def f(s: Subset) -> float:
            return -(len(s) / g.n) * (1.0 - edge_density(g, s.bits)) ** c
    elif form == "literal":
        def f(s: Subset) -> float:
            return (len(s) / g.n) * edge_density(g, s.bits) ** c
    else:
        raise ValueError(f"unknown MIS form {form!r}")
    return SetFunctionOracle(f, g.n, name=f"mis-{form}")


def objective(g: Graph, p: ProblemKind) -> SetFunctionOracle:
    if p.variant is Problem.MAX_CLIQUE:
        return clique_objective(g, p.c)
    if p.variant is Problem.MAX_INDEPENDENT_SET:
        return mis_objective(g, p.c, p.mis_form)
    return cut_function(g)


def cut_function(g: Graph) -> SetFunctionOracle:
    """Number of edges with exactly one endpoint in ``S``."""
    def f(s: Subset) -> float:
        return float(sum((g.adjacency[i] & ~s.bits).bit_count() for i in s))

    return SetFunctionOracle(f, g.n, name="cut")


def is_clique(g: Graph, s: Subset | int) -> bool:
    bits = s.bits if isinstance(s, Subset) else int(s)
    return all(bits & ~(1 << i) & ~g.adjacency[i] == 0 for i in mask_elements(bits))


def is_independent(g: Graph, s: Subset | int) -> bool:
    bits = s.bits if isinstance(s, Subset) else int(s)
    return all(g.adjacency[i] & bits == 0 for i in mask_elements(bits))


def feasibility_predicate(g: Graph, p: ProblemKind):
    if p.variant is Problem.MAX_CLIQUE:
        return lambda m: is_clique(g, m)
    if p.variant is Problem.MAX_INDEPENDENT_SET:
        return lambda m: is_independent(g, m)
    return None


def _max_clique(g: Graph) -> int:
    """Largest clique, smallest bitmask among ties (branch and bound over masks)."""
    adj = g.adjacency
    best = [0, 0]  # size, mask

    def grow(r: int, size: int, cand: int) -> None:
        if size > best[0] or (size == best[0] and r < best[1]):
            best[0], best[1] = size, r
        while cand:
            # a strictly smaller bound cannot tie, so ties are still explored
            if size + cand.bit_count() < best[0]:
                return
            low = cand & -cand
            cand ^= low
            v = low.bit_length() - 1
            grow(r | low, size + 1, cand & adj[v])

    grow(0, 0, (1 << g.n) - 1)
    return best[1]


def brute_force(g: Graph, p: ProblemKind) -> tuple[Subset, int]:
    """Exact maximum clique / independent set by exhaustive search, ``n <= 24``."""
    if g.n > BRUTE_FORCE_MAX_N:
        raise SizeLimitError(f"brute force limited to n <= {BRUTE_FORCE_MAX_N}, got {g.n}")
    if p.variant is Problem.MAX_CLIQUE:
        bits = _max_clique(g)
    elif p.variant is Problem.MAX_INDEPENDENT_SET:
        bits = _max_clique(g.complement())
    else:
        raise ValueError("brute force is defined for clique and independent-set problems")
    return Subset(bits, g.n), bits.bit_count()
