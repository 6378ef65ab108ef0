"""Exact convex closure of a set function by dense revised simplex.

The closure at ``x`` is the optimum of

    min  sum_S y_S f(S)   s.t.  sum_S y_S 1_S = x,  sum_S y_S = 1,  y >= 0

over all ``2^n`` columns.  The row duals at optimality are the primal LP point
``(z, b)``: ``1_S . z + b <= f(S)`` for all ``S`` and ``x . z + b`` equals the
closure value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    InfeasibleSetError,
    SetFunctionOracle,
    SizeLimitError,
    SupportedDistribution,
    indicator_matrix,
)

CLOSURE_MAX_N = 12
REFRESH_EVERY = 50


class LPError(RuntimeError):
    pass


@dataclass
class SimplexTableau:
    """Revised-simplex state: columns ``(1_S, 1)`` for every mask ``S``.

    Basis entries ``>= n_cols`` denote the artificial variable of row
    ``entry - n_cols``.
    """

    a: np.ndarray
    cost: np.ndarray
    rhs: np.ndarray
    basis: list[int]
    binv: np.ndarray
    pivots: int = 0
    history: list[int] = field(default_factory=list)

    @classmethod
    def for_closure(cls, table: np.ndarray, x: np.ndarray) -> "SimplexTableau":
        n = len(x)
        a = np.vstack([indicator_matrix(n).T, np.ones(1 << n)])
        m = n + 1
        return cls(a, np.asarray(table, float), np.append(x, 1.0), [a.shape[1] + i for i in range(m)], np.eye(m))

    @property
    def n_rows(self) -> int:
        return self.a.shape[0]

    @property
    def n_cols(self) -> int:
        return self.a.shape[1]

    def column(self, j: int) -> np.ndarray:
        if j < self.n_cols:
            return self.a[:, j]
        e = np.zeros(self.n_rows)
        e[j - self.n_cols] = 1.0
        return e

    def basic_values(self) -> np.ndarray:
        return self.binv @ self.rhs

    def refresh(self) -> None:
        b = np.column_stack([self.column(j) for j in self.basis])
        self.binv = np.linalg.inv(b)

    def pivot(self, row: int, entering: int, d: np.ndarray) -> None:
        binv = self.binv
        binv[row] /= d[row]
        for i in range(self.n_rows):
            if i != row and d[i] != 0.0:
                binv[i] -= d[i] * binv[row]
        self.basis[row] = entering
        self.pivots += 1
        self.history.append(entering)
        if self.pivots % REFRESH_EVERY == 0:
            self.refresh()


def _run(tab: SimplexTableau, struct_cost: np.ndarray, art_cost: float, eps: float, max_pivots: int) -> None:
    """Simplex iterations with Bland's rule; artificials never re-enter."""
    m = tab.n_rows
    while True:
        cb = np.array([struct_cost[j] if j < tab.n_cols else art_cost for j in tab.basis])
        pi = cb @ tab.binv
        reduced = struct_cost - pi @ tab.a
        basic = set(tab.basis)
        entering = -1
        for j in np.flatnonzero(reduced < -eps):
            if int(j) not in basic:
                entering = int(j)
                break
        if entering < 0:
            return
        d = tab.binv @ tab.a[:, entering]
        xb = np.maximum(tab.basic_values(), 0.0)
        row, best = -1, math.inf
        for i in range(m):
            if d[i] > 1e-12:
                ratio = xb[i] / d[i]
                if ratio < best - 1e-15 or (abs(ratio - best) <= 1e-15 and tab.basis[i] < tab.basis[row]):
                    row, best = i, ratio
        if row < 0:
            raise LPError("unbounded direction; the closure LP is bounded, so this is a numerical failure")
        tab.pivot(row, entering, d)
        if tab.pivots > max_pivots:
            raise LPError(f"no convergence after {max_pivots} pivots")


def _drive_out_artificials(tab: SimplexTableau) -> None:
    for row in range(tab.n_rows):
        if tab.basis[row] < tab.n_cols:
            continue
        basic = set(tab.basis)
        coeffs = tab.binv[row] @ tab.a
        for j in np.flatnonzero(np.abs(coeffs) > 1e-9):
            if int(j) not in basic:
                tab.pivot(row, int(j), tab.binv @ tab.a[:, j])
                break


@dataclass(frozen=True)
class ClosureResult:
    value: float
    witness: SupportedDistribution
    z: np.ndarray
    b: float
    pivots: int


def convex_closure(f: SetFunctionOracle, x, max_pivots: int = 100_000) -> ClosureResult:
    """Value of the convex closure of ``f`` at ``x`` with a basic optimal witness and duals."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n != f.n:
        raise ValueError("oracle size mismatch")
    if n > CLOSURE_MAX_N:
        raise SizeLimitError(f"convex closure enumerates 2^n columns; n={n} > {CLOSURE_MAX_N}")
    if np.any(x < -1e-12) or np.any(x > 1 + 1e-12):
        raise ValueError("x must lie in [0,1]^n")
    x = np.clip(x, 0.0, 1.0)
    try:
        table = f.table()
    except InfeasibleSetError as exc:
        raise ValueError(f"closure undefined for a function with infeasible sets: {exc}") from None
    tab = SimplexTableau.for_closure(table, x)
    eps = 1e-11 * max(1.0, float(np.max(np.abs(table))))

    # phase 1: minimize the sum of artificials
    _run(tab, np.zeros(tab.n_cols), 1.0, 1e-12, max_pivots)
    infeas = sum(v for j, v in zip(tab.basis, tab.basic_values()) if j >= tab.n_cols)
    if infeas > 1e-9:
        raise LPError(f"phase 1 left infeasibility {infeas:.3g}")
    _drive_out_artificials(tab)

    _run(tab, table, 0.0, eps, max_pivots)
    tab.refresh()
    xb = tab.basic_values()
    cb = np.array([table[j] if j < tab.n_cols else 0.0 for j in tab.basis])
    pi = cb @ tab.binv
    keep = [(j, v) for j, v in zip(tab.basis, xb) if j < tab.n_cols and v > 1e-15]
    keep.sort()
    witness = SupportedDistribution(n, tuple(j for j, _ in keep), np.array([v for _, v in keep]))
    value = math.fsum(table[j] * v for j, v in keep)
    return ClosureResult(value, witness, pi[:n].copy(), float(pi[n]), tab.pivots)
