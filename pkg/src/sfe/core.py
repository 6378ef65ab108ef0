"""Ground-set arithmetic, the memoizing set-function oracle, and sparse distributions.

Subsets of ``[n]`` are stored as integer bitmasks (bit ``i`` set iff ``i`` is in
the set), with ``n <= 64``.  Public functions accept either a :class:`Subset` or
a raw ``int`` mask wherever that is unambiguous.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

MAX_N = 64
DENSE_CACHE_MAX_N = 20

WEIGHT_TOL = 1e-9
FEASIBILITY_TOL = 1e-8


class InfeasibleSetError(ValueError):
    """Raised when a computation would put positive weight on an infeasible set."""


class SizeLimitError(ValueError):
    """Raised when a ground set is too large for an exact or enumerative routine."""


def _check_n(n: int) -> None:
    if not 0 <= n <= MAX_N:
        raise SizeLimitError(f"ground set size must be in [0, {MAX_N}], got {n}")


def full_mask(n: int) -> int:
    return (1 << n) - 1


def mask_elements(bits: int) -> list[int]:
    out = []
    while bits:
        low = bits & -bits
        out.append(low.bit_length() - 1)
        bits ^= low
    return out


@dataclass(frozen=True, order=True)
class Subset:
    """A subset of ``{0, ..., n-1}`` held as a bitmask."""

    bits: int
    n: int

    def __post_init__(self):
        _check_n(self.n)
        if self.bits < 0 or self.bits >> self.n:
            raise ValueError(f"mask {self.bits:#x} has bits outside the ground set of size {self.n}")

    @classmethod
    def of(cls, items: Iterable[int], n: int) -> "Subset":
        bits = 0
        for i in items:
            if not 0 <= i < n:
                raise ValueError(f"element {i} outside ground set of size {n}")
            bits |= 1 << i
        return cls(bits, n)

    @classmethod
    def empty(cls, n: int) -> "Subset":
        return cls(0, n)

    @classmethod
    def full(cls, n: int) -> "Subset":
        return cls(full_mask(n), n)

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __contains__(self, i: int) -> bool:
        return 0 <= i < self.n and bool(self.bits >> i & 1)

    def __iter__(self) -> Iterator[int]:
        return iter(mask_elements(self.bits))

    def __and__(self, other: "Subset") -> "Subset":
        return intersect(self, other)

    def __or__(self, other: "Subset") -> "Subset":
        if self.n != other.n:
            raise ValueError("subsets over different ground sets")
        return Subset(self.bits | other.bits, self.n)

    def elements(self) -> list[int]:
        return mask_elements(self.bits)

    def indicator(self) -> np.ndarray:
        return indicator(self)

    def __repr__(self) -> str:
        return f"Subset({self.elements()}, n={self.n})"


def indicator(s: Subset) -> np.ndarray:
    """Boolean vector ``1_S`` of length ``n`` as floats."""
    return mask_indicator(s.bits, s.n)


def mask_indicator(bits: int, n: int) -> np.ndarray:
    return np.array([(bits >> i) & 1 for i in range(n)], dtype=float)


def intersect(a: Subset, b: Subset) -> Subset:
    if a.n != b.n:
        raise ValueError(f"cannot intersect subsets of ground sets {a.n} and {b.n}")
    return Subset(a.bits & b.bits, a.n)


def all_masks(n: int) -> np.ndarray:
    if n > DENSE_CACHE_MAX_N:
        raise SizeLimitError(f"refusing to enumerate 2^{n} subsets")
    return np.arange(1 << n, dtype=np.int64)


def mask_array(masks, n: int) -> np.ndarray:
    """Masks as an integer array; object dtype once bit 63 may be set."""
    return np.asarray(masks, dtype=np.int64 if n < 63 else object)


def indicator_matrix(n: int) -> np.ndarray:
    """``(2^n, n)`` 0/1 matrix whose row ``S`` is ``1_S``."""
    masks = all_masks(n)
    return ((masks[:, None] >> np.arange(n)) & 1).astype(float)


def _as_mask(s: Subset | int, n: int) -> int:
    if isinstance(s, Subset):
        if s.n != n:
            raise ValueError(f"subset over ground set {s.n} queried on oracle of size {n}")
        return s.bits
    bits = int(s)
    if bits < 0 or bits >> n:
        raise ValueError(f"mask {bits:#x} outside ground set of size {n}")
    return bits


class SetFunctionOracle:
    """Memoizing, call-counting wrapper around a black-box set function.

    The evaluator receives a :class:`Subset` and returns a real number, or
    ``math.inf`` to declare the set infeasible.  ``f(empty) = 0`` is enforced
    without calling the evaluator.  ``eval_count`` is the number of distinct
    sets queried so far (including the empty set once it has been asked for).

    For ``n <= 20`` the cache is a dense array, which makes bulk lookups through
    :meth:`values` cheap.
    """

    def __init__(self, evaluator: Callable[[Subset], float], n: int, name: str = "f"):
        _check_n(n)
        self.evaluator = evaluator
        self.n = n
        self.name = name
        self._lock = threading.Lock()
        self._cache: dict[int, float] = {}
        self._infeasible: set[int] = set()
        self._dense = n <= DENSE_CACHE_MAX_N
        if self._dense:
            self._values = np.zeros(1 << n)
            self._known = np.zeros(1 << n, dtype=bool)
            self._bad = np.zeros(1 << n, dtype=bool)

    @property
    def eval_count(self) -> int:
        return len(self._cache) + len(self._infeasible)

    def reset_count(self) -> None:
        """Forget all cached values (and hence the distinct-query count)."""
        with self._lock:
            self._cache.clear()
            self._infeasible.clear()
            if self._dense:
                self._known[:] = False
                self._bad[:] = False

    def _fill(self, bits: int) -> None:
        # caller holds the lock
        if bits in self._cache or bits in self._infeasible:
            return
        if bits == 0:
            value = 0.0
        else:
            value = float(self.evaluator(Subset(bits, self.n)))
            if value == math.inf:
                self._infeasible.add(bits)
                if self._dense:
                    self._known[bits] = True
                    self._bad[bits] = True
                return
            if not math.isfinite(value):
                raise ValueError(f"{self.name} returned {value} on {mask_elements(bits)}")
        self._cache[bits] = value
        if self._dense:
            self._values[bits] = value
            self._known[bits] = True

    def is_feasible(self, s: Subset | int) -> bool:
        bits = _as_mask(s, self.n)
        with self._lock:
            self._fill(bits)
        return bits not in self._infeasible

    def __call__(self, s: Subset | int) -> float:
        bits = _as_mask(s, self.n)
        value = self._cache.get(bits)
        if value is not None:
            return value
        with self._lock:
            self._fill(bits)
        if bits in self._infeasible:
            raise InfeasibleSetError(f"{self.name} is infeasible on {mask_elements(bits)}")
        return self._cache[bits]

    def values(self, masks: Sequence[int] | np.ndarray) -> np.ndarray:
        """Vectorized lookup; raises :class:`InfeasibleSetError` on any infeasible mask."""
        if not self._dense:
            return np.array([self(int(m)) for m in masks], dtype=float)
        masks = np.asarray(masks, dtype=np.int64)
        if masks.size and (masks.min() < 0 or masks.max() >> self.n):
            raise ValueError("mask outside ground set")
        missing = masks[~self._known[masks]]
        if missing.size:
            with self._lock:
                for m in np.unique(missing):
                    self._fill(int(m))
        if self._bad[masks].any():
            bad = int(masks[self._bad[masks]][0])
            raise InfeasibleSetError(f"{self.name} is infeasible on {mask_elements(bad)}")
        return self._values[masks]

    def table(self) -> np.ndarray:
        """Values on all ``2^n`` sets (queries every set)."""
        return self.values(all_masks(self.n))

    def __repr__(self) -> str:
        return f"SetFunctionOracle({self.name}, n={self.n}, eval_count={self.eval_count})"


def oracle_eval(o: SetFunctionOracle, s: Subset | int) -> float:
    return o(s)


def table_oracle(values: Sequence[float] | np.ndarray, n: int, name: str = "table") -> SetFunctionOracle:
    """Oracle backed by an explicit table indexed by bitmask; ``values[0]`` is ignored."""
    table = np.asarray(values, dtype=float)
    if table.shape != (1 << n,):
        raise ValueError(f"table must have 2^{n} entries, got {table.shape}")
    return SetFunctionOracle(lambda s: table[s.bits], n, name=name)


def modular_oracle(weights: Sequence[float] | np.ndarray, name: str = "modular") -> SetFunctionOracle:
    w = np.asarray(weights, dtype=float)
    return SetFunctionOracle(lambda s: math.fsum(w[i] for i in s), len(w), name=name)


def cardinality_oracle(n: int) -> SetFunctionOracle:
    return SetFunctionOracle(lambda s: float(len(s)), n, name="cardinality")


def random_table_oracle(n: int, rng: np.random.Generator, scale: float = 1.0) -> SetFunctionOracle:
    """Set function with i.i.d. normal values (and ``f(empty) = 0``)."""
    table = scale * rng.standard_normal(1 << n)
    table[0] = 0.0
    return table_oracle(table, n, name="random")


@dataclass(frozen=True)
class SupportedDistribution:
    """Sparse weights ``y_S`` over distinct subsets of ``[n]``.

    ``normalized`` records whether the weights were constructed to sum to one;
    ``lp_feasible`` is False for constructions whose marginals are not ``x``.
    """

    n: int
    masks: tuple[int, ...]
    weights: np.ndarray
    normalized: bool = True
    lp_feasible: bool = True

    def __post_init__(self):
        if len(self.masks) != len(self.weights):
            raise ValueError("masks and weights differ in length")
        if len(set(self.masks)) != len(self.masks):
            raise ValueError("support subsets must be distinct")

    @property
    def entries(self) -> list[tuple[Subset, float]]:
        return [(Subset(m, self.n), float(w)) for m, w in zip(self.masks, self.weights)]

    def __len__(self) -> int:
        return len(self.masks)

    def weight_of(self, s: Subset | int) -> float:
        bits = _as_mask(s, self.n)
        for m, w in zip(self.masks, self.weights):
            if m == bits:
                return float(w)
        return 0.0

    def as_dict(self) -> dict[int, float]:
        return {m: float(w) for m, w in zip(self.masks, self.weights)}

    def mass(self) -> float:
        return math.fsum(self.weights)

    def marginals(self) -> np.ndarray:
        """``sum_S y_S 1_S``."""
        out = np.zeros(self.n)
        for m, w in zip(self.masks, self.weights):
            for i in mask_elements(m):
                out[i] += w
        return out

    def pruned(self, tol: float = 0.0) -> "SupportedDistribution":
        keep = [i for i, w in enumerate(self.weights) if abs(w) > tol]
        return SupportedDistribution(
            self.n,
            tuple(self.masks[i] for i in keep),
            np.asarray(self.weights)[keep],
            self.normalized,
            self.lp_feasible,
        )


@dataclass(frozen=True)
class PairDistribution:
    """Sparse weights ``y_{S,T}`` over ordered pairs of subsets."""

    n: int
    left: tuple[int, ...]
    right: tuple[int, ...]
    weights: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        if not len(self.left) == len(self.right) == len(self.weights):
            raise ValueError("pair arrays differ in length")

    @property
    def entries(self) -> list[tuple[Subset, Subset, float]]:
        return [
            (Subset(a, self.n), Subset(b, self.n), float(w))
            for a, b, w in zip(self.left, self.right, self.weights)
        ]

    def __len__(self) -> int:
        return len(self.weights)

    def weight_of(self, s: Subset | int, t: Subset | int) -> float:
        a, b = _as_mask(s, self.n), _as_mask(t, self.n)
        return math.fsum(w for l, r, w in zip(self.left, self.right, self.weights) if l == a and r == b)

    def mass(self) -> float:
        return math.fsum(self.weights)

    def lifted_matrix(self) -> np.ndarray:
        """``sum y_{S,T} (1_S 1_T^T + 1_T 1_S^T) / 2``."""
        m = np.zeros((self.n, self.n))
        for a, b, w in zip(self.left, self.right, self.weights):
            if a and b:
                u, v = mask_indicator(a, self.n), mask_indicator(b, self.n)
                m += 0.5 * w * (np.outer(u, v) + np.outer(v, u))
        return m


def check_symmetric(a: np.ndarray, tol: float = 1e-12, what: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{what} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} has non-finite entries")
    if a.size and np.max(np.abs(a - a.T)) > tol * max(1.0, np.max(np.abs(a))):
        raise ValueError(f"{what} is not symmetric")
    return a
