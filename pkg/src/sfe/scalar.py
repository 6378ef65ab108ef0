"""Scalar set function extensions on ``[0,1]^n`` (or the simplex).

Every extension writes a point ``x`` as a distribution ``p_x`` over subsets and
returns ``sum_S p_x(S) f(S)``.  The chain-type constructions (Lovasz, bounded
cardinality, the two singleton variants) share :func:`chain_coefficients`,
which only uses ``+``/``-`` on its inputs and so also runs on tape variables
(see :mod:`sfe.tape`).  The multilinear extension is vectorized with numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .core import (
    DENSE_CACHE_MAX_N,
    FEASIBILITY_TOL,
    WEIGHT_TOL,
    InfeasibleSetError,
    SetFunctionOracle,
    SizeLimitError,
    Subset,
    SupportedDistribution,
    mask_array,
    all_masks,
)

MULTILINEAR_MAX_N = DENSE_CACHE_MAX_N


class Variant(str, Enum):
    LOVASZ = "lovasz"
    BOUNDED = "bounded"
    SINGLETON = "singleton"
    SIMPLEX_SINGLETON = "simplex_singleton"
    MULTILINEAR = "multilinear"


@dataclass(frozen=True)
class ExtensionKind:
    variant: Variant
    k: int | None = None

    def __post_init__(self):
        if self.variant is Variant.BOUNDED:
            if self.k is None or self.k < 1:
                raise ValueError("bounded cardinality extension needs k >= 1")
        elif self.k is not None:
            raise ValueError(f"{self.variant.value} takes no k")

    @classmethod
    def parse(cls, text: str) -> "ExtensionKind":
        """Parse ``lovasz``, ``bounded:K``, ``singleton``, ``simplex_singleton`` or ``multilinear``."""
        name, _, arg = text.strip().lower().partition(":")
        variant = Variant(name.replace("-", "_"))
        if variant is Variant.BOUNDED:
            if not arg:
                raise ValueError("bounded extension needs a cardinality, e.g. bounded:3")
            return cls(variant, int(arg))
        if arg:
            raise ValueError(f"unexpected argument for {name}")
        return cls(variant)

    @property
    def domain(self) -> str:
        return "simplex" if self.variant in (Variant.BOUNDED, Variant.SIMPLEX_SINGLETON) else "box"

    @property
    def lp_feasible(self) -> bool:
        return self.variant is not Variant.SINGLETON

    def applies_to(self, bits: int) -> bool:
        """Whether the extension property is guaranteed at ``1_S``."""
        size = bits.bit_count()
        if self.variant is Variant.BOUNDED:
            return size <= self.k
        if self.variant in (Variant.SINGLETON, Variant.SIMPLEX_SINGLETON):
            return size == 1
        return True

    def check_n(self, n: int) -> None:
        if self.variant is Variant.BOUNDED and self.k > n:
            raise ValueError(f"bounded cardinality k={self.k} exceeds n={n}")
        if self.variant is Variant.MULTILINEAR and n > MULTILINEAR_MAX_N:
            raise SizeLimitError(f"multilinear extension enumerates 2^n sets; n={n} > {MULTILINEAR_MAX_N}")

    def __str__(self) -> str:
        return f"bounded:{self.k}" if self.variant is Variant.BOUNDED else self.variant.value


LOVASZ = ExtensionKind(Variant.LOVASZ)
SINGLETON = ExtensionKind(Variant.SINGLETON)
SIMPLEX_SINGLETON = ExtensionKind(Variant.SIMPLEX_SINGLETON)
MULTILINEAR = ExtensionKind(Variant.MULTILINEAR)


def bounded(k: int) -> ExtensionKind:
    return ExtensionKind(Variant.BOUNDED, k)


@dataclass(frozen=True)
class SortPermutation:
    """Descending order of ``x``; ties go to the smaller original index.

    ``sorted_values`` appends the ``x_{n+1} = 0`` sentinel.
    """

    order: tuple[int, ...]
    tie_break: str = "desc-value/asc-index"

    @classmethod
    def of(cls, x: Sequence) -> "SortPermutation":
        keys = np.asarray([float(v) for v in x])
        return cls(tuple(int(i) for i in np.argsort(-keys, kind="stable")))

    def sorted_values(self, x: Sequence) -> list:
        return [x[i] for i in self.order] + [0.0]

    def prefix_masks(self) -> list[int]:
        masks, acc = [], 0
        for i in self.order:
            acc |= 1 << i
            masks.append(acc)
        return masks


def chain_coefficients(kind: ExtensionKind, x: Sequence, perm: SortPermutation | None = None):
    """Support sets and coefficients of a chain-type extension.

    Returns ``(masks, coeffs, empty_coeff)``: ``masks`` are the non-empty
    support sets, ``coeffs`` their weights and ``empty_coeff`` the mass left on
    the empty set.  Works on floats and on tape variables alike.
    """
    n = len(x)
    if kind.variant is Variant.SIMPLEX_SINGLETON:
        masks = [1 << j for j in range(n)]
        coeffs = list(x)
        return masks, coeffs, 1.0 - _sum(coeffs)
    if perm is None:
        perm = SortPermutation.of(x)
    s = perm.sorted_values(x)
    diffs = [s[j] - s[j + 1] for j in range(n)]
    if kind.variant is Variant.LOVASZ:
        return perm.prefix_masks(), diffs, (1.0 - s[0]) if n else 1.0
    if kind.variant is Variant.SINGLETON:
        return [1 << i for i in perm.order], diffs, (1.0 - s[0]) if n else 1.0
    if kind.variant is Variant.BOUNDED:
        k = kind.k
        if k > n:
            raise ValueError(f"bounded cardinality k={k} exceeds n={n}")
        # weight of S_i is the sum of diffs over j = i, i+k, i+2k, ...
        coeffs = list(diffs)
        for i in range(n - k - 1, -1, -1):
            coeffs[i] = coeffs[i] + coeffs[i + k]
        prefix = perm.prefix_masks()
        masks = prefix[:k]
        pos_bits = [1 << i for i in perm.order]
        for i in range(k, n):
            masks.append(sum(pos_bits[i - k + 1 : i + 1]))
        return masks, coeffs, 1.0 - _sum(coeffs)
    raise ValueError(f"{kind} is not a chain-type extension")


def _sum(values):
    total = 0.0
    for v in values:
        total = total + v
    return total


def _check_box(x: np.ndarray, tol: float) -> None:
    if np.any(x < -tol) or np.any(x > 1 + tol):
        raise ValueError(f"point outside [0,1]^n beyond tolerance {tol}")


def _as_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("expected a vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("point has non-finite entries")
    return x


def _build(n, masks, coeffs, empty, lp_feasible=True) -> SupportedDistribution:
    # exact zeros are dropped so that zero-mass sets are never queried
    keep_m, keep_w = [], []
    if empty != 0.0:
        keep_m.append(0)
        keep_w.append(float(empty))
    for m, w in zip(masks, coeffs):
        if w != 0.0:
            keep_m.append(m)
            keep_w.append(float(w))
    return SupportedDistribution(n, tuple(keep_m), np.array(keep_w), True, lp_feasible)


def lovasz_support(x, tol: float = FEASIBILITY_TOL, check: bool = True) -> SupportedDistribution:
    x = _as_vector(x)
    if check:
        _check_box(x, tol)
    masks, coeffs, empty = chain_coefficients(LOVASZ, x)
    return _build(len(x), masks, coeffs, empty)


def bounded_support(x, k: int, tol: float = FEASIBILITY_TOL, check: bool = True) -> SupportedDistribution:
    """Bounded-cardinality Lovasz support.

    The domain check asks for ``x`` in ``[0,1]^n`` with total chain mass at
    most one; any point with ``sum(x) <= 1`` qualifies, as do the corners
    ``1_S`` with ``|S| <= k``.
    """
    x = _as_vector(x)
    kind = bounded(k)
    kind.check_n(len(x))
    if check:
        _check_box(x, tol)
    masks, coeffs, empty = chain_coefficients(kind, x)
    if check and empty < -tol:
        raise ValueError(f"bounded:{k} support mass {1 - empty:.6g} exceeds 1; restrict x to the simplex")
    return _build(len(x), masks, coeffs, empty)


def singleton_support(x, tol: float = FEASIBILITY_TOL, check: bool = True) -> SupportedDistribution:
    x = _as_vector(x)
    if check:
        _check_box(x, tol)
    masks, coeffs, empty = chain_coefficients(SINGLETON, x)
    return _build(len(x), masks, coeffs, empty, lp_feasible=False)


def simplex_singleton_support(x, tol: float = FEASIBILITY_TOL, check: bool = True) -> SupportedDistribution:
    x = _as_vector(x)
    if check and (np.any(x < -tol) or x.sum() > 1 + tol):
        raise ValueError("point is off the simplex {x >= 0, sum(x) <= 1}")
    masks, coeffs, empty = chain_coefficients(SIMPLEX_SINGLETON, x)
    return _build(len(x), masks, coeffs, empty)


def product_weights(x: np.ndarray) -> np.ndarray:
    """``p_x(S)`` for every mask ``S`` under independent Bernoulli(``x_i``) membership."""
    w = np.ones(1)
    for xi in x:
        w = np.concatenate((w * (1.0 - xi), w * xi))
    return w


def multilinear_support(x, tol: float = FEASIBILITY_TOL, check: bool = True) -> SupportedDistribution:
    x = _as_vector(x)
    MULTILINEAR.check_n(len(x))
    if check:
        _check_box(x, tol)
    w = product_weights(x)
    nz = np.flatnonzero(w)
    return SupportedDistribution(len(x), tuple(int(m) for m in nz), w[nz], True, True)


def support(kind: ExtensionKind, x, tol: float = FEASIBILITY_TOL, check: bool = True) -> SupportedDistribution:
    """Dispatch to the support builder of ``kind``.

    ``check=False`` skips domain validation; the marginal identity
    ``sum_S p(S) 1_S = x`` still holds algebraically outside the domain, which
    the neural lift relies on when eigenvectors are used without a sigmoid.
    """
    v = kind.variant
    if v is Variant.LOVASZ:
        return lovasz_support(x, tol, check)
    if v is Variant.BOUNDED:
        return bounded_support(x, kind.k, tol, check)
    if v is Variant.SINGLETON:
        return singleton_support(x, tol, check)
    if v is Variant.SIMPLEX_SINGLETON:
        return simplex_singleton_support(x, tol, check)
    return multilinear_support(x, tol, check)


def expectation(dist: SupportedDistribution, f: SetFunctionOracle) -> float:
    """``sum_S y_S f(S)`` over the non-zero entries of ``dist``."""
    if f.n != dist.n:
        raise ValueError(f"oracle has n={f.n}, distribution n={dist.n}")
    masks = mask_array(dist.masks, dist.n)
    w = np.asarray(dist.weights)
    nz = w != 0.0
    if not nz.any():
        return 0.0
    try:
        vals = f.values(masks[nz])
    except InfeasibleSetError as exc:
        raise InfeasibleSetError(f"non-zero weight on an infeasible set: {exc}") from None
    if len(vals) > 64:
        return float(np.dot(w[nz], vals))
    return math.fsum(a * b for a, b in zip(w[nz], vals))


def evaluate(kind: ExtensionKind, f: SetFunctionOracle, x, tol: float = FEASIBILITY_TOL, check: bool = True) -> float:
    return expectation(support(kind, x, tol, check), f)


def lovasz_gradient(f: SetFunctionOracle, x) -> np.ndarray:
    """Gradient (a subgradient at ties) of the Lovasz extension.

    Component ``sigma(i)`` is ``f(S_i) - f(S_{i-1})`` along the sorted chain.
    """
    x = _as_vector(x)
    perm = SortPermutation.of(x)
    chain = perm.prefix_masks()
    vals = f.values(chain) if chain else np.zeros(0)
    grad = np.empty(len(x))
    prev = 0.0
    for i, v in zip(perm.order, vals):
        grad[i] = v - prev
        prev = v
    return grad


def multilinear_gradient(f: SetFunctionOracle, x) -> np.ndarray:
    """Exact gradient of the multilinear extension by enumeration.

    ``d/dx_k = sum_{S not containing k} p_{x_{-k}}(S) (f(S + k) - f(S))``.
    """
    x = _as_vector(x)
    n = len(x)
    MULTILINEAR.check_n(n)
    table = f.table()
    masks = all_masks(n)
    grad = np.empty(n)
    for k in range(n):
        bit = 1 << k
        with_k = masks[(masks & bit) != 0]
        xk = x.copy()
        xk[k] = 1.0
        p = product_weights(xk)[with_k]
        grad[k] = float(np.dot(p, table[with_k] - table[with_k ^ bit]))
    return grad


def decode(
    dist: SupportedDistribution,
    f: SetFunctionOracle,
    weight_tol: float = WEIGHT_TOL,
    feasible: Callable[[int], bool] | None = None,
) -> tuple[Subset, float]:
    """Best set in the support: minimal ``f``, then smaller cardinality, then smaller mask.

    Only entries with weight above ``weight_tol`` are candidates; sets on which
    ``f`` is infeasible, or rejected by ``feasible``, are skipped.
    """
    candidates = [m for m, w in zip(dist.masks, dist.weights) if w > weight_tol]
    return decode_masks(candidates, f, feasible)


def decode_masks(masks, f: SetFunctionOracle, feasible: Callable[[int], bool] | None = None) -> tuple[Subset, float]:
    best = None
    for m in set(masks):
        if feasible is not None and not feasible(m):
            continue
        if not f.is_feasible(m):
            continue
        key = (f(m), m.bit_count(), m)
        if best is None or key < best:
            best = key
    if best is None:
        raise ValueError("no support set carries weight above the tolerance")
    return Subset(best[2], f.n), best[0]
