"""Neural set function extensions on PSD matrices.

A PSD matrix ``X = sum_i lam_i v_i v_i^T`` is lifted by running a scalar
extension on each eigenvector and combining the resulting distributions into a
distribution over pairs, ``p_X(S, T) = sum_i lam_i p_{v_i}(S) p_{v_i}(T)``,
valued at ``f(S & T)``.  Eigenpairs come from power iteration with Hotelling
deflation, the same procedure the differentiable path in
:mod:`sfe.optimizer` records on its tape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    DENSE_CACHE_MAX_N,
    FEASIBILITY_TOL,
    WEIGHT_TOL,
    PairDistribution,
    SetFunctionOracle,
    SizeLimitError,
    Subset,
    SupportedDistribution,
    mask_array,
    check_symmetric,
)
from .scalar import ExtensionKind, SortPermutation, Variant, decode_masks, support
from .tape import sigmoid

# eigenvalues at or below this fraction of trace(X) are treated as zero
EIG_DROP_RTOL = 1e-12
SIGN_TOL = 1e-12
MAX_PAIRS = 2_000_000


@dataclass(frozen=True)
class NeuralConfig:
    """Settings of the eigen-lift.

    ``tol=None`` runs exactly ``power_iters`` iterations per eigenpair (the
    setting used during optimization); a float switches to converged mode,
    iterating until ``||Xv - lam v|| <= tol * ||X||_F`` or ``max_iters``.
    """

    k: int = 4
    power_iters: int = 5
    reparam: str = "sigmoid"
    normalize_trace: bool = True
    tol: float | None = None
    max_iters: int = 200_000

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.power_iters < 1:
            raise ValueError("power_iters must be >= 1")
        if self.reparam not in ("none", "sigmoid"):
            raise ValueError(f"unknown reparameterization {self.reparam!r}")

    @classmethod
    def exact(cls, k: int, converged: bool = False) -> "NeuralConfig":
        """Verification setting: no sigmoid, no trace normalization."""
        return cls(k=k, reparam="none", normalize_trace=False, tol=1e-13 if converged else None)


@dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray
    sign_convention: str = "first-nonzero-positive"


def start_vector(n: int, i: int) -> np.ndarray:
    """Fixed, strictly positive start vector for the ``i``-th eigenpair."""
    v = np.random.default_rng([0x5FE, n, i]).uniform(0.5, 1.5, n)
    return v / np.linalg.norm(v)


def fix_sign(v: np.ndarray) -> np.ndarray:
    for c in v:
        if abs(c) > SIGN_TOL:
            return v if c > 0 else -v
    return v


def power_iteration(a: np.ndarray, v0: np.ndarray, iters: int, tol: float | None = None,
                    max_iters: int = 200_000, history: list | None = None):
    """Dominant eigenpair of symmetric ``a`` from start ``v0``.

    Returns ``(lam, v)`` with ``lam`` the Rayleigh quotient.  When ``history``
    is a list, ``(rayleigh, residual)`` is appended before each update.
    """
    v = v0
    limit = iters if tol is None else max_iters
    scale = np.linalg.norm(a)
    for _ in range(limit):
        w = a @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0, v
        if history is not None or tol is not None:
            lam = float(v @ w)
            res = float(np.linalg.norm(w - lam * v))
            if history is not None:
                history.append((lam, res))
            if tol is not None and res <= tol * scale:
                break
        v = w / nrm
    return float(v @ a @ v), v


def top_k_eigen(x: np.ndarray, cfg: NeuralConfig) -> list[EigenPair]:
    """Top-``k`` eigenpairs by power iteration and Hotelling deflation.

    Pairs whose eigenvalue is not positive (up to round-off relative to the
    trace) are dropped, so fewer than ``k`` pairs may come back.
    """
    x = check_symmetric(x, what="X")
    n = len(x)
    if n > 64:
        raise SizeLimitError("n <= 64 required")
    if cfg.k > n:
        raise ValueError(f"k={cfg.k} exceeds n={n}")
    trace = float(np.trace(x))
    if trace <= 0.0:
        return []
    a = x.copy()
    pairs = []
    for i in range(cfg.k):
        lam, v = power_iteration(a, start_vector(n, i), cfg.power_iters, cfg.tol, cfg.max_iters)
        if lam <= EIG_DROP_RTOL * trace:
            break
        v = fix_sign(v)
        pairs.append(EigenPair(lam, v))
        a = a - lam * np.outer(v, v)
    pairs.sort(key=lambda p: -p.value)
    return pairs


def _prepare(x: np.ndarray, cfg: NeuralConfig):
    x = check_symmetric(x, what="X")
    trace = float(np.trace(x))
    if trace <= 0.0:
        return []
    if cfg.normalize_trace:
        x = x / trace
    out = []
    for p in top_k_eigen(x, cfg):
        u = p.vector
        if cfg.reparam == "sigmoid":
            u = np.array([sigmoid(t) for t in u])
        out.append((p.value, u))
    return out


def _scalar_support(scalar: ExtensionKind, u: np.ndarray, cfg: NeuralConfig) -> SupportedDistribution:
    # without the sigmoid the eigenvector leaves the scalar domain; the
    # marginal identity still holds, so domain checks are skipped
    return support(scalar, u, FEASIBILITY_TOL, check=cfg.reparam != "none")


def lifted_supports(scalar: ExtensionKind, x: np.ndarray, cfg: NeuralConfig) -> list[tuple[float, SupportedDistribution]]:
    """``(lam_i, p_{v_i})`` for each retained eigenpair."""
    return [(lam, _scalar_support(scalar, u, cfg)) for lam, u in _prepare(x, cfg)]


def _pair_value(lam: float, dist: SupportedDistribution, f: SetFunctionOracle) -> float:
    masks = mask_array(dist.masks, dist.n)
    w = np.asarray(dist.weights)
    inter = (masks[:, None] & masks[None, :]).ravel()
    coef = np.outer(w, w).ravel()
    if f.n <= DENSE_CACHE_MAX_N:
        agg = np.bincount(inter, weights=coef, minlength=1 << f.n)
        keys = np.flatnonzero(agg)
        vals = agg[keys]
    else:
        acc: dict[int, float] = {}
        for m, c in zip(inter.tolist(), coef.tolist()):
            acc[m] = acc.get(m, 0.0) + c
        keys = mask_array([m for m, c in acc.items() if c != 0.0], f.n)
        vals = np.array([acc[int(m)] for m in keys])
    if keys.size == 0:
        return 0.0
    return lam * math.fsum(vals * f.values(keys))


def neural_evaluate_generic(f: SetFunctionOracle, scalar: ExtensionKind, x: np.ndarray, cfg: NeuralConfig) -> float:
    """``sum_i lam_i sum_{S,T} p_{v_i}(S) p_{v_i}(T) f(S & T)`` by the double sum."""
    total = 0.0
    for lam, dist in lifted_supports(scalar, x, cfg):
        total += _pair_value(lam, dist, f)
    return total


def neural_lovasz(f: SetFunctionOracle, x: np.ndarray, cfg: NeuralConfig) -> float:
    """Closed form of the neural Lovasz extension.

    The prefix chain is closed under intersection, so the double sum collapses
    to ``sum_j p_j (p_j + 2 sum_{l>j} p_l) f(S_j)`` per eigenvector, using only
    the ``n`` chain sets.
    """
    total = 0.0
    for lam, u in _prepare(x, cfg):
        if cfg.reparam != "none" and (u.min() < -FEASIBILITY_TOL or u.max() > 1 + FEASIBILITY_TOL):
            raise ValueError("reparameterized eigenvector outside [0,1]^n")
        perm = SortPermutation.of(u)
        s = perm.sorted_values(u)
        chain = perm.prefix_masks()
        masks, coefs = [], []
        for j, m in enumerate(chain):
            p = s[j] - s[j + 1]
            if p != 0.0:
                masks.append(m)
                # sum_{l > j} p_l telescopes to s[j + 1]
                coefs.append(p * (p + 2.0 * s[j + 1]))
        if masks:
            total += lam * math.fsum(np.asarray(coefs) * f.values(masks))
    return total


def neural_evaluate(f: SetFunctionOracle, scalar: ExtensionKind, x: np.ndarray, cfg: NeuralConfig) -> float:
    if scalar.variant is Variant.LOVASZ:
        return neural_lovasz(f, x, cfg)
    return neural_evaluate_generic(f, scalar, x, cfg)


def neural_support(scalar: ExtensionKind, x: np.ndarray, cfg: NeuralConfig, max_pairs: int = MAX_PAIRS) -> PairDistribution:
    """Materialize ``p_X(S, T)`` (duplicate pairs across eigenvectors are merged)."""
    lifted = lifted_supports(scalar, x, cfg)
    n = len(x)
    size = sum(len(d) ** 2 for _, d in lifted)
    if size > max_pairs:
        raise SizeLimitError(f"pair support of size {size} exceeds cap {max_pairs}")
    acc: dict[tuple[int, int], float] = {}
    for lam, dist in lifted:
        for a, wa in zip(dist.masks, dist.weights):
            for b, wb in zip(dist.masks, dist.weights):
                key = (a, b)
                acc[key] = acc.get(key, 0.0) + lam * wa * wb
    keys = list(acc)
    normalized = cfg.normalize_trace and all(d.normalized for _, d in lifted)
    return PairDistribution(
        n,
        tuple(k[0] for k in keys),
        tuple(k[1] for k in keys),
        np.array([acc[k] for k in keys]),
        normalized,
    )


def neural_decode(
    f: SetFunctionOracle,
    scalar: ExtensionKind,
    x: np.ndarray,
    cfg: NeuralConfig,
    weight_tol: float = WEIGHT_TOL,
    feasible: Callable[[int], bool] | None = None,
) -> tuple[Subset, float]:
    """Best set over the union of the per-eigenvector scalar supports."""
    candidates = set()
    for _, dist in lifted_supports(scalar, x, cfg):
        candidates.update(m for m, w in zip(dist.masks, dist.weights) if w > weight_tol)
    if not candidates:
        raise ValueError("empty support: X has no positive eigenvalue")
    return decode_masks(candidates, f, feasible)


def boolean_lift(s: Subset) -> np.ndarray:
    """``1_S 1_S^T``."""
    v = s.indicator()
    return np.outer(v, v)

