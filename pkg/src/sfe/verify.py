"""Certificates for the LP/SDP feasibility and extension conditions.

Every ``check_*`` function reports residuals instead of raising on
infeasibility; the singleton extension, for instance, is infeasible by design.
``jacobi_eigen`` is the dense ground-truth eigensolver used to cross-check the
power method and to measure PSD slack.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import (
    FEASIBILITY_TOL,
    PairDistribution,
    SetFunctionOracle,
    SizeLimitError,
    Subset,
    SupportedDistribution,
    all_masks,
    check_symmetric,
    indicator_matrix,
)
from .neural import NeuralConfig, boolean_lift, neural_evaluate, neural_support, top_k_eigen
from .scalar import ExtensionKind, evaluate, support

PSD_TOL = 1e-8
DEFAULT_PAIR_CAP = 1_000_000


@dataclass(frozen=True)
class FeasibilityReport:
    marginal_residual: float
    mass_residual: float
    min_weight: float
    passed: bool
    tol: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SdpFeasibilityReport:
    reconstruction_residual: float
    psd_slack: float
    mass_residual: float
    passed: bool
    tol: float

    def as_dict(self) -> dict:
        return asdict(self)


def check_lp_feasible(d: SupportedDistribution, x, tol: float = FEASIBILITY_TOL) -> FeasibilityReport:
    """Residuals of ``sum y_S 1_S = x``, ``sum y_S = 1`` and ``y >= 0``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (d.n,):
        raise ValueError(f"x has shape {x.shape}, distribution is over n={d.n}")
    marginal = float(np.max(np.abs(d.marginals() - x))) if d.n else 0.0
    mass = abs(d.mass() - 1.0)
    min_w = float(np.min(d.weights)) if len(d) else 0.0
    passed = marginal <= tol and mass <= tol and min_w >= -tol
    return FeasibilityReport(marginal, mass, min_w, passed, tol)


def jacobi_eigen(a, tol: float = 1e-12, max_sweeps: int = 30) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigen-decomposition of a symmetric matrix.

    Sweeps until the off-diagonal Frobenius norm is at most ``tol * ||A||_F``
    (or ``max_sweeps``).  Returns eigenvalues in descending order and the
    matching eigenvectors as columns.
    """
    a = check_symmetric(a, what="A").copy()
    n = len(a)
    if n > 64:
        raise SizeLimitError("jacobi_eigen supports n <= 64")
    v = np.eye(n)
    target = tol * np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def check_sdp_feasible(p: PairDistribution, x_prime, tol: float = PSD_TOL,
                       max_pairs: int = DEFAULT_PAIR_CAP) -> SdpFeasibilityReport:
    """Compare ``M = sum y_{S,T} (1_S 1_T^T + 1_T 1_S^T)/2`` against ``X'``.

    ``psd_slack`` is the smallest eigenvalue of ``M - X'`` (Jacobi), so the
    dual constraint ``X' <= M`` holds when it is non-negative.
    """
    if len(p) > max_pairs:
        raise SizeLimitError(f"pair support {len(p)} exceeds cap {max_pairs}")
    x_prime = check_symmetric(x_prime, what="X'")
    if x_prime.shape != (p.n, p.n):
        raise ValueError("X' does not match the ground set")
    diff = p.lifted_matrix() - x_prime
    recon = float(np.linalg.norm(diff))
    slack = float(jacobi_eigen(diff)[0][-1]) if p.n else 0.0
    mass = abs(p.mass() - 1.0)
    return SdpFeasibilityReport(recon, slack, mass, slack >= -tol and mass <= tol, tol)


def random_psd(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    a = rng.standard_normal((n, rank or n))
    return a @ a.T


def check_extension_property(kind: ExtensionKind, f: SetFunctionOracle, n: int,
                             neural: NeuralConfig | None = None) -> float:
    """Exhaustive ``max |ext(e(S)) - f(S)|`` over the sets where ``kind`` applies.

    With ``neural`` given, the embedding is ``1_S 1_S^T`` and the lifted
    extension built on ``kind`` is evaluated.
    """
    if n > 12:
        raise SizeLimitError("exhaustive extension check limited to n <= 12")
    if f.n != n:
        raise ValueError("oracle size mismatch")
    worst = 0.0
    for bits in all_masks(n).tolist():
        if not kind.applies_to(bits):
            continue
        s = Subset(bits, n)
        if neural is None:
            value = evaluate(kind, f, s.indicator())
        else:
            value = neural_evaluate(f, kind, boolean_lift(s), neural)
        worst = max(worst, abs(value - f(s)))
    return worst


def sample_domain(kind: ExtensionKind, n: int, rng: np.random.Generator, count: int) -> np.ndarray:
    """Uniform points of the kind's domain: the box, or ``{x >= 0, sum(x) <= 1}``."""
    if kind.domain == "simplex":
        return rng.dirichlet(np.ones(n + 1), size=count)[:, :n]
    return rng.random((count, n))


def check_no_bad_minima(kind: ExtensionKind, f: SetFunctionOracle, n: int, samples: int,
                        seed: int) -> tuple[float, float]:
    """``(min over sampled x of ext(x), min over all S of f(S))``."""
    rng = np.random.default_rng(seed)
    xs = sample_domain(kind, n, rng, samples)
    sampled = min(evaluate(kind, f, x) for x in xs)
    discrete = float(np.min(f.table()))
    return sampled, discrete


def discrete_minimizer(kind: ExtensionKind, f: SetFunctionOracle) -> tuple[int, float]:
    """Minimizer of ``f`` over the sets where the extension property holds."""
    table = f.table()
    masks = [m for m in range(1 << f.n) if kind.applies_to(m)]
    best = min(masks, key=lambda m: (table[m], m.bit_count(), m))
    return best, float(table[best])


def lp_feasibility_sweep(kind: ExtensionKind, n: int, trials: int, seed: int,
                         tol: float = 1e-10) -> dict:
    """Feasibility residual maxima of ``kind`` over random points of its domain."""
    rng = np.random.default_rng(seed)
    xs = sample_domain(kind, n, rng, trials)
    worst_marg = worst_mass = 0.0
    min_w = math.inf
    infeasible = 0
    for x in xs:
        r = check_lp_feasible(support(kind, x), x, tol)
        worst_marg = max(worst_marg, r.marginal_residual)
        worst_mass = max(worst_mass, r.mass_residual)
        min_w = min(min_w, r.min_weight)
        infeasible += r.marginal_residual > tol
    return {
        "kind": str(kind),
        "max_marginal_residual": worst_marg,
        "max_mass_residual": worst_mass,
        "min_weight": min_w,
        "infeasible_fraction": infeasible / trials,
        "passed": worst_marg <= tol and worst_mass <= tol and min_w >= -tol,
    }


def feasible_primal_pair(f_table: np.ndarray, n: int, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Random primal LP point ``(z >= 0, b)`` with ``1_S . z + b <= f(S)`` for all ``S``.

    ``b`` is drawn below ``min(0, min f)`` and ``z`` is shrunk by the worst
    excess ratio over all ``2^n`` constraints.
    """
    ind = indicator_matrix(n)
    b = min(0.0, float(f_table.min())) - rng.exponential()
    z = rng.exponential(size=n)
    load = ind @ z
    room = f_table - b
    mask = load > 0
    scale = min(1.0, float(np.min(room[mask] / load[mask]))) if mask.any() else 1.0
    return z * scale, b


def containment_residual(f_table: np.ndarray, z: np.ndarray, b: float, x: np.ndarray) -> tuple[float, float]:
    """Check that ``(diag(z), b)`` is primal-SDP feasible at ``X = sqrt(x) sqrt(x)^T``.

    Returns ``(max constraint violation, |Tr(X^T Z) - z.x|)``.  The SDP
    constraint is evaluated from the matrices directly:
    ``Tr((1_S 1_T^T + 1_T 1_S^T) Z) / 2 + b <= f(S & T)`` for every pair.
    """
    n = len(z)
    ind = indicator_matrix(n)
    zmat = np.diag(z)
    # (1_S^T Z 1_T) for all pairs; Tr(1_S 1_T^T Z) = 1_T^T Z 1_S
    bil = ind @ zmat @ ind.T
    lhs = 0.5 * (bil + bil.T) + b
    masks = all_masks(n)
    rhs = f_table[masks[:, None] & masks[None, :]]
    violation = float(np.max(lhs - rhs))
    root = np.sqrt(x)
    big_x = np.outer(root, root)
    objective_gap = abs(float(np.trace(big_x.T @ zmat)) - float(z @ x))
    return violation, objective_gap


def sdp_lift_residuals(x: np.ndarray, scalar: ExtensionKind, cfg: NeuralConfig) -> SdpFeasibilityReport:
    """Feasibility of the neural lift of ``x`` against the matrix it reconstructs.

    The comparison target is ``sum_i lam_i v_i v_i^T`` over the retained
    eigenpairs (scaled by the trace when ``cfg`` normalizes), which equals
    ``x`` itself when ``k = n`` and the eigenpairs are exact.
    """
    p = neural_support(scalar, x, cfg)
    target_x = x / np.trace(x) if cfg.normalize_trace else x
    target = np.zeros_like(x)
    for pair in top_k_eigen(target_x, cfg):
        target += pair.value * np.outer(pair.vector, pair.vector)
    return check_sdp_feasible(p, target)

