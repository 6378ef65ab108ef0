"""Projected gradient minimization of scalar and neural extensions.

Scalar mode descends on ``x`` in the box or the simplex.  Neural mode descends
on a factor ``V`` with ``X = V V^T``; its forward pass (trace normalization,
fixed-count power iterations, sign fix, sigmoid, closed-form Lovasz value) is
recorded on a :class:`~sfe.tape.Tape` and differentiated in one backward sweep.

Every iterate is decoded and the best set seen so far is kept, so the result
never gets worse with more steps even though the step size is fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import WEIGHT_TOL, SetFunctionOracle, Subset
from .neural import EIG_DROP_RTOL, SIGN_TOL, NeuralConfig, neural_decode, start_vector
from .scalar import (
    LOVASZ,
    ExtensionKind,
    SortPermutation,
    Variant,
    chain_coefficients,
    decode,
    evaluate,
    lovasz_gradient,
    multilinear_gradient,
    support,
)
from .tape import Tape, Var, apply_sigmoid

Feasible = Callable[[int], bool]


def project_box(x) -> np.ndarray:
    return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)


def project_simplex(x) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum(x) = 1}`` by sort and threshold."""
    x = np.asarray(x, dtype=float)
    u = np.sort(x)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, len(x) + 1)
    rho = int(np.nonzero(u - (css - 1.0) / ks > 0)[0][-1]) + 1
    theta = (css[rho - 1] - 1.0) / rho
    return np.maximum(x - theta, 0.0)


@dataclass(frozen=True)
class NeuralMode:
    d: int
    ncfg: NeuralConfig = NeuralConfig()
    scalar: ExtensionKind = LOVASZ

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("factor width d must be >= 1")
        if self.scalar.variant is not Variant.LOVASZ:
            raise ValueError("the differentiable neural path is implemented for the Lovasz kind")


@dataclass(frozen=True)
class SolveConfig:
    """``mode`` is an :class:`ExtensionKind` (scalar) or a :class:`NeuralMode`.

    ``domain=None`` picks the natural domain of the scalar kind.
    """

    steps: int = 100
    learning_rate: float = 0.05
    restarts: int = 1
    seed: int = 0
    domain: str | None = None
    mode: ExtensionKind | NeuralMode = LOVASZ

    def __post_init__(self):
        if self.steps < 1 or self.restarts < 1:
            raise ValueError("steps and restarts must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.domain not in (None, "box", "simplex"):
            raise ValueError(f"unknown domain {self.domain!r}")

    @property
    def resolved_domain(self) -> str:
        if self.domain is not None:
            return self.domain
        return self.mode.domain if isinstance(self.mode, ExtensionKind) else "box"


@dataclass
class SolveResult:
    point: np.ndarray
    subset: Subset
    value: float
    telemetry: list[list[float]] = field(default_factory=list)
    restart_values: list[float] = field(default_factory=list)


def restart_generators(seed: int, restarts: int) -> list[np.random.Generator]:
    """Independent per-restart streams split from one seed (Philox, counter based)."""
    return [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(seed).spawn(restarts)]


def _tape_value_and_grad(kind: ExtensionKind, f: SetFunctionOracle, x: np.ndarray) -> tuple[float, np.ndarray]:
    tape = Tape()
    xs = tape.vars(x)
    masks, coeffs, _ = chain_coefficients(kind, xs)
    # f(empty) = 0, so the empty-set mass drops out of the value
    out = tape.dot(coeffs, f.values(masks))
    return out.value, np.array(tape.gradient(out, xs))


def scalar_value_and_grad(kind: ExtensionKind, f: SetFunctionOracle, x: np.ndarray) -> tuple[float, np.ndarray]:
    if kind.variant is Variant.LOVASZ:
        return evaluate(kind, f, x, check=False), lovasz_gradient(f, x)
    if kind.variant is Variant.MULTILINEAR:
        return evaluate(kind, f, x, check=False), multilinear_gradient(f, x)
    return _tape_value_and_grad(kind, f, x)


def _decode_or_empty(decoder: Callable[[], tuple[Subset, float]]) -> tuple[float, int]:
    try:
        s, v = decoder()
        return v, s.bits
    except ValueError:
        # every weighted set was rejected; the empty set is always admissible
        return 0.0, 0


def _better(a: tuple[float, int], b: tuple[float, int] | None) -> bool:
    return b is None or (a[0], a[1].bit_count(), a[1]) < (b[0], b[1].bit_count(), b[1])


def minimize_scalar(f: SetFunctionOracle, cfg: SolveConfig, n: int | None = None,
                    feasible: Feasible | None = None) -> SolveResult:
    """Projected gradient descent on a scalar extension, decoding every iterate."""
    kind = cfg.mode
    if not isinstance(kind, ExtensionKind):
        raise ValueError("minimize_scalar needs a scalar extension mode")
    n = f.n if n is None else n
    kind.check_n(n)
    project = project_simplex if cfg.resolved_domain == "simplex" else project_box
    best, best_x = None, None
    telemetry, restart_values = [], []
    for rng in restart_generators(cfg.seed, cfg.restarts):
        x = project(rng.random(n))
        values, local = [], None
        for step in range(cfg.steps + 1):
            dist = support(kind, x, check=False)
            cand = _decode_or_empty(lambda: decode(dist, f, WEIGHT_TOL, feasible))
            if _better(cand, local):
                local = cand
            if _better(cand, best):
                best, best_x = cand, x.copy()
            if step == cfg.steps:
                break
            val, grad = scalar_value_and_grad(kind, f, x)
            values.append(val)
            x = project(x - cfg.learning_rate * grad)
        telemetry.append(values)
        restart_values.append(local[0])
    return SolveResult(best_x, Subset(best[1], n), best[0], telemetry, restart_values)


def neural_forward(tape: Tape, v_vars: list[list[Var]], f: SetFunctionOracle, ncfg: NeuralConfig) -> Var | float:
    """Neural Lovasz value of ``X = V V^T`` recorded on ``tape``.

    Mirrors :func:`sfe.neural.neural_lovasz` step for step: same start
    vectors, iteration count, drop rule and sign convention.
    """
    n = len(v_vars)
    if ncfg.tol is not None:
        raise ValueError("the recorded power method runs a fixed iteration count")
    if ncfg.k > n:
        raise ValueError(f"k={ncfg.k} exceeds n={n}")
    a = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            a[i][j] = a[j][i] = tape.dot(v_vars[i], v_vars[j])
    trace = tape.sum([a[i][i] for i in range(n)])
    if trace.value <= 0.0:
        return 0.0
    if ncfg.normalize_trace:
        a = [[a[i][j] / trace for j in range(n)] for i in range(n)]
        trace = tape.sum([a[i][i] for i in range(n)])
    total = []
    for e in range(ncfg.k):
        v = list(start_vector(n, e))
        for _ in range(ncfg.power_iters):
            w = [tape.dot(row, v) for row in a]
            nrm = tape.dot(w, w).sqrt()
            v = [wi / nrm for wi in w]
        lam = tape.dot(v, [tape.dot(row, v) for row in a])
        if lam.value <= EIG_DROP_RTOL * trace.value:
            break
        lead = next((float(c) for c in v if abs(float(c)) > SIGN_TOL), 1.0)
        if lead < 0:
            v = [-c for c in v]
        a = [[a[i][j] - lam * (v[i] * v[j]) for j in range(n)] for i in range(n)]
        u = [apply_sigmoid(c) for c in v] if ncfg.reparam == "sigmoid" else v
        perm = SortPermutation.of(u)
        s = perm.sorted_values(u)
        chain = perm.prefix_masks()
        coefs, masks = [], []
        for j, m in enumerate(chain):
            p = s[j] - s[j + 1]
            if float(p) != 0.0:
                coefs.append(p * (p + 2.0 * s[j + 1]))
                masks.append(m)
        if masks:
            total.append(lam * tape.dot(coefs, f.values(masks)))
    if not total:
        return 0.0
    return tape.sum(total)


def neural_value_and_grad(f: SetFunctionOracle, v: np.ndarray, ncfg: NeuralConfig) -> tuple[float, np.ndarray]:
    tape = Tape()
    rows = [tape.vars(r) for r in v]
    out = neural_forward(tape, rows, f, ncfg)
    if not isinstance(out, Var):
        return float(out), np.zeros_like(v)
    flat = [c for r in rows for c in r]
    return out.value, np.array(tape.gradient(out, flat)).reshape(v.shape)


def minimize_neural(f: SetFunctionOracle, cfg: SolveConfig, n: int | None = None,
                    feasible: Feasible | None = None) -> SolveResult:
    """Gradient descent on ``V`` (``X = V V^T``); returns the best decoded ``X``."""
    mode = cfg.mode
    if not isinstance(mode, NeuralMode):
        raise ValueError("minimize_neural needs a NeuralMode")
    n = f.n if n is None else n
    best, best_x = None, None
    telemetry, restart_values = [], []
    for rng in restart_generators(cfg.seed, cfg.restarts):
        v = rng.normal(0.0, 1.0 / math.sqrt(mode.d), size=(n, mode.d))
        values, local = [], None
        for step in range(cfg.steps + 1):
            x = v @ v.T
            if np.trace(x) > 0:
                cand = _decode_or_empty(lambda: neural_decode(f, mode.scalar, x, mode.ncfg, WEIGHT_TOL, feasible))
                if _better(cand, local):
                    local = cand
                if _better(cand, best):
                    best, best_x = cand, x.copy()
            if step == cfg.steps:
                break
            val, grad = neural_value_and_grad(f, v, mode.ncfg)
            values.append(val)
            v = v - cfg.learning_rate * grad
        telemetry.append(values)
        restart_values.append(local[0] if local else 0.0)
    if best is None:
        best, best_x = (0.0, 0), np.zeros((n, n))
    return SolveResult(best_x, Subset(best[1], n), best[0], telemetry, restart_values)


def minimize(f: SetFunctionOracle, cfg: SolveConfig, feasible: Feasible | None = None) -> SolveResult:
    if isinstance(cfg.mode, NeuralMode):
        return minimize_neural(f, cfg, feasible=feasible)
    return minimize_scalar(f, cfg, feasible=feasible)
