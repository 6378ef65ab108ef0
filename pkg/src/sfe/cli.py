"""``sfe`` command line: solve, verify and closure, each emitting a JSON report.

Exit codes: 0 success, 1 a verification tolerance failed, 2 malformed input,
3 a size limit was exceeded.  Wall-clock times live under ``"timing"``; the
rest of a report is byte-stable for fixed flags and seed.
"""

from __future__ import annotations

import argparse
import json
import math
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from .core import SizeLimitError, mask_elements, modular_oracle, random_table_oracle
from .lp import CLOSURE_MAX_N, convex_closure
from .neural import NeuralConfig, neural_evaluate, power_iteration, start_vector
from .objectives import (
    Graph,
    Problem,
    ProblemKind,
    brute_force,
    cut_function,
    feasibility_predicate,
    is_clique,
    is_independent,
    objective,
)
from .optimizer import NeuralMode, SolveConfig, minimize, neural_value_and_grad
from .scalar import (
    LOVASZ,
    MULTILINEAR,
    SIMPLEX_SINGLETON,
    SINGLETON,
    ExtensionKind,
    bounded,
    evaluate,
    lovasz_gradient,
    multilinear_gradient,
)
from .verify import (
    check_extension_property,
    check_no_bad_minima,
    discrete_minimizer,
    jacobi_eigen,
    lp_feasibility_sweep,
    random_psd,
    sample_domain,
    sdp_lift_residuals,
)

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_SIZE = 0, 1, 2, 3
FD_STEP = 1e-5


class InputError(ValueError):
    """Malformed user input (exit code 2)."""


# ---------------------------------------------------------------- graph input

def parse_graph(text: str, source: str = "<graph>") -> Graph:
    """Read ``{"n": .., "edges": [[u, v], ..]}`` or an ``n <count>`` header plus ``u v`` lines."""
    stripped = text.lstrip()
    try:
        if stripped.startswith("{"):
            obj = json.loads(text)
            n, edges = obj["n"], obj["edges"]
            if not isinstance(n, int) or isinstance(n, bool) or not isinstance(edges, list):
                raise InputError("'n' must be an integer and 'edges' a list")
            pairs = []
            for e in edges:
                if not (isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) and not isinstance(v, bool) for v in e)):
                    raise InputError(f"edge {e!r} is not a pair of integers")
                pairs.append((e[0], e[1]))
        else:
            lines = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
            lines = [ln for ln in lines if ln]
            if not lines or len(lines[0]) != 2 or lines[0][0] != "n":
                raise InputError("edge-list file must start with a header 'n <count>'")
            n = int(lines[0][1])
            pairs = []
            for ln in lines[1:]:
                if len(ln) != 2:
                    raise InputError(f"bad edge line {' '.join(ln)!r}")
                pairs.append((int(ln[0]), int(ln[1])))
        if n < 0:
            raise InputError("node count must be non-negative")
        return Graph.from_edges(n, pairs)
    except SizeLimitError:
        raise
    except (KeyError, json.JSONDecodeError, ValueError) as exc:
        raise InputError(f"{source}: {exc}") from None


def load_graph(path: str) -> Graph:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    return parse_graph(text, path)


# ---------------------------------------------------------------- helpers

def instance_seed(seed: int, i: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(i,)).generate_state(1, np.uint64)[0])


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def _mean_std(xs: list[float]) -> dict:
    if not xs:
        return {"mean": None, "std": None}
    return {"mean": statistics.fmean(xs), "std": statistics.pstdev(xs) if len(xs) > 1 else 0.0}


def emit(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def stable_section(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "timing"}


def _extension_mode(name: str, dim: int, topk: int) -> ExtensionKind | NeuralMode:
    if name == "neural-lovasz":
        return NeuralMode(dim, NeuralConfig(k=topk))
    if name == "lovasz" or name.startswith("bounded:"):
        try:
            return ExtensionKind.parse(name)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    raise InputError(f"unknown extension {name!r}")


# ---------------------------------------------------------------- solve

def cmd_solve(args) -> tuple[int, dict]:
    problem = ProblemKind(args.problem)
    mode = _extension_mode(args.extension, args.dim, args.topk)
    graphs = [load_graph(p) for p in args.graph]
    results, times = [], []
    for i, (path, g) in enumerate(zip(args.graph, graphs)):
        if isinstance(mode, NeuralMode) and mode.ncfg.k > g.n:
            raise InputError(f"{path}: --topk {mode.ncfg.k} exceeds n={g.n}")
        if isinstance(mode, ExtensionKind):
            try:
                mode.check_n(g.n)
            except ValueError as exc:
                raise InputError(f"{path}: {exc}") from None
        start = time.perf_counter()
        f = objective(g, problem)
        pred = feasibility_predicate(g, problem)
        cfg = SolveConfig(steps=args.steps, learning_rate=args.lr, restarts=args.restarts,
                          seed=instance_seed(args.seed, i), mode=mode)
        res = minimize(f, cfg, feasible=pred)
        check = is_clique if problem.variant is Problem.MAX_CLIQUE else is_independent
        entry = {
            "graph": path,
            "n": g.n,
            "edges": g.edge_count,
            "set": mask_elements(res.subset.bits),
            "size": len(res.subset),
            "value": float(res.value),
            "feasible": check(g, res.subset),
        }
        if args.with_oracle:
            best, size = brute_force(g, problem)
            entry["optimum"] = size
            entry["optimum_set"] = mask_elements(best.bits)
            entry["ratio"] = len(res.subset) / size if size else 1.0
        results.append(entry)
        times.append(round((time.perf_counter() - start) * 1000.0, 3))
    ratios = [r["ratio"] for r in results if "ratio" in r]
    aggregate = {"instances": len(results), "all_feasible": all(r["feasible"] for r in results)}
    if args.with_oracle:
        aggregate["ratio"] = _mean_std(ratios)
        aggregate["optimum_hits"] = sum(r["size"] == r["optimum"] for r in results)
    report = _report("solve", args, results, aggregate, times)
    return (EXIT_OK if aggregate["all_feasible"] else EXIT_FAIL), report


def _report(command: str, args, results, aggregate, times) -> dict:
    echo = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "args": echo,
        "seed": args.seed,
        "results": results,
        "aggregate": aggregate,
        "timing": {"instance_ms": times, "total_ms": round(math.fsum(times), 3)},
    }


# ---------------------------------------------------------------- verify

def _lp_kinds(n: int) -> list[ExtensionKind]:
    kinds = [LOVASZ, bounded(2), bounded(max(1, n // 2)), bounded(n), SIMPLEX_SINGLETON]
    if n <= 10:
        kinds.append(MULTILINEAR)
    out = []
    for k in kinds:
        if (k.k or 0) <= n and k not in out:
            out.append(k)
    return out


def _suite_lp(n, trials, seed) -> dict:
    entries = []
    for i, kind in enumerate(_lp_kinds(n)):
        entries.append(lp_feasibility_sweep(kind, n, trials, instance_seed(seed, i)))
    single = lp_feasibility_sweep(SINGLETON, n, trials, instance_seed(seed, 99))
    single["expected_infeasible"] = True
    single["passed"] = single["infeasible_fraction"] >= 0.99
    entries.append(single)
    return {"kinds": entries, "passed": all(e["passed"] for e in entries)}


def _suite_sdp(n, trials, seed) -> dict:
    rng = _rng(seed, 1)
    cfg = NeuralConfig(k=n, reparam="none", normalize_trace=True, tol=1e-13)
    worst_recon = worst_mass = 0.0
    min_slack = math.inf
    for _ in range(trials):
        x = random_psd(n, rng)
        r = sdp_lift_residuals(x, LOVASZ, cfg)
        worst_recon = max(worst_recon, r.reconstruction_residual)
        worst_mass = max(worst_mass, r.mass_residual)
        min_slack = min(min_slack, r.psd_slack)
    return {
        "max_reconstruction_residual": worst_recon,
        "max_mass_residual": worst_mass,
        "min_psd_slack": min_slack,
        "passed": worst_recon <= 1e-9 and worst_mass <= 1e-10,
    }


def _suite_extension(n, trials, seed) -> dict:
    rng = _rng(seed, 2)
    kinds = [LOVASZ, bounded(2), bounded(max(1, n // 2)), bounded(n), SINGLETON, SIMPLEX_SINGLETON]
    if n <= 10:
        kinds.append(MULTILINEAR)
    kinds = [k for k in dict.fromkeys(kinds) if (k.k or 0) <= n]
    worst = {str(k): 0.0 for k in kinds}
    worst["neural-lovasz"] = 0.0
    neural = NeuralConfig.exact(k=1)
    for _ in range(trials):
        f = random_table_oracle(n, rng)
        for k in kinds:
            worst[str(k)] = max(worst[str(k)], check_extension_property(k, f, n))
        worst["neural-lovasz"] = max(worst["neural-lovasz"], check_extension_property(LOVASZ, f, n, neural))
    return {"max_error": worst, "passed": max(worst.values()) <= 1e-10}


def _suite_minima(n, trials, seed) -> dict:
    rng = _rng(seed, 3)
    entries = []
    for i, kind in enumerate(_lp_kinds(n)):
        f = random_table_oracle(n, rng)
        sampled, _ = check_no_bad_minima(kind, f, n, trials, instance_seed(seed, 100 + i))
        # compare against the sets the kind can represent, a tighter bound than min over all sets
        _, applicable = discrete_minimizer(kind, f)
        entries.append({"kind": str(kind), "sampled_min": sampled, "discrete_min": applicable,
                        "gap": sampled - applicable, "passed": sampled >= applicable - 1e-10})
    return {"kinds": entries, "passed": all(e["passed"] for e in entries)}


def _central_difference(fn, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def _tie_free(x: np.ndarray, gap: float = 1e-3) -> bool:
    s = np.sort(np.append(np.ravel(x), [0.0, 1.0]))
    return bool(np.all(np.diff(s) > gap))


def gradient_errors(n: int, trials: int, seed: int, d: int = 3, k: int = 2) -> dict:
    """Worst relative error of analytic / tape gradients against central differences."""
    rng = _rng(seed, 4)
    worst = {"lovasz": 0.0, "multilinear": 0.0, "neural-lovasz": 0.0}
    done = dict.fromkeys(worst, 0)
    ncfg = NeuralConfig(k=min(k, n))
    while min(done.values()) < trials:
        f = random_table_oracle(n, rng)
        x = rng.uniform(0.05, 0.95, n)
        if done["lovasz"] < trials and _tie_free(x):
            fd = _central_difference(lambda y: evaluate(LOVASZ, f, y, check=False), x)
            worst["lovasz"] = max(worst["lovasz"], _rel_err(lovasz_gradient(f, x), fd))
            done["lovasz"] += 1
        if done["multilinear"] < trials:
            fd = _central_difference(lambda y: evaluate(MULTILINEAR, f, y, check=False), x)
            worst["multilinear"] = max(worst["multilinear"], _rel_err(multilinear_gradient(f, x), fd))
            done["multilinear"] += 1
        if done["neural-lovasz"] < trials:
            v = rng.normal(size=(n, d))
            _, g = neural_value_and_grad(f, v, ncfg)
            fd = _central_difference(lambda w: neural_evaluate(f, LOVASZ, w @ w.T, ncfg), v)
            worst["neural-lovasz"] = max(worst["neural-lovasz"], _rel_err(g, fd))
            done["neural-lovasz"] += 1
    return worst


def _suite_gradient(n, trials, seed) -> dict:
    worst = gradient_errors(n, trials, seed)
    return {"max_relative_error": worst, "passed": max(worst.values()) <= 1e-4}


def eigen_cross_check(n: int, trials: int, seed: int) -> dict:
    """Converged power method vs Jacobi eigenvalues, and Jacobi residuals."""
    rng = _rng(seed, 5)
    cfg = NeuralConfig(k=n, reparam="none", normalize_trace=False, tol=1e-13)
    worst_gap = worst_res = 0.0
    for _ in range(trials):
        a = random_psd(n, rng)
        w, v = jacobi_eigen(a)
        worst_res = max(worst_res, float(np.linalg.norm(a @ v - v * w)))
        lam = []
        deflated = a.copy()
        for i in range(n):
            val, vec = power_iteration(deflated, start_vector(n, i), cfg.power_iters, cfg.tol, cfg.max_iters)
            lam.append(val)
            deflated = deflated - val * np.outer(vec, vec)
        worst_gap = max(worst_gap, float(np.max(np.abs(np.sort(lam)[::-1] - w))))
    return {"max_eigenvalue_gap": worst_gap, "max_jacobi_residual": worst_res,
            "passed": worst_gap <= 1e-6 and worst_res <= 1e-9}


SUITES = {
    "lp": _suite_lp,
    "sdp": _suite_sdp,
    "extension": _suite_extension,
    "minima": _suite_minima,
    "gradient": _suite_gradient,
}


def cmd_verify(args) -> tuple[int, dict]:
    if args.n < 1 or args.trials < 1:
        raise InputError("--n and --trials must be positive")
    if args.n > 12 and args.suite in ("extension", "all"):
        raise SizeLimitError("the exhaustive extension suite is limited to n <= 12")
    if args.n > 20:
        raise SizeLimitError("verification suites are limited to n <= 20")
    names = list(SUITES) if args.suite == "all" else [args.suite]
    results, times = {}, []
    for name in names:
        start = time.perf_counter()
        results[name] = SUITES[name](args.n, args.trials, args.seed)
        times.append(round((time.perf_counter() - start) * 1000.0, 3))
    aggregate = {"passed": all(r["passed"] for r in results.values()), "suites": names}
    report = _report("verify", args, results, aggregate, times)
    return (EXIT_OK if aggregate["passed"] else EXIT_FAIL), report


# ---------------------------------------------------------------- closure

def _closure_function(family: str, n: int, rng: np.random.Generator):
    if family == "random":
        return random_table_oracle(n, rng)
    if family == "cut":
        return cut_function(Graph.random(n, 0.5, rng))
    return modular_oracle(rng.standard_normal(n))


def cmd_closure(args) -> tuple[int, dict]:
    n = args.n
    if n < 1 or args.trials < 1:
        raise InputError("--n and --trials must be positive")
    if n > CLOSURE_MAX_N:
        raise SizeLimitError(f"--n {n} exceeds the closure limit {CLOSURE_MAX_N}")
    rng = _rng(args.seed, 6)
    kinds = _lp_kinds(n)
    results, times = [], []
    worst_gap = math.inf
    lovasz_dev = 0.0
    for t in range(args.trials):
        start = time.perf_counter()
        f = _closure_function(args.family, n, rng)
        points = {"box": sample_domain(LOVASZ, n, rng, 1)[0], "simplex": sample_domain(SIMPLEX_SINGLETON, n, rng, 1)[0]}
        closures = {dom: convex_closure(f, x).value for dom, x in points.items()}
        gaps = {}
        for kind in kinds:
            dom = "simplex" if kind.domain == "simplex" else "box"
            gaps[str(kind)] = evaluate(kind, f, points[dom]) - closures[dom]
        worst_gap = min(worst_gap, min(gaps.values()))
        lovasz_dev = max(lovasz_dev, abs(gaps["lovasz"]))
        results.append({"trial": t, "closure": closures, "gaps": gaps})
        times.append(round((time.perf_counter() - start) * 1000.0, 3))
    lower_ok = worst_gap >= -1e-8
    aggregate = {"min_gap": worst_gap, "max_abs_lovasz_gap": lovasz_dev, "lower_bound_holds": lower_ok}
    passed = lower_ok
    if args.family == "cut":
        aggregate["lovasz_equals_closure"] = lovasz_dev <= 1e-7
        passed = passed and lovasz_dev <= 1e-7
    elif args.family == "modular":
        aggregate["lovasz_equals_closure"] = lovasz_dev <= 1e-9
        passed = passed and lovasz_dev <= 1e-9
    aggregate["passed"] = passed
    report = _report("closure", args, results, aggregate, times)
    return (EXIT_OK if passed else EXIT_FAIL), report


# ---------------------------------------------------------------- entry point

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sfe", description="Set function extensions: solvers and verification.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="minimize a graph objective through an extension")
    s.add_argument("--graph", action="append", required=True, help="graph file (JSON or edge list); repeatable")
    s.add_argument("--problem", choices=["maxclique", "mis"], default="maxclique")
    s.add_argument("--extension", default="lovasz", help="lovasz, bounded:K or neural-lovasz")
    s.add_argument("--dim", type=int, default=3, help="factor width d of X = V V^T")
    s.add_argument("--topk", type=int, default=2, help="eigenpairs used by the neural lift")
    s.add_argument("--steps", type=int, default=100)
    s.add_argument("--lr", type=float, default=0.05)
    s.add_argument("--restarts", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--with-oracle", action="store_true", help="add brute-force optima and ratios")
    s.add_argument("--out", help="write the report here instead of stdout")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="run residual checks")
    v.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    v.add_argument("--n", type=int, default=8)
    v.add_argument("--trials", type=int, default=100)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("closure", help="compare extensions with the exact convex closure")
    c.add_argument("--n", type=int, default=8)
    c.add_argument("--trials", type=int, default=20)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--family", choices=["random", "cut", "modular"], default="random")
    c.add_argument("--out")
    c.set_defaults(func=cmd_closure)
    return p


def run(argv: list[str] | None = None) -> tuple[int, dict | None]:
    """Parse and execute; returns ``(exit_code, report)`` and never exits."""
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "seed", 0) < 0 or args.seed >= 1 << 64:
            raise InputError("--seed must be a 64-bit unsigned integer")
        code, report = args.func(args)
    except SizeLimitError as exc:
        print(f"sfe: size limit: {exc}", file=sys.stderr)
        return EXIT_SIZE, None
    except InputError as exc:
        print(f"sfe: {exc}", file=sys.stderr)
        return EXIT_INPUT, None
    text = emit(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return code, report


def main(argv: list[str] | None = None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
