"""Monte-Carlo sweeps over sample size: draw, estimate, score, aggregate, persist."""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import glasso, glasso_2hr_support, glasso_sr_support
from .errors import InsufficientData, InvalidInput
from .linalg import sym_inv, sym_sqrt
from .metrics import score
from .network import (
    NetworkModel,
    bundled_edge_list,
    build_chain,
    build_from_edge_list,
    build_grid,
    graph_spec_from_edges,
    random_diagonal_covariance,
    read_edge_list,
    set_injection_covariance,
)
from .sampling import SEED_MASK, Distribution, SamplingSpec, draw_samples
from .solver import SolverConfig, default_lambda, solve

CSV_HEADER = [
    "estimator", "n", "trial", "seed", "exact_recovery", "sign_consistent",
    "err_inf", "err_fro", "err_op2", "precision", "recall",
    "iterations", "converged", "wall_ms",
]
PILOT_TRIALS = 20
DEFAULT_PILOT_CANDIDATES = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)


class Estimator(str, enum.Enum):
    L1MLE = "L1MLE"
    GLASSO_SR = "GLASSO_SR"
    GLASSO_2HR = "GLASSO_2HR"


@dataclass(frozen=True)
class ModelSpec:
    """Serializable recipe for a :class:`NetworkModel`."""

    kind: str = "chain"
    p: int | None = None
    rows: int | None = None
    cols: int | None = None
    edge_weight: float = 1.0
    diag_margin: float = 1.0
    edge_list: str | None = None  # file path or bundled name
    laplacian: bool = True
    reduce_node: int | None = None
    sigma_mode: str = "identity"  # or "diag_random"
    sigma_seed: int = 0

    def build(self) -> NetworkModel:
        if self.kind == "chain":
            if self.p is None:
                raise InvalidInput("chain model needs p")
            model = build_chain(self.p, self.edge_weight, self.diag_margin)
        elif self.kind == "grid":
            if self.rows is None or self.cols is None:
                raise InvalidInput("grid model needs rows and cols")
            model = build_grid(self.rows, self.cols, self.edge_weight, self.diag_margin)
        elif self.kind == "edge_list":
            if not self.edge_list:
                raise InvalidInput("edge_list model needs an edge list")
            if Path(self.edge_list).is_file():
                edges = read_edge_list(self.edge_list)
            else:
                edges = bundled_edge_list(self.edge_list)
            spec = graph_spec_from_edges(edges, self.p)
            model = build_from_edge_list(spec, self.laplacian, self.reduce_node, self.diag_margin)
        else:
            raise InvalidInput(f"unknown model kind {self.kind!r}")
        if self.sigma_mode == "diag_random":
            model = set_injection_covariance(model, random_diagonal_covariance(model.p, self.sigma_seed))
        elif self.sigma_mode != "identity":
            raise InvalidInput(f"unknown sigma_mode {self.sigma_mode!r}")
        return model


@dataclass(frozen=True)
class ExperimentSpec:
    model: ModelSpec
    n_grid: tuple[int, ...]
    trials: int = 100
    estimators: tuple[Estimator, ...] = (Estimator.L1MLE,)
    lambda_constants: dict = field(default_factory=dict)  # estimator -> float | "pilot"
    pilot_candidates: tuple[float, ...] = DEFAULT_PILOT_CANDIDATES
    distribution: Distribution = Distribution.GAUSSIAN
    dof: float = 9.0
    base_seed: int = 0
    tau: float = 1e-2
    threads: int = 1
    timing: bool = False

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "estimators", tuple(Estimator(e) for e in self.estimators))
        object.__setattr__(self, "distribution", Distribution(self.distribution))
        object.__setattr__(self, "pilot_candidates", tuple(float(c) for c in self.pilot_candidates))
        if not self.n_grid or any(n < 1 for n in self.n_grid):
            raise InvalidInput("n_grid must hold positive sample sizes")
        if list(self.n_grid) != sorted(set(self.n_grid)):
            raise InvalidInput("n_grid must be strictly ascending")
        if self.trials < 1:
            raise InvalidInput("trials must be >= 1")
        if not self.estimators:
            raise InvalidInput("at least one estimator is required")
        for key, val in self.lambda_constants.items():
            Estimator(key)
            if val != "pilot" and not (isinstance(val, (int, float)) and val > 0):
                raise InvalidInput(f"lambda constant for {key} must be positive or 'pilot'")

    def lambda_constant(self, est: Estimator):
        return self.lambda_constants.get(est.value, "pilot")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimators"] = [e.value for e in self.estimators]
        d["distribution"] = self.distribution.value
        d["n_grid"] = list(self.n_grid)
        d["pilot_candidates"] = list(self.pilot_candidates)
        return d


@dataclass
class ExperimentResult:
    rows: list[dict]
    aggregates: list[dict]
    lambda_constants: dict[str, float]
    spec: ExperimentSpec

    def success_curve(self, estimator: Estimator | str) -> tuple[list[int], list[float]]:
        est = Estimator(estimator).value
        agg = [a for a in self.aggregates if a["estimator"] == est]
        return [a["n"] for a in agg], [a["success_prob"] for a in agg]

    def threshold_n(self, estimator: Estimator | str, level: float) -> float:
        """Smallest grid ``n`` whose success probability reaches ``level`` (inf if none)."""
        for n, prob in zip(*self.success_curve(estimator)):
            if prob >= level:
                return n
        return math.inf


def default_n_grid(d: int, p: int, points: int = 8) -> tuple[int, ...]:
    """Geometric grid from ``6.25 d^2 log p`` to ``40 d^2 log p``."""
    scale = d * d * math.log(p)
    grid = np.geomspace(0.25 * 25 * scale, 40 * scale, points)
    return tuple(sorted({int(round(n)) for n in grid}))


def geometric_n_grid(lo: int, hi: int, points: int) -> tuple[int, ...]:
    return tuple(sorted({int(round(n)) for n in np.geomspace(lo, hi, points)}))


def trial_seed(base_seed: int, n: int, trial: int) -> int:
    digest = hashlib.blake2b(f"{n}:{trial}".encode(), digest_size=8).digest()
    return (base_seed + int.from_bytes(digest, "little")) & SEED_MASK


def _glasso_estimate(theta: np.ndarray, d_mat: np.ndarray) -> np.ndarray:
    """Estimate of B* implied by a precision estimate: ``D^-1 (D Theta D)^(1/2) D^-1``."""
    d_inv = sym_inv(d_mat)
    return d_inv @ sym_sqrt(d_mat @ theta @ d_mat) @ d_inv


def _run_cell(args) -> list[dict]:
    model, spec, n, trial, constants = args
    seed = trial_seed(spec.base_seed, n, trial)
    samples = draw_samples(model, SamplingSpec(n, spec.distribution, seed, spec.dof))
    rows = []
    glasso_cache: dict[float, tuple] = {}
    for est in spec.estimators:
        lam = default_lambda(model.p, n, constants[est.value])
        start = time.perf_counter()
        if est is Estimator.L1MLE:
            res = solve(samples.s_cov, model.d_mat, SolverConfig(lam=lam))
            b_hat, support = res.b_hat, res.support_hat
        else:
            if lam not in glasso_cache:
                g = glasso(samples.s_cov, lam)
                glasso_cache[lam] = (g, _glasso_estimate(g.b_hat, model.d_mat))
            res, b_hat = glasso_cache[lam]
            rule = glasso_sr_support if est is Estimator.GLASSO_SR else glasso_2hr_support
            support = rule(res.b_hat, spec.tau)
        wall_ms = (time.perf_counter() - start) * 1e3
        sc = score(b_hat, model, support)
        rows.append({
            "estimator": est.value,
            "n": n,
            "trial": trial,
            "seed": seed,
            "exact_recovery": sc.exact_recovery,
            "sign_consistent": sc.sign_consistent,
            "err_inf": sc.err_inf,
            "err_fro": sc.err_fro,
            "err_op2": sc.err_op2,
            "precision": sc.support_precision,
            "recall": sc.support_recall,
            "iterations": res.iterations,
            "converged": res.converged,
            "wall_ms": wall_ms if spec.timing else None,
        })
    return rows


def _run_rows(model: NetworkModel, spec: ExperimentSpec, constants: dict) -> list[dict]:
    jobs = [(model, spec, n, trial, constants) for n in spec.n_grid for trial in range(spec.trials)]
    if spec.threads > 1:
        with ProcessPoolExecutor(max_workers=spec.threads) as pool:
            chunks = list(pool.map(_run_cell, jobs, chunksize=max(1, len(jobs) // (8 * spec.threads))))
    else:
        chunks = [_run_cell(job) for job in jobs]
    order = {e.value: k for k, e in enumerate(spec.estimators)}
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (order[r["estimator"]], r["n"], r["trial"]))
    return rows


def aggregate(rows: Sequence[dict]) -> list[dict]:
    groups: dict[tuple[str, int], list[dict]] = {}
    for row in rows:
        groups.setdefault((row["estimator"], row["n"]), []).append(row)
    out = []
    for (est, n), grp in groups.items():
        out.append({
            "estimator": est,
            "n": n,
            "trials": len(grp),
            "success_prob": float(np.mean([r["exact_recovery"] for r in grp])),
            "sign_prob": float(np.mean([r["sign_consistent"] for r in grp])),
            "mean_err_inf": float(np.mean([r["err_inf"] for r in grp])),
            "mean_err_fro": float(np.mean([r["err_fro"] for r in grp])),
            "mean_err_op2": float(np.mean([r["err_op2"] for r in grp])),
            "mean_precision": float(np.mean([r["precision"] for r in grp])),
            "mean_recall": float(np.mean([r["recall"] for r in grp])),
            "converged_frac": float(np.mean([r["converged"] for r in grp])),
        })
    return out


def middle_third(n_grid: Sequence[int]) -> tuple[int, ...]:
    k = len(n_grid) // 3
    return tuple(n_grid[k: len(n_grid) - k])


def pilot_tune_lambda(spec: ExperimentSpec, estimator: Estimator | str, candidate_cs: Sequence[float]) -> float:
    """Pick the scale constant with the best exact-recovery rate on a reduced sweep.

    The sweep uses ``min(20, trials)`` trials on the middle third of
    ``n_grid``; ties go to the smaller constant.
    """
    if not candidate_cs:
        raise InvalidInput("candidate_cs must be non-empty")
    est = Estimator(estimator)
    cands = sorted(float(c) for c in candidate_cs)
    if len(cands) == 1:
        return cands[0]
    model = spec.model.build()
    reduced = replace(
        spec,
        n_grid=middle_third(spec.n_grid),
        trials=min(PILOT_TRIALS, spec.trials),
        estimators=(est,),
    )
    best_c, best_rate = cands[0], -1.0
    for c in cands:
        rows = _run_rows(model, reduced, {est.value: c})
        rate = float(np.mean([r["exact_recovery"] for r in rows]))
        if rate > best_rate:
            best_c, best_rate = c, rate
    return best_c


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    model = spec.model.build()
    constants = {}
    for est in spec.estimators:
        c = spec.lambda_constant(est)
        constants[est.value] = (
            pilot_tune_lambda(spec, est, spec.pilot_candidates) if c == "pilot" else float(c)
        )
    rows = _run_rows(model, spec, constants)
    return ExperimentResult(rows=rows, aggregates=aggregate(rows), lambda_constants=constants, spec=spec)


@dataclass(frozen=True)
class RateFit:
    slope: float
    r2: float


def rate_check(results: ExperimentResult | Sequence[dict], quantity: str = "err_inf",
               estimator: Estimator | str = Estimator.L1MLE) -> RateFit:
    """Least-squares slope of log(mean error) against log(n) over converged trials."""
    key = {"errinf": "err_inf", "err_inf": "err_inf", "errfro": "err_fro", "err_fro": "err_fro"}.get(
        quantity.lower())
    if key is None:
        raise InvalidInput(f"unsupported quantity {quantity!r}")
    rows = results.rows if isinstance(results, ExperimentResult) else results
    est = Estimator(estimator).value
    by_n: dict[int, list[float]] = {}
    for r in rows:
        if r["estimator"] == est and r["converged"]:
            by_n.setdefault(int(r["n"]), []).append(float(r[key]))
    if len(by_n) < 3:
        raise InsufficientData("need at least three distinct n with converged trials")
    ns = np.array(sorted(by_n), dtype=float)
    errs = np.array([np.mean(by_n[int(n)]) for n in ns])
    x, y = np.log(ns), np.log(errs)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), r2)


# ---------------------------------------------------------------------------
# persistence


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_results_csv(path: str | Path, result: ExperimentResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in result.rows:
            writer.writerow([_fmt(row[k]) for k in CSV_HEADER])


def read_results_csv(path: str | Path) -> list[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append({
                "estimator": rec["estimator"],
                "n": int(rec["n"]),
                "trial": int(rec["trial"]),
                "seed": int(rec["seed"]),
                "exact_recovery": rec["exact_recovery"] == "true",
                "sign_consistent": rec["sign_consistent"] == "true",
                "err_inf": float(rec["err_inf"]),
                "err_fro": float(rec["err_fro"]),
                "err_op2": float(rec["err_op2"]),
                "precision": float(rec["precision"]),
                "recall": float(rec["recall"]),
                "iterations": int(rec["iterations"]),
                "converged": rec["converged"] == "true",
                "wall_ms": float(rec["wall_ms"]) if rec["wall_ms"] else None,
            })
    return rows


def write_aggregates_json(path: str | Path, result: ExperimentResult) -> None:
    payload = {
        "spec": result.spec.to_dict(),
        "lambda_constants": result.lambda_constants,
        "aggregates": result.aggregates,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
