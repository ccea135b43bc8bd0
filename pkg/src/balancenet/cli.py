"""Command-line entry point: generate, sample, estimate, diagnose, experiment.

A JSON config file is the source of truth; command-line flags override
individual leaves. Exit codes: 0 success, 1 usage or IO error, 2 solver
non-convergence, 3 unsupported problem size.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .diagnostics import lemma4_radius, pdw_dual_check, theorem1_constants
from .errors import BalanceNetError, UnsupportedSize
from .harness import (
    ExperimentSpec,
    ModelSpec,
    default_n_grid,
    geometric_n_grid,
    run_experiment,
    write_aggregates_json,
    write_results_csv,
)
from .linalg import elem_max, sym_inv, sym_sqrt
from .metrics import score
from .network import write_edge_list
from .sampling import SEED_MASK, SamplingSpec, draw_samples, noise_deviation, read_samples_csv, write_samples_csv
from .solver import SolverConfig, default_lambda, solve

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_SIZE = 0, 1, 2, 3

_MODEL = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": ["chain", "grid", "edge_list"]},
        "p": {"type": ["integer", "null"], "minimum": 1},
        "rows": {"type": ["integer", "null"], "minimum": 1},
        "cols": {"type": ["integer", "null"], "minimum": 1},
        "edge_weight": {"type": "number"},
        "diag_margin": {"type": "number", "exclusiveMinimum": 0},
        "edge_list": {"type": ["string", "null"]},
        "laplacian": {"type": "boolean"},
        "reduce_node": {"type": ["integer", "null"], "minimum": 0},
        "sigma_mode": {"enum": ["identity", "diag_random"]},
        "sigma_seed": {"type": "integer", "minimum": 0},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer", "minimum": 0, "maximum": SEED_MASK},
        "threads": {"type": "integer", "minimum": 1},
        "model": _MODEL,
        "sampling": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "distribution": {"enum": ["gaussian", "student_t"]},
                "dof": {"type": "number", "exclusiveMinimum": 4},
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lambda": {"type": ["number", "null"], "minimum": 0},
                "lambda_c": {"type": "number", "exclusiveMinimum": 0},
                "max_iters": {"type": "integer", "minimum": 1},
                "kkt_tol": {"type": "number", "minimum": 0},
                "rel_obj_tol": {"type": "number", "minimum": 0},
                "unknown_covariance": {"type": "boolean"},
            },
        },
        "diagnostics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "tau_exponent": {"type": "number", "exclusiveMinimum": 2},
            },
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_grid": {
                    "oneOf": [
                        {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                        {"const": "default"},
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["lo", "hi", "points"],
                            "properties": {
                                "lo": {"type": "integer", "minimum": 1},
                                "hi": {"type": "integer", "minimum": 1},
                                "points": {"type": "integer", "minimum": 1},
                            },
                        },
                    ]
                },
                "trials": {"type": "integer", "minimum": 1},
                "estimators": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"enum": ["L1MLE", "GLASSO_SR", "GLASSO_2HR"]},
                },
                "lambda_constants": {
                    "type": "object",
                    "additionalProperties": False,
                    "patternProperties": {
                        "^(L1MLE|GLASSO_SR|GLASSO_2HR)$": {
                            "oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "pilot"}]
                        }
                    },
                },
                "pilot_candidates": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "number", "exclusiveMinimum": 0},
                },
                "tau": {"type": "number", "exclusiveMinimum": 0},
                "timing": {"type": "boolean"},
                "figures": {"type": "boolean"},
            },
        },
    },
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def bundled_configs() -> list[str]:
    root = resources.files("balancenet") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_config(ref: str | None) -> dict:
    """Read a config from a file path or the name of a bundled config."""
    if ref is None:
        return {}
    path = Path(ref)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    else:
        name = ref[:-5] if ref.endswith(".json") else ref
        if name not in bundled_configs():
            raise UsageError(f"config not found: {ref}")
        text = (resources.files("balancenet") / "configs" / f"{name}.json").read_text(encoding="utf-8")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{ref}: invalid JSON ({exc})") from None
    validate_config(cfg, ref)
    return cfg


def validate_config(cfg: dict, where: str = "config") -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise UsageError(f"{where}: {loc}: {exc.message}") from None


def _set(cfg: dict, section: str | None, key: str, value) -> None:
    if value is None:
        return
    target = cfg if section is None else cfg.setdefault(section, {})
    target[key] = value


# ---------------------------------------------------------------------------
# argument wiring


def _add_global(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file or bundled config name")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    p.add_argument("--threads", type=int, help="worker processes for experiment sweeps")


def _add_model(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--kind", choices=["chain", "grid", "edge_list"])
    g.add_argument("--p", type=int)
    g.add_argument("--rows", type=int)
    g.add_argument("--cols", type=int)
    g.add_argument("--edge-weight", type=float)
    g.add_argument("--margin", type=float, help="diagonal slack added to the absolute row sum")
    g.add_argument("--edge-list", help="edge-list file or bundled name (ieee33, ieee33-loops)")
    g.add_argument("--laplacian", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--reduce", type=int, dest="reduce_node", help="node removed from the Laplacian")
    g.add_argument("--sigma-mode", choices=["identity", "diag_random"])
    g.add_argument("--sigma-seed", type=int)


def _add_sampling(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("sampling")
    g.add_argument("--n", type=int, help="number of samples")
    g.add_argument("--distribution", choices=["gaussian", "student_t"])
    g.add_argument("--dof", type=float)


def _add_solver(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--lambda", type=float, dest="lam", help="regularization weight (overrides --lambda-c)")
    g.add_argument("--lambda-c", type=float, help="scale c in lambda = c sqrt(log p / n) (default 1)")
    g.add_argument("--max-iters", type=int)
    g.add_argument("--kkt-tol", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="balancenet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="write B*, Sigma_X and the true edge list")
    _add_global(gen)
    _add_model(gen)

    smp = sub.add_parser("sample", help="draw potentials Y and write them as CSV")
    _add_global(smp)
    _add_model(smp)
    _add_sampling(smp)

    est = sub.add_parser("estimate", help="fit the l1-penalized balance-matrix estimator")
    _add_global(est)
    _add_model(est)
    _add_sampling(est)
    _add_solver(est)
    est.add_argument("--samples", help="CSV of samples (rows are observations)")
    est.add_argument("--sigma-x", help="CSV matrix for the injection covariance")
    est.add_argument("--unknown-cov", action="store_true", default=None,
                     help="treat Sigma_X as unknown and use the identity")

    dia = sub.add_parser("diagnose", help="check assumptions and report recovery constants")
    _add_global(dia)
    _add_model(dia)
    _add_sampling(dia)
    _add_solver(dia)
    dia.add_argument("--tau", type=float, dest="tau_exponent", help="probability exponent (> 2)")
    dia.add_argument("--sigma", type=float, help="sub-Gaussian parameter")

    exp = sub.add_parser("experiment", help="run a Monte-Carlo sweep over sample sizes")
    _add_global(exp)
    _add_model(exp)
    exp.add_argument("--distribution", choices=["gaussian", "student_t"])
    exp.add_argument("--dof", type=float)
    exp.add_argument("--trials", type=int)
    exp.add_argument("--n-grid", type=lambda s: [int(x) for x in s.split(",")], help="comma-separated sizes")
    exp.add_argument("--timing", action=argparse.BooleanOptionalAction, default=None,
                     help="record per-trial wall time (makes the CSV run-dependent)")
    exp.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None)
    return parser


def merged_config(args: argparse.Namespace) -> dict:
    cfg = copy.deepcopy(load_config(args.config))
    _set(cfg, None, "seed", args.seed)
    _set(cfg, None, "threads", args.threads)
    for flag, key in [("kind", "kind"), ("p", "p"), ("rows", "rows"), ("cols", "cols"),
                      ("edge_weight", "edge_weight"), ("margin", "diag_margin"),
                      ("edge_list", "edge_list"), ("laplacian", "laplacian"),
                      ("reduce_node", "reduce_node"), ("sigma_mode", "sigma_mode"),
                      ("sigma_seed", "sigma_seed")]:
        _set(cfg, "model", key, getattr(args, flag, None))
    for flag in ("n", "distribution", "dof"):
        _set(cfg, "sampling", flag, getattr(args, flag, None))
    _set(cfg, "solver", "lambda", getattr(args, "lam", None))
    _set(cfg, "solver", "lambda_c", getattr(args, "lambda_c", None))
    _set(cfg, "solver", "max_iters", getattr(args, "max_iters", None))
    _set(cfg, "solver", "kkt_tol", getattr(args, "kkt_tol", None))
    _set(cfg, "solver", "unknown_covariance", getattr(args, "unknown_cov", None))
    _set(cfg, "diagnostics", "tau_exponent", getattr(args, "tau_exponent", None))
    _set(cfg, "diagnostics", "sigma", getattr(args, "sigma", None))
    if args.command == "experiment":
        _set(cfg, "experiment", "trials", args.trials)
        _set(cfg, "experiment", "n_grid", args.n_grid)
        _set(cfg, "experiment", "timing", args.timing)
        _set(cfg, "experiment", "figures", args.figures)
        _set(cfg, "sampling", "distribution", args.distribution)
        _set(cfg, "sampling", "dof", args.dof)
    validate_config(cfg, "effective config")
    return cfg


def _model_spec(cfg: dict) -> ModelSpec:
    m = cfg.get("model")
    if not m:
        raise UsageError("no model given (use --kind or a config with a 'model' section)")
    m = dict(m)
    if "kind" not in m:
        m["kind"] = "edge_list" if m.get("edge_list") else "chain"
    return ModelSpec(**m)


def _seed(cfg: dict) -> int:
    return int(cfg.get("seed", 0))


def _solver_config(cfg: dict, p: int, n: int) -> SolverConfig:
    s = cfg.get("solver", {})
    lam = s.get("lambda")
    if lam is None:
        lam = default_lambda(p, n, s.get("lambda_c", 1.0)) if p >= 2 else 0.0
    kwargs = {k: s[k] for k in ("max_iters", "kkt_tol", "rel_obj_tol") if k in s}
    return SolverConfig(lam=lam, **kwargs)


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from None
    return out


def _save_matrix(path: Path, A: np.ndarray) -> None:
    np.savetxt(path, A, delimiter=",", fmt="%.17g")


def _load_matrix(path: str) -> np.ndarray:
    if not Path(path).is_file():
        raise UsageError(f"file not found: {path}")
    return np.loadtxt(path, delimiter=",", ndmin=2)


def _undirected(pairs) -> list[tuple[int, int]]:
    return sorted((i, j) for i, j in pairs if i < j)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args, cfg) -> int:
    model = _model_spec(cfg).build()
    out = _out_dir(args)
    _save_matrix(out / "b_star.csv", model.b_star)
    _save_matrix(out / "sigma_x.csv", model.sigma_x)
    write_edge_list(out / "support.edges", _undirected(model.offdiag_edges()), f"p={model.p}")
    print(f"wrote model with p={model.p}, {model.s_offdiag // 2} edges, d={model.degree_d} to {out}")
    return EXIT_OK


def _sampling_spec(cfg: dict) -> SamplingSpec:
    s = cfg.get("sampling", {})
    if "n" not in s:
        raise UsageError("sample size required (--n)")
    return SamplingSpec(s["n"], s.get("distribution", "gaussian"), _seed(cfg), s.get("dof", 9.0))


def cmd_sample(args, cfg) -> int:
    model = _model_spec(cfg).build()
    samples = draw_samples(model, _sampling_spec(cfg))
    out = _out_dir(args)
    write_samples_csv(out / "samples.csv", samples)
    print(f"wrote {samples.n} samples of dimension {model.p} to {out / 'samples.csv'}")
    return EXIT_OK


def cmd_estimate(args, cfg) -> int:
    model = _model_spec(cfg).build() if cfg.get("model") else None
    if args.samples:
        if not Path(args.samples).is_file():
            raise UsageError(f"file not found: {args.samples}")
        samples = read_samples_csv(args.samples)
    elif model is not None:
        samples = draw_samples(model, _sampling_spec(cfg))
    else:
        raise UsageError("provide --samples or a model with --n")
    p = samples.s_cov.shape[0]
    if model is not None and model.p != p:
        raise UsageError(f"samples have dimension {p} but the model has p={model.p}")
    if cfg.get("solver", {}).get("unknown_covariance"):
        d_mat = np.eye(p)
    elif args.sigma_x:
        d_mat = sym_sqrt(sym_inv(_load_matrix(args.sigma_x)))
    elif model is not None:
        d_mat = model.d_mat
    else:
        d_mat = np.eye(p)
    config = _solver_config(cfg, p, samples.n)
    res = solve(samples.s_cov, d_mat, config)
    out = _out_dir(args)
    _save_matrix(out / "b_hat.csv", res.b_hat)
    write_edge_list(out / "edges.edges", _undirected(res.support_hat.offdiag()), f"p={p}")
    summary = {
        "lambda": config.lam,
        "n": samples.n,
        "p": p,
        "iterations": res.iterations,
        "kkt_residual": res.kkt_residual,
        "objective": res.objective,
        "converged": res.converged,
        "partial": not res.converged,
        "edges": len(res.support_hat.offdiag()) // 2,
    }
    if model is not None:
        summary["score"] = score(res.b_hat, model, res.support_hat).as_dict()
    _write_json(out / "summary.json", summary)
    print(json.dumps(summary, sort_keys=True))
    if not res.converged:
        print("solver did not converge; outputs are flagged partial", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_diagnose(args, cfg) -> int:
    model = _model_spec(cfg).build()
    d = cfg.get("diagnostics", {})
    report = theorem1_constants(model, d.get("sigma", 1.0), d.get("tau_exponent", 2.5))
    payload = report.to_dict()
    if "n" in cfg.get("sampling", {}):
        samples = draw_samples(model, _sampling_spec(cfg))
        lam = _solver_config(cfg, model.p, samples.n).lam
        w_inf = elem_max(noise_deviation(model, samples))
        radius = lemma4_radius(model, w_inf, lam)
        payload["lemma4_radius"] = radius.radius
        payload["lemma4_bound"] = radius.bound
        payload["lemma4_hypothesis_holds"] = radius.hypothesis_holds
        payload["w_infnorm"] = w_inf
        payload["lambda"] = lam
        if lam > 0:
            dual = pdw_dual_check(model, samples, lam)
            payload["pdw_max_dual_ec"] = dual.max_dual_ec
            payload["pdw_strict"] = dual.strict
            payload["restricted_err_inf"] = elem_max(dual.restricted.b_hat - model.b_star)
    out = _out_dir(args)
    _write_json(out / "diagnostics.json", payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK


def experiment_spec(cfg: dict) -> ExperimentSpec:
    ms = _model_spec(cfg)
    e = cfg.get("experiment", {})
    s = cfg.get("sampling", {})
    grid = e.get("n_grid", "default")
    if grid == "default":
        model = ms.build()
        grid = default_n_grid(model.degree_d, model.p)
    elif isinstance(grid, dict):
        grid = geometric_n_grid(grid["lo"], grid["hi"], grid["points"])
    kwargs = {k: e[k] for k in ("trials", "estimators", "lambda_constants", "pilot_candidates", "tau", "timing")
              if k in e}
    return ExperimentSpec(
        model=ms,
        n_grid=tuple(grid),
        distribution=s.get("distribution", "gaussian"),
        dof=s.get("dof", 9.0),
        base_seed=_seed(cfg),
        threads=cfg.get("threads", 1),
        **kwargs,
    )


def cmd_experiment(args, cfg) -> int:
    spec = experiment_spec(cfg)
    result = run_experiment(spec)
    out = _out_dir(args)
    write_results_csv(out / "results.csv", result)
    write_aggregates_json(out / "aggregates.json", result)
    written = [out / "results.csv", out / "aggregates.json"]
    if cfg.get("experiment", {}).get("figures", True):
        from .plotting import render_report
        written += render_report(result, out)
    for agg in result.aggregates:
        print(f"{agg['estimator']:<11} n={agg['n']:<7} success={agg['success_prob']:.2f} "
              f"err_inf={agg['mean_err_inf']:.4g}")
    print("lambda constants: " + ", ".join(f"{k}={v:g}" for k, v in result.lambda_constants.items()))
    print("wrote " + ", ".join(str(p) for p in written))
    unconverged = sum(not r["converged"] for r in result.rows)
    if unconverged:
        print(f"{unconverged} trials did not converge (recorded in results.csv)", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "sample": cmd_sample,
    "estimate": cmd_estimate,
    "diagnose": cmd_diagnose,
    "experiment": cmd_experiment,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = merged_config(args)
        return COMMANDS[args.command](args, cfg)
    except UnsupportedSize as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except (UsageError, BalanceNetError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
