"""Figures for experiment results, rendered off-screen."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import ExperimentResult  # noqa: E402

_MARKERS = {"L1MLE": "o", "GLASSO_SR": "s", "GLASSO_2HR": "^"}


def _series(result: ExperimentResult, key: str) -> dict[str, tuple[list[int], list[float]]]:
    out: dict[str, tuple[list[int], list[float]]] = {}
    for agg in result.aggregates:
        ns, vals = out.setdefault(agg["estimator"], ([], []))
        ns.append(agg["n"])
        vals.append(agg[key])
    return out


def plot_success(result: ExperimentResult, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for est, (ns, probs) in _series(result, "success_prob").items():
        ax.plot(ns, probs, marker=_MARKERS.get(est, "x"), label=est)
    ax.set_xscale("log")
    ax.set_ylim(-0.03, 1.03)
    ax.set_xlabel("sample size n")
    ax.set_ylabel("exact recovery probability")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return Path(path)


def plot_errors(result: ExperimentResult, path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for est, (ns, errs) in _series(result, "mean_err_inf").items():
        ax.loglog(ns, errs, marker=_MARKERS.get(est, "x"), label=f"{est} max-abs")
    for est, (ns, errs) in _series(result, "mean_err_fro").items():
        ax.loglog(ns, errs, marker=_MARKERS.get(est, "x"), linestyle="--", label=f"{est} Frobenius")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("mean estimation error")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return Path(path)


def render_report(result: ExperimentResult, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    return [
        plot_success(result, out_dir / "success.png"),
        plot_errors(result, out_dir / "errors.png"),
    ]
