"""Scoring an estimate against the ground-truth model."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidInput, NoEdges
from .linalg import IndexSet, norms
from .network import NetworkModel


@dataclass(frozen=True)
class TrialScore:
    exact_recovery: bool
    sign_consistent: bool
    err_inf: float
    err_fro: float
    err_op2: float
    support_precision: float
    support_recall: float

    def as_dict(self) -> dict:
        return asdict(self)


def _undirected(pairs) -> set[tuple[int, int]]:
    return {(min(i, j), max(i, j)) for i, j in pairs if i != j}


def score(b_hat: NDArray, model: NetworkModel, support_hat: IndexSet) -> TrialScore:
    b_hat = np.asarray(b_hat, dtype=np.float64)
    if b_hat.shape != model.b_star.shape or support_hat.dim != model.p:
        raise InvalidInput("estimate and model dimensions differ")
    true = _undirected(model.support_E.pairs)
    est = _undirected(support_hat.pairs)
    hits = len(true & est)
    exact = true == est
    sign_ok = exact and all(
        np.sign(b_hat[i, j]) == np.sign(model.b_star[i, j])
        and np.sign(b_hat[j, i]) == np.sign(model.b_star[j, i])
        for i, j in true
    )
    err = norms(b_hat - model.b_star)
    return TrialScore(
        exact_recovery=exact,
        sign_consistent=bool(sign_ok),
        err_inf=err.elem_max,
        err_fro=err.fro,
        err_op2=err.op2,
        support_precision=hits / len(est) if est else 1.0,
        support_recall=hits / len(true) if true else 1.0,
    )


def bmin(model: NetworkModel) -> float:
    """Smallest true off-diagonal magnitude."""
    if model.s_offdiag == 0:
        raise NoEdges("model has no off-diagonal edges")
    B = model.b_star
    return float(min(abs(B[i, j]) for i, j in model.offdiag_edges()))
