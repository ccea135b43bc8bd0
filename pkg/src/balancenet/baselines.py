"""GLASSO-based competitors: square-root (GLASSO+SR) and two-hop refinement (GLASSO+2HR)."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidInput
from .linalg import IndexSet, as_sym, sym_sqrt
from .solver import INIT_CLAMP, SmoothPart, SolverConfig, SolverResult, proximal_solve


@dataclass(frozen=True)
class BaselineConfig:
    glasso_lambda: float
    threshold_tau: float = 1e-2
    support_eps: float = 1e-8

    def __post_init__(self):
        if min(self.glasso_lambda, self.threshold_tau, self.support_eps) < 0:
            raise InvalidInput("baseline parameters must be non-negative")


class GlassoSmooth(SmoothPart):
    """``Tr(S Theta) - log det Theta``."""

    def __init__(self, S: NDArray):
        self.S = S

    def value(self, T, fac):
        return float(np.sum(self.S * T)) - fac.logdet

    def gradient(self, T, fac):
        return self.S - fac.inverse()

    def delta(self, T, fac, step):
        ld = fac.logdet_delta(step)
        if ld is None:
            return None
        return float(np.sum(self.S * step)) - ld

    def bilinear(self, W, a, b, c, d):
        return W[d, a] * W[b, c]


def glasso(S: ArrayLike, lam: float, config: SolverConfig | None = None) -> SolverResult:
    """Graphical lasso via the shared proximal-gradient loop.

    ``lam`` overrides ``config.lam``. The start is ``diag(1 / S_ii)``.
    """
    S = as_sym(S, "S")
    config = SolverConfig(lam=lam) if config is None else replace(config, lam=lam)
    if config.b_init is None:
        s = np.diag(S)
        with np.errstate(divide="ignore"):
            start = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), INIT_CLAMP[1])
        theta0 = np.diag(np.clip(start, *INIT_CLAMP))
    else:
        theta0 = as_sym(config.b_init, "b_init")
    return proximal_solve(GlassoSmooth(S), theta0, config)


def _with_diagonal(mask: NDArray) -> IndexSet:
    np.fill_diagonal(mask, True)
    return IndexSet.from_mask(mask)


def glasso_sr_support(theta_hat: ArrayLike, tau: float) -> IndexSet:
    """Off-diagonal pairs where the PD square root of ``theta_hat`` exceeds ``tau`` in magnitude."""
    root = sym_sqrt(theta_hat)
    return _with_diagonal(np.abs(root) > tau)


def glasso_2hr_support(theta_hat: ArrayLike, tau: float) -> IndexSet:
    """Off-diagonal pairs with ``theta_hat[i, j] <= -tau``.

    Assumes Laplacian-signed models, where true edges carry negative weights
    and two-hop neighbours pick up positive entries in ``B*^2``.
    """
    if not tau > 0:
        raise InvalidInput("tau must be positive")
    theta_hat = as_sym(theta_hat, "theta_hat")
    return _with_diagonal(theta_hat <= -tau)
