"""Assumption checks, recovery constants, and the primal-dual witness construction."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import InvalidInput, UnsupportedSize
from .linalg import elem_max, kron_submatrix_infnorm_product, row_sum_norm, sym_inv
from .network import NetworkModel
from .sampling import SampleSet
from .solver import SolverConfig, SolverResult, solve

DIAG_LIMIT = 64
DEFAULT_TAU = 2.5


def _check_size(model: NetworkModel, limit: int = DIAG_LIMIT) -> None:
    if model.p > limit:
        raise UnsupportedSize(f"diagnostics are capped at p = {limit} (got p = {model.p})")


def check_incoherence(model: NetworkModel, limit: int = DIAG_LIMIT) -> float:
    """``alpha = 1 - |||Gamma[Ec, E] inv(Gamma[E, E])|||_inf`` with ``Gamma = inv(B*) kron inv(B*)``."""
    _check_size(model, limit)
    b_inv = sym_inv(model.b_star)
    return 1.0 - kron_submatrix_infnorm_product(b_inv, model.support_E, model.support_E.complement())


@dataclass(frozen=True)
class RegularityCheck:
    lhs: float
    rhs: float
    holds: bool


def check_hessian_regularity(model: NetworkModel, limit: int = DIAG_LIMIT) -> RegularityCheck:
    _check_size(model, limit)
    lhs = row_sum_norm(model.b_star) ** 2
    d2 = model.d_mat @ model.d_mat
    rhs = 1.0 / (4.0 * model.degree_d * elem_max(model.sigma_star) * row_sum_norm(d2))
    return RegularityCheck(lhs, rhs, lhs <= rhs)


@dataclass(frozen=True)
class NuConstants:
    gamma_inv: float
    d2: float
    b: float
    b_inv: float


def nu_constants(model: NetworkModel) -> NuConstants:
    return NuConstants(
        gamma_inv=row_sum_norm(model.b_star) ** 2,
        d2=row_sum_norm(model.d_mat @ model.d_mat),
        b=row_sum_norm(model.b_star),
        b_inv=row_sum_norm(sym_inv(model.b_star)),
    )


@dataclass(frozen=True)
class DiagnosticsReport:
    alpha: float
    a1_holds: bool
    a2_lhs: float
    a2_rhs: float
    a2_holds: bool
    a3_rownorm: float
    nu_gamma_inv: float
    nu_d2: float
    nu_b: float
    nu_b_inv: float
    c0: float
    c1: float
    c2: float
    n_threshold: float
    tau_exponent: float
    lemma4_radius: float | None = None

    def to_dict(self) -> dict:
        # inf is not valid JSON; it only occurs when alpha <= 0 and maps to null
        return {k: (None if isinstance(v, float) and math.isinf(v) else v) for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def recovery_constants(nu: NuConstants, max_sigma_ii: float, alpha: float, d: int,
                       sigma: float = 1.0) -> tuple[float, float, float]:
    """``(C0, C1, C2)``; C1 is inf when ``alpha <= 0``."""
    tail = (1.0 + 4.0 * sigma ** 2) * max_sigma_ii
    c2 = 64.0 * math.sqrt(2.0) * tail * nu.gamma_inv * nu.d2 * nu.b
    c0 = c2 / (4.0 * nu.gamma_inv)
    if alpha > 0:
        inner = max(
            nu.gamma_inv * nu.b_inv,
            2.0 * nu.gamma_inv ** 2 * nu.b_inv ** 3,
            2.0 / (alpha * d),
        )
        c1 = 192.0 * math.sqrt(2.0) * tail * nu.d2 * nu.b * inner
    else:
        c1 = math.inf
    return c0, c1, c2


def sample_threshold(c1: float, d: int, p: int, tau: float) -> float:
    return c1 ** 2 * d ** 2 * (tau * math.log(p) + math.log(4.0))


def theorem1_constants(model: NetworkModel, sigma: float = 1.0, tau_exponent: float = DEFAULT_TAU,
                       limit: int = DIAG_LIMIT) -> DiagnosticsReport:
    if not tau_exponent > 2:
        raise InvalidInput("tau_exponent must exceed 2")
    if not sigma > 0:
        raise InvalidInput("sigma must be positive")
    alpha = check_incoherence(model, limit)
    a2 = check_hessian_regularity(model, limit)
    nu = nu_constants(model)
    max_sigma_ii = float(np.max(np.diag(model.sigma_star)))
    d = model.degree_d
    c0, c1, c2 = recovery_constants(nu, max_sigma_ii, alpha, d, sigma)
    return DiagnosticsReport(
        alpha=alpha,
        a1_holds=alpha > 0,
        a2_lhs=a2.lhs,
        a2_rhs=a2.rhs,
        a2_holds=a2.holds,
        a3_rownorm=nu.b,
        nu_gamma_inv=nu.gamma_inv,
        nu_d2=nu.d2,
        nu_b=nu.b,
        nu_b_inv=nu.b_inv,
        c0=c0,
        c1=c1,
        c2=c2,
        n_threshold=sample_threshold(c1, d, model.p, tau_exponent),
        tau_exponent=tau_exponent,
    )


@dataclass(frozen=True)
class RadiusCheck:
    radius: float
    bound: float
    hypothesis_holds: bool


def lemma4_radius(model: NetworkModel, w_infnorm: float, lam: float) -> RadiusCheck:
    """Error radius ``4 nu_Ginv (nu_D2 nu_B ||W||_inf + lam / 2)`` and its admissibility bound."""
    if w_infnorm < 0 or lam < 0:
        raise InvalidInput("w_infnorm and lambda must be non-negative")
    nu = nu_constants(model)
    return radius_from_constants(nu, model.degree_d, w_infnorm, lam)


def radius_from_constants(nu: NuConstants, d: int, w_infnorm: float, lam: float) -> RadiusCheck:
    r = 4.0 * nu.gamma_inv * (nu.d2 * nu.b * w_infnorm + 0.5 * lam)
    bound = min(1.0 / (3.0 * nu.b_inv * d), 1.0 / (6.0 * nu.gamma_inv * nu.b_inv ** 3 * d))
    return RadiusCheck(r, bound, r <= bound)


@dataclass
class DualCheck:
    max_dual_ec: float
    strict: bool
    restricted: SolverResult


def pdw_dual_check(model: NetworkModel, samples: SampleSet, lam: float,
                   config: SolverConfig | None = None) -> DualCheck:
    """Solve on the true support and measure the implied dual variable off it."""
    if not lam > 0:
        raise InvalidInput("lambda must be positive")
    base = SolverConfig(lam=lam) if config is None else config
    cfg = replace(base, lam=lam, restrict_support=model.support_E)
    res = solve(samples.s_cov, model.d_mat, cfg)
    ec = model.support_E.complement()
    if len(ec) == 0:
        return DualCheck(0.0, True, res)
    S = samples.s_cov
    d2 = model.d_mat @ model.d_mat
    B = res.b_hat
    m = d2 @ B @ S
    z = (2.0 * sym_inv(B) - m - m.T) / lam
    mask = ec.mask()
    max_dual = float(np.abs(z[mask]).max())
    return DualCheck(max_dual, max_dual < 1.0, res)
