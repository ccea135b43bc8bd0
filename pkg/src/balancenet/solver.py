"""l1-penalized log-determinant estimation of the balance matrix.

Minimizes

    F(B) = Tr(D B S B D) - log det(B^2) + lam * sum_{i != j} |B_ij|

over symmetric positive-definite ``B`` with a proximal-gradient loop
(optionally FISTA-accelerated with function-value restart). Steps that
leave the positive-definite cone are rejected by the backtracking line
search, so no barrier term is needed.

The same loop, with a different smooth part, solves the graphical lasso
(see :mod:`balancenet.baselines`).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import lapack

from .errors import InvalidInput, NotPositiveDefinite
from .linalg import IndexSet, as_sym, is_pd, log_det, pd_floor, sym_inv

log = logging.getLogger(__name__)

SUPPORT_EPS = 1e-8
INIT_CLAMP = (1e-3, 1e3)
MIN_STEP = 1e-20
MAX_STEP = 1e8
STALL_PATIENCE = 100
NEWTON_PATTERN_AGE = 10
NEWTON_PERIOD = 50
NEWTON_MAX_STEPS = 50
NEWTON_MAX_VARS_PER_ROW = 8


@dataclass(frozen=True)
class SolverConfig:
    lam: float
    max_iters: int = 10000
    rel_obj_tol: float = 1e-9
    kkt_tol: float = 1e-6
    backtrack_beta: float = 0.5
    init_step: float = 1.0
    acceleration: bool = True
    restrict_support: IndexSet | None = None
    b_init: NDArray | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.lam >= 0:
            raise InvalidInput("lambda must be >= 0")
        if self.max_iters < 1:
            raise InvalidInput("max_iters must be >= 1")
        if not 0 < self.backtrack_beta < 1:
            raise InvalidInput("backtrack_beta must lie in (0, 1)")
        if not self.init_step > 0:
            raise InvalidInput("init_step must be positive")
        if self.rel_obj_tol < 0 or self.kkt_tol < 0:
            raise InvalidInput("tolerances must be non-negative")


@dataclass
class SolverResult:
    b_hat: NDArray
    objective_trace: list[float]
    iterations: int
    kkt_residual: float
    support_hat: IndexSet
    converged: bool
    gradient: NDArray = field(repr=False, default=None)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]


# ---------------------------------------------------------------------------
# public building blocks


def offdiag_l1(B: NDArray) -> float:
    return float(np.abs(B).sum() - np.abs(np.diag(B)).sum())


def objective(B: ArrayLike, S: ArrayLike, D: ArrayLike, lam: float) -> float:
    B, S, D = as_sym(B, "B"), as_sym(S, "S"), as_sym(D, "D")
    D2 = D @ D
    return float(np.sum((D2 @ B @ S) * B) - 2.0 * log_det(B) + lam * offdiag_l1(B))


def smooth_gradient(B: ArrayLike, S: ArrayLike, D: ArrayLike) -> NDArray:
    """Gradient of ``Tr(D^2 B S B) - 2 log det B``: ``D^2 B S + S B D^2 - 2 inv(B)``."""
    B, S, D = as_sym(B, "B"), as_sym(S, "S"), as_sym(D, "D")
    M = (D @ D) @ B @ S
    return M + M.T - 2.0 * sym_inv(B)


def _restrict_mask(restrict: IndexSet | None, p: int) -> NDArray | None:
    if restrict is None:
        return None
    if restrict.dim != p:
        raise InvalidInput("restrict_support dimension mismatch")
    mask = restrict.mask()
    np.fill_diagonal(mask, True)
    return mask


def prox_l1_offdiag(B: ArrayLike, threshold: float, restrict: IndexSet | None = None) -> NDArray:
    """Soft-threshold the off-diagonal entries; zero everything outside ``restrict``."""
    if threshold < 0:
        raise InvalidInput("threshold must be >= 0")
    B = np.asarray(B, dtype=np.float64)
    return _prox(B, threshold, _restrict_mask(restrict, B.shape[0]))


def _prox(B: NDArray, threshold: float, mask: NDArray | None) -> NDArray:
    out = np.sign(B) * np.maximum(np.abs(B) - threshold, 0.0)
    np.fill_diagonal(out, np.diag(B))
    if mask is not None:
        out[~mask] = 0.0
    return 0.5 * (out + out.T)


def kkt_residual(B: NDArray, grad: NDArray, lam: float, restrict: IndexSet | None = None) -> float:
    """Largest entry of the minimal-norm subgradient of the penalized objective."""
    return _kkt(B, grad, lam, _restrict_mask(restrict, B.shape[0]))


def _kkt(B: NDArray, grad: NDArray, lam: float, mask: NDArray | None) -> float:
    nonzero = B != 0
    res = np.where(nonzero, np.abs(grad + lam * np.sign(B)), np.maximum(np.abs(grad) - lam, 0.0))
    np.fill_diagonal(res, np.abs(np.diag(grad)))
    if mask is not None:
        res = res[mask]
    return float(res.max())


def default_lambda(p: int, n: int, scale_c: float) -> float:
    """``scale_c * sqrt(log(p) / n)``."""
    if p < 2 or n < 1 or not scale_c > 0:
        raise InvalidInput("default_lambda needs p >= 2, n >= 1, scale_c > 0")
    return scale_c * math.sqrt(math.log(p) / n)


def support_of(B: NDArray, eps: float = SUPPORT_EPS) -> IndexSet:
    mask = np.abs(B) > eps
    np.fill_diagonal(mask, True)
    return IndexSet.from_mask(mask)


# ---------------------------------------------------------------------------
# the proximal loop
#
# Objective values are tracked incrementally: near the optimum the per-step
# decrease falls below the rounding error of evaluating F directly, so every
# comparison uses an accurately computed difference F(B + Delta) - F(B).


class _Factor:
    """Upper Cholesky factor ``U`` (``A = U^T U``) of a positive-definite iterate."""

    __slots__ = ("chol",)

    def __init__(self, chol: NDArray):
        self.chol = chol

    @classmethod
    def of(cls, A: NDArray) -> "_Factor | None":
        c, info = lapack.dpotrf(A, lower=0, clean=1)
        if info != 0:
            return None
        floor = pd_floor(np.array([np.abs(A).sum(axis=1).max()]))
        if np.diag(c).min() ** 2 <= floor:
            return None
        return cls(c)

    @property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def inverse(self) -> NDArray:
        inv, info = lapack.dpotri(self.chol, lower=0)
        if info != 0:
            raise np.linalg.LinAlgError("dpotri failed")
        return np.triu(inv) + np.triu(inv, 1).T

    def logdet_delta(self, delta: NDArray) -> float | None:
        """``log det(A + delta) - log det(A)``, or ``None`` if ``A + delta`` is not PD."""
        U = self.chol
        # K = U^{-T} delta U^{-1}
        left, info = lapack.dtrtrs(U, delta, lower=0, trans=1)
        K, info2 = lapack.dtrtrs(U, np.ascontiguousarray(left.T), lower=0, trans=1)
        if info or info2:
            return None
        K = 0.5 * (K + K.T)
        K[np.diag_indices_from(K)] += 1.0
        r, info = lapack.dpotrf(K, lower=0, clean=1)
        if info != 0:
            return None
        return 2.0 * float(np.sum(np.log(np.diag(r))))


class SmoothPart:
    """Smooth term of a penalized log-det objective.

    Subclasses provide the value, the gradient, and an accurate difference
    ``f(B + delta) - f(B)``; all take the Cholesky factor of ``B``.
    """

    def value(self, B: NDArray, fac: _Factor) -> float:
        raise NotImplementedError

    def gradient(self, B: NDArray, fac: _Factor) -> NDArray:
        raise NotImplementedError

    def delta(self, B: NDArray, fac: _Factor, step: NDArray) -> float | None:
        raise NotImplementedError

    def bilinear(self, W: NDArray, a, b, c, d) -> NDArray:
        """Second derivative along unit matrices ``e_a e_b^T`` and ``e_c e_d^T``; ``W = inv(B)``."""
        raise NotImplementedError


class BalanceSmooth(SmoothPart):
    """``Tr(D^2 B S B) - 2 log det B``."""

    def __init__(self, S: NDArray, D: NDArray):
        self.S = S
        D2 = D @ D
        self.D2 = None if np.array_equal(D2, np.eye(D2.shape[0])) else D2

    def _m(self, B: NDArray) -> NDArray:
        BS = B @ self.S
        return BS if self.D2 is None else self.D2 @ BS

    def value(self, B, fac):
        return float(np.sum(self._m(B) * B)) - 2.0 * fac.logdet

    def gradient(self, B, fac):
        M = self._m(B)
        return M + M.T - 2.0 * fac.inverse()

    def delta(self, B, fac, step):
        ld = fac.logdet_delta(step)
        if ld is None:
            return None
        # Tr(D2 (B+d) S (B+d)) - Tr(D2 B S B) = Tr(D2 d S (2B + d))
        return float(np.sum(self._m(step) * (2.0 * B + step))) - 2.0 * ld

    def bilinear(self, W, a, b, c, d):
        S = self.S
        if self.D2 is None:
            quad = (d == a) * S[b, c] + (b == c) * S[d, a]
        else:
            quad = self.D2[d, a] * S[b, c] + self.D2[b, c] * S[d, a]
        return quad + 2.0 * W[d, a] * W[b, c]


def _offdiag_l1_delta(B: NDArray, C: NDArray) -> float:
    d = np.abs(C) - np.abs(B)
    return float(d.sum() - np.trace(d))


def _face_hessian(smooth: SmoothPart, W: NDArray, I: NDArray, J: NDArray) -> NDArray:
    """Hessian in the coordinates ``B = sum_k v_k (e_i e_j^T + e_j e_i^T)`` (one term on the diagonal)."""
    ik, jk, il, jl = I[:, None], J[:, None], I[None, :], J[None, :]
    ok = (ik != jk).astype(float)
    ol = (il != jl).astype(float)
    return (
        smooth.bilinear(W, ik, jk, il, jl)
        + ol * smooth.bilinear(W, ik, jk, jl, il)
        + ok * smooth.bilinear(W, jk, ik, il, jl)
        + ok * ol * smooth.bilinear(W, jk, ik, jl, il)
    )


def _l1_quadratic(H: NDArray, q: NDArray, pen: NDArray, u0: NDArray, max_rounds: int = 60) -> NDArray:
    """Minimize ``u^T H u / 2 - q^T u + sum pen_k |u_k|`` by primal-dual active sets.

    Returns the last iterate if the active set has not settled after
    ``max_rounds`` rounds; the caller's line search guards against a poor
    direction.
    """
    h = np.diag(H)
    u = u0.copy()
    z = q - H @ u
    prev = None
    for _ in range(max_rounds):
        score = h * u + z
        active = (pen == 0) | (np.abs(score) > pen)
        sign = np.sign(score)
        key = (active.tobytes(), sign[active].tobytes())
        if key == prev:
            break
        prev = key
        u = np.zeros_like(u)
        if active.any():
            rhs = q[active] - pen[active] * sign[active]
            try:
                u[active] = np.linalg.solve(H[np.ix_(active, active)], rhs)
            except np.linalg.LinAlgError:
                break
        z = q - H @ u
    return u


def _newton_step(smooth: SmoothPart, x: NDArray, fac: _Factor, gx: NDArray, lam: float,
                 mask: NDArray | None):
    """One proximal Newton step in the upper-triangle coordinates ``v``.

    The penalty there is ``2 lam |v_k|`` off the diagonal. Only nonzeros and
    zeros whose subgradient interval misses the gradient are free. Returns
    ``(candidate, dF)`` or ``None`` when no sufficient decrease is found.
    """
    p = x.shape[0]
    I, J = np.triu_indices(p)
    if mask is not None:
        keep = mask[I, J]
        I, J = I[keep], J[keep]
    off = I != J
    v = x[I, J]
    g = gx[I, J] * np.where(off, 2.0, 1.0)
    pen = 2.0 * lam * off
    free = (v != 0) | (np.abs(g) > pen)
    I, J, v, g, pen = I[free], J[free], v[free], g[free], pen[free]
    H = _face_hessian(smooth, fac.inverse(), I, J)
    u = _l1_quadratic(H, H @ v - g, pen, v)
    d = u - v
    decrease = float(g @ d) + float(pen @ (np.abs(u) - np.abs(v)))
    if not decrease < 0:
        return None
    alpha = 1.0
    for _ in range(40):
        step = np.zeros_like(x)
        step[I, J] = alpha * d
        step[J, I] = alpha * d
        cand = x + step
        d_smooth = smooth.delta(x, fac, step)
        if d_smooth is not None:
            dF = d_smooth + lam * _offdiag_l1_delta(x, cand)
            if dF <= 1e-4 * alpha * decrease:
                return cand, dF
        alpha *= 0.5
    return None


def proximal_solve(smooth: SmoothPart, b0: NDArray, config: SolverConfig) -> SolverResult:
    """PD-safeguarded proximal gradient for ``smooth(B) + lam * ||B||_1,off``.

    Once the nonzero pattern has been stable for ``NEWTON_PATTERN_AGE``
    proximal iterations, the loop switches to damped Newton steps restricted
    to that pattern until the gradient on it vanishes. Proximal steps still
    decide which entries become nonzero; the Newton phase is what makes
    badly conditioned problems converge in reasonable time.
    """
    lam = config.lam
    beta = config.backtrack_beta
    mask = _restrict_mask(config.restrict_support, b0.shape[0])
    x = _prox(b0, 0.0, mask)
    fx_fac = _Factor.of(x)
    if fx_fac is None:
        raise NotPositiveDefinite("initial iterate is not positive definite")
    gx = smooth.gradient(x, fx_fac)
    Fx = smooth.value(x, fx_fac) + lam * offdiag_l1(x)
    trace = [Fx]
    kkt = _kkt(x, gx, lam, mask)

    y, y_fac, gy = x, fx_fac, gx
    momentum = 1.0
    t = config.init_step
    stall = 0
    best_kkt = kkt
    last_pattern, pattern_age = x != 0, 0
    it = 0
    while kkt >= config.kkt_tol and it < config.max_iters:
        it += 1
        t = min(t / beta, MAX_STEP)
        while True:
            cand = _prox(y - t * gy, t * lam, mask)
            step = cand - y
            d_smooth = smooth.delta(y, y_fac, step)
            if d_smooth is not None:
                model = float(np.sum(gy * step)) + float(np.sum(step * step)) / (2.0 * t)
                if d_smooth <= model:
                    break
            t *= beta
            if t < MIN_STEP:
                d_smooth = None
                break
        if d_smooth is None:
            if y is x:
                log.debug("step size underflow at iteration %d", it)
                break
            y, y_fac, gy, momentum = x, fx_fac, gx, 1.0
            continue
        if y is x:
            dF = d_smooth + lam * _offdiag_l1_delta(x, cand)
        else:
            dx = smooth.delta(x, fx_fac, cand - x)
            dF = math.inf if dx is None else dx + lam * _offdiag_l1_delta(x, cand)
        if dF > 0:
            if y is not x:
                # accelerated step went uphill: restart from the last iterate
                y, y_fac, gy, momentum = x, fx_fac, gx, 1.0
                continue
            log.debug("no descent from the current iterate at iteration %d", it)
            break
        c_fac = _Factor.of(cand)
        if c_fac is None:
            log.debug("accepted iterate failed to factor at iteration %d", it)
            break
        rel = -dF / max(1.0, abs(Fx))
        x_prev = x
        x, fx_fac, Fx = cand, c_fac, Fx + dF
        gx = smooth.gradient(x, fx_fac)
        trace.append(Fx)
        kkt = _kkt(x, gx, lam, mask)
        # objective flat and no KKT progress for a while: give up
        if kkt < 0.99 * best_kkt or rel >= config.rel_obj_tol:
            stall = 0
        else:
            stall += 1
        best_kkt = min(best_kkt, kkt)
        pattern = x != 0
        pattern_age = pattern_age + 1 if np.array_equal(pattern, last_pattern) else 0
        last_pattern = pattern
        if (kkt >= config.kkt_tol and (pattern_age >= NEWTON_PATTERN_AGE or it % NEWTON_PERIOD == 0)
                and np.count_nonzero(np.triu(pattern)) <= NEWTON_MAX_VARS_PER_ROW * x.shape[0]):
            pattern_age = 0
            steps = 0
            while kkt >= config.kkt_tol and it < config.max_iters and steps < NEWTON_MAX_STEPS:
                nt = _newton_step(smooth, x, fx_fac, gx, lam, mask)
                if nt is None:
                    break
                cand, dF = nt
                c_fac = _Factor.of(cand)
                if c_fac is None:
                    break
                it += 1
                steps += 1
                x, fx_fac, Fx = cand, c_fac, Fx + dF
                gx = smooth.gradient(x, fx_fac)
                trace.append(Fx)
                kkt = _kkt(x, gx, lam, mask)
            if steps:
                stall = 0
                best_kkt = min(best_kkt, kkt)
                y, y_fac, gy, momentum = x, fx_fac, gx, 1.0
                continue
        if stall >= STALL_PATIENCE:
            log.debug("stalled at iteration %d", it)
            break
        y, y_fac, gy = x, fx_fac, gx
        if config.acceleration:
            m_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * momentum * momentum))
            y_acc = x + ((momentum - 1.0) / m_next) * (x - x_prev)
            momentum = m_next
            acc_fac = _Factor.of(y_acc)
            if acc_fac is None:
                momentum = 1.0
            else:
                y, y_fac = y_acc, acc_fac
                gy = smooth.gradient(y, y_fac)

    converged = kkt < config.kkt_tol
    if not converged:
        log.debug("solver stopped after %d iterations with KKT residual %.3e", it, kkt)
    if not is_pd(np.linalg.eigvalsh(x)):
        raise NotPositiveDefinite("final iterate lost positive definiteness")
    return SolverResult(
        b_hat=x,
        objective_trace=trace,
        iterations=it,
        kkt_residual=kkt,
        support_hat=support_of(x),
        converged=converged,
        gradient=gx,
    )


def default_init(S: NDArray, D: NDArray) -> NDArray:
    """Diagonal start ``sqrt(Sigma_X,ii / S_ii)``, clamped to [1e-3, 1e3]."""
    sigma_x = sym_inv(D @ D)
    s = np.diag(S)
    sx = np.diag(sigma_x)
    with np.errstate(divide="ignore"):
        ratio = np.where(s > 0, np.sqrt(sx / np.where(s > 0, s, 1.0)), INIT_CLAMP[1])
    return np.diag(np.clip(ratio, *INIT_CLAMP))


def solve(S: ArrayLike, D: ArrayLike, config: SolverConfig) -> SolverResult:
    """Minimize the l1-penalized balance-matrix objective.

    With ``config.restrict_support`` set, entries outside that index set are
    held at zero (the support-restricted program).
    """
    S = as_sym(S, "S")
    D = as_sym(D, "D")
    if S.shape != D.shape:
        raise InvalidInput("S and D dimensions differ")
    if np.linalg.eigvalsh(S)[0] < -1e-10 * max(1.0, float(np.abs(S).max())):
        raise InvalidInput("S is not positive semidefinite")
    if not is_pd(np.linalg.eigvalsh(D)):
        raise NotPositiveDefinite("D is not positive definite")
    b0 = default_init(S, D) if config.b_init is None else as_sym(config.b_init, "b_init")
    return proximal_solve(BalanceSmooth(S, D), b0, config)
