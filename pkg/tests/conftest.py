import numpy as np
import pytest


def random_pd(rng, p, scale=1.0, jitter=None):
    A = rng.standard_normal((p, p))
    return scale * (A @ A.T / p + (jitter if jitter is not None else 0.5) * np.eye(p))


def brute_force_2x2(F, center=(1.5, 0.0, 1.5), steps=(0.1, 1e-2, 1e-3, 1e-4, 1e-5), half_points=(30, 20)):
    """Coarse-to-fine grid search for a convex function of a 2x2 symmetric matrix.

    ``F`` takes broadcastable arrays ``(a, b, c)`` for ``[[a, b], [b, c]]`` and
    returns ``inf`` outside the PD cone. The first level covers +-30 steps of
    0.1 around ``center``; every later level covers +-20 of its own steps
    around the previous optimum.
    """
    best = np.asarray(center, dtype=float)
    val = np.inf
    for level, step in enumerate(steps):
        h = half_points[0] if level == 0 else half_points[1]
        axis = step * np.arange(-h, h + 1)
        a = best[0] + axis[:, None, None]
        b = best[1] + axis[None, :, None]
        c = best[2] + axis[None, None, :]
        vals = F(a, b, c)
        k = np.unravel_index(np.argmin(vals), vals.shape)
        best = np.array([a[k[0], 0, 0], b[0, k[1], 0], c[0, 0, k[2]]])
        val = float(vals[k])
    return best, val


def balance_objective_2x2(S, d2, lam):
    """Vectorized objective over ``[[a, b], [b, c]]`` with diagonal ``D^2 = diag(d2)``."""

    def F(a, b, c):
        a, b, c = np.broadcast_arrays(a, b, c)
        # Tr(D2 B S B) = sum_ij D2_i (B S B)_ii
        bsb_00 = a * (S[0, 0] * a + S[0, 1] * b) + b * (S[1, 0] * a + S[1, 1] * b)
        bsb_11 = b * (S[0, 0] * b + S[0, 1] * c) + c * (S[1, 0] * b + S[1, 1] * c)
        det = a * c - b * b
        with np.errstate(invalid="ignore", divide="ignore"):
            val = d2[0] * bsb_00 + d2[1] * bsb_11 - 2 * np.log(det) + 2 * lam * np.abs(b)
        return np.where((a > 0) & (det > 0), val, np.inf)

    return F


def glasso_objective_2x2(S, lam):
    def F(a, b, c):
        a, b, c = np.broadcast_arrays(a, b, c)
        det = a * c - b * b
        with np.errstate(invalid="ignore", divide="ignore"):
            val = S[0, 0] * a + 2 * S[0, 1] * b + S[1, 1] * c - np.log(det) + 2 * lam * np.abs(b)
        return np.where((a > 0) & (det > 0), val, np.inf)

    return F


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
