"""Dense symmetric matrix primitives.

Symmetric matrices are plain ``float64`` numpy arrays; :func:`as_sym` is the
validation gate. Every matrix function (square root, inverse, log-determinant)
goes through one eigendecomposition backend, :func:`sym_eigen`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidInput, NotPositiveDefinite, SingularBlock

SYM_TOL = 1e-12
PD_FLOOR = 1e-12
KRON_COND_MAX = 1e12


class EigenPair(NamedTuple):
    values: NDArray  # ascending
    vectors: NDArray  # columns are eigenvectors


class Norms(NamedTuple):
    elem_max: float
    fro: float
    op2: float
    row_sum: float


@dataclass(frozen=True)
class IndexSet:
    """Sorted, duplicate-free set of (row, col) pairs into a ``dim x dim`` grid."""

    pairs: tuple[tuple[int, int], ...]
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInput(f"dim must be >= 1, got {self.dim}")
        pairs = tuple(sorted({(int(i), int(j)) for i, j in self.pairs}))
        for i, j in pairs:
            if not (0 <= i < self.dim and 0 <= j < self.dim):
                raise InvalidInput(f"pair {(i, j)} out of range for dim {self.dim}")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]], dim: int) -> "IndexSet":
        return cls(tuple(pairs), dim)

    @classmethod
    def from_mask(cls, mask: ArrayLike) -> "IndexSet":
        mask = np.asarray(mask, dtype=bool)
        rows, cols = np.nonzero(mask)
        return cls(tuple(zip(rows.tolist(), cols.tolist())), mask.shape[0])

    def mask(self) -> NDArray:
        m = np.zeros((self.dim, self.dim), dtype=bool)
        if self.pairs:
            idx = np.array(self.pairs)
            m[idx[:, 0], idx[:, 1]] = True
        return m

    def complement(self) -> "IndexSet":
        return IndexSet.from_mask(~self.mask())

    def offdiag(self) -> frozenset[tuple[int, int]]:
        return frozenset((i, j) for i, j in self.pairs if i != j)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __contains__(self, pair) -> bool:
        return tuple(pair) in set(self.pairs)


def as_sym(A: ArrayLike, name: str = "matrix") -> NDArray:
    """Validate ``A`` as a finite square symmetric matrix and return a float copy."""
    A = np.array(A, dtype=np.float64, ndmin=2)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise InvalidInput(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > SYM_TOL * scale:
        raise InvalidInput(f"{name} is not symmetric")
    return A


def symmetrize(A: NDArray) -> NDArray:
    return 0.5 * (A + A.T)


def sym_eigen(A: ArrayLike) -> EigenPair:
    A = as_sym(A)
    values, vectors = np.linalg.eigh(A)
    return EigenPair(values, vectors)


def pd_floor(values: NDArray) -> float:
    """Scale-aware positivity threshold for a spectrum."""
    return PD_FLOOR * max(1.0, float(np.max(np.abs(values))))


def is_pd(values: NDArray) -> bool:
    return bool(values[0] > pd_floor(values))


def _pd_eigen(A: ArrayLike, name: str) -> EigenPair:
    eig = sym_eigen(A)
    if not is_pd(eig.values):
        raise NotPositiveDefinite(
            f"{name} is not positive definite (min eigenvalue {eig.values[0]:.3e})"
        )
    return eig


def apply_spectral(eig: EigenPair, f) -> NDArray:
    """Return ``V f(diag) V^T`` for a decomposed matrix."""
    V = eig.vectors
    return symmetrize((V * f(eig.values)) @ V.T)


def sym_sqrt(A: ArrayLike) -> NDArray:
    return apply_spectral(_pd_eigen(A, "matrix"), np.sqrt)


def sym_inv(A: ArrayLike) -> NDArray:
    return apply_spectral(_pd_eigen(A, "matrix"), np.reciprocal)


def log_det(A: ArrayLike) -> float:
    return float(np.sum(np.log(_pd_eigen(A, "matrix").values)))


def norms(A: ArrayLike) -> Norms:
    A = np.asarray(A, dtype=np.float64)
    if not np.all(np.isfinite(A)):
        raise InvalidInput("matrix has non-finite entries")
    absA = np.abs(A)
    if np.allclose(A, A.T, rtol=0, atol=SYM_TOL * max(1.0, float(absA.max(initial=0.0)))):
        op2 = float(np.max(np.abs(np.linalg.eigvalsh(symmetrize(A)))))
    else:
        op2 = float(np.linalg.norm(A, 2))
    return Norms(
        elem_max=float(absA.max(initial=0.0)),
        fro=float(np.linalg.norm(A, "fro")),
        op2=op2,
        row_sum=float(absA.sum(axis=1).max(initial=0.0)),
    )


def row_sum_norm(A: ArrayLike) -> float:
    """Operator infinity norm (maximum absolute row sum)."""
    return float(np.abs(np.asarray(A)).sum(axis=1).max())


def elem_max(A: ArrayLike) -> float:
    return float(np.abs(np.asarray(A)).max())


def _kron_block(Binv: NDArray, rows: NDArray, cols: NDArray) -> NDArray:
    # Gamma[(i,j),(k,l)] = Binv[i,k] * Binv[j,l]
    return Binv[np.ix_(rows[:, 0], cols[:, 0])] * Binv[np.ix_(rows[:, 1], cols[:, 1])]


def kron_submatrix_infnorm_product(Binv: ArrayLike, E: IndexSet, Ec: IndexSet) -> float:
    """Row-sum norm of ``Gamma[Ec, E] @ inv(Gamma[E, E])`` with ``Gamma = Binv kron Binv``.

    Only the two needed blocks of the ``p^2 x p^2`` Kronecker product are
    materialized.
    """
    Binv = as_sym(Binv, "Binv")
    p = Binv.shape[0]
    if E.dim != p or Ec.dim != p:
        raise InvalidInput("index sets do not match matrix dimension")
    if E.offdiag() & Ec.offdiag() or set(E.pairs) & set(Ec.pairs):
        raise InvalidInput("E and Ec overlap")
    if len(E) + len(Ec) != p * p:
        raise InvalidInput("E and Ec do not partition the index grid")
    if len(Ec) == 0:
        return 0.0
    e = np.array(E.pairs)
    ec = np.array(Ec.pairs)
    g_ee = _kron_block(Binv, e, e)
    g_ce = _kron_block(Binv, ec, e)
    if np.linalg.cond(g_ee) > KRON_COND_MAX:
        raise SingularBlock("Gamma_EE is numerically singular")
    # X = G_ce G_ee^{-1}  <=>  G_ee^T X^T = G_ce^T
    prod = np.linalg.solve(g_ee.T, g_ce.T).T
    return row_sum_norm(prod)
