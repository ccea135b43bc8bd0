"""Draw injections X, map them to potentials Y = inv(B*) X, and form S.

Randomness comes from numpy's Philox4x64 counter-based generator, seeded
with a single unsigned 64-bit integer, so a seed reproduces the same stream
on every platform numpy supports.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import cho_factor, cho_solve

from .errors import InvalidInput
from .linalg import sym_sqrt
from .network import NetworkModel

SEED_MASK = (1 << 64) - 1


class Distribution(str, enum.Enum):
    GAUSSIAN = "gaussian"
    STUDENT_T = "student_t"


@dataclass(frozen=True)
class SamplingSpec:
    n: int
    distribution: Distribution = Distribution.GAUSSIAN
    seed: int = 0
    dof: float = 9.0

    def __post_init__(self):
        object.__setattr__(self, "distribution", Distribution(self.distribution))
        if self.n < 1:
            raise InvalidInput("n must be >= 1")
        if not 0 <= self.seed <= SEED_MASK:
            raise InvalidInput("seed must be an unsigned 64-bit integer")
        if self.distribution is Distribution.STUDENT_T and not self.dof > 4:
            raise InvalidInput("Student-t needs dof > 4 for a bounded fourth moment")


@dataclass(frozen=True)
class SampleSet:
    y: NDArray  # n x p
    s_cov: NDArray
    n: int


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed & SEED_MASK))


def sample_covariance(y: NDArray) -> NDArray:
    """Uncentred second moment ``Y^T Y / n``."""
    s = y.T @ y / y.shape[0]
    return 0.5 * (s + s.T)


def standard_draws(rng: np.random.Generator, spec: SamplingSpec, p: int) -> NDArray:
    shape = (spec.n, p)
    if spec.distribution is Distribution.GAUSSIAN:
        return rng.standard_normal(shape)
    return rng.standard_t(spec.dof, size=shape) * math.sqrt((spec.dof - 2.0) / spec.dof)


def draw_samples(model: NetworkModel, spec: SamplingSpec) -> SampleSet:
    p = model.p
    z = standard_draws(make_rng(spec.seed), spec, p)
    x = z @ sym_sqrt(model.sigma_x)  # rows are X_i^T = Z_i^T Sigma_X^{1/2}
    y = cho_solve(cho_factor(model.b_star), x.T).T
    return SampleSet(y=y, s_cov=sample_covariance(y), n=spec.n)


def samples_from_array(y) -> SampleSet:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[0] < 1:
        raise InvalidInput("samples must be a non-empty n x p array")
    return SampleSet(y=y, s_cov=sample_covariance(y), n=y.shape[0])


def noise_deviation(model: NetworkModel, samples: SampleSet) -> NDArray:
    """``W = S - inv(Theta*)``."""
    if samples.s_cov.shape != model.b_star.shape:
        raise InvalidInput("sample dimension does not match the model")
    return samples.s_cov - model.sigma_star


def write_samples_csv(path: str | Path, samples: SampleSet) -> None:
    np.savetxt(path, samples.y, delimiter=",", fmt="%.17g")


def read_samples_csv(path: str | Path) -> SampleSet:
    y = np.loadtxt(path, delimiter=",", ndmin=2)
    return samples_from_array(y)
