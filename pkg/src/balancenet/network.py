"""Ground-truth balance models: topologies, the matrix B*, and derived quantities."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidInput, NotPositiveDefinite
from .linalg import IndexSet, as_sym, is_pd, sym_eigen, sym_inv, sym_sqrt

BUNDLED_EDGE_LISTS = {
    "ieee33": ("ieee33.edges",),
    "ieee33-loops": ("ieee33.edges", "ieee33_loops.edges"),
}


class GraphKind(str, enum.Enum):
    CHAIN = "chain"
    GRID = "grid"
    EDGE_LIST = "edge_list"


@dataclass(frozen=True)
class GraphSpec:
    kind: GraphKind
    p: int
    edges: tuple[tuple[int, int, float], ...] = ()
    grid_rows: int | None = None
    grid_cols: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GraphKind(self.kind))
        if self.p < 1:
            raise InvalidInput("p must be positive")
        if self.kind is GraphKind.GRID:
            if self.grid_rows is None or self.grid_cols is None:
                raise InvalidInput("grid requires grid_rows and grid_cols")
            if self.grid_rows * self.grid_cols != self.p:
                raise InvalidInput("grid_rows * grid_cols must equal p")
        for i, j, _ in self.edges:
            if i == j:
                raise InvalidInput(f"self-loop at node {i}")
            if not (0 <= i < self.p and 0 <= j < self.p):
                raise InvalidInput(f"edge ({i}, {j}) out of range for p={self.p}")


@dataclass(frozen=True)
class NetworkModel:
    b_star: NDArray
    sigma_x: NDArray
    d_mat: NDArray
    theta_star: NDArray
    support_E: IndexSet
    degree_d: int
    s_offdiag: int
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def p(self) -> int:
        return self.b_star.shape[0]

    @property
    def sigma_star(self) -> NDArray:
        """Covariance of the potentials, ``inv(B*) Sigma_X inv(B*)``."""
        b_inv = sym_inv(self.b_star)
        cov = b_inv @ self.sigma_x @ b_inv
        return 0.5 * (cov + cov.T)

    def offdiag_edges(self) -> frozenset[tuple[int, int]]:
        return self.support_E.offdiag()


def _model_from_matrix(b_star: NDArray, sigma_x: NDArray | None = None, meta=None) -> NetworkModel:
    b_star = as_sym(b_star, "B*")
    p = b_star.shape[0]
    eig = sym_eigen(b_star)
    if not is_pd(eig.values):
        raise NotPositiveDefinite(
            f"B* is not positive definite (min eigenvalue {eig.values[0]:.3e})"
        )
    nz = b_star != 0
    np.fill_diagonal(nz, True)
    support = IndexSet.from_mask(nz)
    model = NetworkModel(
        b_star=b_star,
        sigma_x=np.eye(p),
        d_mat=np.eye(p),
        theta_star=b_star @ b_star,
        support_E=support,
        degree_d=int(nz.sum(axis=1).max()),
        s_offdiag=int(nz.sum() - p),
        meta=dict(meta or {}),
    )
    return set_injection_covariance(model, np.eye(p) if sigma_x is None else sigma_x)


def set_injection_covariance(model: NetworkModel, sigma_x: ArrayLike) -> NetworkModel:
    """Return ``model`` with a new injection covariance and recomputed ``D``, ``Theta*``."""
    sigma_x = as_sym(sigma_x, "Sigma_X")
    if sigma_x.shape != model.b_star.shape:
        raise InvalidInput("Sigma_X dimension does not match B*")
    sigma_inv = sym_inv(sigma_x)
    d_mat = sym_sqrt(sigma_inv)
    theta = model.b_star @ sigma_inv @ model.b_star
    return replace(
        model,
        sigma_x=sigma_x,
        d_mat=d_mat,
        theta_star=0.5 * (theta + theta.T),
    )


def random_diagonal_covariance(p: int, seed: int, low: float = 0.5, high: float = 1.5) -> NDArray:
    rng = np.random.Generator(np.random.Philox(seed))
    return np.diag(rng.uniform(low, high, size=p))


def _signed_weight_matrix(p: int, edges, diag_margin: float) -> NDArray:
    if diag_margin <= 0:
        raise InvalidInput("diag_margin must be positive")
    B = np.zeros((p, p))
    for i, j, w in edges:
        if w == 0:
            raise InvalidInput("edge weights must be nonzero")
        B[i, j] = B[j, i] = w
    np.fill_diagonal(B, np.abs(B).sum(axis=1) + diag_margin)
    return B


def chain_edges(p: int, weight: float = 1.0) -> list[tuple[int, int, float]]:
    return [(i, i + 1, weight) for i in range(p - 1)]


def grid_edges(rows: int, cols: int, weight: float = 1.0) -> list[tuple[int, int, float]]:
    edges = []
    for r in range(rows):
        for c in range(cols):
            k = r * cols + c
            if c + 1 < cols:
                edges.append((k, k + 1, weight))
            if r + 1 < rows:
                edges.append((k, k + cols, weight))
    return edges


def build_chain(p: int, edge_weight: float = 1.0, diag_margin: float = 1.0) -> NetworkModel:
    """Path graph on ``p`` nodes with a diagonally dominant B*.

    A negative ``edge_weight`` gives the Laplacian-signed variant.
    """
    if p < 2:
        raise InvalidInput("chain needs p >= 2")
    if edge_weight == 0:
        raise InvalidInput("edge_weight must be nonzero")
    B = _signed_weight_matrix(p, chain_edges(p, edge_weight), diag_margin)
    return _model_from_matrix(B, meta={"kind": "chain", "p": p})


def build_grid(rows: int, cols: int, edge_weight: float = 1.0, diag_margin: float = 1.0) -> NetworkModel:
    """4-neighbour lattice; node ``r * cols + c`` sits at row ``r``, column ``c``."""
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise InvalidInput("grid needs at least two nodes")
    if edge_weight == 0:
        raise InvalidInput("edge_weight must be nonzero")
    B = _signed_weight_matrix(rows * cols, grid_edges(rows, cols, edge_weight), diag_margin)
    return _model_from_matrix(B, meta={"kind": "grid", "rows": rows, "cols": cols})


def laplacian(p: int, edges) -> NDArray:
    L = np.zeros((p, p))
    for i, j, w in edges:
        L[i, j] -= w
        L[j, i] -= w
        L[i, i] += w
        L[j, j] += w
    return L


def _is_connected(p: int, edges) -> bool:
    adj = [[] for _ in range(p)]
    for i, j, _ in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    stack = [0]
    while stack:
        for v in adj[stack.pop()]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == p


def build_from_edge_list(
    spec: GraphSpec,
    laplacian_mode: bool = True,
    reduce_node: int | None = None,
    diag_margin: float = 1.0,
) -> NetworkModel:
    """B* from an explicit edge list.

    With ``laplacian_mode`` the weighted Laplacian is used and, if
    ``reduce_node`` is given, that row and column are deleted to obtain an
    invertible minor. Otherwise the signed-weight construction of
    :func:`build_chain` applies.
    """
    if laplacian_mode:
        if reduce_node is not None:
            if not (0 <= reduce_node < spec.p):
                raise InvalidInput(f"reduce_node {reduce_node} out of range")
            if not _is_connected(spec.p, spec.edges):
                raise InvalidInput("Laplacian reduction requires a connected graph")
        L = laplacian(spec.p, spec.edges)
        if reduce_node is not None:
            keep = [k for k in range(spec.p) if k != reduce_node]
            L = L[np.ix_(keep, keep)]
        B = L
    else:
        B = _signed_weight_matrix(spec.p, spec.edges, diag_margin)
    meta = {"kind": "edge_list", "p": spec.p, "laplacian": laplacian_mode, "reduce_node": reduce_node}
    return _model_from_matrix(B, meta=meta)


def parse_edge_list(text: str) -> list[tuple[int, int, float]]:
    """Parse ``i j [weight]`` lines; ``#`` starts a comment."""
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise InvalidInput(f"line {lineno}: expected 'i j [weight]', got {raw!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise InvalidInput(f"line {lineno}: {exc}") from None
        edges.append((i, j, w))
    return edges


def read_edge_list(path: str | Path) -> list[tuple[int, int, float]]:
    return parse_edge_list(Path(path).read_text(encoding="utf-8"))


def bundled_edge_list(name: str) -> list[tuple[int, int, float]]:
    """Edge lists shipped with the package: ``ieee33`` or ``ieee33-loops`` (``.edges`` suffix optional)."""
    try:
        files = BUNDLED_EDGE_LISTS[name.removesuffix(".edges")]
    except KeyError:
        raise InvalidInput(f"unknown bundled edge list {name!r}") from None
    data = resources.files("balancenet") / "data"
    edges = []
    for fname in files:
        edges.extend(parse_edge_list((data / fname).read_text(encoding="utf-8")))
    return edges


def graph_spec_from_edges(edges, p: int | None = None) -> GraphSpec:
    if p is None:
        p = 1 + max(max(i, j) for i, j, _ in edges)
    return GraphSpec(GraphKind.EDGE_LIST, p, tuple(edges))


def write_edge_list(path: str | Path, pairs, header: str | None = None) -> None:
    lines = [f"# {header}"] if header else []
    lines += [f"{i} {j}" for i, j in pairs]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
