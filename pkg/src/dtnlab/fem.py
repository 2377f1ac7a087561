"""P1 assembly (stiffness, mass, boundary mass) and reusable interior solves.

Element integrals are exact closed forms (the integrands are polynomial), so
the only numerical error downstream comes from the mesh and the linear solver.
The interior block of p*M + K is factored once and reused across the many
right-hand sides the boundary Schur complement needs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .mesh import Mesh


class FemError(RuntimeError):
    pass


@dataclass
class FemMatrices:
    stiffness: sparse.csr_matrix      # K, n_nodes x n_nodes
    mass: sparse.csr_matrix           # M, n_nodes x n_nodes
    boundary_mass: sparse.csr_matrix  # M_b, n_boundary x n_boundary
    n_interior: int
    n_boundary: int

    @property
    def n_nodes(self) -> int:
        return self.n_interior + self.n_boundary

    def boundary_measure(self) -> float:
        return float(self.boundary_mass.sum())


def assemble(mesh: Mesh) -> FemMatrices:
    """Exact P1 matrices; boundary mass from 1D edge elements (L/6)[[2,1],[1,2]]."""
    pts = mesh.nodes
    tri = mesh.triangles
    x = pts[tri, 0]
    y = pts[tri, 1]
    # gradient coefficients: grad(phi_i) = (b_i, c_i) / (2A)
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area2 = x[:, 0] * b[:, 0] + x[:, 1] * b[:, 1] + x[:, 2] * b[:, 2]
    if np.any(area2 <= 0):
        raise FemError("degenerate or flipped triangle in assembly")
    area = 0.5 * area2

    n = mesh.n_nodes
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()

    ke = (
        b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]
    ) / (4.0 * area)[:, None, None]
    K = sparse.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    me_pattern = (np.ones((3, 3)) + np.eye(3)) / 12.0
    me = area[:, None, None] * me_pattern[None, :, :]
    M = sparse.coo_matrix((me.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    be = mesh.boundary_edges - mesh.n_interior  # boundary-local indices
    pa = pts[mesh.boundary_edges[:, 0]]
    pb = pts[mesh.boundary_edges[:, 1]]
    lengths = np.hypot(*(pb - pa).T)
    pat = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    mbe = lengths[:, None, None] * pat[None, :, :]
    rb = np.repeat(be, 2, axis=1).ravel()
    cb = np.tile(be, (1, 2)).ravel()
    Mb = sparse.coo_matrix(
        (mbe.ravel(), (rb, cb)), shape=(mesh.n_boundary, mesh.n_boundary)
    ).tocsr()

    return FemMatrices(
        stiffness=K,
        mass=M,
        boundary_mass=Mb,
        n_interior=mesh.n_interior,
        n_boundary=mesh.n_boundary,
    )


class InteriorFactor:
    """LU factorization of the unknown-block of A = p*M + K.

    ``partition_roles`` (optional, one role per boundary node: 0 = steklov,
    1 = dirichlet_zero, 2 = neumann_zero) moves neumann_zero nodes into the
    unknown set and eliminates dirichlet_zero nodes. With no partition every
    boundary node carries Dirichlet data. Immutable; solves are reusable and
    thread-safe.
    """

    def __init__(self, matrices: FemMatrices, p: float, partition_roles=None):
        if p < 0:
            raise FemError("p must be >= 0")
        self.p = float(p)
        n = matrices.n_nodes
        ni = matrices.n_interior
        roles = (
            np.zeros(matrices.n_boundary, dtype=np.int8)
            if partition_roles is None
            else np.asarray(partition_roles, dtype=np.int8)
        )
        if roles.shape != (matrices.n_boundary,):
            raise FemError("partition must assign one role per boundary node")
        self.roles = roles
        bidx = ni + np.arange(matrices.n_boundary)
        self.data_nodes = bidx[roles == 0]       # steklov: carries Dirichlet data
        self.zero_nodes = bidx[roles == 1]       # dirichlet_zero: eliminated
        unknown_b = bidx[roles == 2]             # neumann_zero: joins the unknowns
        self.unknown_nodes = np.concatenate([np.arange(ni), unknown_b])
        if len(self.data_nodes) == 0:
            raise FemError("partition needs at least one steklov node")

        A = (self.p * matrices.mass + matrices.stiffness).tocsr()
        self.a_uu = A[self.unknown_nodes][:, self.unknown_nodes].tocsc()
        self.a_us = A[self.unknown_nodes][:, self.data_nodes].tocsr()
        self.a_ss = A[self.data_nodes][:, self.data_nodes].toarray()
        self.n_nodes = n
        try:
            self.lu = splu(self.a_uu)
        except RuntimeError as exc:  # pragma: no cover - depends on bad input
            raise FemError(f"interior factorization failed: {exc}") from exc

    def solve_interior(self, rhs: np.ndarray) -> np.ndarray:
        return self.lu.solve(rhs)


def factor_interior(matrices: FemMatrices, p: float, partition_roles=None) -> InteriorFactor:
    return InteriorFactor(matrices, p, partition_roles)


def solve_dirichlet(
    matrices: FemMatrices, factor: InteriorFactor, p: float, f: np.ndarray
) -> np.ndarray:
    """Solve (p - Lap)u = 0 with u = f on the data nodes; returns all node values.

    The returned vector restricts to ``f`` exactly on the data nodes and to 0
    on eliminated (dirichlet_zero) nodes.
    """
    if factor.p != p:
        raise FemError(f"factor was built for p={factor.p}, got p={p}")
    f = np.asarray(f, dtype=float)
    single = f.ndim == 1
    fcols = f[:, None] if single else f
    if fcols.shape[0] != len(factor.data_nodes):
        raise FemError(
            f"boundary data has length {fcols.shape[0]}, expected {len(factor.data_nodes)}"
        )
    if not np.all(np.isfinite(fcols)):
        raise FemError("boundary data must be finite")
    u = np.zeros((factor.n_nodes, fcols.shape[1]))
    u[factor.data_nodes] = fcols
    rhs = -(factor.a_us @ fcols)
    u[factor.unknown_nodes] = factor.solve_interior(rhs)
    return u[:, 0] if single else u
