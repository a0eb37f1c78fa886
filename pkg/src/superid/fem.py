"""P1 finite elements on Friedrichs-Keller triangulations of the unit square."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg, splu


class SolverError(RuntimeError):
    """Raised when a linear or nonlinear solve does not reach its tolerance."""

    def __init__(self, message, residual=None, iteration=None):
        super().__init__(message)
        self.residual = residual
        self.iteration = iteration


@dataclass(frozen=True)
class Mesh:
    """Uniform triangulation of (0,1)^2, each square cut along its SW-NE diagonal.

    Vertex ``k = row * (n_y + 1) + col`` sits at ``(col * h, row * h)``.
    """

    n_y: int
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_mask: np.ndarray
    interior: np.ndarray = field(repr=False)

    @property
    def h(self):
        return 1.0 / self.n_y

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    def signed_areas(self):
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def sample(self, func):
        """Nodal interpolant of ``func(x1, x2)``."""
        x1, x2 = self.vertices[:, 0], self.vertices[:, 1]
        return np.asarray(np.broadcast_to(func(x1, x2), x1.shape), dtype=float).copy()


def build_mesh(n_y):
    if isinstance(n_y, bool) or int(n_y) != n_y or n_y < 1:
        raise ValueError(f"n_y must be a positive integer, got {n_y!r}")
    n = int(n_y)
    h = 1.0 / n
    idx = np.arange(n + 1)
    rows, cols = np.meshgrid(idx, idx, indexing="ij")
    rows, cols = rows.ravel(), cols.ravel()
    vertices = np.column_stack([cols * h, rows * h])
    # exact endpoints, no 1/n * n roundoff
    vertices[cols == n, 0] = 1.0
    vertices[rows == n, 1] = 1.0

    r, c = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    sw = (r * (n + 1) + c).ravel()
    se = sw + 1
    nw = sw + n + 1
    ne = nw + 1
    lower = np.column_stack([sw, se, ne])
    upper = np.column_stack([sw, ne, nw])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    boundary = (rows == 0) | (rows == n) | (cols == 0) | (cols == n)
    return Mesh(
        n_y=n,
        vertices=vertices,
        triangles=triangles,
        boundary_mask=boundary,
        interior=np.flatnonzero(~boundary),
    )


def _p1_gradients(mesh):
    p = mesh.vertices[mesh.triangles]
    area = mesh.signed_areas()
    # gradient of barycentric coordinate k is rot90(opposite edge) / (2 area)
    grads = np.empty((len(area), 3, 2))
    for k in range(3):
        a = p[:, (k + 1) % 3]
        b = p[:, (k + 2) % 3]
        grads[:, k, 0] = (a[:, 1] - b[:, 1]) / (2 * area)
        grads[:, k, 1] = (b[:, 0] - a[:, 0]) / (2 * area)
    return grads, area


def assemble_stiffness(mesh):
    """Matrix of ``(grad phi_i, grad phi_j)`` over all vertices (no boundary conditions)."""
    grads, area = _p1_gradients(mesh)
    local = np.einsum("tid,tjd->tij", grads, grads) * area[:, None, None]
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_vertices
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


def lumped_mass_diagonal(mesh):
    area = mesh.signed_areas()
    diag = np.zeros(mesh.n_vertices)
    np.add.at(diag, mesh.triangles.ravel(), np.repeat(area / 3.0, 3))
    return diag


def assemble_consistent_mass(mesh):
    """Matrix of ``(phi_i, phi_j)`` over all vertices."""
    area = mesh.signed_areas()
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = area[:, None, None] * ref[None]
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_vertices
    M = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M.sum_duplicates()
    return M


def assemble_lumped_mass(mesh):
    return sp.diags(lumped_mass_diagonal(mesh), format="csr")


class LinearSolver:
    """Direct (sparse LU) or Jacobi-preconditioned CG solve of an SPD system.

    The factorization is kept so repeated right-hand sides are cheap.
    """

    def __init__(self, matrix, tol=1e-12, method="direct", maxiter=None):
        if tol <= 0:
            raise ValueError("tol must be positive")
        if method not in ("direct", "cg"):
            raise ValueError(f"unknown method {method!r}")
        self.matrix = sp.csc_matrix(matrix)
        self.tol = tol
        self.method = method
        self.maxiter = maxiter
        self._lu = None
        if method == "direct" and self.matrix.shape[0] > 0:
            self._lu = splu(self.matrix, permc_spec="MMD_AT_PLUS_A")

    def _tolerance(self, rhs):
        return self.tol * (1.0 + np.linalg.norm(rhs))

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.size == 0:
            return rhs.copy()
        bound = self._tolerance(rhs)
        if self._lu is not None:
            x = self._lu.solve(rhs)
            res = rhs - self.matrix @ x
            # one step of iterative refinement usually brings res to roundoff
            for _ in range(3):
                if np.linalg.norm(res) <= bound:
                    return x
                x += self._lu.solve(res)
                res = rhs - self.matrix @ x
        else:
            d = self.matrix.diagonal()
            precond = sp.diags(1.0 / d)
            maxiter = self.maxiter or 10 * self.matrix.shape[0]
            rtol = bound / max(np.linalg.norm(rhs), np.finfo(float).tiny)
            x, _ = cg(self.matrix, rhs, rtol=min(rtol, 0.5), atol=0.0, M=precond, maxiter=maxiter)
            res = rhs - self.matrix @ x
        rnorm = np.linalg.norm(res)
        if rnorm > bound:
            raise SolverError(
                f"linear solve stalled: residual {rnorm:.3e} > {bound:.3e}", residual=rnorm
            )
        return x


    def solve_nearby(self, matrix, rhs, maxiter=12):
        """Solve a system with a nearby SPD ``matrix`` by CG preconditioned with this factorization.

        Returns ``None`` when CG does not reach the tolerance within ``maxiter`` steps.
        """
        if self._lu is None:
            return None
        rhs = np.asarray(rhs, dtype=float)
        if rhs.size == 0:
            return rhs.copy()
        bound = self._tolerance(rhs)
        n = rhs.size
        precond = LinearOperator((n, n), matvec=self._lu.solve, dtype=float)
        rtol = bound / max(np.linalg.norm(rhs), np.finfo(float).tiny)
        x0 = self._lu.solve(rhs)
        x, info = cg(matrix, rhs, x0=x0, rtol=min(rtol, 0.5), atol=0.0, M=precond, maxiter=maxiter)
        if info != 0:
            return None
        if np.linalg.norm(rhs - matrix @ x) > bound:
            return None
        return x


def solve_dirichlet(A_int, rhs, tol=1e-12, mesh=None, method="direct"):
    """Solve ``A_int x = rhs`` on interior nodes.

    With ``mesh`` given, the result is scattered into a full nodal vector that
    is zero on the boundary.
    """
    x = LinearSolver(A_int, tol=tol, method=method).solve(rhs)
    if mesh is None:
        return x
    full = np.zeros(mesh.n_vertices)
    full[mesh.interior] = x
    return full


def write_nodal_field(path, mesh, values):
    """One line ``x y value`` per vertex."""
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.n_vertices,):
        raise ValueError("field length does not match vertex count")
    data = np.column_stack([mesh.vertices, values])
    np.savetxt(path, data, fmt="%.17g")


def read_nodal_field(path):
    data = np.loadtxt(path, ndmin=2)
    return data[:, :2], data[:, 2]
