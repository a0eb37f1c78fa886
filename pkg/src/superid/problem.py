"""Discretized identification problems and the two reference configurations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .control import PwcControl, check_A2
from .fem import Mesh, assemble_consistent_mass, assemble_stiffness, build_mesh, lumped_mass_diagonal

#: Poincare-Friedrichs constant of the unit square (first Dirichlet eigenvalue).
POINCARE_CONSTANT = 2.0 * np.pi**2


@dataclass(eq=False)
class Problem:
    """All discrete data entering the reduced objective.

    ``f`` and ``y_d`` are nodal samples on ``mesh``; ``u_d`` lives on the
    control grid. The semilinear term always uses the lumped mass; the load
    vector, the tracking term and the level-set integrals of the adjoint use
    either the consistent or the lumped mass matrix.
    """

    mesh: Mesh
    r: float
    nu1: float
    nu2: float
    f: np.ndarray
    y_d: np.ndarray
    u_d: PwcControl
    # interior points per cell for p2 averages, or "exact" for closed-form cell integrals
    q: int | str = 5
    eps_p: float = 0.5 * POINCARE_CONSTANT
    name: str = "custom"
    u_exact: PwcControl | None = None
    load_mass: str = "consistent"
    tracking_mass: str = "consistent"
    level_set_mass: str = "consistent"
    stiffness: object = field(init=False, repr=False)
    mass: np.ndarray = field(init=False, repr=False)
    a_int: object = field(init=False, repr=False)
    load: np.ndarray = field(init=False, repr=False)
    tracking_matrix: object = field(init=False, repr=False)
    level_set_matrix: object = field(init=False, repr=False)

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r!r}")
        if not self.nu2 > 0:
            raise ValueError(f"nu2 must be positive, got {self.nu2!r}")
        if not self.nu1 >= 0:
            raise ValueError(f"nu1 must be nonnegative, got {self.nu1!r}")
        if not 0 < self.eps_p < POINCARE_CONSTANT:
            raise ValueError("eps_p must lie in (0, c_P)")
        if self.q != "exact" and (int(self.q) != self.q or self.q < 1):
            raise ValueError(f"q must be a positive integer or 'exact', got {self.q!r}")
        n = self.mesh.n_vertices
        self.f = np.asarray(self.f, dtype=float)
        self.y_d = np.asarray(self.y_d, dtype=float)
        for label, arr in (("f", self.f), ("y_d", self.y_d)):
            if arr.shape != (n,):
                raise ValueError(f"{label} has shape {arr.shape}, expected ({n},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{label} contains non-finite values")
        if not np.any(self.f[self.mesh.interior] != 0):
            raise ValueError("f must not be identically zero")
        if not np.isclose(self.u_d.r, self.r, rtol=0, atol=1e-14 * self.r):
            raise ValueError("u_d is defined on a different interval than (-r, r)")
        self.stiffness = assemble_stiffness(self.mesh)
        self.mass = lumped_mass_diagonal(self.mesh)
        idx = self.mesh.interior
        self.a_int = self.stiffness[idx][:, idx].tocsc()
        mats = {"lumped": sp.diags(self.mass, format="csr")}
        for label in ("load_mass", "tracking_mass", "level_set_mass"):
            choice = getattr(self, label)
            if choice not in ("lumped", "consistent"):
                raise ValueError(f"{label} must be 'lumped' or 'consistent', got {choice!r}")
            if choice == "consistent" and choice not in mats:
                mats[choice] = assemble_consistent_mass(self.mesh)
        self.load = mats[self.load_mass] @ self.f
        self.tracking_matrix = mats[self.tracking_mass]
        self.level_set_matrix = mats[self.level_set_mass]

    @property
    def n_cells(self):
        return self.u_d.n_cells

    @property
    def h_u(self):
        return self.u_d.h

    @property
    def interior(self):
        return self.mesh.interior

    def zero_control(self):
        return PwcControl.constant(self.r, self.n_cells, 0.0)

    def control(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_cells,):
            raise ValueError(f"expected {self.n_cells} cell values, got shape {values.shape}")
        return PwcControl(self.r, values)

    def check_A2(self, threshold=0.1):
        return check_A2(self.f[self.interior], threshold=threshold)

    @classmethod
    def from_functions(cls, n_y, n_u, r, nu1, nu2, f, y_d, u_d=0.0, **kwargs):
        """Sample closed-form data. ``f``/``y_d`` take ``(x1, x2)``, ``u_d`` takes ``s``."""
        mesh = build_mesh(n_y)
        return cls(
            mesh=mesh,
            r=r,
            nu1=nu1,
            nu2=nu2,
            f=mesh.sample(f),
            y_d=mesh.sample(y_d),
            u_d=cell_average(u_d, r, n_u),
            **kwargs,
        )


def cell_average(func, r, n_cells, order=8):
    """Cell averages of ``func`` on the control grid (constants are exact)."""
    if int(n_cells) != n_cells or n_cells < 1:
        raise ValueError(f"n_cells must be a positive integer, got {n_cells!r}")
    n_cells = int(n_cells)
    if np.isscalar(func):
        return PwcControl.constant(r, n_cells, float(func))
    nodes, weights = np.polynomial.legendre.leggauss(order)
    h = 2.0 * r / n_cells
    left = -r + h * np.arange(n_cells)
    pts = left[:, None] + 0.5 * h * (nodes[None, :] + 1.0)
    vals = np.asarray(func(pts), dtype=float).reshape(pts.shape)
    return PwcControl(r, 0.5 * vals @ weights)


def cells_for_width(r, h_u):
    n = 2.0 * r / h_u
    if abs(n - round(n)) > 1e-9 * n:
        raise ValueError(f"control width {h_u} does not divide (-{r}, {r})")
    return int(round(n))


def _sinsin(x1, x2):
    return np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2)


def example1(n_y=32, n_u=None, q=5, **kwargs):
    """Known solution u = 1; ``n_u`` defaults to cells of width 1/n_y."""
    r = 3.0
    n_u = cells_for_width(r, 1.0 / n_y) if n_u is None else n_u
    return Problem.from_functions(
        n_y,
        n_u,
        r=r,
        nu1=kwargs.pop("nu1", 0.0),
        nu2=kwargs.pop("nu2", 1e-3),
        f=lambda x1, x2: (8 * np.pi**2 + 1) * _sinsin(x1, x2),
        y_d=_sinsin,
        u_d=1.0,
        q=q,
        name="example1",
        u_exact=PwcControl.constant(r, n_u, 1.0),
        **kwargs,
    )


EXAMPLE2_NU1 = (0.0, 1 / 4096, 1 / 2048, 1 / 1024, 1 / 512, 1 / 256, 1 / 128)


def example2(n_y=32, n_u=None, nu1=1 / 1024, q=10, **kwargs):
    r = 2.0
    n_u = cells_for_width(r, 1.0 / n_y) if n_u is None else n_u
    return Problem.from_functions(
        n_y,
        n_u,
        r=r,
        nu1=nu1,
        nu2=kwargs.pop("nu2", 1e-4),
        f=lambda x1, x2: 8 * np.pi**2 * _sinsin(x1, x2),
        y_d=lambda x1, x2: -0.125 + 0.275 * _sinsin(x1, x2),
        u_d=0.0,
        q=q,
        name="example2",
        **kwargs,
    )


PRESETS = {"example1": example1, "example2": example2}
