"""Reduced objective, adjoint state, and the L2-gradient with respect to the control."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .control import PwcControl, compose_u_of_y, g_u_field, quadrature_points
from .fem import LinearSolver
from .state import NewtonSettings, StateResult, jacobian, jacobian_solver, newton_solve


@dataclass(frozen=True)
class ObjectiveBreakdown:
    tracking: float
    l1: float
    l2: float

    @property
    def total(self):
        return self.tracking + self.l1 + self.l2


def objective(u, y, problem):
    """Value of the reduced objective at ``u`` with state ``y``; returns ``(F, breakdown)``."""
    diff = y - problem.y_d
    tracking = 0.5 * float(diff @ (problem.tracking_matrix @ diff))
    h = u.h
    l1 = problem.nu1 * h * float(np.sum(u.values))
    l2 = 0.5 * problem.nu2 * h * float(np.sum((u.values - problem.u_d.values) ** 2))
    parts = ObjectiveBreakdown(tracking, l1, l2)
    return parts.total, parts


def solve_adjoint_p1(u, y, problem, settings=None, state=None):
    """Solve ``(A + M diag(u(y))) p1 = M (y - y_D)`` with ``p1 = 0`` on the boundary.

    ``state`` may carry the final Newton factorization; it is reused when
    its coefficient matches ``u(y)``.
    """
    settings = settings or NewtonSettings()
    idx = problem.interior
    coeff = compose_u_of_y(u, y[idx])
    rhs = (problem.tracking_matrix @ (y - problem.y_d))[idx]
    p1 = np.zeros(problem.mesh.n_vertices)
    if state is not None and state.solver is not None and np.array_equal(state.coefficient, coeff):
        p1[idx] = state.solver.solve(rhs)
        return p1
    x = None
    if state is not None and state.reference is not None and settings.reuse_factorization:
        x = state.reference.solve_nearby(jacobian(problem, coeff), rhs)
    if x is None:
        x = jacobian_solver(problem, coeff, settings).solve(rhs)
    p1[idx] = x
    return p1


class LevelSetIntegrator:
    """Mass-lumped integrals of ``w = M p1`` over super/sub-level sets of ``y``.

    ``p2(s) = sum_i w_i [y_i >= s]`` for ``s >= 0`` and
    ``-sum_i w_i [y_i <= s]`` for ``s < 0``.
    """

    def __init__(self, p1, y, mass):
        order = np.argsort(y, kind="stable")
        self.y = np.asarray(y, dtype=float)[order]
        self.w = (mass @ p1)[order]
        self.cw = np.concatenate([[0.0], np.cumsum(self.w)])
        self.cwy = np.concatenate([[0.0], np.cumsum(self.w * self.y)])
        self.total = self.cw[-1]

    def p2(self, s):
        s = np.asarray(s, dtype=float)
        # number of nodes with y < s, and with y <= s
        below = np.searchsorted(self.y, s, side="left")
        at_or_below = np.searchsorted(self.y, s, side="right")
        upper = self.total - self.cw[below]
        lower = -self.cw[at_or_below]
        return np.where(s >= 0, upper, lower)

    def clipped_sum(self, a):
        """``sum_i w_i min(y_i, a)`` for an array of thresholds ``a``."""
        k = np.searchsorted(self.y, a, side="left")
        return self.cwy[k] + a * (self.total - self.cw[k])

    def cell_integrals(self, breakpoints):
        """Exact ``int p2 ds`` over each cell ``[x_k, x_{k+1}]``.

        Uses ``int_a^b p2 = sum_i w_i (clip(y_i, a, b) - clip(0, a, b))``.
        """
        a, b = breakpoints[:-1], breakpoints[1:]
        # clip(y, a, b) = min(y, b) - min(y, a) + a
        s_b = self.clipped_sum(b)
        s_a = self.clipped_sum(a)
        clip_sum = s_b - s_a + a * self.total
        return clip_sum - self.total * np.clip(0.0, a, b)


def compute_p2(p1, y, problem, q=None):
    """Cell averages of ``p2`` on the control grid.

    ``q`` is the number of interior quadrature points per cell (defaults to
    ``problem.q``); ``q="exact"`` integrates the piecewise-constant ``p2``
    in closed form, which makes the gradient the exact derivative of the
    discrete objective.
    """
    q = problem.q if q is None else q
    lev = LevelSetIntegrator(p1, y, problem.level_set_matrix)
    if q == "exact":
        grid = problem.u_d.breakpoints
        return lev.cell_integrals(grid) / problem.h_u
    pts = quadrature_points(problem.r, problem.n_cells, q)
    return lev.p2(pts).mean(axis=1)


@dataclass
class GradientResult:
    gradient: PwcControl
    p1: np.ndarray
    p2: np.ndarray
    state: StateResult


def gradient_from_state(u, state, problem, settings=None, q=None):
    p1 = solve_adjoint_p1(u, state.y, problem, settings, state=state)
    p2 = compute_p2(p1, state.y, problem, q)
    g = -p2 + problem.nu1 + problem.nu2 * (u.values - problem.u_d.values)
    return GradientResult(u.with_values(g), p1, p2, state)


def l2_gradient(u, problem, settings=None, q=None, warm_start=None):
    """L2-gradient of the reduced objective as a control on the same grid."""
    state = newton_solve(u, problem, settings, warm_start)
    return gradient_from_state(u, state, problem, settings, q).gradient


def sensitivity(u, y, z, problem, settings=None):
    """Directional derivative of the state: ``(A + M u(y)) d = -M g_z(y)``."""
    settings = settings or NewtonSettings()
    idx = problem.interior
    coeff = compose_u_of_y(u, y[idx])
    J = problem.a_int + sp.diags(problem.mass[idx] * coeff)
    rhs = -problem.mass[idx] * g_u_field(z, y[idx])
    d = np.zeros(problem.mesh.n_vertices)
    d[idx] = LinearSolver(J, tol=settings.linear_tol, method=settings.linear_method).solve(rhs)
    return d
