"""Semismooth Newton solver for the state equation and the Poisson bound r_P."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .control import compose_u_of_y, g_u_field
from .fem import LinearSolver, SolverError


@dataclass(frozen=True)
class NewtonSettings:
    tol: float = 1e-12
    max_iters: int = 50
    linear_tol: float = 1e-12
    linear_method: str = "direct"
    reuse_factorization: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("Newton tolerance must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class StateResult:
    y: np.ndarray
    iterations: int
    residual: float
    # Jacobian factorization of the last Newton step and its coefficient,
    # reusable by the adjoint solve when the coefficient is unchanged.
    solver: LinearSolver | None = None
    coefficient: np.ndarray | None = None
    # most recent factorization of any nearby Jacobian, for preconditioning
    reference: LinearSolver | None = None


def _scatter(problem, interior_values):
    y = np.zeros(problem.mesh.n_vertices)
    y[problem.interior] = interior_values
    return y


def state_residual(u, y, problem):
    """``A y + M g_u(y) - b`` on interior nodes, ``b`` the load vector of ``f``."""
    idx = problem.interior
    m = problem.mass[idx]
    return problem.a_int @ y[idx] + m * g_u_field(u, y[idx]) - problem.load[idx]


def jacobian(problem, coefficient):
    idx = problem.interior
    return (problem.a_int + sp.diags(problem.mass[idx] * coefficient)).tocsr()


def jacobian_solver(problem, coefficient, settings):
    return LinearSolver(
        jacobian(problem, coefficient), tol=settings.linear_tol, method=settings.linear_method
    )


def _newton(u, problem, settings, y0, reference=None):
    idx = problem.interior
    m = problem.mass[idx]
    b = problem.load[idx]
    y = np.zeros(idx.size) if y0 is None else np.array(y0[idx], dtype=float)
    solver = coeff = None
    res_norm = np.inf
    for k in range(settings.max_iters + 1):
        res = problem.a_int @ y + m * g_u_field(u, y) - b
        res_norm = float(np.max(np.abs(res))) if res.size else 0.0
        if res_norm <= settings.tol:
            return StateResult(_scatter(problem, y), k, res_norm, solver, coeff, reference)
        if k == settings.max_iters:
            break
        coeff = compose_u_of_y(u, y)
        step = None
        if reference is not None and settings.reuse_factorization:
            step = reference.solve_nearby(jacobian(problem, coeff), res)
        if step is None:
            solver = jacobian_solver(problem, coeff, settings)
            reference = solver
            step = solver.solve(res)
        else:
            # factorization belongs to another coefficient; not reusable as-is
            solver = None
        y = y - step
    raise SolverError(
        f"semismooth Newton did not converge in {settings.max_iters} steps "
        f"(residual {res_norm:.3e})",
        residual=res_norm,
        iteration=settings.max_iters,
    )


def newton_solve(u, problem, settings=None, warm_start=None, reference=None):
    """Full Newton solve returning a :class:`StateResult`.

    ``reference`` is a factorized :class:`LinearSolver` of a nearby Jacobian;
    Newton steps first try CG preconditioned with it before refactorizing.
    A failed warm-started solve is retried once from ``y = 0``.
    """
    settings = settings or NewtonSettings()
    if u.n_cells != problem.n_cells or u.r != problem.r:
        raise ValueError("control grid does not match the problem")
    if not u.in_admissible_set(problem.eps_p):
        raise ValueError(f"control below -eps_P = {-problem.eps_p:g} is not admissible")
    if warm_start is not None:
        try:
            return _newton(u, problem, settings, warm_start, reference)
        except SolverError:
            pass
    return _newton(u, problem, settings, None, reference)


def solve_state(u, problem, settings=None, warm_start=None):
    return newton_solve(u, problem, settings, warm_start).y


def solve_poisson(problem, settings=None):
    """Discrete ``-Lap y_P = f`` and ``r_P = 2 max |y_P|``."""
    settings = settings or NewtonSettings()
    idx = problem.interior
    solver = LinearSolver(problem.a_int, tol=settings.linear_tol, method=settings.linear_method)
    y_p = _scatter(problem, solver.solve(problem.load[idx]))
    return y_p, 2.0 * float(np.max(np.abs(y_p)))


def check_supnorm_bound(u, y, r_p, slack=0.0):
    """``max |y| <= r_P (1 + slack)``; returns ``(ok, max|y|)``."""
    if not u.is_nonnegative():
        raise ValueError("the a-priori bound only holds for nonnegative controls")
    sup = float(np.max(np.abs(y)))
    return sup <= r_p * (1.0 + slack), sup


def h1_seminorm(problem, v):
    return float(np.sqrt(max(v @ (problem.stiffness @ v), 0.0)))


def h1_norm(problem, v):
    return float(np.sqrt(max(v @ (problem.stiffness @ v) + v @ (problem.mass * v), 0.0)))
