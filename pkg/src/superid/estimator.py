"""Scikit-learn style front end for the identification of g_u."""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .adjoint import objective
from .control import PwcControl, compose_u_of_y, g_u_eval
from .optimize import OptimSettings, gradient_projection, verify_stationarity_system
from .problem import Problem
from .state import NewtonSettings, solve_state


def _check_problem(problem):
    if not isinstance(problem, Problem):
        raise TypeError(f"expected a Problem instance, got {type(problem).__name__}")
    return problem


def _check_points(X):
    arr = check_array(X, ensure_2d=False, dtype=float, input_name="X")
    if arr.ndim == 2 and arr.shape[1] != 1:
        raise ValueError(f"X must be 1d or a single column, got shape {arr.shape}")
    return arr


class SuperpositionIdentifier(BaseEstimator):
    """Identify the monotone nonlinearity ``g_u`` by gradient projection.

    ``fit`` takes a :class:`~superid.problem.Problem` and runs the projected
    gradient method from ``u0`` (zero by default). After fitting,
    ``predict(t)`` evaluates the identified ``g_u(t)`` and
    ``derivative(t)`` the control ``u(t)`` itself.

    Parameters
    ----------
    sigma, omega, theta : float
        Initial trial step, backtracking factor and sufficient-decrease factor.
    eps1, eps2 : float
        Relaxation of the stationarity measure and termination tolerance.
    tau_floor : float
        The run stops once backtracking would go below this step size.
    max_outer : int
        Cap on gradient projection iterations.
    newton_tol, newton_max_iter : float, int
        Semismooth Newton settings for every state solve.
    warm_start : bool
        Start from the control of the previous ``fit`` when the grids agree.

    Attributes
    ----------
    control_ : PwcControl
    state_ : ndarray of nodal state values
    report_ : RunReport
    n_iter_ : int
    objective_, theta_ : float
    termination_ : str
    """

    def __init__(
        self,
        sigma=512.0,
        omega=0.8,
        theta=0.8,
        eps1=1e-16,
        eps2=1e-8,
        tau_floor=1e-10,
        max_outer=500,
        newton_tol=1e-12,
        newton_max_iter=50,
        warm_start=False,
    ):
        self.sigma = sigma
        self.omega = omega
        self.theta = theta
        self.eps1 = eps1
        self.eps2 = eps2
        self.tau_floor = tau_floor
        self.max_outer = max_outer
        self.newton_tol = newton_tol
        self.newton_max_iter = newton_max_iter
        self.warm_start = warm_start

    def _settings(self):
        optim = OptimSettings(
            sigma=self.sigma,
            omega=self.omega,
            theta=self.theta,
            eps1=self.eps1,
            eps2=self.eps2,
            tau_floor=self.tau_floor,
            max_outer=self.max_outer,
        )
        newton = NewtonSettings(tol=self.newton_tol, max_iters=self.newton_max_iter)
        return optim, newton

    def fit(self, problem, u0=None):
        problem = _check_problem(problem)
        optim, newton = self._settings()
        if u0 is None:
            prev = getattr(self, "control_", None)
            if self.warm_start and prev is not None and prev.n_cells == problem.n_cells and prev.r == problem.r:
                u0 = prev
            else:
                u0 = problem.zero_control()
        elif not isinstance(u0, PwcControl):
            u0 = problem.control(u0)
        report = gradient_projection(u0, problem, optim, newton)
        self.problem_ = problem
        self.report_ = report
        self.control_ = report.control
        self.state_ = report.state
        self.n_iter_ = report.iterations
        self.objective_ = report.objective
        self.theta_ = report.theta
        self.termination_ = report.termination
        return self

    def predict(self, X):
        """``g_u`` of the identified control at the points ``X``."""
        check_is_fitted(self, "control_")
        X = _check_points(X)
        return g_u_eval(self.control_, X.ravel()).reshape(X.shape[0])

    def derivative(self, X):
        check_is_fitted(self, "control_")
        X = _check_points(X)
        return compose_u_of_y(self.control_, X.ravel()).reshape(X.shape[0])

    def score(self, problem=None):
        """Negative reduced objective of the fitted control on ``problem``."""
        check_is_fitted(self, "control_")
        if problem is None:
            return -self.objective_
        problem = _check_problem(problem)
        _, newton = self._settings()
        y = solve_state(self.control_, problem, newton)
        return -objective(self.control_, y, problem)[0]

    def stationarity(self):
        check_is_fitted(self, "control_")
        _, newton = self._settings()
        return verify_stationarity_system(self.control_, self.problem_, newton)
