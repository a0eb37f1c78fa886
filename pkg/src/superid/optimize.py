"""Stationarity measures and the gradient projection method with Armijo-type backtracking."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .adjoint import compute_p2, gradient_from_state, objective, solve_adjoint_p1
from .fem import SolverError
from .state import NewtonSettings, newton_solve

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimSettings:
    sigma: float = 512.0
    omega: float = 0.8
    theta: float = 0.8
    eps1: float = 1e-16
    eps2: float = 1e-8
    tau_floor: float = 1e-10
    max_outer: int = 500

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0 < self.omega < 1:
            raise ValueError("omega must lie in (0, 1)")
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        if not self.eps1 > 0:
            raise ValueError("eps1 must be positive")
        if not self.eps2 >= 0:
            raise ValueError("eps2 must be nonnegative")
        if not self.tau_floor >= 0:
            raise ValueError("tau_floor must be nonnegative")
        if self.max_outer < 0:
            raise ValueError("max_outer must be nonnegative")

    @property
    def max_trials(self):
        """Upper bound on backtracking trials before the step falls below ``tau_floor``."""
        if self.tau_floor <= 0:
            return None
        return max(0, math.floor(math.log(self.tau_floor / self.sigma) / math.log(self.omega))) + 1


def theta_eps(u, g, eps):
    """Relaxed stationarity measure; ``u`` and ``g`` are controls on one grid."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    gv = g.values
    integrand = np.minimum(u.values / eps, gv) * gv
    return math.sqrt(max(u.h * float(np.sum(integrand)), 0.0))


def theta_zero(u, g):
    gv = g.values
    active = u.values > 0
    v = np.where(active, gv, np.minimum(0.0, gv))
    return math.sqrt(u.h * float(v @ v))


def project(values):
    return np.maximum(0.0, values)


@dataclass
class IterationRecord:
    i: int
    objective: float
    theta: float
    tau: float
    ls_trials: int
    newton_iters: int


@dataclass
class RunReport:
    records: list = field(default_factory=list)
    control: object = None
    state: np.ndarray | None = None
    objective: float = math.nan
    breakdown: object = None
    theta: float = math.nan
    gradient: object = None
    p1: np.ndarray | None = None
    termination: str = ""
    iterations: int = 0
    # (F_i, F_{i+1}, tau_i, Theta_i) for each accepted step
    accepted_steps: list = field(default_factory=list)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["i", "F_r", "theta", "tau", "ls_trials", "newton_iters"])
        for rec in self.records:
            writer.writerow(
                [rec.i, repr(rec.objective), repr(rec.theta), repr(rec.tau), rec.ls_trials, rec.newton_iters]
            )
        return buf.getvalue()

    def summary(self):
        return {
            "objective": self.objective,
            "theta": self.theta,
            "iterations": self.iterations,
            "termination": self.termination,
        }


def gradient_projection(u0, problem, settings=None, newton=None, callback=None):
    """Run the gradient projection method from ``u0 >= 0``.

    Stops when the relaxed stationarity measure drops to ``eps2``
    (``"converged"``), when backtracking would go below ``tau_floor``
    (``"tau_floor"``), or after ``max_outer`` iterations (``"max_outer"``).
    """
    settings = settings or OptimSettings()
    newton = newton or NewtonSettings()
    if not u0.is_nonnegative():
        raise ValueError("initial control must be nonnegative")

    report = RunReport()
    u = u0
    try:
        state = newton_solve(u, problem, newton)
    except SolverError as exc:
        exc.iteration = 0
        raise
    F, parts = objective(u, state.y, problem)
    newton_count = state.iterations

    i = 0
    while True:
        grad = gradient_from_state(u, state, problem, newton)
        g = grad.gradient
        theta = theta_eps(u, g, settings.eps1)
        report.control, report.state, report.objective = u, state.y, F
        report.breakdown, report.theta, report.gradient, report.p1 = parts, theta, g, grad.p1
        report.iterations = i

        if theta <= settings.eps2:
            report.termination = "converged"
            report.records.append(IterationRecord(i, F, theta, math.nan, 0, newton_count))
            break
        if i >= settings.max_outer:
            report.termination = "max_outer"
            report.records.append(IterationRecord(i, F, theta, math.nan, 0, newton_count))
            break

        step = settings.sigma
        trials = 0
        accepted = None
        while step >= settings.tau_floor:
            trials += 1
            trial_u = u.with_values(project(u.values - step * g.values))
            try:
                trial_state = newton_solve(
                    trial_u, problem, newton, warm_start=state.y, reference=state.reference
                )
            except SolverError as exc:
                exc.iteration = i
                raise
            trial_F, trial_parts = objective(trial_u, trial_state.y, problem)
            newton_count += trial_state.iterations
            if F - trial_F - step * settings.theta * theta**2 >= 0:
                accepted = (trial_u, trial_state, trial_F, trial_parts)
                break
            step *= settings.omega

        report.records.append(IterationRecord(i, F, theta, step if accepted else math.nan, trials, newton_count))
        if accepted is None:
            report.termination = "tau_floor"
            break

        new_u, state, new_F, parts = accepted
        report.accepted_steps.append((F, new_F, step, theta))
        logger.debug("iter %d: F=%.6e theta=%.3e tau=%.3e trials=%d", i, F, theta, step, trials)
        if callback is not None:
            callback(i, new_u, new_F, theta, step)
        u, F = new_u, new_F
        newton_count = 0
        i += 1
    return report


def verify_stationarity_system(u, problem, newton=None, q=None, state=None):
    """Residual of the projection formula ``u = max(0, u_D + (p2 - nu1)/nu2)`` in L2(-r, r).

    Returns a dict with the residual and both stationarity measures.
    """
    newton = newton or NewtonSettings()
    if state is None:
        state = newton_solve(u, problem, newton)
    p1 = solve_adjoint_p1(u, state.y, problem, newton, state=state)
    p2 = compute_p2(p1, state.y, problem, q)
    target = project(problem.u_d.values + (p2 - problem.nu1) / problem.nu2)
    residual = math.sqrt(u.h * float(np.sum((u.values - target) ** 2)))
    g = u.with_values(-p2 + problem.nu1 + problem.nu2 * (u.values - problem.u_d.values))
    return {
        "residual": residual,
        "theta_zero": theta_zero(u, g),
        "theta_eps": theta_eps(u, g, 1e-16),
        "control_norm": u.l2_norm(),
    }
