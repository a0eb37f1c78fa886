"""Run configurations, single runs and parameter sweeps with flat-file output."""

from __future__ import annotations

import configparser
import csv
import io
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .control import read_control, write_control
from .fem import SolverError, build_mesh, read_nodal_field, write_nodal_field
from .optimize import OptimSettings, gradient_projection, verify_stationarity_system
from .problem import PRESETS, Problem, cell_average, cells_for_width
from .state import NewtonSettings, solve_poisson

#: Exit codes of ``run`` keyed by termination reason.
EXIT_CODES = {"converged": 0, "tau_floor": 0, "stalled": 3, "max_outer": 4, "solver_failure": 5}

PRESET_DEFAULTS = {
    "example1": {"r": 3.0, "nu1": 0.0, "nu2": 1e-3, "q": 5, "sigma": 512.0},
    "example2": {"r": 2.0, "nu1": 1 / 1024, "nu2": 1e-4, "q": 10, "sigma": 2048.0},
}


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


@dataclass
class RunConfig:
    preset: str = "example1"
    n_y: int = 32
    # inverse control width 1/h_u; defaults to n_y
    n_u: int | None = None
    n_cells: int | None = None
    nu1: float | None = None
    nu2: float | None = None
    q: int | None = None
    eps1: float = 1e-16
    eps2: float = 1e-8
    sigma: float | None = None
    omega: float = 0.8
    theta: float = 0.8
    tau_floor: float = 1e-10
    max_outer: int = 500
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    mass: str = "consistent"
    out: str | None = None
    # custom problems only
    r: float | None = None
    f_file: str | None = None
    y_d_file: str | None = None
    u_d_file: str | None = None
    # sweeps
    sweep_ny: list = field(default_factory=list)
    sweep_nu: list = field(default_factory=list)
    sweep_nu1: list = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.preset not in (*PRESETS, "custom"):
            raise ConfigError(f"preset: unknown preset {self.preset!r}")
        for name in ("n_y", "max_outer", "newton_max_iter"):
            val = getattr(self, name)
            if not isinstance(val, (int, np.integer)) or val < (0 if name == "max_outer" else 1):
                raise ConfigError(f"{name}: expected a positive integer, got {val!r}")
        for name in ("n_u", "n_cells", "q"):
            val = getattr(self, name)
            if val is not None and (not isinstance(val, (int, np.integer)) or val < 1):
                raise ConfigError(f"{name}: expected a positive integer, got {val!r}")
        if self.nu2 is not None and not self.nu2 > 0:
            raise ConfigError(f"nu2: must be positive, got {self.nu2!r}")
        if self.nu1 is not None and not self.nu1 >= 0:
            raise ConfigError(f"nu1: must be nonnegative, got {self.nu1!r}")
        if self.mass not in ("lumped", "consistent"):
            raise ConfigError(f"mass: expected 'lumped' or 'consistent', got {self.mass!r}")
        try:
            self.optim_settings()
            NewtonSettings(tol=self.newton_tol, max_iters=self.newton_max_iter)
        except ValueError as exc:
            raise ConfigError(f"optimizer: {exc}") from None
        if self.preset == "custom":
            missing = [k for k in ("r", "f_file", "y_d_file", "nu1", "nu2") if getattr(self, k) is None]
            if missing:
                raise ConfigError(f"{missing[0]}: required for custom problems")
        for name in ("sweep_ny", "sweep_nu"):
            for v in getattr(self, name):
                if not isinstance(v, (int, np.integer)) or v < 1:
                    raise ConfigError(f"{name}: expected positive integers, got {v!r}")

    def defaults(self):
        return PRESET_DEFAULTS.get(self.preset, {"nu1": 0.0, "nu2": 1e-3, "q": 5, "sigma": 512.0})

    def resolved(self, name):
        val = getattr(self, name)
        return self.defaults()[name] if val is None else val

    def optim_settings(self):
        return OptimSettings(
            sigma=self.resolved("sigma"),
            omega=self.omega,
            theta=self.theta,
            eps1=self.eps1,
            eps2=self.eps2,
            tau_floor=self.tau_floor,
            max_outer=self.max_outer,
        )

    def newton_settings(self):
        return NewtonSettings(tol=self.newton_tol, max_iters=self.newton_max_iter)


_LIST_KEYS = {"sweep_ny": int, "sweep_nu": int, "sweep_nu1": float}


def _coerce(name, text):
    types = {f.name: f.type for f in fields(RunConfig)}
    if name not in types:
        raise ConfigError(f"{name}: unknown key")
    if name in _LIST_KEYS:
        conv = _LIST_KEYS[name]
        try:
            return [conv(_fraction(t) if conv is float else t) for t in text.replace(",", " ").split()]
        except ValueError:
            raise ConfigError(f"{name}: cannot parse list {text!r}") from None
    kind = types[name]
    try:
        if "int" in kind:
            return int(text)
        if "float" in kind:
            return _fraction(text)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r}") from None
    return text


def _fraction(text):
    """Parse ``"1/1024"`` as well as plain floats."""
    text = str(text).strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def load_config(path_or_text, **overrides):
    """Read a sectioned key-value config; section names are ignored for lookup."""
    parser = configparser.ConfigParser()
    text = str(path_or_text)
    if "\n" not in text and Path(text).exists():
        text = Path(text).read_text()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from None
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            key = key.replace("-", "_")
            values[key] = _coerce(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def build_problem(config, n_y=None, n_u=None, nu1=None):
    n_y = config.n_y if n_y is None else n_y
    masses = dict(load_mass=config.mass, tracking_mass=config.mass, level_set_mass=config.mass)
    nu1 = config.resolved("nu1") if nu1 is None else nu1
    q = config.resolved("q")
    nu2 = config.resolved("nu2")
    if config.preset == "custom":
        return _custom_problem(config, n_y, n_u, nu1, nu2, q, masses)
    r = PRESET_DEFAULTS[config.preset]["r"]
    n_cells = _n_cells(config, r, n_y, n_u)
    factory = PRESETS[config.preset]
    kwargs = dict(q=q, nu1=nu1, nu2=nu2, **masses)
    return factory(n_y, n_cells, **kwargs)


def _n_cells(config, r, n_y, n_u):
    if n_u is None and config.n_cells is not None:
        return config.n_cells
    inv = n_u if n_u is not None else (config.n_u or n_y)
    return cells_for_width(r, 1.0 / inv)


def _custom_problem(config, n_y, n_u, nu1, nu2, q, masses):
    mesh = build_mesh(n_y)
    arrays = {}
    for key in ("f_file", "y_d_file"):
        try:
            coords, vals = read_nodal_field(getattr(config, key))
        except OSError as exc:
            raise ConfigError(f"{key}: {exc}") from None
        if coords.shape != mesh.vertices.shape or not np.allclose(coords, mesh.vertices, atol=1e-12):
            raise ConfigError(f"{key}: nodes do not match a mesh with n_y = {n_y}")
        arrays[key] = vals
    n_cells = _n_cells(config, config.r, n_y, n_u)
    if config.u_d_file:
        u_d = read_control(config.u_d_file)
        if u_d.n_cells != n_cells or u_d.r != config.r:
            raise ConfigError("u_d_file: control grid does not match r and the cell count")
    else:
        u_d = cell_average(0.0, config.r, n_cells)
    try:
        return Problem(
            mesh=mesh,
            r=config.r,
            nu1=nu1,
            nu2=nu2,
            f=arrays["f_file"],
            y_d=arrays["y_d_file"],
            u_d=u_d,
            q=q,
            **masses,
        )
    except ValueError as exc:
        raise ConfigError(f"f_file: {exc}" if "f must" in str(exc) else str(exc)) from None


@dataclass
class RunResult:
    config: RunConfig
    problem: Problem
    report: object
    summary: dict
    exit_code: int


def _linf_error(problem, report):
    if problem.u_exact is None or report.control is None:
        return math.nan
    return float(np.max(np.abs(report.control.values - problem.u_exact.values)))


def summarize(problem, report, config, r_p):
    stat = verify_stationarity_system(report.control, problem, config.newton_settings())
    parts = report.breakdown
    summary = {
        "preset": problem.name,
        "n_y": problem.mesh.n_y,
        "n_cells": problem.n_cells,
        "h_u": problem.h_u,
        "nu1": problem.nu1,
        "nu2": problem.nu2,
        "q": problem.q,
        "r_P": r_p,
        "objective": report.objective,
        "tracking": parts.tracking,
        "l1_term": parts.l1,
        "l2_term": parts.l2,
        "theta": report.theta,
        "theta_zero": stat["theta_zero"],
        "iterations": report.iterations,
        "termination": report.termination,
        "stationarity_residual": stat["residual"],
        "control_l2": stat["control_norm"],
        "support_measure": float(problem.h_u * np.count_nonzero(report.control.values > 0)),
        "linf_error": _linf_error(problem, report),
    }
    return summary


def format_summary(summary):
    lines = []
    for key, val in summary.items():
        lines.append(f"{key} = {val!r}" if isinstance(val, float) else f"{key} = {val}")
    return "\n".join(lines) + "\n"


def parse_summary(text):
    out = {}
    for line in text.splitlines():
        if "=" not in line:
            continue
        key, val = (s.strip() for s in line.split("=", 1))
        for conv in (int, float):
            try:
                out[key] = conv(val)
                break
            except ValueError:
                continue
        else:
            out[key] = val
    return out


def _exit_code(report, config):
    if report.termination == "tau_floor" and config.eps2 > 0:
        return EXIT_CODES["stalled"]
    return EXIT_CODES[report.termination]


def run_single(config, out=None):
    """Run one configuration; write ``history.csv``, ``control.txt``, ``state.txt``, ``summary.txt``."""
    out = out if out is not None else config.out
    problem = build_problem(config)
    _, r_p = solve_poisson(problem, config.newton_settings())
    report = gradient_projection(
        problem.zero_control(), problem, config.optim_settings(), config.newton_settings()
    )
    summary = summarize(problem, report, config, r_p)
    result = RunResult(config, problem, report, summary, _exit_code(report, config))
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "history.csv").write_text(report.to_csv())
        write_control(out / "control.txt", report.control)
        write_nodal_field(out / "state.txt", problem.mesh, report.state)
        (out / "summary.txt").write_text(format_summary(summary))
    return result


def _fmt(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def format_table(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row.get(h, "")) for h in header])
    return buf.getvalue()


def _cell_run(config, **kw):
    try:
        problem = build_problem(config, **kw)
        report = gradient_projection(
            problem.zero_control(), problem, config.optim_settings(), config.newton_settings()
        )
    except SolverError:
        return None, None
    return problem, report


def run_sweep(config, out=None):
    """Sweep over mesh widths, a (n_y, n_u) grid, or nu1 values.

    Returns ``(header, rows)``; non-converged grid cells carry ``inf``
    iteration counts. Writes ``table.csv`` when an output directory is given.
    """
    out = out if out is not None else config.out
    if config.sweep_nu1:
        header, rows = _sweep_nu1(config)
    elif config.sweep_ny and config.sweep_nu:
        header, rows = _sweep_grid(config)
    else:
        header, rows = _sweep_widths(config)
    if out:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "table.csv").write_text(format_table(header, rows))
    return header, rows


def _sweep_widths(config):
    header = ["n_y", "n_u", "objective", "theta", "linf_error", "error_ratio", "iterations", "termination"]
    rows = []
    prev = None
    for n in config.sweep_ny:
        problem, report = _cell_run(config, n_y=n, n_u=n)
        if report is None:
            rows.append({"n_y": n, "n_u": n, "objective": math.inf, "theta": math.inf,
                         "linf_error": math.inf, "error_ratio": math.nan,
                         "iterations": math.inf, "termination": "solver_failure"})
            prev = None
            continue
        err = _linf_error(problem, report)
        ratio = prev / err if prev is not None and err > 0 else math.nan
        rows.append({
            "n_y": n,
            "n_u": n,
            "objective": report.objective,
            "theta": report.theta,
            "linf_error": err,
            "error_ratio": ratio,
            "iterations": report.iterations,
            "termination": report.termination,
        })
        prev = err
    return header, rows


def _iterations_or_inf(report):
    if report is None or report.termination != "converged":
        return math.inf
    return report.iterations


def _sweep_grid(config):
    header = ["n_y", "n_u", "iterations", "objective", "theta", "termination"]
    rows = []
    for n_y in config.sweep_ny:
        for n_u in config.sweep_nu:
            _, report = _cell_run(config, n_y=n_y, n_u=n_u)
            rows.append({
                "n_y": n_y,
                "n_u": n_u,
                "iterations": _iterations_or_inf(report),
                "objective": math.inf if report is None else report.objective,
                "theta": math.inf if report is None else report.theta,
                "termination": "solver_failure" if report is None else report.termination,
            })
    return header, rows


def _sweep_nu1(config):
    header = ["nu1", "support_measure", "objective", "tracking", "l1_term", "l2_term",
              "theta", "iterations", "termination"]
    rows = []
    for nu1 in config.sweep_nu1:
        problem, report = _cell_run(config, nu1=nu1)
        if report is None:
            rows.append({"nu1": nu1, "iterations": math.inf, "termination": "solver_failure"})
            continue
        parts = report.breakdown
        rows.append({
            "nu1": nu1,
            "support_measure": float(problem.h_u * np.count_nonzero(report.control.values > 0)),
            "objective": report.objective,
            "tracking": parts.tracking,
            "l1_term": parts.l1,
            "l2_term": parts.l2,
            "theta": report.theta,
            "iterations": _iterations_or_inf(report),
            "termination": report.termination,
        })
    return header, rows


def with_overrides(config, **kw):
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
