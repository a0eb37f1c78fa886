"""Piecewise-constant controls on (-r, r) and the superposition g_u."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PwcControl:
    """Control constant on each of ``N_u`` equal cells of (-r, r).

    Outside of [-r, r] the control is extended by zero.
    """

    r: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, ndmin=1)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("values must be a non-empty 1d array")
        if not np.all(np.isfinite(vals)):
            raise ValueError("control values must be finite")
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r!r}")
        vals.setflags(write=False)
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, r, n_cells, value=0.0):
        return cls(r, np.full(n_cells, float(value)))

    @property
    def n_cells(self):
        return self.values.size

    @property
    def h(self):
        return 2.0 * self.r / self.n_cells

    @property
    def breakpoints(self):
        return -self.r + self.h * np.arange(self.n_cells + 1)

    @property
    def midpoints(self):
        return -self.r + self.h * (np.arange(self.n_cells) + 0.5)

    def with_values(self, values):
        return PwcControl(self.r, values)

    def l2_norm(self):
        return float(np.sqrt(self.h * np.sum(self.values**2)))

    def is_nonnegative(self):
        return bool(np.all(self.values >= 0))

    def in_admissible_set(self, eps_p):
        """Membership in the set of controls bounded below by ``-eps_p``."""
        return bool(np.all(self.values >= -eps_p))

    def _cumulative(self):
        return np.concatenate([[0.0], np.cumsum(self.values * self.h)])


def g_u_eval(u, t):
    """``g_u(t) = int_0^t u(s) ds`` for the zero extension of ``u``; exact."""
    t = np.asarray(t, dtype=float)
    knots = u.breakpoints
    cum = u._cumulative()
    # np.interp clamps outside the grid, which is exactly the zero extension
    return np.interp(t, knots, cum) - np.interp(0.0, knots, cum)


def g_u_field(u, y):
    return g_u_eval(u, y)


def cell_index(u, t):
    """Index of the cell whose half-open interval [x_k, x_{k+1}) contains ``t``; -1 outside."""
    t = np.asarray(t, dtype=float)
    k = np.searchsorted(u.breakpoints, t, side="right") - 1
    return np.where((k >= 0) & (k < u.n_cells), k, -1)


def compose_u_of_y(u, y):
    """Right-continuous representative of ``u`` evaluated at ``y``, zero outside [-r, r)."""
    k = cell_index(u, y)
    return np.where(k >= 0, u.values[np.maximum(k, 0)], 0.0)


def quadrature_points(r, n_cells, q):
    """Points ``(n-1) h - r + j h / (Q+1)``, shape ``(n_cells, q)``."""
    if int(q) != q or q < 1:
        raise ValueError(f"Q must be a positive integer, got {q!r}")
    h = 2.0 * r / n_cells
    left = -r + h * np.arange(n_cells)
    offsets = h * np.arange(1, int(q) + 1) / (int(q) + 1)
    return left[:, None] + offsets[None, :]


def project_onto_pwc(v, r, n_cells, q):
    """Cell averages of the callable ``v`` by the Q-point interior rule."""
    pts = quadrature_points(r, n_cells, q)
    vals = np.asarray(v(pts.ravel()), dtype=float).reshape(pts.shape)
    avg = vals.mean(axis=1)
    # keep constant cells bit-exact so the projection is idempotent
    flat = np.all(vals == vals[:, :1], axis=1)
    return PwcControl(r, np.where(flat, vals[:, 0], avg))


def check_A2(f, threshold=0.05, atol=0.0):
    """Discrete surrogate of the level-set condition on ``f``.

    Returns ``(ok, report)``; ``report["max_fraction"]`` is the largest share
    of nodes that carry one common value of ``f``. Warns above ``threshold``.
    """
    f = np.asarray(f, dtype=float)
    if f.size == 0:
        raise ValueError("empty field")
    vals = np.sort(f)
    if atol > 0:
        vals = np.round(vals / atol) * atol
    _, counts = np.unique(vals, return_counts=True)
    idx = int(np.argmax(counts))
    frac = counts[idx] / f.size
    ok = frac <= threshold
    report = {
        "max_fraction": float(frac),
        "value": float(np.unique(vals)[idx]),
        "threshold": threshold,
    }
    if not ok:
        warnings.warn(
            f"{frac:.1%} of the nodes share the value {report['value']:g}; "
            "f may have a level set of positive measure",
            stacklevel=2,
        )
    return ok, report


def format_control(u):
    parts = [repr(u.r), str(u.n_cells)] + [repr(float(v)) for v in u.values]
    return " ".join(parts) + "\n"


def parse_control(text):
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("control text needs 'r N_u v_1 ... v_N'")
    r = float(tokens[0])
    n = int(tokens[1])
    if len(tokens) != n + 2:
        raise ValueError(f"expected {n} cell values, found {len(tokens) - 2}")
    return PwcControl(r, np.array(tokens[2:], dtype=float))


def write_control(path, u):
    with open(path, "w") as fh:
        fh.write(format_control(u))


def read_control(path):
    with open(path) as fh:
        return parse_control(fh.read())
