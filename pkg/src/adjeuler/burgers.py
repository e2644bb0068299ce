"""Inviscid Burgers' equation: upwind conservative scheme and its exact
discrete adjoint.

The forward scheme on nodes ``x_0 .. x_n`` is

    u_i^{m+1} = u_i^m - dt/(2 dx) [ s_i (u_i^2 - u_{i-1}^2)
                                   + (1 - s_{i+1}) (u_{i+1}^2 - u_i^2) ]

with ``s_i = 1`` iff ``u_i + u_{i-1} > 0``. End nodes keep their initial
values. The adjoint recursion is the transpose of the scheme linearised
with the switches frozen, so adjoint gradients equal derivatives of the
discrete functional up to rounding.

Regions are half-open intervals ``(lo, hi]`` over node positions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)


class CFLError(RuntimeError):
    def __init__(self, node, courant):
        super().__init__(f"CFL violated at node {node}: dt*|u|/dx = {courant:.4g} > 1")
        self.node = node
        self.courant = courant


class StructureError(ValueError):
    pass


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n: int
    dt: float
    n_steps: int

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n + 1)

    @property
    def T(self) -> float:
        return self.dt * self.n_steps

    @classmethod
    def for_profile(cls, u0, x_min, x_max, n, T, cfl=0.4) -> "Grid1D":
        """Grid whose step satisfies ``dt max|u0| = cfl dx`` (rounded so
        that an integer number of steps reaches ``T``)."""
        dx = (x_max - x_min) / n
        x = np.linspace(x_min, x_max, n + 1)
        umax = float(np.max(np.abs(_sample(u0, x))))
        if umax == 0.0:
            umax = 1.0
        n_steps = max(1, math.ceil(T / (cfl * dx / umax) - 1e-12))
        return cls(float(x_min), float(x_max), int(n), T / n_steps, n_steps)


def _sample(u0, x):
    v = np.asarray(u0(x) if callable(u0) else u0)
    return v.astype(complex if np.iscomplexobj(v) else float)


@dataclass(frozen=True)
class BurgersTrajectory:
    grid: Grid1D
    states: np.ndarray      # (n_steps + 1, n + 1)
    switches: np.ndarray    # (n_steps, n + 1); entry i is s_i, entry 0 unused

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def region_mask(x, region) -> np.ndarray:
    lo, hi = region
    return (x > lo) & (x <= hi)


def burgers_step(u_prev, grid: Grid1D):
    """One step of the upwind scheme. Returns ``(u_next, switches)``.

    Complex input is accepted (switches and CFL use the real part), so a
    complex-step perturbation yields the frozen-switch derivative.
    """
    u = np.asarray(u_prev)
    if not np.iscomplexobj(u):
        u = u.astype(float)
    r = grid.dt / grid.dx
    courant = r * np.abs(u.real)
    worst = int(np.argmax(courant))
    if courant[worst] > 1.0:
        raise CFLError(worst, float(courant[worst]))
    s = np.zeros(u.shape, dtype=np.int8)
    s[1:] = (u[1:].real + u[:-1].real) > 0
    f = 0.5 * u * u
    un = u.copy()
    si = s[1:-1]
    sn = s[2:]
    un[1:-1] = u[1:-1] - r * (si * (f[1:-1] - f[:-2]) + (1 - sn) * (f[2:] - f[1:-1]))
    return un, s


def run_forward(u0, grid: Grid1D) -> BurgersTrajectory:
    u = _sample(u0, grid.x)
    states = np.empty((grid.n_steps + 1, grid.n + 1), dtype=u.dtype)
    switches = np.empty((grid.n_steps, grid.n + 1), dtype=np.int8)
    states[0] = u
    for m in range(grid.n_steps):
        u, s = burgers_step(u, grid)
        states[m + 1] = u
        switches[m] = s
    return BurgersTrajectory(grid, states, switches)


def functional_J(traj: BurgersTrajectory, region=(0.0, math.inf)) -> float:
    """``1/2 sum_{x_i in region} (u_i^M)^2 dx``."""
    m = region_mask(traj.grid.x, region)
    if not np.any(m):
        logger.warning("empty region %s, functional is 0", region)
        return 0.0
    uT = traj.final
    val = 0.5 * np.sum(uT[m] ** 2) * traj.grid.dx
    return complex(val) if np.iscomplexobj(val) else float(val)


def time_average_J(traj: BurgersTrajectory, region=(-math.inf, math.inf)) -> float:
    """``1/(2T) sum_m sum_i (u_i^m)^2 dx dt`` over steps m = 1..M."""
    g = traj.grid
    m = region_mask(g.x, region)
    return 0.5 * float(np.sum(traj.states[1:, m] ** 2)) * g.dx * g.dt / g.T


def _adjoint_step(p, u, s, r):
    """Transpose of the frozen-switch linearised step about ``u``."""
    q = p.copy()
    si = s[1:-1]
    sn = s[2:]
    ui = u[1:-1]
    pi = p[1:-1]
    # column contributions of interior rows i = 1..n-1
    q[1:-1] -= r * ui * (si - (1 - sn)) * pi
    q[:-2] += r * si * u[:-2] * pi
    q[2:] -= r * (1 - sn) * u[2:] * pi
    return q


def burgers_adjoint(traj: BurgersTrajectory, region=(0.0, math.inf), kind="terminal"):
    """Backward sweep; returns adjoint states ``P`` with ``P[m]`` in duality
    with ``u^m``.

    ``kind="terminal"`` starts from ``P[M] = u^M`` on the region (zero
    elsewhere); ``kind="time_average"`` adds the source of
    :func:`time_average_J` at each step. Gradients are ``dx * <P[0], du0>``.
    """
    if traj.switches is None or len(traj.switches) != traj.grid.n_steps:
        raise StructureError("trajectory lacks the stored upwind switches")
    g = traj.grid
    r = g.dt / g.dx
    mask = region_mask(g.x, region)
    M = g.n_steps
    P = np.zeros_like(traj.states)
    if kind == "terminal":
        P[M] = np.where(mask, traj.final, 0.0)
    elif kind == "time_average":
        P[M] = np.where(mask, traj.final, 0.0) * g.dt / g.T
    else:
        raise ValueError(f"unknown functional kind {kind!r}")
    for m in range(M - 1, -1, -1):
        P[m] = _adjoint_step(P[m + 1], traj.states[m], traj.switches[m], r)
        if kind == "time_average" and m > 0:
            P[m] += np.where(mask, traj.states[m], 0.0) * g.dt / g.T
    return P


def tangent_linear(traj: BurgersTrajectory, du0) -> np.ndarray:
    """Forward sensitivity with frozen switches; returns ``du^M``."""
    g = traj.grid
    r = g.dt / g.dx
    d = np.array(_sample(du0, g.x))
    for m in range(g.n_steps):
        u = traj.states[m]
        s = traj.switches[m]
        si, sn = s[1:-1], s[2:]
        nd = d.copy()
        nd[1:-1] = d[1:-1] - r * (si * (u[1:-1] * d[1:-1] - u[:-2] * d[:-2])
                                  + (1 - sn) * (u[2:] * d[2:] - u[1:-1] * d[1:-1]))
        d = nd
    return d


def gradient_J(traj: BurgersTrajectory, adjoint, du0_da) -> float:
    """``dx * sum_i P_i^0 du0_i``: derivative of the functional along ``du0``."""
    g = traj.grid
    d = _sample(du0_da, g.x)
    if d.shape != adjoint[0].shape:
        raise StructureError(f"sensitivity has shape {d.shape}, expected {adjoint[0].shape}")
    return float(np.dot(adjoint[0], d)) * g.dx


# ---------------------------------------------------------------------------
# standard cases

def atan_initial(a=0.0) -> Callable:
    """u(x, 0) = -min(atan(x + a), 0)."""
    return lambda x: -np.minimum(np.arctan(np.asarray(x) + a), 0.0)


def atan_initial_da(a=0.0) -> Callable:
    return lambda x: np.where(np.asarray(x) + a < 0, -1.0 / (1.0 + (np.asarray(x) + a) ** 2), 0.0)


def riemann_initial(a=0.0) -> Callable:
    """u(x, 0) = (1 + a)(1 - H(x))."""
    return lambda x: (1.0 + a) * (np.asarray(x) < 0)


def riemann_initial_da(a=0.0) -> Callable:
    return lambda x: (np.asarray(x) < 0).astype(float)


def riemann_exact_J(a, T, region=(-0.5, 0.5)) -> float:
    """Exact ``1/2 int_region u(x,T)^2`` for the Riemann data."""
    lo, hi = region
    xs = (1.0 + a) * T / 2.0
    return 0.5 * (1.0 + a) ** 2 * max(0.0, min(xs, hi) - lo)


@dataclass
class GradientStudy:
    J: float
    gradient: float
    fd_gradient: float
    fd_step: float
    trajectory: BurgersTrajectory
    adjoint: np.ndarray


def gradient_study(u0_of_a, du0_da_of_a, grid: Grid1D, region, a=0.0, fd_step=0.01):
    """J, adjoint gradient and one-sided FD gradient for a family ``u0(a)``."""
    traj = run_forward(u0_of_a(a), grid)
    P = burgers_adjoint(traj, region)
    J = functional_J(traj, region)
    g = gradient_J(traj, P, du0_da_of_a(a))
    J1 = functional_J(run_forward(u0_of_a(a + fd_step), grid), region)
    return GradientStudy(J, g, (J1 - J) / fd_step, fd_step, traj, P)


def fd_plateau(func, a=0.0, steps=(1e-4, 1e-5, 1e-6, 1e-7)):
    """Central differences over a decreasing step sweep.

    Returns the smaller-step member of the adjacent pair that agrees best
    (truncation shrinks along the sweep until rounding takes over), along
    with all estimates.
    """
    vals = np.array([(func(a + h) - func(a - h)) / (2 * h) for h in steps])
    if len(vals) < 2:
        return float(vals[-1]), vals
    k = int(np.argmin(np.abs(np.diff(vals))))
    return float(vals[k + 1]), vals


# ---------------------------------------------------------------------------
# closed-form adjoints for the Riemann data

def analytic_adjoint_oracle(case_id, x, t, T, a=0.0, region=(-0.5, 0.5)):
    """Continuous adjoint u*(x, t) for u(x,0) = (1+a)(1-H(x)).

    ``riemann_decay``: functional ``1/2 int_region u(T)^2``; u* is constant
    along characteristics (slope 1+a left of the shock, 0 right of it) and
    equals the shock-line value in the shadow region.
    ``stationary_average``: functional ``1/(2T) int int u^2``; u* solves
    ``d_t u* + mean(u) d_x u* = -mean(u)/T`` with ``u*(T) = 0``.
    """
    x = np.asarray(x, dtype=float)
    c = 1.0 + a
    shock = lambda s: 0.5 * c * s  # noqa: E731
    lo, hi = region
    left = x < shock(t)
    right = x > shock(t)
    out = np.empty_like(x)
    if case_id == "riemann_decay":
        xs_T = shock(T)
        in_region = lambda y: (y > lo) & (y <= hi)  # noqa: E731
        shock_value = 0.5 * c * float(in_region(np.array(xs_T)))
        # left: reaches t = T before the shock?
        xT = x + c * (T - t)
        reach = left & (xT < xs_T)
        out[:] = shock_value
        out[reach] = c * in_region(xT[reach])
        out[right & (x > xs_T)] = 0.0
        return out if out.ndim else float(out)
    if case_id == "stationary_average":
        # along the shock: d/dt u* = -(c/2)/T
        def on_shock(th):
            return 0.5 * c * (T - th) / T
        out[:] = 0.5 * c * (T - t) / T
        # left characteristic x + c (s - t) meets the shock c s / 2 at s
        th_left = np.where(left, 2.0 * (c * t - x) / c, 0.0)
        hit = left & (th_left < T)
        free = left & ~hit
        out[free] = c * (T - t) / T
        out[hit] = c * (th_left[hit] - t) / T + on_shock(th_left[hit])
        th_right = np.where(right, 2.0 * x / c, 0.0)
        hitr = right & (th_right < T)
        out[right & ~hitr] = 0.0
        out[hitr] = on_shock(th_right[hitr])
        return out if out.ndim else float(out)
    raise ValueError(f"unknown analytic case {case_id!r}")


def write_csv(path, traj: BurgersTrajectory, adjoint, du_da=None):
    """Columns x, u_T, u_star_0, u_star_T, du_da."""
    x = traj.grid.x
    if du_da is None:
        du_da = np.full_like(x, np.nan)
    cols = np.column_stack([x, traj.final, adjoint[0], adjoint[-1], du_da])
    np.savetxt(path, cols, delimiter=",", header="x,u_T,u_star_0,u_star_T,du_da",
               comments="", fmt="%.17g")
