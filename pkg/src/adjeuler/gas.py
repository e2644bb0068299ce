"""Ideal-gas Euler building blocks: states, fluxes and their Jacobians.

All array functions act on conservative states stored in the last axis,
``W[..., 0:4] = (rho, rho*u, rho*v, rho*E)``, and broadcast over any
leading axes. Normals ``n`` are 2-vectors in the last axis and need not be
unit vectors; every flux and Jacobian is linear in ``n``.

The functions accept complex input so that derivatives can be taken by
the complex-step method (branches are decided on real parts).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_GAMMA = 1.4


class DomainError(ValueError):
    """Raised when a state is outside the physical domain (rho <= 0 ...)."""


@dataclass(frozen=True)
class GasModel:
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must be > 1, got {self.gamma}")


@dataclass(frozen=True)
class ConservativeState:
    """A single conservative state (rho, rho*u, rho*v, rho*E)."""

    rho: float
    mx: float
    my: float
    e: float

    @classmethod
    def from_array(cls, W) -> "ConservativeState":
        W = np.asarray(W, dtype=float)
        return cls(float(W[0]), float(W[1]), float(W[2]), float(W[3]))

    @classmethod
    def from_primitive(cls, rho, u, v, p, gamma=DEFAULT_GAMMA) -> "ConservativeState":
        return cls.from_array(primitive_to_conservative(rho, u, v, p, gamma))

    def as_array(self) -> np.ndarray:
        return np.array([self.rho, self.mx, self.my, self.e])

    @property
    def velocity(self):
        return self.mx / self.rho, self.my / self.rho

    def pressure(self, gamma=DEFAULT_GAMMA) -> float:
        return float(pressure(self.as_array(), gamma))

    def is_valid(self, gamma=DEFAULT_GAMMA) -> bool:
        if not self.rho > 0:
            return False
        return self.pressure(gamma) > 0


def _real(x):
    return np.real(x) if np.iscomplexobj(x) else x


def _cabs(x):
    """Absolute value that stays analytic for complex-step perturbations."""
    if np.iscomplexobj(x):
        return x * np.sign(x.real)
    return np.abs(x)


def _check_density(rho):
    if np.any(_real(rho) <= 0):
        raise DomainError("non-positive density")


def primitive_to_conservative(rho, u, v, p, gamma=DEFAULT_GAMMA):
    rho, u, v, p = np.broadcast_arrays(*(np.asarray(a) for a in (rho, u, v, p)))
    e = p / (gamma - 1.0) + 0.5 * rho * (u * u + v * v)
    return np.stack([rho, rho * u, rho * v, e], axis=-1)


def primitives(W, gamma=DEFAULT_GAMMA):
    """Return ``(rho, u, v, p)`` for states ``W``."""
    W = np.asarray(W)
    rho = W[..., 0]
    _check_density(rho)
    u = W[..., 1] / rho
    v = W[..., 2] / rho
    p = (gamma - 1.0) * (W[..., 3] - 0.5 * (W[..., 1] ** 2 + W[..., 2] ** 2) / rho)
    return rho, u, v, p


def pressure(W, gamma=DEFAULT_GAMMA):
    """p = (gamma-1) (rho*E - ((rho*u)^2 + (rho*v)^2) / (2 rho))."""
    return primitives(W, gamma)[3]


def sound_speed(W, gamma=DEFAULT_GAMMA):
    rho, _, _, p = primitives(W, gamma)
    return np.sqrt(gamma * p / rho)


def mach_number(W, gamma=DEFAULT_GAMMA):
    rho, u, v, p = primitives(W, gamma)
    return np.sqrt(u * u + v * v) / np.sqrt(gamma * p / rho)


def is_valid(W, gamma=DEFAULT_GAMMA):
    """Boolean mask of physically valid states (rho > 0 and p > 0)."""
    W = np.asarray(W)
    rho = _real(W[..., 0])
    ok = rho > 0
    safe = np.where(ok, rho, 1.0)
    p = (gamma - 1.0) * (_real(W[..., 3]) - 0.5 * (_real(W[..., 1]) ** 2 + _real(W[..., 2]) ** 2) / safe)
    return ok & (p > 0)


def pressure_jacobian(W, gamma=DEFAULT_GAMMA):
    """dp/dW = (gamma-1) (q^2/2, -u, -v, 1)."""
    _, u, v, _ = primitives(W, gamma)
    g1 = gamma - 1.0
    return g1 * np.stack([0.5 * (u * u + v * v), -u, -v, np.ones_like(u)], axis=-1)


def flux(W, gamma=DEFAULT_GAMMA):
    """Cartesian convective fluxes ``(F1, F2)``, each shaped like ``W``."""
    W = np.asarray(W)
    rho, u, v, p = primitives(W, gamma)
    e = W[..., 3]
    F1 = np.stack([W[..., 1], W[..., 1] * u + p, W[..., 1] * v, (e + p) * u], axis=-1)
    F2 = np.stack([W[..., 2], W[..., 2] * u, W[..., 2] * v + p, (e + p) * v], axis=-1)
    return F1, F2


def flux_normal(W, n, gamma=DEFAULT_GAMMA):
    """F(W) . n."""
    F1, F2 = flux(W, gamma)
    n = np.asarray(n)
    return F1 * n[..., 0:1] + F2 * n[..., 1:2]


def flux_jacobian_normal(W, n, gamma=DEFAULT_GAMMA):
    """A(W, n) = d(F(W).n)/dW as a ``(..., 4, 4)`` array."""
    W = np.asarray(W)
    n = np.asarray(n)
    _, u, v, p = primitives(W, gamma)
    E = W[..., 3] / W[..., 0]
    nx, ny = n[..., 0], n[..., 1]
    nx, ny, u, v = np.broadcast_arrays(nx, ny, u, v)
    g1 = gamma - 1.0
    q2 = u * u + v * v
    un = u * nx + v * ny
    H = p / W[..., 0] + E
    zero = np.zeros_like(un)
    A = np.stack(
        [
            np.stack([zero, nx + zero, ny + zero, zero], axis=-1),
            np.stack([0.5 * g1 * q2 * nx - u * un, un - (gamma - 2.0) * u * nx,
                      u * ny - g1 * v * nx, g1 * nx + zero], axis=-1),
            np.stack([0.5 * g1 * q2 * ny - v * un, v * nx - g1 * u * ny,
                      un - (gamma - 2.0) * v * ny, g1 * ny + zero], axis=-1),
            np.stack([(g1 * q2 - gamma * E) * un, H * nx - g1 * u * un,
                      H * ny - g1 * v * un, gamma * un], axis=-1),
        ],
        axis=-2,
    )
    return A


def eigen_decomposition(W, n, gamma=DEFAULT_GAMMA):
    """Right eigenvectors, eigenvalues and left eigenvectors of A(W, n).

    Returns ``(P, lam, Pinv)`` with ``A = P @ diag(lam) @ Pinv`` and
    ``lam = (u.n, u.n, u.n + c|n|, u.n - c|n|)``. For ``|n| = 0`` the
    eigenvalues vanish and a unit x-normal is used for the basis.
    """
    W = np.asarray(W)
    n = np.asarray(n, dtype=float)
    rho, u, v, p = primitives(W, gamma)
    c = np.sqrt(gamma * p / rho)
    s = np.hypot(n[..., 0], n[..., 1])
    s_safe = np.where(s > 0, s, 1.0)
    tx = np.where(s > 0, n[..., 0] / s_safe, 1.0)
    ty = np.where(s > 0, n[..., 1] / s_safe, 0.0)
    tx, ty, u, v, c = np.broadcast_arrays(tx, ty, u, v, c)
    s = np.broadcast_to(s, u.shape)
    g1 = gamma - 1.0
    q2 = u * u + v * v
    H = c * c / g1 + 0.5 * q2
    vn = u * tx + v * ty
    vt = v * tx - u * ty
    one = np.ones_like(u)
    zero = np.zeros_like(u)

    # columns: entropy, shear, acoustic +, acoustic -
    P = np.stack(
        [
            np.stack([one, zero, one, one], axis=-1),
            np.stack([u, -ty + zero, u + c * tx, u - c * tx], axis=-1),
            np.stack([v, tx + zero, v + c * ty, v - c * ty], axis=-1),
            np.stack([0.5 * q2, vt, H + c * vn, H - c * vn], axis=-1),
        ],
        axis=-2,
    )
    ic2 = 1.0 / (c * c)
    b = 0.5 * g1 * ic2
    Pinv = np.stack(
        [
            np.stack([1.0 - b * q2, g1 * u * ic2, g1 * v * ic2, -g1 * ic2], axis=-1),
            np.stack([-vt, -ty + zero, tx + zero, zero], axis=-1),
            np.stack([0.5 * (b * q2 - vn / c), 0.5 * (tx / c - g1 * u * ic2),
                      0.5 * (ty / c - g1 * v * ic2), b + zero], axis=-1),
            np.stack([0.5 * (b * q2 + vn / c), 0.5 * (-tx / c - g1 * u * ic2),
                      0.5 * (-ty / c - g1 * v * ic2), b + zero], axis=-1),
        ],
        axis=-2,
    )
    un = vn * s
    cs = c * s
    lam = np.stack([un, un, un + cs, un - cs], axis=-1)
    return P, lam, Pinv


def harten_abs(lam, eps):
    """|lam| with Harten's regularisation (lam^2 + eps^2) / (2 eps) below eps."""
    a = _cabs(lam)
    eps = np.broadcast_to(eps, np.shape(lam))
    small = _real(a) < _real(eps)
    if not np.any(small):
        return a
    eps_safe = np.where(small, eps, 1.0)
    return np.where(small, (lam * lam + eps_safe * eps_safe) / (2.0 * eps_safe), a)


def abs_jacobian(W, n, gamma=DEFAULT_GAMMA, entropy_eps=0.05):
    """|A| = P |Lambda| P^-1 for A = A(W, n).

    ``entropy_eps`` is relative: eigenvalues with modulus below
    ``entropy_eps * (|u.n| + c|n|)`` are replaced by Harten's parabola.
    Pass 0 for the plain absolute value.
    """
    P, lam, Pinv = eigen_decomposition(W, n, gamma)
    if entropy_eps:
        scale = _cabs(lam[..., 0]) + (lam[..., 2] - lam[..., 0])
        alam = harten_abs(lam, entropy_eps * scale[..., None])
    else:
        alam = _cabs(lam)
    return P @ (alam[..., :, None] * Pinv)


def split_jacobians(W, n, gamma=DEFAULT_GAMMA, entropy_eps=0.05, convention="standard"):
    """Steger-Warming split matrices ``(A_plus, A_minus)``.

    ``convention="standard"`` gives A+ = (A + |A|)/2, A- = (A - |A|)/2 so
    that A+ + A- = A. ``convention="negated"`` gives A- = (|A| - A)/2, for
    which A+ + A- = |A|; kept for comparison with that sign layout.
    """
    A = flux_jacobian_normal(W, n, gamma)
    absA = abs_jacobian(W, n, gamma, entropy_eps)
    Ap = 0.5 * (absA + A)
    if convention == "standard":
        Am = 0.5 * (A - absA)
    elif convention == "negated":
        Am = 0.5 * (absA - A)
    else:
        raise ValueError(f"unknown Steger-Warming convention {convention!r}")
    return Ap, Am


def roe_average(Wi, Wj, gamma=DEFAULT_GAMMA):
    """Roe-averaged conservative state of ``Wi`` and ``Wj``.

    sqrt(rho)-weighted velocity and total enthalpy, rho = sqrt(rho_i rho_j).
    Identical inputs are returned unchanged (bitwise).
    """
    Wi = np.asarray(Wi)
    Wj = np.asarray(Wj)
    ri, ui, vi, pi = primitives(Wi, gamma)
    rj, uj, vj, pj = primitives(Wj, gamma)
    if np.any(_real(pi) <= 0) or np.any(_real(pj) <= 0):
        raise DomainError("non-positive pressure in Roe average")
    si = np.sqrt(ri)
    sj = np.sqrt(rj)
    wi = si / (si + sj)
    wj = sj / (si + sj)
    Hi = (Wi[..., 3] + pi) / ri
    Hj = (Wj[..., 3] + pj) / rj
    rho = np.sqrt(ri * rj)
    u = wi * ui + wj * uj
    v = wi * vi + wj * vj
    H = wi * Hi + wj * Hj
    q2 = u * u + v * v
    # rho*E = rho*H - p with p = (g-1)/g * rho (H - q^2/2)
    p = (gamma - 1.0) / gamma * rho * (H - 0.5 * q2)
    Wt = np.stack([rho, rho * u, rho * v, rho * H - p], axis=-1)
    same = np.all(Wi == Wj, axis=-1, keepdims=True)
    if np.any(same):
        Wt = np.where(same, np.broadcast_to(Wi, Wt.shape), Wt)
    return Wt
