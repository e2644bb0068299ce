"""Edge-based finite-volume solver for the 2D Euler equations.

Conventions
-----------
The residual of vertex ``i`` is the sum of its outgoing fluxes,

    R_i = sum_j Phi(W_ij, W_ji, n_ij) + boundary fluxes,

and the semi-discrete system is ``|C_i| dW_i/dt = -R_i``. The flux of an
interior edge is computed once and added to ``i``, subtracted from ``j``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import gas
from .gas import GasModel
from .mesh import BoundaryTag, Mesh2D

log = logging.getLogger(__name__)

_SLIP = (int(BoundaryTag.SLIP_WALL), int(BoundaryTag.GROUND))
_INFLOW = int(BoundaryTag.INFLOW_FREESTREAM)
_OUTFLOW = int(BoundaryTag.OUTFLOW_FREE)

LIMITERS = ("dervieux3", "minmod", "vanalbada", "none")


class InvalidStateError(gas.DomainError):
    """Non-physical state; ``where`` names the vertex or edge."""

    def __init__(self, msg, vertex=None, edge=None):
        super().__init__(msg)
        self.vertex = vertex
        self.edge = edge


class ConvergenceError(RuntimeError):
    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


@dataclass(frozen=True)
class Freestream:
    mach: float = 2.0
    angle: float = 0.0          # degrees
    rho: float = 1.0
    p: float = 1.0 / 1.4

    def primitive(self, gamma=1.4):
        c = math.sqrt(gamma * self.p / self.rho)
        a = math.radians(self.angle)
        return self.rho, self.mach * c * math.cos(a), self.mach * c * math.sin(a), self.p

    def state(self, gamma=1.4) -> np.ndarray:
        return gas.primitive_to_conservative(*self.primitive(gamma), gamma=gamma)


@dataclass(frozen=True)
class SolverConfig:
    gas: GasModel = field(default_factory=GasModel)
    freestream: Freestream = field(default_factory=Freestream)
    cfl: float = 0.8
    muscl: bool = True
    limiter: str = "dervieux3"
    entropy_eps: float = 0.05
    steger_convention: str = "standard"
    implicit: bool = True
    cfl_max: float = 1e4
    cfl_growth: float = 2.0
    convergence_tol: float = 1e-8
    max_steps: int = 400
    jacobian: str = "frozen"         # frozen | exact
    linear_solver: str = "gmres"     # gmres | direct
    linear_tol: float = 1e-8
    gmres_restart: int = 60
    gmres_maxiter: int = 500

    def __post_init__(self):
        if self.limiter not in LIMITERS:
            raise ValueError(f"unknown limiter {self.limiter!r}")
        if not self.implicit and not 0.0 < self.cfl <= 1.0:
            raise ValueError("explicit CFL must lie in (0, 1]")
        if self.cfl <= 0:
            raise ValueError("CFL must be positive")
        if self.jacobian not in ("frozen", "exact"):
            raise ValueError(f"unknown jacobian mode {self.jacobian!r}")
        if self.linear_solver not in ("gmres", "direct"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")

    @property
    def gamma(self) -> float:
        return self.gas.gamma

    def w_inf(self) -> np.ndarray:
        return self.freestream.state(self.gamma)


def freestream_field(mesh: Mesh2D, config: SolverConfig) -> np.ndarray:
    return np.tile(config.w_inf(), (mesh.n_vertices, 1))


def validate_field(W, gamma=1.4):
    W = np.asarray(W)
    bad = ~gas.is_valid(W, gamma)
    if np.any(bad):
        k = int(np.nonzero(bad)[0][0])
        raise InvalidStateError(f"invalid state at vertex {k}: {np.real(W[k]).tolist()}", vertex=k)
    return W


# ---------------------------------------------------------------------------
# fluxes

def _canonical(n):
    flip = (n[..., 0] < 0) | ((n[..., 0] == 0) & (n[..., 1] < 0))
    return np.where(flip[..., None], -n, n)


def roe_dissipation_matrix(Wi, Wj, n, gamma=1.4, entropy_eps=0.05):
    """|A(Roe(Wi, Wj), n)|, evaluated with a canonical orientation of ``n``."""
    Wr = gas.roe_average(Wi, Wj, gamma)
    return gas.abs_jacobian(Wr, _canonical(np.asarray(n, dtype=float)), gamma, entropy_eps)


def roe_flux(Wi, Wj, n, config: SolverConfig | None = None, absA=None):
    """Roe flux  (F(Wi) + F(Wj)).n / 2 + |A~| (Wi - Wj) / 2  (batched)."""
    cfg = config or SolverConfig()
    g = cfg.gamma
    if absA is None:
        absA = roe_dissipation_matrix(Wi, Wj, n, g, cfg.entropy_eps)
    Fc = gas.flux_normal(Wi, n, g) + gas.flux_normal(Wj, n, g)
    return 0.5 * Fc + 0.5 * np.einsum("...ij,...j->...i", absA, Wi - Wj)


def slip_flux(W, n, gamma=1.4):
    p = gas.pressure(W, gamma)
    out = np.zeros(np.broadcast_shapes(np.shape(W), np.shape(n)[:-1] + (4,)), dtype=np.result_type(W, float))
    out[..., 1] = p * n[..., 0]
    out[..., 2] = p * n[..., 1]
    return out


def inflow_flux(W, n, w_inf, gamma=1.4, convention="standard", split=None):
    """Steger-Warming free-stream flux A+(W, n) W + A-(W, n) W_inf."""
    Ap, Am = split if split is not None else gas.split_jacobians(W, n, gamma, 0.0, convention)
    return np.einsum("...ij,...j->...i", Ap, W) + np.einsum("...ij,...j->...i", Am, w_inf)


def boundary_flux(W, n, tag, config: SolverConfig):
    """Flux through a boundary half-edge with integrated outward normal ``n``."""
    tag = int(BoundaryTag.parse(tag))
    g = config.gamma
    if tag in _SLIP:
        return slip_flux(W, n, g)
    if tag == _INFLOW:
        return inflow_flux(W, n, config.w_inf(), g, config.steger_convention)
    if tag == _OUTFLOW:
        return gas.flux_normal(W, n, g)
    raise ValueError(f"unknown boundary tag {tag}")


def _boundary_fluxes(W, mesh, config, split=None):
    """Per half-edge boundary fluxes (vectorised over tags)."""
    g = config.gamma
    Wb = W[mesh.bnd_vertex]
    n = mesh.bnd_normal
    out = np.zeros(Wb.shape, dtype=W.dtype)
    t = mesh.bnd_tag
    m = np.isin(t, _SLIP)
    out[m] = slip_flux(Wb[m], n[m], g)
    m = t == _OUTFLOW
    out[m] = gas.flux_normal(Wb[m], n[m], g)
    m = t == _INFLOW
    if np.any(m):
        sp_ = None if split is None else (split[0][m], split[1][m])
        out[m] = inflow_flux(Wb[m], n[m], config.w_inf(), g, config.steger_convention, sp_)
    return out


# ---------------------------------------------------------------------------
# MUSCL reconstruction

def _limit(dc, du, dn, limiter):
    if limiter == "none":
        return (2.0 / 3.0) * dc + (1.0 / 3.0) * du
    if limiter == "vanalbada":
        # smooth where the slopes agree; off at extrema (eps guards 0/0)
        eps = 1e-12
        va = (dc * (du * du + eps) + du * (dc * dc + eps)) / (dc * dc + du * du + 2 * eps)
        return np.where(dc * du > 0, va, 0.0)
    if limiter == "minmod":
        s = np.sign(dc)
        ok = (s == np.sign(du))
        return np.where(ok, s * np.minimum(np.abs(dc), np.abs(du)), 0.0)
    # dervieux3: zero unless the three slopes agree in sign; then
    # min(2 * smallest, median) of the magnitudes
    s = np.sign(dc)
    ok = (s == np.sign(du)) & (s == np.sign(dn)) & (s != 0)
    mags = np.sort(np.stack([np.abs(dc), np.abs(du), np.abs(dn)]), axis=0)
    return np.where(ok, s * np.minimum(2.0 * mags[0], mags[1]), 0.0)


def _upwind_gradient(mesh, tri_grad, side):
    k1 = mesh.upwind[:, side, 0]
    k2 = mesh.upwind[:, side, 1]
    g = tri_grad[k1]
    tie = k2 >= 0
    if np.any(tie):
        g = g.copy()
        g[tie] = 0.5 * (g[tie] + tri_grad[k2[tie]])
    return g


def muscl_extrapolate(W, mesh: Mesh2D, config: SolverConfig, return_fallback=False):
    """Interface states ``(W_ij, W_ji)`` for every edge.

    ``W_ij = W_i + 1/2 (grad W)_ij . P_iP_j``, with the limited slope built
    from the centred, upwind-triangle and nodal least-squares gradients.
    Edges whose extrapolated states are invalid revert to first order.
    """
    i, j = mesh.edges[:, 0], mesh.edges[:, 1]
    Wi, Wj = W[i], W[j]
    if not config.muscl:
        return (Wi, Wj, np.zeros(len(i), dtype=bool)) if return_fallback else (Wi, Wj)
    e = mesh.vertices[j] - mesh.vertices[i]
    tg = mesh.triangle_gradients(W)                 # (nt, 2, 4)
    ng = mesh.nodal_gradients(W)                    # (nv, 2, 4)
    dc = Wj - Wi
    # i side: upstream triangle K_ij, direction +e
    du_i = np.einsum("ed,edk->ek", e, _upwind_gradient(mesh, tg, 0))
    dn_i = np.einsum("ed,edk->ek", e, ng[i])
    # j side: direction -e
    du_j = np.einsum("ed,edk->ek", -e, _upwind_gradient(mesh, tg, 1))
    dn_j = np.einsum("ed,edk->ek", -e, ng[j])
    Wij = Wi + 0.5 * _limit(dc, du_i, dn_i, config.limiter)
    Wji = Wj + 0.5 * _limit(-dc, du_j, dn_j, config.limiter)
    bad = ~(gas.is_valid(Wij, config.gamma) & gas.is_valid(Wji, config.gamma))
    if np.any(bad):
        log.debug("MUSCL fallback to first order on %d edges (first: %d)", bad.sum(),
                  int(np.nonzero(bad)[0][0]))
        Wij = np.where(bad[:, None], Wi, Wij)
        Wji = np.where(bad[:, None], Wj, Wji)
    if return_fallback:
        return Wij, Wji, bad
    return Wij, Wji


# ---------------------------------------------------------------------------
# residual

def edge_fluxes(W, mesh, config, first_order=False):
    if first_order or not config.muscl:
        Wa, Wb = W[mesh.edges[:, 0]], W[mesh.edges[:, 1]]
    else:
        Wa, Wb = muscl_extrapolate(W, mesh, config)
    return roe_flux(Wa, Wb, mesh.edge_normals, config)


def residual(W, mesh: Mesh2D, config: SolverConfig, first_order=False):
    """Per-vertex residual (nv, 4): outgoing edge fluxes plus boundary fluxes."""
    W = np.asarray(W)
    if not np.iscomplexobj(W):
        validate_field(W, config.gamma)
    phi = edge_fluxes(W, mesh, config, first_order)
    R = np.zeros(W.shape, dtype=phi.dtype)
    np.add.at(R, mesh.edges[:, 0], phi)
    np.subtract.at(R, mesh.edges[:, 1], phi)
    np.add.at(R, mesh.bnd_vertex, _boundary_fluxes(W, mesh, config))
    return R


def frozen_residual(W, Wref, mesh: Mesh2D, config: SolverConfig):
    """First-order residual with |A~| and the inflow splitting frozen at ``Wref``.

    Its exact derivative in ``W`` is the "frozen" Jacobian.
    """
    g = config.gamma
    i, j = mesh.edges[:, 0], mesh.edges[:, 1]
    absA = roe_dissipation_matrix(Wref[i], Wref[j], mesh.edge_normals, g, config.entropy_eps)
    phi = roe_flux(W[i], W[j], mesh.edge_normals, config, absA=absA)
    R = np.zeros(W.shape, dtype=np.result_type(W, float))
    np.add.at(R, i, phi)
    np.subtract.at(R, j, phi)
    split = gas.split_jacobians(Wref[mesh.bnd_vertex], mesh.bnd_normal, g, 0.0,
                                config.steger_convention)
    np.add.at(R, mesh.bnd_vertex, _boundary_fluxes(W, mesh, config, split=split))
    return R


def residual_norm(R, mesh):
    """Max-norm of ``R_i / |C_i|`` per equation."""
    return np.abs(R / mesh.cell_volumes[:, None]).max(axis=0)


def spectral_radius_sum(W, mesh, config):
    """sum over the cell boundary of (|u.n| + c|n|), per vertex."""
    g = config.gamma
    rho, u, v, p = gas.primitives(W, g)
    c = np.sqrt(g * p / rho)
    i, j = mesh.edges[:, 0], mesh.edges[:, 1]
    n = mesh.edge_normals
    s = np.hypot(n[:, 0], n[:, 1])
    ue = 0.5 * (u[i] + u[j])
    ve = 0.5 * (v[i] + v[j])
    lam = np.abs(ue * n[:, 0] + ve * n[:, 1]) + 0.5 * (c[i] + c[j]) * s
    out = np.zeros(len(W))
    np.add.at(out, i, lam)
    np.add.at(out, j, lam)
    nb = mesh.bnd_normal
    bv = mesh.bnd_vertex
    np.add.at(out, bv, np.abs(u[bv] * nb[:, 0] + v[bv] * nb[:, 1]) + c[bv] * np.hypot(nb[:, 0], nb[:, 1]))
    return out


def local_time_steps(W, mesh, config, cfl=None):
    return (cfl or config.cfl) * mesh.cell_volumes / spectral_radius_sum(W, mesh, config)


# ---------------------------------------------------------------------------
# explicit stepping

def ssp_rk2_step(W, mesh, config, dt, max_retries=5):
    """Two-stage SSP Runge-Kutta step with ``L = -R / |C|``.

    ``dt`` is a scalar or a per-vertex array. Invalid stage states halve
    ``dt`` (up to ``max_retries`` times).
    """
    vol = mesh.cell_volumes[:, None]
    dt = np.broadcast_to(np.asarray(dt, dtype=float), (len(W),))[:, None]
    for attempt in range(max_retries + 1):
        W1 = W - dt * residual(W, mesh, config) / vol
        if np.all(gas.is_valid(W1, config.gamma)):
            W2 = 0.5 * W + 0.5 * W1 - 0.5 * dt * residual(W1, mesh, config) / vol
            if np.all(gas.is_valid(W2, config.gamma)):
                return W2
        dt = 0.5 * dt
        log.info("RK2 stage invalid, halving dt (attempt %d)", attempt + 1)
    raise InvalidStateError("explicit step failed after dt halving")


# ---------------------------------------------------------------------------
# Jacobian

@dataclass
class BlockSparseMatrix:
    """4x4 blocks: ``diag[i]`` and ``off[e, 0] = (i, j)``, ``off[e, 1] = (j, i)``
    for edge ``e = (i, j)``."""

    diag: np.ndarray
    off: np.ndarray
    edges: np.ndarray

    @property
    def n(self) -> int:
        return len(self.diag)

    def to_csr(self) -> sp.csr_matrix:
        nv = self.n
        i, j = self.edges[:, 0], self.edges[:, 1]
        bi = np.concatenate([np.arange(nv), i, j])
        bj = np.concatenate([np.arange(nv), j, i])
        blocks = np.concatenate([self.diag, self.off[:, 0], self.off[:, 1]])
        a = np.arange(4)
        rows = (4 * bi[:, None, None] + a[None, :, None]) + 0 * a[None, None, :]
        cols = (4 * bj[:, None, None] + a[None, None, :]) + 0 * a[None, :, None]
        return sp.csr_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(4 * nv, 4 * nv))

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x).reshape(self.n, 4)
        y = np.einsum("nij,nj->ni", self.diag, x)
        i, j = self.edges[:, 0], self.edges[:, 1]
        np.add.at(y, i, np.einsum("eij,ej->ei", self.off[:, 0], x[j]))
        np.add.at(y, j, np.einsum("eij,ej->ei", self.off[:, 1], x[i]))
        return y

    def rmatvec(self, x) -> np.ndarray:
        x = np.asarray(x).reshape(self.n, 4)
        y = np.einsum("nji,nj->ni", self.diag, x)
        i, j = self.edges[:, 0], self.edges[:, 1]
        np.add.at(y, j, np.einsum("eji,ej->ei", self.off[:, 0], x[i]))
        np.add.at(y, i, np.einsum("eji,ej->ei", self.off[:, 1], x[j]))
        return y

    def add_diagonal(self, d) -> "BlockSparseMatrix":
        """Copy with ``d[i] * I`` added to each diagonal block."""
        diag = self.diag + np.asarray(d)[:, None, None] * np.eye(4)
        return BlockSparseMatrix(diag, self.off, self.edges)


def _accumulate(mesh, dPhi_i, dPhi_j, dB):
    nv = mesh.n_vertices
    i, j = mesh.edges[:, 0], mesh.edges[:, 1]
    diag = np.zeros((nv, 4, 4))
    np.add.at(diag, i, dPhi_i)
    np.add.at(diag, j, -dPhi_j)
    np.add.at(diag, mesh.bnd_vertex, dB)
    off = np.stack([dPhi_j, -dPhi_i], axis=1)
    return BlockSparseMatrix(diag, off, mesh.edges.copy())


def assemble_first_order_jacobian(W, mesh: Mesh2D, config: SolverConfig, mode=None) -> BlockSparseMatrix:
    """Jacobian of the first-order residual.

    ``mode="frozen"``: |A~| and the inflow split matrices are held fixed,
    dPhi/dW_i = (A(W_i).n + |A~|)/2, dPhi/dW_j = (A(W_j).n - |A~|)/2;
    slip rows use n (x) dp/dW, inflow rows A+(W_i, n), outflow A(W_i).n.
    ``mode="exact"``: complex-step derivative of the complete first-order
    residual (Roe matrix and splitting included).
    """
    mode = mode or config.jacobian
    g = config.gamma
    i, j = mesh.edges[:, 0], mesh.edges[:, 1]
    n = mesh.edge_normals
    W = np.asarray(W, dtype=float)
    if mode == "frozen":
        absA = roe_dissipation_matrix(W[i], W[j], n, g, config.entropy_eps)
        dPi = 0.5 * (gas.flux_jacobian_normal(W[i], n, g) + absA)
        dPj = 0.5 * (gas.flux_jacobian_normal(W[j], n, g) - absA)
        dB = _boundary_jacobian_frozen(W, mesh, config)
        return _accumulate(mesh, dPi, dPj, dB)
    if mode != "exact":
        raise ValueError(f"unknown jacobian mode {mode!r}")
    h = 1e-30
    dPi = np.empty((len(i), 4, 4))
    dPj = np.empty((len(i), 4, 4))
    Wi, Wj = W[i].astype(complex), W[j].astype(complex)
    for k in range(4):
        Wp = Wi.copy()
        Wp[:, k] += 1j * h
        dPi[:, :, k] = roe_flux(Wp, Wj, n, config).imag / h
        Wp = Wj.copy()
        Wp[:, k] += 1j * h
        dPj[:, :, k] = roe_flux(Wi, Wp, n, config).imag / h
    Wb = W[mesh.bnd_vertex]
    dB = np.empty((len(Wb), 4, 4))
    for k in range(4):
        Wp = Wb.astype(complex)
        Wp[:, k] += 1j * h
        dB[:, :, k] = _boundary_flux_halves(Wp, mesh, config).imag / h
    return _accumulate(mesh, dPi, dPj, dB)


def _boundary_flux_halves(Wb, mesh, config):
    g = config.gamma
    n = mesh.bnd_normal
    t = mesh.bnd_tag
    out = np.zeros(Wb.shape, dtype=Wb.dtype)
    m = np.isin(t, _SLIP)
    out[m] = slip_flux(Wb[m], n[m], g)
    m = t == _OUTFLOW
    out[m] = gas.flux_normal(Wb[m], n[m], g)
    m = t == _INFLOW
    out[m] = inflow_flux(Wb[m], n[m], config.w_inf(), g, config.steger_convention)
    return out


def _boundary_jacobian_frozen(W, mesh, config):
    g = config.gamma
    Wb = W[mesh.bnd_vertex]
    n = mesh.bnd_normal
    t = mesh.bnd_tag
    dB = np.zeros((len(Wb), 4, 4))
    m = np.isin(t, _SLIP)
    dp = gas.pressure_jacobian(Wb[m], g)
    dB[m, 1, :] = n[m, 0, None] * dp
    dB[m, 2, :] = n[m, 1, None] * dp
    m = t == _OUTFLOW
    dB[m] = gas.flux_jacobian_normal(Wb[m], n[m], g)
    m = t == _INFLOW
    dB[m] = gas.split_jacobians(Wb[m], n[m], g, 0.0, config.steger_convention)[0]
    return dB


def inflow_parameter_derivative(W, mesh, config, dw_inf):
    """d(residual)/d(parameter) when only W_inf depends on the parameter:
    A-(W_i, n) dW_inf summed over the inflow half-edges."""
    g = config.gamma
    m = mesh.bnd_tag == _INFLOW
    Wb = W[mesh.bnd_vertex[m]]
    Am = gas.split_jacobians(Wb, mesh.bnd_normal[m], g, 0.0, config.steger_convention)[1]
    out = np.zeros((mesh.n_vertices, 4))
    np.add.at(out, mesh.bnd_vertex[m], np.einsum("bij,j->bi", Am, dw_inf))
    return out


# ---------------------------------------------------------------------------
# linear solves

def _block_jacobi(J: BlockSparseMatrix, transpose=False):
    D = J.diag.transpose(0, 2, 1) if transpose else J.diag
    Dinv = np.linalg.inv(D)
    nv = J.n

    def apply(x):
        return np.einsum("nij,nj->ni", Dinv, np.asarray(x).reshape(nv, 4)).ravel()

    return spla.LinearOperator((4 * nv, 4 * nv), matvec=apply, dtype=float)


def solve_linear(J: BlockSparseMatrix, rhs, config: SolverConfig, transpose=False, method=None):
    """Solve ``J x = rhs`` (or ``J^T x = rhs``); returns ``(x, info)``."""
    method = method or config.linear_solver
    A = J.to_csr()
    if transpose:
        A = A.T.tocsr()
    b = np.asarray(rhs, dtype=float).ravel()
    info = {"method": method}
    if method == "gmres":
        M = _block_jacobi(J, transpose)
        x, code = spla.gmres(A, b, rtol=config.linear_tol, restart=config.gmres_restart,
                             maxiter=config.gmres_maxiter, M=M)
        res = np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300)
        info.update(code=code, rel_residual=res)
        if code == 0 and np.all(np.isfinite(x)):
            return x.reshape(-1, 4), info
        log.info("GMRES stalled (code %s, rel. residual %.2e); direct solve", code, res)
        info["method"] = "direct (gmres fallback)"
    x = spla.spsolve(A.tocsc(), b)
    info["rel_residual"] = np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300)
    info.setdefault("code", 0)
    return x.reshape(-1, 4), info


# ---------------------------------------------------------------------------
# implicit stepping and steady solve

def implicit_step(W, mesh, config, cfl=None, R=None):
    """One linearised implicit Euler step with local time steps.

    Solves ``(|C_i| / dt_i I + A) dW = -R(W^n)`` where ``A`` is the
    first-order Jacobian and ``R`` the (possibly second-order) residual.
    Returns ``(W_new, info)``.
    """
    cfl = cfl or config.cfl
    if R is None:
        R = residual(W, mesh, config)
    J = assemble_first_order_jacobian(W, mesh, config)
    for attempt in range(6):
        dt = local_time_steps(W, mesh, config, cfl)
        M = J.add_diagonal(mesh.cell_volumes / dt)
        dW, info = solve_linear(M, -R, config)
        Wn = W + dW
        if np.all(np.isfinite(Wn)) and np.all(gas.is_valid(Wn, config.gamma)):
            info["cfl"] = cfl
            return Wn, info
        cfl *= 0.1
        log.info("implicit step produced invalid state; CFL reduced to %g", cfl)
    raise InvalidStateError("implicit step failed after CFL reduction")


@dataclass
class SteadyResult:
    field: np.ndarray
    converged: bool
    history: list              # per step: (step, cfl, res_rho, res_mx, res_my, res_e)
    steps: int
    wall_time: float

    @property
    def final_residual(self) -> float:
        return float(max(self.history[-1][2:])) if self.history else float("nan")


def solve_steady(mesh: Mesh2D, config: SolverConfig, W0=None, raise_on_failure=False,
                 callback=None) -> SteadyResult:
    """March to steady state (implicit pseudo-time or explicit SSP-RK2)."""
    t0 = time.perf_counter()
    W = freestream_field(mesh, config) if W0 is None else np.array(W0, dtype=float)
    validate_field(W, config.gamma)
    hist = []
    cfl = config.cfl
    R = residual(W, mesh, config)
    res = residual_norm(R, mesh)
    res0 = max(res.max(), 1e-300)
    step = 0
    cur = config
    while True:
        hist.append((step, cfl, *map(float, res)))
        if callback:
            callback(step, W, res)
        if res.max() < config.convergence_tol:
            break
        if step >= config.max_steps:
            break
        if config.implicit:
            W, _ = implicit_step(W, mesh, cur, cfl, R)
            # switched evolution relaxation with a geometric ramp cap
            cfl = min(config.cfl_max, cfl * config.cfl_growth,
                      max(config.cfl, config.cfl * res0 / max(res.max(), 1e-300)))
        else:
            W = ssp_rk2_step(W, mesh, cur, local_time_steps(W, mesh, cur))
        step += 1
        R = residual(W, mesh, cur)
        res = residual_norm(R, mesh)
        if not np.all(np.isfinite(res)):
            break
    out = SteadyResult(W, bool(res.max() < config.convergence_tol), hist, step,
                       time.perf_counter() - t0)
    if raise_on_failure and not out.converged:
        raise ConvergenceError(f"no convergence after {step} steps "
                               f"(residual {res.max():.3e})", out)
    return out


# ---------------------------------------------------------------------------
# output

def write_vtk(path, mesh: Mesh2D, point_data: dict, title="adjeuler field"):
    """Legacy ASCII VTK unstructured grid with scalar point data."""
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.n_vertices} double\n")
        for x, y in mesh.vertices:
            fh.write("%.17g %.17g 0\n" % (x, y))
        nt = len(mesh.triangles)
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        fh.write("5\n" * nt)
        fh.write(f"POINT_DATA {mesh.n_vertices}\n")
        for name, vals in point_data.items():
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for v in np.asarray(vals, dtype=float):
                fh.write("%.17g\n" % v)


def flow_point_data(W, gamma=1.4) -> dict:
    rho, u, v, p = gas.primitives(W, gamma)
    return {"rho": rho, "u": u, "v": v, "p": p, "Mach": gas.mach_number(W, gamma)}


def write_convergence_log(path, result: SteadyResult):
    with open(path, "w") as fh:
        fh.write("step,cfl,res_rho,res_mx,res_my,res_e\n")
        for row in result.history:
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in row) + "\n")


def probe_line(mesh: Mesh2D, values, p0, p1, n=101):
    """Linear interpolation of vertex ``values`` at ``n`` points of the segment."""
    from .mesh import locate_points
    pts = np.linspace(np.asarray(p0, float), np.asarray(p1, float), n)
    tri, bary = locate_points(mesh, pts)
    vals = np.asarray(values)
    out = np.full((n,) + vals.shape[1:], np.nan)
    ok = tri >= 0
    out[ok] = np.einsum("pk,pk...->p...", bary[ok], vals[mesh.triangles[tri[ok]]])
    return pts, out


def write_probe_csv(path, pts, data: dict):
    names = list(data)
    with open(path, "w") as fh:
        fh.write(",".join(["x", "y"] + names) + "\n")
        for k, (x, y) in enumerate(pts):
            fh.write(",".join("%.17g" % v for v in [x, y] + [data[nm][k] for nm in names]) + "\n")
