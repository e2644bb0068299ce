"""Discrete adjoint of the steady 2D solver, and checks against the
continuous adjoint boundary conditions.

Sign convention: the adjoint ``lam`` solves ``(dR/dW)^T lam = dJ/dW`` so
that for any parameter ``a`` entering the residual,

    dJ/da = partial J / partial a - lam . dR/da.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import gas
from .mesh import BoundaryTag, Mesh2D, locate_points
from .solver import (SolverConfig, assemble_first_order_jacobian, inflow_parameter_derivative,
                     residual, solve_linear)

KINDS = ("outflow_density_target", "ground_pressure_target")


class SingularityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Functional:
    """Boundary functional.

    ``outflow_density_target``: J = 1/2 int_tag (rho / rho_ref - 1)^2.
    ``ground_pressure_target``: J = 1/2 int_tag (p - p0)^2, ``p0`` a
    number, an array over vertices, or a callable of the vertex coordinates.
    """

    kind: str = "outflow_density_target"
    tag: str | None = None
    rho_ref: float = 1.0
    p0: object = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")

    @property
    def boundary_tag(self) -> BoundaryTag:
        if self.tag is not None:
            return BoundaryTag.parse(self.tag)
        return BoundaryTag.OUTFLOW_FREE if self.kind == KINDS[0] else BoundaryTag.GROUND

    def target_pressure(self, mesh, config: SolverConfig | None = None):
        p0 = self.p0
        if p0 is None:
            p0 = (config or SolverConfig()).freestream.p
        if callable(p0):
            return np.asarray(p0(mesh.vertices), dtype=float)
        return np.broadcast_to(np.asarray(p0, dtype=float), (mesh.n_vertices,))


def _weights(mesh, fn):
    w = mesh.boundary_weights(fn.boundary_tag)
    if not np.any(w > 0):
        raise ValueError(f"mesh has no '{fn.boundary_tag.label}' boundary")
    return w


def functional_value(W, mesh: Mesh2D, fn: Functional, config: SolverConfig | None = None) -> float:
    """Trapezoidal boundary quadrature of the functional."""
    cfg = config or SolverConfig()
    w = _weights(mesh, fn)
    if fn.kind == "outflow_density_target":
        g = 0.5 * (W[:, 0] / fn.rho_ref - 1.0) ** 2
    else:
        g = 0.5 * (gas.pressure(W, cfg.gamma) - fn.target_pressure(mesh, cfg)) ** 2
    return float(np.sum(w * g))


def functional_gradient_rhs(W, mesh: Mesh2D, fn: Functional, config: SolverConfig | None = None):
    """dJ/dW per vertex, (nv, 4)."""
    cfg = config or SolverConfig()
    w = _weights(mesh, fn)
    out = np.zeros((mesh.n_vertices, 4))
    if fn.kind == "outflow_density_target":
        out[:, 0] = w * (W[:, 0] / fn.rho_ref - 1.0) / fn.rho_ref
    else:
        dp = gas.pressure_jacobian(W, cfg.gamma)
        out[:] = (w * (gas.pressure(W, cfg.gamma) - fn.target_pressure(mesh, cfg)))[:, None] * dp
    return out


@dataclass
class AdjointResult:
    field: np.ndarray
    rel_residual: float
    info: dict = field(default_factory=dict)


def solve_adjoint(W, mesh: Mesh2D, fn: Functional, config: SolverConfig,
                  jacobian=None, method="direct") -> AdjointResult:
    """Solve ``(dR1/dW)^T lam = dJ/dW`` with the first-order Jacobian.

    No boundary condition is imposed on ``lam``: boundary rows are those of
    the transposed flux Jacobians.
    """
    rhs = functional_gradient_rhs(W, mesh, fn, config)
    if not np.any(rhs):
        return AdjointResult(np.zeros_like(rhs), 0.0, {"method": "trivial"})
    J = jacobian if jacobian is not None else assemble_first_order_jacobian(W, mesh, config)
    lam, info = solve_linear(J, rhs, config, transpose=True, method=method)
    res = J.rmatvec(lam) - rhs
    rel = float(np.linalg.norm(res) / np.linalg.norm(rhs))
    return AdjointResult(lam, rel, info)


def rho_inf_derivative(W, mesh, config):
    """dR/d(rho_inf) at fixed free-stream velocity and pressure."""
    rho, u, v, p = config.freestream.primitive(config.gamma)
    dw = np.array([1.0, u, v, 0.5 * (u * u + v * v)])
    return inflow_parameter_derivative(W, mesh, config, dw)


def with_rho_inf(config: SolverConfig, rho) -> SolverConfig:
    """Config with free-stream density ``rho`` at unchanged velocity and pressure."""
    fs = config.freestream
    return replace(config, freestream=replace(fs, rho=float(rho),
                                              mach=fs.mach * math.sqrt(rho / fs.rho)))


def adjoint_gradient_rho_inf(W, lam, mesh, config) -> float:
    """dJ/d(rho_inf); the functional's ``rho_ref`` is held fixed."""
    return float(-np.sum(lam * rho_inf_derivative(W, mesh, config)))


# ---------------------------------------------------------------------------
# continuous boundary conditions

def analytic_outflow_adjoint(Wbar, rho_inf, gamma=1.4, tol=1e-12):
    """Closed-form adjoint at an outflow boundary normal to x.

    Solves ``W*^T A(Wbar, (1, 0)) = (rho/rho_inf - 1)/rho_inf e_1``.
    Works on (..., 4) arrays.
    """
    Wbar = np.asarray(Wbar, dtype=float)
    rho, u, v, p = gas.primitives(Wbar, gamma)
    E = Wbar[..., 3] / rho
    q2 = u * u + v * v
    g = gamma
    den = ((g - 2.0) / 2.0 * q2 + g / (g - 1.0) * u * u + v * v - g * E) * u
    if np.any(np.abs(den) <= tol):
        raise SingularityError("degenerate outflow state (vanishing denominator)")
    w4 = (rho / rho_inf - 1.0) / rho_inf / den
    w3 = -v * w4
    w2 = -g / (g - 1.0) * u * w4
    w1 = ((g + 1.0) / (g - 1.0) * u * u + v * v - p / rho - E) * w4
    return np.stack([w1, w2, w3, w4], axis=-1)


def local_mesh_size(mesh: Mesh2D):
    L = np.hypot(*(mesh.vertices[mesh.edges[:, 1]] - mesh.vertices[mesh.edges[:, 0]]).T)
    s = np.zeros(mesh.n_vertices)
    c = np.zeros(mesh.n_vertices)
    for k in (0, 1):
        np.add.at(s, mesh.edges[:, k], L)
        np.add.at(c, mesh.edges[:, k], 1.0)
    return s / np.maximum(c, 1)


def shock_flags(W, mesh, rho_inf=1.0, threshold=0.1, dilate=1):
    """Vertices with |grad rho| h > threshold * rho_inf, grown by ``dilate`` rings."""
    g = mesh.nodal_gradients(W[:, 0])
    flag = np.hypot(g[:, 0], g[:, 1]) * local_mesh_size(mesh) > threshold * rho_inf
    for _ in range(dilate):
        grow = flag.copy()
        e = mesh.edges
        grow[e[flag[e[:, 1]], 0]] = True
        grow[e[flag[e[:, 0]], 1]] = True
        flag = grow
    return flag


@dataclass
class BoundaryReport:
    vertices: np.ndarray
    xy: np.ndarray
    numeric: np.ndarray
    analytic: np.ndarray
    abs_err: np.ndarray
    rel_err: np.ndarray
    shock: np.ndarray
    corner: np.ndarray

    @property
    def excluded(self) -> np.ndarray:
        return self.shock | self.corner

    @property
    def max_rel_smooth(self) -> float:
        m = ~self.excluded
        return float(self.rel_err[m].max()) if np.any(m) else float("nan")

    def correlation(self, component=None, smooth_only=False) -> float:
        a, b = self.numeric, self.analytic
        if component is not None and a.ndim > 1:
            a, b = a[:, component], b[:, component]
        if smooth_only:
            a, b = a[~self.excluded], b[~self.excluded]
        return float(np.corrcoef(np.ravel(a), np.ravel(b))[0, 1])

    def write_csv(self, path):
        num = self.numeric.reshape(len(self.vertices), -1)
        ana = self.analytic.reshape(len(self.vertices), -1)
        k = num.shape[1]
        cols = ["vertex", "x", "y"] + [f"numeric_{c}" for c in range(k)] + \
            [f"analytic_{c}" for c in range(k)] + ["abs_err", "rel_err", "shock", "corner"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for r in range(len(self.vertices)):
                vals = [str(int(self.vertices[r])), "%.17g" % self.xy[r, 0], "%.17g" % self.xy[r, 1]]
                vals += ["%.17g" % x for x in num[r]] + ["%.17g" % x for x in ana[r]]
                vals += ["%.17g" % self.abs_err[r], "%.17g" % self.rel_err[r], str(int(self.shock[r])), str(int(self.corner[r]))]
                fh.write(",".join(vals) + "\n")


def _ordered_boundary_vertices(mesh, tag):
    v = mesh.boundary_vertices(tag)
    X = mesh.vertices[v]
    # order along the dominant extent
    ax = 1 if np.ptp(X[:, 1]) > np.ptp(X[:, 0]) else 0
    return v[np.argsort(X[:, ax], kind="stable")]


def verify_outflow_bc(lam, W, mesh: Mesh2D, fn: Functional, config: SolverConfig,
                      flag_threshold=0.1, dilate=1) -> BoundaryReport:
    """Discrete adjoint vs the closed-form outflow adjoint at each outflow vertex.

    Relative errors are normalised by the largest analytic |W*| on the
    boundary (the analytic value vanishes where rho = rho_inf).
    """
    v = _ordered_boundary_vertices(mesh, fn.boundary_tag)
    ana = analytic_outflow_adjoint(W[v], fn.rho_ref, config.gamma)
    num = lam[v]
    err = np.linalg.norm(num - ana, axis=1)
    scale = max(np.linalg.norm(ana, axis=1).max(), 1e-300)
    flags = shock_flags(W, mesh, config.freestream.rho, flag_threshold, dilate)[v]
    corner = np.isin(v, mesh.corner_vertices())
    return BoundaryReport(v, mesh.vertices[v], num, ana, err, err / scale, flags, corner)


def ground_adjoint_check(lam, W, mesh: Mesh2D, fn: Functional, config: SolverConfig,
                         sign=1.0, flag_threshold=0.1, dilate=1) -> BoundaryReport:
    """Third adjoint component on the ground vs ``sign * (p - p0)``.

    ``sign=1`` is the relation W3* = p - p0; with the sign convention used
    here (lam solves the transposed system with +dJ/dW) the consistent
    relation on a ground with outward normal (0, -1) is ``sign=-1``.
    """
    v = _ordered_boundary_vertices(mesh, fn.boundary_tag)
    p = gas.pressure(W[v], config.gamma)
    ana = sign * (p - fn.target_pressure(mesh, config)[v])
    num = lam[v, 2]
    err = np.abs(num - ana)
    scale = max(np.abs(ana).max(), 1e-300)
    flags = shock_flags(W, mesh, config.freestream.rho, flag_threshold, dilate)[v]
    corner = np.isin(v, mesh.corner_vertices())
    return BoundaryReport(v, mesh.vertices[v], num, ana, err, err / scale, flags, corner)


def airfoil_adjoint_bc_residual(lam, mesh: Mesh2D, tags=("slip_wall",)):
    """(lam_2, lam_3) . n at each wall vertex, relative to max |lam|."""
    v = mesh.boundary_vertices(tags)
    n = mesh.integrated_boundary_normals(tags)[v]
    n = n / np.hypot(n[:, 0], n[:, 1])[:, None]
    r = lam[v, 1] * n[:, 0] + lam[v, 2] * n[:, 1]
    scale = max(np.abs(lam).max(), 1e-300)
    return v, r, np.abs(r) / scale


def outflow_right_boundary_zero_check(lam, mesh: Mesh2D, fn: Functional | None = None):
    """max |lam| on the outflow boundary relative to max |lam| overall.

    Returns ``None`` when the functional itself lives on that boundary.
    """
    if fn is not None and fn.boundary_tag == BoundaryTag.OUTFLOW_FREE:
        return None
    v = mesh.boundary_vertices(BoundaryTag.OUTFLOW_FREE)
    glob = np.abs(lam).max()
    if glob == 0:
        return 0.0
    return float(np.abs(lam[v]).max() / glob)


# ---------------------------------------------------------------------------
# shape gradient

def polyline_curvature(X):
    """Signed curvature from circumscribed circles of consecutive triples."""
    k = np.zeros(len(X))
    if len(X) < 3:
        return k
    a, b, c = X[:-2], X[1:-1], X[2:]
    ab = np.hypot(*(b - a).T)
    bc = np.hypot(*(c - b).T)
    ca = np.hypot(*(a - c).T)
    cr = (b - a)[:, 0] * (c - a)[:, 1] - (b - a)[:, 1] * (c - a)[:, 0]
    den = ab * bc * ca
    with np.errstate(invalid="ignore", divide="ignore"):
        kk = np.where(den > 0, 2.0 * cr / den, 0.0)
    k[1:-1] = np.where(np.abs(cr) <= 1e-14 * np.maximum(den, 1e-300) ** (2 / 3), 0.0, kk)
    return k


@dataclass
class ShapeGradient:
    vertices: np.ndarray        # ordered wall vertices
    xy: np.ndarray
    normals: np.ndarray         # unit outward normals
    weights: np.ndarray         # quadrature weights along the wall
    density: np.ndarray         # g with dJ = int g alpha
    alpha: np.ndarray           # normal displacement (outward positive)
    predicted_dJ: float

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("vertex,x,y,nx,ny,weight,g,alpha\n")
            for r in range(len(self.vertices)):
                vals = [self.xy[r, 0], self.xy[r, 1], *self.normals[r], self.weights[r],
                        self.density[r], self.alpha[r]]
                fh.write(f"{int(self.vertices[r])}," + ",".join("%.17g" % x for x in vals) + "\n")


def shape_gradient(lam, W, mesh: Mesh2D, step, config: SolverConfig, wall_vertices=None,
                   tags=("slip_wall",), energy_term=False, sign=-1.0, corner_angle=5.0,
                   probe=1.0) -> ShapeGradient:
    """Normal wall displacement ``alpha = -step * g`` with

        g = sign * (rho* + U.(rhoU)* [+ H (rhoE)*]) (d(rho U_n)/dn - kappa rho U_t).

    ``dn`` uses a one-sided difference to a point ``probe * h`` inside the
    domain along the inward normal (barycentric interpolation); ``kappa`` is
    the circumscribed-circle curvature of the wall polyline. Displacements
    at corners sharper than ``corner_angle`` degrees and at the polyline
    ends are set to zero. ``energy_term=True`` adds the H (rhoE)* term.
    The default ``sign=-1`` maps the continuous adjoint to ``-lam``.
    The predicted first-order change is ``int g alpha = -step int g^2``.
    """
    g_ = config.gamma
    chains = mesh.boundary_polyline(tags)
    if wall_vertices is not None:
        keep = set(int(v) for v in wall_vertices)
        chains = [c[[int(v) in keep for v in c]] for c in chains]
        chains = [c for c in chains if len(c) >= 2]
    n_all = mesh.vertex_normals()
    h = local_mesh_size(mesh)
    out_v, out_g, out_w, out_n = [], [], [], []
    for chain in chains:
        X = mesh.vertices[chain]
        seg = np.hypot(*np.diff(X, axis=0).T)
        w = np.zeros(len(chain))
        w[:-1] += 0.5 * seg
        w[1:] += 0.5 * seg
        # orientation: boundary chains run with the domain on the left, so
        # the left normal points inside
        kappa = -polyline_curvature(X)
        t = np.gradient(X, axis=0)
        t /= np.hypot(t[:, 0], t[:, 1])[:, None]
        n = n_all[chain]
        rho, u, v, p = gas.primitives(W[chain], g_)
        Ut = u * t[:, 0] + v * t[:, 1]
        # one-sided normal derivative of rho U_n (zero on the wall)
        pts = X - probe * h[chain, None] * n
        tri, bary = locate_points(mesh, pts)
        ok = tri >= 0
        Wp = np.zeros((len(chain), 4))
        Wp[ok] = np.einsum("pk,pkj->pj", bary[ok], W[mesh.triangles[tri[ok]]])
        mn = Wp[:, 1] * n[:, 0] + Wp[:, 2] * n[:, 1]
        mw = W[chain, 1] * n[:, 0] + W[chain, 2] * n[:, 1]
        # derivative along the outward normal
        dmn = np.where(ok, (mw - mn) / (probe * h[chain]), 0.0)
        lc = lam[chain]
        H = (W[chain, 3] + p) / rho
        a = lc[:, 0] + u * lc[:, 1] + v * lc[:, 2]
        if energy_term:
            a = a + H * lc[:, 3]
        gval = sign * a * (dmn - kappa * rho * Ut)
        # corners and chain ends
        turn = np.zeros(len(chain), dtype=bool)
        if len(chain) >= 3:
            d1 = X[1:-1] - X[:-2]
            d2 = X[2:] - X[1:-1]
            ang = np.degrees(np.abs(np.arctan2(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0],
                                               np.einsum("ij,ij->i", d1, d2))))
            turn[1:-1] = ang > corner_angle
        turn[0] = turn[-1] = True
        gval = np.where(turn, 0.0, gval)
        out_v.append(chain)
        out_g.append(gval)
        out_w.append(w)
        out_n.append(n)
    vv = np.concatenate(out_v)
    gg = np.concatenate(out_g)
    ww = np.concatenate(out_w)
    nn = np.concatenate(out_n)
    alpha = -step * gg
    return ShapeGradient(vv, mesh.vertices[vv], nn, ww, gg, alpha, float(np.sum(ww * gg * alpha)))


def _column_shift(mesh: Mesh2D, v, dy):
    """Move the vertical column through wall vertex ``v`` by ``dy`` at the wall,
    decaying linearly to zero at the opposite end of the column."""
    X = mesh.vertices.copy()
    col = np.abs(X[:, 0] - X[v, 0]) <= 1e-12 * max(1.0, abs(X[v, 0]))
    y = X[col, 1]
    far = y.min() if X[v, 1] >= y.max() - 1e-12 else y.max()
    span = X[v, 1] - far
    if span == 0.0:
        raise ValueError(f"vertex {v} has a degenerate column")
    X[col, 1] += dy * (y - far) / span
    return X


def displace_wall(mesh: Mesh2D, vertices, normals, alpha) -> Mesh2D:
    """Apply normal wall displacements ``alpha`` to a column-structured mesh.

    Each wall vertex moves vertically by ``alpha / n_y`` (normal component
    ``alpha``) and the interior vertices of its column follow linearly.
    Suited to meshes from :func:`generate_wedge_channel`.
    """
    X = mesh.vertices.copy()
    for v, n, a in zip(vertices, normals, alpha):
        if a == 0.0:
            continue
        if abs(n[1]) < 1e-8:
            raise ValueError(f"wall vertex {v} has a horizontal normal")
        X += _column_shift(mesh, int(v), a / n[1]) - mesh.vertices
    return mesh.with_vertices(X)


def discrete_shape_gradient(lam, W, mesh: Mesh2D, config: SolverConfig, vertices, normals,
                            fn: Functional | None = None, eps=1e-6) -> np.ndarray:
    """dJ/d(alpha_v) for unit normal displacement of each wall vertex.

    Uses ``dJ = partial J - lam . dR`` with central differences of the
    first-order residual (and of ``fn``, if given) with respect to the
    column displacement of :func:`displace_wall`.
    """
    out = np.zeros(len(vertices))
    for k, (v, n) in enumerate(zip(vertices, normals)):
        if abs(n[1]) < 1e-8:
            continue
        vals = []
        for s_ in (1.0, -1.0):
            m = mesh.with_vertices(_column_shift(mesh, int(v), s_ * eps / n[1]))
            r = -np.sum(lam * residual(W, m, config, first_order=True))
            if fn is not None:
                r += functional_value(W, m, fn, config)
            vals.append(r)
        out[k] = (vals[0] - vals[1]) / (2 * eps)
    return out


# ---------------------------------------------------------------------------
# discontinuity detection

def jump_detector(f, mesh: Mesh2D, theta=3.0, floor=1e-3):
    """Indices of edges whose jump exceeds ``theta`` times the median jump.

    The median is taken over active edges, those whose jump exceeds
    ``floor`` times the range of ``f``, so that regions of uniform flow do
    not drive the scale to zero.
    """
    f = np.asarray(f, dtype=float)
    d = np.abs(f[mesh.edges[:, 1]] - f[mesh.edges[:, 0]])
    rng = float(np.ptp(f))
    if rng == 0.0:
        return np.zeros(0, dtype=np.int64)
    active = d > floor * rng
    if not np.any(active):
        return np.zeros(0, dtype=np.int64)
    return np.nonzero(d > theta * np.median(d[active]))[0]


def edge_midpoints(mesh, edges=None):
    e = mesh.edges if edges is None else mesh.edges[edges]
    return 0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]])


def oblique_shock_angle(mach, theta_deg, gamma=1.4):
    """Weak-branch shock angle (degrees) from the theta-beta-M relation."""
    from scipy.optimize import brentq
    th = math.radians(theta_deg)
    mu = math.asin(1.0 / mach)

    def f(b):
        return math.tan(th) - 2.0 / math.tan(b) * (mach ** 2 * math.sin(b) ** 2 - 1.0) / (
            mach ** 2 * (gamma + math.cos(2 * b)) + 2.0)

    bs = np.linspace(mu + 1e-9, math.pi / 2, 2000)
    vals = [f(b) for b in bs]
    k = next(i for i in range(len(bs) - 1) if vals[i] * vals[i + 1] <= 0)
    return math.degrees(brentq(f, bs[k], bs[k + 1]))


def oblique_shock_state(mach, theta_deg, gamma=1.4):
    """Post-shock (rho2/rho1, p2/p1, M2) for the weak oblique shock."""
    b = math.radians(oblique_shock_angle(mach, theta_deg, gamma))
    mn1 = mach * math.sin(b)
    r = (gamma + 1) * mn1 ** 2 / ((gamma - 1) * mn1 ** 2 + 2)
    pr = 1 + 2 * gamma / (gamma + 1) * (mn1 ** 2 - 1)
    mn2 = math.sqrt((1 + 0.5 * (gamma - 1) * mn1 ** 2) / (gamma * mn1 ** 2 - 0.5 * (gamma - 1)))
    m2 = mn2 / math.sin(b - math.radians(theta_deg))
    return r, pr, m2
