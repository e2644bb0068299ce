"""Verification matrix: one function per acceptance criterion.

Each criterion returns a :class:`CriterionResult` made of numeric checks
with explicit limits. Checks marked ``required=False`` are diagnostics
that are reported but do not decide the outcome. Expensive 2D solves are
cached per process so that criteria sharing a case reuse them.
"""

from __future__ import annotations

import contextlib
import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import adjoint as ad
from . import burgers as bg
from . import calculus as cc
from . import gas
from . import solver as sv
from .mesh import body_vertices, generate_wedge_channel

# ---------------------------------------------------------------------------
# result types


@dataclass
class Check:
    name: str
    value: float
    limit: float
    op: str = "<="
    required: bool = True

    @property
    def passed(self) -> bool:
        v = self.value
        if v is None or (isinstance(v, float) and math.isnan(v)):
            return False
        return {"<=": v <= self.limit, "<": v < self.limit,
                ">=": v >= self.limit, ">": v > self.limit}[self.op]

    def describe(self) -> str:
        tag = "ok" if self.passed else "FAIL"
        if not self.required:
            tag = "info:" + tag
        return f"{self.name}={self.value:.4g} ({self.op} {self.limit:g}) {tag}"


@dataclass
class CriterionResult:
    number: int
    key: str
    title: str
    checks: list = field(default_factory=list)
    runtime: float = 0.0
    budget: float = math.inf
    error: str | None = None
    data: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks if c.required)

    @property
    def failed_checks(self) -> list:
        return [c.name for c in self.checks if c.required and not c.passed]

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        head = f"[{status}] C{self.number} {self.key}: {self.title}"
        if self.error:
            return f"{head} | error: {self.error}"
        body = "; ".join(c.describe() for c in self.checks)
        return f"{head} | {body}"


@dataclass(frozen=True)
class Criterion:
    number: int
    key: str
    group: str
    title: str
    budget: float
    func: object

    def matches(self, pattern: str | None) -> bool:
        if not pattern:
            return True
        p = pattern.lower()
        return p in (self.key, self.group, str(self.number), f"c{self.number}") or p in self.key

    def run(self) -> CriterionResult:
        res = CriterionResult(self.number, self.key, self.title, budget=self.budget)
        t0 = time.perf_counter()
        try:
            checks, data = self.func()
            res.checks.extend(checks)
            res.data.update(data)
        except Exception as exc:    # reported, not raised: the matrix keeps going
            res.error = f"{type(exc).__name__}: {exc}"
        res.runtime = time.perf_counter() - t0
        res.checks.append(Check("runtime_s", res.runtime, self.budget, "<"))
        return res


def _rel(a, b) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


# ---------------------------------------------------------------------------
# fault injection (used to check that the matrix detects a broken Jacobian)

FAULTS: set = set()


@contextlib.contextmanager
def inject_fault(name: str):
    """Temporarily corrupt a building block. ``jacobian`` perturbs one
    entry of the analytic flux Jacobian."""
    if name != "jacobian":
        raise ValueError(f"unknown fault {name!r}")
    orig = gas.flux_jacobian_normal

    def broken(W, n, gamma=gas.DEFAULT_GAMMA):
        A = np.array(orig(W, n, gamma))
        A[..., 3, 0] += 1e-3 * (1.0 + np.abs(A[..., 3, 0]))
        return A

    gas.flux_jacobian_normal = broken
    FAULTS.add(name)
    try:
        yield
    finally:
        gas.flux_jacobian_normal = orig
        FAULTS.discard(name)


# ---------------------------------------------------------------------------
# shared cases

# documented Table 1 setting
TABLE1 = dict(x_min=-6.0, x_max=6.0, n=2400, T=2.0, region=(0.0, math.inf))
TABLE1_REFERENCE = dict(J=0.195009, gradient=-0.492863, fd=-0.4952)

FO = sv.SolverConfig(muscl=False, jacobian="exact", cfl=5.0, convergence_tol=1e-12,
                     max_steps=200, linear_solver="gmres")

WEDGE_H = 0.0175          # about 5k vertices
GROUND = dict(length=3.5, height=1.0, wedge_start=0.2, wedge_end=0.6, wedge_angle=5.0,
              wall="top", bottom_tag="ground")


def table1_grid(n=TABLE1["n"]):
    return bg.Grid1D.for_profile(bg.atan_initial(), TABLE1["x_min"], TABLE1["x_max"], n, TABLE1["T"])


@dataclass
class FlowCase:
    mesh: object
    field: np.ndarray
    adjoint: np.ndarray
    functional: ad.Functional
    config: sv.SolverConfig
    solve_time: float
    rel_residual: float


def _flow_case(mesh, fn, config=FO) -> FlowCase:
    t0 = time.perf_counter()
    r = sv.solve_steady(mesh, config)
    if not r.converged:
        raise sv.ConvergenceError(f"steady solve stalled at {r.final_residual:.3e}", r)
    a = ad.solve_adjoint(r.field, mesh, fn, config, method="direct")
    return FlowCase(mesh, r.field, a.field, fn, config, time.perf_counter() - t0, a.rel_residual)


@lru_cache(maxsize=None)
def wedge_case(h=WEDGE_H) -> FlowCase:
    return _flow_case(generate_wedge_channel(h=h), ad.Functional("outflow_density_target"))


@lru_cache(maxsize=None)
def ground_case(h, profile="wedge") -> FlowCase:
    m = generate_wedge_channel(h=h, profile=profile, **GROUND)
    return _flow_case(m, ad.Functional("ground_pressure_target"))


# ---------------------------------------------------------------------------
# criteria


def c1_table1():
    g = table1_grid()
    reg = TABLE1["region"]
    st = bg.gradient_study(bg.atan_initial, bg.atan_initial_da, g, reg, fd_step=0.01)
    du = bg.atan_initial_da()(g.x)
    base = bg.atan_initial()(g.x)
    fd, sweep = bg.fd_plateau(lambda e: bg.functional_J(bg.run_forward(base + e * du, g), reg))
    cs = bg.functional_J(bg.run_forward(base + 1e-30j * du, g), reg).imag / 1e-30
    fine = bg.gradient_study(bg.atan_initial, bg.atan_initial_da, table1_grid(2 * g.n), reg)
    checks = [
        Check("duality_vs_fd_rel", _rel(st.gradient, fd), 1e-6),
        Check("duality_vs_complex_step_rel", _rel(st.gradient, cs), 1e-12, required=False),
        Check("fd_0.01_vs_adjoint_rel", _rel(st.fd_gradient, st.gradient), 0.01),
        Check("J_fine_vs_reference_rel", _rel(fine.J, TABLE1_REFERENCE["J"]), 0.02),
        Check("grad_fine_vs_reference_rel", _rel(fine.gradient, TABLE1_REFERENCE["gradient"]), 0.02),
    ]
    data = dict(J=st.J, gradient=st.gradient, fd_0_01=st.fd_gradient, fd_plateau=fd,
                complex_step=cs, J_fine=fine.J, gradient_fine=fine.gradient)
    return checks, data


ANALYTIC_LITERAL = 0.25      # printed value at T = 1


def analytic_gradient(T) -> float:
    """d/da of 1/2 int_{-1/2}^{1/2} u(x, T; a)^2 at a = 0 for the Riemann data
    (left derivative at T = 1, where the shock reaches the region edge)."""
    return (3.0 * T + 2.0) / 4.0


def analytic_study(T=1.0, ns=(1000, 2000, 4000), lo=-2.0, hi=2.0):
    out = []
    for n in ns:
        g = bg.Grid1D.for_profile(bg.riemann_initial(), lo, hi, n, T)
        st = bg.gradient_study(bg.riemann_initial, bg.riemann_initial_da, g, (-0.5, 0.5))
        out.append((n, st.J, st.gradient, st.fd_gradient))
    return out


def c2_analytic():
    T = 1.0
    rows = analytic_study(T)
    g = [r[2] for r in rows]
    order = math.log2(abs(g[0] - g[1]) / max(abs(g[1] - g[2]), 1e-300))
    checks = [
        Check("grad_n4000_vs_0.25_rel", _rel(g[-1], ANALYTIC_LITERAL), 0.01),
        Check("observed_order", order, 0.8, ">="),
        Check("grad_n4000_vs_(3T+2)/4_rel", _rel(g[-1], analytic_gradient(T)), 0.01, required=False),
    ]
    return checks, dict(rows=rows, exact=analytic_gradient(T), order=order)


def c3_shock_continuity(T=0.6, ns=(1000, 2000, 4000), window=0.1):
    checks, rows = [], []
    worst_ratio, min_jump = 0.0, math.inf
    for n in ns:
        g = bg.Grid1D.for_profile(bg.riemann_initial(), -3.0, 3.0, n, T)
        traj = bg.run_forward(bg.riemann_initial(), g)
        P = bg.burgers_adjoint(traj, (-0.5, 0.5))
        m = g.n_steps // 2
        k = int(np.argmax(np.abs(np.diff(traj.states[m]))))
        sj = float(np.abs(np.diff(P[m]))[max(k - 2, 0):k + 3].max())
        bound = 5.0 * g.dx * float(np.abs(P[m]).max())
        x = g.x
        jumps = [abs(np.interp(x0 - window, x, P[0]) - np.interp(x0 + window, x, P[0]))
                 for x0 in (-T / 2, T / 2)]
        worst_ratio = max(worst_ratio, sj / bound)
        min_jump = min(min_jump, *jumps)
        rows.append((n, sj, bound, *jumps))
    checks.append(Check("shock_jump_over_bound_max", worst_ratio, 1.0, "<"))
    checks.append(Check("characteristic_jump_min", min_jump, 0.4, ">="))
    return checks, dict(rows=rows, T=T, window=window)


def c4_calculus(n_cases=200, seed=0):
    rng = np.random.default_rng(seed)
    PF = cc.PiecewiseFunction1D
    worst = 0.0
    grid = np.linspace(-2, 2, 9)

    def poly():
        return list(np.round(rng.uniform(-3, 3, rng.integers(1, 4)), 3))

    for _ in range(n_cases):
        xs = round(float(rng.uniform(-1, 1)), 3)
        rho, u = PF((xs,), (poly(), poly())), PF((xs,), (poly(), poly()))
        # product rule in the sense of distributions
        lhs = (rho * u).derivative()
        rhs = rho.derivative() * u + rho * u.derivative()
        worst = max(worst, abs(lhs.dirac_at(xs) - rhs.dirac_at(xs)),
                    float(np.abs(lhs(grid) - rhs(grid)).max()))
        # product variation with a common shift: weight -shift [rho u]
        s = float(rng.uniform(-2, 2))
        dr = PF((xs,), ([0.0], [0.0]), {xs: -s * cc.jump(rho, xs)})
        du = PF((xs,), ([0.0], [0.0]), {xs: -s * cc.jump(u, xs)})
        pv = cc.extended_product_variation(rho, u, dr, du)
        worst = max(worst, abs(pv.dirac_at(xs) + s * cc.jump(rho * u, xs)))
        # Volpert: [rho^2/2]/[rho] = mean(rho)
        a, b = np.round(rng.uniform(0.1, 5, 2), 3)
        worst = max(worst, abs(cc.volpert_ratio(lambda r: 0.5 * r * r, a, b) - 0.5 * (a + b)))
        # chain variation at a shock
        H = PF.heaviside(0.0, a, b)
        f = lambda r: r ** 3 + 2 * r  # noqa: E731
        cv = cc.extended_chain_variation(f, H, cc.heaviside_variation(0.0, 0.0, 0.0, a, b, s),
                                         df=lambda r: 3 * r ** 2 + 2)
        worst = max(worst, abs(cv.dirac_at(0.0) + s * (f(b) - f(a))) / max(1.0, abs(f(b))))
    return [Check("max_identity_error", worst, 1e-12)], dict(cases=n_cases)


def _random_states(n, rng, mach_max=3.0):
    rho = rng.uniform(0.2, 3.0, n)
    p = rng.uniform(0.1, 3.0, n)
    c = np.sqrt(1.4 * p / rho)
    ang = rng.uniform(0, 2 * np.pi, n)
    M = rng.uniform(0, mach_max, n)
    return gas.primitive_to_conservative(rho, M * c * np.cos(ang), M * c * np.sin(ang), p)


def c5_building_blocks(seed=0):
    rng = np.random.default_rng(seed)
    W = _random_states(100, rng)
    n = rng.normal(size=(100, 2))
    A = gas.flux_jacobian_normal(W, n)
    jac_err = 0.0
    for k in range(len(W)):
        h = 1e-6 * np.linalg.norm(W[k])
        fd = np.stack([(gas.flux_normal(W[k] + h * e, n[k]) - gas.flux_normal(W[k] - h * e, n[k])) / (2 * h)
                       for e in np.eye(4)], axis=1)
        jac_err = max(jac_err, np.abs(A[k] - fd).max() / np.abs(fd).max())
    absA = gas.abs_jacobian(W, n, entropy_eps=0.0)
    sq = np.abs(absA @ absA - A @ A).max(axis=(1, 2)) / np.abs(A @ A).max(axis=(1, 2))
    Wj = _random_states(100, rng)
    dF = gas.flux_normal(Wj, n) - gas.flux_normal(W, n)
    roe = np.einsum("kij,kj->ki", gas.flux_jacobian_normal(gas.roe_average(W, Wj), n), Wj - W) - dF
    roe_err = float((np.abs(roe).max(axis=1) / np.abs(dF).max(axis=1)).max())
    flat = generate_wedge_channel(h=0.1, wedge_angle=0.0)
    cfg = sv.SolverConfig()
    Wc = sv.freestream_field(flat, cfg)
    scale = np.abs(gas.flux(cfg.w_inf())).max()
    const = float(np.abs(sv.residual(Wc, flat, cfg)).max() / scale)
    m = generate_wedge_channel(h=0.1)
    Wc = sv.freestream_field(m, cfg)
    Wp = Wc * (1 + 0.05 * rng.uniform(-1, 1, Wc.shape))
    R = sv.residual(Wp, m, cfg)
    B = sv._boundary_fluxes(Wp, m, cfg).sum(axis=0)
    tele = float(np.abs(R.sum(axis=0) - B).max() / np.abs(R).sum(axis=0).max())
    checks = [Check("flux_jacobian_fd_rel", jac_err, 1e-6),
              Check("absA2_minus_A2_rel", float(sq.max()), 1e-10),
              Check("roe_property_rel", roe_err, 1e-8),
              Check("constant_state_residual", const, 1e-11),
              Check("telescoping_rel", tele, 1e-11)]
    return checks, {}


def c6_duality(h=WEDGE_H, eps=1e-5):
    case = wedge_case(h)
    m, W, cfg, fn = case.mesh, case.field, case.config, case.functional
    g = ad.adjoint_gradient_rho_inf(W, case.adjoint, m, cfg)
    rho = cfg.freestream.rho
    vals = []
    for s in (1, -1):
        c2 = ad.with_rho_inf(cfg, rho * (1 + s * eps))
        r = sv.solve_steady(m, c2, W0=W)
        if not r.converged:
            raise sv.ConvergenceError("perturbed solve did not converge", r)
        vals.append(ad.functional_value(r.field, m, fn, c2))
    fd = (vals[0] - vals[1]) / (2 * eps * rho)
    checks = [Check("dJ_drho_inf_rel", _rel(g, fd), 1e-3),
              Check("adjoint_linear_residual", case.rel_residual, cfg.linear_tol, required=False)]
    return checks, dict(vertices=m.n_vertices, adjoint=g, fd=fd)


def c7_outflow(h_fine=WEDGE_H, seed=1):
    rng = np.random.default_rng(seed)
    W = _random_states(200, rng)
    W[:, 1] = np.abs(W[:, 1]) + 0.1 * W[:, 0]       # outgoing flow through x = const
    rho_inf = 1.0
    ws = ad.analytic_outflow_adjoint(W, rho_inf)
    A = gas.flux_jacobian_normal(W, np.array([1.0, 0.0]))
    target = np.zeros_like(W)
    target[:, 0] = (W[:, 0] / rho_inf - 1) / rho_inf
    ident = float(np.abs(np.einsum("pi,pij->pj", ws, A) - target).max() / np.abs(target).max())
    reps = {}
    for h in (2 * h_fine, h_fine):
        case = wedge_case(h)
        reps[h] = ad.verify_outflow_bc(case.adjoint, case.field, case.mesh, case.functional, case.config)
    coarse, fine = reps[2 * h_fine], reps[h_fine]
    checks = [Check("identity_rel", ident, 1e-10),
              Check("max_rel_smooth_fine", fine.max_rel_smooth, 0.05),
              Check("refinement_ratio", fine.max_rel_smooth / coarse.max_rel_smooth, 1.0, "<"),
              Check("flagged_fine", float(fine.excluded.sum()), 0, ">=", required=False)]
    return checks, dict(reports=reps)


def c8_ground(hs=(0.04, 0.02)):
    reps = {}
    for h in hs:
        case = ground_case(h)
        # the continuous adjoint corresponds to -lam here
        reps[h] = ad.ground_adjoint_check(case.adjoint, case.field, case.mesh, case.functional,
                                          case.config, sign=-1.0)
    coarse, fine = reps[hs[0]], reps[hs[-1]]
    checks = [Check("correlation_fine", fine.correlation(), 0.98, ">"),
              Check("max_rel_smooth_fine", fine.max_rel_smooth, 0.05),
              Check("refinement_ratio", fine.max_rel_smooth / coarse.max_rel_smooth, 1.0, "<"),
              Check("correlation_coarse", coarse.correlation(), 0.98, ">", required=False)]
    return checks, dict(reports=reps)


def _resolve_J(case: FlowCase, mesh):
    r = sv.solve_steady(mesh, case.config, W0=case.field)
    if not r.converged:
        raise sv.ConvergenceError("displaced-wall solve did not converge", r)
    return ad.functional_value(r.field, mesh, case.functional, case.config)


def c9_shape(h=0.04, amplitude=1e-4):
    case = ground_case(h, "arc")
    m, W, lam, cfg = case.mesh, case.field, case.adjoint, case.config
    J0 = ad.functional_value(W, m, case.functional, cfg)
    sg = ad.shape_gradient(lam, W, m, 1.0, cfg, wall_vertices=body_vertices(m))
    step = amplitude / max(np.abs(sg.density).max(), 1e-300)
    sg = ad.shape_gradient(lam, W, m, step, cfg, wall_vertices=body_vertices(m))
    actual = _resolve_J(case, ad.displace_wall(m, sg.vertices, sg.normals, sg.alpha)) - J0
    pred = sg.predicted_dJ
    # discrete shape gradient for the same kind of displacement
    d = ad.discrete_shape_gradient(lam, W, m, cfg, sg.vertices, sg.normals, case.functional)
    d[sg.alpha == 0] = 0.0
    a2 = -amplitude * d / max(np.abs(d).max(), 1e-300)
    actual2 = _resolve_J(case, ad.displace_wall(m, sg.vertices, sg.normals, a2)) - J0
    pred2 = float(d @ a2)
    checks = [Check("predicted_dJ", pred, 0.0, "<="),
              Check("actual_dJ", actual, 0.0, "<"),
              Check("actual_vs_predicted_rel", _rel(actual, pred), 0.3),
              Check("discrete_actual_dJ", actual2, 0.0, "<", required=False),
              Check("discrete_actual_vs_predicted_rel", _rel(actual2, pred2), 0.3, required=False)]
    return checks, dict(J0=J0, predicted=pred, actual=actual, discrete_predicted=pred2,
                        discrete_actual=actual2, shape=sg)


def _outflow_shock_point(case: FlowCase):
    m = case.mesh
    v = m.boundary_vertices("outflow_free")
    v = v[np.argsort(m.vertices[v, 1])]
    k = int(np.argmax(np.abs(np.diff(case.field[v, 0]))))
    return 0.5 * (m.vertices[v[k]] + m.vertices[v[k + 1]])


def jump_geography(case: FlowCase, theta=3.0, margin=0.15, radius=0.1):
    m = case.mesh
    mid = ad.edge_midpoints(m)
    er = ad.jump_detector(case.field[:, 0], m, theta)
    el = ad.jump_detector(case.adjoint[:, 0], m, theta)
    xmax = m.vertices[:, 0].max()
    shock = set(er[mid[er, 0] < xmax - margin].tolist())
    overlap = len(shock & set(el.tolist())) / max(len(shock), 1)
    P = _outflow_shock_point(case)
    E = m.edges[el]
    G = coo_matrix((np.ones(len(E)), (E[:, 0], E[:, 1])), shape=(m.n_vertices,) * 2)
    _, lab = connected_components(G, directed=False)
    near = np.hypot(*(mid[el] - P).T) < radius
    reach = 0.0
    for c in set(lab[E[near, 0]].tolist()):
        vs = np.unique(E[lab[E[:, 0]] == c])
        reach = max(reach, float(np.hypot(*(m.vertices[vs] - P).T).max()))
    return dict(overlap=overlap, shock_edges=len(shock), adjoint_edges=len(el),
                near_intersection=int(near.sum()), reach=reach, intersection=P,
                rho_edges=er, adjoint_jump_edges=el)


def c10_geography(h=WEDGE_H):
    geo = jump_geography(wedge_case(h))
    checks = [Check("overlap_fraction", geo["overlap"], 0.10, "<"),
              Check("adjoint_jumps_near_intersection", float(geo["near_intersection"]), 5, ">="),
              Check("adjoint_jump_reach", geo["reach"], 0.15, ">=")]
    return checks, geo


CRITERIA = [
    Criterion(1, "burgers-table1", "burgers", "Burgers Table 1 gradient", 10, c1_table1),
    Criterion(2, "burgers-analytic", "burgers", "analytic Burgers gradient", 30, c2_analytic),
    Criterion(3, "burgers-shock-continuity", "burgers", "adjoint continuity across the shock", 30,
              c3_shock_continuity),
    Criterion(4, "calculus-identities", "calculus", "extended calculus identities", 1, c4_calculus),
    Criterion(5, "euler-building-blocks", "euler", "flux Jacobians, Roe property, conservation", 5,
              c5_building_blocks),
    Criterion(6, "euler-duality", "euler", "2D discrete duality dJ/drho_inf", 300, c6_duality),
    Criterion(7, "euler-outflow-bc", "euler", "outflow adjoint boundary condition", 600, c7_outflow),
    Criterion(8, "euler-ground-bc", "euler", "ground adjoint boundary condition", 600, c8_ground),
    Criterion(9, "euler-shape-gradient", "euler", "shape gradient decrease", 600, c9_shape),
    Criterion(10, "euler-jump-geography", "euler", "adjoint jump geography", 300, c10_geography),
]


def select(pattern: str | None = None) -> list:
    return [c for c in CRITERIA if c.matches(pattern)]


def run_all(pattern: str | None = None, echo=None) -> list:
    out = []
    for crit in select(pattern):
        r = crit.run()
        if echo:
            echo(r.line())
        out.append(r)
    return out
