from dataclasses import replace

import numpy as np
import pytest

from adjeuler import adjoint as ad
from adjeuler import gas
from adjeuler.mesh import body_vertices, generate_wedge_channel, rectangle_mesh
from adjeuler.solver import (SolverConfig, assemble_first_order_jacobian, freestream_field,
                             solve_steady)

CFG = SolverConfig(muscl=False, convergence_tol=1e-12, max_steps=200, cfl=5, jacobian="exact")


@pytest.fixture(scope="module")
def wedge():
    m = generate_wedge_channel(h=0.1)
    r = solve_steady(m, CFG)
    assert r.converged
    return m, r.field


@pytest.fixture(scope="module")
def ground():
    m = generate_wedge_channel(length=2.0, h=0.1, wall="top", bottom_tag="ground",
                               wedge_start=0.2, wedge_end=0.6, wedge_angle=5.0, profile="arc")
    r = solve_steady(m, CFG)
    assert r.converged
    return m, r.field


def random_state(n, seed=0):
    rng = np.random.default_rng(seed)
    return gas.primitive_to_conservative(rng.uniform(0.5, 2, n), rng.uniform(1, 3, n),
                                         rng.uniform(-0.5, 0.5, n), rng.uniform(0.5, 2, n))


def test_functional_examples(wedge):
    m, _ = wedge
    fn = ad.Functional()
    W = freestream_field(m, CFG)
    assert ad.functional_value(W, m, fn, CFG) == 0.0
    assert not ad.functional_gradient_rhs(W, m, fn, CFG).any()
    assert not ad.solve_adjoint(W, m, fn, CFG).field.any()
    W2 = W.copy()
    W2[:, 0] = 2.0
    L = np.ptp(m.vertices[m.boundary_vertices("outflow_free"), 1])
    assert ad.functional_value(W2, m, fn, CFG) == pytest.approx(L / 2, rel=1e-12)
    with pytest.raises(ValueError):
        ad.Functional("drag")
    with pytest.raises(ValueError):
        ad.functional_value(W, m, ad.Functional("ground_pressure_target"), CFG)


@pytest.mark.parametrize("kind", ["outflow_density_target", "ground_pressure_target"])
def test_rhs_matches_finite_differences(ground, kind):
    m, _ = ground
    fn = ad.Functional(kind, tag="outflow_free" if kind.startswith("outflow") else None, rho_ref=1.3)
    W = random_state(m.n_vertices)
    rhs = ad.functional_gradient_rhs(W, m, fn, CFG)
    v = m.boundary_vertices(fn.boundary_tag)[:4]
    for i in v:
        for c in range(4):
            e = np.zeros_like(W)
            e[i, c] = 1e-6
            fd = (ad.functional_value(W + e, m, fn, CFG) - ad.functional_value(W - e, m, fn, CFG)) / 2e-6
            assert rhs[i, c] == pytest.approx(fd, rel=1e-6, abs=1e-12)
    if kind.startswith("ground"):
        rho, u, v_, p = gas.primitives(W[v])
        dp = 0.4 * np.stack([0.5 * (u * u + v_ * v_), -u, -v_, np.ones_like(u)], axis=1)
        np.testing.assert_allclose(rhs[v] / rhs[v, 3:4], dp / dp[:, 3:4], rtol=1e-12)


def test_analytic_outflow_identity():
    W = random_state(50, seed=1)
    rho_inf = 1.2
    ws = ad.analytic_outflow_adjoint(W, rho_inf)
    A = gas.flux_jacobian_normal(W, np.array([1.0, 0.0]))
    lhs = np.einsum("pi,pij->pj", ws, A)
    target = np.zeros_like(W)
    target[:, 0] = (W[:, 0] / rho_inf - 1) / rho_inf
    np.testing.assert_allclose(lhs, target, atol=1e-12)
    rho, u, v, p = gas.primitives(W)
    np.testing.assert_allclose(ws[:, 2] / ws[:, 3], -v, rtol=1e-12)
    Wf = W.copy()
    Wf[:, 0] = rho_inf
    Wf[:, 1:] *= (rho_inf / W[:, 0])[:, None]
    assert not ad.analytic_outflow_adjoint(Wf, rho_inf).any()
    with pytest.raises(ad.SingularityError):
        ad.analytic_outflow_adjoint(gas.primitive_to_conservative(1.0, 0.0, 0.3, 1.0), rho_inf)


def test_adjoint_duality(wedge):
    m, W = wedge
    fn = ad.Functional()
    res = ad.solve_adjoint(W, m, fn, CFG)
    assert res.rel_residual < 1e-10
    J = assemble_first_order_jacobian(W, m, CFG)
    dW = np.random.default_rng(2).normal(size=W.shape)
    rhs = ad.functional_gradient_rhs(W, m, fn, CFG)
    assert np.sum(res.field * J.matvec(dW)) == pytest.approx(np.sum(rhs * dW), rel=1e-9)


def test_rho_inf_gradient_against_resolve(wedge):
    m, W = wedge
    fn = ad.Functional()
    lam = ad.solve_adjoint(W, m, fn, CFG).field
    g = ad.adjoint_gradient_rho_inf(W, lam, m, CFG)
    fs = CFG.freestream
    vals = []
    for s in (1, -1):
        # same velocity and pressure, perturbed density
        k = 1 + s * 1e-5
        cfg = replace(CFG, freestream=replace(fs, rho=fs.rho * k, mach=fs.mach * np.sqrt(k)))
        vals.append(ad.functional_value(solve_steady(m, cfg, W0=W).field, m, fn, cfg))
    fd = (vals[0] - vals[1]) / (2e-5 * fs.rho)
    assert g == pytest.approx(fd, rel=1e-5)


def test_manufactured_boundary_report(wedge):
    m, W = wedge
    fn = ad.Functional()
    v = m.boundary_vertices("outflow_free")
    lam = np.zeros_like(W)
    lam[v] = ad.analytic_outflow_adjoint(W[v], fn.rho_ref)
    rep = ad.verify_outflow_bc(lam, W, m, fn, CFG)
    assert rep.abs_err.max() < 1e-14
    assert ad.outflow_right_boundary_zero_check(lam, m, fn) is None


def test_ground_check_sign(ground):
    m, W = ground
    fn = ad.Functional("ground_pressure_target")
    lam = ad.solve_adjoint(W, m, fn, CFG).field
    assert ad.ground_adjoint_check(lam, W, m, fn, CFG, sign=-1).correlation() > 0.8
    assert ad.ground_adjoint_check(lam, W, m, fn, CFG, sign=1).correlation() < -0.8
    r = ad.outflow_right_boundary_zero_check(lam, m, fn)
    assert 0 <= r < 1


def test_wall_residual_manual(wedge):
    m, _ = wedge
    lam = np.random.default_rng(3).normal(size=(m.n_vertices, 4))
    v, r, rel = ad.airfoil_adjoint_bc_residual(lam, m)
    n = m.vertex_normals()[v]
    # vertex normals agree with the integrated normals away from corners
    smooth = ~np.isin(v, m.corner_vertices())
    np.testing.assert_allclose(r[smooth], (lam[v, 1] * n[:, 0] + lam[v, 2] * n[:, 1])[smooth], atol=1e-12)
    assert np.all(rel <= np.sqrt(2) + 1e-12)


def test_shape_gradient_basics(ground):
    m, W = ground
    body = body_vertices(m)
    sg = ad.shape_gradient(np.zeros_like(W), W, m, 1.0, CFG, wall_vertices=body)
    assert not sg.alpha.any() and sg.predicted_dJ == 0.0
    lam = np.random.default_rng(4).normal(size=W.shape)
    sg = ad.shape_gradient(lam, W, m, 0.1, CFG, wall_vertices=body)
    assert sg.predicted_dJ <= 0.0
    assert sg.alpha[0] == 0.0 and sg.alpha[-1] == 0.0
    assert np.all(sg.normals[:, 1] > 0)     # wall on top, outward is up


def test_circle_curvature():
    t = np.linspace(0, np.pi / 2, 30)
    X = np.c_[np.cos(t), np.sin(t)] * 2.0
    k = ad.polyline_curvature(X)
    np.testing.assert_allclose(k[1:-1], 0.5, rtol=1e-10)
    assert not ad.polyline_curvature(np.c_[t, 2 * t]).any()


def test_discrete_shape_gradient_predicts_change(ground):
    m, W = ground
    fn = ad.Functional("ground_pressure_target")
    lam = ad.solve_adjoint(W, m, fn, CFG).field
    body = body_vertices(m)
    sg = ad.shape_gradient(lam, W, m, 1.0, CFG, wall_vertices=body)
    d = ad.discrete_shape_gradient(lam, W, m, CFG, sg.vertices, sg.normals, fn)
    alpha = np.zeros(len(d))
    alpha[1:-1] = -1e-3 * d[1:-1] / np.abs(d).max()
    m2 = ad.displace_wall(m, sg.vertices, sg.normals, alpha)
    np.testing.assert_allclose(m2.vertices[sg.vertices] @ [0, 1] - m.vertices[sg.vertices] @ [0, 1],
                               alpha / sg.normals[:, 1], atol=1e-15)
    J0 = ad.functional_value(W, m, fn, CFG)
    dJ = []
    for s in (1, -1):
        ms = ad.displace_wall(m, sg.vertices, sg.normals, s * alpha)
        dJ.append(ad.functional_value(solve_steady(ms, CFG, W0=W).field, ms, fn, CFG) - J0)
    assert dJ[0] < 0
    assert np.dot(d, alpha) == pytest.approx(0.5 * (dJ[0] - dJ[1]), rel=0.01)


def test_jump_detector_sets():
    m = rectangle_mesh(20, 20)
    x = m.vertices[:, 0]
    assert len(ad.jump_detector(1 + 2 * x, m)) == 0
    f = x + 10.0 * (x > 0.52)
    e = ad.jump_detector(f, m)
    xi, xj = x[m.edges[:, 0]], x[m.edges[:, 1]]
    crossing = np.nonzero((np.minimum(xi, xj) < 0.52) & (np.maximum(xi, xj) > 0.52))[0]
    assert np.array_equal(np.sort(e), crossing)
    assert len(ad.jump_detector(np.ones(m.n_vertices), m)) == 0


def test_oblique_shock_relations():
    beta = ad.oblique_shock_angle(2.0, 10.0)
    assert beta == pytest.approx(39.31, abs=0.01)
    np.testing.assert_allclose(ad.oblique_shock_state(2.0, 10.0), (1.4584, 1.7066, 1.6405), atol=1e-4)
