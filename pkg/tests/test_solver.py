from dataclasses import replace

import numpy as np
import pytest

from adjeuler import gas
from adjeuler import solver as s
from adjeuler.adjoint import oblique_shock_angle, oblique_shock_state
from adjeuler.mesh import BoundaryTag, generate_wedge_channel, locate_points, rectangle_mesh

CFG = s.SolverConfig()
FO = replace(CFG, muscl=False)


@pytest.fixture(scope="module")
def channel():
    return generate_wedge_channel(h=0.1, wedge_angle=0.0)


@pytest.fixture(scope="module")
def wedge():
    return generate_wedge_channel(h=0.08)


def perturbed(mesh, amp=0.05, seed=0):
    rng = np.random.default_rng(seed)
    W = s.freestream_field(mesh, CFG)
    return W * (1 + amp * rng.uniform(-1, 1, W.shape))


def test_config_validation():
    with pytest.raises(ValueError):
        s.SolverConfig(implicit=False, cfl=1.5)
    with pytest.raises(ValueError):
        s.SolverConfig(limiter="superbee")
    with pytest.raises(ValueError):
        s.SolverConfig(jacobian="approx")
    assert s.SolverConfig(implicit=True, cfl=50).cfl == 50


@pytest.mark.parametrize("cfg", [CFG, FO], ids=["muscl", "first_order"])
def test_constant_state_preserved(channel, cfg):
    W = s.freestream_field(channel, cfg)
    R = s.residual(W, channel, cfg)
    F = np.abs(gas.flux(cfg.w_inf())).max()
    assert np.abs(R).max() < 1e-11 * F


def test_interior_fluxes_telescope(wedge):
    W = perturbed(wedge)
    R = s.residual(W, wedge, CFG)
    B = s._boundary_fluxes(W, wedge, CFG).sum(axis=0)
    assert np.abs(R.sum(axis=0) - B).max() < 1e-11 * np.abs(R).sum(axis=0).max()


def test_roe_flux_identities():
    rng = np.random.default_rng(1)
    Wi = gas.primitive_to_conservative(rng.uniform(0.5, 2, 50), rng.uniform(-1, 1, 50),
                                       rng.uniform(-1, 1, 50), rng.uniform(0.5, 2, 50))
    Wj = gas.primitive_to_conservative(rng.uniform(0.5, 2, 50), rng.uniform(-1, 1, 50),
                                       rng.uniform(-1, 1, 50), rng.uniform(0.5, 2, 50))
    n = rng.normal(size=(50, 2))
    np.testing.assert_allclose(s.roe_flux(Wi, Wi, n), gas.flux_normal(Wi, n), atol=1e-14)
    assert np.array_equal(s.roe_flux(Wj, Wi, -n), -s.roe_flux(Wi, Wj, n))
    # supersonic along n: pure upwinding
    a = gas.primitive_to_conservative(1.0, 3.0, 0.1, 0.7)
    b = gas.primitive_to_conservative(1.1, 2.9, 0.0, 0.75)
    nn = np.array([0.8, 0.1])
    np.testing.assert_allclose(s.roe_flux(a, b, nn), gas.flux_normal(a, nn), rtol=1e-10, atol=1e-12)


def test_first_order_matches_1d_roe_column_sums():
    # supersonic x-only data: every dual face lies within 60 deg of x, so the
    # Roe flux is pure upwind and the column sums reduce to the 1D scheme
    nx, ny = 12, 3
    m = rectangle_mesh(nx, ny, lx=1.2, ly=0.3, diagonal="right",
                       tags={"left": "inflow_freestream", "right": "outflow_free"})
    cfg = replace(FO, freestream=s.Freestream(mach=3.0))
    X = m.vertices
    rho = 1 + 0.2 * np.sin(3 * X[:, 0])
    p = 1 / 1.4 * (1 + 0.1 * np.cos(2 * X[:, 0]))
    c = np.sqrt(1.4 * p / rho)
    W = gas.primitive_to_conservative(rho, 3.0 * c.max() * np.ones_like(rho), 0 * rho, p)
    R = s.residual(W, m, cfg)
    col = np.rint(X[:, 0] / 0.1).astype(int)
    H = 0.3
    xs = np.arange(nx + 1) * 0.1
    W1 = gas.primitive_to_conservative(1 + 0.2 * np.sin(3 * xs), 3.0 * c.max() * np.ones(nx + 1),
                                       0 * xs, 1 / 1.4 * (1 + 0.1 * np.cos(2 * xs)))
    e = np.array([1.0, 0.0])
    F = s.roe_flux(W1[:-1], W1[1:], np.tile(e, (nx, 1)), cfg)      # interfaces k+1/2
    for k in range(1, nx):
        ref = H * (F[k] - F[k - 1])
        got = R[col == k].sum(axis=0)
        np.testing.assert_allclose(got, ref, rtol=0, atol=1e-10 * np.abs(F).max())


def test_muscl_linear_exact_and_uniform(wedge):
    X = wedge.vertices
    W = s.freestream_field(wedge, CFG)
    Wij, Wji = s.muscl_extrapolate(W, wedge, CFG)
    assert np.array_equal(Wij, W[wedge.edges[:, 0]])
    lin = np.stack([1 + 0.1 * X[:, 0] + 0.05 * X[:, 1], 0.5 + 0.2 * X[:, 0],
                    0.1 + 0.1 * X[:, 1], 3 + 0.3 * X[:, 0] + 0.1 * X[:, 1]], axis=1)
    mid = 0.5 * (lin[wedge.edges[:, 0]] + lin[wedge.edges[:, 1]])
    for lim in ("none", "dervieux3", "minmod"):
        a, b = s.muscl_extrapolate(lin, wedge, replace(CFG, limiter=lim))
        interior = np.all(wedge.upwind[:, :, 0] >= 0, axis=1)
        np.testing.assert_allclose(a[interior], mid[interior], atol=1e-12)
        np.testing.assert_allclose(b[interior], mid[interior], atol=1e-12)


@pytest.mark.parametrize("lim", ["dervieux3", "minmod", "vanalbada"])
def test_muscl_bounded(wedge, lim):
    W = perturbed(wedge, 0.2, seed=4)
    a, b = s.muscl_extrapolate(W, wedge, replace(CFG, limiter=lim))
    Wi, Wj = W[wedge.edges[:, 0]], W[wedge.edges[:, 1]]
    lo, hi = np.minimum(Wi, Wj), np.maximum(Wi, Wj)
    tol = 1e-14
    for X in (a, b):
        assert np.all(X >= lo - tol) and np.all(X <= hi + tol)


def test_boundary_fluxes():
    rng = np.random.default_rng(2)
    W = gas.primitive_to_conservative(rng.uniform(0.5, 2, 20), rng.uniform(-1, 1, 20),
                                      rng.uniform(-1, 1, 20), rng.uniform(0.5, 2, 20))
    n = rng.normal(size=(20, 2))
    f = s.slip_flux(W, n)
    assert np.all(f[:, [0, 3]] == 0)
    winf = CFG.w_inf()
    nn = np.array([0.3, -0.7])
    np.testing.assert_allclose(s.inflow_flux(winf, nn, winf), gas.flux_normal(winf, nn), atol=1e-14)
    absA = gas.abs_jacobian(winf, nn, entropy_eps=0.0)
    np.testing.assert_allclose(s.inflow_flux(winf, nn, winf, convention="negated"), absA @ winf, atol=1e-14)
    # supersonic inflow: A+ = 0, the flux is A(W_i) W_inf, which tends to
    # F(W_inf).n quadratically since A(W) W = F(W)
    n_in = np.array([-0.2, 0.0])
    Wi = gas.primitive_to_conservative(1.2, 2.1, 0.05, 0.8)
    Ap, _ = gas.split_jacobians(Wi, n_in, entropy_eps=0.0)
    assert np.abs(Ap).max() < 1e-14
    np.testing.assert_allclose(s.inflow_flux(Wi, n_in, winf),
                               gas.flux_jacobian_normal(Wi, n_in) @ winf, atol=1e-13)
    errs = [np.abs(s.inflow_flux(winf + d * (Wi - winf), n_in, winf)
                   - gas.flux_normal(winf, n_in)).max() for d in (1e-2, 1e-3)]
    assert 80 < errs[0] / errs[1] < 120
    np.testing.assert_allclose(s.boundary_flux(Wi, n_in, "outflow_free", CFG), gas.flux_normal(Wi, n_in))


def test_rk2_steady_and_linear_ode(channel, monkeypatch):
    W = s.freestream_field(channel, FO)
    out = s.ssp_rk2_step(W, channel, FO, s.local_time_steps(W, channel, FO))
    np.testing.assert_allclose(out, W, atol=1e-13)
    k = 0.7
    winf = FO.w_inf()
    vol = channel.cell_volumes[:, None]
    monkeypatch.setattr(s, "residual", lambda W_, mesh, cfg, first_order=False: vol * k * (W_ - winf))
    W0 = W * 1.1
    errs = []
    for dt in (0.1, 0.05):
        W1 = s.ssp_rk2_step(W0, channel, FO, dt)
        taylor = winf + (W0 - winf) * (1 - k * dt + 0.5 * (k * dt) ** 2)
        np.testing.assert_allclose(W1, taylor, rtol=1e-13)
        errs.append(np.abs(W1 - (winf + (W0 - winf) * np.exp(-k * dt))).max())
    assert 7.0 < errs[0] / errs[1] < 9.0


def test_rk2_halves_dt_on_invalid_stage(channel):
    W = perturbed(channel, 0.05)
    with pytest.raises(s.InvalidStateError):
        s.ssp_rk2_step(W, channel, replace(FO, implicit=False, cfl=1.0), 1e3, max_retries=2)


def test_invalid_state_names_vertex(channel):
    W = s.freestream_field(channel, FO)
    W[7, 0] = -1.0
    with pytest.raises(s.InvalidStateError) as err:
        s.residual(W, channel, FO)
    assert err.value.vertex == 7


@pytest.mark.parametrize("ground", [False, True])
def test_frozen_jacobian_matches_fd(ground):
    m = generate_wedge_channel(h=0.1, wall="top" if ground else "bottom",
                               bottom_tag="ground" if ground else "slip_wall")
    W = perturbed(m, 0.03, seed=5)
    J = s.assemble_first_order_jacobian(W, m, FO, mode="frozen")
    rng = np.random.default_rng(6)
    for _ in range(3):
        v = rng.normal(size=W.shape) * np.abs(W)
        h = 1e-6
        fd = (s.frozen_residual(W + h * v, W, m, FO) - s.frozen_residual(W - h * v, W, m, FO)) / (2 * h)
        Jv = J.matvec(v)
        assert np.linalg.norm(Jv - fd) <= 1e-6 * np.linalg.norm(fd)
        np.testing.assert_allclose(J.to_csr() @ v.ravel(), Jv.ravel(), atol=1e-12)
        u = rng.normal(size=W.shape)
        assert np.sum(u * Jv) == pytest.approx(np.sum(J.rmatvec(u) * v), rel=1e-12)


def test_exact_jacobian_matches_fd(wedge):
    W = perturbed(wedge, 0.03, seed=7)
    J = s.assemble_first_order_jacobian(W, wedge, FO, mode="exact")
    v = np.random.default_rng(8).normal(size=W.shape) * np.abs(W)
    h = 1e-6
    fd = (s.residual(W + h * v, wedge, FO) - s.residual(W - h * v, wedge, FO)) / (2 * h)
    assert np.linalg.norm(J.matvec(v) - fd) <= 1e-6 * np.linalg.norm(fd)


def test_jacobian_rows_sum_to_zero_for_uniform_field(wedge):
    W = s.freestream_field(wedge, FO)
    J = s.assemble_first_order_jacobian(W, wedge, FO, mode="frozen")
    rows = J.diag.copy()
    np.add.at(rows, wedge.edges[:, 0], J.off[:, 0])
    np.add.at(rows, wedge.edges[:, 1], J.off[:, 1])
    interior = np.setdiff1d(np.arange(wedge.n_vertices), wedge.bnd_vertex)
    assert np.abs(rows[interior]).max() < 1e-12 * np.abs(J.diag).max()


def test_slip_block_structure(wedge):
    W = perturbed(wedge, 0.03, seed=9)
    dB = s._boundary_jacobian_frozen(W, wedge, FO)
    k = np.nonzero(wedge.bnd_tag == int(BoundaryTag.SLIP_WALL))[0][0]
    Wb = W[wedge.bnd_vertex[k]]
    dp = gas.pressure_jacobian(Wb)
    basis = np.linalg.svd(dp[None, :])[2][1:]        # null space of dp/dW
    assert np.abs(dB[k] @ basis.T).max() < 1e-14
    assert np.all(dB[k][[0, 3]] == 0)


def test_linear_solvers_agree(wedge):
    W = perturbed(wedge, 0.03, seed=10)
    J = s.assemble_first_order_jacobian(W, wedge, FO).add_diagonal(wedge.cell_volumes / 0.01)
    rhs = np.random.default_rng(11).normal(size=W.shape)
    x1, i1 = s.solve_linear(J, rhs, FO, method="gmres")
    x2, _ = s.solve_linear(J, rhs, FO, method="direct")
    assert i1["rel_residual"] < 1e-8
    np.testing.assert_allclose(x1, x2, atol=1e-6 * np.abs(x2).max())
    y, info = s.solve_linear(J, rhs, FO, transpose=True)
    np.testing.assert_allclose(J.rmatvec(y), rhs, atol=1e-6 * np.abs(rhs).max())


def test_freestream_converges_immediately(channel):
    r = s.solve_steady(channel, FO)
    assert r.converged and r.steps == 0


def test_implicit_step_steady_is_fixed_point(channel):
    W = s.freestream_field(channel, FO)
    Wn, _ = s.implicit_step(W, channel, FO, cfl=100)
    np.testing.assert_allclose(Wn, W, atol=1e-12)


@pytest.fixture(scope="module")
def wedge_solution():
    m = generate_wedge_channel(h=0.04)
    cfg = replace(FO, convergence_tol=1e-9, cfl=5, max_steps=100)
    return m, cfg, s.solve_steady(m, cfg)


def test_wedge_oblique_shock(wedge_solution):
    m, cfg, r = wedge_solution
    assert r.converged
    W = r.field
    beta = oblique_shock_angle(2.0, 10.0)
    assert beta == pytest.approx(39.31, abs=0.01)
    rr, pr, _ = oblique_shock_state(2.0, 10.0)
    locs = []
    for y in (0.15, 0.25, 0.35, 0.45, 0.55):
        pts, vals = s.probe_line(m, W[:, 0], (0.5, y), (1.5, y), 4001)
        locs.append(pts[np.argmax(vals > 0.5 * (1 + rr)), 0])
    slope = np.polyfit([0.15, 0.25, 0.35, 0.45, 0.55], locs, 1)[0]
    assert np.degrees(np.arctan(1 / slope)) == pytest.approx(beta, abs=1.0)
    for x in (1.1, 1.3, 1.45):
        y = (x - 0.5) * np.tan(np.radians(10)) + 0.03
        t, b = locate_points(m, [[x, y]])
        w = b[0] @ W[m.triangles[t[0]]]
        assert w[0] == pytest.approx(rr, rel=0.01)
        assert gas.pressure(w) == pytest.approx(pr / 1.4, rel=0.01)


def test_residual_history_superlinear_tail(wedge_solution):
    _, _, r = wedge_solution
    res = np.array([max(h[2:]) for h in r.history])
    tail = res[-5:]
    assert np.all(np.diff(tail) < 0)
    # Newton-like: the last reductions accelerate
    assert tail[-1] / tail[-2] < tail[-3] / tail[-4]


def test_permutation_invariance():
    m = generate_wedge_channel(h=0.1)
    cfg = replace(FO, convergence_tol=1e-10, cfl=5, max_steps=80, linear_solver="direct")
    perm = np.random.default_rng(12).permutation(m.n_vertices)
    a = s.solve_steady(m, cfg).field
    b = s.solve_steady(m.permuted(perm), cfg).field
    np.testing.assert_allclose(b[perm], a, atol=1e-9)


def test_deterministic_residual(wedge):
    W = perturbed(wedge, 0.05, seed=13)
    assert np.array_equal(s.residual(W, wedge, CFG), s.residual(W, wedge, CFG))


def test_outputs(tmp_path, wedge):
    W = s.freestream_field(wedge, FO)
    p = tmp_path / "f.vtk"
    s.write_vtk(p, wedge, s.flow_point_data(W))
    text = p.read_text()
    assert text.startswith("# vtk DataFile Version 3.0")
    assert f"POINTS {wedge.n_vertices} double" in text
    text.encode("ascii")
    r = s.solve_steady(generate_wedge_channel(h=0.1, wedge_angle=0.0), FO)
    s.write_convergence_log(tmp_path / "log.csv", r)
    assert (tmp_path / "log.csv").read_text().splitlines()[0].startswith("step")
