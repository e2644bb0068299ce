import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adjeuler import gas
from adjeuler.gas import ConservativeState, DomainError, GasModel

G = 1.4


def random_states(n, seed=0, mach_max=3.0):
    rng = np.random.default_rng(seed)
    rho = rng.uniform(0.2, 3.0, n)
    p = rng.uniform(0.1, 3.0, n)
    c = np.sqrt(G * p / rho)
    ang = rng.uniform(0, 2 * np.pi, n)
    M = rng.uniform(0, mach_max, n)
    return gas.primitive_to_conservative(rho, M * c * np.cos(ang), M * c * np.sin(ang), p)


def random_normals(n, seed=1):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, 2)) * rng.uniform(0.1, 2.0, (n, 1))


state_st = st.tuples(
    st.floats(0.1, 5.0), st.floats(-3.0, 3.0), st.floats(-3.0, 3.0), st.floats(0.05, 5.0)
).map(lambda t: gas.primitive_to_conservative(*t))
normal_st = st.tuples(st.floats(-2, 2), st.floats(-2, 2)).filter(
    lambda n: np.hypot(*n) > 1e-2).map(np.array)


def test_pressure_examples():
    assert gas.pressure(np.array([1.0, 0, 0, 1.0])) == pytest.approx(0.4, abs=1e-15)
    assert gas.pressure(np.array([1.0, 1.0, 0, 1.0])) == pytest.approx(0.2, abs=1e-15)


def test_pressure_independent_scalar():
    W = random_states(50)
    for w in W:
        rho, mx, my, e = w
        u, v = mx / rho, my / rho
        E = e / rho
        assert gas.pressure(w) == pytest.approx((G - 1) * rho * (E - 0.5 * (u * u + v * v)), rel=1e-13)


def test_pressure_jacobian_examples():
    np.testing.assert_allclose(gas.pressure_jacobian(np.array([1.0, 0, 0, 2.0])), [0, 0, 0, 0.4])
    W = gas.primitive_to_conservative(1.0, 2.0, 0.0, 1.0)
    np.testing.assert_allclose(gas.pressure_jacobian(W), [0.8, -0.8, 0, 0.4], atol=1e-15)


def test_pressure_jacobian_fd():
    for W in random_states(100, seed=3):
        h = 1e-6 * np.linalg.norm(W)
        fd = [(gas.pressure(W + h * e) - gas.pressure(W - h * e)) / (2 * h) for e in np.eye(4)]
        np.testing.assert_allclose(gas.pressure_jacobian(W), fd, rtol=1e-6, atol=1e-8)


def test_flux_examples():
    F1, F2 = gas.flux(np.array([2.0, 0, 0, 2.5]))
    p = 0.4 * 2.5
    np.testing.assert_allclose(F1, [0, p, 0, 0])
    np.testing.assert_allclose(F2, [0, 0, p, 0])
    W = gas.primitive_to_conservative(1.0, 1.0, 0.0, 1.0)
    assert W[3] == pytest.approx(3.0)
    np.testing.assert_allclose(gas.flux(W)[0], [1, 2, 0, 4], atol=1e-14)


def test_jacobian_zero_velocity_rows():
    A = gas.flux_jacobian_normal(np.array([1.0, 0, 0, 2.0]), np.array([1.0, 0.0]))
    np.testing.assert_allclose(A[0], [0, 1, 0, 0])
    assert A[1, 0] == pytest.approx(0.0, abs=1e-15)


def test_jacobian_linear_in_n():
    W = random_states(20, seed=4)
    n1, n2 = random_normals(20, 5), random_normals(20, 6)
    lhs = gas.flux_jacobian_normal(W, 0.7 * n1 - 1.3 * n2)
    rhs = 0.7 * gas.flux_jacobian_normal(W, n1) - 1.3 * gas.flux_jacobian_normal(W, n2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_flux_jacobian_fd_100_states():
    W = random_states(100, seed=7)
    n = random_normals(100, seed=8)
    A = gas.flux_jacobian_normal(W, n)
    for k in range(100):
        h = 1e-6 * np.linalg.norm(W[k])
        fd = np.column_stack([(gas.flux_normal(W[k] + h * e, n[k]) - gas.flux_normal(W[k] - h * e, n[k]))
                              / (2 * h) for e in np.eye(4)])
        assert np.abs(A[k] - fd).max() <= 1e-6 * np.abs(A[k]).max()


@settings(max_examples=60, deadline=None)
@given(state_st, normal_st)
def test_eigen_reconstruction(W, n):
    P, lam, Pinv = gas.eigen_decomposition(W, n)
    A = gas.flux_jacobian_normal(W, n)
    np.testing.assert_allclose(P @ np.diag(lam) @ Pinv, A, atol=1e-12 * np.abs(A).max() * 10)
    np.testing.assert_allclose(P @ Pinv, np.eye(4), atol=1e-12)


def test_eigenvalues_match_generic_solver():
    W = random_states(30, seed=9)
    n = random_normals(30, seed=10)
    _, lam, _ = gas.eigen_decomposition(W, n)
    for k in range(30):
        ev = np.sort(np.linalg.eigvals(gas.flux_jacobian_normal(W[k], n[k])).real)
        np.testing.assert_allclose(np.sort(lam[k]), ev, atol=1e-9 * np.abs(ev).max())


def test_still_fluid_eigenvalues():
    W = np.array([1.0, 0, 0, 2.5])
    _, lam, _ = gas.eigen_decomposition(W, np.array([0.0, 2.0]))
    c = gas.sound_speed(W)
    np.testing.assert_allclose(lam, [0, 0, 2 * c, -2 * c], atol=1e-15)


def test_abs_jacobian_properties():
    W = random_states(100, seed=11)
    n = random_normals(100, seed=12)
    A = gas.flux_jacobian_normal(W, n)
    absA = gas.abs_jacobian(W, n, entropy_eps=0.0)
    A2 = A @ A
    err = np.abs(absA @ absA - A2).max(axis=(1, 2)) / np.abs(A2).max(axis=(1, 2))
    assert err.max() < 1e-10
    assert np.all(gas.abs_jacobian(W[:3], np.zeros((3, 2))) == 0)
    # supersonic along n: |A| = A
    Ws = gas.primitive_to_conservative(1.0, 3.0, 0.2, 0.7)
    nn = np.array([1.0, 0.1])
    np.testing.assert_allclose(gas.abs_jacobian(Ws, nn), gas.flux_jacobian_normal(Ws, nn), atol=1e-12)


def test_harten_fix_only_below_threshold():
    lam = np.array([-1.0, -0.01, 0.0, 0.02, 2.0])
    out = gas.harten_abs(lam, 0.05)
    np.testing.assert_allclose(out[[0, 4]], [1.0, 2.0])
    assert np.all(out[1:4] >= 0.025 - 1e-15)


def test_split_conventions():
    W = random_states(20, seed=13)
    n = random_normals(20, seed=14)
    A = gas.flux_jacobian_normal(W, n)
    absA = gas.abs_jacobian(W, n, entropy_eps=0.0)
    Ap, Am = gas.split_jacobians(W, n, entropy_eps=0.0)
    np.testing.assert_allclose(Ap + Am, A, atol=1e-12)
    Ap2, Am2 = gas.split_jacobians(W, n, entropy_eps=0.0, convention="negated")
    np.testing.assert_allclose(Ap2 + Am2, absA, atol=1e-12)
    with pytest.raises(ValueError):
        gas.split_jacobians(W, n, convention="bogus")


def test_roe_average_examples():
    W = random_states(100, seed=15)
    assert np.array_equal(gas.roe_average(W, W), W)
    Wi = gas.primitive_to_conservative(1.0, 0.5, -0.2, 1.0)
    Wj = gas.primitive_to_conservative(4.0, 0.5, -0.2, 2.0)
    rho, u, v, _ = gas.primitives(gas.roe_average(Wi, Wj))
    assert rho == pytest.approx(2.0)
    assert u == pytest.approx(0.5) and v == pytest.approx(-0.2)


def test_roe_property():
    rng = np.random.default_rng(16)
    Wi = random_states(100, seed=17)
    Wj = Wi * (1 + 0.2 * rng.uniform(-1, 1, Wi.shape))
    ok = gas.is_valid(Wj)
    Wi, Wj = Wi[ok], Wj[ok]
    n = random_normals(len(Wi), seed=18)
    A = gas.flux_jacobian_normal(gas.roe_average(Wi, Wj), n)
    lhs = np.einsum("kij,kj->ki", A, Wj - Wi)
    rhs = gas.flux_normal(Wj, n) - gas.flux_normal(Wi, n)
    assert np.abs(lhs - rhs).max() / np.abs(rhs).max() < 1e-8


@settings(max_examples=50, deadline=None)
@given(state_st, state_st)
def test_roe_average_symmetric_and_valid(Wi, Wj):
    a = gas.roe_average(Wi, Wj)
    assert np.array_equal(a, gas.roe_average(Wj, Wi))
    assert gas.is_valid(a)


def test_complex_step_flux():
    W = random_states(5, seed=19)
    n = random_normals(5, seed=20)
    for k in range(5):
        J = np.column_stack([gas.flux_normal(W[k] + 1e-30j * e, n[k]).imag / 1e-30 for e in np.eye(4)])
        np.testing.assert_allclose(J, gas.flux_jacobian_normal(W[k], n[k]), rtol=1e-12, atol=1e-13)


def test_state_types_and_errors():
    s = ConservativeState.from_primitive(1.0, 1.0, 0.0, 1.0)
    assert s.pressure() == pytest.approx(1.0)
    assert s.is_valid()
    np.testing.assert_allclose(ConservativeState.from_array(s.as_array()).as_array(), s.as_array())
    assert not ConservativeState(1.0, 10.0, 0.0, 1.0).is_valid()
    with pytest.raises(ValueError):
        GasModel(gamma=1.0)
    with pytest.raises(DomainError):
        gas.primitives(np.array([0.0, 0, 0, 1.0]))
