import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from fermitube import hyperbolicity as hy
from fermitube.geodesic_flow import integrate_geodesic, integrate_jacobi
from fermitube.tensor_kernel import ContractViolation

E0 = np.eye(4)[0]
vec3 = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).map(np.array)


def test_theta_trivial_examples():
    basis = hy.center_basis("A_u", 3)
    on = basis[:, 0]
    assert hy.theta(basis, on) == pytest.approx(1.0, abs=1e-15)
    off = np.zeros(6)
    off[1] = 1.0
    assert hy.theta(basis, off) == 0.0
    with pytest.raises(ContractViolation):
        hy.theta(basis, np.zeros(6))


def test_theta_projection_is_half_the_A_form():
    rng = np.random.default_rng(1)
    basis = hy.center_basis("A_u", 3)
    for _ in range(100):
        xi, eta = rng.normal(size=3), rng.normal(size=3)
        got = hy.theta(basis, np.concatenate([xi, eta]))
        assert got == pytest.approx(0.5 * hy.theta_A_sum(xi, eta), rel=1e-12)


def test_theta_scale_invariance():
    rng = np.random.default_rng(2)
    worst = 0.0
    for sel in hy.SELECTORS:
        basis = hy.center_basis(sel, 3)
        for _ in range(250):
            z = rng.normal(size=6)
            lam = rng.uniform(1e-3, 1e3) * rng.choice([-1, 1])
            worst = max(worst, abs(hy.theta(basis, lam * z) - hy.theta(basis, z)))
    assert worst < 1e-14


def test_center_bases_are_orthonormal_and_lagrangian():
    for sel in hy.SELECTORS:
        q = hy.center_basis(sel, 3)
        assert np.allclose(q.T @ q, np.eye(q.shape[1]), atol=1e-15)
        m = 3
        om = q[:m].T @ q[m:] - q[m:].T @ q[:m]
        assert np.max(np.abs(om)) < 1e-15


def test_cone_family_validation():
    with pytest.raises(ContractViolation):
        hy.ConeFamily("C_u")
    with pytest.raises(ContractViolation):
        hy.ConeFamily(opening=1.0)


def test_boundary_directions_lie_on_the_boundary():
    cone = hy.ConeFamily()
    zs = hy.boundary_directions(cone, 50, np.random.default_rng(3))
    assert np.allclose(np.linalg.norm(zs, axis=0), 1.0)
    for z in zs.T:
        assert hy.theta(cone.center(), z) == pytest.approx(cone.opening, abs=1e-12)


@given(vec3, vec3)
def test_undeformed_form_is_a_sum_of_squares(xi, eta):
    q = hy.undeformed_quadratic_form(xi, eta)
    assert q == pytest.approx(hy.undeformed_sum_of_squares(xi, eta), abs=1e-10 * (1 + xi @ xi + eta @ eta))


@given(vec3, vec3)
def test_f_zero_identity(xi, eta):
    scale = 1 + xi @ xi + eta @ eta
    assert abs(hy.f_zero_expanded(xi, eta, 1, 2) - hy.f_zero_sum_of_squares(xi, eta, 1, 2)) < 1e-12 * scale


def test_f_zero_identity_random_fixed():
    rng = np.random.default_rng(9)
    for _ in range(1000):
        xi, eta = rng.normal(size=3), rng.normal(size=3)
        assert abs(hy.f_zero_expanded(xi, eta, 1, 2) - hy.f_zero_sum_of_squares(xi, eta, 1, 2)) < 1e-12
        assert hy.f_zero_sum_of_squares(xi, eta, 1, 2) > 0


@given(vec3, vec3)
def test_rate_matches_closed_form_for_model_operator(xi, eta):
    zeta = np.concatenate([xi, eta])
    assume(zeta @ zeta > 1e-6)
    kmat = np.diag([-1.0, -0.25, -0.25])
    got = hy.theta_rate(hy.center_basis("A_u", 3), kmat, zeta)
    want = 0.5 * hy.undeformed_theta_rate(xi, eta)[0]
    assert got == pytest.approx(want, abs=1e-10 * max(1.0, abs(want)))


def test_rate_batch_matches_single():
    rng = np.random.default_rng(5)
    basis = hy.center_basis("B_u", 3)
    kmat = np.diag([-1.0, -0.25, 0.0])
    zs = rng.normal(size=(6, 20))
    batch = hy.theta_rate_batch(basis, kmat, zs)
    single = [hy.theta_rate(basis, kmat, z) for z in zs.T]
    assert np.allclose(batch, single, rtol=1e-13, atol=1e-15)


def test_theta_derivative_numeric_vs_closed_on_base(base):
    orbit = integrate_geodesic(base, np.zeros(4), E0, 2.0)
    cone = hy.ConeFamily()
    zeta = hy.boundary_directions(cone, 1, np.random.default_rng(4))
    path = integrate_jacobi(orbit, zeta)
    out = hy.theta_derivative(path, cone)
    assert not np.any(out["degenerate"])
    err = np.max(np.abs(out["numeric"] - out["closed_form"]))
    assert err < 1e-5 * np.max(np.abs(out["closed_form"]))


def test_theta_increases_along_deformed_central_orbit(conformal):
    orbit = integrate_geodesic(conformal, np.zeros(4), E0, 4.0)
    cone = hy.ConeFamily()
    zetas = hy.boundary_directions(cone, 16, np.random.default_rng(6))
    path = integrate_jacobi(orbit, zetas)
    basis = cone.center()
    for c in range(16):
        th = [hy.theta(basis, np.concatenate([x, e])) for x, e in zip(path.xi[:, :, c], path.eta[:, :, c])]
        assert np.all(np.diff(th) >= -1e-12)
        assert th[-1] > cone.opening


def test_degenerate_direction_is_flagged(base):
    orbit = integrate_geodesic(base, np.zeros(4), E0, 1.0)
    zeta = np.zeros((6, 1))
    zeta[0, 0], zeta[3, 0] = 1.0, -1.0
    zeta[1, 0] = 0.3
    out = hy.theta_derivative(integrate_jacobi(orbit, zeta), hy.ConeFamily())
    assert out["degenerate"][0]


def _model_exps(kmat, transient, horizon=20.0):
    kms = hy.constant_operator_kmats(kmat, 5e-4, transient + horizon + 1.0)
    return hy.lyapunov_from_kmats(kms, 5e-4, horizon, transient)


def test_lyapunov_model_operator():
    rep = _model_exps(np.diag([-1.0, -0.25, -0.25]), 30.0)
    assert np.allclose(rep.exponents, [1, 0.5, 0.5, -0.5, -0.5, -1], atol=1e-3)
    assert rep.pairing_residual < 1e-3
    assert abs(rep.extra["sum"]) < 1e-9
    means, gaps = hy.domination_gaps(rep.exponents)
    assert np.allclose(means, [1, 0.5, -0.5, -1], atol=1e-3)


def test_lyapunov_central_deformed_operator():
    rep = _model_exps(np.diag([-1.0, -0.25, 0.0]), 30.0)
    assert np.allclose(rep.exponents, [1, 0.5, 0, 0, -0.5, -1], atol=1e-3)


def test_lyapunov_transient_inside_orbit_rejected():
    kms = hy.constant_operator_kmats(np.eye(3), 5e-4, 2.0)
    with pytest.raises(ContractViolation):
        hy.lyapunov_from_kmats(kms, 5e-4, 5.0, transient=10.0)


def test_lyapunov_partial_when_orbit_is_short():
    kms = hy.constant_operator_kmats(-np.eye(3), 5e-4, 6.0)
    rep = hy.lyapunov_from_kmats(kms, 5e-4, 20.0, transient=1.0)
    assert rep.partial


def test_cluster():
    assert hy.cluster([1.0, 0.99, 0.5, 0.47, -0.5]) == [[1.0, 0.99], [0.5, 0.47], [-0.5]]


def test_anosov_witness(conformal, g00, base, spec):
    for chart in (conformal, g00):
        w = hy.anosov_obstruction_witness(chart, spec.s, spec.period)
        assert w["max_covariant_derivative"] == 0.0
        assert w["max_abs_curvature"] < 1e-15
    w = hy.anosov_obstruction_witness(base, spec.s, spec.period)
    assert w["max_abs_curvature"] == pytest.approx(0.25, abs=1e-12)


def test_small_cone_scan_A(conformal, spec):
    plan = hy.SamplePlan(seeds_per_class=3, directions=8, horizon=2.0, seed=3)
    rows = hy.cone_invariance_scan(conformal, hy.ConeFamily("A_u"), plan, spec.s)
    assert len(rows) == 9
    assert all(r["pass"] for r in rows), [r for r in rows if not r["pass"]]
    again = hy.cone_invariance_scan(conformal, hy.ConeFamily("A_u"), plan, spec.s)
    assert rows == again


def test_B_cone_contains_the_flat_direction(conformal, spec):
    # the deformation flattens e_s, which lies in B: the B cone cannot be strictly invariant
    orbit = integrate_geodesic(conformal, np.zeros(4), E0, 1.0)
    zeta = np.zeros(6)
    zeta[spec.s - 1] = 1.0
    zeta[3 + spec.s - 1] = 0.0
    basis = hy.center_basis("B_u", 3)
    rate = hy.theta_rate(basis, orbit.kmats[0], zeta)
    assert rate <= 0.0


def test_theta_forty_five_degrees():
    rng = np.random.default_rng(12)
    for sel in hy.SELECTORS:
        basis = hy.center_basis(sel, 3)
        u = basis[:, 0]
        w = rng.normal(size=6)
        w -= basis @ (basis.T @ w)
        w /= np.linalg.norm(w)
        assert hy.theta(basis, (u + w) / np.sqrt(2)) == pytest.approx(0.5, abs=1e-14)


def test_rate_positive_on_central_orbit_without_s_part(conformal, spec):
    orbit = integrate_geodesic(conformal, np.zeros(4), E0, 0.5)
    cone = hy.ConeFamily()
    zetas = hy.boundary_directions(cone, 400, np.random.default_rng(13))
    zetas[spec.s - 1] = 0.0
    zetas[3 + spec.s - 1] = 0.0
    keep = np.linalg.norm(zetas[:1] + zetas[3:4], axis=0) > 1e-6
    zetas = zetas[:, keep]
    rates = hy.theta_rate_batch(cone.center(), orbit.kmats[-1], zetas)
    assert np.all(rates > 0)
