import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import tube_point
from fermitube import tensor_kernel as tk
from fermitube.deformation import deformed_chart, make_profile
from fermitube.model_space import kahler_lowered


def random_quadratic_chart(rng, n=4, scale=0.3):
    quad = rng.normal(scale=scale, size=(n, n, n, n))
    return tk.QuadraticChart(quad, radius=0.2)


def test_euclidean_christoffel_and_curvature_vanish(rng):
    chart = tk.EuclideanChart(4)
    p = rng.normal(size=4)
    assert np.all(tk.christoffel_at(chart, p) == 0)
    assert np.all(tk.curvature_at(chart, p) == 0)
    x, y = np.eye(4)[:2]
    assert tk.sectional_at(tk.curvature_at(chart, p), np.eye(4), x, y) == 0


def test_fermi_christoffel_vanishes_on_axis(base):
    for t in np.linspace(0, 2 * np.pi, 7):
        assert np.max(np.abs(tk.christoffel_at(base, [t, 0, 0, 0]))) == 0.0


def test_christoffel_matches_fd_on_random_quadratic_chart(rng):
    chart = random_quadratic_chart(rng)
    for _ in range(5):
        p = np.concatenate([[rng.uniform(0, 6)], rng.uniform(-0.1, 0.1, 3)])
        exact = tk.christoffel_at(chart, p)
        fd = tk.finite_difference_christoffel(chart, p, step=1e-3)
        assert np.max(np.abs(exact - fd)) < 1e-8


def test_hyperbolic_plane_curvature_is_minus_one(rng):
    chart = tk.HyperbolicPlaneChart()
    for _ in range(10):
        p = np.array([rng.uniform(0, 6), rng.uniform(-2, 2)])
        g, _, _, riem = (a[0] for a in tk.geometry_at(chart, p[None]))
        k = tk.sectional_at(riem, g, np.array([1.0, 0]), np.array([0, 1.0]))
        assert k == pytest.approx(-1.0, abs=1e-12)


def test_curvature_matches_fd_oracle(rng):
    chart = random_quadratic_chart(rng)
    p = np.concatenate([[0.3], rng.uniform(-0.1, 0.1, 3)])
    exact = tk.curvature_at(chart, p)
    fd = tk.finite_difference_curvature(chart, p)
    assert np.max(np.abs(exact - fd)) < 1e-7


def test_fermi_axis_curvature_equals_model_tensor(base, spec):
    riem = tk.curvature_at(base, [1.3, 0, 0, 0])
    assert np.max(np.abs(riem - kahler_lowered(spec.n))) < 1e-10
    g = np.eye(4)
    e = np.eye(4)
    assert tk.sectional_at(riem, g, e[1], e[0]) == pytest.approx(-1.0, abs=1e-12)
    for k in (2, 3):
        assert tk.sectional_at(riem, g, e[k], e[0]) == pytest.approx(-0.25, abs=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_curvature_symmetries_and_bianchi(seed):
    rng = np.random.default_rng(seed)
    chart = random_quadratic_chart(rng)
    p = np.concatenate([[rng.uniform(0, 6)], rng.uniform(-0.1, 0.1, 3)])
    riem = tk.curvature_at(chart, p)
    scale = max(1.0, np.max(np.abs(riem)))
    for val in tk.curvature_symmetry_residuals(riem).values():
        assert val <= 1e-8 * scale


def test_curvature_symmetries_on_deformed_charts(rng, conformal, g00):
    for chart in (conformal, g00):
        for _ in range(20):
            riem = tk.curvature_at(chart, tube_point(rng))
            for val in tk.curvature_symmetry_residuals(riem).values():
                assert val <= 1e-8 * max(1.0, np.max(np.abs(riem)))


@given(st.integers(0, 2 ** 32 - 1))
def test_sectional_invariant_under_plane_basis_change(seed):
    rng = np.random.default_rng(seed)
    chart = random_quadratic_chart(rng)
    p = np.concatenate([[0.0], rng.uniform(-0.1, 0.1, 3)])
    g, _, _, riem = (a[0] for a in tk.geometry_at(chart, p[None]))
    x, y = rng.normal(size=(2, 4))
    mat = rng.normal(size=(2, 2))
    if abs(np.linalg.det(mat)) < 1e-2:
        mat += np.eye(2)
    u, w = mat[0, 0] * x + mat[0, 1] * y, mat[1, 0] * x + mat[1, 1] * y
    assert tk.sectional_at(riem, g, u, w) == pytest.approx(tk.sectional_at(riem, g, x, y),
                                                           rel=1e-9, abs=1e-9)
    assert tk.sectional_at(riem, g, x, 2 * x + 3 * y) == pytest.approx(
        tk.sectional_at(riem, g, x, y), rel=1e-9, abs=1e-9)


def test_degenerate_plane_and_metric_errors(base):
    riem = tk.curvature_at(base, np.zeros(4))
    x = np.array([0, 1.0, 0, 0])
    with pytest.raises(tk.DegeneratePlaneError):
        tk.sectional_at(riem, np.eye(4), x, 2 * x)
    chart = tk.QuadraticChart(-np.ones((4, 4, 4, 4)) * 10)
    with pytest.raises(tk.DegenerateMetricError):
        tk.christoffel_at(chart, [0, 1, 1, 1])


def test_conformal_christoffel_constant_factor(rng, base):
    p = tube_point(rng)
    g, gi, gam, _ = (a[0] for a in tk.geometry_at(base, p[None]))
    assert np.allclose(tk.conformal_christoffel(gam, np.zeros(4), g, gi), gam, atol=0)


def test_conformal_christoffel_vanishes_on_axis(conformal):
    assert np.max(np.abs(tk.christoffel_at(conformal, [2.0, 0, 0, 0]))) < 1e-15


def _conformal_inputs(rng, base, profile):
    p = tube_point(rng)
    g, gi, gam, riem = (a[0] for a in tk.geometry_at(base, p[None]))
    h, dh, ddh = (a[0] for a in profile.jet(p[None]))
    return p, g, gi, gam, riem, h, dh, ddh


def test_conformal_transforms_match_direct_recomputation(rng, base):
    profile = make_profile(kind="conformal")
    chart = deformed_chart(base, profile)
    for _ in range(100):
        p, g, gi, gam, riem, h, dh, ddh = _conformal_inputs(rng, base, profile)
        gt, git, gamt, riemt = (a[0] for a in tk.geometry_at(chart, p[None]))
        assert np.max(np.abs(tk.conformal_christoffel(gam, dh, g, gi) - gamt)) <= 1e-7 * np.max(np.abs(gamt))
        x, y, z = rng.normal(size=(3, 4))
        direct = tk.curvature_vector(riemt, git, x, y, z)
        assert np.max(np.abs(tk.conformal_curvature(riem, gam, dh, ddh, g, gi, x, y, z) - direct)) \
            <= 1e-7 * np.max(np.abs(direct))


def test_conformal_curvature_constant_factor_is_identity(rng, base):
    p = tube_point(rng)
    g, gi, gam, riem = (a[0] for a in tk.geometry_at(base, p[None]))
    x, y, z = rng.normal(size=(3, 4))
    zero = np.zeros(4)
    out = tk.conformal_curvature(riem, gam, zero, np.zeros((4, 4)), g, gi, x, y, z)
    assert np.allclose(out, tk.curvature_vector(riem, gi, x, y, z), rtol=0, atol=1e-15)


def test_conformal_curvature_axis_formula(conformal, base):
    # R~(e_i, g', g', e_j) = R(e_i, g', g', e_j) - d_ij h / 2 at the axis
    p = np.array([0.7, 0, 0, 0])
    riem_t = tk.curvature_at(conformal, p)
    riem = tk.curvature_at(base, p)
    ddh = conformal.profile.jet(p[None])[2][0]
    for i in range(1, 4):
        for j in range(1, 4):
            assert riem_t[i, 0, 0, j] == pytest.approx(riem[i, 0, 0, j] - 0.5 * ddh[i, j], abs=1e-12)


def test_conformal_sectional_examples(conformal, base):
    p = np.array([0.0, 0, 0, 0])
    g, gi, gam, riem = (a[0] for a in tk.geometry_at(base, p[None]))
    h, dh, ddh = (a[0] for a in conformal.profile.jet(p[None]))
    e = np.eye(4)
    k_s = tk.sectional_at(riem, g, e[3], e[0])
    assert tk.conformal_sectional(k_s, gam, dh, ddh, g, gi, e[3], e[0]) == pytest.approx(0.0, abs=1e-15)
    k_1 = tk.sectional_at(riem, g, e[1], e[0])
    assert tk.conformal_sectional(k_1, gam, dh, ddh, g, gi, e[1], e[0]) == pytest.approx(-1.0, abs=1e-15)
    zero = np.zeros(4)
    assert tk.conformal_sectional(k_1, gam, zero, np.zeros((4, 4)), g, gi, e[1], e[0]) == k_1
    with pytest.raises(tk.ContractViolation):
        tk.conformal_sectional(k_1, gam, dh, ddh, g, gi, 2 * e[1], e[0])


def test_conformal_sectional_matches_direct(rng, base):
    from fermitube.model_space import gram_schmidt
    profile = make_profile(kind="conformal")
    chart = deformed_chart(base, profile)
    for _ in range(100):
        p, g, gi, gam, riem, h, dh, ddh = _conformal_inputs(rng, base, profile)
        gt, _, _, riemt = (a[0] for a in tk.geometry_at(chart, p[None]))
        frame = gram_schmidt(rng.normal(size=(4, 2)), g)
        x, y = frame[:, 0], frame[:, 1]
        got = tk.conformal_sectional(tk.sectional_at(riem, g, x, y), gam, dh, ddh, g, gi, x, y)
        assert np.exp(-h) * got == pytest.approx(tk.sectional_at(riemt, gt, x, y), abs=1e-7)


def test_metric_identities(rng, base, g00):
    flat = tk.metric_identity_checks(tk.EuclideanChart(4), rng.normal(size=4))
    assert flat == {"inverse_derivative": 0.0, "metric_compatibility": 0.0}
    for _ in range(20):
        p = tube_point(rng)
        for val in tk.metric_identity_checks(base, p).values():
            assert val < 1e-8
        # finite-difference step follows the eps^2 length scale of the profile
        for val in tk.metric_identity_checks(g00, p, step=1e-5).values():
            assert val < 1e-8


@pytest.mark.parametrize("chart_name", ["euclidean", "fermi", "hyperbolic", "conformal_02", "g00_02"])
def test_partials_match_fd_step_1e4(chart_name, base, rng):
    charts = {
        "euclidean": tk.EuclideanChart(4),
        "fermi": base,
        "hyperbolic": tk.HyperbolicPlaneChart(),
        "conformal_02": deformed_chart(base, make_profile(eps=0.2, kind="conformal")),
        "g00_02": deformed_chart(base, make_profile(eps=0.2, kind="g00")),
    }
    chart = charts[chart_name]
    for _ in range(10):
        if chart.dim == 2:
            p = np.array([rng.uniform(0, 6), rng.uniform(-1, 1)])
        else:
            p = tube_point(rng, eps=0.2)
        _, dg, ddg = (a[0] for a in chart.jet(p[None]))
        fdg, fddg = tk.finite_difference_jet(chart, p, step=1e-4)
        assert np.max(np.abs(dg - fdg)) < 1e-6
        assert np.max(np.abs(ddg - fddg)) < 1e-6


@pytest.mark.parametrize("kind", ["conformal", "g00"])
def test_partials_match_fd_at_eps_005_with_scaled_step(kind, base, rng):
    chart = deformed_chart(base, make_profile(eps=0.05, kind=kind))
    for _ in range(20):
        p = tube_point(rng)
        _, dg, ddg = (a[0] for a in chart.jet(p[None]))
        fdg, fddg = tk.finite_difference_jet(chart, p, step=4e-3 * 0.05 ** 2)
        assert np.max(np.abs(dg - fdg)) < 1e-6
        assert np.max(np.abs(ddg - fddg)) < 1e-6


def test_chart_component_symmetries(rng, conformal):
    g, dg, ddg = conformal.jet(np.array([tube_point(rng) for _ in range(20)]))
    assert np.all(g == np.swapaxes(g, 1, 2))
    assert np.all(dg == np.swapaxes(dg, 2, 3))
    assert np.allclose(ddg, np.swapaxes(ddg, 1, 2), atol=1e-15)
    assert np.all(ddg == np.swapaxes(ddg, 3, 4))
    assert np.all(np.linalg.eigvalsh(g)[:, 0] > 0)
