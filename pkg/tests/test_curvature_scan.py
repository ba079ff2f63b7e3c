import numpy as np
import pytest
from hypothesis import given, strategies as st

from fermitube import curvature_scan as cs
from fermitube.tensor_kernel import DegeneratePlaneError, sectional_at, curvature_at


@pytest.mark.parametrize("name,row", [("base", [-1.0, -0.25, -0.25]),
                                      ("conformal", [-1.0, -0.25, 0.0]),
                                      ("g00", [-1.0, -0.25, 0.0])])
def test_central_tables(request, name, row):
    chart = request.getfixturevalue(name)
    times, table = cs.central_curvature_table(chart, samples=16)
    assert len(times) == 16
    assert np.max(np.abs(table - np.array(row))) < 1e-14


def test_central_table_matches_sectional_at(conformal):
    times, table = cs.central_curvature_table(conformal, times=[0.7])
    p = np.array([0.7, 0, 0, 0])
    e = np.eye(4)
    k = sectional_at(curvature_at(conformal, p), np.eye(4), e[2], e[0])
    assert table[0, 1] == pytest.approx(k, abs=1e-15)


@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
def test_p_profile_at_zero(eps):
    prof = cs.p_profile(eps)
    assert prof["p0"] == pytest.approx(0.25, abs=1e-15)
    assert prof["dp0"] == pytest.approx(0.0, abs=1e-12)
    assert prof["ddp0"] == pytest.approx(prof["ddp0_expected"], rel=1e-12)
    assert prof["ddp0_expected"] == pytest.approx(-12 / eps ** 4 + 0.5)


@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
def test_p_unique_max_at_zero(eps):
    prof = cs.p_profile(eps)
    assert prof["argmax"] == 0.0
    assert prof["max"] == pytest.approx(0.25, abs=1e-15)
    assert prof["second_max"] < 0.25


@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
def test_p_bounded_by_quarter_in_absolute_value(eps):
    # expected to fail: the negative lobe of p reaches about -0.256 (see the decisions ledger)
    assert cs.p_profile(eps)["max_abs"] <= 0.25


def test_p_critical_points_are_critical():
    prof = cs.p_profile(0.1)
    p = prof["poly"]
    d = 1e-6 * 0.1 ** 2
    for c in prof["critical_points"]:
        left, mid, right = p(c - d), p(c), p(c + d)
        assert (mid >= left and mid >= right) or (mid <= left and mid <= right)


def test_gram_schmidt_validated_is_orthonormal():
    rng = np.random.default_rng(8)
    for _ in range(200):
        a = rng.normal(size=(4, 4))
        g = a @ a.T + 4 * np.eye(4)
        x_s, x_0 = rng.normal(size=4), rng.normal(size=4)
        e_s, y, _, _ = cs.gram_schmidt_plane(g, x_s, x_0)
        assert cs.orthonormality_residual(g, e_s, y) < 1e-12


def test_gram_schmidt_orthogonal_input():
    g = np.eye(4)
    x_s, x_0 = np.eye(4)[3], np.eye(4)[0]
    e_s, y, alpha, beta = cs.gram_schmidt_plane(g, x_s, x_0)
    assert np.array_equal(y, x_0) and alpha == 1.0 and beta == 0.0
    e_s, y, _, _ = cs.gram_schmidt_plane(g, x_s, x_0, variant="unscaled")
    assert np.array_equal(y, x_0)


def test_unscaled_variant_is_not_unit_in_general():
    g = np.diag([2.0, 1, 1, 1.5])
    x_s = np.array([0.3, 0, 0, 1.0])
    x_0 = np.array([1.0, 0, 0, 0])
    e_s, y, _, _ = cs.gram_schmidt_plane(g, x_s, x_0)
    assert cs.orthonormality_residual(g, e_s, y) < 1e-14
    e_s, yp, _, _ = cs.gram_schmidt_plane(g, x_s, x_0, variant="unscaled")
    assert abs(e_s @ g @ yp) < 1e-14
    assert abs(yp @ g @ yp - 1) > 1e-3
    # same direction, different length
    assert np.allclose(yp / np.sqrt(yp @ g @ yp), y, atol=1e-14)


def test_gram_schmidt_degenerate():
    with pytest.raises(DegeneratePlaneError):
        cs.gram_schmidt_plane(np.eye(4), np.eye(4)[3], 2 * np.eye(4)[3])
    with pytest.raises(ValueError):
        cs.gram_schmidt_plane(np.eye(4), np.eye(4)[3], np.eye(4)[0], variant="other")


def test_grid_axes_and_cell(conformal):
    grid = cs.support_grid(conformal, 0.05, 3, points=41, t_points=16)
    axes = grid.axes()
    assert len(axes) == 4 and len(axes[0]) == 16 and len(axes[3]) == 41
    assert axes[3][-1] == pytest.approx(0.0025)
    assert np.allclose(grid.cell(), [0.0025, 0.0025, 0.000125])


def test_undeformed_range_within_truncation(base):
    c, rows = cs.truncation_constant(base, 0.05)
    rep = cs.scan_sectional(base, cs.tube_grid(base, 0.05, 9, 2))
    tau = c * 0.05 ** 2
    assert np.max(rep.k_max) <= -0.25 + tau * (1 + 1e-9)
    assert np.min(rep.k_min) >= -1.0 - tau * (1 + 1e-9)
    # excess grows like the square of the half width
    assert rows[0]["C"] == pytest.approx(rows[1]["C"], rel=0.2)


def test_small_scan_deformation_A_nonpositive(conformal):
    grid = cs.support_grid(conformal, 0.05, 3, points=9, t_points=2)
    rep = cs.scan_sectional(conformal, grid)
    summary = rep.summary()
    assert summary["finite"]
    assert summary["max_K"] <= 1e-15
    assert summary["max_K_off_axis"] < 0
    assert summary["max_abs_central_on_axis"] < 1e-15


def test_small_scan_threads_match_serial(g00):
    grid = cs.support_grid(g00, 0.05, 3, points=7, t_points=2)
    one = cs.scan_sectional(g00, grid, chunk=50)
    two = cs.scan_sectional(g00, grid, chunk=50, workers=2)
    assert np.array_equal(one.k_max, two.k_max) and np.array_equal(one.k_min, two.k_min)


def test_near_zero_confined_on_small_B_scan(g00):
    grid = cs.support_grid(g00, 0.05, 3, points=9, t_points=2)
    rep = cs.scan_sectional(g00, grid, zero_tol=1e-12)
    assert rep.extra["near_zero"]
    assert cs.near_zero_confined(rep, grid.cell())
    header, data = rep.rows()
    assert data.shape == (len(rep.points), len(header))


def test_scan_batch_matches_pointwise(conformal):
    grid = cs.support_grid(conformal, 0.05, 3, points=3, t_points=1)
    rep = cs.scan_sectional(conformal, grid, n_random=0)
    e = np.eye(4)
    for i in (0, 5, 13):
        p = rep.points[i]
        riem = curvature_at(conformal, p)
        g = conformal.metric(p[None])[0]
        ks = [sectional_at(riem, g, e[a], e[b]) for a in range(4) for b in range(a + 1, 4)]
        assert rep.k_max[i] == pytest.approx(max(ks), abs=1e-13)
        assert rep.k_min[i] == pytest.approx(min(ks), abs=1e-13)


@given(st.integers(0, 1000))
def test_random_planes_are_reproducible(seed):
    a = cs.random_plane_coefficients(4, 4, seed)
    b = cs.random_plane_coefficients(4, 4, seed)
    assert np.array_equal(a, b)


def test_plane_split_recombines_to_curvature(g00, rng):
    from conftest import tube_point
    pts = np.array([tube_point(rng) for _ in range(30)])
    second, quad = cs.plane_curvature_split(g00, pts, 3, 0)
    for p, a, b in zip(pts, second, quad):
        assert a + b == pytest.approx(curvature_at(g00, p)[3, 0, 0, 3], abs=1e-14)


def _excess(base, eps):
    from fermitube.deformation import deformed_chart, make_profile
    chart = deformed_chart(base, make_profile(kind="g00", eps=eps))
    return cs.quadratic_term_excess(chart, base, cs.support_grid(chart, eps, 3, 21, 1), 3, 0)


def test_quadratic_excess_shrinks_like_eps4(base):
    eps = np.array([0.2, 0.1, 0.05])
    ex = np.array([_excess(base, e)["max_excess"] for e in eps])
    slope = np.polyfit(np.log(eps), np.log(ex), 1)[0]
    assert 3.5 < slope < 4.5


def test_quadratic_terms_not_raised_by_deformation(base):
    # expected to fail: the excess is positive, of size about eps^4 (see the decisions ledger)
    assert _excess(base, 0.05)["max_excess"] <= 0.0


def test_unscaled_coefficient_reduces_to_base_when_h_vanishes(base, g00):
    # outside the support the deformed metric is the base metric, so both coefficients agree
    p = np.array([0.4, 0.06, 0.01, 0.03])
    x_s, x_0 = np.eye(4)[3], np.eye(4)[0]
    for variant in ("validated", "unscaled"):
        a = cs.gram_schmidt_plane(base.metric(p[None])[0], x_s, x_0, variant)
        b = cs.gram_schmidt_plane(g00.metric(p[None])[0], x_s, x_0, variant)
        assert a[2] == b[2] and a[3] == b[3]


def test_central_plane_zero_on_axis_for_B(g00):
    grid = cs.support_grid(g00, 0.05, 3, points=5, t_points=4)
    summary = cs.scan_sectional(g00, grid, n_random=0).summary()
    assert summary["max_abs_central_on_axis"] < 1e-9
    assert summary["max_K_off_axis"] < 0
