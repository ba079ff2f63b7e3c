"""Sectional curvature over the tube: central table, the p profile and grid scans."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .deformation import BumpFamily
from .tensor_kernel import DegeneratePlaneError, geometry_at

N_RANDOM_PLANES = 32


def central_curvature_table(chart, times=None, samples=16):
    """``K(e_k, d_t)`` at points ``(t, 0)`` for k = 1 .. n-1.

    Returns ``(times, table)`` with table of shape (len(times), n - 1).  The
    coordinate frame is orthonormal on the axis for every chart built here.
    """
    n = chart.dim
    if times is None:
        times = np.linspace(0.0, chart.period, samples, endpoint=False)
    times = np.asarray(times, dtype=float)
    pts = np.zeros((len(times), n))
    pts[:, 0] = times
    g, _, _, riem = geometry_at(chart, pts)
    table = np.empty((len(times), n - 1))
    for k in range(1, n):
        num = riem[:, k, 0, 0, k]
        area = g[:, k, k] * g[:, 0, 0] - g[:, k, 0] ** 2
        table[:, k - 1] = num / area
    return times, table


def p_profile(eps, order=2, samples=20001):
    """``p(x) = f''(x) + x f'(x)`` on ``[-eps^2, eps^2]``.

    p is a polynomial there, so besides a dense grid the roots of p' are
    evaluated exactly.  ``second_max`` is the largest value at critical
    points other than 0 and at the interval ends.
    """
    fam = BumpFamily(order, eps)
    f = fam.f_poly
    x = np.polynomial.Polynomial([0.0, 1.0])
    p = f.deriv(2) + x * f.deriv(1)
    dp = p.deriv(1)
    lim = fam.f_support
    crit = dp.roots()
    crit = np.real(crit[(np.abs(crit.imag) < 1e-12 * lim) & (np.abs(crit.real) <= lim)])
    cand = np.concatenate([crit, [-lim, 0.0, lim], np.linspace(-lim, lim, samples)])
    vals = p(cand)
    top = int(np.argmax(vals))
    away = np.abs(cand) > 1e-9 * lim
    return {"p0": float(p(0.0)), "dp0": float(dp(0.0)), "ddp0": float(p.deriv(2)(0.0)),
            "ddp0_expected": float(-6.0 * order / eps ** 4 + 0.5),
            "max": float(vals[top]), "argmax": float(cand[top]),
            "second_max": float(np.max(vals[away])),
            "max_abs": float(np.max(np.abs(vals))),
            "critical_points": np.sort(crit).tolist(), "poly": p}


def gram_schmidt_plane(g, x_s, x_0, variant="validated", tol=1e-12):
    """Orthonormal pair ``(x_s / |x_s|, y)`` spanning ``span{x_s, x_0}`` for g.

    ``y = alpha x_0 + beta x_s``.  With ``d = g00 gss - gs0^2`` the validated
    coefficients are ``alpha = sqrt(gss / d)`` and ``beta = -gs0 / sqrt(gss d)``.
    ``variant="unscaled"`` uses ``alpha = gss / d`` (no square root) with the
    same ratio ``beta / alpha``; it is kept for comparison only.
    """
    x_s = np.asarray(x_s, dtype=float)
    x_0 = np.asarray(x_0, dtype=float)
    gss = x_s @ g @ x_s
    g00 = x_0 @ g @ x_0
    gs0 = x_s @ g @ x_0
    det = g00 * gss - gs0 * gs0
    if det <= tol * g00 * gss:
        raise DegeneratePlaneError("x_s and x_0 do not span a plane")
    if variant == "validated":
        alpha = np.sqrt(gss / det)
        beta = -gs0 / np.sqrt(gss * det)
    elif variant == "unscaled":
        alpha = gss / det
        beta = -alpha * gs0 / gss
    else:
        raise ValueError("unknown variant %r" % variant)
    return x_s / np.sqrt(gss), alpha * x_0 + beta * x_s, alpha, beta


def orthonormality_residual(g, a, b):
    gram = np.array([[a @ g @ a, a @ g @ b], [b @ g @ a, b @ g @ b]])
    return float(np.max(np.abs(gram - np.eye(2))))


@dataclass
class ScanGrid:
    """Tensor grid over the tube.

    ``half_widths`` are the transverse half widths (n - 1 values); the grid
    has ``points`` nodes per transverse axis and ``t_points`` values of t.
    """
    half_widths: tuple
    points: int = 41
    t_points: int = 16
    period: float = 2 * np.pi

    def axes(self):
        ts = np.linspace(0.0, self.period, self.t_points, endpoint=False)
        return [ts] + [np.linspace(-w, w, self.points) for w in self.half_widths]

    def cell(self):
        return np.array([2.0 * w / (self.points - 1) for w in self.half_widths])


def support_grid(chart, eps, s, points=41, t_points=16):
    """Grid over the closed support of the deformation: ``|x_s| <= eps^2``, ``|x_j| <= eps``."""
    widths = [eps] * (chart.dim - 1)
    widths[s - 1] = eps ** 2
    return ScanGrid(tuple(widths), points, t_points, chart.period)


def tube_grid(chart, half_width, points=41, t_points=16):
    return ScanGrid(tuple([half_width] * (chart.dim - 1)), points, t_points, chart.period)


def random_plane_coefficients(count, dim, seed):
    """Gaussian coefficient pairs (count, 2, dim), shared by all grid points."""
    return np.random.default_rng(seed).normal(size=(count, 2, dim))


def _sectional_batch(riem, g, xs, ys):
    """Sectional curvatures for per-point vector pairs xs, ys of shape (B, P, n)."""
    b, p, n = xs.shape
    # R(x, y, y, x) as a bilinear form on the bivectors x (x) y and y (x) x
    xy = (xs[:, :, :, None] * ys[:, :, None, :]).reshape(b, p, n * n)
    yx = (ys[:, :, :, None] * xs[:, :, None, :]).reshape(b, p, n * n)
    num = np.einsum("bpc,bpc->bp", np.matmul(xy, riem.reshape(b, n * n, n * n)), yx)
    gx = np.matmul(xs, g)
    gy = np.matmul(ys, g)
    gxx = np.einsum("bpi,bpi->bp", gx, xs)
    gyy = np.einsum("bpi,bpi->bp", gy, ys)
    gxy = np.einsum("bpi,bpi->bp", gx, ys)
    return num / (gxx * gyy - gxy * gxy)


@dataclass
class CurvatureReport:
    grid: ScanGrid
    points: np.ndarray       # (P, n)
    k_min: np.ndarray        # (P,)
    k_max: np.ndarray
    k_central: np.ndarray    # K(d_s, d_t)
    distance: np.ndarray     # Euclidean transverse distance to the axis
    argmax_plane: np.ndarray
    plane_labels: list
    s: int
    extra: dict = field(default_factory=dict)

    def off_axis(self):
        return self.distance > 0.0

    def summary(self):
        off = self.off_axis()
        out = {"points": int(len(self.points)), "max_K": float(np.max(self.k_max)),
               "min_K": float(np.min(self.k_min)),
               "max_K_off_axis": float(np.max(self.k_max[off])) if np.any(off) else None,
               "max_abs_central_on_axis": float(np.max(np.abs(self.k_central[~off])))
               if np.any(~off) else None,
               "finite": bool(np.all(np.isfinite(self.k_min)) and np.all(np.isfinite(self.k_max)))}
        i = int(np.argmax(self.k_max))
        out["witness"] = {"point": self.points[i].tolist(),
                          "plane": self.plane_labels[int(self.argmax_plane[i])],
                          "K": float(self.k_max[i])}
        return out

    def central_near_zero(self, tol):
        """Grid indices where the central-plane curvature is within ``tol`` of zero."""
        return np.nonzero(np.abs(self.k_central) <= tol)[0]

    def rows(self):
        header = ["t"] + ["x%d" % k for k in range(1, self.points.shape[1])] + [
            "k_min", "k_max", "k_central", "distance", "argmax_plane"]
        data = np.column_stack([self.points, self.k_min, self.k_max, self.k_central, self.distance,
                                self.argmax_plane])
        return header, data


def scan_sectional(chart, grid, n_random=N_RANDOM_PLANES, seed=0, chunk=20000, zero_tol=None,
                   workers=1):
    """Extremal sectional curvatures over all coordinate planes and random planes.

    Random planes are spanned by ``L^{-T} z`` for Gaussian z and the Cholesky
    factor ``g = L L^T``, so they are Haar distributed for the local metric.
    With ``zero_tol`` set, values with ``|K| <= zero_tol`` are recorded in
    ``extra["near_zero"]`` as (point index, plane index) rows.  Chunks run on
    ``workers`` threads and are reassembled in grid order.
    """
    n = chart.dim
    s = getattr(getattr(chart, "profile", None), "s", n - 1)
    mesh = np.meshgrid(*grid.axes(), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    labels = ["e%d^e%d" % pr for pr in pairs] + ["random%d" % k for k in range(n_random)]
    eye = np.eye(n)
    cx = np.array([eye[i] for i, _ in pairs])
    cy = np.array([eye[j] for _, j in pairs])
    central = pairs.index((0, s))
    coeff = random_plane_coefficients(n_random, n, seed)

    def run(lo):
        hi = min(len(pts), lo + chunk)
        g, dg, ddg = chart.jet(pts[lo:hi])
        _, _, riem = kernels.geometry_batch(np.ascontiguousarray(g), np.ascontiguousarray(dg),
                                            np.ascontiguousarray(ddg))
        b = hi - lo
        xs = np.broadcast_to(cx, (b,) + cx.shape)
        ys = np.broadcast_to(cy, (b,) + cy.shape)
        if n_random:
            linv_t = np.swapaxes(np.linalg.inv(np.linalg.cholesky(g)), 1, 2)
            xs = np.concatenate([xs, np.einsum("bij,pj->bpi", linv_t, coeff[:, 0])], axis=1)
            ys = np.concatenate([ys, np.einsum("bij,pj->bpi", linv_t, coeff[:, 1])], axis=1)
        ks = _sectional_batch(riem, g, xs, ys)
        near = []
        if zero_tol is not None:
            bi, pi = np.nonzero(np.abs(ks) <= zero_tol)
            near = list(zip((bi + lo).tolist(), pi.tolist()))
        return ks.min(axis=1), ks.max(axis=1), ks[:, central], ks.argmax(axis=1), near

    starts = range(0, len(pts), chunk)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(lo) for lo in starts]
    k_min, k_max, k_cen, arg = (np.concatenate([pt[i] for pt in parts]) for i in range(4))
    rep = CurvatureReport(grid=grid, points=pts, k_min=k_min, k_max=k_max, k_central=k_cen,
                          distance=np.linalg.norm(pts[:, 1:], axis=1), argmax_plane=arg,
                          plane_labels=labels, s=s)
    rep.extra["central_label"] = labels[central]
    if zero_tol is not None:
        rep.extra["near_zero"] = [row for pt in parts for row in pt[4]]
        rep.extra["zero_tol"] = zero_tol
    return rep


def near_zero_confined(report, cell):
    """True when every near-zero sample is on the central plane within one cell of the axis."""
    central = report.plane_labels.index(report.extra["central_label"])
    for idx, plane in report.extra.get("near_zero", []):
        x = report.points[idx, 1:]
        if plane != central or np.any(np.abs(x) > cell * (1 + 1e-9)):
            return False
    return True


def plane_curvature_split(chart, points, i, j):
    """Second-derivative and quadratic Christoffel parts of ``R(d_i, d_j, d_j, d_i)``.

    ``R_ijji = -(g_ii,jj + g_jj,ii - 2 g_ij,ij) / 2 + g_pq (G^p_ij G^q_ij - G^p_ii G^q_jj)``.
    Returns ``(second, quadratic)``, each of shape (B,).
    """
    g, dg, ddg = chart.jet(np.atleast_2d(points))
    gam = kernels.christoffel_batch(np.ascontiguousarray(g), np.ascontiguousarray(dg))
    second = -0.5 * (ddg[:, j, j, i, i] + ddg[:, i, i, j, j] - 2.0 * ddg[:, i, j, i, j])
    quad = (np.einsum("bpq,bp,bq->b", g, gam[:, :, i, j], gam[:, :, i, j])
            - np.einsum("bpq,bp,bq->b", g, gam[:, :, i, i], gam[:, :, j, j]))
    return second, quad


def quadratic_term_excess(chart, base, grid, i, j):
    """How much the deformation raises the quadratic Christoffel part of ``R_ijji``.

    Evaluated at every grid point for both charts; returns the largest
    ``quad_deformed - quad_base`` with its point, and the largest size of the
    base quadratic part for scale.
    """
    mesh = np.meshgrid(*grid.axes(), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    _, q_def = plane_curvature_split(chart, pts, i, j)
    _, q_base = plane_curvature_split(base, pts, i, j)
    diff = q_def - q_base
    k = int(np.argmax(diff))
    return {"max_excess": float(diff[k]), "point": pts[k].tolist(),
            "max_abs_base": float(np.max(np.abs(q_base))), "points": int(len(pts))}


def truncation_constant(chart, eps, radii=(0.5, 1.0), points=9, seed=0):
    """Fermi truncation constant of the undeformed chart.

    The model has ``-1 <= K <= -1/4``.  The truncated chart departs from that
    range by an amount that grows like ``|x|^2``; this returns the largest
    ``excess / w^2`` over grids of half width ``w = rad * eps`` together with
    the per-width excesses, so stability under refinement can be read off.
    """
    rows = []
    for rad in radii:
        w = rad * eps
        rep = scan_sectional(chart, tube_grid(chart, w, points, 2), seed=seed)
        excess = max(float(np.max(rep.k_max)) + 0.25, -1.0 - float(np.min(rep.k_min)), 0.0)
        rows.append({"half_width": w, "excess": excess, "C": excess / w ** 2})
    return max(r["C"] for r in rows), rows
