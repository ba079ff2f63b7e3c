"""Coordinate tensor algebra on metric charts.

Charts expose closed-form jets ``(g, dg, ddg)`` of their components.  Index 0
is the direction of the central geodesic (the periodic ``t`` coordinate) and
the remaining indices are the transverse coordinates ``x_1 .. x_{n-1}``.

Curvature convention: ``R(X, Y)Z = D_X D_Y Z - D_Y D_X Z - D_[X,Y] Z``, the
lowered tensor is ``R[i, j, k, l] = g(R(d_i, d_j) d_k, d_l)`` and sectional
curvature is ``K(X, Y) = R(X, Y, Y, X) / |X ^ Y|^2``.
"""
import numpy as np

from . import kernels


class DegenerateMetricError(ValueError):
    """The metric is singular or not positive definite at the requested point."""


class DegeneratePlaneError(ValueError):
    """The two vectors spanning a plane are (numerically) dependent."""


class ContractViolation(ValueError):
    """An input violates a documented precondition."""


class MetricChart:
    """Base class for charts on the tube ``[0, T] x (-radius, radius)^(n-1)``.

    Subclasses implement ``jet(points)`` returning ``(g, dg, ddg)`` with shapes
    (B, n, n), (B, n, n, n) and (B, n, n, n, n) for points of shape (B, n).
    """

    dim = None
    radius = np.inf
    period = 2 * np.pi

    def jet(self, points):
        raise NotImplementedError

    def metric(self, points):
        return self.jet(points)[0]

    def contains(self, points):
        points = np.atleast_2d(points)
        return np.all(np.abs(points[:, 1:]) < self.radius, axis=1)

    def compiled_params(self):
        """Parameters for the compiled orbit integrator, or None if unsupported."""
        return None


class EuclideanChart(MetricChart):
    def __init__(self, dim, radius=np.inf):
        self.dim = dim
        self.radius = radius

    def jet(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        b, n = points.shape[0], self.dim
        g = np.broadcast_to(np.eye(n), (b, n, n)).copy()
        return g, np.zeros((b, n, n, n)), np.zeros((b, n, n, n, n))

    def compiled_params(self):
        n = self.dim
        return dict(quad=np.zeros((n, n, n, n)), kind=0, eps=1.0, s=1,
                    fcoef=np.zeros(1), radius=float(self.radius))


class QuadraticChart(MetricChart):
    """Chart with ``g_ij = delta_ij + sum_ab Q[i, j, a, b] x_a x_b``.

    Only transverse coordinates enter; ``Q[..., 0, :]`` and ``Q[..., :, 0]`` are
    ignored.  ``Q`` is symmetrised in both index pairs on construction.
    """

    def __init__(self, quad, radius=np.inf, period=2 * np.pi):
        quad = np.array(quad, dtype=float)
        quad[:, :, 0, :] = 0.0
        quad[:, :, :, 0] = 0.0
        quad = 0.5 * (quad + quad.transpose(1, 0, 2, 3))
        quad = 0.5 * (quad + quad.transpose(0, 1, 3, 2))
        self.quad = quad
        self.dim = quad.shape[0]
        self.radius = radius
        self.period = period

    def jet(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x = points.copy()
        x[:, 0] = 0.0
        n = self.dim
        lin = np.einsum("ijab,pb->pija", self.quad, x)  # Q x, last slot free
        g = np.eye(n) + np.einsum("pija,pa->pij", lin, x)
        dg = 2.0 * np.einsum("pija->paij", lin)
        ddg = np.broadcast_to(2.0 * np.einsum("ijab->abij", self.quad),
                              (points.shape[0], n, n, n, n)).copy()
        return g, dg, ddg

    def compiled_params(self):
        return dict(quad=self.quad, kind=0, eps=1.0, s=1, fcoef=np.zeros(1),
                    radius=float(self.radius))


class HyperbolicPlaneChart(MetricChart):
    """``g = cosh(x)^2 dt^2 + dx^2`` on (t, x): the plane of curvature -1.

    The line ``x = 0`` is a geodesic and ``(t, x)`` are Fermi coordinates
    along it, which makes this chart the exact reference for the quadratic
    Fermi expansion in dimension two.
    """

    dim = 2

    def __init__(self, radius=np.inf):
        self.radius = radius

    def jet(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        x = points[:, 1]
        b = points.shape[0]
        g = np.zeros((b, 2, 2))
        dg = np.zeros((b, 2, 2, 2))
        ddg = np.zeros((b, 2, 2, 2, 2))
        g[:, 0, 0] = np.cosh(x) ** 2
        g[:, 1, 1] = 1.0
        dg[:, 1, 0, 0] = np.sinh(2 * x)
        ddg[:, 1, 1, 0, 0] = 2 * np.cosh(2 * x)
        return g, dg, ddg


def _single(chart, p):
    p = np.asarray(p, dtype=float).reshape(1, -1)
    return [a[0] for a in chart.jet(p)]


def _check_metric(g):
    g = np.asarray(g)
    if g.ndim == 2:
        g = g[None]
    eig = np.linalg.eigvalsh(0.5 * (g + np.swapaxes(g, -1, -2)))
    if not np.all(np.isfinite(eig)) or np.any(eig[:, 0] <= 1e-14 * np.maximum(1.0, eig[:, -1])):
        raise DegenerateMetricError("metric is not positive definite; smallest eigenvalue %.3e"
                                    % float(np.min(eig[:, 0])))


def geometry_at(chart, points, check=True):
    """Batch evaluation of ``(g, ginv, gamma, riem)`` at points of shape (B, n)."""
    g, dg, ddg = chart.jet(np.atleast_2d(points))
    if check:
        _check_metric(g)
    ginv, gamma, riem = kernels.geometry_batch(np.ascontiguousarray(g), np.ascontiguousarray(dg),
                                               np.ascontiguousarray(ddg))
    return g, ginv, gamma, riem


def christoffel_at(chart, p):
    """``Gamma[k, i, j] = Gamma^k_ij`` at a single point."""
    g, dg, _ = chart.jet(np.asarray(p, dtype=float).reshape(1, -1))
    _check_metric(g)
    return kernels.christoffel_batch(np.ascontiguousarray(g), np.ascontiguousarray(dg))[0]


def curvature_at(chart, p):
    """Lowered curvature ``R[i, j, k, l] = g(R(d_i, d_j) d_k, d_l)`` at a single point."""
    return geometry_at(chart, np.asarray(p, dtype=float).reshape(1, -1))[3][0]


def plane_area2(g, x, y):
    gxx = x @ g @ x
    gyy = y @ g @ y
    gxy = x @ g @ y
    return gxx * gyy - gxy * gxy


def sectional_at(riem, g, x, y, tol=1e-12):
    """Sectional curvature of span{x, y}.

    Raises DegeneratePlaneError when ``|x ^ y|^2`` is below ``tol`` relative
    to ``|x|^2 |y|^2``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    area = plane_area2(g, x, y)
    if area <= tol * (x @ g @ x) * (y @ g @ y):
        raise DegeneratePlaneError("vectors do not span a plane")
    return np.einsum("ijkl,i,j,k,l->", riem, x, y, y, x) / area


def curvature_vector(riem, ginv, x, y, z):
    """Components of ``R(x, y)z`` from the lowered tensor."""
    return ginv @ np.einsum("ijkl,i,j,k->l", riem, x, y, z)


def hessian(ddh, gamma, dh):
    """Covariant Hessian ``d_i d_j h - Gamma^k_ij d_k h``."""
    return ddh - np.einsum("kij,k->ij", gamma, dh)


def conformal_christoffel(gamma, dh, g, ginv):
    """Christoffel symbols of ``e^h g`` from those of ``g``.

    ``G~^k_ij = G^k_ij + (d_i h delta^k_j + d_j h delta^k_i - g^kl d_l h g_ij) / 2``.
    """
    n = g.shape[0]
    eye = np.eye(n)
    grad = ginv @ dh
    return gamma + 0.5 * (np.einsum("i,kj->kij", dh, eye) + np.einsum("j,ki->kij", dh, eye)
                          - np.einsum("k,ij->kij", grad, g))


def conformal_curvature(riem, gamma, dh, ddh, g, ginv, x, y, z):
    """Components of ``R~(x, y)z`` for the metric ``e^h g``.

    Built from the curvature of ``g``, the Hessian of ``h`` and its gradient.
    """
    hess = hessian(ddh, gamma, dh)
    grad = ginv @ dh
    grad2 = dh @ grad
    xh, yh, zh = dh @ x, dh @ y, dh @ z
    gxz, gyz = x @ g @ z, y @ g @ z
    # D_x grad h as a vector: g^{kl} Hess_{il} x^i
    dx_grad = ginv @ (hess.T @ x)
    dy_grad = ginv @ (hess.T @ y)
    out = curvature_vector(riem, ginv, x, y, z)
    out = out + 0.5 * ((x @ hess @ z) * y - (y @ hess @ z) * x + gxz * dy_grad - gyz * dx_grad)
    out = out + 0.25 * ((yh * zh - gyz * grad2) * x - (xh * zh - gxz * grad2) * y
                        + (xh * gyz - yh * gxz) * grad)
    return out


def conformal_sectional(k_base, gamma, dh, ddh, g, ginv, x, y, tol=1e-9):
    """``e^h K~(x, y)`` for the metric ``e^h g`` and a g-orthonormal pair x, y.

    ``e^h K~ = K - (Hess h(x, x) + Hess h(y, y)) / 2 - (|grad h|^2 - (xh)^2 - (yh)^2) / 4``.
    """
    gram = np.array([[x @ g @ x, x @ g @ y], [y @ g @ x, y @ g @ y]])
    if np.max(np.abs(gram - np.eye(2))) > tol:
        raise ContractViolation("x, y must be orthonormal for g")
    hess = hessian(ddh, gamma, dh)
    grad2 = dh @ ginv @ dh
    xh, yh = dh @ x, dh @ y
    return k_base - 0.5 * (x @ hess @ x + y @ hess @ y) - 0.25 * (grad2 - xh * xh - yh * yh)


_OFFSETS = np.array([-2.0, -1.0, 1.0, 2.0])


def _stencil(vals, step):
    """Fourth-order first derivative from samples at offsets -2h, -h, h, 2h (axis 0).

    Written with differences so that constant data give exactly zero.
    """
    return (8.0 * (vals[2] - vals[1]) - (vals[3] - vals[0])) / (12.0 * step)


def finite_difference_jet(chart, p, step=1e-4):
    """Fourth-order central differences of the chart components.

    Returns ``(dg, ddg)`` with the same layout as ``chart.jet``.  Used only
    as an independent check of the closed-form partials.
    """
    p = np.asarray(p, dtype=float)
    n = p.size
    dg = np.zeros((n, n, n))
    ddg = np.zeros((n, n, n, n))
    for k in range(n):
        pts = np.repeat(p[None], 4, axis=0)
        pts[:, k] += _OFFSETS * step
        g, dgs, _ = chart.jet(pts)
        dg[k] = _stencil(g, step)
        ddg[:, k] = _stencil(dgs, step)
    return dg, 0.5 * (ddg + ddg.transpose(1, 0, 2, 3))


def finite_difference_christoffel(chart, p, step=1e-4):
    """Christoffel symbols built from finite differences of ``g`` only."""
    p = np.asarray(p, dtype=float)
    n = p.size
    dg = np.zeros((n, n, n))
    for k in range(n):
        pts = np.repeat(p[None], 4, axis=0)
        pts[:, k] += _OFFSETS * step
        dg[k] = _stencil(chart.metric(pts), step)
    g = chart.metric(p[None])[0]
    low = 0.5 * (np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - dg)
    return np.linalg.solve(g, low.reshape(n, -1)).reshape(n, n, n)


def finite_difference_curvature(chart, p, step=1e-3):
    """Curvature from finite differences of Christoffel symbols of ``g``.

    Independent of the closed-form path: only metric values are sampled.
    Returns the lowered tensor in the same convention as ``curvature_at``.
    """
    p = np.asarray(p, dtype=float)
    n = p.size
    gam = finite_difference_christoffel(chart, p, step=step * 1e-1)
    dgam = np.zeros((n, n, n, n))  # dgam[a, m, j, k] = d_a Gamma^m_jk
    for a in range(n):
        vals = []
        for o in _OFFSETS * step:
            q = p.copy()
            q[a] += o
            vals.append(finite_difference_christoffel(chart, q, step=step * 1e-1))
        dgam[a] = _stencil(np.array(vals), step)
    rup = (np.einsum("imjk->mijk", dgam) - np.einsum("jmik->mijk", dgam)
           + np.einsum("pjk,mip->mijk", gam, gam) - np.einsum("pik,mjp->mijk", gam, gam))
    g = chart.metric(p[None])[0]
    return np.einsum("lm,mijk->ijkl", g, rup)


def metric_identity_checks(chart, p, step=1e-3):
    """Residuals of the two metric-derivative identities at p.

    * ``d_s g^ik g_kj + g^ik d_s g_kj = 0`` with ``d_s g^ik`` from central
      differences of the inverse metric;
    * ``d_p g_ms - g_ns G^n_pm - g_nm G^n_ps = 0`` with closed-form partials.

    Returns a dict with the max-abs residual of each.
    """
    p = np.asarray(p, dtype=float)
    n = p.size
    g, dg, _ = _single(chart, p)
    _check_metric(g)
    ginv = np.linalg.inv(g)
    dginv = np.zeros((n, n, n))
    for s in range(n):
        pts = np.repeat(p[None], 4, axis=0)
        pts[:, s] += _OFFSETS * step
        dginv[s] = _stencil(np.linalg.inv(chart.metric(pts)), step)
    r1 = np.einsum("sik,kj->sij", dginv, g) + np.einsum("ik,skj->sij", ginv, dg)
    gamma = christoffel_at(chart, p)
    r2 = dg - np.einsum("ns,npm->pms", g, gamma) - np.einsum("nm,nps->pms", g, gamma)
    return {"inverse_derivative": float(np.max(np.abs(r1))),
            "metric_compatibility": float(np.max(np.abs(r2)))}


def curvature_symmetry_residuals(riem):
    """Max-abs residuals of the index symmetries and the first Bianchi identity."""
    return {
        "antisym_first": float(np.max(np.abs(riem + riem.transpose(1, 0, 2, 3)))),
        "antisym_last": float(np.max(np.abs(riem + riem.transpose(0, 1, 3, 2)))),
        "pair": float(np.max(np.abs(riem - riem.transpose(2, 3, 0, 1)))),
        "bianchi": float(np.max(np.abs(riem + riem.transpose(1, 2, 0, 3)
                                       + riem.transpose(2, 0, 1, 3)))),
    }
