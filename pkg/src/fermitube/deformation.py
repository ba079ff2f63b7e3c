"""Bump profiles and the two metric deformations supported on the tube.

The profile is ``h(x) = -2 Phi(x) f(x_s)`` with

* ``s_n(y) = (y + 1)^{2n} (y - 1)^{2n} / 8`` on [-1, 1], zero outside,
* ``r_n(y) = y^2 s_n(y)`` and ``f(x) = x^2 s_n(x / eps^2)``,
* ``phi(y) = exp(1 - 1 / (1 - y^2))`` on (-1, 1) and ``Phi(x) = prod_j phi(x_j / eps)``.

``h`` only depends on the transverse coordinates.  Two deformations use it:
the conformal one ``e^h g`` and the one that only rescales ``g_00``.
"""
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .tensor_kernel import MetricChart

CONFORMAL = "conformal"
G00 = "g00"
_KIND_CODES = {None: 0, CONFORMAL: 1, G00: 2}


def unit_bump(y, order=0):
    """``phi`` and its first two derivatives; zero outside (-1, 1)."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    yi = y[inside]
    u = 1.0 - yi * yi
    val = np.exp(1.0 - 1.0 / u)
    if order == 0:
        out[inside] = val
    elif order == 1:
        out[inside] = val * (-2.0 * yi / u ** 2)
    elif order == 2:
        a = -2.0 * yi / u ** 2
        out[inside] = val * (a * a - 2.0 / u ** 2 - 8.0 * yi * yi / u ** 3)
    else:
        raise ValueError("unit_bump supports orders 0..2")
    return out


class BumpFamily:
    """The polynomial bumps ``s_n``, ``r_n``, ``f_n`` and the product bump ``Phi``."""

    def __init__(self, order=2, eps=0.05):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.order = order
        self.eps = float(eps)
        self.s_poly = Polynomial([-1.0, 0.0, 1.0]) ** (2 * order) / 8.0
        self.r_poly = Polynomial([0.0, 0.0, 1.0]) * self.s_poly
        scale = self.eps ** -2
        scaled = Polynomial(self.s_poly.coef * scale ** np.arange(len(self.s_poly.coef)))
        self.f_poly = Polynomial([0.0, 0.0, 1.0]) * scaled
        self.f_support = self.eps ** 2

    @staticmethod
    def _piecewise(poly, x, half_width, order):
        x = np.asarray(x, dtype=float)
        p = poly.deriv(order) if order else poly
        return np.where(np.abs(x) <= half_width, p(x), 0.0)

    def s(self, y, order=0):
        return self._piecewise(self.s_poly, y, 1.0, order)

    def r(self, y, order=0):
        return self._piecewise(self.r_poly, y, 1.0, order)

    def f(self, x, order=0):
        return self._piecewise(self.f_poly, x, self.f_support, order)

    def phi(self, y, order=0):
        return unit_bump(y, order)

    def product_bump(self, x):
        """``Phi`` with gradient and Hessian over the transverse coordinates.

        ``x`` has shape (B, m).  Returns arrays of shapes (B,), (B, m), (B, m, m).
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = x / self.eps
        p0 = unit_bump(y, 0)
        p1 = unit_bump(y, 1) / self.eps
        p2 = unit_bump(y, 2) / self.eps ** 2
        b, m = x.shape
        val = np.prod(p0, axis=1)
        grad = np.empty((b, m))
        hess = np.empty((b, m, m))
        for j in range(m):
            others = np.prod(np.delete(p0, j, axis=1), axis=1)
            grad[:, j] = p1[:, j] * others
            hess[:, j, j] = p2[:, j] * others
            for k in range(j + 1, m):
                rest = np.prod(np.delete(p0, [j, k], axis=1), axis=1)
                hess[:, j, k] = hess[:, k, j] = p1[:, j] * p1[:, k] * rest
        return val, grad, hess


def bump_eval(family, which, order, x):
    """Evaluate one member of the family: ``which`` in {s, r, f, phi, Phi}.

    For ``Phi`` the point ``x`` is a transverse vector and ``order`` selects
    value, gradient or Hessian.
    """
    if which == "Phi":
        return family.product_bump(np.atleast_2d(x))[order][0]
    fn = {"s": family.s, "r": family.r, "f": family.f, "phi": family.phi}[which]
    return fn(x, order)


@dataclass(frozen=True)
class DeformationProfile:
    """``h = -2 Phi(x) f(x_s)`` on an n-dimensional chart, deformation index s."""

    family: BumpFamily
    s: int
    dim: int
    kind: str = CONFORMAL

    @property
    def eps(self):
        return self.family.eps

    def jet(self, points):
        """``(h, dh, ddh)`` over full coordinates, shapes (B,), (B, n), (B, n, n)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        b, n = points.shape
        x = points[:, 1:]
        si = self.s - 1
        val, grad, hess = self.family.product_bump(x)
        xs = x[:, si]
        f0 = self.family.f(xs, 0)
        f1 = self.family.f(xs, 1)
        f2 = self.family.f(xs, 2)
        h = -2.0 * val * f0
        dh = np.zeros((b, n))
        ddh = np.zeros((b, n, n))
        dh[:, 1:] = -2.0 * grad * f0[:, None]
        dh[:, self.s] += -2.0 * val * f1
        ddh[:, 1:, 1:] = -2.0 * hess * f0[:, None, None]
        ddh[:, 1:, self.s] += -2.0 * grad * f1[:, None]
        ddh[:, self.s, 1:] += -2.0 * grad * f1[:, None]
        ddh[:, self.s, self.s] += -2.0 * val * f2
        return h, dh, ddh

    def partial(self, x, index=()):
        """A single partial derivative of h at a transverse point x.

        ``index`` is a tuple of at most two full-coordinate indices.
        """
        p = np.concatenate([[0.0], np.asarray(x, dtype=float)])[None]
        h, dh, ddh = self.jet(p)
        if len(index) == 0:
            return h[0]
        if len(index) == 1:
            return dh[0, index[0]]
        if len(index) == 2:
            return ddh[0, index[0], index[1]]
        raise ValueError("profile partials are available up to order 2")


def make_profile(dim=4, s=3, eps=0.05, order=2, kind=CONFORMAL):
    return DeformationProfile(BumpFamily(order, eps), s=s, dim=dim, kind=kind)


def profile_partials(profile, x, index=()):
    return profile.partial(x, index)


class _DeformedChart(MetricChart):
    def __init__(self, base, profile):
        if base.dim != profile.dim:
            raise ValueError("profile and chart dimensions differ")
        self.base = base
        self.profile = profile
        self.dim = base.dim
        self.radius = base.radius
        self.period = base.period

    def jet(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        g, dg, ddg = self.base.jet(points)
        support = np.all(np.abs(points[:, 1:]) < self.profile.eps, axis=1)
        if not np.any(support):
            return g, dg, ddg
        g, dg, ddg = g.copy(), dg.copy(), ddg.copy()
        h, dh, ddh = self.profile.jet(points[support])
        self._apply(g, dg, ddg, support, h, dh, ddh)
        return g, dg, ddg

    def compiled_params(self):
        base = self.base.compiled_params()
        if base is None or base["kind"] != 0:
            return None
        return dict(quad=base["quad"], kind=_KIND_CODES[self.profile.kind], eps=self.profile.eps,
                    s=self.profile.s, fcoef=np.ascontiguousarray(self.profile.family.f_poly.coef),
                    radius=float(self.radius))


class ConformalChart(_DeformedChart):
    """``e^h g`` with closed-form partials."""

    @staticmethod
    def _apply(g, dg, ddg, m, h, dh, ddh):
        e = np.exp(h)
        g0, dg0, ddg0 = g[m], dg[m], ddg[m]
        g[m] = e[:, None, None] * g0
        dg[m] = e[:, None, None, None] * (dh[:, :, None, None] * g0[:, None] + dg0)
        ddg[m] = e[:, None, None, None, None] * (
            (dh[:, :, None, None, None] * dh[:, None, :, None, None]
             + ddh[:, :, :, None, None]) * g0[:, None, None]
            + dh[:, :, None, None, None] * dg0[:, None, :]
            + dh[:, None, :, None, None] * dg0[:, :, None]
            + ddg0)


class G00Chart(_DeformedChart):
    """Only ``g_00`` is multiplied by ``e^h``; the other components are untouched.

    ``d_i g~00 = d_i h g~00 + e^h d_i g00`` and
    ``d_ij g~00 = (d_ij h + d_i h d_j h) g~00 + e^h (d_i h d_j g00 + d_j h d_i g00 + d_ij g00)``.
    """

    @staticmethod
    def _apply(g, dg, ddg, m, h, dh, ddh):
        e = np.exp(h)
        g00 = g[m, 0, 0]
        d00 = dg[m][:, :, 0, 0]
        dd00 = ddg[m][:, :, :, 0, 0]
        new00 = e * g00
        sub_g = g[m]
        sub_dg = dg[m]
        sub_ddg = ddg[m]
        sub_g[:, 0, 0] = new00
        sub_dg[:, :, 0, 0] = dh * new00[:, None] + e[:, None] * d00
        sub_ddg[:, :, :, 0, 0] = ((ddh + dh[:, :, None] * dh[:, None, :]) * new00[:, None, None]
                                  + e[:, None, None] * (dh[:, :, None] * d00[:, None, :]
                                                        + dh[:, None, :] * d00[:, :, None]
                                                        + dd00))
        g[m], dg[m], ddg[m] = sub_g, sub_dg, sub_ddg


def deform_conformal(base, profile):
    if profile.kind != CONFORMAL:
        raise ValueError("profile kind must be %r" % CONFORMAL)
    return ConformalChart(base, profile)


def deform_g00(base, profile):
    if profile.kind != G00:
        raise ValueError("profile kind must be %r" % G00)
    return G00Chart(base, profile)


def deformed_chart(base, profile):
    return deform_conformal(base, profile) if profile.kind == CONFORMAL else deform_g00(base, profile)


def seam_jumps(family, max_order=4):
    """One-sided derivative jumps of ``f`` at ``x = +-eps^2`` for orders 0..max_order.

    The outer side is identically zero, so the jump is the inner polynomial
    derivative evaluated at the seam.
    """
    rows = []
    edge = family.f_support
    for order in range(max_order + 1):
        p = family.f_poly.deriv(order) if order else family.f_poly
        scale = max(1.0, float(np.max(np.abs(p(np.linspace(-edge, edge, 201))))))
        for side in (-1.0, 1.0):
            jump = abs(float(p(side * edge)))
            rows.append({"order": order, "side": side, "jump": jump, "scale": scale})
    return rows


def sup_abs_on(fn, lo, hi, samples=20001):
    grid = np.linspace(lo, hi, samples)
    vals = np.abs(fn(grid))
    k = int(np.argmax(vals))
    return float(vals[k]), float(grid[k])


def verify_estimates(profile, s_points=101, other_points=61):
    """Check the seven size bounds on h over a product grid.

    The s-direction covers ``[-eps^2, eps^2]`` with spacing ``eps^2 / 50``
    (101 points); the other transverse directions cover ``[-eps, eps]``.
    Returns a certificate dict with one entry per bound.
    """
    eps = profile.eps
    n = profile.dim
    s = profile.s
    axes = []
    for j in range(1, n):
        if j == s:
            axes.append(np.linspace(-eps ** 2, eps ** 2, s_points))
        else:
            axes.append(np.linspace(-eps, eps, other_points))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([np.zeros(mesh[0].size)] + [m.ravel() for m in mesh], axis=1)
    h, dh, ddh = profile.jet(pts)
    trans = [j for j in range(1, n) if j != s]
    bounds = []

    def add(name, values, bound):
        k = int(np.argmax(values))
        bounds.append({"name": name, "measured": float(values[k]), "bound": float(bound),
                       "pass": bool(values[k] <= bound), "witness": pts[k, 1:].tolist()})

    zero = np.zeros(len(pts))
    add("|h| <= eps^4", np.abs(h), eps ** 4)
    add("|d_j h| <= 2 eps^3 (j != s)",
        np.max(np.abs(dh[:, trans]), axis=1) if trans else zero, 2 * eps ** 3)
    add("|d_s h| <= eps^2", np.abs(dh[:, s]), eps ** 2)
    off = [(i, j) for i in trans for j in trans if i < j]
    add("|d_ij h| <= 4 eps^2 (i != j, both != s)",
        np.max(np.abs(np.stack([ddh[:, i, j] for i, j in off], axis=1)), axis=1) if off else zero,
        4 * eps ** 2)
    add("|d_sj h| <= 2 eps (j != s)",
        np.max(np.abs(ddh[:, s, trans]), axis=1) if trans else zero, 2 * eps)
    diag = np.max(np.abs(np.stack([ddh[:, i, i] for i in trans], axis=1)), axis=1) if trans else zero
    big_m = float(np.max(diag)) / eps ** 2
    add("|d_ii h| <= M eps^2 (i != s)", diag, big_m * eps ** 2 * (1 + 1e-12))
    add("|d_ss h| <= 1/2", np.abs(ddh[:, s, s]), 0.5)
    fam = profile.family
    sup_r, arg_r = sup_abs_on(fam.r, -1.0, 1.0)
    sup_phi1, _ = sup_abs_on(lambda y: unit_bump(y, 1), -1.0, 1.0)
    sup_phi2, _ = sup_abs_on(lambda y: unit_bump(y, 2), -1.0, 1.0)
    return {"eps": eps, "order": fam.order, "bounds": bounds, "M": big_m,
            "sup_r": sup_r, "argsup_r": arg_r, "sup_phi1": sup_phi1, "sup_phi2": sup_phi2,
            "pass": all(b["pass"] for b in bounds)}


def profile_center_properties(profile):
    """Closed-form values of h and its partials at x = 0."""
    n = profile.dim
    h, dh, ddh = profile.jet(np.zeros((1, n)))
    return {"h": float(h[0]), "dh": dh[0].tolist(), "ddh": ddh[0].tolist()}


