"""Geodesics, parallel frames and Jacobi fields on a chart.

Orbits are integrated with classical RK4 at a fixed step.  Each orbit
carries a parallel transverse frame and the Jacobi operator
``K[a, b] = g(R(E_a, v)v, E_b)`` expressed in that frame, sampled at every
step.  Jacobi fields are then integrated in frame coordinates with twice the
geodesic step, so the operator is available at the RK4 half steps.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model_space import adapted_frame, complex_structure
from .tensor_kernel import ContractViolation, geometry_at

DEFAULT_STEP = 5e-4


@dataclass
class Orbit:
    dt: float
    points: np.ndarray      # (T, n)
    velocities: np.ndarray  # (T, n)
    frames: np.ndarray      # (T, n, n); column 0 is the velocity
    kmats: np.ndarray       # (T, n-1, n-1) Jacobi operator in the transverse frame
    exit_time: float = None
    speed_drift: float = 0.0
    backend: str = "python"
    extra: dict = field(default_factory=dict)

    @property
    def times(self):
        return self.dt * np.arange(len(self.points))

    @property
    def duration(self):
        return self.dt * (len(self.points) - 1)


@dataclass
class JacobiPath:
    times: np.ndarray
    xi: np.ndarray   # (T, m, c)
    eta: np.ndarray  # (T, m, c)


def unit_velocity(g, v):
    v = np.asarray(v, dtype=float)
    return v / np.sqrt(v @ g @ v)


def initial_frame(chart, point, velocity, jmat=None):
    """Orthonormal frame adapted to A/B at ``point`` for a unit velocity."""
    g = chart.metric(np.asarray(point, dtype=float)[None])[0]
    if jmat is None:
        jmat = getattr(chart, "jmat", None)
        if jmat is None and hasattr(chart, "base"):
            jmat = getattr(chart.base, "jmat", None)
        if jmat is None:
            jmat = complex_structure(chart.dim)
    return adapted_frame(g, unit_velocity(g, velocity), jmat)


def _python_orbit(chart, p0, v0, frame0, dt, nsteps, box):
    n = len(p0)
    m = n - 1

    def gamma(p):
        g, dg, _ = chart.jet(p[None])
        return kernels.christoffel_batch(np.ascontiguousarray(g), np.ascontiguousarray(dg))[0]

    def rhs(y):
        p, v, fr = y[:n], y[n:2 * n], y[2 * n:].reshape(n, m)
        gam = gamma(p)
        dv = -np.einsum("kij,i,j->k", gam, v, v)
        dfr = -np.einsum("kij,i,ja->ka", gam, v, fr)
        return np.concatenate([v, dv, dfr.ravel()])

    def record(y):
        p, v, fr = y[:n], y[n:2 * n], y[2 * n:].reshape(n, m)
        riem = geometry_at(chart, p[None], check=False)[3][0]
        rv = np.einsum("ijkl,j,k->il", riem, v, v)
        return p.copy(), v.copy(), fr.copy(), fr.T @ rv @ fr

    y = np.concatenate([p0, v0, frame0.ravel()])
    rows = [record(y)]
    exit_time = None
    drift = 0.0
    for step in range(1, nsteps + 1):
        old = y[:n].copy()
        a = rhs(y)
        b = rhs(y + 0.5 * dt * a)
        c = rhs(y + 0.5 * dt * b)
        d = rhs(y + dt * c)
        y = y + dt / 6.0 * (a + 2 * b + 2 * c + d)
        crossed = np.abs(y[1:n]) >= box
        if np.any(crossed):
            lo = np.abs(old[1:n])[crossed]
            hi = np.abs(y[1:n])[crossed]
            exit_time = (step - 1 + float(np.min((box - lo) / (hi - lo)))) * dt
            break
        g = chart.metric(y[:n][None])[0]
        nrm = np.sqrt(y[n:2 * n] @ g @ y[n:2 * n])
        drift = max(drift, abs(nrm - 1.0))
        y[n:2 * n] /= nrm
        rows.append(record(y))
    pts, vel, frs, kms = (np.array(col) for col in zip(*rows))
    return pts, vel, frs, kms, exit_time, drift


def integrate_geodesic(chart, point, velocity, horizon, step=DEFAULT_STEP, frame=None, box=None,
                       jmat=None, backend=None):
    """Integrate a unit-speed geodesic with its parallel frame.

    Parameters
    ----------
    chart : MetricChart
    point, velocity : initial position and velocity (velocity is normalised).
    horizon : integration time.
    step : RK4 step.
    frame : optional (n, n-1) transverse frame; by default the A/B adapted frame.
    box : exit half-width for transverse coordinates (defaults to the chart radius).
    backend : "compiled", "python" or None for automatic selection.

    Returns an Orbit; ``exit_time`` records the crossing time if the orbit
    leaves the box, and the arrays stop at the last step inside.
    """
    p0 = np.asarray(point, dtype=float)
    g0 = chart.metric(p0[None])[0]
    v0 = unit_velocity(g0, velocity)
    if frame is None:
        frame = initial_frame(chart, p0, v0, jmat)[:, 1:]
    frame = np.ascontiguousarray(frame, dtype=float)
    if box is None:
        box = chart.radius
    if not np.all(np.abs(p0[1:]) < box):
        raise ContractViolation("initial point outside the chart domain")
    nsteps = int(round(horizon / step))
    params = chart.compiled_params()
    use_c = (backend != "python" and kernels.integrate_param_orbit is not None
             and params is not None)
    if backend == "compiled" and not use_c:
        raise RuntimeError("compiled integrator unavailable for this chart")
    if use_c:
        out = kernels.integrate_param_orbit(params, p0, v0, frame, float(step), nsteps, float(box))
        used = "compiled"
    else:
        out = _python_orbit(chart, p0, v0, frame, float(step), nsteps, float(box))
        used = "python"
    pts, vel, frs, kms, exit_time, drift = out
    full = np.concatenate([vel[:, :, None], frs], axis=2)
    return Orbit(dt=float(step), points=pts, velocities=vel, frames=full, kmats=kms,
                 exit_time=exit_time, speed_drift=float(drift), backend=used)


def richardson_check(chart, point, velocity, horizon, step=DEFAULT_STEP):
    """Endpoint difference between runs at ``step`` and ``step / 2``.

    For a fourth order method the error of the finer run is about this
    difference divided by 15.  Returns ``(difference, estimated_error)``.
    """
    coarse = integrate_geodesic(chart, point, velocity, horizon, step=step)
    fine = integrate_geodesic(chart, point, velocity, horizon, step=step / 2)
    if coarse.exit_time is not None or fine.exit_time is not None:
        raise ContractViolation("orbit leaves the chart before the horizon")
    diff = float(np.max(np.abs(coarse.points[-1] - fine.points[-1])))
    return diff, diff / 15.0


def orbit_table(orbit, stride=1):
    """Header and rows ``t, x_i, v_i`` for CSV output."""
    n = orbit.points.shape[1]
    header = ["t"] + ["x%d" % i for i in range(n)] + ["v%d" % i for i in range(n)]
    rows = np.column_stack([orbit.times, orbit.points, orbit.velocities])[::stride]
    return header, rows


def geodesic_residual(chart, orbit, stride=1):
    """Max-abs residual of ``x'' + Gamma(x', x')`` using central differences of positions."""
    pts = orbit.points[::stride]
    h = orbit.dt * stride
    if len(pts) < 3:
        return 0.0
    acc = (pts[2:] - 2 * pts[1:-1] + pts[:-2]) / h ** 2
    vel = (pts[2:] - pts[:-2]) / (2 * h)
    g, dg, _ = chart.jet(pts[1:-1])
    gam = kernels.christoffel_batch(np.ascontiguousarray(g), np.ascontiguousarray(dg))
    return float(np.max(np.abs(acc + np.einsum("bkij,bi,bj->bk", gam, vel, vel))))


def integrate_jacobi(orbit, y0, horizon=None, stride=1):
    """Jacobi fields along an orbit in its parallel transverse frame.

    ``y0`` is (2m, c) with xi rows first, or a pair ``(xi0, eta0)`` of m-vectors.
    The step is twice the orbit step.  Returns a JacobiPath sampled every
    ``stride`` Jacobi steps.
    """
    if isinstance(y0, tuple):
        y0 = np.concatenate([np.asarray(y0[0], float), np.asarray(y0[1], float)])[:, None]
    y0 = np.asarray(y0, dtype=float)
    if y0.ndim == 1:
        y0 = y0[:, None]
    m = orbit.kmats.shape[1]
    avail = (len(orbit.kmats) - 1) // 2
    nsteps = avail if horizon is None else int(round(horizon / (2 * orbit.dt)))
    if nsteps > avail:
        raise ContractViolation("orbit is shorter than the requested Jacobi horizon")
    ys = kernels.jacobi_rk4(np.ascontiguousarray(orbit.kmats[:2 * nsteps + 1]), y0,
                            2 * orbit.dt, stride)
    times = 2 * orbit.dt * stride * np.arange(len(ys))
    return JacobiPath(times=times, xi=ys[:, :m], eta=ys[:, m:])


def central_jacobi_closed_form(spec, component, j0, j0p, t, deformed=True):
    """Closed-form Jacobi component along the central geodesic.

    ``component`` is a transverse index in 1..n-1.  A-components grow like
    ``e^{+-t}``, B-components like ``e^{+-t/2}`` and, on a deformed chart, the
    component ``s`` is affine.  Returns ``(J, J')``.
    """
    t = np.asarray(t, dtype=float)
    if not 1 <= component <= spec.n - 1:
        raise ContractViolation("component must be a transverse index")
    if deformed and component == spec.s:
        return j0 + j0p * t, j0p + 0.0 * t
    rate = 1.0 if component <= spec.r else 0.5
    minus = 0.5 * (j0 - j0p / rate)
    plus = 0.5 * (j0 + j0p / rate)
    em, ep = np.exp(-rate * t), np.exp(rate * t)
    return minus * em + plus * ep, rate * (plus * ep - minus * em)


def sasaki_products(g, theta, xi_hat, eta_hat, eta_base=None, tol=1e-12):
    """Sasaki inner product, contact form and symplectic form at ``theta = (p, v)``.

    ``xi_hat = (w1, w2)`` and ``eta_hat = (z1, z2)`` are horizontal/vertical
    pairs in coordinates.  ``eta_base`` may name the base point of ``eta_hat``;
    a mismatch raises ContractViolation.
    """
    p, v = (np.asarray(a, dtype=float) for a in theta)
    if eta_base is not None:
        q, u = (np.asarray(a, dtype=float) for a in eta_base)
        if np.max(np.abs(q - p)) > tol or np.max(np.abs(u - v)) > tol:
            raise ContractViolation("vectors live over different base points")
    w1, w2 = (np.asarray(a, dtype=float) for a in xi_hat)
    z1, z2 = (np.asarray(a, dtype=float) for a in eta_hat)
    return {"inner": float(w1 @ g @ z1 + w2 @ g @ z2),
            "alpha": float(w1 @ g @ v),
            "omega": float(w1 @ g @ z2 - w2 @ g @ z1)}


def symplectic_drift(path, a, b):
    """Largest change of ``omega(J_a, J_b)`` along a path, columns a and b.

    In an orthonormal parallel frame ``omega = xi_a . eta_b - eta_a . xi_b``.
    """
    w = (np.einsum("ti,ti->t", path.xi[:, :, a], path.eta[:, :, b])
         - np.einsum("ti,ti->t", path.eta[:, :, a], path.xi[:, :, b]))
    return float(np.max(np.abs(w - w[0])))
