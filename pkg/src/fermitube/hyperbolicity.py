"""Cone families, the angle functional and finite-time exponents.

Vectors of the contact structure are written in the parallel transverse
frame as ``zeta = (xi, eta)`` with ``m = n - 1`` components each; the
Sasaki metric is then the Euclidean one on R^{2m}.  Frame indices
``0 .. r-1`` span A and the rest span B; the deformation direction s
(a chart index) sits at frame position ``s - 1``.

Theta is the squared cosine of the angle to a subspace,
``|Pr_E zeta|^2 / |zeta|^2``.  For ``E = P_A^u`` this equals
``|xi_A + eta_A|^2 / (2 N)`` with ``N = |xi|^2 + |eta|^2``.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geodesic_flow import integrate_geodesic
from .tensor_kernel import ContractViolation, christoffel_at, curvature_at, sectional_at

SELECTORS = ("A_u", "A_s", "B_u", "B_s")
DEFAULT_TRANSIENT = 150.0


@dataclass(frozen=True)
class ConeFamily:
    selector: str = "A_u"
    opening: float = 0.9
    m: int = 3
    r: int = 1

    def __post_init__(self):
        if self.selector not in SELECTORS:
            raise ContractViolation("unknown cone center %r" % self.selector)
        if not 0.0 < self.opening < 1.0:
            raise ContractViolation("cone opening must lie in (0, 1)")

    def center(self):
        return center_basis(self.selector, self.m, self.r)


def center_basis(selector, m, r=1):
    """Orthonormal basis (2m, k) of one of the four invariant bundles on the central orbit."""
    part, kind = selector.split("_")
    idx = range(r) if part == "A" else range(r, m)
    slope = 1.0 if part == "A" else 0.5
    sign = 1.0 if kind == "u" else -1.0
    cols = []
    for i in idx:
        col = np.zeros(2 * m)
        col[i] = 1.0
        col[m + i] = sign * slope
        cols.append(col / np.linalg.norm(col))
    return np.array(cols).T


def _orthonormal(basis):
    q, _ = np.linalg.qr(np.asarray(basis, dtype=float))
    return q


def theta(basis, zeta):
    """``|Pr_E zeta|^2 / |zeta|^2`` for E spanned by the columns of ``basis``."""
    zeta = np.asarray(zeta, dtype=float)
    nz = zeta @ zeta
    if nz == 0.0:
        raise ContractViolation("theta is undefined at the zero vector")
    q = _orthonormal(basis)
    proj = q.T @ zeta
    return float(proj @ proj / nz)


def theta_A_sum(xi, eta, r=1, sign=1.0):
    """``|xi_A +- eta_A|^2 / (|xi|^2 + |eta|^2)``: twice the projection form."""
    a = xi[:r] + sign * eta[:r]
    return float(a @ a / (xi @ xi + eta @ eta))


def theta_rate(basis, kmat, zeta):
    """Instantaneous d(theta)/dt under ``xi' = eta, eta' = -K xi``."""
    q = _orthonormal(basis)
    m = kmat.shape[0]
    zeta = np.asarray(zeta, dtype=float)
    dz = np.concatenate([zeta[m:], -kmat @ zeta[:m]])
    nz = zeta @ zeta
    pz = q.T @ zeta
    return float(2.0 * (pz @ (q.T @ dz)) / nz - 2.0 * (pz @ pz) * (zeta @ dz) / nz ** 2)


def theta_rate_batch(basis, kmat, zetas):
    """Vectorised ``theta_rate`` for columns of ``zetas`` (2m, c)."""
    q = _orthonormal(basis)
    m = kmat.shape[0]
    dz = np.concatenate([zetas[m:], -kmat @ zetas[:m]])
    nz = np.einsum("ic,ic->c", zetas, zetas)
    pz = q.T @ zetas
    return (2.0 * np.einsum("kc,kc->c", pz, q.T @ dz) / nz
            - 2.0 * np.einsum("kc,kc->c", pz, pz) * np.einsum("ic,ic->c", zetas, dz) / nz ** 2)


def undeformed_quadratic_form(xi, eta, r=1):
    """``N - <eta, xi> - <eta_B, xi_B>/4 - <eta_A, xi_A>`` for the model operator."""
    return float(xi @ xi + eta @ eta - eta @ xi - 0.25 * (eta[r:] @ xi[r:]) - eta[:r] @ xi[:r])


def undeformed_theta_rate(xi, eta, r=1):
    """Closed-form rate of the A^u angle ``|xi_A + eta_A|^2 / N`` for the model operator.

    Returns ``(M * Q, M)`` with ``M = 2|xi_A + eta_A|^2 / N^2`` and Q the
    quadratic form above.  The projection-form theta changes at half this rate.
    """
    a = xi[:r] + eta[:r]
    nn = xi @ xi + eta @ eta
    big_m = 2.0 * (a @ a) / nn ** 2
    return float(big_m * undeformed_quadratic_form(xi, eta, r)), float(big_m)


def undeformed_sum_of_squares(xi, eta, r=1):
    """``|xi_A - eta_A|^2 + |xi_B - 5/8 eta_B|^2 + 39/64 |eta_B|^2``."""
    da = xi[:r] - eta[:r]
    db = xi[r:] - 0.625 * eta[r:]
    return float(da @ da + db @ db + 39.0 / 64.0 * (eta[r:] @ eta[r:]))


def f_zero_expanded(xi, eta, r, s_pos):
    """Quadratic form of the parallel-geodesic estimate at x = 0, expanded."""
    return undeformed_quadratic_form(xi, eta, r) - 0.5 * xi[s_pos] * eta[s_pos]


def f_zero_sum_of_squares(xi, eta, r, s_pos):
    """The same form as a sum of squares (positive unless xi = eta = 0)."""
    m = len(xi)
    b = [i for i in range(r, m) if i != s_pos]
    da = xi[:r] - eta[:r]
    db = xi[b] - 0.625 * eta[b]
    return float(da @ da + db @ db + 39.0 / 64.0 * (eta[b] @ eta[b])
                 + (xi[s_pos] - 0.875 * eta[s_pos]) ** 2 + 15.0 / 64.0 * eta[s_pos] ** 2)


def boundary_directions(cone, count, rng):
    """Random unit vectors with ``theta = opening`` for the cone's center.

    ``zeta = sqrt(c) u + sqrt(1 - c) w`` with u a unit vector of the center
    and w a unit vector orthogonal to it.  Returns (2m, count).
    """
    q = _orthonormal(cone.center())
    dim = 2 * cone.m
    u = q @ rng.normal(size=(q.shape[1], count))
    u /= np.linalg.norm(u, axis=0)
    w = rng.normal(size=(dim, count))
    w -= q @ (q.T @ w)
    w /= np.linalg.norm(w, axis=0)
    return np.sqrt(cone.opening) * u + np.sqrt(1.0 - cone.opening) * w


def theta_derivative(path, cone, column=0, r=1):
    """Numeric and closed-form d(theta)/dt along a Jacobi path.

    The numeric value is a central difference of the projection-form theta
    over consecutive path samples.  The closed form is the model-operator
    expression (valid for the undeformed metric), halved to match the
    projection normalisation.  Samples with ``xi_A + eta_A`` below 1e-12 are
    flagged as degenerate.
    """
    basis = cone.center()
    xi = path.xi[:, :, column]
    eta = path.eta[:, :, column]
    zeta = np.concatenate([xi, eta], axis=1)
    th = np.array([theta(basis, z) for z in zeta])
    dt = path.times[1] - path.times[0]
    numeric = (th[2:] - th[:-2]) / (2 * dt)
    closed = np.array([0.5 * undeformed_theta_rate(a, b, r)[0] for a, b in zip(xi[1:-1], eta[1:-1])])
    degenerate = np.linalg.norm(xi[1:-1, :r] + eta[1:-1, :r], axis=1) < 1e-12
    return {"times": path.times[1:-1], "numeric": numeric, "closed_form": closed,
            "theta": th[1:-1], "degenerate": degenerate}


@dataclass
class SamplePlan:
    eps: float = 0.05
    theta: float = 0.1
    seeds_per_class: int = 64
    directions: int = 32
    horizon: float = 2 * np.pi
    sample_every: float = 0.05
    step: float = 5e-4
    seed: int = 0


def make_seeds(plan, n, s, rng):
    """Initial conditions for the three seed classes.

    * parallel: velocity along d_t, start anywhere in the half tube;
    * almost parallel: every transverse velocity component below theta in
      size, including a nonzero s-component;
    * transversal: ``|v_s|`` in [theta, 2 theta], entering through the face
      ``x_s = -+eps``.
    """
    eps, th = plan.eps, plan.theta
    seeds = []
    for k in range(plan.seeds_per_class):
        p = np.concatenate([[rng.uniform(0, 2 * np.pi)], rng.uniform(-0.5 * eps, 0.5 * eps, n - 1)])
        p[s] = rng.uniform(-eps ** 2, eps ** 2)
        v = np.zeros(n)
        v[0] = 1.0
        seeds.append(("parallel", k, p, v))
    for k in range(plan.seeds_per_class):
        p = np.concatenate([[rng.uniform(0, 2 * np.pi)], rng.uniform(-0.5 * eps, 0.5 * eps, n - 1)])
        p[s] = rng.uniform(-eps ** 2, eps ** 2)
        v = np.concatenate([[1.0], rng.uniform(-th, th, n - 1)])
        v[s] = rng.uniform(0.1 * th, th) * rng.choice([-1.0, 1.0])
        seeds.append(("almost_parallel", k, p, v))
    for k in range(plan.seeds_per_class):
        sign = rng.choice([-1.0, 1.0])
        p = np.concatenate([[rng.uniform(0, 2 * np.pi)], rng.uniform(-0.5 * eps, 0.5 * eps, n - 1)])
        p[s] = -sign * eps * (1 - 1e-9)
        v = np.concatenate([[1.0], rng.uniform(-th, th, n - 1)])
        v[s] = sign * rng.uniform(th, 2 * th)
        seeds.append(("transversal", k, p, v))
    return seeds


def cone_invariance_scan(chart, cone, plan, s):
    """Scan the boundary of a cone family along integrated orbits.

    For parallel and almost-parallel seeds the orbit runs until it leaves
    ``U(eps)`` or reaches the horizon; at every sampled time the rate of
    theta is evaluated on ``plan.directions`` boundary vectors using the
    Jacobi operator of the orbit.  Boundary vectors with ``xi_A + eta_A``
    numerically zero are counted separately.  For transversal seeds the
    residence time in ``U(eps)`` is compared with ``(2 eps / theta)(1 + 10 eps)``.
    Rows are sorted by (class, seed id).
    """
    rng = np.random.default_rng(plan.seed)
    n = chart.dim
    seeds = make_seeds(plan, n, s, rng)
    basis = cone.center()
    stride = max(1, int(round(plan.sample_every / plan.step)))
    rows = []
    for cls, k, p, v in seeds:
        dirs_rng = np.random.default_rng([plan.seed, k, SELECTORS.index(cone.selector),
                                          ["parallel", "almost_parallel", "transversal"].index(cls)])
        if cls == "transversal":
            v_unit = v / np.sqrt(v @ chart.metric(p[None])[0] @ v)
            orbit = integrate_geodesic(chart, p, v, 4 * plan.eps / plan.theta + 1.0,
                                       step=plan.step, box=plan.eps)
            res = orbit.exit_time if orbit.exit_time is not None else np.inf
            limit = 2 * plan.eps / plan.theta * (1 + 10 * plan.eps)
            rows.append({"class": cls, "seed": k, "v_s": float(v_unit[s]), "residence": float(res),
                         "limit": float(limit), "pass": bool(res <= limit)})
            continue
        orbit = integrate_geodesic(chart, p, v, plan.horizon, step=plan.step, box=plan.eps)
        zetas = boundary_directions(cone, plan.directions, dirs_rng)
        a_norm = np.linalg.norm(zetas[:cone.r] + zetas[cone.m:cone.m + cone.r], axis=0)
        good = a_norm > 1e-12
        best = np.inf
        for km in orbit.kmats[::stride]:
            rates = theta_rate_batch(basis, km, zetas[:, good])
            best = min(best, float(np.min(rates)))
        rows.append({"class": cls, "seed": k, "v_s": float(v[s] / np.linalg.norm(v)),
                     "duration": float(orbit.duration),
                     "exit_time": None if orbit.exit_time is None else float(orbit.exit_time),
                     "min_rate": best, "degenerate": int(np.sum(~good)), "pass": bool(best > 0)})
    return rows


@dataclass
class SpectrumReport:
    exponents: np.ndarray
    horizon: float
    transient: float
    gaps: list
    pairing_residual: float
    partial: bool = False
    extra: dict = field(default_factory=dict)


def lyapunov_from_kmats(kmats, dt, horizon, transient=0.0, window=0.5):
    """Finite-time exponents of ``xi' = eta, eta' = -K xi`` on R^{2m}.

    ``kmats`` samples K every ``dt``; the Jacobi step is ``2 dt``.  A full
    basis of 2m solutions is advanced in windows of length ``window`` and
    re-orthonormalised by QR after each.  Logarithms of the diagonal of R
    are accumulated only after the first ``transient`` time units.
    """
    m = kmats.shape[1]
    jstep = 2 * dt
    per_window = int(round(window / jstep))
    n_windows = int(round((transient + horizon) / window))
    skip = int(round(transient / window))
    avail = (len(kmats) - 1) // (2 * per_window)
    partial = avail < n_windows
    n_windows = min(n_windows, avail)
    basis = np.eye(2 * m)
    sums = np.zeros(2 * m)
    window_exps = []
    for w in range(n_windows):
        lo = 2 * per_window * w
        ys = kernels.jacobi_rk4(np.ascontiguousarray(kmats[lo:lo + 2 * per_window + 1]),
                                basis, jstep, per_window)
        q, rr = np.linalg.qr(ys[-1])
        signs = np.sign(np.diag(rr))
        basis = q * signs
        logs = np.log(np.abs(np.diag(rr)))
        if w >= skip:
            sums += logs
            window_exps.append(logs / window)
    span = (n_windows - skip) * window
    if span <= 0:
        raise ContractViolation("orbit ended inside the transient window")
    exps = np.sort(sums / span)[::-1]
    gaps = [float(exps[i] - exps[i + 1]) for i in range(len(exps) - 1)]
    pairing = float(np.max(np.abs(exps + exps[::-1])))
    return SpectrumReport(exponents=exps, horizon=span, transient=transient, gaps=gaps,
                          pairing_residual=pairing, partial=partial,
                          extra={"sum": float(np.sum(exps)), "windows": len(window_exps)})


def lyapunov_from_orbit(orbit, horizon, transient=0.0, window=0.5):
    rep = lyapunov_from_kmats(orbit.kmats, orbit.dt, horizon, transient, window)
    rep.partial = rep.partial or orbit.exit_time is not None
    return rep


def constant_operator_kmats(kmat, dt, duration):
    """Samples of a constant Jacobi operator, for the model space itself."""
    count = int(round(duration / dt)) + 1
    return np.ascontiguousarray(np.broadcast_to(kmat, (count,) + kmat.shape))


def model_operator(spec):
    """``K = diag(-1 on A, -1/4 on B)`` in an adapted frame of the model."""
    m = spec.n - 1
    return np.diag([-1.0] * spec.r + [-0.25] * (m - spec.r))


def domination_gaps(exps, tol=0.05):
    """Cluster exponents within ``tol`` and return the cluster means and consecutive gaps."""
    groups = cluster(list(exps), tol)
    means = [float(np.mean(g)) for g in groups]
    return means, [means[i] - means[i + 1] for i in range(len(means) - 1)]


def lyapunov_spectrum(chart, point, velocity, horizon=20.0, transient=DEFAULT_TRANSIENT, step=5e-4,
                      window=0.5):
    """Exponents along the geodesic through ``(point, velocity)``.

    The orbit is integrated for ``transient + horizon``; a partial report is
    returned when it leaves the chart first.
    """
    orbit = integrate_geodesic(chart, point, velocity, transient + horizon, step=step)
    return lyapunov_from_orbit(orbit, horizon, transient, window)


def cluster(values, tol=0.05):
    """Group sorted values whose neighbours differ by less than ``tol``."""
    groups = [[values[0]]]
    for v in values[1:]:
        if abs(groups[-1][-1] - v) < tol:
            groups[-1].append(v)
        else:
            groups.append([v])
    return groups


def anosov_obstruction_witness(chart, s, period=None, samples=64):
    """Flat parallel field check along the central geodesic.

    Along ``gamma(t) = (t, 0)`` the coordinate field ``e_s`` has covariant
    derivative ``Gamma^k_{0s}(t, 0) e_k``.  Returns the max over sampled t of
    its norm and of ``|K(e_s, gamma')|``.
    """
    n = chart.dim
    period = chart.period if period is None else period
    ts = np.linspace(0.0, period, samples, endpoint=False)
    e_s = np.eye(n)[s]
    e_0 = np.eye(n)[0]
    dmax = kmax = 0.0
    for t in ts:
        p = np.zeros(n)
        p[0] = t
        g = chart.metric(p[None])[0]
        gam = christoffel_at(chart, p)
        cov = gam[:, 0, s]
        dmax = max(dmax, float(np.sqrt(cov @ g @ cov)))
        kmax = max(kmax, abs(sectional_at(curvature_at(chart, p), g, e_s, e_0)))
    return {"max_covariant_derivative": dmax, "max_abs_curvature": kmax, "samples": samples}

