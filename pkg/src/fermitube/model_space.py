"""The undeformed background: complex hyperbolic curvature and its Fermi tube.

The model is a Kaehler manifold of holomorphic sectional curvature -1.  At a
unit vector v the orthogonal complement splits as ``A = span{Jv}`` (curvature
-1 with v) and ``B`` (curvature -1/4 with v).
"""
from dataclasses import dataclass, field

import numpy as np

from .tensor_kernel import ContractViolation, QuadraticChart


class ChartDomainError(ValueError):
    """The requested tube radius is too large for a positive definite chart."""

    def __init__(self, message, max_radius):
        super().__init__(message)
        self.max_radius = max_radius


@dataclass(frozen=True)
class ModelSpec:
    n: int = 4
    r: int = 1
    s: int = 3
    period: float = 2 * np.pi
    tube_radius: float = 0.5

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise ContractViolation("the Kaehler model needs an even dimension n >= 4")
        if self.r != 1:
            raise ContractViolation("the Kaehler model has r = 1")
        if not self.r + 1 <= self.s <= self.n - 1:
            raise ContractViolation("s must lie in [r + 1, n - 1]")
        if self.tube_radius <= 0 or self.period <= 0:
            raise ContractViolation("period and tube radius must be positive")


def complex_structure(n):
    """Standard J on R^n with ``J e_{2k} = e_{2k+1}``."""
    jmat = np.zeros((n, n))
    for k in range(0, n, 2):
        jmat[k + 1, k] = 1.0
        jmat[k, k + 1] = -1.0
    return jmat


def kahler_curvature(x, y, z, jmat, g=None):
    """``R(x, y)z`` for the complex space form of holomorphic curvature -1."""
    if g is None:
        g = np.eye(len(x))
    jx, jy, jz = jmat @ x, jmat @ y, jmat @ z
    return -0.25 * ((y @ g @ z) * x - (x @ g @ z) * y + (jy @ g @ z) * jx
                    - (jx @ g @ z) * jy + 2.0 * (x @ g @ jy) * jz)


def kahler_curvature_tensor(spec, v, x, y, z):
    """``R(x, y)z`` at a point of the model, in an orthonormal J-adapted basis.

    ``v`` is the reference unit vector; it does not enter the tensor itself
    but is validated so that callers can rely on ``R(x, v)v = -x_A - x_B / 4``.
    """
    v = np.asarray(v, dtype=float)
    if abs(v @ v - 1.0) > 1e-9:
        raise ContractViolation("v must be a unit vector")
    return kahler_curvature(np.asarray(x, float), np.asarray(y, float), np.asarray(z, float),
                            complex_structure(spec.n))


def kahler_lowered(n):
    """Lowered model tensor ``R[i, j, k, l] = g(R(e_i, e_j)e_k, e_l)``."""
    jmat = complex_structure(n)
    eye = np.eye(n)
    out = np.zeros((n, n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                out[i, j, k] = kahler_curvature(eye[i], eye[j], eye[k], jmat)
    return out


def split_AB(spec, v, w, jmat=None, g=None, tol=1e-9):
    """Split ``w`` (orthogonal to v) into its A = span{Jv} and B parts."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if jmat is None:
        jmat = complex_structure(spec.n)
    if g is None:
        g = np.eye(spec.n)
    if abs(v @ g @ w) > tol * max(1.0, np.sqrt(w @ g @ w)):
        raise ContractViolation("w must be orthogonal to v")
    jv = jmat @ v
    jv = jv / np.sqrt(jv @ g @ jv)
    w_a = (w @ g @ jv) * jv
    return w_a, w - w_a


class FermiChart(QuadraticChart):
    """Second-order Fermi chart around the closed central geodesic.

    Coefficients come from the model tensor ``R`` at the axis:
    ``g_00 = 1 + R_0a0b x_a x_b``, ``g_0a = (2/3) R_0bac x_b x_c`` and
    ``g_ab = delta_ab + (1/3) R_acbd x_c x_d``.  With ``R_0a0a = -K(e_0, e_a)``
    this gives ``g_00 = 1 + x^2`` for curvature -1, the expansion of cosh^2.
    """

    def __init__(self, spec):
        n = spec.n
        riem = kahler_lowered(n)
        quad = np.zeros((n, n, n, n))
        ax = range(1, n)
        for a in ax:
            for b in ax:
                quad[0, 0, a, b] = riem[0, a, 0, b]
                for c in ax:
                    quad[0, a, b, c] = quad[a, 0, b, c] = (2.0 / 3.0) * riem[0, b, a, c]
                    for d in ax:
                        quad[a, b, c, d] = riem[a, c, b, d] / 3.0
        super().__init__(quad, radius=spec.tube_radius, period=spec.period)
        self.spec = spec
        self.model_riem = riem
        self.jmat = complex_structure(n)
        max_r = admissible_radius(self.quad)
        if spec.tube_radius >= max_r:
            raise ChartDomainError("tube radius %.4g exceeds the positive definite limit %.4g"
                                   % (spec.tube_radius, max_r), max_r)


def fermi_chart(spec):
    return FermiChart(spec)


def admissible_radius(quad, samples=41):
    """Largest box radius r with ``delta + Q(x, x)`` positive definite on (-r, r)^(n-1).

    ``Q`` is homogeneous of degree two, so along a ray x = lam * u the smallest
    eigenvalue crosses zero at ``lam^2 = -1 / min eig Q(u, u)``.  Rays are
    sampled through a grid on the faces of the unit cube.
    """
    n = quad.shape[0]
    m = n - 1
    lin = np.linspace(-1.0, 1.0, samples)
    best = np.inf
    for face in range(m):
        for sign in (-1.0, 1.0):
            grids = np.meshgrid(*([lin] * (m - 1)), indexing="ij")
            pts = np.stack([gr.ravel() for gr in grids], axis=1) if m > 1 else np.zeros((1, 0))
            u = np.insert(pts, face, sign, axis=1)
            u = np.concatenate([np.zeros((u.shape[0], 1)), u], axis=1)
            qu = np.einsum("ijab,pa,pb->pij", quad, u, u)
            lo = np.linalg.eigvalsh(qu)[:, 0]
            neg = lo < 0
            if np.any(neg):
                best = min(best, float(np.min(np.sqrt(-1.0 / lo[neg]))))
    return best


def gram_schmidt(vectors, g):
    """Orthonormalise the columns of ``vectors`` for the inner product g."""
    out = []
    for vec in np.asarray(vectors, dtype=float).T:
        w = vec.copy()
        for e in out:
            w = w - (w @ g @ e) * e
        w = w / np.sqrt(w @ g @ w)
        out.append(w)
    return np.array(out).T


def adapted_frame(g, v, jmat):
    """Orthonormal frame ``[v, Jv, e_2, J e_2, ...]`` for the metric g at a point.

    Column 0 is ``v`` normalised, columns ``1..r`` span A and the rest span B.
    Candidate vectors use the constant J of the axis and are orthonormalised
    with g, so at x = 0 with v = d_t the frame is the coordinate frame.
    """
    n = len(v)
    v = np.asarray(v, dtype=float)
    cands = [v, jmat @ v]
    eye = np.eye(n)
    for k in range(2, n, 2):
        cands.append(eye[k])
        cands.append(jmat @ eye[k])
    return gram_schmidt(np.array(cands).T, g)


@dataclass
class ParallelFrame:
    times: np.ndarray
    frames: np.ndarray  # (T, n, n); column 0 is the velocity
    r: int = 1
    extra: dict = field(default_factory=dict)

    def a_part(self):
        return self.frames[:, :, 1:1 + self.r]

    def b_part(self):
        return self.frames[:, :, 1 + self.r:]


class DomainExit(RuntimeError):
    def __init__(self, message, exit_time):
        super().__init__(message)
        self.exit_time = exit_time


def parallel_frame_along(chart, orbit, allow_partial=False, r=1):
    """The parallel frame carried by an integrated orbit.

    Orbits from ``geodesic_flow.integrate_geodesic`` transport their frame
    with the geodesic equations, so this returns that transported frame.
    Raises DomainExit when the orbit left the chart before its horizon.
    """
    if orbit.exit_time is not None and not allow_partial:
        raise DomainExit("orbit leaves the chart at t = %.6g" % orbit.exit_time, orbit.exit_time)
    return ParallelFrame(times=orbit.times, frames=orbit.frames, r=r)
