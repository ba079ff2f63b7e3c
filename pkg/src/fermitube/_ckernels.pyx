# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.  Signatures mirror ``_pykernels`` plus a fused
geodesic/frame integrator for quadratic charts with an optional bump
deformation."""
import numpy as np

from libc.math cimport exp, sqrt, fabs
from libc.stdlib cimport malloc, free
from libc.string cimport memset, memcpy

cdef enum:
    NMAX = 8


cdef int invert(int n, const double* a, double* out, double* work) noexcept nogil:
    """Gauss-Jordan inverse with partial pivoting.  work needs n*n doubles."""
    cdef int i, j, k, piv
    cdef double best, tmp, f
    memcpy(work, a, n * n * sizeof(double))
    memset(out, 0, n * n * sizeof(double))
    for i in range(n):
        out[i * n + i] = 1.0
    for k in range(n):
        piv = k
        best = fabs(work[k * n + k])
        for i in range(k + 1, n):
            if fabs(work[i * n + k]) > best:
                best = fabs(work[i * n + k])
                piv = i
        if best == 0.0:
            return -1
        if piv != k:
            for j in range(n):
                tmp = work[k * n + j]; work[k * n + j] = work[piv * n + j]; work[piv * n + j] = tmp
                tmp = out[k * n + j]; out[k * n + j] = out[piv * n + j]; out[piv * n + j] = tmp
        f = 1.0 / work[k * n + k]
        for j in range(n):
            work[k * n + j] *= f
            out[k * n + j] *= f
        for i in range(n):
            if i != k:
                f = work[i * n + k]
                if f != 0.0:
                    for j in range(n):
                        work[i * n + j] -= f * work[k * n + j]
                        out[i * n + j] -= f * out[k * n + j]
    return 0


cdef void first_kind(int n, const double* dg, double* low) noexcept nogil:
    # low[l, i, j] = (d_i g_lj + d_j g_li - d_l g_ij) / 2 ; dg[k, i, j] = d_k g_ij
    cdef int l, i, j
    cdef int n2 = n * n
    for l in range(n):
        for i in range(n):
            for j in range(n):
                low[(l * n + i) * n + j] = 0.5 * (dg[i * n2 + l * n + j] + dg[j * n2 + l * n + i]
                                                  - dg[l * n2 + i * n + j])


cdef void second_kind(int n, const double* ginv, const double* low, double* gamma) noexcept nogil:
    cdef int k, l, ij
    cdef int n2 = n * n
    cdef double acc
    for k in range(n):
        for ij in range(n2):
            acc = 0.0
            for l in range(n):
                acc += ginv[k * n + l] * low[l * n2 + ij]
            gamma[k * n2 + ij] = acc


cdef void curvature(int n, const double* ddg, const double* low, const double* gamma,
                    double* riem) noexcept nogil:
    # riem[i,j,k,l] = dlow[i,l,j,k] - dlow[j,l,i,k] + G^m_ik low[m,j,l] - G^m_jk low[m,i,l]
    # dlow[a,l,j,k] = (ddg[a,j,l,k] + ddg[a,k,l,j] - ddg[a,l,j,k]) / 2
    cdef int i, j, k, l, m
    cdef int n2 = n * n
    cdef int n3 = n2 * n
    cdef double acc, d1, d2
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    d1 = 0.5 * (ddg[i * n3 + j * n2 + l * n + k] + ddg[i * n3 + k * n2 + l * n + j]
                                - ddg[i * n3 + l * n2 + j * n + k])
                    d2 = 0.5 * (ddg[j * n3 + i * n2 + l * n + k] + ddg[j * n3 + k * n2 + l * n + i]
                                - ddg[j * n3 + l * n2 + i * n + k])
                    acc = d1 - d2
                    for m in range(n):
                        acc += gamma[m * n2 + i * n + k] * low[m * n2 + j * n + l]
                        acc -= gamma[m * n2 + j * n + k] * low[m * n2 + i * n + l]
                    riem[((i * n + j) * n + k) * n + l] = acc


def geometry_batch(double[:, :, ::1] g, double[:, :, :, ::1] dg, double[:, :, :, :, ::1] ddg):
    cdef Py_ssize_t nb = g.shape[0]
    cdef int n = g.shape[1]
    ginv_a = np.empty((nb, n, n))
    gamma_a = np.empty((nb, n, n, n))
    riem_a = np.empty((nb, n, n, n, n))
    cdef double[:, :, ::1] ginv = ginv_a
    cdef double[:, :, :, ::1] gamma = gamma_a
    cdef double[:, :, :, :, ::1] riem = riem_a
    cdef double* low = <double*> malloc(n * n * n * sizeof(double))
    cdef double* work = <double*> malloc(n * n * sizeof(double))
    cdef Py_ssize_t b
    cdef int bad = 0
    with nogil:
        for b in range(nb):
            if invert(n, &g[b, 0, 0], &ginv[b, 0, 0], work) != 0:
                bad = 1
                break
            first_kind(n, &dg[b, 0, 0, 0], low)
            second_kind(n, &ginv[b, 0, 0], low, &gamma[b, 0, 0, 0])
            curvature(n, &ddg[b, 0, 0, 0, 0], low, &gamma[b, 0, 0, 0], &riem[b, 0, 0, 0, 0])
    free(low)
    free(work)
    if bad:
        raise np.linalg.LinAlgError("Singular matrix")
    return ginv_a, gamma_a, riem_a


def christoffel_batch(double[:, :, ::1] g, double[:, :, :, ::1] dg):
    cdef Py_ssize_t nb = g.shape[0]
    cdef int n = g.shape[1]
    gamma_a = np.empty((nb, n, n, n))
    cdef double[:, :, :, ::1] gamma = gamma_a
    cdef double* low = <double*> malloc(n * n * n * sizeof(double))
    cdef double* work = <double*> malloc(n * n * sizeof(double))
    cdef double* ginv = <double*> malloc(n * n * sizeof(double))
    cdef Py_ssize_t b
    cdef int bad = 0
    with nogil:
        for b in range(nb):
            if invert(n, &g[b, 0, 0], ginv, work) != 0:
                bad = 1
                break
            first_kind(n, &dg[b, 0, 0, 0], low)
            second_kind(n, ginv, low, &gamma[b, 0, 0, 0])
    free(low)
    free(work)
    free(ginv)
    if bad:
        raise np.linalg.LinAlgError("Singular matrix")
    return gamma_a


def jacobi_rk4(kmat_in, y0, double dt, int stride):
    cdef double[:, :, ::1] kmat = np.ascontiguousarray(kmat_in, dtype=float)
    y_arr = np.array(y0, dtype=float, order="C")
    cdef int nsteps = (kmat.shape[0] - 1) // 2
    cdef int m = kmat.shape[1]
    cdef int c = y_arr.shape[1]
    out_a = np.empty((nsteps // stride + 1, 2 * m, c))
    cdef double[:, :, ::1] out = out_a
    cdef double[:, ::1] y = y_arr
    out_a[0] = y_arr
    cdef double* ka = <double*> malloc(4 * 2 * m * c * sizeof(double))
    cdef double* tmp = <double*> malloc(2 * m * c * sizeof(double))
    cdef double* kb = ka + 2 * m * c
    cdef double* kc = kb + 2 * m * c
    cdef double* kd = kc + 2 * m * c
    cdef int step, i, j, q, r
    cdef double acc
    with nogil:
        for step in range(nsteps):
            _jrhs(&kmat[2 * step, 0, 0], &y[0, 0], ka, m, c)
            for i in range(2 * m * c):
                tmp[i] = (&y[0, 0])[i] + 0.5 * dt * ka[i]
            _jrhs(&kmat[2 * step + 1, 0, 0], tmp, kb, m, c)
            for i in range(2 * m * c):
                tmp[i] = (&y[0, 0])[i] + 0.5 * dt * kb[i]
            _jrhs(&kmat[2 * step + 1, 0, 0], tmp, kc, m, c)
            for i in range(2 * m * c):
                tmp[i] = (&y[0, 0])[i] + dt * kc[i]
            _jrhs(&kmat[2 * step + 2, 0, 0], tmp, kd, m, c)
            for i in range(2 * m * c):
                (&y[0, 0])[i] += dt / 6.0 * (ka[i] + 2.0 * kb[i] + 2.0 * kc[i] + kd[i])
            if (step + 1) % stride == 0:
                memcpy(&out[(step + 1) // stride, 0, 0], &y[0, 0], 2 * m * c * sizeof(double))
    free(ka)
    free(tmp)
    return out_a


cdef void _jrhs(const double* k, const double* y, double* out, int m, int c) noexcept nogil:
    cdef int i, j, q
    cdef double acc
    for i in range(m):
        for q in range(c):
            out[i * c + q] = y[(m + i) * c + q]
            acc = 0.0
            for j in range(m):
                acc += k[i * m + j] * y[j * c + q]
            out[(m + i) * c + q] = -acc


# ---------------------------------------------------------------------------
# quadratic chart with optional bump deformation


cdef struct ChartSpec:
    int n
    int kind
    int s
    int nf
    double eps
    double* quad
    double* fc0
    double* fc1
    double* fc2


cdef inline double horner(const double* c, int nc, double x) noexcept nogil:
    cdef double acc = 0.0
    cdef int i
    for i in range(nc - 1, -1, -1):
        acc = acc * x + c[i]
    return acc


cdef inline void unit_bump3(double y, double* out) noexcept nogil:
    cdef double u, val, a
    if fabs(y) >= 1.0:
        out[0] = 0.0; out[1] = 0.0; out[2] = 0.0
        return
    u = 1.0 - y * y
    val = exp(1.0 - 1.0 / u)
    a = -2.0 * y / (u * u)
    out[0] = val
    out[1] = val * a
    out[2] = val * (a * a - 2.0 / (u * u) - 8.0 * y * y / (u * u * u))


cdef void chart_jet(ChartSpec* cs, const double* p, double* g, double* dg, double* ddg) noexcept nogil:
    cdef int n = cs.n
    cdef int n2 = n * n
    cdef int n3 = n2 * n
    cdef int i, j, a, b, k, l
    cdef double acc, xa
    cdef double x[NMAX]
    x[0] = 0.0
    for a in range(1, n):
        x[a] = p[a]
    for i in range(n):
        for j in range(n):
            acc = 1.0 if i == j else 0.0
            for a in range(1, n):
                xa = 0.0
                for b in range(1, n):
                    xa += cs.quad[((i * n + j) * n + a) * n + b] * x[b]
                dg[a * n2 + i * n + j] = 2.0 * xa
                acc += xa * x[a]
            dg[i * n + j] = 0.0
            g[i * n + j] = acc
    for k in range(n):
        for l in range(n):
            for i in range(n):
                for j in range(n):
                    ddg[k * n3 + l * n2 + i * n + j] = 2.0 * cs.quad[((i * n + j) * n + k) * n + l]
    if cs.kind == 0:
        return
    for a in range(1, n):
        if fabs(p[a]) >= cs.eps:
            return
    deform(cs, p, g, dg, ddg)


cdef void deform(ChartSpec* cs, const double* p, double* g, double* dg, double* ddg) noexcept nogil:
    cdef int n = cs.n
    cdef int n2 = n * n
    cdef int n3 = n2 * n
    cdef int m = n - 1
    cdef int i, j, k, l, q, s = cs.s
    cdef double b3[3]
    cdef double p0[NMAX]
    cdef double p1[NMAX]
    cdef double p2[NMAX]
    cdef double grad[NMAX]
    cdef double hess[NMAX * NMAX]
    cdef double dh[NMAX]
    cdef double ddh[NMAX * NMAX]
    cdef double val, prod, f0, f1, f2, xs, h, e, fs, g0
    cdef double eps = cs.eps
    for j in range(1, n):
        unit_bump3(p[j] / eps, b3)
        p0[j] = b3[0]
        p1[j] = b3[1] / eps
        p2[j] = b3[2] / (eps * eps)
    val = 1.0
    for j in range(1, n):
        val *= p0[j]
    for j in range(1, n):
        prod = 1.0
        for q in range(1, n):
            if q != j:
                prod *= p0[q]
        grad[j] = p1[j] * prod
        hess[j * n + j] = p2[j] * prod
        for k in range(j + 1, n):
            prod = 1.0
            for q in range(1, n):
                if q != j and q != k:
                    prod *= p0[q]
            hess[j * n + k] = p1[j] * p1[k] * prod
            hess[k * n + j] = hess[j * n + k]
    xs = p[s]
    fs = eps * eps
    if fabs(xs) <= fs:
        f0 = horner(cs.fc0, cs.nf, xs)
        f1 = horner(cs.fc1, cs.nf - 1, xs)
        f2 = horner(cs.fc2, cs.nf - 2, xs)
    else:
        f0 = 0.0; f1 = 0.0; f2 = 0.0
    h = -2.0 * val * f0
    dh[0] = 0.0
    for j in range(n):
        ddh[j] = 0.0
        ddh[j * n] = 0.0
    for j in range(1, n):
        dh[j] = -2.0 * grad[j] * f0
        for k in range(1, n):
            ddh[j * n + k] = -2.0 * hess[j * n + k] * f0
    dh[s] += -2.0 * val * f1
    for j in range(1, n):
        ddh[j * n + s] += -2.0 * grad[j] * f1
        ddh[s * n + j] += -2.0 * grad[j] * f1
    ddh[s * n + s] += -2.0 * val * f2
    e = exp(h)
    if cs.kind == 1:
        for i in range(n):
            for j in range(n):
                g0 = g[i * n + j]
                for k in range(n):
                    for l in range(n):
                        ddg[k * n3 + l * n2 + i * n + j] = e * (
                            (dh[k] * dh[l] + ddh[k * n + l]) * g0
                            + dh[k] * dg[l * n2 + i * n + j] + dh[l] * dg[k * n2 + i * n + j]
                            + ddg[k * n3 + l * n2 + i * n + j])
                for k in range(n):
                    dg[k * n2 + i * n + j] = e * (dh[k] * g0 + dg[k * n2 + i * n + j])
                g[i * n + j] = e * g0
    else:
        g0 = g[0]
        for k in range(n):
            for l in range(n):
                ddg[k * n3 + l * n2] = ((ddh[k * n + l] + dh[k] * dh[l]) * e * g0
                                        + e * (dh[k] * dg[l * n2] + dh[l] * dg[k * n2]
                                               + ddg[k * n3 + l * n2]))
        for k in range(n):
            dg[k * n2] = dh[k] * e * g0 + e * dg[k * n2]
        g[0] = e * g0


cdef int gamma_at(ChartSpec* cs, const double* p, double* g, double* dg, double* ddg,
                  double* ginv, double* low, double* gamma, double* work) noexcept nogil:
    chart_jet(cs, p, g, dg, ddg)
    if invert(cs.n, g, ginv, work) != 0:
        return -1
    first_kind(cs.n, dg, low)
    second_kind(cs.n, ginv, low, gamma)
    return 0


cdef void orbit_rhs(int n, const double* gamma, const double* v, const double* fr,
                    double* dp, double* dv, double* dfr) noexcept nogil:
    # fr holds the n x (n-1) transverse frame, row-major (component, column)
    cdef int k, i, j, a
    cdef int n2 = n * n
    cdef double acc, gv
    for k in range(n):
        dp[k] = v[k]
        acc = 0.0
        for i in range(n):
            gv = 0.0
            for j in range(n):
                gv += gamma[k * n2 + i * n + j] * v[j]
            acc += gv * v[i]
        dv[k] = -acc
        for a in range(n - 1):
            acc = 0.0
            for i in range(n):
                for j in range(n):
                    acc += gamma[k * n2 + i * n + j] * v[i] * fr[j * (n - 1) + a]
            dfr[k * (n - 1) + a] = -acc


def integrate_param_orbit(params, p0, v0, frame0, double dt, int nsteps, double box):
    """RK4 geodesic with transported transverse frame on a quadratic chart.

    ``params`` is the dict returned by ``chart.compiled_params()``.  ``frame0``
    is (n, n-1).  Stops when a transverse coordinate reaches ``box``.  Returns
    ``(points, velocities, frames, kmats, exit_time, drift)``; the arrays hold
    every completed step including the initial state, ``exit_time`` is None
    when the orbit stayed inside and ``drift`` is the largest deviation of
    the speed from 1 seen before renormalisation.
    """
    quad_a = np.ascontiguousarray(params["quad"], dtype=float)
    fc0_a = np.ascontiguousarray(params["fcoef"], dtype=float)
    cdef int n = quad_a.shape[0]
    if n > NMAX:
        raise ValueError("dimension too large for the compiled kernel")
    nf = fc0_a.shape[0]
    if nf < 3:
        fc0_a = np.concatenate([fc0_a, np.zeros(3 - nf)])
        nf = 3
    fc1_a = np.ascontiguousarray(fc0_a[1:] * np.arange(1, nf))
    fc2_a = np.ascontiguousarray(fc1_a[1:] * np.arange(1, nf - 1))
    cdef double[::1] qv = quad_a.ravel()
    cdef double[::1] c0 = fc0_a
    cdef double[::1] c1 = fc1_a
    cdef double[::1] c2 = fc2_a
    cdef ChartSpec cs
    cs.n = n
    cs.kind = int(params["kind"])
    cs.s = int(params["s"])
    cs.eps = float(params["eps"])
    cs.nf = nf
    cs.quad = &qv[0]
    cs.fc0 = &c0[0]
    cs.fc1 = &c1[0]
    cs.fc2 = &c2[0]
    cdef int m = n - 1
    pts_a = np.zeros((nsteps + 1, n))
    vel_a = np.zeros((nsteps + 1, n))
    frs_a = np.zeros((nsteps + 1, n, m))
    kms_a = np.zeros((nsteps + 1, m, m))
    cdef double[:, ::1] pts = pts_a
    cdef double[:, ::1] vel = vel_a
    cdef double[:, :, ::1] frs = frs_a
    cdef double[:, :, ::1] kms = kms_a
    cdef double[::1] p0v = np.ascontiguousarray(p0, dtype=float)
    cdef double[::1] v0v = np.ascontiguousarray(v0, dtype=float)
    cdef double[:, ::1] f0v = np.ascontiguousarray(frame0, dtype=float)
    cdef int nstate = n + n + n * m
    cdef double* buf = <double*> malloc((6 * nstate + 2 * n * n + 3 * n * n * n
                                         + n * n * n * n * 2) * sizeof(double))
    cdef double* y = buf
    cdef double* ytmp = y + nstate
    cdef double* k1 = ytmp + nstate
    cdef double* k2 = k1 + nstate
    cdef double* k3 = k2 + nstate
    cdef double* k4 = k3 + nstate
    cdef double* g = k4 + nstate
    cdef double* ginv = g + n * n
    cdef double* dg = ginv + n * n
    cdef double* low = dg + n * n * n
    cdef double* gamma = low + n * n * n
    cdef double* ddg = gamma + n * n * n
    cdef double* riem = ddg + n * n * n * n
    cdef double work[NMAX * NMAX]
    cdef double yold[NMAX]
    cdef int i, j, k, l, a, b, step, done = 0, exited = 0, fail = 0
    cdef double nrm, acc, frac, best, t_exit = -1.0, drift = 0.0
    for i in range(n):
        y[i] = p0v[i]
        y[n + i] = v0v[i]
        for a in range(m):
            y[2 * n + i * m + a] = f0v[i, a]
    with nogil:
        # initial record
        if gamma_at(&cs, y, g, dg, ddg, ginv, low, gamma, work) != 0:
            fail = 1
        else:
            curvature(n, ddg, low, gamma, riem)
            _record(n, m, y, riem, &pts[0, 0], &vel[0, 0], &frs[0, 0, 0], &kms[0, 0, 0])
        step = 0
        while step < nsteps and not fail:
            for i in range(n):
                yold[i] = y[i]
            if _rk_stage(&cs, y, y, 0.0, k1, g, dg, ddg, ginv, low, gamma, work, ytmp, nstate) != 0:
                fail = 1
                break
            if _rk_stage(&cs, y, k1, 0.5 * dt, k2, g, dg, ddg, ginv, low, gamma, work, ytmp, nstate) != 0:
                fail = 1
                break
            if _rk_stage(&cs, y, k2, 0.5 * dt, k3, g, dg, ddg, ginv, low, gamma, work, ytmp, nstate) != 0:
                fail = 1
                break
            if _rk_stage(&cs, y, k3, dt, k4, g, dg, ddg, ginv, low, gamma, work, ytmp, nstate) != 0:
                fail = 1
                break
            for i in range(nstate):
                y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            step += 1
            # exit test on the transverse coordinates
            best = 2.0
            for i in range(1, n):
                if fabs(y[i]) >= box:
                    frac = (box - fabs(yold[i])) / (fabs(y[i]) - fabs(yold[i]))
                    if frac < best:
                        best = frac
            if best <= 1.0:
                exited = 1
                t_exit = (step - 1 + best) * dt
                break
            if gamma_at(&cs, y, g, dg, ddg, ginv, low, gamma, work) != 0:
                fail = 1
                break
            nrm = 0.0
            for i in range(n):
                for j in range(n):
                    nrm += g[i * n + j] * y[n + i] * y[n + j]
            nrm = sqrt(nrm)
            if fabs(nrm - 1.0) > drift:
                drift = fabs(nrm - 1.0)
            for i in range(n):
                y[n + i] /= nrm
            curvature(n, ddg, low, gamma, riem)
            _record(n, m, y, riem, &pts[step, 0], &vel[step, 0], &frs[step, 0, 0], &kms[step, 0, 0])
            done = step
    free(buf)
    if fail:
        raise np.linalg.LinAlgError("singular metric along the orbit")
    return (pts_a[:done + 1], vel_a[:done + 1], frs_a[:done + 1], kms_a[:done + 1],
            t_exit if exited else None, drift)


cdef int _rk_stage(ChartSpec* cs, const double* y, const double* kprev, double h, double* kout,
                   double* g, double* dg, double* ddg, double* ginv, double* low, double* gamma,
                   double* work, double* ytmp, int nstate) noexcept nogil:
    cdef int i, n = cs.n
    if h == 0.0:
        for i in range(nstate):
            ytmp[i] = y[i]
    else:
        for i in range(nstate):
            ytmp[i] = y[i] + h * kprev[i]
    if gamma_at(cs, ytmp, g, dg, ddg, ginv, low, gamma, work) != 0:
        return -1
    orbit_rhs(n, gamma, ytmp + n, ytmp + 2 * n, kout, kout + n, kout + 2 * n)
    return 0


cdef void _record(int n, int m, const double* y, const double* riem, double* pt, double* ve,
                  double* fr, double* km) noexcept nogil:
    cdef int i, j, k, l, a, b
    cdef double acc
    cdef const double* v = y + n
    cdef const double* e = y + 2 * n
    for i in range(n):
        pt[i] = y[i]
        ve[i] = v[i]
    for i in range(n * m):
        fr[i] = e[i]
    # km[a, b] = R(E_a, v, v, E_b)
    cdef double rv[NMAX * NMAX]
    for i in range(n):
        for l in range(n):
            acc = 0.0
            for j in range(n):
                for k in range(n):
                    acc += riem[((i * n + j) * n + k) * n + l] * v[j] * v[k]
            rv[i * n + l] = acc
    for a in range(m):
        for b in range(m):
            acc = 0.0
            for i in range(n):
                for l in range(n):
                    acc += e[i * m + a] * rv[i * n + l] * e[l * m + b]
            km[a * m + b] = acc
