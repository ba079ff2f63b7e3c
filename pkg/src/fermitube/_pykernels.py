"""Pure numpy implementations of the hot kernels.

Each function has a compiled twin in ``_ckernels.pyx`` with the same
signature; ``fermitube.kernels`` picks one of them at import time.
"""
import numpy as np


def _first_kind(dg):
    # low[l, i, j] = (d_i g_lj + d_j g_li - d_l g_ij) / 2
    return 0.5 * (np.einsum("bilj->blij", dg) + np.einsum("bjli->blij", dg) - dg)


def christoffel_batch(g, dg):
    """Christoffel symbols ``gamma[b, k, i, j] = Gamma^k_ij`` for a batch of jets."""
    ginv = np.linalg.inv(np.asarray(g, dtype=float))
    return np.einsum("bkl,blij->bkij", ginv, _first_kind(np.asarray(dg, dtype=float)))


def geometry_batch(g, dg, ddg):
    """Inverse metric, Christoffel symbols and lowered curvature for a batch.

    Parameters
    ----------
    g : (B, n, n) metric components.
    dg : (B, n, n, n), ``dg[b, k, i, j] = d_k g_ij``.
    ddg : (B, n, n, n, n), ``ddg[b, k, l, i, j] = d_k d_l g_ij``.

    Returns
    -------
    ginv : (B, n, n)
    gamma : (B, n, n, n), ``gamma[b, k, i, j] = Gamma^k_ij``
    riem : (B, n, n, n, n), ``riem[b, i, j, k, l] = g(R(d_i, d_j) d_k, d_l)``
    """
    g = np.asarray(g, dtype=float)
    dg = np.asarray(dg, dtype=float)
    ddg = np.asarray(ddg, dtype=float)
    ginv = np.linalg.inv(g)
    low = _first_kind(dg)
    gamma = np.einsum("bkl,blij->bkij", ginv, low)
    # dlow[a, l, j, k] = d_a of low[l, j, k]
    dlow = 0.5 * (np.einsum("bajlk->baljk", ddg) + np.einsum("baklj->baljk", ddg) - ddg)
    riem = np.einsum("biljk->bijkl", dlow) - np.einsum("bjlik->bijkl", dlow)
    riem += np.einsum("bmik,bmjl->bijkl", gamma, low)
    riem -= np.einsum("bmjk,bmil->bijkl", gamma, low)
    return ginv, gamma, riem


def jacobi_rk4(kmat, y0, dt, stride):
    """Integrate ``xi' = eta, eta' = -K(t) xi`` against a sampled operator.

    ``kmat`` has shape (2N + 1, m, m) and holds K at spacing ``dt / 2``, so a
    step of length ``dt`` uses samples ``2k``, ``2k + 1`` and ``2k + 2``.
    ``y0`` is (2m, c): rows ``:m`` are xi, rows ``m:`` are eta, one column per
    solution.  Returns every ``stride``-th state, shape (N // stride + 1, 2m, c).
    """
    kmat = np.asarray(kmat, dtype=float)
    nsteps = (kmat.shape[0] - 1) // 2
    m = kmat.shape[1]
    y = np.array(y0, dtype=float)
    out = np.empty((nsteps // stride + 1,) + y.shape)
    out[0] = y

    def rhs(k, state):
        return np.concatenate([state[m:], -k @ state[:m]])

    for step in range(nsteps):
        k0, kh, k1 = kmat[2 * step], kmat[2 * step + 1], kmat[2 * step + 2]
        a = rhs(k0, y)
        b = rhs(kh, y + 0.5 * dt * a)
        c = rhs(kh, y + 0.5 * dt * b)
        d = rhs(k1, y + dt * c)
        y = y + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d)
        if (step + 1) % stride == 0:
            out[(step + 1) // stride] = y
    return out
