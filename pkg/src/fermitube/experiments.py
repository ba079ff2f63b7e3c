"""Verification pipelines, one per acceptance check, driven by an ExperimentConfig.

Each pipeline returns a ``Result``: a pass flag, a dict of measured values
(JSON ready and deterministic for a fixed config), optional CSV tables and
the wall time, which is kept apart from the values.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from . import curvature_scan as cs
from . import hyperbolicity as hy
from .deformation import BumpFamily, deformed_chart, make_profile, seam_jumps, verify_estimates
from .geodesic_flow import (central_jacobi_closed_form, integrate_geodesic, integrate_jacobi,
                            symplectic_drift)
from .model_space import ModelSpec, fermi_chart, gram_schmidt
from .tensor_kernel import (conformal_christoffel, conformal_curvature, conformal_sectional,
                            curvature_symmetry_residuals, curvature_vector, geometry_at,
                            metric_identity_checks, sectional_at)

KINDS = ("conformal", "g00")


@dataclass
class Result:
    key: str
    title: str
    passed: bool
    values: dict
    runtime: float = 0.0
    limit: float = None
    tables: dict = field(default_factory=dict)
    witness: dict = None

    def summary(self):
        out = {"title": self.title, "status": "pass" if self.passed else "fail",
               "values": self.values}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


def _timed(fn):
    def wrapper(cfg, *args, **kwargs):
        start = time.perf_counter()
        res = fn(cfg, *args, **kwargs)
        res.runtime = time.perf_counter() - start
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def model_spec(cfg):
    m = cfg.model
    return ModelSpec(n=m.n, r=m.r, s=m.s, period=m.period, tube_radius=m.eps0)


def base_chart(cfg):
    return fermi_chart(model_spec(cfg))


def chart_for(cfg, kind=None, eps=None):
    """The configured chart; kind ``"none"`` gives the undeformed one."""
    d = cfg.deformation
    kind = d.kind if kind is None else kind
    if kind == "none":
        return base_chart(cfg)
    prof = make_profile(dim=cfg.model.n, s=cfg.model.s, eps=d.eps if eps is None else eps,
                        order=d.order, kind=kind)
    return deformed_chart(base_chart(cfg), prof)


def expected_central_row(spec, deformed=True):
    row = []
    for k in range(1, spec.n):
        if deformed and k == spec.s:
            row.append(0.0)
        elif k <= spec.r:
            row.append(-1.0)
        else:
            row.append(-0.25)
    return np.array(row)


def expected_exponents(spec, deformed):
    m = spec.n - 1
    pos = [1.0] * spec.r + [0.5] * (m - spec.r)
    if deformed:
        pos[-1] = 0.0
    return np.sort(np.array(pos + [-p for p in pos]))[::-1]


@_timed
def central_table(cfg, samples=16):
    """Central curvature table of both deformations against its exact values."""
    spec = model_spec(cfg)
    want = expected_central_row(spec)
    values = {"expected": want.tolist()}
    rows = []
    ok = True
    for kind in KINDS:
        times, table = cs.central_curvature_table(chart_for(cfg, kind), samples=samples)
        err = float(np.max(np.abs(table - want)))
        spread = float(np.max(table.max(axis=0) - table.min(axis=0)))
        values[kind] = {"table": table[0].tolist(), "max_error": err, "t_spread": spread}
        ok &= err <= 1e-9 and spread <= 1e-10
        rows += [[kind, t] + list(r) for t, r in zip(times, table)]
    header = ["kind", "t"] + ["K_e%d" % k for k in range(1, spec.n)]
    return Result("1", "central curvature table", bool(ok), values, limit=1.0,
                  tables={"central_table": (header, rows)})


@_timed
def jacobi_oracle(cfg):
    """Integrated Jacobi fields on the deformed central orbit against closed forms."""
    spec = model_spec(cfg)
    chart = chart_for(cfg)
    horizon = cfg.integration.jacobi_horizon
    orbit = integrate_geodesic(chart, np.zeros(spec.n), np.eye(spec.n)[0], horizon,
                               step=cfg.integration.step)
    m = spec.n - 1
    rng = np.random.default_rng(cfg.seed)
    # positive data keep every closed-form component away from zero
    j0 = rng.uniform(0.5, 1.5, m)
    j0p = rng.uniform(0.5, 1.5, m)
    # column a carries the data of component a alone
    path = integrate_jacobi(orbit, np.vstack([np.diag(j0), np.diag(j0p)]))
    values = {"horizon": horizon, "components": {}}
    rows = []
    worst = 0.0
    for k in range(1, spec.n):
        a = k - 1
        jc, jpc = central_jacobi_closed_form(spec, k, j0[a], j0p[a], path.times,
                                             deformed=cfg.deformation.kind != "none")
        rel = np.abs(path.xi[:, a, a] - jc) / np.abs(jc)
        relp = np.abs(path.eta[:, a, a] - jpc) / np.abs(jpc)
        err = float(max(rel.max(), relp.max()))
        worst = max(worst, err)
        values["components"][str(k)] = {"max_relative_error": err}
        rows += [[k, t, x, c] for t, x, c in zip(path.times[::50], path.xi[::50, a, a], jc[::50])]
    values["max_relative_error"] = worst
    values["symplectic_drift"] = symplectic_drift(path, 0, 1)
    return Result("2", "Jacobi closed-form oracle", bool(worst <= 1e-6), values, limit=10.0,
                  tables={"jacobi_oracle": (["component", "t", "integrated", "closed_form"], rows)})


def _spectrum_row(label, rep, want):
    err = float(np.max(np.abs(rep.exponents - want)))
    return {"label": label, "exponents": rep.exponents.tolist(), "max_error": err,
            "pairing_residual": rep.pairing_residual, "partial": rep.partial,
            "pass": bool(err <= 1e-2 and rep.pairing_residual <= 2e-2 and not rep.partial)}


@_timed
def spectrum(cfg, undeformed_orbits=3):
    """Finite-time exponents for undeformed and deformed orbits.

    Undeformed: central orbits started at random times and in both
    directions, plus the model-space operator itself for a random unit vector
    (the model is locally symmetric, so the operator is constant).
    Deformed: the central orbit of the configured deformation.
    """
    spec = model_spec(cfg)
    it = cfg.integration
    rng = np.random.default_rng(cfg.seed)
    base = base_chart(cfg)
    rows = []
    times = []
    for k in range(undeformed_orbits):
        p = np.zeros(spec.n)
        p[0] = rng.uniform(0, spec.period)
        v = np.eye(spec.n)[0] * (1.0 if k % 2 == 0 else -1.0)
        start = time.perf_counter()
        rep = hy.lyapunov_spectrum(base, p, v, it.lyapunov_horizon, it.lyapunov_transient,
                                   it.step, it.qr_window)
        times.append(time.perf_counter() - start)
        rows.append(_spectrum_row("undeformed central t0=%.4f dir=%+d" % (p[0], v[0]), rep,
                                  expected_exponents(spec, False)))
    kmats = hy.constant_operator_kmats(hy.model_operator(spec), it.step,
                                       it.lyapunov_horizon + it.lyapunov_transient)
    rep = hy.lyapunov_from_kmats(kmats, it.step, it.lyapunov_horizon, it.lyapunov_transient,
                                 it.qr_window)
    rows.append(_spectrum_row("undeformed model operator", rep, expected_exponents(spec, False)))
    start = time.perf_counter()
    rep = hy.lyapunov_spectrum(chart_for(cfg), np.zeros(spec.n), np.eye(spec.n)[0],
                               it.lyapunov_horizon, it.lyapunov_transient, it.step, it.qr_window)
    times.append(time.perf_counter() - start)
    rows.append(_spectrum_row("%s central" % cfg.deformation.kind, rep,
                              expected_exponents(spec, cfg.deformation.kind != "none")))
    means, gaps = hy.domination_gaps(rep.exponents)
    values = {"orbits": rows, "deformed_clusters": means, "deformed_gaps": gaps,
              "horizon": it.lyapunov_horizon, "transient": it.lyapunov_transient}
    res = Result("3", "Lyapunov spectrum", all(r["pass"] for r in rows), values, limit=30.0)
    res.tables["spectrum"] = (["label"] + ["lambda%d" % i for i in range(2 * spec.n - 2)],
                              [[r["label"]] + r["exponents"] for r in rows])
    res.orbit_times = times
    return res


@_timed
def angle_identity(cfg, orbits=8):
    """Numeric rate of the A^u angle on the undeformed chart against its closed form.

    Samples are spread over central orbits with random start times and
    random Jacobi data; each sample is read at a random time in [0.1, 1].
    The numeric rate is a central difference of the Jacobi path.
    """
    spec = model_spec(cfg)
    base = base_chart(cfg)
    cone = hy.ConeFamily("A_u", cfg.scan.opening, spec.n - 1, spec.r)
    rng = np.random.default_rng(cfg.seed)
    m = spec.n - 1
    total = cfg.scan.angle_samples
    per = -(-total // orbits)
    rel = []
    analytic_min = np.inf
    degenerate = 0
    rows = []
    for k in range(orbits):
        count = min(per, total - k * per)
        if count <= 0:
            break
        p = np.zeros(spec.n)
        p[0] = rng.uniform(0, spec.period)
        orbit = integrate_geodesic(base, p, np.eye(spec.n)[0], 1.2, step=cfg.integration.step)
        path = integrate_jacobi(orbit, rng.normal(size=(2 * m, count)))
        dt = path.times[1]
        for c in range(count):
            i = int(rng.integers(int(0.1 / dt), int(1.0 / dt)))
            z = [np.concatenate([path.xi[j, :, c], path.eta[j, :, c]]) for j in (i - 1, i, i + 1)]
            th = [hy.theta(cone.center(), zz) for zz in z]
            numeric = (th[2] - th[0]) / (2 * dt)
            xi, eta = z[1][:m], z[1][m:]
            if np.linalg.norm(xi[:spec.r] + eta[:spec.r]) < 1e-12:
                degenerate += 1
                continue
            analytic = 0.5 * hy.undeformed_theta_rate(xi, eta, spec.r)[0]
            rel.append(abs(numeric - analytic) / abs(analytic))
            analytic_min = min(analytic_min, analytic)
            rows.append([k, c, path.times[i], numeric, analytic])
    values = {"samples": len(rel), "degenerate": degenerate, "max_relative_error": max(rel),
              "min_analytic": float(analytic_min), "min_numeric": float(min(r[3] for r in rows))}
    ok = values["max_relative_error"] <= 1e-5 and values["min_analytic"] > 0 and values["min_numeric"] > 0
    return Result("4", "undeformed angle-rate identity", bool(ok), values, limit=60.0,
                  tables={"angle_identity": (["orbit", "sample", "t", "numeric", "analytic"], rows)})


@_timed
def cone_check(cfg, selector="A_u", kind="conformal"):
    """Cone invariance scan on the deformed chart."""
    spec = model_spec(cfg)
    sc = cfg.scan
    chart = chart_for(cfg, kind)
    plan = hy.SamplePlan(eps=cfg.deformation.eps, theta=sc.theta, seeds_per_class=sc.seeds_per_class,
                         directions=sc.directions, horizon=cfg.integration.cone_horizon,
                         step=cfg.integration.step, seed=cfg.seed)
    cone = hy.ConeFamily(selector, sc.opening, spec.n - 1, spec.r)
    rows = hy.cone_invariance_scan(chart, cone, plan, spec.s)
    flow = [r for r in rows if r["class"] != "transversal"]
    trans = [r for r in rows if r["class"] == "transversal"]
    values = {"selector": selector, "kind": kind, "eps": plan.eps, "theta": plan.theta,
              "min_rate": min(r["min_rate"] for r in flow),
              "degenerate_directions": sum(r["degenerate"] for r in flow),
              "truncated_orbits": sum(r["exit_time"] is not None for r in flow),
              "max_residence": max(r["residence"] for r in trans),
              "residence_limit": trans[0]["limit"],
              "seeds": {c: sum(r["class"] == c for r in rows)
                        for c in ("parallel", "almost_parallel", "transversal")}}
    ok = all(r["pass"] for r in rows)
    witness = None
    if not ok:
        bad = [r for r in rows if not r["pass"]][0]
        witness = {k: bad[k] for k in ("class", "seed")}
    header = ["class", "seed", "v_s", "min_rate", "residence", "limit", "pass"]
    table = [[r["class"], r["seed"], r["v_s"], r.get("min_rate", ""), r.get("residence", ""),
              r.get("limit", ""), int(r["pass"])] for r in rows]
    return Result("5", "cone invariance", bool(ok), values, limit=600.0,
                  tables={"cone_scan": (header, table)}, witness=witness)


@_timed
def bump_certificates(cfg):
    """Size bounds of h, the value r''(0) and the seam regularity of f."""
    d = cfg.deformation
    values = {"order": d.order, "eps": {}}
    ok = True
    rows = []
    fam = BumpFamily(d.order, d.eps)
    r2 = float(fam.r(np.array(0.0), 2))
    values["r_second_derivative_at_0"] = r2
    ok &= abs(r2 - 0.25) <= 1e-15
    for eps in d.eps_sweep:
        cert = verify_estimates(make_profile(cfg.model.n, cfg.model.s, eps, d.order, d.kind))
        seams = seam_jumps(BumpFamily(d.order, eps), 4)
        seam_rel = {str(o): max(r["jump"] / r["scale"] for r in seams if r["order"] == o)
                    for o in range(5)}
        seam_ok = all(v <= 1e-9 for v in seam_rel.values())
        values["eps"][repr(eps)] = {
            "bounds_pass": cert["pass"], "M": cert["M"], "seam_relative_jump": seam_rel,
            "seam_pass": seam_ok,
            "failed_bounds": [b["name"] for b in cert["bounds"] if not b["pass"]]}
        ok &= cert["pass"] and seam_ok
        rows += [[eps, b["name"], b["measured"], b["bound"], int(b["pass"])] for b in cert["bounds"]]
    values["sup_r"] = cert["sup_r"]
    values["sup_phi1"] = cert["sup_phi1"]
    values["sup_phi2"] = cert["sup_phi2"]
    return Result("6", "bump certificates", bool(ok), values, limit=10.0,
                  tables={"bump_bounds": (["eps", "bound", "measured", "limit", "pass"], rows)})


def truncation_band(cfg, eps):
    """``tau = C eps^3`` with C the Fermi truncation constant of the undeformed chart."""
    const, rows = cs.truncation_constant(base_chart(cfg), eps)
    return const * eps ** 3, const, rows


@_timed
def nonpositivity(cfg, workers=1):
    """Sign of the sectional curvature for the g00 deformation over its support."""
    spec = model_spec(cfg)
    eps = cfg.deformation.eps
    sc = cfg.scan
    chart = chart_for(cfg, "g00")
    tau, const, trows = truncation_band(cfg, eps)
    grid = cs.support_grid(chart, eps, spec.s, sc.grid_points, sc.t_points)
    rep = cs.scan_sectional(chart, grid, sc.random_planes, cfg.seed, zero_tol=10 * tau,
                            workers=workers)
    summ = rep.summary()
    prof = cs.p_profile(eps, cfg.deformation.order)
    crest = _unique_max_at_zero(prof["poly"], BumpFamily(cfg.deformation.order, eps).f_support)
    values = {"eps": eps, "tau_trunc": tau, "truncation_constant": const,
              "truncation_rows": trows, "scan": summ,
              "near_zero_count": len(rep.extra["near_zero"]),
              "near_zero_confined": cs.near_zero_confined(rep, grid.cell()),
              "p0": prof["p0"], "p_max": prof["max"], "p_argmax": prof["argmax"],
              "p_unique_max_at_0": crest, "ddp0": prof["ddp0"],
              "ddp0_expected": -12.0 / eps ** 4 + 0.5, "p_max_abs": prof["max_abs"]}
    # reported only: the deformed quadratic Christoffel part of R_s00s against the base one
    qgrid = cs.support_grid(chart, eps, spec.s, sc.grid_points, 2)
    values["quadratic_term_excess"] = cs.quadratic_term_excess(chart, base_chart(cfg), qgrid, spec.s, 0)
    ok = (summ["max_K_off_axis"] < 0 and summ["max_K"] <= tau
          and values["near_zero_confined"] and summ["max_abs_central_on_axis"] < 1e-9
          and abs(prof["p0"] - 0.25) <= 1e-15 and abs(prof["max"] - 0.25) <= 1e-15
          and prof["argmax"] == 0.0 and crest
          and abs(prof["ddp0"] - values["ddp0_expected"]) <= 1e-12 * abs(values["ddp0_expected"]))
    header, data = rep.rows()
    return Result("7", "deformation g00 nonpositivity", bool(ok), values, limit=1200.0,
                  tables={"curvature_g00": (header, data)},
                  witness=None if ok else summ["witness"])


def _unique_max_at_zero(p, lim):
    """True when ``p - p(0)`` has no root in ``[-lim, lim]`` other than 0 and p <= p(0) there."""
    q = p - p(0.0)
    roots = q.roots()
    real = np.real(roots[np.abs(roots.imag) <= 1e-9 * lim])
    inside = real[np.abs(real) <= lim]
    grid = np.linspace(-lim, lim, 2001)
    return bool(np.all(np.abs(inside) <= 1e-6 * lim) and np.all(q(grid) <= 1e-15))


@_timed
def positive_bound(cfg, workers=1):
    """Largest sampled curvature of the conformal deformation across eps and grids."""
    spec = model_spec(cfg)
    sc = cfg.scan
    rows = []
    per_eps = {}
    for eps in cfg.deformation.eps_sweep:
        chart = chart_for(cfg, "conformal", eps)
        entry = {}
        for pts in (sc.refine_points, sc.grid_points):
            grid = cs.support_grid(chart, eps, spec.s, pts, min(sc.t_points, 4))
            summ = cs.scan_sectional(chart, grid, sc.random_planes, cfg.seed,
                                     workers=workers).summary()
            entry[str(pts)] = {"max_K": summ["max_K"], "M": max(summ["max_K"], 0.0) / eps,
                               "witness": summ["witness"]}
            rows.append([eps, pts, summ["max_K"], max(summ["max_K"], 0.0) / eps])
        per_eps[repr(eps)] = entry
    fine = str(sc.grid_points)
    coarse = str(sc.refine_points)
    m_fine = max(e[fine]["M"] for e in per_eps.values())
    m_coarse = max(e[coarse]["M"] for e in per_eps.values())
    stable = abs(m_fine - m_coarse) <= 0.1 * max(m_fine, m_coarse) + 1e-12
    order = sorted(cfg.deformation.eps_sweep, reverse=True)
    maxima = [per_eps[repr(e)][fine]["max_K"] for e in order]
    monotone = all(b <= a for a, b in zip(maxima, maxima[1:]))
    bounded = all(mx <= m_fine * e + 1e-15 for mx, e in zip(maxima, order))
    values = {"per_eps": per_eps, "M": m_fine, "M_coarse": m_coarse, "stable": stable,
              "maxima_by_decreasing_eps": maxima, "non_increasing": monotone,
              "strictly_decreasing": all(b < a for a, b in zip(maxima, maxima[1:])),
              "bounded_by_M_eps": bounded}
    return Result("8", "conformal deformation positive-curvature bound",
                  bool(stable and monotone and bounded), values, limit=1200.0,
                  tables={"positive_bound": (["eps", "grid_points", "max_K", "M"], rows)})


def _oracle_points(cfg, rng, count, eps):
    n = cfg.model.n
    pts = np.empty((count, n))
    pts[:, 0] = rng.uniform(0, cfg.model.period, count)
    pts[:, 1:] = rng.uniform(-eps, eps, (count, n - 1))
    pts[:, cfg.model.s] = rng.uniform(-1.2 * eps ** 2, 1.2 * eps ** 2, count)
    return pts


@_timed
def oracle_suite(cfg):
    """Conformal transforms, metric identities and curvature symmetries at random points."""
    eps = cfg.deformation.eps
    base = base_chart(cfg)
    chart = chart_for(cfg, "conformal")
    prof = chart.profile
    rng = np.random.default_rng(cfg.seed)
    pts = _oracle_points(cfg, rng, cfg.scan.oracle_points, eps)
    # finite-difference steps follow the eps^2 length scale of the profile
    fd_step = 4e-3 * eps ** 2
    worst = {"christoffel": 0.0, "curvature": 0.0, "sectional": 0.0, "inverse_derivative": 0.0,
             "metric_compatibility": 0.0, "antisym_first": 0.0, "antisym_last": 0.0,
             "pair": 0.0, "bianchi": 0.0}
    for p in pts:
        g, gi, gam, riem = (a[0] for a in geometry_at(base, p[None]))
        _, dh, ddh = (a[0] for a in prof.jet(p[None]))
        gt, git, gamt, riemt = (a[0] for a in geometry_at(chart, p[None]))
        worst["christoffel"] = max(worst["christoffel"], float(
            np.max(np.abs(conformal_christoffel(gam, dh, g, gi) - gamt)) / np.max(np.abs(gamt))))
        x, y, z = rng.normal(size=(3, len(p)))
        a = conformal_curvature(riem, gam, dh, ddh, g, gi, x, y, z)
        b = curvature_vector(riemt, git, x, y, z)
        worst["curvature"] = max(worst["curvature"], float(np.max(np.abs(a - b)) / np.max(np.abs(b))))
        frame = gram_schmidt(np.stack([x, y], axis=1), g)
        u, w = frame[:, 0], frame[:, 1]
        direct = np.exp(_h(prof, p)) * sectional_at(riemt, gt, u, w)
        transformed = conformal_sectional(sectional_at(riem, g, u, w), gam, dh, ddh, g, gi, u, w)
        worst["sectional"] = max(worst["sectional"], abs(float(direct - transformed)))
        for key, val in metric_identity_checks(chart, p, step=fd_step).items():
            worst[key] = max(worst[key], val)
        for key, val in curvature_symmetry_residuals(riemt).items():
            worst[key] = max(worst[key], val)
    tol = {"christoffel": 1e-7, "curvature": 1e-7, "sectional": 1e-7, "inverse_derivative": 1e-8,
           "metric_compatibility": 1e-8, "antisym_first": 1e-8, "antisym_last": 1e-8,
           "pair": 1e-8, "bianchi": 1e-8}
    checks = {k: {"residual": worst[k], "tolerance": tol[k], "pass": bool(worst[k] <= tol[k])}
              for k in worst}
    values = {"points": len(pts), "fd_step": fd_step, "checks": checks}
    return Result("9", "oracle suite", all(c["pass"] for c in checks.values()), values, limit=30.0,
                  tables={"oracle_suite": (["check", "residual", "tolerance"],
                                           [[k, c["residual"], c["tolerance"]] for k, c in checks.items()])})


def _h(prof, p):
    return float(prof.jet(p[None])[0][0])


@_timed
def eberlein_witness(cfg):
    """Flat parallel field along the central geodesic: present when deformed, absent otherwise.

    Both deformations are checked, plus the configured chart when it is the
    undeformed one; there the field has curvature -1/4 and the check fails.
    """
    s = cfg.model.s
    values = {}
    ok = True
    subjects = KINDS if cfg.deformation.kind != "none" else ("none",)
    for kind in subjects:
        w = hy.anosov_obstruction_witness(chart_for(cfg, kind), s)
        values[kind] = w
        ok &= w["max_covariant_derivative"] < 1e-10 and w["max_abs_curvature"] < 1e-9
    und = hy.anosov_obstruction_witness(base_chart(cfg), s)
    values["undeformed_reference"] = und
    ok &= abs(und["max_abs_curvature"] - 0.25) <= 1e-12
    witness = None
    if not ok:
        bad = [k for k in subjects if values[k]["max_abs_curvature"] >= 1e-9]
        if bad:
            witness = {"chart": bad[0], "max_abs_curvature": values[bad[0]]["max_abs_curvature"]}
    return Result("10", "non-Anosov witness", bool(ok), values, limit=5.0, witness=witness)


CRITERIA = {
    "1": central_table, "2": jacobi_oracle, "3": spectrum, "4": angle_identity, "5": cone_check,
    "6": bump_certificates, "7": nonpositivity, "8": positive_bound, "9": oracle_suite,
    "10": eberlein_witness,
}

SUBCOMMANDS = {
    "verify-deformation": ("1", "6", "10"),
    "oracle-suite": ("2", "9"),
    "lyapunov": ("3",),
    "cone-check": ("4", "5"),
    "scan-curvature": ("7", "8"),
}
