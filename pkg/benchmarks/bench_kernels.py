"""Compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--points 20000]

Prints best-of-repeat wall times and the speedup for each kernel.  Without
the compiled extension only the fallback column is filled.
"""
import argparse
import timeit

import numpy as np

from fermitube import _pykernels, kernels
from fermitube.deformation import deformed_chart, make_profile
from fermitube.geodesic_flow import integrate_geodesic
from fermitube.model_space import ModelSpec, fermi_chart


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def cases(points):
    chart = deformed_chart(fermi_chart(ModelSpec()), make_profile(kind="g00"))
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(0, 6, points), rng.uniform(-0.05, 0.05, (points, 3))])
    pts[:, 3] *= 0.05
    g, dg, ddg = (np.ascontiguousarray(a) for a in chart.jet(pts))
    kmats = np.ascontiguousarray(np.broadcast_to(np.diag([-1.0, -0.25, 0.0]), (20001, 3, 3)))
    y0 = rng.normal(size=(6, 6))
    p0 = np.array([0.0, 0.01, -0.01, 0.001])
    v0 = np.array([1.0, 0.01, 0.0, -0.005])
    fast = kernels.compiled()
    out = [
        ("geometry_batch (%d points)" % points,
         lambda: _pykernels.geometry_batch(g, dg, ddg),
         fast and (lambda: fast.geometry_batch(g, dg, ddg))),
        ("christoffel_batch (%d points)" % points,
         lambda: _pykernels.christoffel_batch(g, dg),
         fast and (lambda: fast.christoffel_batch(g, dg))),
        ("jacobi_rk4 (10000 steps, 6 fields)",
         lambda: _pykernels.jacobi_rk4(kmats, y0, 1e-3, 10),
         fast and (lambda: fast.jacobi_rk4(kmats, y0, 1e-3, 10))),
        ("geodesic + frame, t = 1",
         lambda: integrate_geodesic(chart, p0, v0, 1.0, backend="python"),
         fast and (lambda: integrate_geodesic(chart, p0, v0, 1.0, backend="compiled"))),
    ]
    return out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--points", type=int, default=20000)
    args = parser.parse_args(argv)
    print("backend at import: %s" % kernels.BACKEND)
    print("%-38s %12s %12s %9s" % ("kernel", "python [s]", "compiled [s]", "speedup"))
    for name, slow, quick in cases(args.points):
        t_slow = best(slow, args.repeat)
        if quick:
            t_fast = best(quick, args.repeat)
            print("%-38s %12.4f %12.4f %8.1fx" % (name, t_slow, t_fast, t_slow / t_fast))
        else:
            print("%-38s %12.4f %12s %9s" % (name, t_slow, "-", "-"))


if __name__ == "__main__":
    main()
