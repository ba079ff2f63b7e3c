"""Deformed metrics on a tube around a closed geodesic of a complex hyperbolic manifold.

Modules:

* ``tensor_kernel``: charts, Christoffel symbols, curvature and their oracles;
* ``model_space``: the Kaehler model curvature and its second order Fermi chart;
* ``deformation``: bump profiles and the two deformations of the metric;
* ``geodesic_flow``: geodesics, parallel frames and Jacobi fields;
* ``hyperbolicity``: angle functional, cone scans and Lyapunov spectra;
* ``curvature_scan``: sectional curvature tables and grid scans;
* ``cli``: the ``fermitube`` command.
"""
__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402
