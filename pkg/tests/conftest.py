import sys

import numpy as np
import pytest
from hypothesis import settings

from fermitube.deformation import deformed_chart, make_profile
from fermitube.model_space import ModelSpec, fermi_chart

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def spec():
    return ModelSpec()


@pytest.fixture(scope="session")
def base(spec):
    return fermi_chart(spec)


@pytest.fixture(scope="session")
def conformal(base):
    return deformed_chart(base, make_profile(kind="conformal"))


@pytest.fixture(scope="session")
def g00(base):
    return deformed_chart(base, make_profile(kind="g00"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def tube_point(rng, eps=0.05, s=3, n=4, s_width=None):
    p = np.empty(n)
    p[0] = rng.uniform(0, 2 * np.pi)
    p[1:] = rng.uniform(-eps, eps, n - 1)
    w = eps ** 2 if s_width is None else s_width
    p[s] = rng.uniform(-w, w)
    return p


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.LINES:
        return
    terminalreporter.section("acceptance")
    for key in sorted(mod.LINES):
        terminalreporter.write_line(mod.LINES[key])
