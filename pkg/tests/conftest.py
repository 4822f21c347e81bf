import sys

import numpy as np
import pytest

from membrane_patterns import kernels
from membrane_patterns.mesh import build_torus_mesh
from membrane_patterns.model import ModelParams, Operators

FLAVOURS = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])


@pytest.fixture(params=FLAVOURS)
def flavour(request, monkeypatch):
    """Run a test once with each kernel set installed as the active one."""
    ks = kernels.NUMPY_KERNELS if request.param == "numpy" else kernels.NUMBA_KERNELS
    monkeypatch.setattr(kernels, "K", ks)
    return ks


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def fig2_params(tau=1e-4, lam=0.6, kappa=0.01):
    return ModelParams.isotropic(eps=0.01, kappa=kappa, tau=tau, sigma=1.0, lam=lam)


@pytest.fixture(scope="session")
def ops8():
    return Operators(build_torus_mesh(8), fig2_params())


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    def key(line):
        tag = line.split(":")[0].split()[-1]
        return int(tag.rstrip("abc")), tag
    for line in sorted(module.RESULTS, key=key):
        terminalreporter.write_line(line)
