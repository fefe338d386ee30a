import importlib

import numpy as np
import pytest

from chislr import _kernels_py


def _available_backends():
    mods = [pytest.param(_kernels_py, id="python")]
    try:
        mods.append(pytest.param(importlib.import_module("chislr._kernels"), id="cython"))
    except ImportError:
        mods.append(pytest.param(None, id="cython",
                                 marks=pytest.mark.skip(reason="compiled extension not built")))
    return mods


@pytest.fixture(params=_available_backends())
def backend(request, monkeypatch):
    """Route every public operator through one kernel module."""
    import chislr.prox
    import chislr.solvers
    monkeypatch.setattr(chislr.prox, "kernels", request.param)
    monkeypatch.setattr(chislr.solvers, "kernels", request.param)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])
