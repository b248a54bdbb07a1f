import numpy as np
import pytest

from otflat import kernels, _kernels_py

# acceptance outcomes collected during the session, printed at the end
ACCEPTANCE = {}


def record(num, ok, detail=""):
    ACCEPTANCE[num] = (bool(ok), detail)
    print(f"\nacceptance {num}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"acceptance {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


BACKENDS = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test once per available kernel backend."""
    if request.param == "python":
        for name in ("network_simplex", "wasserstein_1d", "wasserstein_1d_batch"):
            monkeypatch.setattr(kernels, name, getattr(_kernels_py, name))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
