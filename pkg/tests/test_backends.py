"""Backend selection and cross-backend agreement of whole fits.

Function-level agreement between the two kernel implementations is
covered in test_kernels; here the dispatch mechanism itself is driven
through subprocesses, since the choice is made once at import time.
"""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from occufit import BACKEND

HAS_NUMBA = True
try:
    import numba  # noqa: F401
except ImportError:
    HAS_NUMBA = False


def run_python(code: str, backend: str | None) -> subprocess.CompletedProcess:
    env = dict(os.environ)
    env.pop("OCCUFIT_BACKEND", None)
    if backend is not None:
        env["OCCUFIT_BACKEND"] = backend
    return subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env=env,
        timeout=300,
    )


FIT_SCRIPT = """
import json
from occufit import SimConfig, generate_dataset, fit_two_stage, fit_full, BACKEND

data = generate_dataset(
    SimConfig(n_sites=100, n_visits=3, alpha=(0.8, 0.9), beta=(-0.4, 0.5, -0.3), seed=3),
    0,
)
ts = fit_two_stage(data, "iwls")
full = fit_full(data)
print(json.dumps({
    "backend": BACKEND,
    "alpha2": list(ts.occupancy.alpha_hat),
    "beta2": list(ts.detection.beta_hat),
    "alphaf": list(full.alpha_hat),
    "betaf": list(full.beta_hat),
}))
"""


def test_backend_name_is_reported():
    assert BACKEND in ("numpy", "numba")


def test_numpy_backend_can_be_forced():
    proc = run_python("import occufit; print(occufit.BACKEND)", "numpy")
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "numpy"


@pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
def test_numba_backend_can_be_required():
    proc = run_python("import occufit; print(occufit.BACKEND)", "numba")
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == "numba"


def test_unknown_backend_fails_the_import():
    proc = run_python("import occufit", "accelerate")
    assert proc.returncode != 0
    assert "OCCUFIT_BACKEND" in proc.stderr


@pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
def test_estimates_agree_across_backends():
    a = run_python(FIT_SCRIPT, "numpy")
    b = run_python(FIT_SCRIPT, "numba")
    assert a.returncode == 0, a.stderr
    assert b.returncode == 0, b.stderr
    ra = json.loads(a.stdout)
    rb = json.loads(b.stdout)
    assert ra["backend"] == "numpy" and rb["backend"] == "numba"
    for key in ("alpha2", "beta2", "alphaf", "betaf"):
        np.testing.assert_allclose(ra[key], rb[key], atol=1e-8, err_msg=key)
