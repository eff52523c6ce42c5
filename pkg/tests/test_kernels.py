import os
import subprocess
import sys

import numpy as np
import pytest

from fyvi import _kernels, _pykernels

try:
    from fyvi import _ckernels
except ImportError:
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


@needs_ext
@pytest.mark.parametrize("k", [1, 2, 7, 64])
def test_backends_agree(k):
    rng = np.random.default_rng(k)
    eta = rng.standard_normal((300, k)) * 3
    np.testing.assert_allclose(_ckernels.softmax_rows(eta), _pykernels.softmax_rows(eta), atol=1e-14)
    np.testing.assert_allclose(_ckernels.sparsemax_rows(eta), _pykernels.sparsemax_rows(eta), atol=1e-14)
    for rho in (0.5, 1.5, 3.0):
        pc, rc, okc = _ckernels.entmax_bisect_rows(eta, rho, 1e-12, 200)
        pp, rp, okp = _pykernels.entmax_bisect_rows(eta, rho, 1e-12, 200)
        np.testing.assert_allclose(pc, pp, atol=1e-10)
        assert np.asarray(okc).all() and np.asarray(okp).all()


@needs_ext
def test_readonly_input():
    eta = np.broadcast_to(np.array([0.5, 0.3, -1.0]), (4, 3))
    np.testing.assert_allclose(_ckernels.sparsemax_rows(eta), np.tile([0.6, 0.4, 0.0], (4, 1)), atol=1e-14)


def _backend(env_value):
    env = dict(os.environ)
    env.pop("FYVI_PURE_PYTHON", None)
    if env_value is not None:
        env["FYVI_PURE_PYTHON"] = env_value
    res = subprocess.run([sys.executable, "-c", "import fyvi; print(fyvi.BACKEND)"], env=env,
                         capture_output=True, text=True, check=True)
    return res.stdout.strip()


def test_env_forces_python():
    assert _backend("1") == "python"


@needs_ext
def test_extension_selected_by_default():
    assert _backend(None) == "cython"
    assert _kernels.BACKEND in ("cython", "python")
