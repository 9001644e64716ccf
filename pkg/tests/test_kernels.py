"""The compiled kernel and the NumPy fallback must be interchangeable."""

import numpy as np
import pytest
from scipy.special import rgamma

from fracorder._kernels import _mlf_py

try:
    from fracorder._kernels import _mlf_cy
    HAVE_CY = True
except ImportError:
    HAVE_CY = False

pytestmark = pytest.mark.skipif(not HAVE_CY,
                                reason="compiled kernel not built")


def _series_coef(alpha, beta, n):
    return rgamma(alpha * np.arange(n, dtype=float) + beta)


def _run_series(mod, z, coef, tol=1e-12, kmin=3):
    z = np.ascontiguousarray(z, dtype=np.complex128)
    out = np.empty_like(z)
    status = np.empty(z.shape[0], dtype=np.uint8)
    km = np.full(z.shape[0], kmin, dtype=np.int64)
    mod.series_sum(z, coef, tol, km, out, status)
    return out, status


def _run_asym(mod, z, coef, kmax=400, stop=True):
    z = np.ascontiguousarray(z, dtype=np.complex128)
    out = np.empty_like(z)
    mod.asym_sum(z, coef, kmax, stop, out)
    return out


class TestBackendsAgree:
    def test_series_values_and_status(self):
        rng = np.random.default_rng(7)
        z = (rng.uniform(-3, 1, 40) + 1j * rng.uniform(-2, 2, 40))
        coef = _series_coef(0.6, 1.0, 256)
        o1, s1 = _run_series(_mlf_py, z, coef)
        o2, s2 = _run_series(_mlf_cy, z, coef)
        assert (s1 == s2).all()
        # compiled complex arithmetic may contract to FMA; bitwise equality
        # is not promised across backends, near-machine agreement is
        np.testing.assert_allclose(o1, o2, rtol=1e-11, atol=1e-300)

    def test_series_negative_beta(self):
        # stay inside the double radius |z| <= 6**alpha for alpha = 0.4
        z = np.linspace(-2, -0.1, 23) + 0j
        coef = _series_coef(0.4, -1.0, 512)
        o1, s1 = _run_series(_mlf_py, z, coef, kmin=24)
        o2, s2 = _run_series(_mlf_cy, z, coef, kmin=24)
        assert (s1 == s2).all() and not s1.any()
        np.testing.assert_allclose(o1, o2, rtol=1e-11)

    def test_series_exhaustion_flagged(self):
        z = np.array([-30.0 + 0j])
        coef = _series_coef(0.5, 1.0, 64)   # far too short for |z|=30
        _, s1 = _run_series(_mlf_py, z, coef)
        _, s2 = _run_series(_mlf_cy, z, coef)
        assert s1[0] != 0 and s2[0] != 0

    def test_series_overflow_status(self):
        z = np.array([-60.0 + 0j])
        coef = _series_coef(0.9, 1.0, 4096)
        _, s1 = _run_series(_mlf_py, z, coef)
        _, s2 = _run_series(_mlf_cy, z, coef)
        assert s1[0] == 2 and s2[0] == 2

    def test_asym_optimal_truncation(self):
        rng = np.random.default_rng(11)
        r = rng.uniform(3.0, 3e3, 30)
        phi = rng.uniform(2.2, np.pi, 30)     # inside the algebraic sector
        z = r * np.exp(1j * phi)
        coef = rgamma(1.0 - 0.55 * np.arange(1, 401, dtype=float))
        o1 = _run_asym(_mlf_py, z, coef)
        o2 = _run_asym(_mlf_cy, z, coef)
        np.testing.assert_allclose(o1, o2, rtol=1e-13, atol=1e-300)

    def test_asym_fixed_terms(self):
        z = np.array([-50.0 + 0j, -500.0 + 0j])
        coef = rgamma(1.0 - 0.3 * np.arange(1, 401, dtype=float))
        for k in (1, 2, 5):
            o1 = _run_asym(_mlf_py, z, coef, kmax=k, stop=False)
            o2 = _run_asym(_mlf_cy, z, coef, kmax=k, stop=False)
            np.testing.assert_allclose(o1, o2, rtol=1e-14)

    def test_asym_underflow_is_clean(self):
        # z^-k underflow with coefficient overflow was a NaN source
        z = np.array([-100.0 + 0j])
        coef = rgamma(1.0 - 0.5 * np.arange(1, 401, dtype=float))
        o1 = _run_asym(_mlf_py, z, coef)
        o2 = _run_asym(_mlf_cy, z, coef)
        assert np.isfinite(o1).all() and np.isfinite(o2).all()
        np.testing.assert_allclose(o1, o2, rtol=1e-13)


def test_backend_reports_name():
    from fracorder import kernel_backend
    assert kernel_backend in ("cython", "python")
