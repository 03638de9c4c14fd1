import os
import subprocess
import sys

import numpy as np
import pytest

from nestedgp import _accel

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


@pytest.mark.parametrize("name", ["gram_gaussian", "gram_matern52"])
def test_gram_parity(name, rng):
    A = rng.normal(size=(30, 3))
    B = np.vstack([A[:5], rng.normal(size=(10, 3))])
    ls = np.array([0.7, 1.3, 2.0])
    K_np = getattr(_accel, name + "_numpy")(A, B, ls, 1.7, 1e-6)
    K_nb = getattr(_accel, name + "_numba")(A, B, ls, 1.7, 1e-6)
    np.testing.assert_allclose(K_nb, K_np, rtol=1e-13, atol=1e-15)
    # nugget only on the bitwise-identical pairs
    assert K_nb[0, 0] == pytest.approx(1.7 + 1e-6, rel=1e-15)


def test_lhs_swap_parity(rng):
    U = rng.random((12, 3))
    cols = rng.integers(0, 3, 300)
    a = rng.integers(0, 12, 300)
    b = rng.integers(0, 12, 300)
    U1, d1 = _accel.lhs_swap_optimize_numpy(U, cols, a, b)
    U2, d2 = _accel.lhs_swap_optimize_numba(U, cols, a, b)
    np.testing.assert_array_equal(U1, U2)
    assert d1 == d2


def test_ballistic_parity():
    drag = np.array([0.0, 1e-3, 5e-3])
    speed = np.array([100.0, 200.0, 300.0])
    elev = np.deg2rad([45.0, 30.0, 10.0])
    r_np = _accel.ballistic_range_numpy(drag, speed, elev, 9.81, 0.01, 300.0)
    r_nb = _accel.ballistic_range_numba(drag, speed, elev, 9.81, 0.01, 300.0)
    np.testing.assert_allclose(r_nb, r_np, rtol=1e-12)


@pytest.mark.parametrize("flag,expected", [("1", "False"), ("0", "True")])
def test_disable_flag(flag, expected):
    env = {**os.environ, "NESTEDGP_DISABLE_JIT": flag}
    out = subprocess.run([sys.executable, "-c", "from nestedgp import _accel; print(_accel.USE_JIT)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
