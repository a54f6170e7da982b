import os
import subprocess
import sys

import numpy as np
import pytest

from posslib import _kernels as K

pytestmark = pytest.mark.skipif(not hasattr(K, "lower_rows_nb"), reason="numba unavailable")


def _data(seed=1, rows=50, cols=33):
    rng = np.random.default_rng(seed)
    h = -rng.uniform(0, 4, cols)
    h[rng.random(cols) < 0.15] = -np.inf
    g = rng.random((rows, cols))
    g[rng.random((rows, cols)) < 0.25] = 0.0
    g[:, 0] = 1.0
    return h, K.safe_log(g), g


class TestBackendsAgree:
    def test_lower_upper(self):
        h, lg, _ = _data()
        np.testing.assert_array_equal(K.lower_rows_np(h, lg), K.lower_rows_nb(h, lg))
        np.testing.assert_array_equal(K.upper_rows_np(h, lg), K.upper_rows_nb(h, lg))

    def test_dmax(self):
        _, lg, _ = _data()
        lb = np.ascontiguousarray(lg[::-1])
        np.testing.assert_array_equal(K.dmax_rows_np(lg, lb), K.dmax_rows_nb(lg, lb))

    def test_leq(self):
        _, _, g = _data()
        f = np.minimum(g, g[0])
        np.testing.assert_array_equal(K.leq_rows_np(f, g, 1e-12), K.leq_rows_nb(f, g, 1e-12))
        assert K.leq_rows_np(f, np.broadcast_to(g[0], g.shape), 1e-12).all()

    def test_extended_real_cases(self):
        h = np.array([0.0, -np.inf])
        lg = np.array([[0.0, -np.inf], [0.0, 0.0], [-np.inf, 0.0]])
        for lower, upper in ((K.lower_rows_np, K.upper_rows_np), (K.lower_rows_nb, K.upper_rows_nb)):
            np.testing.assert_array_equal(lower(h, lg), [0.0, -np.inf, -np.inf])
            np.testing.assert_array_equal(upper(h, lg), [0.0, 0.0, np.inf])


def test_dispatch_broadcasts_single_row():
    h, lg, _ = _data()
    assert K.lower_rows(h, lg[0]).shape == (1,)
    assert K.dmax_rows(lg, lg[0]).shape == (lg.shape[0],)


@pytest.mark.parametrize("flag, expected", [("0", "False"), ("off", "False"), ("1", "True")])
def test_env_flag_selects_backend(flag, expected):
    env = {**os.environ, "POSSLIB_JIT": flag}
    out = subprocess.run(
        [sys.executable, "-c", "from posslib import _kernels as K; print(K.USE_NUMBA)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == expected


def test_safe_log_is_silent():
    with np.errstate(all="raise"):
        np.testing.assert_array_equal(K.safe_log([1.0, 0.0]), [0.0, -np.inf])
