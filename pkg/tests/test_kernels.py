import os
import subprocess
import sys

import numpy as np
import pytest

from oracles import evar_z_grid, max_drawdown_scan
from ssaam import kernels


def test_backend_is_numba_by_default():
    if os.environ.get(kernels.DISABLE_ENV):
        pytest.skip("running with the numpy fallback forced")
    assert kernels.NUMBA_AVAILABLE
    assert kernels.BACKEND == "numba"


def test_env_flag_selects_numpy_fallback():
    code = (
        "import ssaam.kernels as k; import numpy as np; "
        "print(k.BACKEND); "
        "v, z = k.evar_value(np.array([0.0, 1.0, 2.0, 5.0]), 0.25); print(repr(v))"
    )
    env = dict(os.environ, **{kernels.DISABLE_ENV: "1"})
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
    )
    lines = out.stdout.strip().splitlines()
    assert lines[0] == "numpy"
    v_np = float(lines[1])
    v_here, _ = kernels.evar_value_numpy(np.array([0.0, 1.0, 2.0, 5.0]), 0.25)
    assert v_np == pytest.approx(v_here, rel=1e-12)


def test_evar_value_backends_agree(rng):
    if not kernels.NUMBA_AVAILABLE:
        pytest.skip("numba unavailable")
    for _ in range(25):
        losses = rng.normal(0, rng.uniform(0.1, 5), size=int(rng.integers(2, 300)))
        alpha = float(rng.uniform(0.01, 0.9))
        v1, z1 = kernels.evar_value_numba(losses, alpha)
        v2, z2 = kernels.evar_value_numpy(losses, alpha)
        assert v1 == pytest.approx(v2, rel=1e-10, abs=1e-12)


def test_evar_value_against_grid(rng):
    for _ in range(10):
        losses = rng.normal(0, 1, size=64)
        for alpha in (0.05, 0.25):
            v, _ = kernels.evar_value(losses, alpha)
            g = evar_z_grid(losses, alpha, n=20_000)
            assert v == pytest.approx(g, rel=1e-5)


def test_evar_batch_backends_and_scalar_agree(rng):
    returns = rng.normal(0.001, 0.02, size=(40, 3))
    weights = rng.dirichlet(np.ones(3), size=200)
    scalar = np.array(
        [kernels.evar_value(np.ascontiguousarray(-(returns @ w)), 0.05)[0] for w in weights]
    )
    batch_np = kernels.evar_batch_numpy(returns, weights, 0.05)
    np.testing.assert_allclose(batch_np, scalar, rtol=1e-9)
    if kernels.NUMBA_AVAILABLE:
        batch_nb = kernels.evar_batch_numba(returns, weights, 0.05)
        np.testing.assert_allclose(batch_nb, scalar, rtol=1e-9)


def test_evar_constant_losses():
    v, z = kernels.evar_value(np.full(10, 2.5), 0.1)
    assert v == 2.5 and z == 0.0


def test_evar_batch_flat_row():
    returns = np.zeros((8, 2))
    weights = np.array([[0.5, 0.5], [1.0, 0.0]])
    out = kernels.evar_batch(returns, weights, 0.1)
    np.testing.assert_array_equal(out, [0.0, 0.0])


def test_best_l2_split_backends_agree(rng):
    values = rng.normal(size=120) + np.repeat([0.0, 3.0, -2.0], 40)
    csum = np.concatenate(([0.0], np.cumsum(values)))
    csum2 = np.concatenate(([0.0], np.cumsum(values * values)))
    cases = [(0, 120, 2), (10, 60, 2), (0, 120, 15), (40, 44, 2), (40, 43, 2)]
    for a, b, ms in cases:
        s_np, c_np = kernels.best_l2_split_numpy(csum, csum2, a, b, ms)
        if kernels.NUMBA_AVAILABLE:
            s_nb, c_nb = kernels.best_l2_split_numba(csum, csum2, a, b, ms)
            assert s_nb == s_np
            if s_np >= 0:
                assert c_nb == pytest.approx(c_np, rel=1e-12)


def test_best_l2_split_too_short():
    csum = np.zeros(5)
    s, c = kernels.best_l2_split(csum, csum, 0, 3, 2)
    assert s == -1 and np.isinf(c)


def test_max_drawdown_backends_and_oracle(rng):
    for _ in range(10):
        values = np.cumprod(1 + rng.normal(0.001, 0.02, size=100)) * 100
        d_np = kernels.max_drawdown_path_numpy(values)
        assert d_np == pytest.approx(max_drawdown_scan(values), abs=1e-12)
        if kernels.NUMBA_AVAILABLE:
            assert kernels.max_drawdown_path_numba(values) == pytest.approx(d_np, abs=1e-15)


def test_max_drawdown_monotone_increasing():
    assert kernels.max_drawdown_path(np.array([1.0, 2.0, 3.0])) == 0.0
