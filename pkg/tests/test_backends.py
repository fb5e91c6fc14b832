"""The numba kernels and their numpy twins must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from clsnet import _accel, _kernels

from conftest import random_points


@pytest.fixture
def both():
    def run(fn):
        prev = _accel.get_backend()
        try:
            _accel.set_backend("numba")
            a = fn()
            _accel.set_backend("numpy")
            b = fn()
        finally:
            _accel.set_backend(prev)
        return a, b
    return run


def _graph(rng, n):
    A = np.triu((rng.random((n, n)) < 0.3).astype(np.int8), 1)
    return A + A.T


def test_distances_agree(both, space, rng):
    X, Y = random_points(space, 30, rng), random_points(space, 7, rng)
    a, b = both(lambda: _kernels.pair_dist(X, space.hyperbolic))
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)
    a, b = both(lambda: _kernels.cross_dist(X, Y, space.hyperbolic))
    np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)


def test_likelihood_kernels_agree(both, space, rng):
    X, A = random_points(space, 40, rng), _graph(rng, 40)
    a, b = both(lambda: _kernels.logistic_loglik(X, A, 2.0, np.log(40), space.hyperbolic))
    assert a == pytest.approx(b, rel=1e-12)
    (va, ga, sa), (vb, gb, sb) = both(lambda: _kernels.logistic_loglik_grad(X, A, 2.0, np.log(40), space.hyperbolic))
    assert va == pytest.approx(vb, rel=1e-12) and sa == sb
    np.testing.assert_allclose(ga, gb, rtol=1e-10, atol=1e-12)


def test_kernel_sum_agrees(both, space, rng):
    Q, C = random_points(space, 500, rng), random_points(space, 25, rng)
    a, b = both(lambda: _kernels.kernel_sum(Q, C, 0.4, space.hyperbolic))
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_alignment_objective_agrees(both, space, rng):
    X, Y = random_points(space, 8, rng), random_points(space, 8, rng)
    c = X.mean(axis=0) if not space.hyperbolic else np.array([0.0, 1.0])
    p = rng.normal(scale=0.3, size=3)
    a, b = both(lambda: _kernels.align_objective(p, X, Y, c, space.hyperbolic))
    assert a == pytest.approx(b, rel=1e-12)
    # both optimisers reach the same minimum value
    (pa, fa), (pb, fb) = both(lambda: _kernels.nelder_mead_align(X, Y, c, space.hyperbolic, np.zeros(3), 0.5))
    assert fa == pytest.approx(fb, rel=1e-6)


def test_givens_rotation_is_orthogonal(rng):
    for d in (2, 3, 5):
        Q = _kernels.givens_rotation(rng.normal(size=d * (d - 1) // 2), d)
        np.testing.assert_allclose(Q.T @ Q, np.eye(d), atol=1e-13)
        assert np.linalg.det(Q) == pytest.approx(1.0)


def test_set_backend_validation():
    with pytest.raises(ValueError):
        _accel.set_backend("fortran")


@pytest.mark.parametrize("env", [{"CLSNET_BACKEND": "numpy"}, {"CLSNET_DISABLE_NUMBA": "1"}])
def test_env_flag_selects_numpy(env):
    code = "import clsnet; print(clsnet.get_backend())"
    out = subprocess.run([sys.executable, "-c", code], env={**os.environ, **env},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_bad_env_flag_fails():
    out = subprocess.run([sys.executable, "-c", "import clsnet"], env={**os.environ, "CLSNET_BACKEND": "gpu"},
                         capture_output=True, text=True)
    assert out.returncode != 0 and "CLSNET_BACKEND" in out.stderr
