"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per (kernel, size) with the best wall time of each backend,
the speed-up, and the max abs difference of the outputs.
"""
import argparse
import time

import numpy as np

from clsnet import _accel, _kernels


def best_time(fn, repeat):
    fn()  # warm-up (and JIT compile)
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def as_array(out):
    if isinstance(out, tuple):
        return np.concatenate([np.ravel(np.asarray(o, dtype=float)) for o in out])
    return np.ravel(np.asarray(out, dtype=float))


def cases(rng):
    for n in (50, 200, 800):
        X = rng.normal(size=(n, 2))
        X[:, 1] = np.abs(X[:, 1]) + 0.5
        A = (rng.random((n, n)) < 0.2).astype(np.int8)
        A = np.triu(A, 1)
        A = A + A.T
        logn = float(np.log(n))
        for hyper in (False, True):
            tag = "H2" if hyper else "R2"
            yield f"loglik {tag}", n, lambda X=X, A=A, hyper=hyper, logn=logn: _kernels.logistic_loglik(X, A, 2.0, logn, hyper)
            yield f"loglik_grad {tag}", n, lambda X=X, A=A, hyper=hyper, logn=logn: _kernels.logistic_loglik_grad(X, A, 2.0, logn, hyper)[:2]
        Q = rng.normal(size=(4096, 2))
        yield "kernel_sum R2", n, lambda X=X, Q=Q: _kernels.kernel_sum(Q, X, 0.5, False)
    X = rng.normal(size=(5, 2))
    Y = X @ np.array([[0.0, -1.0], [1.0, 0.0]]) + 0.3
    c = X.mean(axis=0)
    yield "nelder_mead_align R2", 5, lambda: _kernels.nelder_mead_align(X, Y, c, False, np.zeros(3), 0.5)[0]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':26s} {'n':>5s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, n, fn in cases(rng):
        _accel.set_backend("numba")
        t_nb, out_nb = best_time(fn, args.repeat)
        _accel.set_backend("numpy")
        t_np, out_np = best_time(fn, args.repeat)
        diff = np.max(np.abs(as_array(out_nb) - as_array(out_np)))
        print(f"{name:26s} {n:5d} {t_nb:10.2e} {t_np:10.2e} {t_np / t_nb:8.1f} {diff:10.1e}")
    _accel.set_backend("numba")


if __name__ == "__main__":
    main()
