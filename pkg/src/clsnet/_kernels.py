"""Hot numeric loops: pairwise distances, logistic log-likelihood with gradient,
and distance-kernel sums.

Every kernel has an ``@njit`` implementation and a vectorised numpy twin.  The
public wrappers at the bottom dispatch on :func:`clsnet._accel.get_backend`.

Gradients are partial derivatives in raw coordinates ((x, y) for the half-plane);
callers convert to Riemannian gradients.
"""
import math

import numpy as np

from . import _accel
from ._accel import njit

SINGULAR_TOL = 1e-12


# --------------------------------------------------------------------------
# numba kernels


@njit(cache=True)
def _softplus(z):
    if z > 0.0:
        return z + math.log1p(math.exp(-z))
    return math.log1p(math.exp(z))


@njit(cache=True)
def _pair_dist_nb(X, hyper):
    n = X.shape[0]
    d = X.shape[1]
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            sq = 0.0
            for k in range(d):
                diff = X[i, k] - X[j, k]
                sq += diff * diff
            if hyper:
                t = 2.0 * math.asinh(math.sqrt(sq / (4.0 * X[i, 1] * X[j, 1])))
            else:
                t = math.sqrt(sq)
            D[i, j] = t
            D[j, i] = t
    return D


@njit(cache=True)
def _cross_dist_nb(A, B, hyper):
    m = A.shape[0]
    k = B.shape[0]
    d = A.shape[1]
    D = np.empty((m, k))
    for i in range(m):
        for j in range(k):
            sq = 0.0
            for c in range(d):
                diff = A[i, c] - B[j, c]
                sq += diff * diff
            if hyper:
                D[i, j] = 2.0 * math.asinh(math.sqrt(sq / (4.0 * A[i, 1] * B[j, 1])))
            else:
                D[i, j] = math.sqrt(sq)
    return D


@njit(cache=True)
def _loglik_nb(X, A, lam, logn, hyper):
    n = X.shape[0]
    d = X.shape[1]
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            sq = 0.0
            for k in range(d):
                diff = X[i, k] - X[j, k]
                sq += diff * diff
            if hyper:
                t = 2.0 * math.asinh(math.sqrt(sq / (4.0 * X[i, 1] * X[j, 1])))
            else:
                t = math.sqrt(sq)
            z = lam * (t - logn)
            if A[i, j]:
                total -= _softplus(z)
            else:
                total -= _softplus(-z)
    return total


@njit(cache=True)
def _loglik_grad_nb(X, A, lam, logn, hyper):
    n = X.shape[0]
    d = X.shape[1]
    grad = np.zeros((n, d))
    total = 0.0
    singular = False
    for i in range(n):
        for j in range(i + 1, n):
            sq = 0.0
            for k in range(d):
                diff = X[i, k] - X[j, k]
                sq += diff * diff
            if hyper:
                yi = X[i, 1]
                yj = X[j, 1]
                s = math.sqrt(sq / (4.0 * yi * yj))
                t = 2.0 * math.asinh(s)
            else:
                t = math.sqrt(sq)
            z = lam * (t - logn)
            g = 1.0 if A[i, j] else 0.0
            if g > 0.0:
                total -= _softplus(z)
            else:
                total -= _softplus(-z)
            if t < SINGULAR_TOL:
                singular = True
                continue
            # d(term)/dt = lam * (w - g), w = sigmoid(-z)
            if z > 0.0:
                e = math.exp(-z)
                w = e / (1.0 + e)
            else:
                w = 1.0 / (1.0 + math.exp(z))
            dterm = lam * (w - g)
            if hyper:
                dx = X[i, 0] - X[j, 0]
                dy = yi - yj
                sinh_t = 2.0 * s * math.sqrt(1.0 + s * s)
                c = dterm / sinh_t
                pq = yi * yj
                grad[i, 0] += c * dx / pq
                grad[i, 1] += c * (dy / pq - sq / (2.0 * yi * pq))
                grad[j, 0] -= c * dx / pq
                grad[j, 1] += c * (-dy / pq - sq / (2.0 * yj * pq))
            else:
                c = dterm / t
                for k in range(d):
                    diff = X[i, k] - X[j, k]
                    grad[i, k] += c * diff
                    grad[j, k] -= c * diff
    return total, grad, singular


@njit(cache=True)
def _kernel_sum_nb(Q, C, h, hyper):
    m = Q.shape[0]
    k = C.shape[0]
    d = Q.shape[1]
    out = np.zeros(m)
    inv = 1.0 / (2.0 * h * h)
    for i in range(m):
        acc = 0.0
        for j in range(k):
            sq = 0.0
            for c in range(d):
                diff = Q[i, c] - C[j, c]
                sq += diff * diff
            if hyper:
                t = 2.0 * math.asinh(math.sqrt(sq / (4.0 * Q[i, 1] * C[j, 1])))
                acc += math.exp(-t * t * inv)
            else:
                acc += math.exp(-sq * inv)
        out[i] = acc
    return out


# --------------------------------------------------------------------------
# numpy twins


def _softplus_np(z):
    return np.logaddexp(0.0, z)


def _cross_dist_np(A, B, hyper):
    diff = A[:, None, :] - B[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    if hyper:
        return 2.0 * np.arcsinh(np.sqrt(sq / (4.0 * np.outer(A[:, 1], B[:, 1]))))
    return np.sqrt(sq)


def _pair_dist_np(X, hyper):
    D = _cross_dist_np(X, X, hyper)
    np.fill_diagonal(D, 0.0)
    return D


def _loglik_np(X, A, lam, logn, hyper):
    iu, ju = np.triu_indices(X.shape[0], 1)
    t = _pair_dist_np(X, hyper)[iu, ju]
    z = lam * (t - logn)
    g = A[iu, ju].astype(bool)
    return -float(np.sum(np.where(g, _softplus_np(z), _softplus_np(-z))))


def _loglik_grad_np(X, A, lam, logn, hyper):
    n, d = X.shape
    D = _pair_dist_np(X, hyper)
    iu, ju = np.triu_indices(n, 1)
    t = D[iu, ju]
    z = lam * (t - logn)
    g = A[iu, ju].astype(bool)
    total = -float(np.sum(np.where(g, _softplus_np(z), _softplus_np(-z))))
    singular = bool(np.any(t < SINGULAR_TOL))
    w = np.exp(-_softplus_np(z))
    dterm = lam * (w - g)
    ok = t >= SINGULAR_TOL
    dterm = np.where(ok, dterm, 0.0)
    grad = np.zeros((n, d))
    diff = X[iu] - X[ju]
    if hyper:
        yi, yj = X[iu, 1], X[ju, 1]
        pq = yi * yj
        sq = np.einsum("ij,ij->i", diff, diff)
        s = np.sqrt(sq / (4.0 * pq))
        sinh_t = np.where(ok, 2.0 * s * np.sqrt(1.0 + s * s), 1.0)
        c = dterm / sinh_t
        gi = np.column_stack([c * diff[:, 0] / pq, c * (diff[:, 1] / pq - sq / (2.0 * yi * pq))])
        gj = np.column_stack([-c * diff[:, 0] / pq, c * (-diff[:, 1] / pq - sq / (2.0 * yj * pq))])
    else:
        c = dterm / np.where(ok, t, 1.0)
        gi = c[:, None] * diff
        gj = -gi
    np.add.at(grad, iu, gi)
    np.add.at(grad, ju, gj)
    return total, grad, singular


def _kernel_sum_np(Q, C, h, hyper, chunk=2048):
    out = np.empty(Q.shape[0])
    for start in range(0, Q.shape[0], chunk):
        D = _cross_dist_np(Q[start:start + chunk], C, hyper)
        out[start:start + chunk] = np.exp(-(D * D) / (2.0 * h * h)).sum(axis=1)
    return out


# --------------------------------------------------------------------------
# dispatch


def _f64(X):
    return np.ascontiguousarray(X, dtype=np.float64)


def pair_dist(X, hyper):
    X = _f64(X)
    if _accel.get_backend() == "numba":
        return _pair_dist_nb(X, hyper)
    return _pair_dist_np(X, hyper)


def cross_dist(A, B, hyper):
    A, B = _f64(A), _f64(B)
    if _accel.get_backend() == "numba":
        return _cross_dist_nb(A, B, hyper)
    return _cross_dist_np(A, B, hyper)


def logistic_loglik(X, A, lam, logn, hyper):
    """Unnormalised logistic-link log-likelihood of ``X`` given adjacency ``A``."""
    X = _f64(X)
    A = np.ascontiguousarray(A, dtype=np.int8)
    if _accel.get_backend() == "numba":
        return float(_loglik_nb(X, A, float(lam), float(logn), hyper))
    return _loglik_np(X, A, float(lam), float(logn), hyper)


def logistic_loglik_grad(X, A, lam, logn, hyper):
    """Return ``(value, coordinate_partials, singular)``.

    ``singular`` is set when some pair lies closer than ``SINGULAR_TOL``; those
    pairs contribute nothing to the partials.
    """
    X = _f64(X)
    A = np.ascontiguousarray(A, dtype=np.int8)
    if _accel.get_backend() == "numba":
        val, grad, sing = _loglik_grad_nb(X, A, float(lam), float(logn), hyper)
        return float(val), grad, bool(sing)
    return _loglik_grad_np(X, A, float(lam), float(logn), hyper)


def kernel_sum(Q, C, h, hyper):
    """``out[i] = sum_j exp(-dist(Q[i], C[j])**2 / (2 h**2))``."""
    Q, C = _f64(Q), _f64(C)
    if _accel.get_backend() == "numba":
        return _kernel_sum_nb(Q, C, float(h), hyper)
    return _kernel_sum_np(Q, C, float(h), hyper)


# --------------------------------------------------------------------------
# isometry-parameter transforms and the alignment objective
#
# Euclidean parameters: d(d-1)/2 Givens angles (pairs i < j, row-major), then
# the translation.  Half-plane parameters: (b, s, theta) for the matrix
# [[1, b], [0, 1]] [[e^(s/2), 0], [0, e^(-s/2)]] [[cos, sin], [-sin, cos]].
# Transforms act about a centre c: y -> T_c E(p) T_c^-1 y.


@njit(cache=True)
def givens_chain(angles, d):
    Q = np.eye(d)
    k = 0
    for i in range(d):
        for j in range(i + 1, d):
            c = math.cos(angles[k])
            s = math.sin(angles[k])
            # Q <- Q @ G_ij
            for r in range(d):
                qi = Q[r, i]
                qj = Q[r, j]
                Q[r, i] = c * qi + s * qj
                Q[r, j] = -s * qi + c * qj
            k += 1
    return Q


@njit(cache=True)
def sl2_from_params(b, s, th):
    e = math.exp(s / 2.0)
    c = math.cos(th)
    sn = math.sin(th)
    # N @ A
    a11, a12, a21, a22 = e, b / e, 0.0, 1.0 / e
    M = np.empty((2, 2))
    M[0, 0] = a11 * c - a12 * sn
    M[0, 1] = a11 * sn + a12 * c
    M[1, 0] = a21 * c - a22 * sn
    M[1, 1] = a21 * sn + a22 * c
    return M


@njit(cache=True)
def _local_transform_nb(p, Y, c, hyper):
    n = Y.shape[0]
    d = Y.shape[1]
    out = np.empty_like(Y)
    if hyper:
        M = sl2_from_params(p[0], p[1], p[2])
        r = math.sqrt(c[1])
        # T_c M T_c^-1 with T_c = [[r, x0/r], [0, 1/r]]
        t11, t12, t22 = r, c[0] / r, 1.0 / r
        i11, i12, i22 = 1.0 / r, -c[0] / r, r
        m11 = t11 * M[0, 0] + t12 * M[1, 0]
        m12 = t11 * M[0, 1] + t12 * M[1, 1]
        m21 = t22 * M[1, 0]
        m22 = t22 * M[1, 1]
        a = m11 * i11
        b = m11 * i12 + m12 * i22
        cc = m21 * i11
        dd = m21 * i12 + m22 * i22
        for i in range(n):
            x = Y[i, 0]
            y = Y[i, 1]
            u = cc * x + dd
            v = cc * y
            den = u * u + v * v
            out[i, 0] = ((a * x + b) * u + a * cc * y * y) / den
            out[i, 1] = y * (a * dd - b * cc) / den
        return out
    k = d * (d - 1) // 2
    Q = givens_chain(p[:k], d)
    for i in range(n):
        for r in range(d):
            acc = c[r] + p[k + r]
            for s in range(d):
                acc += Q[r, s] * (Y[i, s] - c[s])
            out[i, r] = acc
    return out


@njit(cache=True)
def _align_objective_nb(p, X, Y, c, hyper):
    Z = _local_transform_nb(p, Y, c, hyper)
    n = X.shape[0]
    d = X.shape[1]
    total = 0.0
    for i in range(n):
        sq = 0.0
        for k in range(d):
            diff = X[i, k] - Z[i, k]
            sq += diff * diff
        if hyper:
            total += 2.0 * math.asinh(math.sqrt(sq / (4.0 * X[i, 1] * Z[i, 1])))
        else:
            total += math.sqrt(sq)
    return total


@njit(cache=True)
def _nelder_mead_align_nb(X, Y, c, hyper, x0, scale, xatol, fatol, maxfev):
    """Plain Nelder-Mead (reflection 1, expansion 2, contraction/shrink 1/2)."""
    k = x0.size
    S = np.empty((k + 1, k))
    F = np.empty(k + 1)
    for i in range(k + 1):
        for j in range(k):
            S[i, j] = x0[j]
        if i > 0:
            S[i, i - 1] += scale
        F[i] = _align_objective_nb(S[i], X, Y, c, hyper)
    nfev = k + 1
    while nfev < maxfev:
        order = np.argsort(F)
        S = S[order]
        F = F[order]
        fspread = 0.0
        xspread = 0.0
        for i in range(1, k + 1):
            fspread = max(fspread, abs(F[i] - F[0]))
            for j in range(k):
                xspread = max(xspread, abs(S[i, j] - S[0, j]))
        if fspread <= fatol and xspread <= xatol:
            break
        cen = np.zeros(k)
        for i in range(k):
            cen += S[i]
        cen /= k
        xr = cen + (cen - S[k])
        fr = _align_objective_nb(xr, X, Y, c, hyper)
        nfev += 1
        if fr < F[0]:
            xe = cen + 2.0 * (cen - S[k])
            fe = _align_objective_nb(xe, X, Y, c, hyper)
            nfev += 1
            if fe < fr:
                S[k] = xe
                F[k] = fe
            else:
                S[k] = xr
                F[k] = fr
        elif fr < F[k - 1]:
            S[k] = xr
            F[k] = fr
        else:
            if fr < F[k]:
                xc = cen + 0.5 * (xr - cen)
            else:
                xc = cen + 0.5 * (S[k] - cen)
            fc = _align_objective_nb(xc, X, Y, c, hyper)
            nfev += 1
            if fc < min(fr, F[k]):
                S[k] = xc
                F[k] = fc
            else:
                for i in range(1, k + 1):
                    S[i] = S[0] + 0.5 * (S[i] - S[0])
                    F[i] = _align_objective_nb(S[i], X, Y, c, hyper)
                nfev += k
    best = np.argmin(F)
    return S[best].copy(), F[best]


def _givens_chain_np(angles, d):
    Q = np.eye(d)
    k = 0
    for i in range(d):
        for j in range(i + 1, d):
            c, s = math.cos(angles[k]), math.sin(angles[k])
            qi, qj = Q[:, i].copy(), Q[:, j].copy()
            Q[:, i] = c * qi + s * qj
            Q[:, j] = -s * qi + c * qj
            k += 1
    return Q


def _local_transform_np(p, Y, c, hyper):
    if hyper:
        b, s, th = p
        e = math.exp(s / 2.0)
        M = np.array([[e, b / e], [0.0, 1.0 / e]]) @ np.array(
            [[math.cos(th), math.sin(th)], [-math.sin(th), math.cos(th)]]
        )
        r = math.sqrt(c[1])
        T = np.array([[r, c[0] / r], [0.0, 1.0 / r]])
        Ti = np.array([[1.0 / r, -c[0] / r], [0.0, r]])
        (a, b2), (cc, dd) = T @ M @ Ti
        z = Y[:, 0] + 1j * Y[:, 1]
        w = (a * z + b2) / (cc * z + dd)
        return np.column_stack([w.real, w.imag])
    d = Y.shape[1]
    k = d * (d - 1) // 2
    Q = _givens_chain_np(p[:k], d)
    return (Y - c) @ Q.T + c + p[k:]


def _align_objective_np(p, X, Y, c, hyper):
    Z = _local_transform_np(p, Y, c, hyper)
    diff = X - Z
    sq = np.einsum("ij,ij->i", diff, diff)
    if hyper:
        return float(np.sum(2.0 * np.arcsinh(np.sqrt(sq / (4.0 * X[:, 1] * Z[:, 1])))))
    return float(np.sum(np.sqrt(sq)))


def givens_rotation(angles, d):
    return _givens_chain_np(np.asarray(angles, dtype=float), d)


def nelder_mead_align(X, Y, c, hyper, x0, scale, xatol=1e-11, fatol=1e-13, maxfev=None):
    """Minimise sum_i dist(X_i, L(p) Y_i) over local isometry parameters p."""
    X, Y, c = _f64(X), _f64(Y), _f64(c)
    x0 = _f64(x0)
    maxfev = 4000 * x0.size if maxfev is None else maxfev
    if _accel.get_backend() == "numba":
        p, fval = _nelder_mead_align_nb(X, Y, c, hyper, x0, float(scale), xatol, fatol, maxfev)
        return p, float(fval)
    from scipy.optimize import minimize

    simplex = np.vstack([x0] + [x0 + scale * e for e in np.eye(x0.size)])
    res = minimize(
        _align_objective_np, x0, args=(X, Y, c, hyper), method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": xatol, "fatol": fatol, "maxfev": maxfev},
    )
    return res.x, float(res.fun)


def align_objective(p, X, Y, c, hyper):
    if _accel.get_backend() == "numba":
        return float(_align_objective_nb(_f64(p), _f64(X), _f64(Y), _f64(c), hyper))
    return _align_objective_np(_f64(p), _f64(X), _f64(Y), _f64(c), hyper)
