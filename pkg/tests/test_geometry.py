import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from clsnet import (
    Configuration,
    DomainError,
    GaussianEuclidean,
    HyperGaussian,
    Isometry,
    LatentSpace,
    SingularityError,
    UsageError,
    apply_isometry,
    dist,
    dist_grad,
    sample_density,
)
from clsnet.geometry import (
    disk_to_halfplane,
    dist_to_origin,
    halfplane_to_disk,
    polar_to_halfplane,
    project_to_ball,
    random_isometry,
    riemannian_norm,
    sample_hyperbolic_radii,
)

from conftest import H2, R2, random_points

coord = st.floats(-5, 5, allow_nan=False)
height = st.floats(0.05, 20, allow_nan=False)
hpoint = st.tuples(coord, height)


def test_space_validation():
    with pytest.raises(UsageError):
        LatentSpace("sphere", 2)
    with pytest.raises(UsageError):
        LatentSpace("halfplane", 3)
    with pytest.raises(UsageError):
        LatentSpace.euclidean(0)
    assert LatentSpace.from_dict(H2.to_dict()) == H2
    assert R2.n_iso_params == 3 and LatentSpace.euclidean(3).n_iso_params == 6


def test_points_outside_domain_rejected():
    with pytest.raises(DomainError):
        Configuration(H2, [[0.0, 0.0]])
    with pytest.raises(DomainError):
        Configuration(R2, [[np.nan, 0.0]])
    with pytest.raises(UsageError):
        Configuration(R2, [[0.0, 0.0, 1.0]])


def test_configuration_is_immutable():
    c = Configuration(R2, [[0.0, 1.0], [2.0, 3.0]])
    with pytest.raises(ValueError):
        c.coords[0, 0] = 5.0
    assert c == Configuration(R2, [[0.0, 1.0], [2.0, 3.0]])
    assert c.n == 2


def test_dist_examples():
    assert dist(R2, [0, 0], [3, 4]) == 5.0
    assert dist(H2, [0, 1], [0, 1]) == 0.0
    assert dist(H2, [0, 1], [0, 2]) == pytest.approx(math.log(2), rel=1e-15)
    # arccosh form at a generic pair
    p, q = np.array([0.3, 0.7]), np.array([-1.1, 2.5])
    ref = math.acosh(1 + np.sum((p - q) ** 2) / (2 * p[1] * q[1]))
    assert dist(H2, p, q) == pytest.approx(ref, rel=1e-13)


def test_dist_tiny_separation_is_accurate():
    # arccosh(1 + x) loses everything at x ~ 1e-20; the asinh form does not
    d = dist(H2, [0.0, 1.0], [1e-10, 1.0])
    assert d == pytest.approx(1e-10, rel=1e-9)


def test_dist_grad_examples():
    gp, gq = dist_grad(LatentSpace.euclidean(1), [0.0], [1.0])
    assert gp.tolist() == [-1.0] and gq.tolist() == [1.0]
    gp, gq = dist_grad(R2, [0, 0], [3, 4])
    np.testing.assert_allclose(gp, [-0.6, -0.8])
    np.testing.assert_allclose(gq, [0.6, 0.8])
    with pytest.raises(SingularityError):
        dist_grad(R2, [1, 1], [1, 1])


def _coordinate_grad_fd(space, p, q, h=1e-6):
    g = np.zeros(2)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        g[k] = (dist(space, p + e, q) - dist(space, p - e, q)) / (2 * h)
    return g


def test_dist_grad_halfplane_matches_finite_differences():
    p, q = np.array([0.0, 1.0]), np.array([0.0, 2.0])
    gp, gq = dist_grad(H2, p, q)
    # Riemannian gradient = y^2 * coordinate gradient
    np.testing.assert_allclose(gp, p[1] ** 2 * _coordinate_grad_fd(H2, p, q), rtol=1e-6, atol=1e-12)
    np.testing.assert_allclose(gq, q[1] ** 2 * _coordinate_grad_fd(H2, q, p), rtol=1e-6, atol=1e-12)


def test_dist_grad_has_unit_riemannian_norm(space, rng):
    for _ in range(50):
        p, q = random_points(space, 2, rng)
        gp, gq = dist_grad(space, p, q)
        assert riemannian_norm(space, p, gp)[0] == pytest.approx(1.0, rel=1e-9)
        assert riemannian_norm(space, q, gq)[0] == pytest.approx(1.0, rel=1e-9)


@given(hpoint, hpoint, hpoint)
def test_halfplane_metric_axioms(a, b, c):
    dab, dba = dist(H2, a, b), dist(H2, b, a)
    assert dab >= 0 and dab == pytest.approx(dba, rel=1e-12, abs=1e-12)
    assert dist(H2, a, c) <= dab + dist(H2, b, c) + 1e-9


@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3), hpoint, hpoint, st.booleans())
def test_halfplane_isometry_invariance(params, a, b, reflect):
    params[1] = params[1] % 6 - 3  # keep the dilation moderate
    phi = Isometry.from_params(H2, params, reflect)
    pa, pb = phi.apply_points(np.array([a, b]))
    d0 = dist(H2, a, b)
    assert dist(H2, pa, pb) == pytest.approx(d0, rel=1e-9, abs=1e-9)


def test_isometry_examples():
    c = Configuration(R2, [[1.0, 2.0], [3.0, -1.0]])
    assert apply_isometry(Isometry.identity(R2), c) == c
    t = Isometry(R2, np.eye(2), [1.0, 0.0])
    np.testing.assert_array_equal(t.apply_points([[0.0, 0.0]]), [[1.0, 0.0]])
    s = math.sqrt(2.0)
    m = Isometry(H2, [[s, 0.0], [0.0, 1 / s]])
    np.testing.assert_allclose(m.apply_points([[0.0, 1.0]]), [[0.0, 2.0]], rtol=1e-15)
    for seed in range(20):
        phi = random_isometry(H2, seed)
        p, q = phi.apply_points(np.array([[0.0, 1.0], [0.0, 2.0]]))
        assert dist(H2, p, q) == pytest.approx(math.log(2), rel=1e-9)


def test_isometry_validation():
    with pytest.raises(UsageError):
        Isometry(R2, [[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(UsageError):
        Isometry(H2, [[2.0, 0.0], [0.0, 1.0]])
    with pytest.raises(UsageError):
        Isometry.from_params(R2, [0.0, 1.0])


def test_compose_and_inverse(space, rng):
    X = random_points(space, 6, rng)
    for seed in range(20):
        f, g = random_isometry(space, seed), random_isometry(space, seed + 100)
        np.testing.assert_allclose(
            f.compose(g).apply_points(X), f.apply_points(g.apply_points(X)), rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(f.inverse().apply_points(f.apply_points(X)), X, rtol=1e-9, atol=1e-9)


def test_reflection_component(space):
    # the reflected component reverses orientation
    iso = Isometry.from_params(space, np.zeros(space.n_iso_params), reflect=True)
    assert iso.reflect
    X = np.array([[0.0, 1.0], [1.0, 1.0], [0.0, 2.0]])
    Y = iso.apply_points(X)

    def orient(P):
        u, v = P[1] - P[0], P[2] - P[0]
        return np.sign(u[0] * v[1] - u[1] * v[0])

    assert orient(X) == -orient(Y)


def test_cayley_round_trip(rng):
    X = random_points(H2, 50, rng)
    for center in [(0.0, 1.0), (2.0, 0.5)]:
        w = halfplane_to_disk(X, center)
        assert np.all(np.abs(w) < 1)
        np.testing.assert_allclose(disk_to_halfplane(w, center), X, rtol=1e-9)
    # geodesic polar coordinates: distance from the centre is r
    P = polar_to_halfplane(np.array([0.5, 2.0]), np.array([0.3, 4.0]), (1.0, 3.0))
    np.testing.assert_allclose([dist(H2, [1.0, 3.0], p) for p in P], [0.5, 2.0], rtol=1e-12)


def test_project_to_ball(space, rng):
    X = random_points(space, 200, rng, scale=3.0)
    Y = project_to_ball(space, X, 2.0)
    r = dist_to_origin(space, Y)
    assert np.all(r <= 2.0 + 1e-9)
    inside = dist_to_origin(space, X) <= 2.0
    np.testing.assert_array_equal(Y[inside], X[inside])


def test_sampling_determinism_and_errors():
    f = GaussianEuclidean([0.0, 0.0], np.eye(2))
    a, b = sample_density(f, 3, 7), sample_density(f, 3, 7)
    assert a.n == 3 and a == b
    with pytest.raises(UsageError):
        sample_density(f, 0, 1)
    with pytest.raises(UsageError):
        GaussianEuclidean([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])


def test_hypergaussian_mean_distance_matches_quadrature_oracle():
    # E[dist to centre] for sigma = 0.2, from high-precision quadrature
    oracle = 0.252335015375831520
    c = sample_density(HyperGaussian([0.0, 1.0], 0.2), 1000, 3)
    mean = float(np.mean(dist_to_origin(H2, c.coords)))
    assert abs(mean - oracle) < 0.2 * oracle


@pytest.mark.parametrize("sigma", [0.2, 1.0, 2.5])
def test_hyperbolic_radii_follow_target_law(sigma):
    r = sample_hyperbolic_radii(sigma, 20000, np.random.default_rng(0))
    dens = lambda x: math.exp(-x * x / (2 * sigma * sigma)) * math.sinh(x)
    top = sigma * sigma + 12 * sigma
    Z = integrate.quad(dens, 0, top, limit=200)[0]
    cdf = np.vectorize(lambda x: integrate.quad(dens, 0, min(x, top), limit=200)[0] / Z)
    assert stats.kstest(r, cdf).pvalue > 1e-3


def test_hypergaussian_is_isotropic_about_centre():
    f = HyperGaussian([1.5, 0.5], 1.0)
    c = sample_density(f, 4000, 11)
    w = halfplane_to_disk(c.coords, f.center)
    ang = np.angle(w)
    # uniform angles: first Fourier coefficient near 0
    assert abs(np.mean(np.exp(1j * ang))) < 4 / math.sqrt(4000)
