import math

import numpy as np
import pytest
from scipy import special

from clsnet import (
    Configuration,
    GaussianEuclidean,
    GridSpec,
    HyperGaussian,
    Isometry,
    LatentSpace,
    UsageError,
    density_eval,
    kde,
    sample_density,
)
from clsnet.alignment import l2_distance_direct
from clsnet.density import (
    default_bandwidth,
    grid_for,
    hyperbolic_kernel_normalizer,
    kernel_normalizer,
    support_ball_mass,
)
from clsnet.geometry import polar_to_halfplane

from conftest import H2, R2, random_points

R1 = LatentSpace.euclidean(1)


@pytest.mark.parametrize("h", [0.05, 0.3, 1.0, 2.5, 6.0])
def test_hyperbolic_normalizer_closed_form(h):
    closed = 2 * math.pi * h * math.sqrt(math.pi / 2) * math.exp(h * h / 2) * special.erf(h / math.sqrt(2))
    assert hyperbolic_kernel_normalizer(h) == pytest.approx(closed, rel=1e-10)


def test_normalizer_frozen_values():
    # high-precision quadrature of 2 pi int exp(-r^2/2) sinh r dr
    assert hyperbolic_kernel_normalizer(1.0) == pytest.approx(8.863602394227393, rel=1e-12)
    assert kernel_normalizer(R2, 0.5) == pytest.approx(2 * math.pi * 0.25)
    with pytest.raises(UsageError):
        hyperbolic_kernel_normalizer(0.0)


def test_gaussian_mode():
    assert density_eval(GaussianEuclidean([0.0], [[1.0]]), [0.0]) == pytest.approx(0.398942280401432678, rel=1e-14)


def test_density_eval_shapes():
    f = GaussianEuclidean([0.0, 0.0], np.eye(2))
    assert isinstance(density_eval(f, [0.0, 0.0]), float)
    assert density_eval(f, np.zeros((4, 2))).shape == (4,)


def test_single_point_kde_integrates_to_one():
    f = kde(Configuration(R1, [[0.7]]), 0.3)
    z = np.linspace(0.7 - 4, 0.7 + 4, 80001)[:, None]
    mass = np.trapezoid(density_eval(f, z), z[:, 0])
    assert mass == pytest.approx(1.0, abs=1e-4)
    # it is the normal density with sd h
    assert density_eval(f, [0.7]) == pytest.approx(1 / (0.3 * math.sqrt(2 * math.pi)))


def test_kde_symmetry_about_single_centre():
    c = np.array([0.4, 1.3])
    f = kde(Configuration(H2, c[None, :]), 0.6)
    ring = polar_to_halfplane(np.full(12, 0.9), np.linspace(0, 2 * np.pi, 12, endpoint=False), c)
    vals = density_eval(f, ring)
    assert np.ptp(vals) <= 1e-12 * vals.max()
    g = kde(Configuration(R2, [[0.0, 0.0]]), 0.6)
    ang = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    vals = density_eval(g, np.column_stack([np.cos(ang), np.sin(ang)]))
    assert np.ptp(vals) <= 1e-12 * vals.max()


def test_kde_is_lipschitz_in_its_inputs(space, rng):
    X = random_points(space, 10, rng, 0.5)
    z = random_points(space, 5, rng, 0.5)
    base = density_eval(kde(Configuration(space, X), 0.4), z)
    slopes = []
    for delta in (1e-3, 1e-4, 1e-5):
        Xp = X.copy()
        Xp[0, 0] += delta
        slopes.append(np.max(np.abs(density_eval(kde(Configuration(space, Xp), 0.4), z) - base)) / delta)
    assert max(slopes) < 10.0
    assert slopes[-1] == pytest.approx(slopes[-2], rel=1e-2)


def test_default_bandwidth_rule(rng):
    X = Configuration(R2, rng.normal(size=(50, 2)))
    D = X.pairwise_distances()[np.triu_indices(50, 1)]
    assert default_bandwidth(X) == pytest.approx(np.median(D) / 2 * 50 ** (-1 / 6))
    assert default_bandwidth(Configuration(R2, [[1.0, 1.0]])) == 1.0
    with pytest.raises(UsageError):
        kde(X, -1.0)


def _densities():
    rng = np.random.default_rng(0)
    return [
        GaussianEuclidean([1.0, -2.0], [[2.0, 0.3], [0.3, 0.5]]),
        HyperGaussian([0.5, 2.0], 0.4),
        HyperGaussian([0.0, 1.0], 1.5),
        kde(Configuration(R2, rng.normal(size=(30, 2)))),
        kde(Configuration(H2, random_points(H2, 30, rng, 0.7))),
    ]


@pytest.mark.parametrize("f", _densities(), ids=["gauss", "hg-narrow", "hg-wide", "kde-r2", "kde-h2"])
def test_quadrature_mass_on_support_ball(f):
    grid = grid_for(f, GridSpec(points_per_axis=96))
    mass = grid.integrate(density_eval(f, grid.nodes))
    assert 0.97 <= mass <= 1.001


def test_support_ball_mass():
    f = GaussianEuclidean([0.0, 0.0], np.eye(2))
    # chi-square with 2 dof: P(|X| <= r) = 1 - exp(-r^2 / 2)
    assert support_ball_mass(f, 2.0, 256) == pytest.approx(1 - math.exp(-2.0), abs=2e-3)


def test_grid_too_coarse():
    with pytest.raises(UsageError):
        GridSpec(points_per_axis=31)


def test_kde_error_shrinks_with_sample_size():
    f = GaussianEuclidean([0.0, 0.0], np.eye(2))
    grid = grid_for(f, GridSpec(points_per_axis=64))
    ident = Isometry.identity(R2)
    rng = np.random.default_rng(77)
    wins = 0
    for _ in range(50):
        small = kde(sample_density(f, 200, rng))
        large = kde(sample_density(f, 2000, rng))
        wins += l2_distance_direct(large, f, ident, grid) < l2_distance_direct(small, f, ident, grid)
    assert wins >= 45
