import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize

from clsnet import (
    Configuration,
    EdgeProbMatrix,
    Graph,
    LinkFunction,
    LogZeroWarning,
    SingularityError,
    UsageError,
    entropy_kl_decompose,
    expected_loglik_norm,
    generate_graph,
    loglik,
    loglik_norm,
    loglik_norm_grad,
)
from clsnet.likelihood import dump_pair_terms, expected_loglik_norm_probs, loglik_grad, pair_weights

from conftest import H2, R2, random_points

W = LinkFunction.logistic(2.0)
HALF = Configuration(R2, [[0.0, 0.0], [math.log(2), 0.0]])  # w_2 = 0.5 at distance ln 2


def _sym(n, rng, lo=0.0, hi=1.0):
    P = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    P[iu] = rng.uniform(lo, hi, size=iu[0].size)
    return P + P.T


def test_pair_weights():
    np.testing.assert_array_equal(pair_weights(3), [2.0 ** -3, 2.0 ** -4, 2.0 ** -5])
    assert pair_weights(1).size == 0


def test_loglik_examples():
    edge = Graph.from_edges(2, [(0, 1)])
    empty = Graph.from_edges(2, [])
    assert loglik(HALF, edge, W) == pytest.approx(-0.693147180559945309, rel=1e-14)
    assert loglik(HALF, empty, W) == pytest.approx(-0.693147180559945309, rel=1e-14)
    one = Configuration(R2, [[0.0, 0.0]])
    assert loglik(one, Graph([[0]]), W) == 0.0
    assert loglik_norm(HALF, edge, W) == pytest.approx(-0.0866433975699931637, rel=1e-14)
    assert loglik_norm(one, Graph([[0]]), W) == 0.0


def test_loglik_rejects_mismatch():
    with pytest.raises(UsageError):
        loglik(HALF, Graph.from_edges(3, []), W)
    with pytest.raises(UsageError):
        loglik(HALF, Graph.from_edges(2, []), W, space=H2)


def test_loglik_matches_direct_sum(space, rng):
    for n in (5, 12, 60):
        c = Configuration(space, random_points(space, n, rng))
        G = generate_graph(c, W, rng)
        D = c.pairwise_distances()
        iu, ju = np.triu_indices(n, 1)
        w = 1 / (1 + np.exp(2 * (D[iu, ju] - math.log(n))))
        g = G.adjacency[iu, ju]
        terms = np.where(g == 1, np.log(w), np.log1p(-w))
        assert loglik(c, G, W) == pytest.approx(math.fsum(terms), rel=1e-12)
        weights = 2.0 ** -(iu + ju + 2.0)
        assert loglik_norm(c, G, W) == pytest.approx(math.fsum(weights * terms), rel=1e-12)


def test_loglik_extreme_distances_stay_finite():
    c = Configuration(R2, [[0.0, 0.0], [500.0, 0.0]])
    val = loglik(c, Graph.from_edges(2, [(0, 1)]), W)
    assert val == pytest.approx(-2 * (500 - math.log(2)), rel=1e-12)


def test_hard_link_log_zero():
    c = Configuration(R2, [[0.0, 0.0], [5.0, 0.0]])
    G = Graph.from_edges(2, [(0, 1)])
    hard = LinkFunction.hard_threshold()
    with pytest.warns(LogZeroWarning):
        assert loglik(c, G, hard) == -math.inf
    assert np.isfinite(loglik(c, G, hard, guard=True))


def _fd_partials(f, X, h=1e-6):
    out = np.zeros_like(X)
    for i in range(X.shape[0]):
        for k in range(X.shape[1]):
            Xp, Xm = X.copy(), X.copy()
            Xp[i, k] += h
            Xm[i, k] -= h
            out[i, k] = (f(Xp) - f(Xm)) / (2 * h)
    return out


@pytest.mark.parametrize("norm", [False, True])
def test_gradients_match_finite_differences(space, rng, norm):
    for _ in range(5):
        X = random_points(space, 6, rng)
        c = Configuration(space, X)
        G = generate_graph(c, W, rng)
        obj = loglik_norm if norm else loglik
        fd = _fd_partials(lambda Z: obj(Configuration(space, Z), G, W), X)
        if space.hyperbolic:
            fd = fd * (X[:, 1] ** 2)[:, None]
        grad = loglik_norm_grad(c, G, W) if norm else loglik_grad(c, G, W)[1]
        scale = np.max(np.abs(fd))
        assert np.max(np.abs(grad - fd)) <= 1e-5 * scale


def test_gradient_value_matches_loglik(space, rng):
    c = Configuration(space, random_points(space, 9, rng))
    G = generate_graph(c, W, rng)
    assert loglik_grad(c, G, W)[0] == pytest.approx(loglik(c, G, W), rel=1e-12)


def test_two_node_gradient_is_antisymmetric():
    c = Configuration(__import__("clsnet").LatentSpace.euclidean(1), [[0.0], [0.7]])
    G = Graph.from_edges(2, [(0, 1)])
    g = loglik_norm_grad(c, G, W)
    assert g[0, 0] == -g[1, 0] and g[0, 0] > 0


def test_gradient_singular():
    c = Configuration(R2, [[0.0, 0.0], [0.0, 0.0]])
    with pytest.raises(SingularityError):
        loglik_norm_grad(c, Graph.from_edges(2, []), W)
    with pytest.raises(SingularityError):
        loglik_grad(c, Graph.from_edges(2, []), W)


def test_gradient_vanishes_at_stationary_point():
    # path 0-1-2 laid out on a line at spacing a; locate the best a by bounded 1-D search
    G = Graph.from_edges(3, [(0, 1), (1, 2)])
    conf = lambda a: Configuration(R2, [[-a, 0.0], [0.0, 0.0], [a, 0.0]])
    res = optimize.minimize_scalar(lambda a: -loglik(conf(a), G, W), bounds=(0.01, 5.0),
                                   method="bounded", options={"xatol": 1e-12})
    _, grad = loglik_grad(conf(res.x), G, W)
    assert np.max(np.abs(grad)) < 1e-5


def test_argmax_agreement_on_candidate_grid():
    # in expectation both objectives peak at the generating configuration
    rng = np.random.default_rng(4)
    X0 = rng.normal(size=(5, 2))
    truth = EdgeProbMatrix.from_config(Configuration(R2, X0), W)
    scales = np.append(np.linspace(0.2, 3.0, 99), 1.0)
    scales[28] = 0.99  # keep the exact truth only at the last slot
    cands = [Configuration(R2, s * X0) for s in scales]
    iu, ju = np.triu_indices(5, 1)

    def expected_loglik(c):
        pi = EdgeProbMatrix.from_config(c, W)
        ps = truth.prob[iu, ju]
        return math.fsum(ps * pi.log_p1[iu, ju] + (1 - ps) * pi.log_p0[iu, ju])

    a = np.argmax([expected_loglik(c) for c in cands])
    b = np.argmax([expected_loglik_norm(c, truth, W) for c in cands])
    assert a == b == 99


def test_expected_loglik_norm_examples():
    pi = EdgeProbMatrix(np.array([[0, 0.5], [0.5, 0]]))
    assert expected_loglik_norm_probs(pi, pi) == pytest.approx(-math.log(2) / 8, rel=1e-14)
    one = EdgeProbMatrix(np.zeros((1, 1)))
    assert expected_loglik_norm_probs(one, one) == 0.0


def test_expected_loglik_norm_is_graph_average():
    rng = np.random.default_rng(8)
    c = Configuration(R2, rng.normal(size=(6, 2)))
    truth = EdgeProbMatrix.from_config(c, W)
    expected = expected_loglik_norm(c, truth, W)
    draws = np.array([loglik_norm(c, generate_graph(c, W, rng), W) for _ in range(100_000)])
    sigma = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - expected) <= 3 * sigma


def test_kl_examples():
    ps = EdgeProbMatrix(np.array([[0, 0.5], [0.5, 0]]))
    p = EdgeProbMatrix(np.array([[0, 0.25], [0.25, 0]]))
    H, D = entropy_kl_decompose(ps, p)
    assert D == pytest.approx(0.143841036225890464 / 8, rel=1e-12)
    assert H == pytest.approx(math.log(2) / 8, rel=1e-14)
    assert entropy_kl_decompose(ps, ps)[1] == 0.0
    assert entropy_kl_decompose(EdgeProbMatrix(np.zeros((1, 1))), EdgeProbMatrix(np.zeros((1, 1)))) == (0.0, 0.0)


def test_kl_infinite_when_model_misses_support():
    ps = EdgeProbMatrix(np.array([[0, 0.5], [0.5, 0]]))
    p = EdgeProbMatrix(np.array([[0, 1.0], [1.0, 0]]))
    with pytest.warns(LogZeroWarning):
        assert entropy_kl_decompose(ps, p)[1] == math.inf


@given(st.integers(2, 12), st.integers(0, 2 ** 32 - 1))
def test_crossentropy_decomposition(n, seed):
    rng = np.random.default_rng(seed)
    ps, p = EdgeProbMatrix(_sym(n, rng)), EdgeProbMatrix(_sym(n, rng, 1e-6, 1 - 1e-6))
    H, D = entropy_kl_decompose(ps, p)
    assert D >= -1e-15
    assert -expected_loglik_norm_probs(ps, p) == pytest.approx(H + D, abs=1e-10)


def test_edge_prob_matrix_validation():
    with pytest.raises(UsageError):
        EdgeProbMatrix(np.array([[0, 1.5], [1.5, 0]]))
    with pytest.raises(UsageError):
        EdgeProbMatrix(np.array([[0, 0.1], [0.2, 0]]))


def test_edge_prob_logs_are_accurate_in_the_tail():
    c = Configuration(R2, [[0.0, 0.0], [30.0, 0.0]])
    pi = EdgeProbMatrix.from_config(c, W)
    assert pi.log_p1[0, 1] == pytest.approx(-2 * (30 - math.log(2)), rel=1e-12)


def test_dump_pair_terms(tmp_path, rng):
    c = Configuration(R2, rng.normal(size=(4, 2)))
    G = generate_graph(c, W, rng)
    path = tmp_path / "terms.csv"
    dump_pair_terms(path, c, G, W)
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "p,q,dist,prob,edge,term,weight" and len(rows) == 7
    total = sum(float(r.split(",")[5]) for r in rows[1:])
    assert total == pytest.approx(loglik(c, G, W), rel=1e-12)
