import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from openmab.exceptions import InvalidParameterError, InvalidWeightsError, ModelMismatchError
from openmab.population import AgentProfile
from openmab.rewards import LogisticLink
from openmab.transfer import (ClusterStats, cluster_inherit, cluster_radius, linear_neighbor_radius,
                              linear_param_transfer, nonlinear_param_transfer, pretrained_init, pretraining_error,
                              round_pretraining_error, zero_knowledge_init)

# 0.5 * sqrt(2 ln(8000) / 50), mpmath at 30 digits
CLUSTER_RADIUS_EXAMPLE = 0.299786537734134635712648837081


def test_zero_knowledge():
    out = zero_knowledge_init(3)
    assert out.estimates.tolist() == [0, 0, 0] and out.certificate == 1.0
    assert pretraining_error(out, [0.7, 0.2, 0.0])[0] == 0.7
    P, D = pretraining_error(out, [0.0, 0.0, 0.0])
    assert P == 0 and D == math.inf
    assert out.counts_init.tolist() == [0, 0, 0] and out.radii_init.tolist() == [1, 1, 1]


def test_pretrained():
    P, D = pretraining_error(pretrained_init([0.3, 0.4], 0.0), [0.3, 0.4])
    assert (P, D) == (0.0, math.inf)
    out = pretrained_init([0.5, 0.5], 0.1)
    P, _ = pretraining_error(out, [0.6, 0.5])
    assert P == pytest.approx(0.1) and P <= out.certificate + 1e-12
    bad = pretrained_init([0.5, 0.5], 0.05)
    assert pretraining_error(bad, [0.6, 0.5])[0] > bad.certificate
    assert pretrained_init([0.5], 3.0).certificate == 1.0
    with pytest.raises(InvalidParameterError):
        pretrained_init([0.5], -0.1)


def test_linear_examples():
    theta = np.array([[0.4, 0.9], [0.2, 0.1]])
    x = np.array([1.0, 0.0])
    assert pretraining_error(linear_param_transfer(x, [(theta, 0.0)]), theta @ x)[0] == 0.0
    e = np.array([[0.1, -0.05], [0.02, 0.0]])
    out = linear_param_transfer(x, [(theta + e, 0.1), (theta - e, 0.1)], [0.5, 0.5])
    assert np.allclose(out.estimates, theta @ x, rtol=0, atol=1e-15)
    err = np.array([[0.2, 0.0], [0.0, 0.2]])
    out = linear_param_transfer(x, [(theta + err, 0.2)])
    assert out.certificate == pytest.approx(0.2)
    assert pretraining_error(out, theta @ x)[0] <= 0.2 + 1e-12


def test_linear_needs_k_without_neighbors():
    assert linear_param_transfer(AgentProfile(0, 0, [0.1, 0.2], features=[0.5]), []).K == 2
    assert linear_param_transfer(np.array([0.5]), [], K=3).K == 3
    with pytest.raises(InvalidParameterError):
        linear_param_transfer(np.array([0.5]), [])
    with pytest.raises(ModelMismatchError):
        linear_param_transfer(AgentProfile(0, 0, [0.1]), [])


def test_bad_weights():
    theta = np.zeros((1, 2))
    with pytest.raises(InvalidWeightsError):
        linear_param_transfer(np.array([1.0, 0.0]), [(theta, 0.1), (theta, 0.1)], [0.7, 0.7])
    with pytest.raises(InvalidWeightsError):
        linear_param_transfer(np.array([1.0, 0.0]), [(theta, 0.1)], [0.5, 0.5])


def test_nonlinear_examples():
    theta = np.array([[0.3, -0.2]])
    x = np.array([0.6, 0.8])
    link = LogisticLink()
    assert pretraining_error(nonlinear_param_transfer(x, [(theta, 0.0)]), [link(x, theta[0])])[0] == 0.0
    rng = np.random.default_rng(0)
    for _ in range(200):
        u = rng.normal(size=2)
        d = 0.1 * u / np.linalg.norm(u)
        out = nonlinear_param_transfer(x, [(theta + d, 0.1)])
        assert out.certificate == pytest.approx(0.025)
        assert abs(out.estimates[0] - link(x, theta[0])) <= 0.025 + 1e-15
    assert nonlinear_param_transfer(x, [(theta + 0.3, 0.5)], lipschitz=0.0).certificate == 0.0


def test_cluster_examples():
    stats = ClusterStats(2, 2)
    assert cluster_inherit(1, stats, 0.5, 0.1, 100).mode_used == "zero_knowledge"
    stats.counts[0] = [50, 50]
    stats.sums[0] = [25.0, 10.0]
    out = cluster_inherit(0, stats, 0.5, 0.1, 100)
    assert out.estimates.tolist() == [0.5, 0.2]
    assert abs(out.certificate - CLUSTER_RADIUS_EXAMPLE) < 1e-12
    assert cluster_radius([[50]], 0.5, 0.1, 100, 2, 2)[0, 0] == pytest.approx(CLUSTER_RADIUS_EXAMPLE, abs=1e-12)
    stats.counts[1] = [10**12, 10**12]
    stats.sums[1] = [0.3 * 10**12, 0.6 * 10**12]
    out = cluster_inherit(1, stats, 0.5, 0.1, 100)
    assert out.certificate < 1e-5 and np.allclose(out.estimates, [0.3, 0.6])


def test_cluster_partial_observation_falls_back_per_arm():
    stats = ClusterStats(1, 2)
    stats.counts[0] = [40, 0]
    stats.sums[0] = [20.0, 0.0]
    out = cluster_inherit(0, stats, 0.5, 0.05, 100)
    assert out.estimates.tolist() == [0.5, 0.0] and out.certificate == 1.0


def test_round_level_error():
    assert round_pretraining_error([]) == (0.0, math.inf)
    assert round_pretraining_error([0.1, 0.3, 0.2]) == (0.3, 1 / 0.3)
    P, D = pretraining_error([0.0, 0.0], [0.3, 0.9])
    assert (P, D) == (0.9, 1 / 0.9)


def test_random_ten_arm_error_matches_loop():
    rng = np.random.default_rng(7)
    est, mu = rng.random(10), rng.random(10)
    worst = 0.0
    for i in range(10):
        worst = max(worst, abs(float(est[i]) - float(mu[i])))
    assert pretraining_error(est, mu)[0] == worst


def test_linear_neighbor_radius_decreases():
    r = linear_neighbor_radius([1, 10, 100], 0.1, 2, 2, 1000, 0.05)
    assert r[0] > r[1] > r[2] > 0


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 3), st.integers(1, 4), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_honest_neighbors_give_sound_certificates(K, d, J, seed):
    rng = np.random.default_rng(seed)
    theta = rng.random((K, d))
    theta /= 2 * np.maximum(1, np.linalg.norm(theta, axis=1, keepdims=True))
    x = rng.random(d)
    x /= max(1.0, np.linalg.norm(x))
    neigh = []
    for c in rng.uniform(0, 0.4, J):
        u = rng.normal(size=(K, d))
        u *= c * rng.random((K, 1)) / np.linalg.norm(u, axis=1, keepdims=True)
        neigh.append((theta + u, c))
    w = rng.dirichlet(np.ones(J))
    out = linear_param_transfer(x, neigh, w)
    assert pretraining_error(out, theta @ x)[0] <= out.certificate + 1e-12
    out = nonlinear_param_transfer(x, neigh, w)
    truth = [LogisticLink()(x, th) for th in theta]
    assert pretraining_error(out, truth)[0] <= out.certificate + 1e-12


@settings(max_examples=150, deadline=None)
@given(arrays(float, (2, 3), elements=st.floats(0, 1)), arrays(np.int64, (2, 3), elements=st.integers(0, 500)),
       arrays(float, (2, 3), elements=st.floats(-1, 1)))
def test_honest_cluster_stats_give_sound_certificates(thetas, counts, u):
    stats = ClusterStats(2, 3)
    stats.counts[:] = counts
    stats.sums[:] = counts * (thetas + u * stats.radius(0.5, 0.05, 100))
    for c in range(2):
        out = cluster_inherit(c, stats, 0.5, 0.05, 100)
        assert pretraining_error(out, thetas[c])[0] <= out.certificate + 1e-12


@settings(max_examples=100, deadline=None)
@given(arrays(float, st.integers(1, 8), elements=st.floats(0, 1)))
def test_zero_knowledge_dominates(mu):
    out = zero_knowledge_init(mu.size)
    assert pretraining_error(out, mu)[0] <= out.certificate
