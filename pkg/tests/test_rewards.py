import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from openmab.exceptions import (EmptyPopulationError, InvalidModelError, LemmaViolation, ModelMismatchError)
from openmab.population import AgentProfile, AgentTable, PopulationSnapshot
from openmab.rewards import (BernoulliNoise, ClusteredModel, GaussianNoise, GlobalValues, LinearModel,
                             LogisticLink, NonlinearModel, TabularModel, check_one_step_stability,
                             check_perturbation, global_values, load_tabular, mean_of, model_from_dict,
                             sample_reward)


def snapshot(ids, n_arrivals=0, t=1):
    return PopulationSnapshot(t, np.array(ids, dtype=np.int64), n_arrivals, np.empty(0, dtype=np.int64))


def table(*means):
    tab = AgentTable()
    for i, mu in enumerate(means):
        tab.add(AgentProfile(i, 0, mu))
    return tab


def test_mean_lookups():
    agent = AgentProfile(0, 0, [0.7, 0.1], cluster=1)
    assert mean_of(ClusteredModel([[0.2, 0.3], [0.7, 0.1]]), agent, 0) == 0.7
    x = AgentProfile(1, 0, [0.4, 0.9], features=[1.0, 0.0])
    assert LinearModel([[0.4, 0.9], [0.9, 0.4]]).mean_of(x, 0) == 0.4
    z = AgentProfile(2, 0, [0.5], features=[0.0, 1.0])
    assert NonlinearModel([[3.0, 0.0]]).mean_of(z, 0) == 0.5


def test_model_mismatch():
    with pytest.raises(ModelMismatchError):
        ClusteredModel([[0.5]]).means(AgentProfile(0, 0, [0.5]))
    with pytest.raises(ModelMismatchError):
        LinearModel([[0.5]]).means(AgentProfile(0, 0, [0.5]))
    with pytest.raises(InvalidModelError):
        ClusteredModel([[1.5]])


def test_degenerate_gaussian_noise():
    rng = np.random.default_rng(0)
    mu = np.array([0.1, 0.5, 0.9])
    assert np.allclose(GaussianNoise(1e-12).sample(mu, rng), mu, atol=1e-9)


def test_bernoulli_mean():
    rng = np.random.default_rng(1)
    r = BernoulliNoise().sample(np.full(100_000, 0.3), rng)
    assert set(np.unique(r)) <= {0.0, 1.0}
    assert abs(r.mean() - 0.3) < 0.01


def test_gaussian_sd():
    rng = np.random.default_rng(2)
    r = GaussianNoise(0.1).sample(np.full(100_000, 0.5), rng)
    assert abs(r.std() - 0.1) < 0.005


def test_sample_reward_is_scalar():
    model = TabularModel(2)
    assert sample_reward(model, AgentProfile(0, 0, [1.0, 0.0]), 0, np.random.default_rng(0)) == 1.0


def test_two_agent_global_values():
    gv = global_values(TabularModel(2), snapshot([0, 1]), table([0.2, 0.8], [0.4, 0.6]))
    assert np.allclose(gv.unnormalized, [0.6, 1.4])
    assert np.allclose(gv.normalized, [0.3, 0.7])
    assert gv.optimal_arm == 1
    assert gv.gap == pytest.approx(0.4)


def test_homogeneous_values():
    gv = global_values(TabularModel(3), snapshot([0, 1, 2]), table(*[[0.1, 0.5, 0.2]] * 3))
    assert np.allclose(gv.normalized, [0.1, 0.5, 0.2])


def test_brute_force_summation():
    rng = np.random.default_rng(3)
    means = rng.random((5, 4))
    tab = table(*means)
    gv = global_values(TabularModel(4), snapshot(range(5)), tab)
    brute = [0.0] * 4
    for i in range(4):
        for m in range(5):
            brute[i] += float(means[m, i])
    # summation order may differ from numpy's; allow the last bit
    assert np.allclose(gv.unnormalized, brute, rtol=0, atol=1e-15)


def test_empty_population():
    with pytest.raises(EmptyPopulationError):
        global_values(TabularModel(2), snapshot([]), AgentTable())


def test_lemma_checks_fire_on_bad_inputs():
    prev = GlobalValues.from_sums(1, np.array([0.9, 0.1]), 1)
    cur = GlobalValues.from_sums(2, np.array([0.9, 1.9]), 2)
    with pytest.raises(LemmaViolation):
        check_perturbation(prev, cur, 0)
    big = GlobalValues.from_sums(1, np.array([90.0, 10.0]), 100)
    moved = GlobalValues.from_sums(2, np.array([10.0, 90.0]), 101)
    with pytest.raises(LemmaViolation) as e:
        check_one_step_stability(big, moved, 1)
    assert e.value.t == 2


def test_model_dict_round_trip():
    for model in (TabularModel(2, GaussianNoise(0.3)), TabularModel(2, table={0: [0.1, 0.2]}),
                  LinearModel([[0.1, 0.2]]), NonlinearModel([[0.1, 0.2]]), ClusteredModel([[0.3, 0.4]])):
        assert model_from_dict(model.to_dict()).to_dict() == model.to_dict()


def test_load_tabular(tmp_path):
    p = tmp_path / "means.csv"
    p.write_text("# agent,mu1,mu2\n0,0.1,0.2\n3,0.5,0.5\n")
    model = load_tabular(p)
    assert model.mean_of(AgentProfile(3, 0, [0.5, 0.5]), 1) == 0.5
    p.write_text("0,0.1,0.2\n0,0.3,0.3\n")
    with pytest.raises(InvalidModelError):
        load_tabular(p)


unit = arrays(float, 3, elements=st.floats(0, 1))


@settings(max_examples=200, deadline=None)
@given(arrays(float, (2, 3), elements=st.floats(0, 0.577)), arrays(float, (2, 3), elements=st.floats(0, 0.577)),
       unit)
def test_linear_cauchy_schwarz(theta, theta_hat, x):
    if np.linalg.norm(x) > 1:
        x = x / np.linalg.norm(x)
    agent = AgentProfile(0, 0, theta @ x, features=x)
    diff = np.abs(LinearModel(theta_hat).means(agent) - LinearModel(theta).means(agent))
    assert np.all(diff <= np.linalg.norm(theta_hat - theta, axis=1) + 1e-12)


@settings(max_examples=200, deadline=None)
@given(arrays(float, (4, 3), elements=st.floats(0, 1)), st.integers(1, 4))
def test_argmax_agreement_and_normalization(means, M):
    V = means[:M].sum(axis=0)
    gv = GlobalValues.from_sums(1, V, M)
    assert np.array_equal(gv.normalized, V / M)
    assert int(np.argmax(gv.unnormalized)) == int(np.argmax(gv.normalized)) == gv.optimal_arm


@settings(max_examples=200, deadline=None)
@given(arrays(float, (6, 2), elements=st.floats(0, 1)), st.integers(1, 5), st.integers(0, 5))
def test_perturbation_bound_on_random_batches(means, M_prev, A):
    A = min(A, 6 - M_prev)
    prev = GlobalValues.from_sums(1, means[:M_prev].sum(axis=0), M_prev)
    cur = GlobalValues.from_sums(2, means[:M_prev + A].sum(axis=0), M_prev + A)
    check_perturbation(prev, cur, A)
    check_one_step_stability(prev, cur, A)


@settings(max_examples=100, deadline=None)
@given(arrays(float, 2, elements=st.floats(-3, 3)), arrays(float, 2, elements=st.floats(-3, 3)),
       arrays(float, 2, elements=st.floats(-1, 1)))
def test_logistic_lipschitz(a, b, x):
    if np.linalg.norm(x) > 1:
        x = x / np.linalg.norm(x)
    f = LogisticLink()
    assert abs(f(x, a) - f(x, b)) <= f.lipschitz * np.linalg.norm(a - b) + 1e-15
