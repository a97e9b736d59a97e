import math

import numpy as np
import pytest

from openmab.exceptions import InvalidParameterError
from openmab.harness.validate import FixedArm
from openmab.instances import (InstanceSpec, clustered_stable, first_appearances, flip_signs, gen_clustered,
                               gen_linear, gen_pivotal, gen_random_tabular, gen_stable_pair,
                               gen_zero_knowledge_blocks, generate, good_blocks, parse_param, population_gap)
from openmab.metrics import bernoulli_kl, p_good
from openmab.policy import CertifiedGlobalUCB, UniformRandom
from openmab.population import PopulationProcess
from openmab.simulation import simulate
from openmab.streams import make_streams

# mpmath at 30 digits
P_GOOD = 0.0459849301464302901994404712702
KL_STABLE_PAIR = 0.0871766935723888763504603430434      # kl(0.5, 0.7)
FIRST_APPEARANCE_BOUND = 8.18868912444420136966093762613  # 2 ln 60
# exact exceedance of the bound by the max of 3 first arrivals, rate 0.5 each
EXCEED_DISCRETE = 0.0539466729948483     # arrivals counted per round: 1 - (1 - e^-4)^3
EXCEED_CONTINUOUS = 0.0491712962962963   # exponential first arrivals: 1 - (1 - 1/60)^3


def arrival_agent(spec, t=1):
    return spec.agent_factory()(spec.M_0, t, None, np.random.default_rng(0))


def test_pivotal_agent_means():
    spec = gen_pivotal(10, [1], 0.25)
    plus = spec if spec.latent["signs"][0] > 0 else flip_signs(spec)
    a = arrival_agent(plus)
    assert a.mean_vector.tolist() == [0.75, 0.5]
    assert arrival_agent(flip_signs(plus)).mean_vector.tolist() == [0.5, 0.75]
    for s in (plus, flip_signs(plus)):
        b = arrival_agent(s)
        assert np.max(np.abs(b.entry_estimates - b.mean_vector)) == 0.25 == b.certificate
    assert spec.agent_factory()(0, 0, None, None).mean_vector.tolist() == [0.5, 0.5]


@pytest.mark.parametrize("bad", [0.0, 0.6, -0.1])
def test_pivotal_rejects_bad_p(bad):
    with pytest.raises(InvalidParameterError):
        gen_pivotal(10, [1], bad)


@pytest.mark.parametrize("policy", [lambda: FixedArm(0), lambda: FixedArm(1), CertifiedGlobalUCB, UniformRandom])
def test_blind_policies_pay_half_p(policy):
    P = 0.25
    spec = gen_pivotal(1, [1], P)
    for seed in range(20):
        # the choice cannot depend on the sign, so exactly one configuration pays P
        plus = simulate(spec, policy(), seed=seed).ledger.total("r_round")
        minus = simulate(flip_signs(spec), policy(), seed=seed).ledger.total("r_round")
        assert plus + minus == pytest.approx(P, abs=1e-12)
        assert 0.5 * (plus + minus) >= 0.5 * P - 1e-12


def test_sign_flip_symmetry():
    spec = gen_pivotal(60, [1, 0, 2] * 20, 0.3, seed=3)
    for arm in (0, 1):
        a = simulate(spec, FixedArm(arm), seed=1).ledger.per_round("r_round")
        b = simulate(flip_signs(spec), FixedArm(1 - arm), seed=1).ledger.per_round("r_round")
        assert np.array_equal(a, b)


def test_p_good_example():
    assert abs(p_good(0.5, 2, 0.5) - P_GOOD) < 1e-15


def test_good_block_frequency():
    spec = gen_zero_knowledge_blocks(2, 0.5, 0.5, 0.5, 0.25, 20_000, M_0=0, seed=1)
    proc = PopulationProcess(spec.pattern, spec.M_0, spec.agent_factory(), seed=7)
    for _ in range(spec.T):
        proc.step()
    good = good_blocks(spec, proc.agents)
    assert good.size == 10_000
    # binomial 3 sigma around p_good
    assert abs(good.mean() - P_GOOD) <= 0.006


def test_degenerate_block_gap():
    spec = gen_zero_knowledge_blocks(2, 0.5, 0.5, 0.5, 0.0, 50)
    make = spec.agent_factory()
    for z in range(2):
        assert make(100 + z, 1 + 2 * z, "informative", None).mean_vector.tolist() == [0.5, 0.5]


def test_block_domain():
    with pytest.raises(InvalidParameterError):
        gen_zero_knowledge_blocks(1, 0.5, 0.5, 0.5, 0.25, 10)
    with pytest.raises(InvalidParameterError):
        gen_zero_knowledge_blocks(2, 0.5, 0.5, 1.0, 0.25, 10)


def test_stable_pair():
    nu, nu_p = gen_stable_pair(0.1)
    assert np.allclose(nu.model.thetas[0], [0.6, 0.5])
    assert np.allclose(nu_p.model.thetas[0], [0.6, 0.7])
    assert int(np.argmax(nu.model.thetas[0])) == 0 and int(np.argmax(nu_p.model.thetas[0])) == 1
    assert abs(bernoulli_kl(0.5, 0.5 + 2 * 0.1) - KL_STABLE_PAIR) < 1e-15
    for bad in (0.0, 0.25):
        with pytest.raises(InvalidParameterError):
            gen_stable_pair(bad)


def test_single_cluster_is_homogeneous():
    spec = gen_clustered(1, [[0.7, 0.2]], [1.0], [5], 50)
    res = simulate(spec, UniformRandom(), seed=0)
    means = res.agents.means_of([a.id for a in res.agents])
    assert np.all(means == [0.7, 0.2])


def test_unseen_cluster_gets_zero_knowledge():
    spec = gen_clustered(2, [[0.6, 0.3], [0.5, 0.2]], [0.5, 0.5], [4, 0], 30)
    res = simulate(spec, CertifiedGlobalUCB(), seed=2)
    first_c1 = [P for (t, aid, P, cert) in res.arrival_P if res.agents[aid].cluster == 1][0]
    certs = [cert for (t, aid, P, cert) in res.arrival_P if res.agents[aid].cluster == 1]
    assert certs[0] == 1.0 and first_c1 <= 1.0


def test_clustered_stable_gap():
    spec = clustered_stable(100)
    assert population_gap(spec) == pytest.approx(0.3)
    assert spec.params["composition"] == [100, 100]


def test_first_appearance_oracles():
    assert abs(2 * math.log(60) - FIRST_APPEARANCE_BOUND) < 1e-13
    # the bound is exact for exponential first arrivals, C P(E > b) = delta
    assert abs((1 - (1 - math.exp(-0.5 * FIRST_APPEARANCE_BOUND)) ** 3) - EXCEED_CONTINUOUS) < 1e-15
    assert EXCEED_CONTINUOUS <= 0.05
    # per-round counting rounds the first arrival up to an integer; waiting past 8.19 means no arrival in 1..8
    assert abs((1 - (1 - math.exp(-4.0)) ** 3) - EXCEED_DISCRETE) < 1e-15


def test_first_appearance_monte_carlo():
    rates = np.array([0.5, 0.5, 0.5])
    exceed_d = exceed_c = 0
    n = 4000
    for seed in range(n):
        streams = make_streams(seed)
        counts = streams.arrivals.poisson(rates, size=(40, 3))
        exceed_d += first_appearances(counts).max() > FIRST_APPEARANCE_BOUND
        exceed_c += streams.policy.exponential(1 / rates).max() > FIRST_APPEARANCE_BOUND
    sd = math.sqrt(0.05 * 0.95 / n)
    assert abs(exceed_d / n - EXCEED_DISCRETE) <= 3 * sd
    assert abs(exceed_c / n - EXCEED_CONTINUOUS) <= 3 * sd
    assert first_appearances(np.zeros((5, 2))).tolist() == [math.inf, math.inf]


def test_linear_scalar_reduces_to_tabular():
    spec = gen_linear(1, [[0.3], [0.8]], 1.0, 20)
    agent = spec.agent_factory()(0, 0, None, np.random.default_rng(0))
    x = agent.features[0]
    assert np.allclose(agent.mean_vector, [0.3 * x, 0.8 * x])
    one = spec.model.means(type(agent)(0, 0, [0.3, 0.8], features=[1.0]))
    assert one.tolist() == [0.3, 0.8]


def test_round_trip_and_revalidation(tmp_path):
    specs = [gen_random_tabular(3, 50, 4, 1.0, 0.2, seed=1), gen_pivotal(30, [1, 2, 0] * 10, 0.2, seed=2),
             gen_zero_knowledge_blocks(2, 0.5, 0.5, 0.5, 0.25, 40, seed=3), clustered_stable(40, M_0=10),
             gen_linear(2, [[0.5, 0.3], [0.2, 0.6]], 2.0, 40, seed=4),
             gen_linear(2, [[0.5, 0.3], [0.2, 0.6]], 1.0, 40, link="logistic", seed=5), *gen_stable_pair(0.1)]
    for k, spec in enumerate(specs):
        path = tmp_path / f"{k}.json"
        spec.save(path)
        again = InstanceSpec.load(path)
        assert again.to_json() == spec.to_json()
        assert path.read_text() == spec.to_json()


def test_generate_from_text():
    spec = generate("clustered", {"C": "2", "thetas": "[[0.6,0.3],[0.5,0.2]]", "rates": "[0.5,0.5]",
                                  "composition": "[2,0]", "T": "30", "noise": "gaussian", "sigma": "0.5"})
    assert spec.K == 2 and spec.M_0 == 2 and spec.model.noise.to_dict()["sigma"] == 0.5
    with pytest.raises(InvalidParameterError):
        generate("clustered", {"C": "two"})
    with pytest.raises(InvalidParameterError):
        generate("tabular", {"K": "2", "colour": "red"})
    with pytest.raises(InvalidParameterError):
        generate("spiral", {})
    with pytest.raises(InvalidParameterError):
        generate("tabular", {"K": "2"})
    assert parse_param("json", "[1, 2]") == [1, 2]
    with pytest.raises(ValueError):
        parse_param("int", "1.5")
