"""Benchmark and hard-instance generators.

An ``InstanceSpec`` is plain data (JSON round-trips exactly); the agent
factory, initial cohort and the public policy environment are rebuilt from
it on demand.  Latent quantities that define a construction (pivotal signs,
block coins) are drawn once at generation from ``seed`` and stored.
"""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .exceptions import InvalidModelError, InvalidParameterError
from .population import AgentPattern, AgentProfile, ArrivalClass, LifetimeLaw
from .policy import PolicyEnv
from .rewards import (
    BernoulliNoise,
    ClusteredModel,
    GaussianNoise,
    LinearModel,
    LogisticLink,
    NonlinearModel,
    RewardModel,
    TabularModel,
    model_from_dict,
)
from .transfer import linear_neighbor_radius

KINDS = ("tabular", "pivotal", "zero_knowledge_blocks", "stable_pair", "clustered", "linear")
BACKGROUND = 0.5
MAX_FEATURE_ATTEMPTS = 1000


@dataclass(frozen=True, eq=False)
class InstanceSpec:
    name: str
    kind: str
    K: int
    T: int
    M_0: int
    pattern: AgentPattern
    model: RewardModel
    transfer_mode: str = "zero_knowledge"
    latent: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown instance kind {self.kind!r}")
        for name in ("K", "T"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidParameterError(f"{name} must be a positive integer, got {v!r}")
        if int(self.M_0) != self.M_0 or self.M_0 < 0:
            raise InvalidParameterError(f"M_0 must be a nonnegative integer, got {self.M_0!r}")
        if self.model.K != self.K:
            raise InvalidModelError(f"model has K={self.model.K}, instance has K={self.K}")

    # ---- serialization
    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "K": self.K,
            "T": self.T,
            "M_0": self.M_0,
            "seed": self.seed,
            "transfer_mode": self.transfer_mode,
            "pattern": self.pattern.to_dict(),
            "model": self.model.to_dict(),
            "latent": self.latent,
            "params": self.params,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "InstanceSpec":
        try:
            spec = cls(
                name=d["name"], kind=d["kind"], K=d["K"], T=d["T"], M_0=d["M_0"],
                pattern=AgentPattern.from_dict(d["pattern"]), model=model_from_dict(d["model"]),
                transfer_mode=d.get("transfer_mode", "zero_knowledge"),
                latent=d.get("latent", {}), params=d.get("params", {}), seed=d.get("seed", 0),
            )
        except KeyError as e:
            raise InvalidParameterError(f"instance is missing field {e.args[0]!r}") from None
        spec.validate()
        return spec

    @classmethod
    def from_json(cls, text: str) -> "InstanceSpec":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "InstanceSpec":
        return cls.from_json(Path(path).read_text())

    def with_horizon(self, T: int) -> "InstanceSpec":
        return replace(self, T=int(T))

    # ---- runtime pieces
    def initial_labels(self) -> Optional[list]:
        comp = self.params.get("composition")
        if comp is None:
            return None
        return [str(c) for c, n in enumerate(comp) for _ in range(n)]

    def agent_factory(self):
        return _FACTORIES[self.kind](self)

    def policy_env(self) -> PolicyEnv:
        source = None
        links = None
        if self.kind == "linear":
            source = EffectiveInfoSource.from_spec(self)
            if isinstance(self.model, NonlinearModel):
                links = self.model.links
        return PolicyEnv(
            K=self.K, T=self.T, transfer_mode=self.transfer_mode,
            n_clusters=getattr(self.model, "C", 0), sigma=self.model.noise.subgaussian,
            delta=self.params.get("delta", 0.05), neighbor_source=source, links=links,
        )

    def validate(self, n_agents: int = 50) -> None:
        """Re-check that generated agents carry valid means consistent with the model."""
        factory = self.agent_factory()
        rng = np.random.default_rng(self.seed)
        labels = self.initial_labels()
        table = getattr(self.model, "table", None)
        if table is not None:
            n_agents = 0
            for aid in sorted(table)[: self.M_0]:
                self._check_agent(factory(aid, 0, None, rng))
        for aid in range(min(self.M_0, n_agents)):
            self._check_agent(factory(aid, 0, None if labels is None else labels[aid], rng))
        if self.pattern.kind == "schedule":
            n_agents = min(n_agents, sum(self.pattern.arrivals))
        classes = self.pattern.classes or (ArrivalClass(0.0),)
        for k in range(n_agents):
            label = classes[k % len(classes)].label
            self._check_agent(factory(self.M_0 + k, 1 + k % self.T, label, rng))

    def _check_agent(self, agent: AgentProfile) -> None:
        mu = self.model.means(agent)
        if not np.allclose(mu, agent.mean_vector, rtol=0, atol=1e-12):
            raise InvalidModelError(f"agent {agent.id}: profile means disagree with the model")


# ---- factories

def _tabular_factory(spec: InstanceSpec):
    table = spec.model.table
    low, high = spec.params.get("low", 0.0), spec.params.get("high", 1.0)

    def make(aid, t, label, rng):
        if table is not None:
            if aid not in table:
                raise InvalidModelError(f"agent {aid} has no row in the tabular model")
            mu = table[aid]
        else:
            mu = rng.uniform(low, high, spec.K)
        return AgentProfile(aid, t, mu, label=label)

    return make


def _pivotal_factory(spec: InstanceSpec):
    signs = spec.latent["signs"]
    P = spec.latent["P"]
    half = np.full(2, 0.5)

    def make(aid, t, label, rng):
        if t == 0:
            return AgentProfile(aid, 0, half)
        k = aid - spec.M_0
        mu = np.array([0.5 + P[k], 0.5]) if signs[k] > 0 else np.array([0.5, 0.5 + P[k]])
        return AgentProfile(aid, t, mu, entry_estimates=half, certificate=P[k], label="pivotal")

    return make


def _blocks_factory(spec: InstanceSpec):
    Z = spec.latent["Z"]
    H0, D = spec.params["H0"], spec.params["Delta"]
    back = np.full(2, BACKGROUND)

    def make(aid, t, label, rng):
        if label != "informative":
            return AgentProfile(aid, t, back, label=label)
        z = Z[(t - 1) // H0]
        mu = np.array([0.5 + D, 0.5]) if z == 0 else np.array([0.5, 0.5 + D])
        return AgentProfile(aid, t, mu, label=label)

    return make


def _cluster_factory(spec: InstanceSpec):
    model = spec.model

    def make(aid, t, label, rng):
        c = int(label) if label is not None else 0
        return AgentProfile(aid, t, model.thetas[c], cluster=c, label=label)

    return make


def sample_features(kind: str, d: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-ball features; ``orthant`` restricts to nonnegative coordinates."""
    z = rng.standard_normal(d)
    if kind == "orthant":
        z = np.abs(z)
    elif kind != "ball":
        raise InvalidParameterError(f"unknown feature sampler {kind!r}")
    return z / np.linalg.norm(z) * rng.random() ** (1.0 / d)


def _linear_factory(spec: InstanceSpec):
    model = spec.model
    sampler = spec.params.get("features", "orthant")
    d = spec.params["d"]

    def make(aid, t, label, rng):
        for _ in range(MAX_FEATURE_ATTEMPTS):
            x = sample_features(sampler, d, rng)
            mu = model.thetas @ x if isinstance(model, LinearModel) else None
            if mu is None or (mu.min() >= 0 and mu.max() <= 1):
                probe = AgentProfile(aid, t, np.zeros(spec.K), features=x)
                return AgentProfile(aid, t, model.means(probe), features=x, label=label)
        raise InvalidModelError(f"no in-range features after {MAX_FEATURE_ATTEMPTS} attempts")

    return make


_FACTORIES = {
    "tabular": _tabular_factory,
    "pivotal": _pivotal_factory,
    "zero_knowledge_blocks": _blocks_factory,
    "stable_pair": _cluster_factory,
    "clustered": _cluster_factory,
    "linear": _linear_factory,
}


class EffectiveInfoSource:
    """Continuing agents' parameter estimates under an effective-sample regime.

    At round t every continuing neighbor holds N_eff = c_gamma * t**gamma
    effective samples per arm; its estimate is the true parameter plus
    Gaussian error with per-coordinate sd ``sigma / sqrt(lam + kappa N_eff)``,
    and it reports the radius ``beta_T / sqrt(lam + kappa N_eff)``.
    """

    def __init__(self, thetas, sigma, T, delta, lam=1.0, S=1.0, kappa=1.0, c_gamma=1.0, gamma=1.0):
        self.thetas = np.asarray(thetas, dtype=float)
        self.K, self.d = self.thetas.shape
        self.sigma, self.T, self.delta = sigma, T, delta
        self.lam, self.S, self.kappa = lam, S, kappa
        self.c_gamma, self.gamma = c_gamma, gamma

    @classmethod
    def from_spec(cls, spec: InstanceSpec) -> "EffectiveInfoSource":
        p = spec.params
        return cls(spec.model.thetas, spec.model.noise.subgaussian, spec.T, p.get("delta", 0.05),
                   p.get("lam", 1.0), p.get("S", 1.0), p.get("kappa", 1.0),
                   p.get("c_gamma", 1.0), p["gamma"])

    def n_eff(self, t: int) -> float:
        return self.c_gamma * float(t) ** self.gamma

    def radius(self, t: int) -> float:
        return float(linear_neighbor_radius(self.n_eff(t), self.sigma, self.d, self.K, self.T,
                                            self.delta, self.lam, self.S, self.kappa))

    def __call__(self, t: int, neighbor_ids, rng: np.random.Generator):
        J = len(neighbor_ids)
        sd = self.sigma / math.sqrt(self.lam + self.kappa * self.n_eff(t))
        thetas = self.thetas + sd * rng.standard_normal((J, self.K, self.d))
        return thetas, np.full(J, self.radius(t))


# ---- generators

def gen_random_tabular(K: int, T: int, M_0: int, arrival_rate: float, departure_rate: float = 0.0,
                       low: float = 0.0, high: float = 1.0, noise=None, name: str = "random_tabular",
                       seed: int = 0) -> InstanceSpec:
    """Each agent draws its means uniformly from [low, high]^K."""
    if not 0 <= low <= high <= 1:
        raise InvalidParameterError("need 0 <= low <= high <= 1")
    return InstanceSpec(name, "tabular", K, T, M_0, AgentPattern.poisson(arrival_rate, departure_rate),
                        TabularModel(K, noise or BernoulliNoise()),
                        params={"low": low, "high": high}, seed=seed)


def gen_pivotal(T: int, arrival_schedule: Sequence[int], P_schedule, M_0: int = 2,
                balance: str = "transient", seed: int = 0, noise=None) -> InstanceSpec:
    """Arrivals whose unknown configuration decides the optimal arm.

    Arrival k has means (1/2 + P_k, 1/2) or (1/2, 1/2 + P_k) by a fair coin,
    and enters with estimates (1/2, 1/2) certified at P_k.  Everyone else has
    means (1/2, 1/2).  With ``balance="transient"`` each arrival stays one
    round, so the population an arrival joins is always exactly balanced;
    ``balance="none"`` keeps arrivals forever.
    """
    sched = [int(a) for a in arrival_schedule][:T]
    n = sum(sched)
    P = [float(P_schedule)] * n if np.isscalar(P_schedule) else [float(p) for p in P_schedule]
    if len(P) != n:
        raise InvalidParameterError(f"P schedule has {len(P)} entries for {n} arrivals")
    if any(not 0 < p <= 0.5 for p in P):
        raise InvalidParameterError("every P must lie in (0, 1/2]")
    if balance not in ("transient", "none"):
        raise InvalidParameterError(f"unknown balance mode {balance!r}")
    rng = np.random.default_rng(seed)
    signs = [1 if s else -1 for s in (rng.random(n) < 0.5)]
    life = LifetimeLaw.fixed(1) if balance == "transient" else None
    return InstanceSpec("pivotal", "pivotal", 2, T, M_0, AgentPattern.schedule(sched, (), life),
                        TabularModel(2, noise or BernoulliNoise()), "pretrained",
                        latent={"signs": signs, "P": P}, params={"balance": balance}, seed=seed)


def flip_signs(spec: InstanceSpec) -> InstanceSpec:
    latent = dict(spec.latent, signs=[-s for s in spec.latent["signs"]])
    return replace(spec, latent=latent)


def gen_zero_knowledge_blocks(H0: int, lam_I: float, lam_O: float, q: float, Delta: float, T: int,
                              M_0: int = 10, q_O: float = 0.1, seed: int = 0, noise=None) -> InstanceSpec:
    """Blocks of H0 rounds with one latent fair coin each.

    Informative agents (Poisson lam_I, geometric lifetimes with parameter q)
    arriving in block s have means (1/2 + Delta, 1/2) or (1/2, 1/2 + Delta) by
    that block's coin; ordinary agents (Poisson lam_O, geometric q_O) and the
    initial cohort have means (1/2, 1/2).  Arrivals get no prior knowledge.
    """
    if int(H0) != H0 or H0 < 2:
        raise InvalidParameterError("H0 must be an integer >= 2")
    if not 0 < q < 1 or not 0 < q_O < 1:
        raise InvalidParameterError("lifetime parameters must lie in (0,1)")
    if not 0 <= Delta <= 0.5:
        raise InvalidParameterError("Delta must lie in [0, 1/2]")
    if lam_I <= 0 or lam_O < 0:
        raise InvalidParameterError("need lam_I > 0 and lam_O >= 0")
    n_blocks = -(-T // H0)
    Z = np.random.default_rng(seed).integers(0, 2, n_blocks).tolist()
    pattern = AgentPattern.poisson_classes([
        ArrivalClass(float(lam_I), "informative", LifetimeLaw.geometric(q)),
        ArrivalClass(float(lam_O), "ordinary", LifetimeLaw.geometric(q_O)),
    ])
    return InstanceSpec("zero_knowledge_blocks", "zero_knowledge_blocks", 2, T, M_0, pattern,
                        TabularModel(2, noise or BernoulliNoise()), "zero_knowledge",
                        latent={"Z": Z},
                        params={"H0": int(H0), "lam_I": lam_I, "lam_O": lam_O, "q": q, "q_O": q_O,
                                "Delta": Delta},
                        seed=seed)


def good_blocks(spec: InstanceSpec, agents, T: Optional[int] = None) -> np.ndarray:
    """Per block: exactly one informative arrival, at the block's first round,
    staying exactly H0 rounds.  Read from the realized agent profiles."""
    H0 = spec.params["H0"]
    T = spec.T if T is None else T
    n_blocks = T // H0
    count = np.zeros(n_blocks, dtype=np.int64)
    hit = np.zeros(n_blocks, dtype=bool)
    for a in agents:
        if a.label != "informative" or a.arrival_time < 1:
            continue
        s = (a.arrival_time - 1) // H0
        if s >= n_blocks:
            continue
        count[s] += 1
        hit[s] = (a.arrival_time - 1) % H0 == 0 and a.lifetime == H0
    return (count == 1) & hit


def gen_stable_pair(Delta: float, T: int = 1000, M_0: int = 10, arrival_rate: float = 1.0,
                    noise=None) -> tuple:
    """Two homogeneous instances: arm means (1/2 + Delta, 1/2) and (1/2 + Delta, 1/2 + 2 Delta)."""
    if not 0 < Delta < 0.25:
        raise InvalidParameterError("Delta must lie in (0, 1/4)")
    out = []
    for tag, second in (("nu", 0.5), ("nu_prime", 0.5 + 2 * Delta)):
        model = ClusteredModel([[0.5 + Delta, second]], noise or BernoulliNoise())
        pattern = AgentPattern.poisson_classes([ArrivalClass(float(arrival_rate), "0")])
        out.append(InstanceSpec(f"stable_pair_{tag}", "stable_pair", 2, T, M_0, pattern, model, "cluster",
                                latent={"variant": tag}, params={"composition": [M_0], "Delta": Delta}))
    return tuple(out)


def gen_clustered(C: int, thetas, rates: Sequence[float], composition: Sequence[int], T: int,
                  noise=None, delta: float = 0.05, name: str = "clustered", seed: int = 0) -> InstanceSpec:
    """Cluster-labeled arrivals (one Poisson class per cluster); clusters absent
    from ``composition`` start unseen."""
    th = np.asarray(thetas, dtype=float)
    if th.shape[0] != C:
        raise InvalidParameterError(f"theta table has {th.shape[0]} rows for C={C}")
    if len(rates) != C or any(r <= 0 for r in rates):
        raise InvalidParameterError("need one positive rate per cluster")
    if len(composition) != C or any(int(n) != n or n < 0 for n in composition):
        raise InvalidParameterError("composition needs one nonnegative count per cluster")
    model = ClusteredModel(th, noise or BernoulliNoise())
    pattern = AgentPattern.poisson_classes([ArrivalClass(float(r), str(c)) for c, r in enumerate(rates)])
    return InstanceSpec(name, "clustered", th.shape[1], T, int(sum(composition)), pattern, model, "cluster",
                        params={"composition": [int(n) for n in composition], "delta": delta}, seed=seed)


CLUSTERED_STABLE_THETAS = [[0.6, 0.3], [0.5, 0.2]]


def clustered_stable(T: int, M_0: int = 200, noise=None, delta: float = 0.05) -> InstanceSpec:
    """Two clusters that agree arm 1 is best; every agent prefers arm 1 by 0.3, total arrival rate 1."""
    return gen_clustered(2, CLUSTERED_STABLE_THETAS, [0.5, 0.5], [M_0 // 2, M_0 - M_0 // 2], T,
                         noise=noise, delta=delta, name="clustered_stable")


def population_gap(spec: InstanceSpec) -> float:
    """Gap of the arrival-weighted mean vector v(i) of a clustered instance."""
    rates = np.array([c.rate for c in spec.pattern.classes])
    v = (rates / rates.sum()) @ spec.model.thetas
    top = np.sort(v)[::-1]
    return float(top[0] - top[1]) if top.size > 1 else math.inf


def first_appearances(arrival_counts: np.ndarray) -> np.ndarray:
    """First round (1-based) each class has an arrival; ``inf`` if never. Input is T x C."""
    counts = np.asarray(arrival_counts)
    out = np.full(counts.shape[1], np.inf)
    for c in range(counts.shape[1]):
        hit = np.flatnonzero(counts[:, c] > 0)
        if hit.size:
            out[c] = hit[0] + 1
    return out


def gen_linear(d: int, thetas, gamma: float, T: int, M_0: int = 5, arrival_rate: float = 1.0,
               features: str = "orthant", sigma: float = 0.1, lam: float = 1.0, kappa: float = 1.0,
               c_gamma: float = 1.0, delta: float = 0.05, link: Optional[str] = None,
               seed: int = 0) -> InstanceSpec:
    """Agents with unit-ball features; arrivals inherit neighbor parameter estimates
    whose effective sample size grows like c_gamma t**gamma."""
    th = np.asarray(thetas, dtype=float)
    if th.ndim != 2 or th.shape[1] != d:
        raise InvalidParameterError(f"theta table must be K x {d}")
    if gamma <= 0:
        raise InvalidParameterError("gamma must be positive")
    noise = GaussianNoise(sigma)
    if link is None:
        model = LinearModel(th, noise)
        mode = "linear"
    elif link == "logistic":
        model = NonlinearModel(th, noise, LogisticLink())
        mode = "nonlinear"
    else:
        raise InvalidParameterError(f"unknown link {link!r}")
    S = float(np.linalg.norm(th, axis=1).max())
    spec = InstanceSpec("linear" if link is None else "nonlinear", "linear", th.shape[0], T, M_0,
                        AgentPattern.poisson(arrival_rate), model, mode,
                        params={"d": d, "gamma": gamma, "features": features, "lam": lam,
                                "kappa": kappa, "c_gamma": c_gamma, "S": S, "delta": delta},
                        seed=seed)
    spec.validate()
    return spec


def _noise(kind: Optional[str] = None, sigma: Optional[float] = None):
    if kind in (None, "bernoulli"):
        if sigma is not None:
            raise InvalidParameterError("sigma only applies to gaussian noise")
        return BernoulliNoise()
    if kind == "gaussian":
        return GaussianNoise(0.5 if sigma is None else sigma)
    raise InvalidParameterError(f"unknown noise kind {kind!r}")


def _stable_pair_one(Delta: float, T: int = 1000, M_0: int = 10, arrival_rate: float = 1.0,
                     variant: str = "nu", noise=None) -> InstanceSpec:
    nu, nu_prime = gen_stable_pair(Delta, T, M_0, arrival_rate, noise)
    if variant not in ("nu", "nu_prime"):
        raise InvalidParameterError(f"variant must be 'nu' or 'nu_prime', got {variant!r}")
    return nu if variant == "nu" else nu_prime


# name -> (generator, {parameter: type tag}); tags are "int", "float", "str" or "json"
GENERATORS = {
    "tabular": (gen_random_tabular, {"K": "int", "T": "int", "M_0": "int", "arrival_rate": "float",
                                     "departure_rate": "float", "low": "float", "high": "float",
                                     "name": "str", "seed": "int"}),
    "pivotal": (gen_pivotal, {"T": "int", "arrival_schedule": "json", "P_schedule": "json", "M_0": "int",
                              "balance": "str", "seed": "int"}),
    "zero_knowledge_blocks": (gen_zero_knowledge_blocks, {"H0": "int", "lam_I": "float", "lam_O": "float",
                                                          "q": "float", "Delta": "float", "T": "int",
                                                          "M_0": "int", "q_O": "float", "seed": "int"}),
    "stable_pair": (_stable_pair_one, {"Delta": "float", "T": "int", "M_0": "int", "arrival_rate": "float",
                                       "variant": "str"}),
    "clustered": (gen_clustered, {"C": "int", "thetas": "json", "rates": "json", "composition": "json",
                                  "T": "int", "delta": "float", "name": "str", "seed": "int"}),
    "clustered_stable": (clustered_stable, {"T": "int", "M_0": "int", "delta": "float"}),
    "linear": (gen_linear, {"d": "int", "thetas": "json", "gamma": "float", "T": "int", "M_0": "int",
                            "arrival_rate": "float", "features": "str", "sigma": "float", "lam": "float",
                            "kappa": "float", "c_gamma": "float", "delta": "float", "link": "str",
                            "seed": "int"}),
}
NOISY = ("tabular", "pivotal", "zero_knowledge_blocks", "stable_pair", "clustered", "clustered_stable")


def parse_param(tag: str, text: str):
    """Convert one textual generator parameter; raises ValueError on a bad value."""
    if tag == "int":
        return int(text)
    if tag == "float":
        return float(text)
    if tag == "json":
        return json.loads(text)
    return text


def generate(kind: str, params: dict) -> InstanceSpec:
    """Build an instance from textual ``params`` (values already converted are passed through).

    ``noise`` (bernoulli|gaussian) and ``sigma`` select the reward noise of
    every family except ``linear``, whose Gaussian sd is its own ``sigma``.
    """
    if kind not in GENERATORS:
        raise InvalidParameterError(f"unknown instance kind {kind!r}; choose from {sorted(GENERATORS)}")
    fn, schema = GENERATORS[kind]
    params = dict(params)
    kwargs = {}
    if kind in NOISY:
        noise_kind = params.pop("noise", None)
        sigma = params.pop("sigma", None)
        kwargs["noise"] = _noise(noise_kind, None if sigma is None else float(sigma))
    for key, value in params.items():
        if key not in schema:
            raise InvalidParameterError(f"unknown parameter {key!r} for instance kind {kind!r}")
        if isinstance(value, str):
            try:
                value = parse_param(schema[key], value)
            except ValueError as e:
                raise InvalidParameterError(f"parameter {key!r}: cannot read {value!r} as {schema[key]}") from e
        kwargs[key] = value
    try:
        return fn(**kwargs)
    except TypeError as e:
        raise InvalidParameterError(f"{kind}: {e}") from None
