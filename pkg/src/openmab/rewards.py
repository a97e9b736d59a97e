"""Reward models, noise and ground-truth global values.

Everything here except the noise samplers is evaluator-side: policies never
see true means.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .exceptions import (
    EmptyPopulationError,
    InvalidModelError,
    InvalidParameterError,
    LemmaViolation,
    ModelMismatchError,
)
from .population import AgentProfile, AgentTable, PopulationSnapshot

MEAN_TOL = 1e-12


class BernoulliNoise:
    kind = "bernoulli"
    subgaussian = 0.5

    def sample(self, means: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return (rng.random(means.shape[0]) < means).astype(float)

    def to_dict(self) -> dict:
        return {"kind": "bernoulli"}


class GaussianNoise:
    kind = "gaussian"

    def __init__(self, sigma: float):
        if not np.isfinite(sigma) or sigma <= 0:
            raise InvalidParameterError(f"gaussian sigma must be > 0, got {sigma!r}")
        self.sigma = float(sigma)

    @property
    def subgaussian(self) -> float:
        return self.sigma

    def sample(self, means: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return means + self.sigma * rng.standard_normal(means.shape[0])

    def to_dict(self) -> dict:
        return {"kind": "gaussian", "sigma": self.sigma}


Noise = Union[BernoulliNoise, GaussianNoise]


def noise_from_dict(d: Optional[dict]) -> Noise:
    if d is None or d.get("kind") == "bernoulli":
        return BernoulliNoise()
    if d.get("kind") == "gaussian":
        return GaussianNoise(d["sigma"])
    raise InvalidParameterError(f"unknown noise {d!r}")


class LogisticLink:
    """f(x, theta) = 1 / (1 + exp(-x.theta)); Lipschitz in theta with 1/4 for ||x|| <= 1."""

    name = "logistic"
    lipschitz = 0.25

    def __call__(self, x: np.ndarray, theta: np.ndarray) -> float:
        return 1.0 / (1.0 + math.exp(-float(np.dot(x, theta))))


def check_lipschitz(link, dim: int, n: int = 500, seed: int = 0, scale: float = 2.0) -> bool:
    """Spot-check |f(x,a) - f(x,b)| <= L ||a - b|| on random unit-ball x."""
    rng = np.random.default_rng(seed)
    for _ in range(n):
        x = rng.standard_normal(dim)
        x *= rng.random() ** (1.0 / dim) / np.linalg.norm(x)
        a, b = scale * rng.standard_normal((2, dim))
        if abs(link(x, a) - link(x, b)) > link.lipschitz * np.linalg.norm(a - b) + 1e-12:
            return False
    return True


def _checked(mu: np.ndarray, agent_id) -> np.ndarray:
    if np.any(mu < -MEAN_TOL) or np.any(mu > 1 + MEAN_TOL):
        raise InvalidModelError(f"agent {agent_id}: induced means {mu.tolist()} leave [0,1]")
    return np.clip(mu, 0.0, 1.0)


class RewardModel:
    kind = "abstract"

    def __init__(self, K: int, noise: Optional[Noise] = None):
        if int(K) != K or K < 1:
            raise InvalidParameterError(f"K must be a positive integer, got {K!r}")
        self.K = int(K)
        self.noise = noise if noise is not None else BernoulliNoise()

    def means(self, agent: AgentProfile) -> np.ndarray:
        raise NotImplementedError

    def mean_of(self, agent: AgentProfile, arm: int) -> float:
        return float(self.means(agent)[arm])

    def _noise_dict(self) -> dict:
        return self.noise.to_dict()


class TabularModel(RewardModel):
    """Explicit per-agent means, either from ``table`` or the profile itself."""

    kind = "tabular"

    def __init__(self, K: int, noise: Optional[Noise] = None, table: Optional[Mapping[int, Sequence[float]]] = None):
        super().__init__(K, noise)
        self.table = None
        if table is not None:
            self.table = {int(k): _checked(np.asarray(v, dtype=float), k) for k, v in table.items()}
            for k, v in self.table.items():
                if v.shape != (self.K,):
                    raise InvalidModelError(f"table row {k} has length {v.size}, expected {self.K}")

    def means(self, agent: AgentProfile) -> np.ndarray:
        if self.table is not None:
            if agent.id not in self.table:
                raise ModelMismatchError(f"agent {agent.id} has no row in the tabular model")
            return self.table[agent.id]
        if agent.K != self.K:
            raise ModelMismatchError(f"agent {agent.id} has K={agent.K}, model has K={self.K}")
        return agent.mean_vector

    def to_dict(self) -> dict:
        d = {"kind": "tabular", "K": self.K, "noise": self._noise_dict()}
        if self.table is not None:
            d["table"] = {str(k): v.tolist() for k, v in sorted(self.table.items())}
        return d


class LinearModel(RewardModel):
    kind = "linear"

    def __init__(self, thetas, noise: Optional[Noise] = None, S: Optional[float] = None):
        th = np.array(thetas, dtype=float)
        if th.ndim != 2:
            raise InvalidModelError("thetas must be a K x d array")
        super().__init__(th.shape[0], noise)
        self.thetas = th
        self.d = th.shape[1]
        norms = np.linalg.norm(th, axis=1)
        self.S = float(norms.max()) if S is None else float(S)
        if np.any(norms > self.S + 1e-12):
            raise InvalidModelError(f"parameter norm {norms.max()} exceeds S={self.S}")

    def means(self, agent: AgentProfile) -> np.ndarray:
        if agent.features is None:
            raise ModelMismatchError(f"agent {agent.id} has no features")
        if agent.features.size != self.d:
            raise ModelMismatchError(f"agent {agent.id} has d={agent.features.size}, model has d={self.d}")
        return _checked(self.thetas @ agent.features, agent.id)

    def to_dict(self) -> dict:
        return {"kind": "linear", "thetas": self.thetas.tolist(), "S": self.S, "noise": self._noise_dict()}


class NonlinearModel(RewardModel):
    kind = "nonlinear"

    def __init__(self, thetas, noise: Optional[Noise] = None, links=None):
        th = np.array(thetas, dtype=float)
        if th.ndim != 2:
            raise InvalidModelError("thetas must be a K x p array")
        super().__init__(th.shape[0], noise)
        self.thetas = th
        self.p = th.shape[1]
        if links is None:
            links = LogisticLink()
        if not isinstance(links, (list, tuple)):
            links = [links] * self.K
        if len(links) != self.K:
            raise InvalidModelError(f"need one link per arm, got {len(links)}")
        for link in links:
            if not isinstance(link, LogisticLink) and not check_lipschitz(link, self.p):
                raise InvalidModelError(f"link {link!r} violates its declared Lipschitz constant")
        self.links = list(links)

    @property
    def lipschitz(self) -> np.ndarray:
        return np.array([link.lipschitz for link in self.links])

    def means(self, agent: AgentProfile) -> np.ndarray:
        if agent.features is None:
            raise ModelMismatchError(f"agent {agent.id} has no features")
        if agent.features.size != self.p:
            raise ModelMismatchError(f"agent {agent.id} has p={agent.features.size}, model has p={self.p}")
        mu = np.array([f(agent.features, th) for f, th in zip(self.links, self.thetas)])
        return _checked(mu, agent.id)

    def to_dict(self) -> dict:
        if not all(isinstance(link, LogisticLink) for link in self.links):
            raise InvalidParameterError("only the built-in logistic link serializes")
        return {"kind": "nonlinear", "thetas": self.thetas.tolist(), "link": "logistic", "noise": self._noise_dict()}


class ClusteredModel(RewardModel):
    kind = "clustered"

    def __init__(self, thetas, noise: Optional[Noise] = None):
        th = np.array(thetas, dtype=float)
        if th.ndim != 2:
            raise InvalidModelError("cluster table must be C x K")
        if np.any(th < 0) or np.any(th > 1):
            raise InvalidModelError("cluster means must lie in [0,1]")
        super().__init__(th.shape[1], noise)
        self.thetas = th
        self.C = th.shape[0]

    def means(self, agent: AgentProfile) -> np.ndarray:
        if agent.cluster is None:
            raise ModelMismatchError(f"agent {agent.id} has no cluster label")
        if agent.cluster >= self.C:
            raise ModelMismatchError(f"agent {agent.id} cluster {agent.cluster} >= C={self.C}")
        return self.thetas[agent.cluster]

    def to_dict(self) -> dict:
        return {"kind": "clustered", "thetas": self.thetas.tolist(), "noise": self._noise_dict()}


def model_from_dict(d: dict) -> RewardModel:
    noise = noise_from_dict(d.get("noise"))
    kind = d.get("kind")
    if kind == "tabular":
        table = {int(k): v for k, v in d["table"].items()} if "table" in d else None
        return TabularModel(d["K"], noise, table)
    if kind == "linear":
        return LinearModel(d["thetas"], noise, d.get("S"))
    if kind == "nonlinear":
        if d.get("link", "logistic") != "logistic":
            raise InvalidParameterError(f"unknown link {d['link']!r}")
        return NonlinearModel(d["thetas"], noise)
    if kind == "clustered":
        return ClusteredModel(d["thetas"], noise)
    raise InvalidParameterError(f"unknown model kind {kind!r}")


def mean_of(model: RewardModel, agent: AgentProfile, arm: int) -> float:
    return model.mean_of(agent, arm)


def sample_reward(model: RewardModel, agent: AgentProfile, arm: int, rng: np.random.Generator) -> float:
    return float(model.noise.sample(np.array([model.mean_of(agent, arm)]), rng)[0])


@dataclass(frozen=True, eq=False)
class GlobalValues:
    t: int
    unnormalized: np.ndarray
    normalized: np.ndarray
    optimal_arm: int
    gap: float
    size: int

    @classmethod
    def from_sums(cls, t: int, V: np.ndarray, M: int) -> "GlobalValues":
        if M < 1:
            raise EmptyPopulationError(f"round {t}: no active agents")
        V = np.array(V, dtype=float)
        Vbar = V / M
        star = int(np.argmax(V))
        if V.size == 1:
            gap = math.inf
        else:
            gap = float(Vbar[star] - np.max(np.delete(Vbar, star)))
        return cls(t, V, Vbar, star, gap, int(M))


def global_values(model: RewardModel, snapshot: PopulationSnapshot, agents) -> GlobalValues:
    """Ground truth for the snapshot's active set; ``agents`` maps id -> profile."""
    if snapshot.size == 0:
        raise EmptyPopulationError(f"round {snapshot.round}: no active agents")
    if isinstance(agents, AgentTable) and isinstance(model, TabularModel) and model.table is None:
        V = agents.means_of(snapshot.active).sum(axis=0)
    else:
        V = np.zeros(model.K)
        for aid in snapshot.active.tolist():
            V += model.means(agents[aid])
    return GlobalValues.from_sums(snapshot.round, V, snapshot.size)


def check_perturbation(prev: GlobalValues, cur: GlobalValues, n_arrivals: int, tol: float = 1e-12) -> None:
    """Raise LemmaViolation if max_i |Vbar_t - Vbar_{t-1}| > |A_t| / M_t (no-departure rounds only)."""
    lhs = float(np.max(np.abs(cur.normalized - prev.normalized)))
    rhs = n_arrivals / cur.size
    if lhs > rhs + tol:
        raise LemmaViolation("arrival perturbation", cur.t, f"max|dVbar|={lhs!r} > |A|/M={rhs!r}")


def one_step_stability_applies(prev: GlobalValues, cur_size: int, n_arrivals: int, tol: float = 1e-12) -> bool:
    return prev.gap > 0 and n_arrivals / cur_size < prev.gap / 2 - tol


def check_one_step_stability(prev: GlobalValues, cur: GlobalValues, n_arrivals: int, tol: float = 1e-12) -> None:
    if one_step_stability_applies(prev, cur.size, n_arrivals, tol) and cur.optimal_arm != prev.optimal_arm:
        raise LemmaViolation(
            "one-step stability", cur.t,
            f"optimum moved {prev.optimal_arm}->{cur.optimal_arm} with |A|/M={n_arrivals / cur.size!r}, "
            f"previous gap {prev.gap!r}",
        )


def load_tabular(path, noise: Optional[Noise] = None) -> TabularModel:
    """Read ``agent_id,mu_1,...,mu_K`` lines."""
    table = {}
    K = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        try:
            aid, mu = int(fields[0]), [float(x) for x in fields[1:]]
        except ValueError:
            raise InvalidModelError(f"{path}:{lineno}: malformed row") from None
        if K is None:
            K = len(mu)
        if len(mu) != K or K == 0:
            raise InvalidModelError(f"{path}:{lineno}: expected {K} means")
        if aid in table:
            raise InvalidModelError(f"{path}:{lineno}: duplicate agent {aid}")
        table[aid] = mu
    if K is None:
        raise InvalidModelError(f"{path}: no rows")
    return TabularModel(K, noise, table)
