"""Decision layer: global-UCB over an open population, its clustered variant, and baselines.

All active agents pull the common arm each round.  Arms are 0-based.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .exceptions import (
    InternalInvariantError,
    InvalidParameterError,
    ModelMismatchError,
    UndefinedEstimateError,
)
from .population import AgentTable, PopulationSnapshot, member_mask
from .transfer import (
    ClusterStats,
    TransferOutcome,
    cluster_inherit,
    linear_param_transfer,
    nonlinear_param_transfer,
    pretrained_init,
    zero_knowledge_init,
)


class LocalStats:
    """Triples (n, mu_hat, rho) for every active agent and arm.

    Columns follow the snapshot's active order; row ``i`` holds arm ``i``.
    Use ``triple(agent_id)`` for a per-agent view.
    """

    def __init__(self, K: int, capacity: int = 16):
        self.K = K
        self.ids = np.empty(capacity, dtype=np.int64)
        # counts are stored as floats (exact below 2**53) so updates avoid casts
        self._n = np.zeros((K, capacity))
        self._mu = np.zeros((K, capacity))
        self._rho = np.zeros((K, capacity))
        self.size = 0

    @property
    def n(self) -> np.ndarray:
        return self._n[:, : self.size].astype(np.int64)

    @property
    def mu(self) -> np.ndarray:
        return self._mu[:, : self.size]

    @property
    def rho(self) -> np.ndarray:
        return self._rho[:, : self.size]

    @property
    def active_ids(self) -> np.ndarray:
        return self.ids[: self.size]

    def triple(self, agent_id: int) -> tuple:
        pos = np.flatnonzero(self.active_ids == agent_id)
        if pos.size == 0:
            raise KeyError(agent_id)
        j = pos[0]
        return self._n[:, j].astype(np.int64), self._mu[:, j].copy(), self._rho[:, j].copy()

    def _reserve(self, size: int) -> None:
        cap = self.ids.size
        if size <= cap:
            return
        cap = max(size, 2 * cap)
        for name in ("_n", "_mu", "_rho"):
            old = getattr(self, name)
            new = np.zeros((self.K, cap), dtype=old.dtype)
            new[:, : self.size] = old[:, : self.size]
            setattr(self, name, new)
        ids = np.empty(cap, dtype=np.int64)
        ids[: self.size] = self.ids[: self.size]
        self.ids = ids

    def append(self, ids, outcomes) -> None:
        """Add agents initialized from their transfer outcomes: n = 0, mu_hat = estimates, rho = certificate."""
        A = len(ids)
        if A == 0:
            return
        lo, hi = self.size, self.size + A
        self._reserve(hi)
        self.ids[lo:hi] = ids
        self._n[:, lo:hi] = 0.0
        if A == 1:
            self._mu[:, lo] = outcomes[0].estimates
            self._rho[:, lo] = outcomes[0].certificate
        else:
            self._mu[:, lo:hi] = np.array([o.estimates for o in outcomes]).T
            self._rho[:, lo:hi] = np.array([o.certificate for o in outcomes])
        self.size = hi

    def sync(self, snapshot: PopulationSnapshot, outcomes) -> None:
        """Drop departed agents and append arrivals initialized by their transfer outcomes."""
        if snapshot.departures.size:
            keep = ~member_mask(self.active_ids, snapshot.departures)
            m = int(keep.sum())
            self.ids[:m] = self.active_ids[keep]
            for arr in (self._n, self._mu, self._rho):
                arr[:, :m] = arr[:, : self.size][:, keep]
            self.size = m
        A = snapshot.n_arrivals
        if len(outcomes) != A:
            raise InternalInvariantError(f"round {snapshot.round}: {A} arrivals but {len(outcomes)} transfers")
        self.append(snapshot.arrivals, outcomes)
        active = snapshot.active
        if self.size != active.shape[0] or not (self.ids[: self.size] == active).all():
            raise InternalInvariantError(f"round {snapshot.round}: active agent without local statistics")


@dataclass(frozen=True, eq=False)
class GlobalIndex:
    estimate: np.ndarray
    stat_bonus: np.ndarray
    arrival_bonus: float

    @property
    def index(self) -> np.ndarray:
        return self.estimate + self.stat_bonus + self.arrival_bonus


def aggregate_global(stats: LocalStats, snapshot: PopulationSnapshot, certificates, eps_comm=0.0) -> GlobalIndex:
    """Exact sums over the active set; certificates are those of the round's arrivals."""
    if stats.size != snapshot.size:
        raise InternalInvariantError(f"round {snapshot.round}: stats cover {stats.size} of {snapshot.size} agents")
    R = snapshot.size - snapshot.n_arrivals
    V_hat = stats._mu[:, : stats.size].sum(axis=1)
    B = stats._rho[:, :R].sum(axis=1)
    if not (np.isscalar(eps_comm) and eps_comm == 0):
        eps = np.broadcast_to(np.asarray(eps_comm, dtype=float), (stats.K,))
        if np.any(eps < 0):
            raise InvalidParameterError("eps_comm must be nonnegative")
        B = B + eps
    return GlobalIndex(V_hat, B, float(sum(certificates)))


def select_arm(index) -> int:
    """Argmax with ties to the lowest arm.

    E^A is common to every arm, so a GlobalIndex is ranked on V_hat + B^stat;
    adding the shift first could round nearby values together.
    """
    if isinstance(index, GlobalIndex):
        values = (index.estimate + index.stat_bonus).tolist()
    else:
        values = np.asarray(index, dtype=float).tolist()
    return max(range(len(values)), key=values.__getitem__)


def update_and_broadcast(stats: LocalStats, selected: int, rewards, t: int, C1: float = 2.0, beta: float = 0.5) -> LocalStats:
    """Fold one reward per active agent into the pulled arm's triples.

    The radius update is skipped at t = 1, where log t = 0 would certify a
    zero radius.  Broadcast is implicit: the aggregate reads the same arrays.
    """
    if t < 1:
        raise InvalidParameterError(f"rounds start at 1, got t={t}")
    r = np.asarray(rewards, dtype=float)
    if r.shape != (stats.size,):
        raise InvalidParameterError(f"need one reward per active agent ({stats.size}), got shape {r.shape}")
    M = stats.size
    n = stats._n[selected, :M]
    mu = stats._mu[selected, :M]
    n += 1
    mu[:] = ((n - 1) * mu + r) / n
    if t > 1:
        rho = stats._rho[selected, :M]
        scaled = (C1 * math.log(t)) / n
        cand = np.sqrt(scaled) if beta == 0.5 else scaled ** beta
        np.minimum(rho, cand, out=rho)
    return stats


def clustered_burnin_arm(t: int, K: int) -> int:
    if t < 1:
        raise InvalidParameterError(f"rounds start at 1, got t={t}")
    return (t - 1) % K


def clustered_bonus(cluster_sizes, cluster_counts, t: int, C1: float = 2.0, beta: float = 0.5) -> np.ndarray:
    """Per-arm sum over clusters of M_c (C1 log t / max(1, n_ci))^beta."""
    if beta <= 0 or C1 <= 0:
        raise InvalidParameterError("C1 and beta must be positive")
    counts = np.asarray(cluster_counts, dtype=float)
    sizes = np.asarray(cluster_sizes, dtype=float)
    if counts.shape[0] == 0:
        return np.zeros(counts.shape[1] if counts.ndim == 2 else 0)
    width = (C1 * math.log(t) / np.maximum(1.0, counts)) ** beta
    return sizes @ width


@dataclass(frozen=True)
class PolicyEnv:
    """What the system tells a policy before the run; no ground truth."""

    K: int
    T: int
    transfer_mode: str = "zero_knowledge"
    n_clusters: int = 0
    sigma: float = 0.5
    delta: float = 0.05
    neighbor_source: Optional[Callable] = None
    links: Optional[list] = None


class Policy:
    name = "policy"
    needs_truth = False

    def reset(self, env: PolicyEnv, rng: np.random.Generator) -> None:
        self.env = env
        self.K = env.K
        self.rng = rng
        self.index = None
        self.entry = None

    def start(self, snapshot: PopulationSnapshot, agents: AgentTable) -> None:
        """Called once with the round-0 population before the first round."""

    def select(self, t: int, snapshot: PopulationSnapshot, agents: AgentTable, truth=None) -> int:
        raise NotImplementedError

    def consumes_rewards(self, t: int) -> bool:
        return False

    def observe(self, t: int, arm: int, rewards: np.ndarray) -> None:
        pass


def _check_constants(C1, beta):
    if not C1 > 0:
        raise InvalidParameterError(f"C1 must be > 0, got {C1!r}")
    if not beta > 0:
        raise InvalidParameterError(f"beta must be > 0, got {beta!r}")


class CertifiedGlobalUCB(Policy):
    """Global UCB with certified arrival transfer.

    Each round: transfer entry estimates to arrivals, aggregate estimates and
    radii over the active set, pull the arm maximizing estimate plus
    statistical bonus plus the arrival bonus, then update the pulled arm.

    Parameters
    ----------
    C1, beta : float
        Radius constants, candidate radius ``(C1 log t / n) ** beta``.
    eps_comm : float, array of length K, or callable ``t -> array``
        Additive aggregation tolerance placed in the statistical bonus.
    update_rule : callable, optional
        Replacement for ``update_and_broadcast`` (same signature).
    max_neighbors : int, optional
        Cap on continuing agents consulted for parameter transfer; a random
        subset is used when more are available.
    """

    name = "certified_global_ucb"

    def __init__(self, C1: float = 2.0, beta: float = 0.5, eps_comm=0.0,
                 update_rule: Optional[Callable] = None, max_neighbors: Optional[int] = None):
        _check_constants(C1, beta)
        self.C1, self.beta, self.eps_comm = float(C1), float(beta), eps_comm
        self.update_rule = update_rule or update_and_broadcast
        self.max_neighbors = max_neighbors

    def reset(self, env, rng):
        super().reset(env, rng)
        self.stats = LocalStats(env.K)
        self.cluster_stats = ClusterStats(env.n_clusters, env.K) if env.transfer_mode == "cluster" else None
        self._labels = None

    def start(self, snapshot, agents):
        # the initial cohort enters with no knowledge: n = 0, mu_hat = 0, rho = 1
        self.stats.append(snapshot.active, [zero_knowledge_init(self.K)] * snapshot.size)

    def transfer(self, t: int, agent, snapshot: PopulationSnapshot) -> TransferOutcome:
        env = self.env
        if agent.entry_estimates is not None:
            return pretrained_init(agent.entry_estimates, agent.certificate)
        mode = env.transfer_mode
        if mode in ("linear", "nonlinear"):
            neighbors = snapshot.continuing
            if neighbors.size == 0 or env.neighbor_source is None:
                return zero_knowledge_init(env.K)
            if self.max_neighbors is not None and neighbors.size > self.max_neighbors:
                neighbors = np.sort(self.rng.choice(neighbors, self.max_neighbors, replace=False))
            params = env.neighbor_source(t, neighbors, self.rng)
            if mode == "linear":
                return linear_param_transfer(agent, params, K=env.K)
            return nonlinear_param_transfer(agent, params, links=env.links, K=env.K)
        if mode == "cluster":
            return cluster_inherit(agent, self.cluster_stats, env.sigma, env.delta, env.T)
        return zero_knowledge_init(env.K)

    def _eps(self, t):
        return self.eps_comm(t) if callable(self.eps_comm) else self.eps_comm

    def select(self, t, snapshot, agents, truth=None):
        outcomes = [self.transfer(t, agents[a], snapshot) for a in snapshot.arrivals.tolist()]
        self.stats.sync(snapshot, outcomes)
        certs = [o.certificate for o in outcomes]
        self.entry = outcomes
        if self.cluster_stats is not None:
            # labels only need a full refresh when someone left
            if self._labels is None or snapshot.departures.size:
                self._labels = agents.clusters_of(snapshot.active)
            elif snapshot.n_arrivals:
                self._labels = np.concatenate([self._labels, agents.clusters_of(snapshot.arrivals)])
        self.index = aggregate_global(self.stats, snapshot, certs, self._eps(t))
        return select_arm(self.index)

    def consumes_rewards(self, t):
        return True

    def observe(self, t, arm, rewards):
        self.update_rule(self.stats, arm, rewards, t, self.C1, self.beta)
        if self.cluster_stats is not None and rewards.size:
            self.cluster_stats.update(self._labels, arm, rewards)


class ClusteredUCB(Policy):
    """Round-robin burn-in for ``burn_in`` rounds, then cluster-pooled UCB."""

    name = "clustered_ucb"

    def __init__(self, C1: float = 2.0, beta: float = 0.5, burn_in: Optional[int] = None):
        _check_constants(C1, beta)
        if burn_in is not None and (int(burn_in) != burn_in or burn_in < 0):
            raise InvalidParameterError(f"burn_in must be a nonnegative integer, got {burn_in!r}")
        self.C1, self.beta, self.burn_in = float(C1), float(beta), burn_in

    def reset(self, env, rng):
        super().reset(env, rng)
        if env.n_clusters < 1:
            raise ModelMismatchError("clustered_ucb needs a clustered instance")
        self.L = env.K if self.burn_in is None else self.burn_in
        self.cluster_stats = ClusterStats(env.n_clusters, env.K)

    def select(self, t, snapshot, agents, truth=None):
        self._labels = agents.clusters_of(snapshot.active)
        if self._labels.size and self._labels.min() < 0:
            raise ModelMismatchError("clustered_ucb needs a cluster label on every agent")
        if t <= self.L:
            self.index = None
            return clustered_burnin_arm(t, self.K)
        sizes = np.bincount(self._labels, minlength=self.cluster_stats.C)
        theta = np.nan_to_num(self.cluster_stats.means(), nan=0.0)
        est = sizes @ theta
        bonus = clustered_bonus(sizes, self.cluster_stats.counts, t, self.C1, self.beta)
        self.index = GlobalIndex(est, bonus, 0.0)
        return select_arm(self.index)

    def consumes_rewards(self, t):
        return True

    def observe(self, t, arm, rewards):
        if rewards.size:
            self.cluster_stats.update(self._labels, arm, rewards)


class Oracle(Policy):
    name = "oracle"
    needs_truth = True

    def select(self, t, snapshot, agents, truth=None):
        return 0 if truth is None else truth.optimal_arm


class UniformRandom(Policy):
    name = "uniform_random"

    def select(self, t, snapshot, agents, truth=None):
        return int(self.rng.integers(self.K))


class RoundRobin(Policy):
    name = "round_robin"

    def select(self, t, snapshot, agents, truth=None):
        return (t - 1) % self.K


class CommitAfterBurnin(Policy):
    """Explore through round tau, then play the arm with the best pooled burn-in mean.

    With ``tau=None`` the burn-in ends at the first round t >= K where
    ``(1/K) sum_{s<=t} M_s >= N_id(gap, confidence) + max_{s<=t} M_s``, the
    round-robin sufficient condition for every arm to reach N_id pooled samples.
    """

    name = "commit_after_burnin"

    def __init__(self, tau: Optional[int] = None, explorer: str = "round_robin",
                 gap: Optional[float] = None, confidence: Optional[float] = None):
        if explorer not in ("round_robin", "uniform_random"):
            raise InvalidParameterError(f"unknown explorer {explorer!r}")
        if tau is None and (gap is None or confidence is None):
            raise InvalidParameterError("commit_after_burnin needs tau, or gap and confidence")
        if tau is not None and (int(tau) != tau or tau < 1):
            raise InvalidParameterError(f"tau must be a positive integer, got {tau!r}")
        self.tau_fixed = tau
        self.explorer = explorer
        self.gap, self.confidence = gap, confidence

    def reset(self, env, rng):
        super().reset(env, rng)
        if self.tau_fixed is not None and self.tau_fixed > env.T:
            raise InvalidParameterError(f"tau={self.tau_fixed} exceeds T={env.T}")
        if self.tau_fixed is None:
            from .metrics import n_id
            self._target = n_id(self.gap, self.confidence, env.K)
        self.tau = self.tau_fixed
        self.sums = np.zeros(env.K)
        self.counts = np.zeros(env.K, dtype=np.int64)
        self._mass = 0
        self._peak = 0
        self.committed = None
        self.burnin_estimate = None

    def select(self, t, snapshot, agents, truth=None):
        if self.committed is not None:
            return self.committed
        if self.explorer == "round_robin":
            return (t - 1) % self.K
        return int(self.rng.integers(self.K))

    def consumes_rewards(self, t):
        return self.committed is None

    def observe(self, t, arm, rewards):
        self.sums[arm] += rewards.sum()
        self.counts[arm] += rewards.size
        self._mass += rewards.size
        self._peak = max(self._peak, rewards.size)
        if self.tau is None and t >= self.K and self._mass / self.K >= self._target + self._peak:
            self.tau = t
        if self.tau is not None and t == self.tau:
            self._commit()

    def _commit(self):
        if np.any(self.counts == 0):
            missing = np.flatnonzero(self.counts == 0).tolist()
            raise UndefinedEstimateError(f"arms {missing} were never sampled before tau={self.tau}")
        self.burnin_estimate = self.sums / self.counts
        self.committed = int(np.argmax(self.burnin_estimate))


POLICIES = {
    "certified_global_ucb": CertifiedGlobalUCB,
    "clustered_ucb": ClusteredUCB,
    "oracle": Oracle,
    "uniform_random": UniformRandom,
    "round_robin": RoundRobin,
    "commit_after_burnin": CommitAfterBurnin,
}


def make_policy(kind: str, **params) -> Policy:
    if kind not in POLICIES:
        raise InvalidParameterError(f"unknown policy {kind!r}; choose from {sorted(POLICIES)}")
    return POLICIES[kind](**params)


@dataclass(frozen=True, eq=False)
class RoundOutcome:
    arm: int
    rewards: Optional[np.ndarray]
    index: Optional[GlobalIndex]


def run_round(policy: Policy, snapshot: PopulationSnapshot, agents: AgentTable, model,
              rng: np.random.Generator, truth=None) -> RoundOutcome:
    """Select, let every active agent pull the common arm, and update."""
    t = snapshot.round
    arm = policy.select(t, snapshot, agents, truth)
    rewards = None
    if policy.consumes_rewards(t):
        means = agents.mean_column(snapshot.active, arm)
        rewards = model.noise.sample(means, rng)
        policy.observe(t, arm, rewards)
    return RoundOutcome(arm, rewards, policy.index)
