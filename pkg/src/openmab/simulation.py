"""One replication: population, policy and ground-truth evaluation in lockstep."""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .metrics import RegretLedger, accumulate_regret, stability_indicator
from .policy import Policy, run_round
from .population import AgentTable, PopulationProcess
from .rewards import GlobalValues, check_one_step_stability, check_perturbation
from .streams import make_streams

CERT_TOL = 1e-12


@dataclass(eq=False)
class RunResult:
    """Per-round arrays (index t-1 holds round t) plus evaluator logs.

    ``arm`` and ``i_star`` are 0-based; ``i_star``/``S`` are -1 and
    ``gap``/``Vbar`` NaN on rounds without active agents.  ``Vhat``/``Bstat``
    are NaN for policies that do not build a global index.
    """

    T: int
    K: int
    M: np.ndarray
    A: np.ndarray
    arm: np.ndarray
    i_star: np.ndarray
    Vhat: np.ndarray
    Bstat: np.ndarray
    EA: np.ndarray
    S: np.ndarray
    gap: np.ndarray
    Vbar: np.ndarray
    ledger: RegretLedger
    agents: AgentTable
    policy: Policy
    M_0: int
    arrival_P: list = field(default_factory=list)
    certificate_violations: int = 0
    transfers: int = 0
    coverage_misses: int = 0
    coverage_pairs: int = 0

    @property
    def certificate_violation_rate(self) -> float:
        return self.certificate_violations / self.transfers if self.transfers else 0.0

    @property
    def coverage_miss_rate(self) -> float:
        return self.coverage_misses / self.coverage_pairs if self.coverage_pairs else 0.0


def _values(t: int, V: np.ndarray, M: int) -> GlobalValues:
    Vbar = V / M
    vals = Vbar.tolist()
    star = max(range(len(vals)), key=vals.__getitem__)
    if len(vals) == 1:
        gap = math.inf
    else:
        gap = vals[star] - max(v for i, v in enumerate(vals) if i != star)
    return GlobalValues(t, V, Vbar, star, gap, M)


def simulate(spec, policy: Policy, seed=None, check_lemmas: bool = True, check_partitions: bool = False,
             coverage: bool = False, observers: Sequence[Callable] = ()) -> RunResult:
    """Run ``policy`` on instance ``spec`` for ``spec.T`` rounds.

    ``check_lemmas`` raises LemmaViolation on any failed perturbation or
    one-step-stability check.  ``coverage`` tallies active (agent, arm)
    pairs with n >= 1 whose estimate misses the truth by more than the
    radius (policies with local statistics only).  Each observer is called
    as ``obs(t, snapshot, policy, values)`` at the end of every round.
    """
    streams = make_streams(seed)
    proc = PopulationProcess(spec.pattern, spec.M_0, spec.agent_factory(), streams, spec.initial_labels())
    agents = proc.agents
    policy.reset(spec.policy_env(), streams.policy)
    K, T = spec.K, spec.T
    snap = proc.snapshot
    policy.start(snap, agents)
    V = agents.means_of(snap.active).sum(axis=0) if snap.size else np.zeros(K)
    prev = _values(0, V, snap.size) if snap.size else None

    M_arr = np.zeros(T, dtype=np.int64)
    A_arr = np.zeros(T, dtype=np.int64)
    arm_arr = np.zeros(T, dtype=np.int64)
    star_arr = np.full(T, -1, dtype=np.int64)
    S_arr = np.full(T, -1, dtype=np.int64)
    gap_arr = np.full(T, np.nan)
    EA_arr = np.full(T, np.nan)
    Vhat = np.full((T, K), np.nan)
    Bstat = np.full((T, K), np.nan)
    Vbar = np.full((T, K), np.nan)
    ledger = RegretLedger()
    arrival_P = []
    violations = transfers = 0
    misses = pairs = 0

    for t in range(1, T + 1):
        prev_snap = snap
        snap = proc.step()
        if check_partitions:
            snap.check(prev_snap)
        M, A = snap.size, snap.n_arrivals
        if snap.departures.size:
            V = agents.means_of(snap.active).sum(axis=0) if M else np.zeros(K)
        elif A:
            V = V + agents.means_of(snap.arrivals).sum(axis=0)
        gv = _values(t, V, M) if M else None
        if check_lemmas and gv is not None and prev is not None and not snap.departures.size:
            check_perturbation(prev, gv, A)
            check_one_step_stability(prev, gv, A)

        out = run_round(policy, snap, agents, spec.model, streams.rewards, gv if policy.needs_truth else None)

        err = 0.0
        if A:
            mu = agents.means_of(snap.arrivals)
            outcomes = policy.entry
            if outcomes is not None:
                est = np.array([o.estimates for o in outcomes])
                cert = np.array([o.certificate for o in outcomes])
            else:
                est, cert = np.zeros_like(mu), np.ones(A)
            P = np.abs(est - mu).max(axis=1)
            violations += int(np.sum(P > cert + CERT_TOL))
            transfers += A
            err = float(P.sum())
            arrival_P.extend(zip([t] * A, snap.arrivals.tolist(), P.tolist(), cert.tolist()))

        stable = None
        if gv is not None:
            star_arr[t - 1] = gv.optimal_arm
            gap_arr[t - 1] = gv.gap
            Vbar[t - 1] = gv.normalized
            if prev is not None:
                stable = stability_indicator(prev.optimal_arm, gv.optimal_arm)
                S_arr[t - 1] = stable
        idx = out.index
        EA = idx.arrival_bonus if idx is not None else 0.0
        accumulate_regret(ledger, gv, out.arm, M, EA, err, stable)
        M_arr[t - 1] = M
        A_arr[t - 1] = A
        arm_arr[t - 1] = out.arm
        if idx is not None:
            Vhat[t - 1] = idx.estimate
            Bstat[t - 1] = idx.stat_bonus
            EA_arr[t - 1] = idx.arrival_bonus

        if coverage and M and hasattr(policy, "stats"):
            st = policy.stats
            truth = agents.means_of(st.active_ids).T
            seen = st.n > 0
            pairs += int(seen.sum())
            misses += int(np.sum(seen & (np.abs(st.mu - truth) > st.rho)))
        for obs in observers:
            obs(t, snap, policy, gv)
        prev = gv

    return RunResult(T, K, M_arr, A_arr, arm_arr, star_arr, Vhat, Bstat, EA_arr, S_arr, gap_arr, Vbar,
                     ledger, agents, policy, spec.M_0, arrival_P, violations, transfers, misses, pairs)
