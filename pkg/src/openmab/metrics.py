"""Regret bookkeeping, stability diagnostics and closed-form bound calculators.

Four per-round regret variants are recorded and cumulated; a report picks
one by label:

``r_round``        V_t(i*) - V_t(a_t)               (aggregate gap g_t)
``r_agentsum``     M_t g_t                          (summed over agents)
``rbar_round``     g_t / M_t                        (normalized gap)
``rbar_agentsum``  M_t * (g_t / M_t)

Rounds with no active agents contribute zero.  All logarithms are natural.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import InvalidParameterError

CONVENTIONS = ("r_round", "r_agentsum", "rbar_round", "rbar_agentsum")


class RegretLedger:
    def __init__(self):
        self._rows = {name: [] for name in CONVENTIONS}
        self.sizes = []
        self.stability = []
        self.gaps = []
        self.arrival_bonus = []
        self.arrival_error = []

    def __len__(self) -> int:
        return len(self.sizes)

    def per_round(self, convention: str) -> np.ndarray:
        if convention not in self._rows:
            raise InvalidParameterError(f"unknown regret convention {convention!r}; choose from {CONVENTIONS}")
        return np.array(self._rows[convention], dtype=float)

    def cumulative(self, convention: str) -> np.ndarray:
        return np.cumsum(self.per_round(convention))

    def total(self, convention: str, start: int = 1) -> float:
        """Sum over rounds t >= start."""
        return float(np.sum(self.per_round(convention)[start - 1:]))

    @property
    def totals(self) -> dict:
        return {name: self.total(name) for name in CONVENTIONS}


def accumulate_regret(ledger: RegretLedger, values, a_t: int, M_t: int,
                      arrival_bonus: float = 0.0, arrival_error: float = 0.0,
                      stable: Optional[int] = None) -> RegretLedger:
    """Append one round.  ``values`` is the round's GlobalValues, or None when M_t = 0."""
    if values is None or M_t == 0:
        g = gbar = 0.0
        gap = math.nan
    else:
        V = values.unnormalized
        g = max(0.0, float(V[values.optimal_arm] - V[a_t]))
        gbar = g / M_t
        gap = values.gap
    rows = ledger._rows
    rows["r_round"].append(g)
    rows["r_agentsum"].append(M_t * g)
    rows["rbar_round"].append(gbar)
    rows["rbar_agentsum"].append(M_t * gbar)
    ledger.sizes.append(M_t)
    ledger.stability.append(-1 if stable is None else stable)
    ledger.gaps.append(gap)
    ledger.arrival_bonus.append(arrival_bonus)
    ledger.arrival_error.append(arrival_error)
    return ledger


def stability_indicator(prev_opt: int, cur_opt: int) -> int:
    if prev_opt is None or cur_opt is None:
        raise InvalidParameterError("stability needs both optimal arms")
    return int(prev_opt == cur_opt)


def _check_gap(Delta):
    if not 0 < Delta <= 1:
        raise InvalidParameterError(f"gap must lie in (0,1], got {Delta!r}")


def _check_conf(delta):
    if not 0 < delta < 1:
        raise InvalidParameterError(f"confidence must lie in (0,1), got {delta!r}")


def _check_count(name, v):
    if int(v) != v or v < 1:
        raise InvalidParameterError(f"{name} must be a positive integer, got {v!r}")


def n_stab(Delta: float, delta: float, K: int, T: int) -> float:
    _check_gap(Delta)
    _check_conf(delta)
    _check_count("K", K)
    _check_count("T", T)
    return 8.0 / Delta**2 * math.log(2.0 * K * T / delta)


def n_id(Delta: float, delta: float, K: int) -> float:
    _check_gap(Delta)
    _check_conf(delta)
    _check_count("K", K)
    return 8.0 / Delta**2 * math.log(2.0 * K / delta)


def _first_crossing(values: np.ndarray, threshold: float) -> Optional[int]:
    hit = np.flatnonzero(values >= threshold)
    return int(hit[0]) + 1 if hit.size else None


def tau_stab(M_trajectory: Sequence[int], N: float) -> Optional[int]:
    """First round t (1-based) with M_t >= N; needs a nondecreasing trajectory."""
    M = np.asarray(M_trajectory, dtype=float)
    if np.any(np.diff(M) < 0):
        raise InvalidParameterError("tau_stab assumes no departures but the population shrank")
    return _first_crossing(M, N)


def tau_id(counts, N: float) -> Optional[int]:
    """First round with min_i N_i(t) >= N; ``counts`` is T x K (or the T-vector of minima)."""
    c = np.asarray(counts, dtype=float)
    if np.any(np.diff(c, axis=0) < 0):
        raise InvalidParameterError("sample counts must be nondecreasing")
    return _first_crossing(c.min(axis=1) if c.ndim == 2 else c, N)


def tau_id_round_robin(M_trajectory: Sequence[int], N: float, K: int) -> Optional[int]:
    """First t >= K with (1/K) sum_{s<=t} M_s >= N + max_{s<=t} M_s.

    Sufficient for tau_id under round-robin with a nondecreasing population:
    each arm trails the average mass by at most (K-1)/K * M_t.  With M_s = 1
    the slack is the familiar +1.
    """
    M = np.asarray(M_trajectory, dtype=float)
    mass = np.cumsum(M) / K
    ok = mass >= N + np.maximum.accumulate(M)
    ok[: K - 1] = False
    hit = np.flatnonzero(ok)
    return int(hit[0]) + 1 if hit.size else None


def pooled_counts(arms: Sequence[int], sizes: Sequence[int], K: int) -> np.ndarray:
    """T x K cumulative agent-samples per arm when all M_t agents pull a_t."""
    arms = np.asarray(arms, dtype=np.int64)
    inc = np.zeros((arms.size, K))
    inc[np.arange(arms.size), arms] = np.asarray(sizes, dtype=float)
    return np.cumsum(inc, axis=0)


def combined_tau(tau_s: Optional[int], tau_i: Optional[int]) -> Optional[int]:
    if tau_s is None or tau_i is None:
        return None
    return max(tau_s, tau_i)


@dataclass(frozen=True)
class GoodEventBound:
    stability_term: float
    identification_term: float

    @property
    def total(self) -> float:
        return self.stability_term + self.identification_term

    @property
    def probability(self) -> float:
        return min(1.0, self.total)


def delta_good_event(M_tau: float, Delta0: float, Delta: float, K: int, T: int, tau: int,
                     N_min: float) -> GoodEventBound:
    if not 0 < Delta < Delta0 <= 1:
        raise InvalidParameterError(f"need 0 < Delta < Delta0 <= 1, got Delta={Delta!r}, Delta0={Delta0!r}")
    _check_count("K", K)
    _check_count("T", T)
    if int(tau) != tau or not 1 <= tau <= T:
        raise InvalidParameterError(f"tau must lie in [1, T], got {tau!r}")
    if M_tau < 0 or N_min < 0:
        raise InvalidParameterError("M_tau and N_min must be nonnegative")
    stab = 2.0 * K * (T - tau + 1) * math.exp(-M_tau * (Delta0 - Delta) ** 2 / 2.0)
    ident = 2.0 * K * math.exp(-N_min * Delta**2 / 8.0)
    return GoodEventBound(stab, ident)


def model_identification_term(kind: str, **p) -> float:
    """Identification-failure term for one model family.

    linear: K, N, Delta, d, c (default 1); nonlinear: K, N, Delta, p, L, c;
    cluster: K, C, N, Delta; discovery: C, lam_min, tau; zero_knowledge: K, N, Delta.
    """
    try:
        if kind == "linear":
            return 2.0 * p["K"] * math.exp(-p.get("c", 1.0) * p["N"] * p["Delta"] ** 2 / (16.0 * p["d"]))
        if kind == "nonlinear":
            return 2.0 * p["K"] * math.exp(-p.get("c", 1.0) * p["N"] * p["Delta"] ** 2 / (16.0 * p["L"] ** 2 * p["p"]))
        if kind == "cluster":
            return 2.0 * p["K"] * p["C"] * math.exp(-p["N"] * p["Delta"] ** 2 / 8.0)
        if kind == "discovery":
            return p["C"] * math.exp(-p["lam_min"] * p["tau"])
        if kind == "zero_knowledge":
            return 2.0 * p["K"] * math.exp(-p["N"] * p["Delta"] ** 2 / 8.0)
    except KeyError as e:
        raise InvalidParameterError(f"{kind} term needs parameter {e.args[0]!r}") from None
    raise InvalidParameterError(f"unknown model kind {kind!r}")


def p_good(lam_I: float, H0: int, q: float) -> float:
    """Probability a block of length H0 is good: exactly one informative arrival
    at its start, none after, and a lifetime of exactly H0."""
    if lam_I <= 0 or not 0 < q < 1 or int(H0) != H0 or H0 < 1:
        raise InvalidParameterError("need lam_I > 0, q in (0,1), integer H0 >= 1")
    return lam_I * math.exp(-lam_I) * math.exp(-lam_I * (H0 - 1)) * (1.0 - q) ** (H0 - 1) * q


def _phi(x: float) -> float:
    """(1+x) log(1+x) - x, accurate near 0 where the two terms cancel."""
    if x == -1.0:
        return 1.0
    if abs(x) < 0.1:
        # sum_{k>=2} (-x)^k / (k (k-1))
        out, term, k = 0.0, x * x, 2
        while True:
            step = term / (k * (k - 1))
            out += step
            if abs(step) <= 1e-18 * abs(out):
                return out
            term *= -x
            k += 1
    return (1.0 + x) * math.log1p(x) - x


def bernoulli_kl(p: float, q: float) -> float:
    """kl(p, q) = q phi(p/q - 1) + (1-q) phi((1-p)/(1-q) - 1); the linear parts cancel exactly."""
    if not 0 <= p <= 1 or not 0 < q < 1:
        raise InvalidParameterError("need p in [0,1] and q in (0,1)")
    return q * _phi((p - q) / q) + (1.0 - q) * _phi((q - p) / (1.0 - q))


@dataclass(frozen=True)
class BudgetReport:
    regret: float
    budget: float

    @property
    def ratio(self) -> float:
        if self.budget == 0:
            return 0.0 if self.regret == 0 else math.inf
        return self.regret / self.budget


def regret_budget_check(ledger: RegretLedger, M_0: int, T: int, arrival_errors=None) -> BudgetReport:
    """Cumulative aggregate regret against M_0 log T + sum of arrival pre-training errors."""
    errs = ledger.arrival_error if arrival_errors is None else arrival_errors
    budget = M_0 * math.log(T) + float(np.sum(errs))
    return BudgetReport(ledger.total("r_round"), budget)


def stable_event(optimal_arms, gaps, tau: int, Delta: float) -> bool:
    """Some arm leads every round t >= tau by at least Delta."""
    arms = np.asarray(optimal_arms)[tau - 1:]
    g = np.asarray(gaps, dtype=float)[tau - 1:]
    if arms.size == 0 or np.any(arms < 0):
        return False
    return bool(np.all(arms == arms[0]) and np.all(g >= Delta))


def identification_event(estimates, truth, Delta: float) -> bool:
    return bool(np.max(np.abs(np.asarray(estimates) - np.asarray(truth))) <= Delta / 4.0)


@dataclass
class BoundReport:
    N_stab: Optional[float] = None
    N_id: Optional[float] = None
    tau_stab: Optional[int] = None
    tau_id: Optional[int] = None
    tau: Optional[int] = None
    delta_stability: Optional[float] = None
    delta_identification: Optional[float] = None
    model_terms: dict = field(default_factory=dict)
    good_event: Optional[bool] = None

    @property
    def delta_G(self) -> Optional[float]:
        if self.delta_stability is None or self.delta_identification is None:
            return None
        return self.delta_stability + self.delta_identification
