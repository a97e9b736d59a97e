"""Bundled property checks over a small instance battery.

``validate()`` runs every module's invariants at desk scale (T <= 2000,
at most a few hundred active agents) and returns one entry per property.
Failures are report entries, never exceptions.
"""

import json
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import mpmath
import numpy as np

from ..exceptions import LemmaViolation, OpenMABError
from ..instances import (clustered_stable, flip_signs, gen_clustered, gen_linear, gen_pivotal,
                         gen_random_tabular, gen_stable_pair, gen_zero_knowledge_blocks, InstanceSpec)
from ..metrics import (CONVENTIONS, bernoulli_kl, combined_tau, delta_good_event, model_identification_term,
                       n_id, n_stab, p_good)
from ..policy import CertifiedGlobalUCB, GlobalIndex, Oracle, Policy, UniformRandom, select_arm
from ..population import AgentPattern, AgentProfile, ArrivalClass, LifetimeLaw, population_sizes, population_trajectory
from ..rewards import LinearModel, LogisticLink, one_step_stability_applies
from ..simulation import simulate
from ..transfer import (ClusterStats, cluster_inherit, linear_param_transfer, nonlinear_param_transfer,
                        round_pretraining_error, zero_knowledge_init)
from .config import SimConfig
from .runner import csv_header, run_experiment

REL_TOL = 1e-10
COVERAGE_LIMIT = 0.05


@dataclass(frozen=True)
class PropertyResult:
    module: str
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.module}: {self.name} ({self.detail})"


@dataclass
class ValidationReport:
    results: list

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.results)

    def failed(self) -> list:
        return [r for r in self.results if not r.passed]

    def __str__(self) -> str:
        lines = [r.line() for r in self.results]
        lines.append(f"{sum(r.passed for r in self.results)}/{len(self.results)} properties pass")
        return "\n".join(lines)


class FixedArm(Policy):
    """Always pulls one arm; used for symmetry checks."""

    name = "fixed_arm"

    def __init__(self, arm: int):
        self.arm = arm

    def select(self, t, snapshot, agents, truth=None):
        return self.arm


# ---- population

def _patterns():
    return [
        ("poisson+departures", AgentPattern.poisson(2.0, 1.5)),
        ("poisson+lifetimes", AgentPattern.poisson(1.0, 0.0, LifetimeLaw.geometric(0.2))),
        ("schedule", AgentPattern.schedule([3, 0, 1, 0, 5, 2] * 30, [0, 2, 4, 1, 0, 6] * 30)),
        ("trace", AgentPattern.trace([(1, "arrive", 10), (2, "arrive", 11), (2, "depart", 0),
                                      (3, "depart", 10), (4, "arrive", 12), (5, "depart", 11)])),
    ]


def check_partitions(seed: int):
    n = 0
    for name, pat in _patterns():
        snaps = population_trajectory(pat, 4, 180, seed=seed)
        prev = None
        for s in snaps:
            s.check(prev)
            prev = s
            n += 1
    for spec in (gen_zero_knowledge_blocks(2, 0.5, 0.5, 0.5, 0.25, 300, seed=seed),
                 gen_random_tabular(3, 300, 5, 1.0, 0.8, seed=seed)):
        simulate(spec, CertifiedGlobalUCB(), seed=seed, check_partitions=True)
        n += spec.T
    return True, f"{n} rounds"


def check_positive_part(seed: int):
    rng = np.random.default_rng(seed)
    A = rng.integers(0, 4, 300).tolist()
    D = rng.integers(0, 6, 300).tolist()
    snaps = population_trajectory(AgentPattern.schedule(A, D), 3, 300, seed=seed)
    m = 3
    for t, s in enumerate(snaps):
        m = max(0, m + A[t] - D[t])
        if s.size != m:
            return False, f"round {t + 1}: size {s.size} != {m}"
    return True, "300 scheduled rounds, sizes hit zero {} times".format(sum(s.size == 0 for s in snaps))


def check_population_determinism(seed: int):
    for name, pat in _patterns():
        a = population_trajectory(pat, 4, 150, seed=seed)
        b = population_trajectory(pat, 4, 150, seed=seed)
        if a != b:
            return False, f"{name}: trajectories differ"
    return True, f"{len(_patterns())} pattern kinds"


def check_nondecreasing(seed: int):
    for s in range(20):
        sizes = population_sizes(AgentPattern.poisson(1.0), 0, 2000, seed=seed + s)
        if np.any(np.diff(sizes) < 0):
            return False, f"seed {seed + s} shrank"
    return True, "20 runs of 2000 rounds"


# ---- rewards

def _lemma_runs(n_runs: int, seed: int, T: int = 200):
    """No-departure Bernoulli runs with runtime lemma checks; returns run stats."""
    viol = {"arrival perturbation": 0, "one-step stability": 0}
    applicable = argmax_bad = rounds = 0
    for r in range(n_runs):
        spec = gen_random_tabular(3, T, 5, 1.0, seed=seed + r)
        state = {"prev": None}

        def observe(t, snap, policy, gv, state=state):
            nonlocal applicable, argmax_bad, rounds
            rounds += 1
            if gv is None:
                return
            if int(np.argmax(gv.unnormalized)) != int(np.argmax(gv.normalized)) or \
                    gv.optimal_arm != int(np.argmax(gv.normalized)):
                argmax_bad += 1
            prev = state["prev"]
            if prev is not None and one_step_stability_applies(prev, gv.size, snap.n_arrivals):
                applicable += 1
            state["prev"] = gv

        try:
            simulate(spec, CertifiedGlobalUCB(), seed=seed + r, check_lemmas=True, observers=[observe])
        except LemmaViolation as e:
            viol[e.name] = viol.get(e.name, 0) + 1
    return viol, applicable, argmax_bad, rounds


def check_linear_cauchy_schwarz(seed: int):
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(500):
        K, d = int(rng.integers(1, 4)), int(rng.integers(1, 6))
        th = np.abs(rng.normal(size=(K, d)))
        th /= np.maximum(1.0, np.linalg.norm(th, axis=1, keepdims=True))
        th_hat = np.abs(rng.normal(size=(K, d)))
        th_hat /= np.maximum(1.0, np.linalg.norm(th_hat, axis=1, keepdims=True))
        x = np.abs(rng.normal(size=d))
        x *= rng.random() / np.linalg.norm(x)
        agent = AgentProfile(0, 0, th @ x, features=x)
        diff = np.abs(LinearModel(th_hat).means(agent) - LinearModel(th).means(agent))
        worst = max(worst, float(np.max(diff - np.linalg.norm(th_hat - th, axis=1))))
    return worst <= 1e-12, f"max slack violation {worst:.3g} over 500 draws"


# ---- transfer

def _unit(rng, d):
    u = rng.normal(size=d)
    return u / np.linalg.norm(u) * rng.random()


def check_certificate_soundness(seed: int):
    rng = np.random.default_rng(seed)
    bad = n = 0
    for _ in range(300):
        K, d, J = int(rng.integers(1, 4)), int(rng.integers(1, 5)), int(rng.integers(1, 6))
        th = np.abs(rng.normal(size=(K, d)))
        th /= 2 * np.maximum(1.0, np.linalg.norm(th, axis=1, keepdims=True))
        x = np.abs(rng.normal(size=d))
        x *= rng.random() / np.linalg.norm(x)
        certs = rng.uniform(0.0, 0.3, J)
        neigh = [(th + np.array([c * _unit(rng, d) for _ in range(K)]), c) for c in certs]
        w = rng.dirichlet(np.ones(J))
        out = linear_param_transfer(x, neigh, w, K=K)
        bad += float(np.max(np.abs(out.estimates - th @ x))) > out.certificate + 1e-12
        link = LogisticLink()
        out = nonlinear_param_transfer(x, neigh, w, K=K)
        truth = np.array([link(x, t) for t in th])
        bad += float(np.max(np.abs(out.estimates - truth))) > out.certificate + 1e-12
        # cluster: empirical means honest within the Hoeffding radius
        C = int(rng.integers(1, 4))
        thetas = rng.random((C, K))
        stats = ClusterStats(C, K)
        stats.counts[:] = rng.integers(0, 30, (C, K))
        rad = stats.radius(0.5, 0.05, 100)
        stats.sums[:] = stats.counts * np.clip(thetas + rng.uniform(-1, 1, (C, K)) * rad, 0, 1)
        for c in range(C):
            out = cluster_inherit(c, stats, 0.5, 0.05, 100)
            bad += float(np.max(np.abs(out.estimates - thetas[c]))) > out.certificate + 1e-12
        n += 2 + C
    return bad == 0, f"{bad} unsound of {n} transfers"


def check_round_level_P(seed: int):
    rng = np.random.default_rng(seed)
    if round_pretraining_error([]) != (0.0, math.inf):
        return False, "empty batch is not (0, inf)"
    for _ in range(200):
        batch = rng.random(int(rng.integers(1, 10))).tolist()
        P, D = round_pretraining_error(batch)
        if P != max(batch) or D != 1.0 / P:
            return False, f"batch {batch}: got {(P, D)}"
    return True, "200 batches plus the empty batch"


def check_zero_knowledge(seed: int):
    rng = np.random.default_rng(seed)
    for _ in range(500):
        K = int(rng.integers(1, 8))
        mu = rng.random(K)
        out = zero_knowledge_init(K)
        if out.certificate != 1.0 or float(np.max(np.abs(out.estimates - mu))) > 1.0:
            return False, f"means {mu.tolist()}"
    return True, "500 mean vectors"


# ---- policy

def check_shift_invariance(seed: int):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(10_000):
        K = int(rng.integers(1, 7))
        idx = GlobalIndex(rng.random(K) * 50, rng.random(K) * 10, float(rng.random() * 20))
        base = select_arm(idx)
        shift = float(rng.normal() * 5)
        bad += base != select_arm(GlobalIndex(idx.estimate, idx.stat_bonus, 0.0))
        bad += base != select_arm(idx.index + shift)
    return bad == 0, f"{bad} mismatches over 10000 indices"


class _TripleWatch:
    """Observer checking radius monotonicity and the unpulled-arm frame rule."""

    def __init__(self):
        self.prev = None
        self.rho_up = self.frame = self.entry = 0

    def __call__(self, t, snap, policy, gv):
        st = policy.stats
        ids = st.active_ids.copy()
        n, mu, rho = st._n[:, : st.size].copy(), st.mu.copy(), st.rho.copy()
        a = select_arm(policy.index)
        A = snap.n_arrivals
        if A:
            certs = np.array([o.certificate for o in policy.entry])
            self.entry += int(np.sum(rho[:, st.size - A:] > certs))
        if self.prev is not None:
            pids, pn, pmu, prho = self.prev
            pos = {aid: j for j, aid in enumerate(pids.tolist())}
            cols = [j for j, aid in enumerate(ids.tolist()) if aid in pos]
            old = [pos[ids[j]] for j in cols]
            self.rho_up += int(np.sum(rho[:, cols] > prho[:, old]))
            others = [i for i in range(st.K) if i != a]
            for arr, parr in ((n, pn), (mu, pmu), (rho, prho)):
                self.frame += int(np.sum(arr[others][:, cols] != parr[others][:, old]))
        self.prev = (ids, n, mu, rho)


def _watched_runs(seed: int, update_rule):
    watches = []
    specs = [gen_random_tabular(3, 300, 5, 1.0, 0.5, seed=seed),
             clustered_stable(300, M_0=20),
             gen_pivotal(300, [1, 0] * 150, 0.3, M_0=4, seed=seed),
             gen_zero_knowledge_blocks(2, 0.5, 0.5, 0.5, 0.25, 300, seed=seed)]
    for k, spec in enumerate(specs):
        w = _TripleWatch()
        simulate(spec, CertifiedGlobalUCB(update_rule=update_rule), seed=seed + k, check_lemmas=False, observers=[w])
        watches.append(w)
    return watches


def check_oracle_dominance(seed: int, n_runs: int = 100):
    spec = clustered_stable(300, M_0=20)
    wins = 0
    for r in range(n_runs):
        ucb = simulate(spec, CertifiedGlobalUCB(), seed=seed + r, check_lemmas=False).ledger.total("r_round")
        orc = simulate(spec, Oracle(), seed=seed + r, check_lemmas=False).ledger.total("r_round")
        uni = simulate(spec, UniformRandom(), seed=seed + r, check_lemmas=False).ledger.total("r_round")
        if orc != 0.0 or ucb < 0:
            return False, f"seed {seed + r}: oracle {orc}, ucb {ucb}"
        wins += ucb <= uni
    return wins >= 0.95 * n_runs, f"ucb <= uniform in {wins}/{n_runs} runs"


def check_coverage(seed: int):
    misses = pairs = 0
    specs = [gen_random_tabular(3, 400, 5, 1.0, seed=seed), clustered_stable(400, M_0=20),
             gen_zero_knowledge_blocks(2, 0.5, 0.5, 0.5, 0.25, 400, seed=seed),
             gen_random_tabular(2, 400, 20, 0.5, 0.5, seed=seed + 1)]
    for k, spec in enumerate(specs):
        res = simulate(spec, CertifiedGlobalUCB(C1=2.0, beta=0.5), seed=seed + k, check_lemmas=False, coverage=True)
        misses += res.coverage_misses
        pairs += res.coverage_pairs
    rate = misses / pairs if pairs else 0.0
    return rate < COVERAGE_LIMIT, f"miss rate {rate:.3g} over {pairs} (agent, arm, round) triples"


# ---- metrics

def check_regret_bookkeeping(seed: int):
    for k, spec in enumerate([gen_random_tabular(3, 300, 5, 1.0, 0.6, seed=seed),
                              gen_zero_knowledge_blocks(2, 0.5, 0.5, 0.5, 0.25, 300, seed=seed)]):
        led = simulate(spec, UniformRandom(), seed=seed + k, check_lemmas=False).ledger
        for c in CONVENTIONS:
            if np.any(led.per_round(c) < 0):
                return False, f"negative {c}"
        M = np.array(led.sizes, dtype=float)
        g = led.per_round("r_round")
        with np.errstate(invalid="ignore", divide="ignore"):
            want = np.where(M > 0, g / np.maximum(M, 1), 0.0)
        if not np.array_equal(led.per_round("rbar_round"), want):
            return False, "rbar_round != r_round / M_t"
    return True, "2 runs, 4 conventions"


def _rel(a, b) -> float:
    b = mpmath.mpf(b)
    if b == 0:
        return 0.0 if a == 0 else math.inf
    return float(abs((mpmath.mpf(a) - b) / b))


def reference_values(rng: np.random.Generator) -> list:
    """(name, computed, mpmath reference) for one random parameter draw per calculator."""
    mp = mpmath
    D = float(rng.uniform(0.05, 1.0))
    conf = float(rng.uniform(0.001, 0.5))
    K = int(rng.integers(1, 20))
    T = int(rng.integers(10, 10**5))
    out = [
        ("n_stab", n_stab(D, conf, K, T), 8 / mp.mpf(D) ** 2 * mp.log(2 * mp.mpf(K) * T / mp.mpf(conf))),
        ("n_id", n_id(D, conf, K), 8 / mp.mpf(D) ** 2 * mp.log(2 * mp.mpf(K) / mp.mpf(conf))),
    ]
    D0 = float(rng.uniform(D + 0.01, 1.0)) if D < 0.99 else 1.0
    D = min(D, D0 - 1e-3)
    tau = int(rng.integers(1, T + 1))
    Mt, Nm = float(rng.uniform(0, 500)), float(rng.uniform(0, 2000))
    ref = (2 * mp.mpf(K) * (T - tau + 1) * mp.exp(-mp.mpf(Mt) * (mp.mpf(D0) - D) ** 2 / 2)
           + 2 * mp.mpf(K) * mp.exp(-mp.mpf(Nm) * mp.mpf(D) ** 2 / 8))
    out.append(("delta_good_event", delta_good_event(Mt, D0, D, K, T, tau, Nm).total, ref))
    N, d, p, L, C = float(rng.uniform(1, 5000)), int(rng.integers(1, 10)), int(rng.integers(1, 10)), \
        float(rng.uniform(0.1, 1)), int(rng.integers(1, 6))
    c = float(rng.uniform(0.5, 2))
    lam, tau2 = float(rng.uniform(0.01, 2)), int(rng.integers(1, 200))
    mD = mp.mpf(D)
    # keep the exponent above float underflow so the comparison is meaningful
    N_nl = float(rng.uniform(0, 600)) * 16 * L**2 * p / (c * D**2)
    out += [
        ("model:linear", model_identification_term("linear", K=K, N=N, Delta=D, d=d, c=c),
         2 * mp.mpf(K) * mp.exp(-mp.mpf(c) * N * mD**2 / (16 * mp.mpf(d)))),
        ("model:nonlinear", model_identification_term("nonlinear", K=K, N=N_nl, Delta=D, p=p, L=L, c=c),
         2 * mp.mpf(K) * mp.exp(-mp.mpf(c) * N_nl * mD**2 / (16 * mp.mpf(L) ** 2 * p))),
        ("model:cluster", model_identification_term("cluster", K=K, C=C, N=N, Delta=D),
         2 * mp.mpf(K) * C * mp.exp(-mp.mpf(N) * mD**2 / 8)),
        ("model:discovery", model_identification_term("discovery", C=C, lam_min=lam, tau=tau2),
         C * mp.exp(-mp.mpf(lam) * tau2)),
        ("model:zero_knowledge", model_identification_term("zero_knowledge", K=K, N=N, Delta=D),
         2 * mp.mpf(K) * mp.exp(-mp.mpf(N) * mD**2 / 8)),
    ]
    lI, H0, q = float(rng.uniform(0.01, 3)), int(rng.integers(1, 30)), float(rng.uniform(0.01, 0.99))
    out.append(("p_good", p_good(lI, H0, q),
                mp.mpf(lI) * mp.exp(-mp.mpf(lI) * H0) * (1 - mp.mpf(q)) ** (H0 - 1) * q))
    pp, qq = float(rng.uniform(0, 1)), float(rng.uniform(0.001, 0.999))
    P, Q = mp.mpf(pp), mp.mpf(qq)
    out.append(("bernoulli_kl", bernoulli_kl(pp, qq), P * mp.log(P / Q) + (1 - P) * mp.log((1 - P) / (1 - Q))))
    return out


def check_calculators(seed: int, draws: int = 100):
    rng = np.random.default_rng(seed)
    worst = {}
    with mpmath.workdps(40):
        for _ in range(draws):
            for name, got, ref in reference_values(rng):
                worst[name] = max(worst.get(name, 0.0), _rel(got, ref))
    bad = {k: v for k, v in worst.items() if not v <= REL_TOL}
    top = max(worst.values())
    return not bad, f"max relative error {top:.2g} over {draws} draws" + (f"; failing {bad}" if bad else "")


def check_combined_tau(seed: int):
    rng = np.random.default_rng(seed)
    for _ in range(500):
        a, b = (int(v) for v in rng.integers(1, 10**6, 2))
        if combined_tau(a, b) != max(a, b):
            return False, f"tau({a}, {b})"
    ok = combined_tau(None, 3) is None and combined_tau(3, None) is None
    return ok, "500 pairs plus missing values"


# ---- instances

def _battery(seed: int) -> list:
    specs = [
        gen_random_tabular(3, 100, 5, 1.0, 0.2, seed=seed),
        gen_pivotal(100, [1, 0, 2] * 30, 0.25, seed=seed),
        gen_zero_knowledge_blocks(2, 0.5, 0.5, 0.5, 0.25, 100, seed=seed),
        gen_clustered(2, [[0.6, 0.3], [0.5, 0.2]], [0.5, 0.5], [3, 0], 100, seed=seed),
        clustered_stable(100, M_0=10),
        gen_linear(2, [[0.5, 0.3], [0.2, 0.6]], 1.0, 100, seed=seed),
        gen_linear(2, [[0.5, 0.3], [0.2, 0.6]], 2.0, 100, link="logistic", seed=seed),
    ]
    specs.extend(gen_stable_pair(0.1, 100))
    return specs


def check_instance_revalidation(seed: int):
    n = 0
    for spec in _battery(seed):
        spec.validate()
        InstanceSpec.from_json(spec.to_json())  # from_dict re-validates
        n += 1
    return True, f"{n} generated instances"


def check_round_trip(seed: int):
    for spec in _battery(seed):
        text = spec.to_json()
        again = InstanceSpec.from_json(text).to_json()
        if again != text:
            return False, f"{spec.name}: re-serialization differs"
        with tempfile.TemporaryDirectory() as d:
            p = Path(d) / "spec.json"
            spec.save(p)
            if InstanceSpec.load(p).to_json() != text:
                return False, f"{spec.name}: file round-trip differs"
    return True, f"{len(_battery(seed))} instances"


def check_pivotal_symmetry(seed: int):
    for k in range(5):
        spec = gen_pivotal(200, np.random.default_rng(seed + k).integers(0, 3, 200).tolist(), 0.3, seed=seed + k)
        flipped = flip_signs(spec)
        for arm in (0, 1):
            a = simulate(spec, FixedArm(arm), seed=seed, check_lemmas=False).ledger.per_round("r_round")
            b = simulate(flipped, FixedArm(1 - arm), seed=seed, check_lemmas=False).ledger.per_round("r_round")
            if not np.array_equal(a, b):
                return False, f"instance {k}, arm {arm + 1}: trajectories differ"
    return True, "5 instances, both fixed-arm policies"


# ---- harness

def _tiny_config(out: Path, seed: int) -> SimConfig:
    spec = gen_random_tabular(2, 120, 4, 1.0, 0.3, seed=seed)
    return SimConfig(instance=spec, replications=2, seed=seed, output=out, coverage=True)


def check_harness_determinism(seed: int):
    with tempfile.TemporaryDirectory() as d:
        a, b = Path(d) / "a", Path(d) / "b"
        run_experiment(_tiny_config(a, seed))
        run_experiment(_tiny_config(b, seed))
        names = sorted(p.name for p in a.iterdir())
        if names != sorted(p.name for p in b.iterdir()):
            return False, "different file sets"
        for name in names:
            if (a / name).read_bytes() != (b / name).read_bytes():
                return False, f"{name} differs"
    return True, f"{len(names)} files byte-identical"


def check_csv_schema(seed: int):
    expected = ["t", "M_t", "A_t", "a_t", "i_star", "Vhat_1", "Vhat_2", "Bstat_1", "Bstat_2", "EA", "S_t", "gap"]
    if csv_header(2) != expected:
        return False, f"header {csv_header(2)}"
    with tempfile.TemporaryDirectory() as d:
        cfg = _tiny_config(Path(d), seed)
        run_experiment(cfg)
        lines = (Path(d) / "rep_000.csv").read_text().splitlines()
        summary = json.loads((Path(d) / "summary.json").read_text())
    if lines[0].split(",") != expected or len(lines) != cfg.T + 1:
        return False, "csv header or row count"
    if len(summary["replications"]) != 2:
        return False, "summary rows"
    return True, f"{len(expected)} columns, {cfg.T} rows"


def validate(update_rule: Optional[Callable] = None, seed: int = 20240601, quick: bool = False) -> ValidationReport:
    """Run the whole battery.  ``update_rule`` replaces the UCB update in the
    radius and frame checks (a negative-control hook); ``quick`` shrinks the
    repeated-run properties."""
    results = []

    def record(module, name, fn, *args):
        t0 = time.perf_counter()
        try:
            ok, detail = fn(*args)
        except (OpenMABError, AssertionError, ValueError) as e:
            ok, detail = False, f"{type(e).__name__}: {e}"
        results.append(PropertyResult(module, name, bool(ok), detail, time.perf_counter() - t0))

    record("population", "snapshot partition invariants", check_partitions, seed)
    record("population", "positive-part size law", check_positive_part, seed)
    record("population", "trajectory determinism", check_population_determinism, seed)
    record("population", "nondecreasing size without departures", check_nondecreasing, seed)

    t0 = time.perf_counter()
    n_runs = 20 if quick else 100
    viol, applicable, argmax_bad, rounds = _lemma_runs(n_runs, seed)
    dt = time.perf_counter() - t0
    results += [
        PropertyResult("rewards", "argmax agreement of V and Vbar", argmax_bad == 0,
                       f"{argmax_bad} disagreements over {rounds} rounds", dt),
        PropertyResult("rewards", "arrival perturbation lemma", viol["arrival perturbation"] == 0,
                       f"{viol['arrival perturbation']} violating runs of {n_runs}", 0.0),
        PropertyResult("rewards", "one-step stability lemma", viol["one-step stability"] == 0,
                       f"{viol['one-step stability']} violating runs of {n_runs}; {applicable} rounds in scope", 0.0),
    ]
    record("rewards", "linear Cauchy-Schwarz bound", check_linear_cauchy_schwarz, seed)

    record("transfer", "certificate soundness with honest neighbors", check_certificate_soundness, seed)
    record("transfer", "round-level P_t is the batch maximum", check_round_level_P, seed)
    record("transfer", "zero-knowledge certificate dominates", check_zero_knowledge, seed)

    record("policy", "argmax shift invariance", check_shift_invariance, seed)
    t0 = time.perf_counter()
    try:
        watches = _watched_runs(seed, update_rule)
        up = sum(w.rho_up + w.entry for w in watches)
        frame = sum(w.frame for w in watches)
        dt = time.perf_counter() - t0
        results.append(PropertyResult("policy", "radius monotonicity", up == 0,
                                      f"{up} radius increases over {len(watches)} runs", dt))
        results.append(PropertyResult("policy", "unpulled-arm frame rule", frame == 0,
                                      f"{frame} changed unpulled entries", 0.0))
    except (OpenMABError, AssertionError, ValueError) as e:
        for name in ("radius monotonicity", "unpulled-arm frame rule"):
            results.append(PropertyResult("policy", name, False, f"{type(e).__name__}: {e}"))
    record("policy", "oracle dominance", check_oracle_dominance, seed, 20 if quick else 100)
    record("policy", "confidence coverage below 5%", check_coverage, seed)

    record("metrics", "regret nonnegativity and normalization", check_regret_bookkeeping, seed)
    record("metrics", "calculators match mpmath", check_calculators, seed)
    record("metrics", "tau is the max of tau_stab and tau_id", check_combined_tau, seed)

    record("instances", "generated instances re-validate", check_instance_revalidation, seed)
    record("instances", "serialization round-trip", check_round_trip, seed)
    record("instances", "pivotal sign-flip symmetry", check_pivotal_symmetry, seed)

    record("harness", "run determinism", check_harness_determinism, seed)
    record("harness", "csv schema", check_csv_schema, seed)
    return ValidationReport(results)
