"""Replication management, per-round CSV output and the run summary.

Replication ``r`` uses the r-th child of ``SeedSequence(config.seed)``
(see :func:`openmab.streams.replication_seeds`), so adding replications
never changes earlier ones.  Outputs land in ``config.output`` unless the
``OPENMAB_OUTPUT_DIR`` environment variable overrides it:

``rep_000.csv``, ``rep_001.csv``, ...  one row per round, columns::

    t, M_t, A_t, a_t, i_star, Vhat_1..Vhat_K, Bstat_1..Bstat_K, EA, S_t, gap

Arms are 1-based in the CSV.  Reals are written with 17 significant digits;
absent values (no active agents, no global index) are empty cells.

``summary.json``  per-replication rows plus aggregate statistics.
"""

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..exceptions import InvalidParameterError, LemmaViolation
from ..metrics import (combined_tau, delta_good_event, identification_event, n_id, n_stab,
                       pooled_counts, stable_event, tau_id, tau_stab)
from ..simulation import RunResult, simulate
from ..streams import replication_seeds
from .config import SimConfig

OUTPUT_ENV = "OPENMAB_OUTPUT_DIR"
QUANTILES = (0.1, 0.5, 0.9)


def csv_header(K: int) -> list:
    return (["t", "M_t", "A_t", "a_t", "i_star"] + [f"Vhat_{i}" for i in range(1, K + 1)]
            + [f"Bstat_{i}" for i in range(1, K + 1)] + ["EA", "S_t", "gap"])


def _real(x: float) -> str:
    return "" if math.isnan(x) else "%.17g" % x


def write_csv(path: Path, res: RunResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(res.K))
        for t in range(1, res.T + 1):
            j = t - 1
            star = int(res.i_star[j])
            S = int(res.S[j])
            w.writerow(
                [t, int(res.M[j]), int(res.A[j]), int(res.arm[j]) + 1, star + 1 if star >= 0 else ""]
                + [_real(v) for v in res.Vhat[j].tolist()]
                + [_real(v) for v in res.Bstat[j].tolist()]
                + [_real(float(res.EA[j])), S if S >= 0 else "", _real(float(res.gap[j]))]
            )


def _clean(x):
    """JSON-safe: non-finite floats become null, numpy scalars become Python ones."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def replication_row(res: RunResult, config: SimConfig) -> dict:
    """Summary statistics of one finished replication."""
    K, T = res.K, res.T
    Delta, conf = config.gap, config.confidence
    totals = res.ledger.totals
    row = {f"regret_{c}": totals[c] for c in config.conventions}

    N_s, N_i = n_stab(Delta, conf, K, T), n_id(Delta, conf, K)
    try:
        t_s = tau_stab(res.M, N_s)
    except InvalidParameterError:
        t_s = None  # departures: the threshold crossing is not monotone
    counts = pooled_counts(res.arm, res.M, K)
    t_i = tau_id(counts, N_i)
    tau = getattr(res.policy, "tau", None) if res.policy.name == "commit_after_burnin" else None
    if tau is None:
        tau = combined_tau(t_s, t_i)
    row.update(N_stab=N_s, N_id=N_i, tau_stab=t_s, tau_id=t_i, tau=tau)

    Delta0 = delta_G = good = None
    if tau is not None:
        after = res.gap[tau - 1:]
        if after.size and not np.isnan(after).any():
            Delta0 = float(after.min())
        if Delta0 is not None and Delta < Delta0 <= 1:
            delta_G = delta_good_event(float(res.M[tau - 1]), Delta0, Delta, K, T, tau,
                                       float(counts[tau - 1].min())).probability
        est = getattr(res.policy, "burnin_estimate", None)
        if est is None and not np.isnan(res.Vhat[tau - 1]).any() and res.M[tau - 1]:
            est = res.Vhat[tau - 1] / res.M[tau - 1]
        if est is not None and not np.isnan(res.Vbar[tau - 1]).any():
            good = stable_event(res.i_star, res.gap, tau, Delta) and identification_event(
                est, res.Vbar[tau - 1], Delta)
        row["post_tau_regret_rbar_round"] = res.ledger.total("rbar_round", tau + 1)
    row.update(Delta0=Delta0, delta_G=delta_G, good_event=good)

    row["certificate_violation_rate"] = res.certificate_violation_rate
    budget = res.M_0 * math.log(T) + float(np.sum(res.ledger.arrival_error))
    row["budget"] = budget
    row["budget_ratio"] = totals["r_round"] / budget if budget > 0 else (0.0 if totals["r_round"] == 0 else math.inf)
    picked = res.Bstat[np.arange(T), res.arm]
    if np.isnan(picked).all():
        row["bstat_sum"] = row["implied_C0"] = None
    else:
        s = float(np.nansum(picked))
        row["bstat_sum"] = s
        scale = res.M_0 * math.log(T)
        row["implied_C0"] = s / scale if scale > 0 else None
    if config.coverage:
        row["coverage_miss_rate"] = res.coverage_miss_rate
    row["final_M"] = int(res.M[-1])
    return row


def aggregate(rows: list) -> dict:
    """Mean, standard deviation and quantiles of every numeric column across rows."""
    out = {}
    keys = list(dict.fromkeys(k for r in rows for k in r if k != "replication"))
    for key in keys:
        vals = [r.get(key) for r in rows]
        if key == "good_event":
            known = [v for v in vals if v is not None]
            out[key] = {"fraction": (sum(known) / len(known)) if known else None, "n": len(known)}
            continue
        nums = [float(v) for v in vals
                if isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)]
        if not nums:
            out[key] = {"n": 0}
            continue
        arr = np.array(nums)
        out[key] = {
            "n": len(nums),
            "mean": float(arr.mean()),
            "std": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
            "quantiles": {str(q): float(np.quantile(arr, q)) for q in QUANTILES},
        }
    return out


@dataclass
class RunSummary:
    rows: list
    aggregate: dict
    output: Path
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return _clean({"replications": self.rows, "aggregate": self.aggregate, "failures": self.failures})


def _replicate(config: SimConfig, r: int, seed, out_dir: Path) -> dict:
    policy = config.make_policy()
    try:
        res = simulate(config.instance, policy, seed=seed, check_lemmas=config.check_lemmas,
                       check_partitions=config.check_partitions, coverage=config.coverage)
    except LemmaViolation as e:
        return {"replication": r, "lemma_violation": {"name": e.name, "t": e.t, "detail": str(e.detail)}}
    write_csv(out_dir / f"rep_{r:03d}.csv", res)
    row = {"replication": r}
    row.update(replication_row(res, config))
    return row


def _task(args):
    return _replicate(*args)


def run_experiment(config: SimConfig, output_dir=None, jobs: Optional[int] = None) -> RunSummary:
    """Run every replication, write CSVs and ``summary.json``, and return the summary.

    ``jobs`` (default ``config.jobs``) above 1 fans replications out to worker
    processes; results are merged in replication order either way.
    """
    out = Path(output_dir or os.environ.get(OUTPUT_ENV) or config.output)
    out.mkdir(parents=True, exist_ok=True)
    seeds = replication_seeds(config.seed, config.replications)
    tasks = [(config, r, s, out) for r, s in enumerate(seeds)]
    jobs = config.jobs if jobs is None else jobs
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_task, tasks))
    else:
        rows = [_task(a) for a in tasks]

    failures = [{"replication": r["replication"], **r["lemma_violation"]} for r in rows if "lemma_violation" in r]
    done = [r for r in rows if "lemma_violation" not in r]
    summary = RunSummary(done, aggregate(done) if done else {}, out, failures)
    with open(out / "summary.json", "w") as fh:
        json.dump(summary.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return summary
