"""Command line: ``openmab {run,instance,bounds,validate}``.

Exit codes: 0 ok, 1 usage, 2 validation/assertion/domain failure, 3 I/O.
"""

import argparse
import json
import sys
from pathlib import Path

from ..exceptions import OpenMABError
from ..instances import GENERATORS, generate
from ..metrics import delta_good_event, model_identification_term, n_id, n_stab

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_IO = 0, 1, 2, 3
MODEL_KINDS = ("linear", "nonlinear", "cluster", "discovery", "zero_knowledge")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="openmab", description="Certified global UCB for open multi-agent bandits.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run the replications of a config file")
    r.add_argument("config", type=Path)
    r.add_argument("--output", type=Path, help="output directory (overrides config and environment)")
    r.add_argument("--jobs", type=int, help="worker processes")

    i = sub.add_parser("instance", help="generate an instance and save it as JSON")
    i.add_argument("kind", choices=sorted(GENERATORS))
    i.add_argument("params", nargs="*", metavar="key=value")
    i.add_argument("-o", "--output", type=Path, required=True)

    b = sub.add_parser("bounds", help="evaluate the closed-form bound calculators")
    b.add_argument("--nstab", action="store_true", help="N_stab(delta, conf, k, t)")
    b.add_argument("--nid", action="store_true", help="N_id(delta, conf, k)")
    b.add_argument("--delta-g", action="store_true", help="good-event failure bound")
    b.add_argument("--model", choices=MODEL_KINDS, help="identification-failure term of one model family")
    b.add_argument("--delta", type=float, help="gap Delta")
    b.add_argument("--conf", type=float, help="confidence delta")
    b.add_argument("--k", type=int, help="number of arms K")
    b.add_argument("--t", type=int, help="horizon T")
    b.add_argument("--delta0", type=float, help="realized gap lower bound Delta_0")
    b.add_argument("--tau", type=int, help="burn-in round tau")
    b.add_argument("--m-tau", type=float, help="population size at tau")
    b.add_argument("--n-min", type=float, help="smallest pooled arm count at tau")
    b.add_argument("--n", type=float, help="sample size N for model terms")
    b.add_argument("--d", type=int, help="feature dimension")
    b.add_argument("--p", type=int, help="nonlinear parameter dimension")
    b.add_argument("--L", type=float, help="link Lipschitz constant")
    b.add_argument("--c", type=float, default=1.0, help="model-term constant (default 1)")
    b.add_argument("--clusters", type=int, help="number of clusters C")
    b.add_argument("--lam-min", type=float, help="smallest cluster arrival rate")
    b.add_argument("--json", action="store_true", help="print a JSON object instead of lines")

    v = sub.add_parser("validate", help="run the bundled property suite")
    v.add_argument("--quick", action="store_true", help="fewer repeated runs")
    v.add_argument("--seed", type=int, default=20240601)
    return p


def _need(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError("missing " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _bounds(args) -> dict:
    if not (args.nstab or args.nid or args.delta_g or args.model):
        raise UsageError("choose at least one of --nstab, --nid, --delta-g, --model")
    out = {}
    if args.nstab:
        _need(args, "delta", "conf", "k", "t")
        out["N_stab"] = n_stab(args.delta, args.conf, args.k, args.t)
    if args.nid:
        _need(args, "delta", "conf", "k")
        out["N_id"] = n_id(args.delta, args.conf, args.k)
    if args.delta_g:
        _need(args, "m_tau", "delta0", "delta", "k", "t", "tau", "n_min")
        g = delta_good_event(args.m_tau, args.delta0, args.delta, args.k, args.t, args.tau, args.n_min)
        out.update(delta_G=g.total, delta_G_stability=g.stability_term, delta_G_identification=g.identification_term)
    if args.model:
        needs = {
            "linear": ("k", "n", "delta", "d"),
            "nonlinear": ("k", "n", "delta", "p", "L"),
            "cluster": ("k", "clusters", "n", "delta"),
            "discovery": ("clusters", "lam_min", "tau"),
            "zero_knowledge": ("k", "n", "delta"),
        }[args.model]
        _need(args, *needs)
        names = {"k": "K", "n": "N", "delta": "Delta", "clusters": "C"}
        params = {names.get(n, n): getattr(args, n) for n in needs}
        if args.model in ("linear", "nonlinear"):
            params["c"] = args.c
        out[f"model_{args.model}"] = model_identification_term(args.model, **params)
    return out


def _run(args) -> int:
    from .config import load_config
    from .runner import run_experiment

    cfg = load_config(args.config)
    summary = run_experiment(cfg, output_dir=args.output, jobs=args.jobs)
    print(f"wrote {cfg.replications} replications to {summary.output}")
    for conv in cfg.conventions:
        agg = summary.aggregate.get(f"regret_{conv}")
        if agg and agg.get("n"):
            print(f"  {conv}: mean {agg['mean']:.6g}, std {agg['std']:.6g}")
    for f in summary.failures:
        print(f"lemma check failed in replication {f['replication']}: {f['detail']}", file=sys.stderr)
    return EXIT_OK if summary.ok else EXIT_FAIL


def _instance(args) -> int:
    params = {}
    for item in args.params:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"expected key=value, got {item!r}")
        params[key] = value
    spec = generate(args.kind, params)
    spec.save(args.output)
    print(f"wrote {args.kind} instance (K={spec.K}, T={spec.T}, M_0={spec.M_0}) to {args.output}")
    return EXIT_OK


def _validate(args) -> int:
    from .validate import validate

    report = validate(seed=args.seed, quick=args.quick)
    print(report)
    return EXIT_OK if report.ok else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "instance":
            return _instance(args)
        if args.command == "bounds":
            values = _bounds(args)
            if args.json:
                print(json.dumps(values, sort_keys=True))
            else:
                for k, v in values.items():
                    print(f"{k} = {v:.10g}")
            return EXIT_OK
        return _validate(args)
    except UsageError as e:
        parser.error(str(e))
    except OSError as e:
        print(f"openmab: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (OpenMABError, ValueError, AssertionError) as e:
        print(f"openmab: {e}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
