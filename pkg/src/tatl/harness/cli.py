"""Command line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical fault,
3 missing artifact.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys

from ..errors import MissingArtifactError, NumericalFault, RankDeficiencyError, TatlError
from ..transfer import TransferContext, run_transfer, transfer_log_csv
from . import config as _config
from .experiments import read_records_csv, run_experiment, summarize, write_outputs
from .pipeline import Artifacts, run_method, source_env, target_env

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_MISSING = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", help="experiment config file")
    p.add_argument("--experiment", choices=_config.EXPERIMENTS, default="ip_timevarying",
                   help="experiment whose defaults apply when no --config is given")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="tatl_out", help="output and artifact directory")
    p.add_argument("--scale", choices=_config.SCALES, default=None)
    p.add_argument("--no-build", action="store_true", help="fail instead of building missing artifacts")


def build_parser():
    parser = _Parser(prog="tatl", description="Target-apprentice transfer learning experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in [
        ("train-source", "train the source-task Q function"),
        ("fit-alignment", "fit the inter-task state map for one seed"),
        ("fit-apprentice", "learn the target apprentice model for one seed"),
        ("transfer", "run TA-TL in the target task and log every step"),
        ("baseline", "run UMA-TL or no-transfer FQI in the target task"),
        ("experiment", "run every method on every seed and write records"),
        ("summarize", "summarize a records CSV"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _common(p)
        if name == "transfer":
            p.add_argument("--episodes", type=int, default=None)
        if name == "baseline":
            p.add_argument("--method", choices=("uma_tl", "rl"), required=True)
        if name == "experiment":
            p.add_argument("--seeds", help="comma separated seeds, overriding the config")
            p.add_argument("--methods", help="comma separated methods, overriding the config")
            p.add_argument("--workers", type=int, default=None)
        if name == "summarize":
            p.add_argument("--records", required=True, help="records CSV written by 'experiment'")
    return parser


def load_cfg(args):
    if args.config:
        if not os.path.exists(args.config):
            raise MissingArtifactError(f"config file {args.config} not found")
        cfg = _config.load_config(args.config)
        if args.scale == "paper" and cfg.scale != "paper":
            cfg = _config.paper_scale(cfg)
    else:
        cfg = _config.default_config(args.experiment, args.scale or "desk")
    return cfg


def _write(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _curve_csv(curve):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["episode", "samples", "reward"])
    for i, (s, r) in enumerate(zip(curve.samples, curve.rewards)):
        w.writerow([i, s, repr(float(r))])
    return out.getvalue()


def _run(args):
    if args.command == "summarize":
        if not os.path.exists(args.records):
            raise MissingArtifactError(f"records file {args.records} not found")
        with open(args.records, encoding="utf-8") as fh:
            records = read_records_csv(fh.read())
        text = summarize(records)
        exp = records[0].experiment_id
        _write(os.path.join(args.out, f"{exp}_summary.csv"), text)
        sys.stdout.write(text)
        return

    cfg = load_cfg(args)
    build = not args.no_build
    arts = Artifacts(cfg, args.out, build)
    if args.command == "train-source":
        path = arts.path("source_q.txt")
        if os.path.exists(path):
            os.remove(path)
        arts.build = True
        _, ret = arts.source()
        print(f"source Q written to {path}; greedy return {ret:.6g}")
    elif args.command == "fit-alignment":
        arts.build = True
        m = arts.map(args.seed)
        print(f"map written to {arts.path(f'map_seed{args.seed}.txt')}; "
              f"round-trip tolerance {m.round_trip_tol:.3g}")
    elif args.command == "fit-apprentice":
        model, n = arts.apprentice(args.seed)
        print(f"apprentice written ({n} target samples); residual {model.residual_norm:.3g}")
    elif args.command == "transfer":
        q, _ = arts.source()
        model, n = arts.apprentice(args.seed)
        tgt = target_env(cfg)
        ctx = TransferContext.build(q, source_env(cfg), model, arts.map(args.seed), tgt,
                                    clamp_factor=cfg.transfer.clamp_factor)
        res = run_transfer(ctx, tgt, args.episodes or cfg.transfer.episodes, args.seed, keep_log=True)
        path = os.path.join(args.out, f"transfer_seed{args.seed}.csv")
        _write(path, transfer_log_csv(res))
        print(f"average reward {res.average_reward:.6g} over {len(res.episode_rewards)} episodes; "
              f"{n} target samples; {res.clamp_events} clamp events; log in {path}")
    elif args.command == "baseline":
        run = run_method(cfg, arts, args.method, args.seed)
        path = os.path.join(args.out, f"{args.method}_seed{args.seed}.csv")
        _write(path, _curve_csv(run.curve))
        print(f"final windowed reward {run.curve.final_average(cfg.window):.6g} after "
              f"{run.curve.total_samples} samples; curve in {path}")
    elif args.command == "experiment":
        kw = {}
        if args.seeds:
            kw["seeds"] = tuple(int(s) for s in args.seeds.split(","))
        if args.methods:
            kw["methods"] = tuple(m.strip() for m in args.methods.split(","))
        if args.workers:
            kw["workers"] = args.workers
        if kw:
            cfg = cfg.replace(**kw)
        records = run_experiment(cfg, args.out, build)
        _write(os.path.join(args.out, f"{cfg.experiment_id}_config.txt"), _config.emit_config(cfg))
        for p in write_outputs(records, args.out, cfg.experiment_id):
            print(p)


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _run(args)
    except MissingArtifactError as e:
        print(f"missing artifact: {e}", file=sys.stderr)
        return EXIT_MISSING
    except (NumericalFault, RankDeficiencyError) as e:
        print(f"numerical fault: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TatlError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
