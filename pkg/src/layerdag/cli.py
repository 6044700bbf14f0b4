"""Command-line interface: ``layerdag {simulate,learn,bench,ingest,report}``.

Exit codes: 0 success, 1 usage error, 2 input/output error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import io
from .bench import BenchSpec, run_bench, summarize, write_bench
from .exceptions import (
    DataFormatError,
    EmptyResultError,
    InvalidParameterError,
    InvalidPrecisionError,
    SingularMatrixError,
)
from .ingest import ingest_timeseries, read_csse
from .learner import LearnConfig, learn
from .report import format_table, hub_table, top_edges
from .sem_model import NOISE_KINDS, generate_ba, generate_hub, layer_decompose, make_model, simulate, toy_model

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("layerdag")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_learn_options(p: argparse.ArgumentParser) -> None:
    d = LearnConfig()
    p.add_argument("--alpha", type=float, default=d.alpha, help="test level (default %(default)s)")
    p.add_argument("--c-lambda", type=float, default=d.c_lambda,
                   help="glasso penalty constant c in c*sqrt(log(max(q,n))/n) (default %(default)s)")
    p.add_argument("--permutations", type=int, default=d.n_perm, help="permutations per test (default %(default)s)")
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--zero-tol", type=float, default=d.zero_tol, help="nonzero threshold on precision entries")
    p.add_argument("--stop-after", type=int, default=d.stop_after,
                   help="end a test once this many permutations reach the observed value")
    p.add_argument("--bonferroni", action=argparse.BooleanOptionalAction, default=d.bonferroni,
                   help="divide alpha by the number of partners of each node")
    p.add_argument("--refit", action=argparse.BooleanOptionalAction, default=d.refit,
                   help="refit the precision matrix without penalty on the selected support")
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=d.standardize,
                   help="apply the penalty on the correlation scale")


def _learn_config(a) -> LearnConfig:
    return LearnConfig(alpha=a.alpha, c_lambda=a.c_lambda, n_perm=a.permutations, seed=a.seed,
                       zero_tol=a.zero_tol, stop_after=a.stop_after, bonferroni=a.bonferroni,
                       refit=a.refit, standardize=a.standardize)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="layerdag", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file of option defaults (flat key/value, keys as long options)")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="draw a random SEM and a dataset from it")
    s.add_argument("--graph", choices=("hub", "ba", "toy"), required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--p", type=int, default=4)
    s.add_argument("--noise", choices=NOISE_KINDS, default="uniform")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory for model.json and data.csv")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("learn", help="learn layers and edge weights from a CSV dataset")
    s.add_argument("input")
    s.add_argument("--out", required=True, help="output directory for learned.json and edges.csv")
    _add_learn_options(s)
    s.set_defaults(func=cmd_learn)

    s = sub.add_parser("bench", help="replicated hub/BA benchmark")
    s.add_argument("--example", choices=("hub", "ba"), required=True)
    s.add_argument("--n", type=int, default=200)
    s.add_argument("--p", type=int, default=50)
    s.add_argument("--noise", choices=NOISE_KINDS, default=None,
                   help="default: uniform for hub, scaled_uniform for ba")
    s.add_argument("--replicates", type=int, default=10)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True)
    _add_learn_options(s)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("ingest", help="CSSE cumulative counts to smoothed daily shares")
    s.add_argument("input")
    s.add_argument("--start", default="2020-03-01")
    s.add_argument("--end", default="2020-04-15")
    s.add_argument("--gap-days", type=int, default=10)
    s.add_argument("--ma-days", type=int, default=3)
    s.add_argument("--out", required=True, help="output CSV")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("report", help="hub-node and top-edge tables for a learned graph")
    s.add_argument("input", help="learned.json")
    s.add_argument("--top-hubs", type=int, default=25)
    s.add_argument("--top-edges", type=int, default=30)
    s.add_argument("--out", help="directory for hubs.csv and top_edges.csv")
    s.set_defaults(func=cmd_report)
    return parser


def cmd_simulate(a) -> int:
    if a.n < 1:
        raise UsageError(f"--n must be >= 1, got {a.n}")
    if a.graph == "toy":
        model = toy_model()
    else:
        dag = generate_hub(a.p) if a.graph == "hub" else generate_ba(a.p, 2, seed=a.seed)
        model = make_model(dag, a.noise, seed=a.seed)
    data = simulate(model, a.n, seed=a.seed)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_model(model, out / "model.json")
    io.write_dataset(data, out / "data.csv")
    print("layers:", json.dumps(layer_decompose(model.dag).as_lists()))
    return EXIT_OK


def cmd_learn(a) -> int:
    cfg = _learn_config(a)  # validate options before touching the input
    data = io.read_dataset(a.input)
    learned = learn(data, cfg)
    for d in learned.diagnostics:
        if not d.converged:
            log.warning("round %d: graphical lasso did not converge (KKT %.3g)", d.t, d.kkt)
        if d.fallback:
            log.warning("round %d: no node passed every test; used the fallback node %s", d.t, d.layer)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_learned(learned, out / "learned.json")
    io.write_edge_list(learned, out / "edges.csv")
    print(f"T={learned.T} layers={json.dumps(learned.layers.as_lists())} edges={len(learned.edges())}")
    return EXIT_OK


def cmd_bench(a) -> int:
    noise = a.noise or ("uniform" if a.example == "hub" else "scaled_uniform")
    spec = BenchSpec(a.example, a.n, a.p, noise, a.replicates, _learn_config(a), a.seed, a.jobs)
    rows = run_bench(spec)
    paths = write_bench(spec, rows, a.out)
    s = summarize(rows)
    table = [(m, s[f"{m}_mean"], "" if s[f"{m}_se"] is None else s[f"{m}_se"])
             for m in ("tpr", "fdr", "mcc", "shd", "rel_fnorm")]
    table = [(m, "NA" if v is None else v, se) for m, v, se in table]
    print(format_table(("metric", "mean", "se"), table))
    print(f"{s['completed']}/{spec.replicates} replicates; results in {paths['summary'].parent}")
    return EXIT_OK


def cmd_ingest(a) -> int:
    table = read_csse(a.input)
    data = ingest_timeseries(table, a.start, a.end, a.gap_days, a.ma_days)
    io.write_dataset(data, a.out)
    print(f"{data.n} days x {data.p} regions -> {a.out}")
    return EXIT_OK


def cmd_report(a) -> int:
    learned = io.read_learned(a.input)
    hubs = hub_table(learned, a.top_hubs)
    edges = top_edges(learned, a.top_edges)
    print(format_table(("node", "label", "children"), hubs))
    print()
    print(format_table(("parent", "child", "weight"), edges))
    if a.out:
        out = Path(a.out)
        out.mkdir(parents=True, exist_ok=True)
        for name, header, rows in (("hubs", ("node", "label", "children"), hubs),
                                   ("top_edges", ("parent", "child", "weight"), edges)):
            with (out / f"{name}.csv").open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows([[repr(v) if isinstance(v, float) else v for v in r] for r in rows])
    return EXIT_OK


def _apply_config(parser: argparse.ArgumentParser, argv) -> None:
    # config values become parser defaults, so explicit flags still win
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = io.read_json(known.config)
    if not isinstance(cfg, dict):
        raise DataFormatError(f"{known.config}: expected a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    known_keys = set()
    for p in sub.choices.values():
        dests = {a.dest for a in p._actions}
        known_keys |= dests
        p.set_defaults(**{k: v for k, v in cfg.items() if k in dests})
    unknown = sorted(set(cfg) - known_keys)
    if unknown:
        raise UsageError(f"{known.config}: unknown option(s) {', '.join(unknown)}")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(stream=sys.stderr, format="%(levelname)s: %(message)s",
                            level=logging.WARNING - 10 * min(args.verbose, 2))
        return args.func(args)
    except (UsageError, InvalidParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataFormatError, EmptyResultError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SingularMatrixError, InvalidPrecisionError, ArithmeticError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
