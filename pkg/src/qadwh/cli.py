"""Command-line entry point.

Verbs: gen-synth, train, encode, query, eval, baseline. Exit status is 0 on
success, 1 for usage or input errors and 2 when training diverges.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .config import load_config
from .errors import DimensionError, DivergenceError, ParseError, QadwhError
from .evaluation import RelevanceJudge, evaluate
from .index import encode
from .model import init_params
from .pipeline import VARIANTS, encode_dataset, rank_queries, run_variant
from .synth import gen_synth
from .trainer import train

log = logging.getLogger("qadwh")

EXIT_USAGE = 1
EXIT_DIVERGED = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config(args):
    cfg = load_config(args.config)
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ParseError(f"--set expects section.key=value, got {item!r}")
        cfg.set(key.strip(), value.strip())
    return cfg.validate()


def _check_dims(params, ds, what):
    if ds.feature_dim != params.input_dim:
        raise DimensionError(f"{what} has d={ds.feature_dim}, checkpoint expects d={params.input_dim}")


def _check_codes(params, codes):
    if codes.code_length != params.code_length:
        raise DimensionError(f"codes have q={codes.code_length}, checkpoint expects q={params.code_length}")


def cmd_gen_synth(args):
    cfg = _config(args)
    n = args.n if args.n is not None else cfg["data.n"]
    m = args.num_queries if args.num_queries is not None else (cfg["data.num_queries"] if args.query_out else 0)
    seed = args.seed if args.seed is not None else cfg["data.seed"]
    if m and not args.query_out:
        raise ParseError("--num-queries needs --query-out")
    ds = gen_synth(
        n + m,
        args.d if args.d is not None else cfg["data.d"],
        args.c if args.c is not None else cfg["data.c"],
        args.multi_label_prob if args.multi_label_prob is not None else cfg["data.multi_label_prob"],
        args.noise_sigma if args.noise_sigma is not None else cfg["data.noise_sigma"],
        seed,
    )
    # both splits come from one draw so they share cluster centers
    fileio.write_dataset(ds.subset(np.arange(n)), args.out)
    if m:
        fileio.write_dataset(ds.subset(np.arange(n, n + m)), args.query_out)


def cmd_train(args):
    cfg = _config(args)
    if args.max_steps is not None:
        cfg.set("train.max_steps", args.max_steps)
    if args.seed is not None:
        cfg.set("train.seed", args.seed)
    tcfg = cfg.validate().train_config()
    ds = fileio.read_dataset(args.data)
    params = init_params([ds.feature_dim, *cfg["model.hidden"]], cfg["model.code_length"], ds.num_classes, tcfg.seed)
    params, report = train(params, ds, tcfg)
    fileio.write_checkpoint(params, args.checkpoint, report.steps, cfg.to_dict())
    if args.loss_log:
        fileio.atomic_write(args.loss_log, fileio.format_loss_log(report))
    log.info("trained %d steps", report.steps)


def cmd_encode(args):
    params, _, _ = fileio.read_checkpoint(args.checkpoint)
    ds = fileio.read_dataset(args.data)
    _check_dims(params, ds, "dataset")
    fileio.write_codes(encode_dataset(params, ds), args.out)


def _rank(args, cfg, params, codes, queries):
    mode = args.mode or cfg["retrieval.mode"]
    radius = args.radius if args.radius is not None else cfg["retrieval.radius"]
    k = args.k if args.k is not None else cfg["retrieval.k"]
    return rank_queries(params, queries, codes, mode.replace("-", "_"), radius, k or None), mode


def cmd_query(args):
    cfg = _config(args)
    params, _, _ = fileio.read_checkpoint(args.checkpoint)
    codes = fileio.read_codes(args.codes)
    queries = fileio.read_dataset(args.queries)
    _check_codes(params, codes)
    _check_dims(params, queries, "query set")
    rankings, _ = _rank(args, cfg, params, codes, queries)
    text = fileio.format_rankings(rankings)
    if args.out:
        fileio.atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


def cmd_eval(args):
    cfg = _config(args)
    params, _, _ = fileio.read_checkpoint(args.checkpoint)
    codes = fileio.read_codes(args.codes)
    queries = fileio.read_dataset(args.queries)
    database = fileio.read_dataset(args.database)
    _check_codes(params, codes)
    _check_dims(params, queries, "query set")
    if database.num_items != codes.num_items:
        raise DimensionError(f"database has {database.num_items} items, codes file {codes.num_items}")
    mode = args.mode or cfg["retrieval.mode"]
    if args.rankings:
        found = fileio.read_rankings(args.rankings)
        missing = [i for i in range(queries.num_items) if i not in found]
        if missing:
            raise ParseError(f"rankings missing for queries {missing}", args.rankings)
        rankings = [found[i] for i in range(queries.num_items)]
    else:
        rankings, mode = _rank(args, cfg, params, codes, queries)
    truncation = cfg["eval.truncation"] or None
    report = evaluate(
        rankings,
        queries.labels,
        RelevanceJudge(database.labels),
        codes=codes,
        query_codes=encode(params, queries.features),
        truncation=truncation,
        ks=cfg["eval.ks"],
        radius=cfg["eval.radius"],
        mode=mode,
    )
    text = report.to_text()
    if args.out:
        fileio.atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


def cmd_baseline(args):
    cfg = _config(args)
    tcfg = cfg.train_config()
    database = fileio.read_dataset(args.database)
    queries = fileio.read_dataset(args.queries)
    trained = None
    if args.checkpoint:
        if args.variant != "dwh":
            raise ParseError("--checkpoint is only used by the dwh variant")
        trained, _, _ = fileio.read_checkpoint(args.checkpoint)
        _check_dims(trained, database, "database")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mode = cfg["retrieval.mode"].replace("-", "_")
    result = run_variant(
        args.variant,
        database,
        queries,
        cfg["model.hidden"],
        cfg["model.code_length"],
        tcfg,
        mode=mode,
        radius=cfg["retrieval.radius"],
        truncation=cfg["eval.truncation"] or None,
        ks=cfg["eval.ks"],
        trained=trained,
    )
    steps = result.train_report.steps if result.train_report else 0
    fileio.write_checkpoint(result.params, out / "checkpoint.txt", steps, {**cfg.to_dict(), "variant": args.variant})
    if result.train_report is not None:
        fileio.atomic_write(out / "loss.tsv", fileio.format_loss_log(result.train_report))
    fileio.write_codes(result.codes, out / "codes.qdwh")
    fileio.write_rankings(result.rankings, out / "rankings.tsv")
    fileio.atomic_write(out / "report.json", result.report.to_text())
    print(f"{args.variant}\tmap={result.report.map:.6f}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qadwh", description="Query-adaptive deep weighted hashing.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    def verb(name, func, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--config", help="run config file (section.key = value)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        sp.set_defaults(func=func)
        return sp

    def ranking_flags(sp):
        sp.add_argument("--mode", choices=["exact", "two-phase"])
        sp.add_argument("--radius", type=int)
        sp.add_argument("--k", type=int, help="results per query; 0 keeps the whole database")

    sp = verb("gen-synth", cmd_gen_synth, "write a synthetic Gaussian-cluster dataset")
    sp.add_argument("--out", required=True)
    sp.add_argument("--query-out")
    sp.add_argument("--n", type=int)
    sp.add_argument("--num-queries", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--c", type=int)
    sp.add_argument("--multi-label-prob", type=float)
    sp.add_argument("--noise-sigma", type=float)
    sp.add_argument("--seed", type=int)

    sp = verb("train", cmd_train, "train a model and write a checkpoint")
    sp.add_argument("--data", required=True)
    sp.add_argument("--checkpoint", required=True, help="output checkpoint path")
    sp.add_argument("--loss-log")
    sp.add_argument("--max-steps", type=int)
    sp.add_argument("--seed", type=int)

    sp = verb("encode", cmd_encode, "write binary codes for a dataset")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)

    sp = verb("query", cmd_query, "rank the database for each query")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--codes", required=True)
    sp.add_argument("--queries", required=True)
    sp.add_argument("--out")
    ranking_flags(sp)

    sp = verb("eval", cmd_eval, "compute retrieval metrics")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--codes", required=True)
    sp.add_argument("--queries", required=True)
    sp.add_argument("--database", required=True, help="database dataset (labels are used)")
    sp.add_argument("--rankings", help="rankings TSV from 'query'; computed if omitted")
    sp.add_argument("--out")
    ranking_flags(sp)

    sp = verb("baseline", cmd_baseline, "run one ablation variant end to end")
    sp.add_argument("--variant", required=True, choices=VARIANTS)
    sp.add_argument("--database", required=True)
    sp.add_argument("--queries", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--checkpoint", help="trained QaDWH checkpoint to reuse for dwh")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (QadwhError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
