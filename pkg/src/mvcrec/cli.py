"""Command line entry point: ``mvcrec prepare|train|evaluate|ablate|sweep|gradcheck``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import VARIANTS, TrainConfig

OUTPUT_ENV = "MVCREC_OUTPUT_DIR"
DATA_FILES = ("vocab.tsv", "split.jsonl", "graph.edges")


class UsageError(Exception):
    pass


def _existing_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise argparse.ArgumentTypeError(f"no such file: {path}")
    return p


def _data_dir(path: str) -> Path:
    p = Path(path)
    missing = [name for name in DATA_FILES if not (p / name).is_file()]
    if missing:
        raise argparse.ArgumentTypeError(f"{path} lacks {', '.join(missing)} (run `mvcrec prepare` first)")
    return p


def _columns(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("--columns takes three comma-separated indices: user,item,timestamp")
    return tuple(int(p) for p in parts)


def output_dir(args, default: str) -> Path:
    """``--out`` if given, else ``$MVCREC_OUTPUT_DIR``, else ``default``."""
    out = args.out or os.environ.get(OUTPUT_ENV) or default
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_data(data_dir: Path):
    from .corpus import load_split, load_vocab
    from .item_graph import ItemGraph

    vocab = load_vocab(data_dir / "vocab.tsv")
    split = load_split(data_dir / "split.jsonl")
    graph = ItemGraph.load(data_dir / "graph.edges", vocab.num_items)
    return vocab, split, graph


def resolve_config(args) -> TrainConfig:
    cfg = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    try:
        cfg = cfg.with_overrides(args.set or [])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


# -- subcommands -------------------------------------------------------------


def cmd_prepare(args) -> int:
    from .corpus import apply_k_core, build_split, load_interactions, save_split, save_vocab
    from .item_graph import build_graph

    log = load_interactions(args.input, fmt=args.format, header=args.header, columns=args.columns)
    log = apply_k_core(log, args.k)
    vocab, split = build_split(log, args.max_len)
    graph = build_graph(split.train, vocab.num_items, z=args.z)
    out = output_dir(args, "data")
    save_vocab(vocab, out / "vocab.tsv")
    save_split(split, out / "split.jsonl")
    graph.save(out / "graph.edges")
    _emit({"users": len(split.users), "items": vocab.num_items, "interactions": len(log), "edges": graph.num_edges})
    return 0


def cmd_train(args) -> int:
    from .trainer import train

    cfg = resolve_config(args)
    _, split, graph = load_data(args.data)
    out = output_dir(args, "runs/train")
    (out / "config.json").write_text(cfg.to_json() + "\n")
    res = train(cfg, split, graph, out_dir=out)
    _emit({"best_epoch": res.best_epoch, "valid_NDCG@20": res.checkpoint.best_metric} | res.test.to_json())
    return 0


def cmd_evaluate(args) -> int:
    from .checkpoint import load_checkpoint
    from .trainer import evaluate_model

    ckpt = load_checkpoint(args.checkpoint)
    _, split, graph = load_data(args.data)
    if graph.num_items != ckpt.num_items:
        raise UsageError(f"checkpoint has {ckpt.num_items} items, data has {graph.num_items}")
    model = ckpt.build_model()
    _emit(evaluate_model(model, split, args.split, ckpt.epoch).to_json())
    return 0


def cmd_ablate(args) -> int:
    from .plotting import plot_ablation, write_csv
    from .trainer import ablate, summarize_ablation

    cfg = resolve_config(args)
    _, split, graph = load_data(args.data)
    seeds = [cfg.seed + i for i in range(args.num_seeds)]
    rows = ablate(cfg, split, graph, seeds, args.variants)
    out = output_dir(args, "runs/ablate")
    csv_path = write_csv(rows, out / "ablation.csv")
    plot_ablation(csv_path)
    _emit(summarize_ablation(rows))
    return 0


def cmd_sweep(args) -> int:
    from .plotting import plot_sweep, write_csv
    from .trainer import sweep

    cfg = resolve_config(args)
    _, split, graph = load_data(args.data)
    cast = float if args.param == "lambda" else int
    try:
        values = [cast(v) for v in args.values.split(",") if v]
    except ValueError:
        raise UsageError(f"bad --values {args.values!r}") from None
    if not values:
        raise UsageError("--values is empty")
    seeds = [cfg.seed + i for i in range(args.num_seeds)]
    rows = sweep(cfg, split, graph, args.param, values, seeds)
    out = output_dir(args, "runs/sweep")
    csv_path = write_csv(rows, out / "sweep.csv")
    plot_sweep(csv_path)
    _emit(rows)
    return 0


def cmd_gradcheck(args) -> int:
    from .synthetic import gradcheck_tiny

    report = gradcheck_tiny(
        num_items=args.items,
        d=args.d,
        max_len=args.max_len,
        batch_size=args.batch_size,
        variant=args.variant,
        num_samples=args.samples,
        tol=args.tol,
        seed=args.seed if args.seed is not None else 0,
    )
    print(report.summary())
    print("gradient check passed" if report.passed else "gradient check FAILED")
    return 0 if report.passed else 1


# -- parser ------------------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", type=_data_dir, required=True, help="directory written by `prepare`")
    p.add_argument("--config", type=_existing_file, help="flat JSON config (TrainConfig fields)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config field (repeatable)")
    p.add_argument("--seed", type=int, help="seed for every random choice (overrides the config)")
    p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or a runs/ subdirectory)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvcrec", description="Two-view contrastive sequential recommender.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="filter, split and build the item graph")
    p.add_argument("--input", type=_existing_file, required=True, help="interaction file (tsv/csv, optionally .gz)")
    p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or ./data)")
    p.add_argument("--format", choices=("tsv", "csv"), help="override format detection")
    p.add_argument("--header", action="store_true", help="skip the first line")
    p.add_argument("--columns", type=_columns, default=(0, 1, 2), help="user,item,timestamp column indices")
    p.add_argument("--k", type=int, default=5, help="k-core threshold")
    p.add_argument("--max-len", type=int, default=50)
    p.add_argument("--z", type=int, default=3, help="co-occurrence window")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train one model")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on one split part")
    p.add_argument("--checkpoint", type=_existing_file, required=True)
    p.add_argument("--data", type=_data_dir, required=True)
    p.add_argument("--split", choices=("valid", "test"), default="test")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="train every variant and report HR@20/NDCG@20")
    _add_config_flags(p)
    p.add_argument("--variants", nargs="+", choices=VARIANTS, default=list(VARIANTS))
    p.add_argument("--num-seeds", type=int, default=1, help="seeds seed, seed+1, ...")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="grid over one hyperparameter")
    _add_config_flags(p)
    p.add_argument("--param", choices=("lambda", "batch_size", "d"), required=True)
    p.add_argument("--values", required=True, help="comma-separated grid, e.g. 0.01,0.1,0.5")
    p.add_argument("--num-seeds", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gradcheck", help="finite-difference check of the training loss on a tiny model")
    p.add_argument("--items", type=int, default=30)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--max-len", type=int, default=6)
    p.add_argument("--batch-size", type=int, default=4)
    p.add_argument("--variant", choices=VARIANTS, default="full")
    p.add_argument("--samples", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mvcrec: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"mvcrec: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
