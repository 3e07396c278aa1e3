"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Flag values take precedence over an optional JSON config file, which takes
precedence over built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .classifier import COSINE, EUCLIDEAN, read_predictions, write_predictions
from .corpus import NONE_TYPE, enumerate_spans, load_conll_bio, load_jsonl, load_type_file
from .embeddings import hash_embed, max_pool, read_embedding_file, write_embedding_file
from .errors import DataError, NumericError, UsageError
from .evaluation import aggregate, score, write_aggregate_csv, write_report_json
from .projection import represent_span
from .prototypes import write_distance_csv
from .sampler import make_episodes, sample_support_suite, write_episode, write_support_set
from .trainer import (
    AdaptConfig,
    TrainConfig,
    adapt,
    load_checkpoint,
    recognize,
    save_checkpoint,
    train,
    write_loss_history,
)

TRAIN_DEFAULTS = {
    "tau": 2.0,
    "epsilon": 10,
    "batch_size": 2,
    "none_span_count": 20,
    "learning_rate": 5e-5,
    "weight_decay": 0.01,
    "seed": 0,
    "d1": 512,
    "d3": 25,
    "hidden": 512,
    "epochs": None,
    "hash_seed": 0,
}


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(f"{self.format_usage()}{message}")


def _add_embedding_source(parser):
    parser.add_argument("--embeddings", help="EPNE embedding file")
    parser.add_argument("--hash-dim", type=int,
                        help="use the built-in hash embedder at this dimension")
    parser.add_argument("--hash-seed", type=int, default=None, help="hash embedder seed")


def _load_dataset(path, type_names=None):
    """JSONL by default; .conll/.bio/.iob suffixes select the CoNLL reader."""
    if str(path).endswith((".conll", ".bio", ".iob")):
        return load_conll_bio(path, type_names)
    return load_jsonl(path, type_names)


def _load_store(args, dataset, hash_seed=0):
    if args.embeddings:
        return read_embedding_file(args.embeddings, dataset)
    if args.hash_dim:
        seed = args.hash_seed if args.hash_seed is not None else hash_seed
        return hash_embed(dataset, args.hash_dim, seed)
    raise UsageError("either --embeddings or --hash-dim is required")


def _merged(args, key, config):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return TRAIN_DEFAULTS[key]


def _train_config(args) -> TrainConfig:
    config = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
    epochs = _merged(args, "epochs", config)
    if epochs is None:
        raise UsageError("--epochs is required (flag or config file)")
    return TrainConfig(
        epochs=int(epochs),
        tau=float(_merged(args, "tau", config)),
        epsilon=int(_merged(args, "epsilon", config)),
        batch_size=int(_merged(args, "batch_size", config)),
        none_span_count=int(_merged(args, "none_span_count", config)),
        learning_rate=float(_merged(args, "learning_rate", config)),
        weight_decay=float(_merged(args, "weight_decay", config)),
        seed=int(_merged(args, "seed", config)),
        d1=int(_merged(args, "d1", config)),
        d3=int(_merged(args, "d3", config)),
        hidden=int(_merged(args, "hidden", config)),
        use_distance_loss=not (args.no_distance_loss or config.get("no_distance_loss", False)),
        similarity=COSINE if (args.cosine or config.get("cosine", False)) else EUCLIDEAN,
        cpnet=args.cpnet or config.get("cpnet", False),
    )


def _cmd_train(args):
    types = load_type_file(args.types) if args.types else None
    dataset = _load_dataset(args.data, types)
    cfg = _train_config(args)
    store = _load_store(args, dataset, hash_seed=cfg.seed)
    ckpt = train(dataset, store, cfg)
    save_checkpoint(ckpt, args.out)
    if args.loss_csv:
        write_loss_history(ckpt.loss_history, args.loss_csv)
    print(f"trained checkpoint written to {args.out} "
          f"({len(ckpt.loss_history)} optimizer steps)")


def _cmd_adapt(args):
    ckpt = load_checkpoint(args.model)
    support = _load_dataset(args.support)
    store = _load_store(args, support, hash_seed=ckpt.config.get("seed", 0))
    cfg = AdaptConfig(
        max_steps=args.max_steps,
        patience=args.patience,
        learning_rate=args.lr,
        weight_decay=args.weight_decay,
        seed=args.seed,
        use_distance_loss=False if args.no_distance_loss else None,
    )
    adapted = adapt(ckpt, support, store, cfg)
    save_checkpoint(adapted, args.out)
    if args.loss_csv:
        write_loss_history(adapted.loss_history, args.loss_csv)
    print(f"adapted checkpoint written to {args.out} "
          f"({len(adapted.loss_history)} optimizer steps)")


def _cmd_recognize(args):
    ckpt = load_checkpoint(args.model)
    query = _load_dataset(args.query)
    store = _load_store(args, query, hash_seed=ckpt.config.get("seed", 0))
    results = recognize(ckpt, query, store)
    write_predictions(results, args.out)
    total = sum(len(preds) for _, preds in results)
    print(f"{total} entities predicted over {len(results)} sentences -> {args.out}")


def _cmd_evaluate(args):
    gold = _load_dataset(args.gold)
    if args.multi:
        pred_files = sorted(Path(args.multi).glob("*.jsonl"))
        if not pred_files:
            raise DataError(f"no prediction files (*.jsonl) under {args.multi}")
        reports = [score(read_predictions(p), gold) for p in pred_files]
        agg = aggregate(reports)
        for path, report in zip(pred_files, reports):
            print(f"{path.name}: F1 {report.f1:.4f}")
        print(f"mean {agg.mean:.4f} std {agg.std:.4f}")
        if args.report:
            write_aggregate_csv(agg, args.report, run_names=[p.name for p in pred_files])
    else:
        if not args.pred:
            raise UsageError("either --pred or --multi is required")
        report = score(read_predictions(args.pred), gold)
        if args.report:
            write_report_json(report, args.report)
        print(f"precision {report.precision:.4f}")
        print(f"recall {report.recall:.4f}")
        print(f"F1 {report.f1:.4f}")


def _cmd_sample_support(args):
    dev = _load_dataset(args.dev, load_type_file(args.types) if args.types else None)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sets = sample_support_suite(dev, dev.type_system, args.k, args.n_sets, args.seed)
    for i, support in enumerate(sets):
        write_support_set(
            support,
            out_dir / f"support_{i}.jsonl",
            out_dir / f"support_{i}.manifest.json",
        )
        flag = "" if support.complete else " (incomplete pool)"
        print(f"support_{i}.jsonl: {len(support.dataset)} sentences{flag}")


def _cmd_episodes(args):
    data = _load_dataset(args.data)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    episodes = make_episodes(data, args.n_way, args.k_shot, args.n_episodes, args.seed)
    for i, episode in enumerate(episodes):
        write_episode(
            episode,
            out_dir / f"episode_{i}_support.jsonl",
            out_dir / f"episode_{i}_query.jsonl",
            out_dir / f"episode_{i}.manifest.json",
        )
    print(f"{len(episodes)} episodes written to {out_dir}")


def _cmd_inspect(args):
    ckpt = load_checkpoint(args.model)
    if args.distances_csv:
        if args.slots == "assigned":
            slots = ckpt.bank.assigned_slots()
        else:
            slots = list(range(ckpt.bank.num_slots))
        write_distance_csv(ckpt.bank, slots, args.distances_csv)
        print(f"distance matrix ({len(slots)} slots) -> {args.distances_csv}")
    if args.span_dump:
        if not args.data:
            raise UsageError("--span-dump requires --data")
        dataset = _load_dataset(args.data)
        store = _load_store(args, dataset, hash_seed=ckpt.config.get("seed", 0))
        rows = 0
        with open(args.span_dump, "w", encoding="utf-8") as fh:
            d1 = ckpt.bank.d1
            header = ["sentence_id", "start", "length", "gold_type"]
            header += [f"v{i}" for i in range(d1)]
            fh.write(",".join(header) + "\n")
            for sent in dataset.sentences:
                gold = {(e.start, e.end): e.type_name for e in dataset.entities(sent.id)}
                for span in enumerate_spans(sent, ckpt.epsilon):
                    rep = represent_span(max_pool(store, span), ckpt.table, ckpt.ffn)
                    label = gold.get((span.start, span.end), NONE_TYPE)
                    values = [sent.id, str(span.start), str(span.length), label]
                    values += [repr(x) for x in rep.projected]
                    fh.write(",".join(values) + "\n")
                    rows += 1
        print(f"{rows} span vectors -> {args.span_dump}")
    if not args.distances_csv and not args.span_dump:
        raise UsageError("inspect needs --distances-csv and/or --span-dump")


def _cmd_sweep_tau(args):
    taus = [float(t) for t in args.tau_list.split(",") if t.strip()]
    if not taus:
        raise UsageError("--tau-list must name at least one value")
    types = load_type_file(args.types) if args.types else None
    dataset = _load_dataset(args.data, types)
    query = _load_dataset(args.query)
    support_path = Path(args.support)
    support_files = (
        sorted(support_path.glob("support_*.jsonl")) if support_path.is_dir() else [support_path]
    )
    if not support_files:
        raise DataError(f"no support files under {support_path}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = []
    for tau in taus:
        args.tau = tau
        cfg = _train_config(args)
        store = _load_store(args, dataset, hash_seed=cfg.seed)
        ckpt = train(dataset, store, cfg)
        f1s = []
        for sf in support_files:
            support = load_jsonl(sf)
            support_store = _load_store(args, support, hash_seed=cfg.seed)
            adapted = adapt(ckpt, support, support_store, AdaptConfig(
                max_steps=args.max_steps, patience=args.patience, seed=cfg.seed,
                learning_rate=cfg.learning_rate, weight_decay=cfg.weight_decay,
            ))
            query_store = _load_store(args, query, hash_seed=cfg.seed)
            results = recognize(adapted, query, query_store)
            pred_path = out_dir / f"tau{tau:g}_{sf.stem}.pred.jsonl"
            write_predictions(results, pred_path)
            f1s.append(score(read_predictions(pred_path), query).f1)
        agg = aggregate(f1s)
        summary.append((tau, agg.mean, agg.std))
        print(f"tau {tau:g}: mean F1 {agg.mean:.4f} std {agg.std:.4f}")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write("tau,mean_f1,std_f1\n")
            for tau, mean, std in summary:
                fh.write(f"{tau!r},{mean!r},{std!r}\n")


def _cmd_hash_embed(args):
    dataset = _load_dataset(args.data)
    store = hash_embed(dataset, args.dim, args.seed)
    write_embedding_file(store, args.out)
    print(f"EPNE file ({len(store.table)} sentences, d2={store.dim}) -> {args.out}")


def build_parser() -> _Parser:
    parser = _Parser(prog="epnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("train", help="train on source-domain data")
    p.add_argument("--data", required=True, help="training dataset (JSONL)")
    p.add_argument("--types", help="ordered type file (one name per line)")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--config", help="JSON config file (flags take precedence)")
    p.add_argument("--tau", type=float, default=None, help="prototype distance threshold")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--lr", dest="learning_rate", type=float, default=None)
    p.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
    p.add_argument("--neg-spans", dest="none_span_count", type=int, default=None,
                   help="None spans sampled per sentence per epoch")
    p.add_argument("--epsilon", type=int, default=None, help="span length threshold")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--d1", type=int, default=None, help="prototype dimension")
    p.add_argument("--d3", type=int, default=None, help="length embedding dimension")
    p.add_argument("--hidden", type=int, default=None, help="FFN hidden width")
    p.add_argument("--no-distance-loss", action="store_true",
                   help="ablation: drop the prototype dispersal loss")
    p.add_argument("--cosine", action="store_true",
                   help="ablation: cosine similarity instead of squared Euclidean")
    p.add_argument("--cpnet", action="store_true",
                   help="baseline: conventional averaged prototypes")
    p.add_argument("--loss-csv", help="write per-step loss history CSV")
    _add_embedding_source(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("adapt", help="fine-tune a trained checkpoint on a support set")
    p.add_argument("--model", required=True)
    p.add_argument("--support", required=True, help="support dataset (JSONL)")
    p.add_argument("--out", required=True)
    p.add_argument("--max-steps", dest="max_steps", type=int, default=200)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--lr", type=float, default=5e-5)
    p.add_argument("--weight-decay", dest="weight_decay", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-distance-loss", action="store_true",
                   help="ablation: drop the dispersal loss during adaptation")
    p.add_argument("--loss-csv", help="write per-step loss history CSV")
    _add_embedding_source(p)
    p.set_defaults(func=_cmd_adapt)

    p = sub.add_parser("recognize", help="predict entities for a query set")
    p.add_argument("--model", required=True)
    p.add_argument("--query", required=True, help="query dataset (JSONL)")
    p.add_argument("--out", required=True, help="predictions JSONL")
    _add_embedding_source(p)
    p.set_defaults(func=_cmd_recognize)

    p = sub.add_parser("evaluate", help="score predictions against gold")
    p.add_argument("--pred", help="predictions JSONL")
    p.add_argument("--multi", help="directory of per-run prediction JSONL files")
    p.add_argument("--gold", required=True, help="gold dataset (JSONL)")
    p.add_argument("--report", help="report output (JSON for --pred, CSV for --multi)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sample-support", help="greedy-sample support sets from a dev set")
    p.add_argument("--dev", required=True)
    p.add_argument("--types", help="ordered type file")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n-sets", dest="n_sets", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=_cmd_sample_support)

    p = sub.add_parser("episodes", help="generate N-way K-shot episodes")
    p.add_argument("--data", required=True)
    p.add_argument("--n-way", dest="n_way", type=int, required=True)
    p.add_argument("--k-shot", dest="k_shot", type=int, required=True)
    p.add_argument("--n-episodes", dest="n_episodes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=_cmd_episodes)

    p = sub.add_parser("inspect", help="export prototype distances and span vectors")
    p.add_argument("--model", required=True)
    p.add_argument("--distances-csv", dest="distances_csv")
    p.add_argument("--slots", choices=["all", "assigned"], default="all")
    p.add_argument("--span-dump", dest="span_dump",
                   help="CSV of projected span vectors (for external t-SNE etc.)")
    p.add_argument("--data", help="dataset for --span-dump")
    _add_embedding_source(p)
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("sweep-tau", help="rerun train/adapt/evaluate per tau value")
    p.add_argument("--tau-list", dest="tau_list", required=True, help="comma-separated values")
    p.add_argument("--data", required=True)
    p.add_argument("--types")
    p.add_argument("--support", required=True, help="support JSONL file or directory")
    p.add_argument("--query", required=True, help="gold-annotated query JSONL")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--report", help="summary CSV path")
    p.add_argument("--config")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--lr", dest="learning_rate", type=float, default=None)
    p.add_argument("--weight-decay", dest="weight_decay", type=float, default=None)
    p.add_argument("--neg-spans", dest="none_span_count", type=int, default=None)
    p.add_argument("--epsilon", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--d1", type=int, default=None)
    p.add_argument("--d3", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--max-steps", dest="max_steps", type=int, default=200)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--no-distance-loss", action="store_true")
    p.add_argument("--cosine", action="store_true")
    p.add_argument("--cpnet", action="store_true")
    _add_embedding_source(p)
    p.set_defaults(func=_cmd_sweep_tau)

    p = sub.add_parser("hash-embed", help="write an EPNE file from the hash embedder")
    p.add_argument("--data", required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_hash_embed)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        print(parser.format_usage(), file=sys.stderr)
        return 1
    try:
        args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    return 0


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
