"""Command-line pipeline: preprocess, split, build-graph, train, evaluate, predict, aaw.

Settings resolve as flags > ``--config`` key-value file > built-in defaults.
Failures print one ``ErrorClass: message`` line to stderr and exit with
2 (usage), 3 (data), 4 (numeric) or 5 (format/version).
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .corpusgraph import CorpusGraph, GraphBuildOptions, build_graph, load_embeddings
from .dataset import DatasetSplit, LabelVocabulary, load_corpus, make_split, select
from .encoder import IMPORTED, MEANPOOL, EncoderSpec, load_imported_embeddings
from .errors import DataError, FormatError, CrisisGraphError
from .metrics import AawConfig, aaw, evaluate, load_aaw_config, load_worth_table, read_key_values
from .preprocess import (Gazetteer, default_emoji_map, default_stoplist, load_emoji_map, load_gazetteer,
                         load_processed, load_stoplist, preprocess_corpus, save_processed)
from .relnet import DEFAULT_ACTIONABLE, VARIANTS, actionable_indices, predict
from .train import Checkpoint, TrainConfig, train, write_history

log = logging.getLogger("crisisgraph")

_TRAIN_HELP = {
    "epochs": "maximum training epochs",
    "batch_size": "mini-batch size (last partial batch kept)",
    "learning_rate": "Adam learning rate",
    "dropout": "dropout rate on attention, features and relation hidden units",
    "patience": "stop after this many epochs without validation F1 improvement",
    "seed": "seed for initialization, shuffling and dropout",
    "variant": "model variant",
    "threshold": "probability threshold for assigning a label",
    "encoder_dim": "width of the trainable mean-pool encoder",
    "gat_hidden": "per-head width of the first attention layer",
    "gat_heads": "attention heads in the first layer",
    "gat_out": "width of the second attention layer (label embedding size)",
    "relation_hidden": "hidden width of the relation network",
    "attention_slope": "negative slope of the attention leaky-relu",
    "weighted_attention": "add log edge weights to attention scores",
    "pretrained_init": "seed the encoder token table from the graph's word vectors",
    "beta1": "Adam first-moment decay",
    "beta2": "Adam second-moment decay",
    "adam_eps": "Adam epsilon",
}


@contextlib.contextmanager
def output_path(path):
    """Yield a temporary sibling of ``path``; move it into place only on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _parse_bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _labels_arg(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _add_preprocess_resources(p: argparse.ArgumentParser) -> None:
    p.add_argument("--stoplist", help="stop-word file, one token per line; the bundled English list when omitted")
    p.add_argument("--gazetteer", help="entity surface forms, one per line; no entities when omitted")
    p.add_argument("--emoji-map", help="emoji<TAB>name file; the bundled map when omitted")


def _add_aaw_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--aaw-config", help="key-value file with alpha, cutoff, actionable_labels, delta_mode")
    p.add_argument("--worth-table", help="label<TAB>weight file of per-label worth")
    p.add_argument("--alpha", type=float, default=None,
                   help="AAW mixing constant; 0.75 unless set here or in --aaw-config")
    p.add_argument("--cutoff", type=float, default=None,
                   help="priority cutoff for alerts; 0.7 unless set here or in --aaw-config")
    p.add_argument("--high-priority-cutoff", type=float, default=None,
                   help="truth priority separating high from low tweets; the alert cutoff unless set")
    p.add_argument("--delta-mode", choices=("abs-error", "squared-error"), default=None,
                   help="definition of the priority error; abs-error unless set here or in --aaw-config")
    p.add_argument("--actionable-labels", type=_labels_arg, default=None,
                   help=f"comma-separated actionable labels; {','.join(DEFAULT_ACTIONABLE)} unless set")


def _add_train_options(p: argparse.ArgumentParser) -> None:
    for f in dataclasses.fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        help_text = _TRAIN_HELP.get(f.name, f.name)
        if f.type in ("bool", bool):
            p.add_argument(flag, type=_parse_bool, default=f.default, metavar="BOOL", help=help_text)
        elif f.name == "variant":
            p.add_argument(flag, choices=VARIANTS, default=f.default, help=help_text)
        else:
            p.add_argument(flag, type=type(f.default), default=f.default, help=help_text)
    p.add_argument("--encoder", choices=(MEANPOOL, IMPORTED), default=MEANPOOL, help="tweet encoder kind")
    p.add_argument("--encoder-source", help="imported tweet-vector file (id v1 ... vd), for --encoder imported")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="crisisgraph", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_text, inert_seed=False):
        p = sub.add_parser(name, help=help_text, description=help_text, formatter_class=fmt)
        p.add_argument("--config", help="flat key = value file; flags override its values")
        p.add_argument("--log-level", default="WARNING", help="logging level")
        if inert_seed:
            p.add_argument("--seed", type=int, default=0,
                           help="accepted for uniformity; this command draws no randomness")
        return p

    p = command("preprocess", "clean and tokenize a raw corpus, spot entities, encode labels", inert_seed=True)
    p.add_argument("--corpus", required=True, help="raw corpus (one JSON record per line)")
    p.add_argument("--out", required=True, help="processed corpus output")
    p.add_argument("--labels", type=_labels_arg, default=None,
                   help="comma-separated label vocabulary; sorted labels seen in the corpus when omitted")
    _add_preprocess_resources(p)
    p.set_defaults(func=cmd_preprocess)

    p = command("split", "deterministic train/valid/test split of a processed corpus")
    p.add_argument("--corpus", required=True, help="processed corpus")
    p.add_argument("--out", required=True, help="split file output")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed")
    p.add_argument("--test-fraction", type=float, default=0.2, help="fraction of tweets held out for test")
    p.add_argument("--valid-fraction", type=float, default=0.2, help="fraction of the remainder used to validate")
    p.set_defaults(func=cmd_split)

    p = command("build-graph", "build the word/entity/label graph over the training tweets")
    p.add_argument("--corpus", required=True, help="processed corpus")
    p.add_argument("--embeddings", required=True, help="GloVe-style text embedding file")
    p.add_argument("--split", help="split file; only its train ids enter the graph, all tweets when omitted")
    p.add_argument("--out", required=True, help="graph file output (JSON)")
    p.add_argument("--coo", help="optional debug dump: node list and 'i j weight' triplets")
    p.add_argument("--min-freq", type=int, default=1, help="minimum token frequency for a word node")
    p.add_argument("--window", type=int, default=5, help="co-occurrence window in tokens")
    p.add_argument("--seed", type=int, default=0, help="seed for features of tokens missing from the table")
    p.set_defaults(func=cmd_build_graph)

    p = command("train", "train a model and write a checkpoint plus per-epoch history")
    p.add_argument("--corpus", required=True, help="processed corpus")
    p.add_argument("--split", required=True, help="split file")
    p.add_argument("--graph", help="graph file (not needed for --variant encoder-only)")
    p.add_argument("--out", required=True, help="checkpoint output")
    p.add_argument("--history", help="per-epoch CSV output; <out>.history.csv when omitted")
    _add_train_options(p)
    p.set_defaults(func=cmd_train)

    p = command("evaluate", "score a checkpoint: weighted F1, Hamming loss, Jaccard, AAW", inert_seed=True)
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--corpus", required=True, help="processed corpus")
    p.add_argument("--graph", help="graph file the checkpoint was trained with")
    p.add_argument("--split", help="split file; evaluates its test ids, the whole corpus when omitted")
    p.add_argument("--out", required=True, help="metrics report output (JSON)")
    _add_aaw_options(p)
    p.set_defaults(func=cmd_evaluate)

    p = command("predict", "write per-tweet probabilities and labels", inert_seed=True)
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--corpus", required=True, help="processed corpus")
    p.add_argument("--graph", help="graph file the checkpoint was trained with")
    p.add_argument("--out", required=True, help="output: id<TAB>comma-separated probs<TAB>comma-separated labels")
    p.set_defaults(func=cmd_predict)

    p = command("aaw", "Accumulated Alert Worth of a prediction file against annotated priorities", inert_seed=True)
    p.add_argument("--predictions", required=True, help="output of the predict command")
    p.add_argument("--corpus", required=True, help="processed corpus carrying priority annotations")
    p.add_argument("--out", help="optional key-value output with aaw_high and aaw_all")
    _add_aaw_options(p)
    p.set_defaults(func=cmd_aaw)
    return parser


def _subparsers(parser: argparse.ArgumentParser) -> dict[str, argparse.ArgumentParser]:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return dict(action.choices)
    return {}


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = {k.replace("-", "_"): v for k, v in read_key_values(known.config).items()}
    cmd = next((a for a in argv if a in _subparsers(parser)), None)
    if cmd is None:
        return
    sp = _subparsers(parser)[cmd]
    dests = {a.dest for a in sp._actions}
    unknown = sorted(set(values) - dests)
    if unknown:
        raise FormatError(f"{known.config}: unknown keys for '{cmd}': {', '.join(unknown)}")
    # String defaults pass through each action's type converter at parse time.
    sp.set_defaults(**values)


def _resources(args):
    stoplist = load_stoplist(args.stoplist) if args.stoplist else default_stoplist()
    emoji_map = load_emoji_map(args.emoji_map) if args.emoji_map else default_emoji_map()
    gaz = load_gazetteer(args.gazetteer, stoplist) if args.gazetteer else Gazetteer(frozenset())
    return stoplist, emoji_map, gaz


def _aaw_config(args) -> AawConfig:
    cfg = load_aaw_config(args.aaw_config, args.worth_table) if args.aaw_config else AawConfig(
        worth_table=load_worth_table(args.worth_table) if args.worth_table else None)
    overrides = {k: getattr(args, k) for k in ("alpha", "cutoff", "high_priority_cutoff", "delta_mode", "actionable_labels")
                 if getattr(args, k) is not None}
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _load_graph(path) -> CorpusGraph | None:
    return CorpusGraph.load(path) if path else None


def cmd_preprocess(args) -> None:
    vocab = LabelVocabulary(args.labels) if args.labels else None
    corpus, vocab = load_corpus(args.corpus, vocab)
    processed = preprocess_corpus(corpus, vocab, *_resources(args))
    with output_path(args.out) as tmp:
        save_processed(processed, vocab, tmp)
    print(f"{len(processed)} tweets, {vocab.k} labels -> {args.out}")


def cmd_split(args) -> None:
    tweets, _ = load_processed(args.corpus)
    split = make_split(tweets, (1.0 - args.test_fraction, args.test_fraction), args.valid_fraction, args.seed)
    with output_path(args.out) as tmp:
        split.save(tmp)
    print(f"train {len(split.train)}, valid {len(split.valid)}, test {len(split.test)} -> {args.out}")


def cmd_build_graph(args) -> None:
    tweets, vocab = load_processed(args.corpus)
    if args.split:
        tweets = select(tweets, DatasetSplit.load(args.split).train)
    graph = build_graph(tweets, vocab, load_embeddings(args.embeddings),
                        GraphBuildOptions(min_freq=args.min_freq, window=args.window, seed=args.seed))
    with output_path(args.out) as tmp:
        fp = graph.save(tmp)
    if args.coo:
        with output_path(args.coo) as tmp:
            with open(tmp, "w", encoding="utf-8") as fh:
                for nd in graph.nodes:
                    fh.write(f"# {nd.index}\t{nd.kind}\t{nd.name}\n")
                for i, j, w in graph.edges():
                    fh.write(f"{i} {j} {w!r}\n")
    print(f"nodes {graph.n}, edges {len(graph.edges())}, fingerprint {fp}")


def cmd_train(args) -> None:
    tweets, vocab = load_processed(args.corpus)
    split = DatasetSplit.load(args.split)
    config = TrainConfig(**{f.name: getattr(args, f.name) for f in dataclasses.fields(TrainConfig)})
    graph = _load_graph(args.graph)
    if graph is None and config.variant != "encoder-only":
        raise DataError(f"--graph is required for variant {config.variant}")
    if args.encoder == IMPORTED:
        if not args.encoder_source:
            raise DataError("--encoder imported needs --encoder-source")
        dims = {v.size for v in load_imported_embeddings(args.encoder_source).values()}
        spec = EncoderSpec(IMPORTED, dims.pop() if dims else config.encoder_dim, args.encoder_source)
    else:
        spec = EncoderSpec(MEANPOOL, config.encoder_dim)
    result = train(select(tweets, split.train), select(tweets, split.valid), graph, vocab, config, spec)
    history = args.history or f"{args.out}.history.csv"
    with output_path(args.out) as ckpt_tmp, output_path(history) as hist_tmp:
        result.checkpoint.save(ckpt_tmp)
        write_history(result.history, hist_tmp)
    best = result.checkpoint.best_valid
    print(f"epochs {len(result.history)}, best valid f1w {best if best is not None else 'n/a'}, "
          f"checkpoint {args.out}, history {history}")


def cmd_evaluate(args) -> None:
    ckpt = Checkpoint.load(args.checkpoint)
    tweets, vocab = load_processed(args.corpus)
    if vocab != ckpt.vocab:
        raise DataError("corpus label vocabulary differs from the checkpoint's")
    if args.split:
        tweets = select(tweets, DatasetSplit.load(args.split).test)
    rep = evaluate(ckpt, tweets, _load_graph(args.graph), _aaw_config(args))
    with output_path(args.out) as tmp:
        rep.save(tmp)
    aaw_text = "n/a" if rep.aaw_all is None else f"{rep.aaw_high:.4f}/{rep.aaw_all:.4f}"
    print(f"f1w {rep.f1_weighted:.4f} hamming {rep.hamming_loss:.4f} jaccard {rep.jaccard_mean:.4f} "
          f"aaw(high/all) {aaw_text}")


def cmd_predict(args) -> None:
    ckpt = Checkpoint.load(args.checkpoint)
    tweets, _ = load_processed(args.corpus)
    probs = ckpt.probabilities(tweets, _load_graph(args.graph))
    with output_path(args.out) as tmp:
        with open(tmp, "w", encoding="utf-8") as fh:
            for tweet, row in zip(tweets, probs):
                labels = [name for name, p in zip(ckpt.vocab.labels, row) if p >= ckpt.config.threshold]
                fh.write(f"{tweet.id}\t{','.join(repr(float(p)) for p in row)}\t{','.join(labels)}\n")
    print(f"{len(tweets)} predictions -> {args.out}")


def read_predictions(path, vocab: LabelVocabulary) -> dict[str, tuple[list[float], set[str]]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            try:
                probs = [float(x) for x in parts[1].split(",")]
                labels = {x for x in parts[2].split(",") if x}
            except (IndexError, ValueError):
                raise FormatError(f"{path} line {lineno}: expected id<TAB>probs<TAB>labels") from None
            if len(probs) != vocab.k:
                raise FormatError(f"{path} line {lineno}: {len(probs)} probabilities for {vocab.k} labels")
            out[parts[0]] = (probs, labels)
    return out


def cmd_aaw(args) -> None:
    tweets, vocab = load_processed(args.corpus)
    cfg = _aaw_config(args)
    rows = read_predictions(args.predictions, vocab)
    idx = actionable_indices(vocab, cfg.actionable_labels)
    preds, truths = [], []
    for tweet in tweets:
        if tweet.id not in rows:
            continue
        probs, labels = rows[tweet.id]
        p = predict(probs, 0.5, idx)
        bits = tuple(int(name in labels) for name in vocab.labels)
        preds.append(dataclasses.replace(p, labels=bits))
        truths.append(tweet)
    if not preds:
        raise DataError("no prediction ids match the corpus")
    aaw_all, aaw_high = aaw(preds, truths, vocab, cfg)
    print(f"aaw_high\t{aaw_high!r}\naaw_all\t{aaw_all!r}")
    if args.out:
        with output_path(args.out) as tmp:
            Path(tmp).write_text(f"aaw_high = {aaw_high!r}\naaw_all = {aaw_all!r}\n", encoding="utf-8")


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
    except CrisisGraphError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"DataError: {exc.filename}: no such file", file=sys.stderr)
        return DataError.exit_code
    except OSError as exc:
        print(f"DataError: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
