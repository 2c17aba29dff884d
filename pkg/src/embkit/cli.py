"""Command line entry point.

Subcommands: train, eval-analogy, eval-wordsim, nn, validate-set,
ner {train,search,eval}, stats bootstrap. Every run writes a RunManifest
(flags, seeds, input digests, version, timestamps) before it starts and
finalizes it when it ends. Exit codes: 0 success, 1 runtime failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, EmbkitError
from .manifest import RunManifest, digest_inputs

_ARCH = {"sg": "skipgram", "cbow": "cbow"}


def _error_category(exc: BaseException) -> str:
    name = type(exc).__name__
    if name.endswith("Error"):
        name = name[: -len("Error")]
    return re.sub(r"(?<!^)(?=[A-Z][a-z])", "-", name).lower() or "internal"


def _fail(exc: BaseException, code: int) -> int:
    print(f"embkit: error: {_error_category(exc)}: {exc}", file=sys.stderr)
    return code


def _load_vectors(path):
    """Sniff the container: our binary format or whitespace text."""
    from .embeddings import _MAGIC, load_binary, load_text

    with open(path, "rb") as fh:
        head = fh.read(len(_MAGIC))
    if head == _MAGIC:
        return load_binary(path)
    return load_text(path)


def _manifest_flags(args: argparse.Namespace) -> dict:
    skip = {"func", "manifest"}
    return {k: v for k, v in vars(args).items()
            if k not in skip and not k.startswith("_")}


def _start_manifest(args, subcommand: str, seeds: dict, inputs: dict, default_path):
    path = getattr(args, "manifest", None) or default_path
    manifest = RunManifest(subcommand, flags=_manifest_flags(args), seeds=seeds,
                           inputs=digest_inputs(inputs))
    manifest.write(path)
    return manifest, path


def _emit(args, payload: dict, text: str):
    print(json.dumps(payload, indent=2) if getattr(args, "json", False) else text)


# --- train -----------------------------------------------------------------

def _cmd_train(args) -> int:
    from .corpus import build_vocab, preprocess
    from .embeddings import ModelConfig, save_binary, save_text
    from .trainer import train

    explicit_subword = {
        "-minn": args.minn, "-maxn": args.maxn, "-bucket": args.bucket,
    }
    if args.mode == "word2vec":
        given = [flag for flag, v in explicit_subword.items() if v is not None]
        if given:
            raise ConfigError(
                f"{', '.join(given)} require -mode subword"
            )
    minn = 3 if args.minn is None else args.minn
    maxn = 6 if args.maxn is None else args.maxn
    bucket = 2_000_000 if args.bucket is None else args.bucket

    config = ModelConfig(
        dim=args.dim, window=args.ws, arch=_ARCH[args.model], loss=args.loss,
        epochs=args.epoch, minn=minn, maxn=maxn, mode=args.mode,
        negatives=args.neg, lr0=args.lr, buckets=bucket, sample=args.sample,
    )
    manifest, mpath = _start_manifest(
        args, "train", seeds={"seed": args.seed},
        inputs={"input": args.input},
        default_path=args.output + ".manifest.json",
    )
    try:
        # Path, not str: a plain str is treated as raw text by preprocess
        vocab = build_vocab(preprocess(Path(args.input)),
                            min_count=args.min_count)
        model = train(args.input, vocab, config, seed=args.seed,
                      workers=args.thread, verbose=args.verbose)
        save_binary(model, args.output)
        save_text(model, args.output + ".vec")
    except BaseException:
        manifest.finalize(mpath, status="failed")
        raise
    manifest.finalize(mpath, outputs={
        "model": args.output, "vectors": args.output + ".vec",
    })
    losses = getattr(model, "epoch_losses", [])
    _emit(args, {
        "words": len(vocab.words), "dim": config.dim,
        "epochs": config.epochs, "epoch_losses": losses,
        "model": args.output, "vectors": args.output + ".vec",
    }, f"trained {len(vocab.words)} words, dim {config.dim}, "
       f"{config.epochs} epochs -> {args.output}")
    return 0


# --- intrinsic evaluation ----------------------------------------------------

def _cmd_eval_analogy(args) -> int:
    from .intrinsic import eval_analogy, parse_analogy

    manifest, mpath = _start_manifest(
        args, "eval-analogy", seeds={},
        inputs={"model": args.model, "test_set": args.test_set},
        default_path="embkit-manifest.json",
    )
    try:
        model = _load_vectors(args.model)
        test_set = parse_analogy(args.test_set)
        report = eval_analogy(
            model, test_set, restrict_vocab=args.restrict_vocab,
            case_fold=args.case_fold, compose_oov=args.compose_oov,
        )
    except BaseException:
        manifest.finalize(mpath, status="failed")
        raise
    manifest.finalize(mpath)
    _emit(args, report.to_dict(), report.format_text())
    return 0


def _cmd_eval_wordsim(args) -> int:
    from .intrinsic import eval_wordpairs, parse_wordpairs

    manifest, mpath = _start_manifest(
        args, "eval-wordsim", seeds={},
        inputs={"model": args.model, "pairs": args.pairs},
        default_path="embkit-manifest.json",
    )
    try:
        model = _load_vectors(args.model)
        report = eval_wordpairs(model, parse_wordpairs(args.pairs))
    except BaseException:
        manifest.finalize(mpath, status="failed")
        raise
    manifest.finalize(mpath)
    _emit(args, report.to_dict(),
          f"pearson {report.pearson:.4f}  spearman {report.spearman:.4f}  "
          f"pairs {report.used}/{report.total} "
          f"(oov {report.oov_fraction:.1%})")
    return 0


def _cmd_nn(args) -> int:
    manifest, mpath = _start_manifest(
        args, "nn", seeds={}, inputs={"model": args.model},
        default_path="embkit-manifest.json",
    )
    try:
        model = _load_vectors(args.model)
        neighbors = model.nearest_neighbors(args.word, k=args.k)
    except BaseException:
        manifest.finalize(mpath, status="failed")
        raise
    manifest.finalize(mpath)
    _emit(args, {"word": args.word,
                 "neighbors": [{"word": w, "score": s} for w, s in neighbors]},
          "\n".join(f"{w}\t{s:.6f}" for w, s in neighbors))
    return 0


def _cmd_validate_set(args) -> int:
    from .intrinsic import parse_analogy, summarize_totals, validate_swedish

    manifest, mpath = _start_manifest(
        args, "validate-set", seeds={}, inputs={"file": args.file},
        default_path="embkit-manifest.json",
    )
    try:
        test_set = parse_analogy(args.file)
        semantic, syntactic, total = summarize_totals(test_set)
        if args.layout == "swedish":
            report = validate_swedish(test_set)
            ok = report.ok
            payload = report.to_dict()
        else:
            ok = True
            payload = {
                "section_counts": test_set.section_counts,
                "semantic_total": semantic,
                "syntactic_total": syntactic,
                "total": total,
            }
    except BaseException:
        manifest.finalize(mpath, status="failed")
        raise
    # a count mismatch is a completed run; the exit code carries the verdict
    manifest.finalize(mpath, outputs={"ok": ok})
    lines = [f"{name}: {count}" for name, count in test_set.section_counts.items()]
    lines.append(f"semantic {semantic}  syntactic {syntactic}  total {total}")
    if args.layout == "swedish":
        lines.append("OK" if ok else "MISMATCH")
        lines.extend(f"  {d}" for d in payload.get("discrepancies", []))
    _emit(args, payload, "\n".join(lines))
    return 0 if ok else 1


# --- ner ---------------------------------------------------------------

def _load_tagged(path, fmt: str):
    from .ner import load_conll, load_gmb_csv

    return load_conll(path) if fmt == "conll" else load_gmb_csv(path)


def _embedding_table(spec: str):
    if spec == "default":
        return None
    table = _load_vectors(spec)
    from .embeddings import EmbeddingModel

    if isinstance(table, EmbeddingModel):
        table = table.to_table()
    return table


def _ner_config(args, heads: int | None = None):
    from .ner import TransformerTaggerConfig

    return TransformerTaggerConfig(
        model_dim=args.model_dim, layers=args.layers,
        heads=args.heads if heads is None else heads,
        dropout=args.dropout, optimizer=args.optimizer, lr=args.lr,
        batch_size=args.batch_size, epochs=args.epochs,
        max_len=args.max_len, seed=args.seed,
    )


def _cmd_ner_train(args) -> int:
    import os

    from .ner import run_protocol, save_checkpoint, split_dataset

    config = _ner_config(args)
    os.makedirs(args.out, exist_ok=True)
    manifest, mpath = _start_manifest(
        args, "ner-train",
        seeds={"seed": args.seed,
               "run_seeds": [args.seed + i for i in range(args.runs)]},
        inputs={"data": args.data, "embeddings": args.embeddings},
        default_path=os.path.join(args.out, "manifest.json"),
    )
    try:
        sentences = _load_tagged(args.data, args.format)
        train_s, dev_s, test_s = split_dataset(sentences, seed=args.seed)
        pretrained = _embedding_table(args.embeddings)
        runs_path = os.path.join(args.out, "runs.json")
        report, best = run_protocol(
            config, train_s, dev_s, test_s, runs=args.runs,
            pretrained=pretrained, out_path=runs_path,
            return_best=True, verbose=args.verbose,
        )
        checkpoint = os.path.join(args.out, "tagger.pt")
        if best is not None:
            model, token_vocab, label_set, _ = best
            save_checkpoint(checkpoint, model, config, token_vocab,
                            label_set, split_seed=args.seed)
    except BaseException:
        manifest.finalize(mpath, status="failed")
        raise
    manifest.finalize(
        mpath,
        status="completed" if not report["partial"] else "partial",
        outputs={"runs": runs_path, "checkpoint": checkpoint},
    )
    mean = report["mean"]["test"]
    text = ("all runs failed" if mean is None else
            f"mean test f1 {mean['f1']:.4f} over "
            f"{len(report['runs'])}/{args.runs} runs -> {args.out}")
    _emit(args, report, text)
    return 0 if report["runs"] else 1


def _cmd_ner_search(args) -> int:
    import os

    from .ner import hyperparam_search, split_dataset
    from .ner.training import SEARCH_HEADS

    # Every trial sets its own head count, so the base value is only a
    # placeholder; substitute a compatible one instead of rejecting.
    heads = args.heads
    if args.model_dim % heads != 0:
        compatible = [h for h in SEARCH_HEADS if args.model_dim % h == 0]
        heads = compatible[-1] if compatible else 1
    config = _ner_config(args, heads=heads)
    default_manifest = (os.path.join(args.out, "search-manifest.json")
                        if args.out else "embkit-manifest.json")
    manifest, mpath = _start_manifest(
        args, "ner-search", seeds={"seed": args.seed},
        inputs={"data": args.data, "embeddings": args.embeddings},
        default_path=default_manifest,
    )
    try:
        sentences = _load_tagged(args.data, args.format)
        train_s, dev_s, _ = split_dataset(sentences, seed=args.seed)
        pretrained = _embedding_table(args.embeddings)
        best, trials = hyperparam_search(
            config, train_s, dev_s, budget=args.budget,
            proxy_epochs=args.proxy_epochs, seed=args.seed,
            pretrained=pretrained, verbose=args.verbose,
        )
        payload = {"best": best.to_dict(), "trials": trials}
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            search_path = os.path.join(args.out, "search.json")
            with open(search_path, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, indent=2)
                fh.write("\n")
    except BaseException:
        manifest.finalize(mpath, status="failed")
        raise
    manifest.finalize(mpath)
    _emit(args, payload,
          f"best: {best.optimizer} layers={best.layers} heads={best.heads} "
          f"({len(trials)} trials)")
    return 0


def _cmd_ner_eval(args) -> int:
    import os

    from .ner import evaluate_tagger, load_checkpoint, split_dataset

    checkpoint = os.path.join(args.model, "tagger.pt")
    manifest, mpath = _start_manifest(
        args, "ner-eval", seeds={},
        inputs={"data": args.data, "checkpoint": checkpoint},
        default_path=os.path.join(args.model, "eval-manifest.json"),
    )
    try:
        model, config, token_vocab, label_set, split_seed = (
            load_checkpoint(checkpoint)
        )
        sentences = _load_tagged(args.data, args.format)
        if args.split != "all":
            seed = split_seed if split_seed is not None else config.seed
            train_s, dev_s, test_s = split_dataset(sentences, seed=seed)
            sentences = {"train": train_s, "dev": dev_s, "test": test_s}[args.split]
        metrics = evaluate_tagger(model, sentences, token_vocab, label_set,
                                  batch_size=config.batch_size)
    except BaseException:
        manifest.finalize(mpath, status="failed")
        raise
    manifest.finalize(mpath)
    _emit(args, {"split": args.split, "n_sentences": len(sentences),
                 **metrics.to_dict()},
          f"{args.split}: precision {metrics.precision:.4f}  "
          f"recall {metrics.recall:.4f}  f1 {metrics.f1:.4f}  "
          f"accuracy {metrics.accuracy:.4f}")
    return 0


# --- stats -------------------------------------------------------------

def _cmd_stats_bootstrap(args) -> int:
    from .stats import bootstrap_ci_diff, load_metric_values

    manifest, mpath = _start_manifest(
        args, "stats-bootstrap", seeds={"seed": args.seed},
        inputs={"a": args.a, "b": args.b},
        default_path="embkit-manifest.json",
    )
    try:
        a = load_metric_values(args.a, metric=args.metric, split=args.split)
        b = load_metric_values(args.b, metric=args.metric, split=args.split)
        result = bootstrap_ci_diff(a, b, resamples=args.resamples,
                                   alpha=args.alpha, seed=args.seed)
    except BaseException:
        manifest.finalize(mpath, status="failed")
        raise
    manifest.finalize(mpath)
    print(json.dumps(result.to_dict(), indent=2))
    return 0


# --- parser ------------------------------------------------------------

def _add_manifest_flag(parser):
    parser.add_argument("--manifest", default=None,
                        help="where to write the run manifest")


def _add_json_flag(parser):
    parser.add_argument("--json", action="store_true",
                        help="emit the report as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embkit",
        description="train and evaluate word and subword embeddings",
        allow_abbrev=False,
    )
    parser.add_argument("--version", action="version",
                        version=f"embkit {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    t = sub.add_parser("train", allow_abbrev=False,
                       help="train embeddings on a text corpus")
    t.add_argument("-input", required=True, help="training corpus, UTF-8 text")
    t.add_argument("-output", required=True,
                   help="model path; also writes <output>.vec text vectors")
    t.add_argument("-dim", type=int, default=300)
    t.add_argument("-ws", type=int, default=4, help="context window size")
    t.add_argument("-model", choices=("sg", "cbow"), default="sg")
    t.add_argument("-loss", choices=("ns", "hs"), default="ns")
    t.add_argument("-epoch", type=int, default=10)
    t.add_argument("-minn", type=int, default=None,
                   help="min n-gram length (subword mode, default 3)")
    t.add_argument("-maxn", type=int, default=None,
                   help="max n-gram length (subword mode, default 6)")
    t.add_argument("-mode", choices=("word2vec", "subword"), default="subword")
    t.add_argument("-neg", type=int, default=5)
    t.add_argument("-lr", type=float, default=0.05)
    t.add_argument("-bucket", type=int, default=None,
                   help="n-gram hash buckets (subword mode, default 2000000)")
    t.add_argument("-minCount", dest="min_count", type=int, default=5)
    t.add_argument("-thread", type=int, default=1)
    t.add_argument("-seed", type=int, default=1)
    t.add_argument("-sample", type=float, default=1e-4,
                   help="subsampling threshold, <=0 disables")
    t.add_argument("-verbose", action="store_true")
    _add_manifest_flag(t)
    _add_json_flag(t)
    t.set_defaults(func=_cmd_train)

    ea = sub.add_parser("eval-analogy", allow_abbrev=False,
                        help="score 3CosAdd analogy accuracy")
    ea.add_argument("--model", required=True)
    ea.add_argument("--test-set", required=True)
    ea.add_argument("--restrict-vocab", type=int, default=300_000)
    ea.add_argument("--case-fold", action=argparse.BooleanOptionalAction,
                    default=True)
    ea.add_argument("--compose-oov", action="store_true",
                    help="compose out-of-vocabulary words from n-grams")
    _add_manifest_flag(ea)
    _add_json_flag(ea)
    ea.set_defaults(func=_cmd_eval_analogy)

    ew = sub.add_parser("eval-wordsim", allow_abbrev=False,
                        help="correlate cosines with human pair scores")
    ew.add_argument("--model", required=True)
    ew.add_argument("--pairs", required=True)
    _add_manifest_flag(ew)
    _add_json_flag(ew)
    ew.set_defaults(func=_cmd_eval_wordsim)

    nn = sub.add_parser("nn", allow_abbrev=False,
                        help="nearest neighbors of a word")
    nn.add_argument("--model", required=True)
    nn.add_argument("--word", required=True)
    nn.add_argument("--k", type=int, default=10)
    _add_manifest_flag(nn)
    _add_json_flag(nn)
    nn.set_defaults(func=_cmd_nn)

    vs = sub.add_parser("validate-set", allow_abbrev=False,
                        help="check an analogy test set's section counts")
    vs.add_argument("file")
    vs.add_argument("--layout", choices=("swedish", "none"), default="swedish",
                    help="expected inventory; 'none' only summarizes")
    _add_manifest_flag(vs)
    _add_json_flag(vs)
    vs.set_defaults(func=_cmd_validate_set)

    ner = sub.add_parser("ner", allow_abbrev=False,
                         help="train and evaluate the sequence tagger")
    ner_sub = ner.add_subparsers(dest="ner_command", required=True)

    def add_ner_common(p, with_epochs=True):
        p.add_argument("--data", required=True)
        p.add_argument("--format", choices=("conll", "gmb-csv"),
                       default="conll")
        p.add_argument("--embeddings", default="default",
                       help="path to pretrained vectors, or 'default' for "
                            "random trainable embeddings")
        p.add_argument("--model-dim", type=int, default=300)
        p.add_argument("--layers", type=int, default=6)
        p.add_argument("--heads", type=int, default=6)
        p.add_argument("--optimizer", choices=("adam", "rmsprop"),
                       default="adam")
        p.add_argument("--batch-size", type=int, default=64)
        if with_epochs:
            p.add_argument("--epochs", type=int, default=20)
        p.add_argument("--lr", type=float, default=1e-3)
        p.add_argument("--dropout", type=float, default=0.1)
        p.add_argument("--max-len", type=int, default=128)
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--verbose", action="store_true")

    nt = ner_sub.add_parser("train", allow_abbrev=False,
                            help="repeated-run training protocol")
    add_ner_common(nt)
    nt.add_argument("--runs", type=int, default=5)
    nt.add_argument("--out", required=True,
                    help="directory for runs.json and the best checkpoint")
    _add_manifest_flag(nt)
    _add_json_flag(nt)
    nt.set_defaults(func=_cmd_ner_train)

    ns = ner_sub.add_parser("search", allow_abbrev=False,
                            help="random hyperparameter search")
    add_ner_common(ns)
    ns.add_argument("--budget", type=int, default=45)
    ns.add_argument("--proxy-epochs", type=int, default=3)
    ns.add_argument("--out", default=None)
    _add_manifest_flag(ns)
    _add_json_flag(ns)
    ns.set_defaults(func=_cmd_ner_search)

    ne = ner_sub.add_parser("eval", allow_abbrev=False,
                            help="evaluate a saved tagger checkpoint")
    ne.add_argument("--model", required=True,
                    help="directory written by ner train")
    ne.add_argument("--data", required=True)
    ne.add_argument("--format", choices=("conll", "gmb-csv"),
                    default="conll")
    ne.add_argument("--split", choices=("train", "dev", "test", "all"),
                    default="test")
    _add_manifest_flag(ne)
    _add_json_flag(ne)
    ne.set_defaults(func=_cmd_ner_eval)

    stats = sub.add_parser("stats", allow_abbrev=False,
                           help="significance testing")
    stats_sub = stats.add_subparsers(dest="stats_command", required=True)
    sb = stats_sub.add_parser("bootstrap", allow_abbrev=False,
                              help="bootstrap CI for a difference of means")
    sb.add_argument("--a", required=True,
                    help="metric file or runs.json for system A")
    sb.add_argument("--b", required=True,
                    help="metric file or runs.json for system B")
    sb.add_argument("--resamples", type=int, default=10_000)
    sb.add_argument("--alpha", type=float, default=0.05)
    sb.add_argument("--seed", type=int, default=0)
    sb.add_argument("--metric", default="f1")
    sb.add_argument("--split", default="test")
    _add_manifest_flag(sb)
    sb.set_defaults(func=_cmd_stats_bootstrap)

    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed usage; normalize its exit code
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(exc, 2)
    except EmbkitError as exc:
        return _fail(exc, 1)
    except FileNotFoundError as exc:
        return _fail(exc, 1)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        return _fail(exc, 1)


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
