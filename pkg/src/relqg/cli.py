"""Command-line entry point: ``relqg <command> ...``.

Commands: prepare, stats, train, generate, evaluate, analyze. Every command
emits a run manifest (next to ``--out`` when given, otherwise inside the
printed JSON).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    CorpusError,
    QGExample,
    Vocabulary,
    build_vocabulary,
    filter_corpus,
    load_corpus,
    save_corpus,
)
from .decode import beam_search
from .evaluation import (
    align,
    distance_bucket_analysis,
    evaluate,
    load_predictions,
    save_predictions,
)
from .model import ModelConfig, encode_example
from .records import AnswerSpan, Token
from .relation import corpus_relation_stats, select_relation
from .training import TrainConfig, best_checkpoint_path, load_model, train

logger = logging.getLogger("relqg")

FULL_VOCAB_CAP = ModelConfig().vocab_cap
DESK_VOCAB_CAP = ModelConfig.desk().vocab_cap
CONFIG_KEYS = ("train_corpus", "dev_corpus", "vocab", "embeddings", "model", "training")


class UsageError(Exception):
    pass


# -- manifest ---------------------------------------------------------------


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _manifest(command: str, config: dict, inputs, seed, started: float) -> dict:
    return {
        "command": command,
        "config": config,
        "input_hashes": {str(p): _sha256(p) for p in inputs if p and Path(p).is_file()},
        "seed": seed,
        "version": __version__,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(started)),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    }


def _write_manifest(out: Path, manifest: dict) -> None:
    target = out / "manifest.json" if out.is_dir() else out.with_name(out.name + ".manifest.json")
    target.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _emit(payload: dict, out: str | None, manifest: dict) -> None:
    if out:
        path = Path(out)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        _write_manifest(path, manifest)
    else:
        print(json.dumps(dict(payload, manifest=manifest), indent=2, sort_keys=True))


# -- prepare / stats -------------------------------------------------------------


def cmd_prepare(args) -> int:
    started = time.time()
    corpus = load_corpus(args.corpus)
    kept = filter_corpus(corpus)
    if not kept:
        raise UsageError(f"{args.corpus}: no example survives filtering; nothing written")
    prepared = [
        QGExample(ex.id, ex.sentence, ex.answer, ex.question, ex.relations, select_relation(ex))
        for ex in kept
    ]
    cap = args.vocab_cap or (DESK_VOCAB_CAP if args.desk else FULL_VOCAB_CAP)
    vocab = build_vocabulary(prepared, cap)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(out / "prepared.jsonl", prepared)
    vocab.save(out / "vocab.json")
    _write_manifest(out, _manifest("prepare", {"vocab_cap": cap, "desk": args.desk,
                                               "n_input": len(corpus), "n_kept": len(kept)},
                                   [args.corpus], args.seed, started))
    print(f"kept {len(kept)}/{len(corpus)} examples; vocabulary {len(vocab)} "
          f"entries -> {out}", file=sys.stderr)
    return 0


def _stats_table(stats) -> str:
    return "\n".join([
        f"{'':<18}{'Sentence':>12}{'Relation':>12}",
        f"{'Avg. length':<18}{stats.avg_sentence_len:12.2f}{stats.avg_relation_len:12.2f}",
        f"{'# overlapped words':<18}{stats.overlap_sentence:12.2f}{stats.overlap_relation:12.2f}",
        f"{'Copy ratio':<18}{100 * stats.copy_ratio_sentence:11.2f}%"
        f"{100 * stats.copy_ratio_relation:11.2f}%",
    ])


def cmd_stats(args) -> int:
    started = time.time()
    corpus = load_corpus(args.corpus)
    if not corpus:
        raise UsageError(f"{args.corpus}: empty corpus")
    stats = corpus_relation_stats(corpus)
    print(_stats_table(stats), file=sys.stderr)
    _emit(stats.as_dict(), args.out, _manifest("stats", {}, [args.corpus], None, started))
    return 0


# -- train -----------------------------------------------------------------------


def load_run_config(path, desk: bool = False, seed: int | None = None):
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    unknown = set(raw) - set(CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys {sorted(unknown)}; valid keys: {list(CONFIG_KEYS)}")
    for key in ("train_corpus", "dev_corpus", "vocab"):
        if key not in raw:
            raise UsageError(f"config is missing {key!r}")
    base = Path(path).parent
    resolve = lambda p: str(p if os.path.isabs(p) else base / p) if p else None
    model_d = dict(raw.get("model", {}))
    train_d = dict(raw.get("training", {}))
    if seed is not None:
        model_d["seed"] = seed
        train_d["seed"] = seed
    try:
        if desk or train_d.get("desk_profile"):
            train_d["desk_profile"] = True
            defaults = ModelConfig.desk().to_dict()
            unknown = set(model_d) - set(defaults)
            if unknown:
                ModelConfig.from_dict(model_d)  # raises with the valid key list
            model_cfg = ModelConfig(**dict(defaults, **model_d))
        else:
            model_cfg = ModelConfig.from_dict(model_d)
        if "checkpoint_dir" in train_d:
            train_d["checkpoint_dir"] = resolve(train_d["checkpoint_dir"])
        train_cfg = TrainConfig.from_dict(train_d)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from None
    paths = {k: resolve(raw.get(k)) for k in ("train_corpus", "dev_corpus", "vocab", "embeddings")}
    return paths, model_cfg, train_cfg


def cmd_train(args) -> int:
    started = time.time()
    paths, model_cfg, train_cfg = load_run_config(args.config, args.desk, args.seed)
    vocab = Vocabulary.load(paths["vocab"])
    report = train(load_corpus(paths["train_corpus"]), load_corpus(paths["dev_corpus"]),
                   model_cfg, train_cfg, vocab, embeddings_path=paths["embeddings"],
                   resume=args.resume)
    ckpt_dir = Path(train_cfg.checkpoint_dir)
    (ckpt_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n",
                                          encoding="utf-8")
    _write_manifest(ckpt_dir, _manifest(
        "train", {"model": model_cfg.to_dict(), "training": train_cfg.to_dict()},
        [args.config, paths["train_corpus"], paths["dev_corpus"], paths["vocab"]],
        train_cfg.seed, started))
    for r in report.epochs:
        print(f"epoch {r.epoch:3d}  lr {r.lr:.6g}  train_loss {r.train_loss:.4f}  "
              f"dev_ppl {r.dev_perplexity:.3f}", file=sys.stderr)
    print(f"best: {report.best_checkpoint}", file=sys.stderr)
    return 0


# -- generate --------------------------------------------------------------------

_TOKEN_RE = re.compile(r"\w+(?:[.'’]\w+)*|[^\w\s]", re.UNICODE)


def split_raw(text: str) -> list[str]:
    """Whitespace and punctuation splitter for raw-text input only."""
    return _TOKEN_RE.findall(text)


def raw_example(text: str, answer: str) -> QGExample:
    sent = split_raw(text)
    ans = [t.lower() for t in split_raw(answer)]
    low = [t.lower() for t in sent]
    for i in range(len(low) - len(ans) + 1):
        if ans and low[i:i + len(ans)] == ans:
            span = AnswerSpan(i, i + len(ans) - 1)
            break
    else:
        raise UsageError(f"answer {answer!r} not found in the sentence")
    return QGExample("raw-0", tuple(Token(t) for t in sent), span, (Token("?"),))


_worker: dict = {}


def _init_worker(ckpt, vocab_path):
    vocab = Vocabulary.load(vocab_path)
    _worker["model"], _ = load_model(ckpt, vocab)
    _worker["vocab"] = vocab


def _decode_one(job):
    ex, beam, max_len, want_trace = job
    model, vocab = _worker["model"], _worker["vocab"]
    enc = encode_example(ex, vocab, with_target=False)
    result = beam_search(model, enc, beam, max_len)
    ids = result.best.ids
    traces = []
    if want_trace:
        scored = dataclasses.replace(enc, target=np.asarray(ids, dtype=np.int64))
        _, steps = model.forward_teacher_forced(scored, with_traces=True)
        traces = [dict(step.to_json(), id=ex.id, step=t, token=int(ids[t]))
                  for t, step in enumerate(steps)]
    return ex.id, enc.render(ids, vocab), result.best.log_prob, traces


def _workers() -> int:
    """Worker count: ``QG_TOTP_THREADS`` when set, else the CPU count."""
    raw = os.environ.get("QG_TOTP_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError("QG_TOTP_THREADS must be an integer") from None


def cmd_generate(args) -> int:
    started = time.time()
    ckpt = Path(args.checkpoint)
    if ckpt.is_dir():
        ckpt = best_checkpoint_path(ckpt)
    if args.text is not None:
        if args.answer is None:
            raise UsageError("--text requires --answer")
        corpus = [raw_example(args.text, args.answer)]
    elif args.corpus:
        corpus = load_corpus(args.corpus)
    else:
        raise UsageError("give a corpus file or --text/--answer")
    vocab_path = args.vocab or (Path(args.corpus).with_name("vocab.json") if args.corpus else None)
    if vocab_path is None:
        raise UsageError("--vocab is required with --text")
    _init_worker(ckpt, vocab_path)  # validates the vocabulary hash up front
    cfg = _worker["model"].config
    beam = args.beam_size or cfg.beam_size
    max_len = args.max_len or cfg.max_decode_len
    jobs = [(ex, beam, max_len, args.trace) for ex in corpus]
    n_workers = _workers()
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(n_workers, initializer=_init_worker,
                                 initargs=(str(ckpt), str(vocab_path))) as pool:
            results = list(pool.map(_decode_one, jobs, chunksize=8))
    else:
        results = [_decode_one(j) for j in jobs]

    preds = [(ex_id, tokens) for ex_id, tokens, _, _ in results]
    if args.out:
        out = Path(args.out)
        save_predictions(out, preds)
        if args.trace:
            with open(out.with_name(out.name + ".trace.jsonl"), "w", encoding="utf-8") as fh:
                for _, _, _, traces in results:
                    for t in traces:
                        fh.write(json.dumps(t) + "\n")
        _write_manifest(out, _manifest(
            "generate", {"beam_size": beam, "max_len": max_len, "trace": args.trace,
                         "workers": n_workers},
            [ckpt, args.corpus, vocab_path], cfg.seed, started))
    else:
        for ex_id, tokens in preds:
            print(json.dumps({"id": ex_id, "tokens": tokens}, ensure_ascii=False))
    return 0


# -- evaluate / analyze ----------------------------------------------------------


def cmd_evaluate(args) -> int:
    started = time.time()
    refs = load_corpus(args.references)
    hyps = align(load_predictions(args.predictions), refs)
    report = evaluate(hyps, [[[t.surface for t in ex.question]] for ex in refs])
    print(report.table(), file=sys.stderr)
    _emit(report.as_dict(), args.out,
          _manifest("evaluate", {}, [args.predictions, args.references], None, started))
    return 0


def cmd_analyze(args) -> int:
    started = time.time()
    corpus = load_corpus(args.corpus)
    hyps = align(load_predictions(args.predictions), corpus)
    report = distance_bucket_analysis(corpus, hyps, args.length_filter)
    print(report.table(), file=sys.stderr)
    _emit(report.as_dict(), args.out,
          _manifest("analyze", {"length_filter": args.length_filter},
                    [args.predictions, args.corpus], None, started))
    return 0


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relqg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="filter, select relations, build the vocabulary")
    p.add_argument("corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--desk", action="store_true", help="desk-scale vocabulary cap")
    p.add_argument("--vocab-cap", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("stats", help="sentence vs relation statistics")
    p.add_argument("corpus")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train from a JSON run config")
    p.add_argument("--config", required=True)
    p.add_argument("--desk", action="store_true", help="desk-scale model defaults")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="beam-search questions")
    p.add_argument("checkpoint", help="checkpoint file or checkpoint directory (uses 'best')")
    p.add_argument("corpus", nargs="?")
    p.add_argument("--vocab")
    p.add_argument("--beam-size", type=int)
    p.add_argument("--max-len", type=int)
    p.add_argument("--trace", action="store_true", help="write <out>.trace.jsonl")
    p.add_argument("--text", help="raw sentence instead of a corpus")
    p.add_argument("--answer", help="answer phrase inside --text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="BLEU-1..4 and ROUGE-L")
    p.add_argument("predictions")
    p.add_argument("references")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="scores by answer-relative distance")
    p.add_argument("predictions")
    p.add_argument("corpus")
    p.add_argument("--length-filter", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, CorpusError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
