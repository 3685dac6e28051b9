"""SGD training with epoch-wise learning-rate halving, global-norm clipping,
per-epoch checkpoints and lowest-dev-perplexity model selection."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import numeric as nm
from .data import QGExample, Vocabulary, load_pretrained_embeddings
from .model import EncodedExample, ModelConfig, QGModel, encode_example

logger = logging.getLogger(__name__)

_CKPT_RE = re.compile(r"^epoch_(\d+)\.ckpt$")


@dataclass
class TrainConfig:
    lr_init: float = 1.0
    epochs: int = 15
    halve_after_epoch: int = 8
    batch_size: int = 64
    clip_norm: float = 3.0
    seed: int = 1
    checkpoint_dir: str = "checkpoints"
    desk_profile: bool = False

    def __post_init__(self):
        if self.lr_init <= 0:
            raise ValueError("train config: lr_init must be positive")
        if self.epochs <= 0:
            raise ValueError("train config: epochs must be positive")
        if not 0 <= self.halve_after_epoch < self.epochs:
            raise ValueError("train config: halve_after_epoch must be in [0, epochs)")
        if self.batch_size <= 0:
            raise ValueError("train config: batch_size must be positive")
        if self.clip_norm <= 0:
            raise ValueError("train config: clip_norm must be positive")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        valid = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - valid
        if unknown:
            raise ValueError(f"unknown training config keys {sorted(unknown)}; "
                             f"valid keys: {sorted(valid)}")
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    dev_perplexity: float
    checkpoint: str


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_checkpoint: str | None = None

    @property
    def best_epoch(self) -> EpochRecord | None:
        return min(self.epochs, key=lambda r: (r.dev_perplexity, r.epoch), default=None)

    def to_dict(self) -> dict:
        return {"epochs": [dataclasses.asdict(r) for r in self.epochs],
                "best_checkpoint": self.best_checkpoint}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainReport":
        return cls([EpochRecord(**r) for r in d["epochs"]], d.get("best_checkpoint"))


def lr_schedule(epoch: int, config: TrainConfig) -> float:
    """Constant through ``halve_after_epoch``, then halved every epoch."""
    if not 1 <= epoch <= config.epochs:
        raise ValueError(f"epoch {epoch} outside 1..{config.epochs}")
    return config.lr_init * 0.5 ** max(0, epoch - config.halve_after_epoch)


def sgd_step(params: Sequence[nm.Parameter], lr: float) -> None:
    for p in params:
        p.data -= lr * p.grad
        p.zero_grad()


def make_batches(lengths: Sequence[int], batch_size: int,
                 rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffle, sort pools of 20 batches by length, then shuffle batch order.

    The final partial batch is kept.
    """
    order = rng.permutation(len(lengths))
    lengths = np.asarray(lengths)
    pool = batch_size * 20
    batches = []
    for start in range(0, len(order), pool):
        chunk = order[start:start + pool]
        chunk = chunk[np.argsort(lengths[chunk], kind="stable")]
        batches.extend(chunk[i:i + batch_size] for i in range(0, len(chunk), batch_size))
    perm = rng.permutation(len(batches))
    return [batches[i] for i in perm]


def corpus_nll(model: QGModel, encoded: Sequence[EncodedExample]) -> tuple[float, int]:
    """Total eval-mode NLL and target-token count."""
    total, tokens = 0.0, 0
    for enc in encoded:
        loss, _ = model.forward_teacher_forced(enc, train=False)
        total += float(loss.data)
        tokens += len(enc.target)
    return total, tokens


def perplexity(model: QGModel, encoded: Sequence[EncodedExample]) -> float:
    total, tokens = corpus_nll(model, encoded)
    return math.exp(total / tokens)


def token_accuracy(model: QGModel, encoded: Sequence[EncodedExample]) -> float:
    """Fraction of target positions whose teacher-forced argmax is correct."""
    hit = n = 0
    for enc in encoded:
        _, traces = model.forward_teacher_forced(enc, train=False, with_traces=True)
        pred = np.array([int(np.argmax(t.p_final)) for t in traces])
        hit += int((pred == enc.target).sum())
        n += len(enc.target)
    return hit / n


def train_epoch(model: QGModel, encoded: Sequence[EncodedExample], batches, lr: float,
                clip_norm: float) -> float:
    params = model.parameters()
    model.zero_grad()
    total, tokens = 0.0, 0
    for batch in batches:
        n_tok = sum(len(encoded[i].target) for i in batch)
        for i in batch:
            with nm.Tape() as tape:
                loss, _ = model.forward_teacher_forced(encoded[i], train=True)
                scaled = nm.mul(loss, 1.0 / n_tok)
            nm.backward(scaled, tape)
            total += float(loss.data)
        tokens += n_tok
        nm.clip_global_norm(params, clip_norm)
        sgd_step(params, lr)
    return total / tokens


def _rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def _set_rng_state(rng: np.random.Generator, state: dict) -> None:
    rng.bit_generator.state = state


def save_checkpoint(path: Path, model: QGModel, meta: dict) -> None:
    header = dict(meta, model_config=model.config.to_dict(),
                  vocab_digest=model.vocab.digest)
    nm.save_arrays(path, model.state_arrays(), header)


def load_model(path, vocab: Vocabulary) -> tuple[QGModel, dict]:
    arrays, meta = nm.load_arrays(path)
    if meta.get("vocab_digest") != vocab.digest:
        raise ValueError(f"{path}: vocabulary hash mismatch (checkpoint "
                         f"{str(meta.get('vocab_digest'))[:12]}, given {vocab.digest[:12]})")
    model = QGModel(ModelConfig.from_dict(meta["model_config"]), vocab)
    model.load_state_arrays(arrays)
    return model, meta


def _latest_checkpoint(ckpt_dir: Path) -> tuple[int, Path] | None:
    found = []
    for p in ckpt_dir.glob("epoch_*.ckpt"):
        m = _CKPT_RE.match(p.name)
        if m:
            found.append((int(m.group(1)), p))
    return max(found) if found else None


def train(corpus_train: Sequence[QGExample], corpus_dev: Sequence[QGExample],
          model_config: ModelConfig, train_config: TrainConfig, vocab: Vocabulary,
          embeddings_path: str | None = None, resume: bool = False,
          stop_after_epoch: int | None = None) -> TrainReport:
    """Run the full schedule, writing ``epoch_<k>.ckpt``, a ``best`` marker and
    ``train_log.jsonl`` under ``train_config.checkpoint_dir``.

    ``stop_after_epoch`` ends the run early (as an interruption would);
    ``resume`` continues from the newest checkpoint in the directory.
    """
    if not corpus_train:
        raise ValueError("training corpus is empty")
    if not corpus_dev:
        raise ValueError("dev corpus is empty")
    ckpt_dir = Path(train_config.checkpoint_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    log_path = ckpt_dir / "train_log.jsonl"

    encoded = [encode_example(ex, vocab) for ex in corpus_train]
    dev = [encode_example(ex, vocab) for ex in corpus_dev]
    lengths = [len(e.sent_words) for e in encoded]

    model = QGModel(model_config, vocab)
    shuffle_rng = nm.make_rng(train_config.seed)
    report = TrainReport()
    start_epoch = 1

    latest = _latest_checkpoint(ckpt_dir) if resume else None
    if latest is not None:
        epoch_done, path = latest
        arrays, meta = nm.load_arrays(path)
        if meta.get("vocab_digest") != vocab.digest:
            raise ValueError(f"{path}: vocabulary hash mismatch")
        if meta["model_config"] != model_config.to_dict():
            raise ValueError(f"{path}: model config differs from the resumed run")
        model.load_state_arrays(arrays)
        _set_rng_state(shuffle_rng, meta["shuffle_rng"])
        _set_rng_state(model.rng, meta["dropout_rng"])
        report = TrainReport.from_dict(meta["report"])
        start_epoch = epoch_done + 1
        logger.info("resuming after epoch %d from %s", epoch_done, path)
    else:
        if log_path.exists():
            log_path.unlink()
        if embeddings_path:
            n = load_pretrained_embeddings(embeddings_path, vocab,
                                           model.params["emb.word"].data)
            logger.info("initialized %d word vectors from %s", n, embeddings_path)

    for epoch in range(start_epoch, train_config.epochs + 1):
        lr = lr_schedule(epoch, train_config)
        batches = make_batches(lengths, train_config.batch_size, shuffle_rng)
        train_loss = train_epoch(model, encoded, batches, lr, train_config.clip_norm)
        dev_ppl = perplexity(model, dev)
        name = f"epoch_{epoch}.ckpt"
        record = EpochRecord(epoch, lr, train_loss, dev_ppl, name)
        report.epochs.append(record)
        report.best_checkpoint = report.best_epoch.checkpoint
        save_checkpoint(ckpt_dir / name, model, {
            "epoch": epoch,
            "train_config": train_config.to_dict(),
            "shuffle_rng": _rng_state(shuffle_rng),
            "dropout_rng": _rng_state(model.rng),
            "report": report.to_dict(),
        })
        (ckpt_dir / "best").write_text(report.best_checkpoint + "\n", encoding="utf-8")
        with open(log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(dataclasses.asdict(record)) + "\n")
        logger.info("epoch %d lr %.6g train_loss %.4f dev_ppl %.3f",
                    epoch, lr, train_loss, dev_ppl)
        if stop_after_epoch is not None and epoch >= stop_after_epoch:
            break
    return report


def best_checkpoint_path(ckpt_dir) -> Path:
    ckpt_dir = Path(ckpt_dir)
    marker = ckpt_dir / "best"
    if not marker.exists():
        raise FileNotFoundError(f"no 'best' marker in {ckpt_dir}")
    return ckpt_dir / marker.read_text(encoding="utf-8").strip()
