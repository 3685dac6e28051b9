"""Dual-encoder question generator with gated attention fusion and a dual
copy mechanism.

One sentence encoder reads word, POS, NER and answer-position embeddings;
a second encoder reads the selected relation (word and answer-position
embeddings only). A unidirectional LSTM decoder attends over both, fuses the
two context vectors with an element-wise gate, and mixes a vocabulary
distribution with two copy distributions through a copy/generate gate and a
sentence/relation gate.

The decoder consumes only the previous word, so during teacher forcing the
whole target sequence runs through the recurrence once and every readout
step is computed as a batch of rows.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import numeric as nm
from .data import (
    ANSWER_TAG_IDS,
    BOS_ID,
    EOS_ID,
    PAD_ID,
    UNK_ID,
    Vocabulary,
    bio_tags,
)
from .numeric import Parameter, Tensor
from .records import QGExample, RelationContext, Token
from .relation import select_relation

# never generated by the vocabulary softmax
MASKED_IDS = (PAD_ID, BOS_ID)


@dataclass
class ModelConfig:
    word_dim: int = 300
    pos_dim: int = 20
    ner_dim: int = 20
    ans_dim: int = 20
    hidden: int = 600
    layers: int = 2
    dropout_p: float = 0.3
    vocab_cap: int = 20000
    beam_size: int = 3
    max_decode_len: int = 30
    seed: int = 1

    def __post_init__(self):
        for name in ("word_dim", "pos_dim", "ner_dim", "ans_dim", "hidden", "layers",
                     "vocab_cap", "beam_size", "max_decode_len"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"model config: {name} must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError("model config: dropout_p must be in [0, 1)")

    @classmethod
    def desk(cls, **overrides) -> "ModelConfig":
        base = dict(word_dim=64, pos_dim=8, ner_dim=8, ans_dim=8, hidden=64,
                    layers=1, vocab_cap=5000)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        valid = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - valid
        if unknown:
            raise ValueError(f"unknown model config keys {sorted(unknown)}; "
                             f"valid keys: {sorted(valid)}")
        return cls(**d)


# -- per-example integer encoding ---------------------------------------------


@dataclass
class EncodedExample:
    """Integer views of one example over the fixed and extended vocabularies.

    Source words missing from the fixed vocabulary get extended ids
    ``len(vocab) + k`` in order of first appearance (sentence, then relation).
    """

    sent_words: np.ndarray
    sent_pos: np.ndarray
    sent_ner: np.ndarray
    sent_ans: np.ndarray
    ctx_words: np.ndarray
    ctx_ans: np.ndarray
    sent_ext: np.ndarray
    ctx_ext: np.ndarray
    oov_words: list[str]
    oov_surfaces: list[str]
    vocab_size: int
    target: np.ndarray | None = None

    @property
    def ext_size(self) -> int:
        return self.vocab_size + len(self.oov_words)

    @property
    def decoder_inputs(self) -> np.ndarray:
        prev = np.concatenate([[BOS_ID], self.target[:-1]]).astype(np.int64)
        return clamp_to_vocab(prev, self.vocab_size)

    def ext_id(self, word: str, vocab: Vocabulary) -> int:
        low = word.lower()
        if low in vocab:
            return vocab.id(low)
        try:
            return self.vocab_size + self.oov_words.index(low)
        except ValueError:
            return UNK_ID

    def render(self, ids: Sequence[int], vocab: Vocabulary) -> list[str]:
        out = []
        for i in ids:
            if i == EOS_ID:
                break
            out.append(self.oov_surfaces[i - self.vocab_size] if i >= self.vocab_size
                       else vocab.word(i))
        return out


def clamp_to_vocab(ids: np.ndarray, vocab_size: int) -> np.ndarray:
    return np.where(ids >= vocab_size, UNK_ID, ids)


def encode_example(example: QGExample, vocab: Vocabulary,
                   context: RelationContext | None = None,
                   with_target: bool = True) -> EncodedExample:
    if context is None:
        context = example.context if example.context is not None else select_relation(example)
    sent, ctx = example.sentence, context.tokens
    if not sent:
        raise ValueError(f"example {example.id}: empty sentence")
    if not ctx:
        raise ValueError(f"example {example.id}: empty relation context")
    oov_words: list[str] = []
    oov_surfaces: list[str] = []
    V = len(vocab)

    def ext(tok: Token) -> int:
        if tok.lower in vocab:
            return vocab.id(tok.lower)
        if tok.lower not in oov_words:
            oov_words.append(tok.lower)
            oov_surfaces.append(tok.surface)
        return V + oov_words.index(tok.lower)

    ints = lambda xs: np.asarray(xs, dtype=np.int64)
    enc = EncodedExample(
        sent_words=ints([vocab.id(t.lower) for t in sent]),
        sent_pos=ints([vocab.pos_id(t.pos) for t in sent]),
        sent_ner=ints([vocab.ner_id(t.ner) for t in sent]),
        sent_ans=ints([ANSWER_TAG_IDS[a] for a in bio_tags(len(sent), example.answer)]),
        ctx_words=ints([vocab.id(t.lower) for t in ctx]),
        ctx_ans=ints([ANSWER_TAG_IDS[a] for a in context.answer_tags]),
        sent_ext=ints([ext(t) for t in sent]),
        ctx_ext=ints([ext(t) for t in ctx]),
        oov_words=oov_words,
        oov_surfaces=oov_surfaces,
        vocab_size=V,
    )
    if with_target:
        enc.target = ints([enc.ext_id(t.lower, vocab) for t in example.question] + [EOS_ID])
    return enc


# -- traces and encoder outputs ----------------------------------------------


@dataclass
class EncoderOutput:
    states: Tensor          # (n, 2H)
    final_fwd: Tensor       # (1, H)
    final_bwd: Tensor       # (1, H)


@dataclass
class DecodeStepTrace:
    attn_sentence: np.ndarray
    attn_relation: np.ndarray
    fuse_gate: np.ndarray
    copy_gate: float
    source_gate: float
    p_vocab: np.ndarray
    p_sentence: np.ndarray
    p_relation: np.ndarray
    p_final: np.ndarray

    def to_json(self, top_k: int = 10) -> dict:
        def top(p):
            idx = np.argsort(-p, kind="stable")[:top_k]
            return [[int(i), float(p[i])] for i in idx]

        def sparse(p):
            nz = np.flatnonzero(p)
            return [[int(i), float(p[i])] for i in nz]

        return {
            "attn_sentence": self.attn_sentence.tolist(),
            "attn_relation": self.attn_relation.tolist(),
            "fuse_gate_mean": float(self.fuse_gate.mean()),
            "copy_gate": self.copy_gate,
            "source_gate": self.source_gate,
            "p_vocab_top": top(self.p_vocab),
            "p_sentence": sparse(self.p_sentence),
            "p_relation": sparse(self.p_relation),
            "p_final_top": top(self.p_final),
            "p_final_sum": float(self.p_final.sum()),
        }


@dataclass
class Readout:
    """Per-row tensors of one batch of decoder readout steps."""

    attn_s: Tensor
    attn_m: Tensor
    fuse_gate: Tensor
    copy_gate: Tensor
    source_gate: Tensor
    p_vocab: Tensor
    p_sentence: Tensor
    p_relation: Tensor
    p_final: Tensor

    def traces(self, ext_size: int) -> list[DecodeStepTrace]:
        pv = self.p_vocab.data
        pad = np.zeros((pv.shape[0], ext_size - pv.shape[1]))
        pv_ext = np.concatenate([pv, pad], axis=1)
        return [
            DecodeStepTrace(self.attn_s.data[r].copy(), self.attn_m.data[r].copy(),
                            self.fuse_gate.data[r].copy(), float(self.copy_gate.data[r, 0]),
                            float(self.source_gate.data[r, 0]), pv_ext[r],
                            self.p_sentence.data[r].copy(), self.p_relation.data[r].copy(),
                            self.p_final.data[r].copy())
            for r in range(pv.shape[0])
        ]


# -- the model ----------------------------------------------------------------


class QGModel:
    def __init__(self, config: ModelConfig, vocab: Vocabulary):
        self.config = config
        self.vocab = vocab
        self.rng = nm.make_rng(config.seed + 1)  # dropout masks
        # test hooks: "fuse", "copy", "source" -> constant gate value
        self.gate_overrides: dict[str, float] = {}
        self.params: dict[str, Parameter] = {}
        self._build(nm.make_rng(config.seed))
        self._vocab_mask = np.zeros(len(vocab), dtype=bool)
        self._vocab_mask[list(MASKED_IDS)] = True

    def _add(self, name: str, shape, rng) -> Parameter:
        p = Parameter(name, nm.xavier_uniform_init(shape, rng))
        self.params[name] = p
        return p

    def _build(self, rng) -> None:
        c, v = self.config, self.vocab
        H, L = c.hidden, c.layers
        self._add("emb.word", (len(v), c.word_dim), rng)
        self._add("emb.pos", (len(v.pos_tags), c.pos_dim), rng)
        self._add("emb.ner", (len(v.ner_tags), c.ner_dim), rng)
        self._add("emb.answer", (len(ANSWER_TAG_IDS), c.ans_dim), rng)
        dims = {"enc_s": c.word_dim + c.pos_dim + c.ner_dim + c.ans_dim,
                "enc_m": c.word_dim + c.ans_dim}
        for enc, d_in in dims.items():
            for layer in range(L):
                d = d_in if layer == 0 else 2 * H
                for direction in ("fwd", "bwd"):
                    self._add(f"{enc}.l{layer}.{direction}.W", (d + H, 4 * H), rng)
                    self._add(f"{enc}.l{layer}.{direction}.b", (4 * H,), rng)
        for layer in range(L):
            self._add(f"dec.init.l{layer}.W", (2 * H, H), rng)
            self._add(f"dec.init.l{layer}.b", (H,), rng)
            d = c.word_dim if layer == 0 else H
            self._add(f"dec.l{layer}.W", (d + H, 4 * H), rng)
            self._add(f"dec.l{layer}.b", (4 * H,), rng)
        self._add("attn.sentence.W", (H, 2 * H), rng)
        self._add("attn.relation.W", (H, 2 * H), rng)
        self._add("gate.fuse.W", (4 * H, 2 * H), rng)
        self._add("out.hidden.W", (3 * H, H), rng)
        self._add("out.vocab.W", (H, len(v)), rng)
        self._add("out.vocab.b", (len(v),), rng)
        self._add("gate.copy.w", (H, 1), rng)
        self._add("gate.copy.b", (1,), rng)
        self._add("gate.source.w", (4 * H, 1), rng)
        self._add("gate.source.b", (1,), rng)

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(arrays)
        extra = set(arrays) - set(self.params)
        if missing or extra:
            raise ValueError(f"checkpoint parameters mismatch: missing {sorted(missing)}, "
                             f"unexpected {sorted(extra)}")
        for name, p in self.params.items():
            if arrays[name].shape != p.shape:
                raise ValueError(f"parameter {name}: checkpoint shape {arrays[name].shape} "
                                 f"!= model shape {p.shape}")
            p.data[...] = arrays[name]

    # -- encoders ----------------------------------------------------------

    def _dropout(self, x: Tensor, train: bool) -> Tensor:
        return nm.dropout(x, self.config.dropout_p, train, self.rng)

    def _bilstm(self, x: Tensor, prefix: str, train: bool) -> EncoderOutput:
        H = self.config.hidden
        n = x.shape[0]
        zeros_h = Tensor(np.zeros((1, H)))
        zeros_c = np.zeros((1, H))
        for layer in range(self.config.layers):
            if layer > 0:
                x = self._dropout(x, train)
            seq = nm.reshape(x, (n, 1, x.shape[1]))
            outs = []
            for direction, rev in (("fwd", False), ("bwd", True)):
                p = f"{prefix}.l{layer}.{direction}"
                hs, _ = nm.lstm(seq, self.params[p + ".W"], self.params[p + ".b"],
                                zeros_h, zeros_c, reverse=rev)
                outs.append(nm.reshape(hs, (n, H)))
            x = nm.concat(outs, axis=1)
        fwd, bwd = outs
        return EncoderOutput(x, nm.take(fwd, slice(n - 1, n)), nm.take(bwd, slice(0, 1)))

    def encode_sentence(self, enc: EncodedExample, train: bool = False) -> EncoderOutput:
        if len(enc.sent_words) == 0:
            raise ValueError("cannot encode an empty sentence")
        P = self.params
        x = nm.concat([nm.embedding_lookup(P["emb.word"], enc.sent_words),
                       nm.embedding_lookup(P["emb.pos"], enc.sent_pos),
                       nm.embedding_lookup(P["emb.ner"], enc.sent_ner),
                       nm.embedding_lookup(P["emb.answer"], enc.sent_ans)], axis=1)
        return self._bilstm(x, "enc_s", train)

    def encode_relation(self, enc: EncodedExample, train: bool = False) -> EncoderOutput:
        if len(enc.ctx_words) == 0:
            raise ValueError("cannot encode an empty relation context")
        P = self.params
        x = nm.concat([nm.embedding_lookup(P["emb.word"], enc.ctx_words),
                       nm.embedding_lookup(P["emb.answer"], enc.ctx_ans)], axis=1)
        return self._bilstm(x, "enc_m", train)

    # -- decoder -------------------------------------------------------------

    def initial_state(self, sent: EncoderOutput) -> list[tuple[Tensor, np.ndarray]]:
        """Per-layer (h, c) from an affine+tanh map of the sentence encoder's
        final forward and backward states; cells start at zero."""
        final = nm.concat([sent.final_fwd, sent.final_bwd], axis=1)
        H = self.config.hidden
        state = []
        for layer in range(self.config.layers):
            h = nm.tanh(nm.add(nm.matmul(final, self.params[f"dec.init.l{layer}.W"]),
                               self.params[f"dec.init.l{layer}.b"]))
            state.append((h, np.zeros((1, H))))
        return state

    def run_decoder(self, prev_ids: np.ndarray, state, train: bool = False):
        """Advance the decoder over inputs laid out as (T, B).

        ``state`` holds per-layer ``(h, c)`` with h of shape (B, H). Returns the
        top-layer outputs as (T * B, H) rows (time-major) and the new state.
        """
        T, B = prev_ids.shape
        x = nm.embedding_lookup(self.params["emb.word"], prev_ids.reshape(-1))
        x = nm.reshape(x, (T, B, self.config.word_dim))
        new_state = []
        for layer, (h0, c0) in enumerate(state):
            if layer > 0:
                x = self._dropout(x, train)
            x, c_last = nm.lstm(x, self.params[f"dec.l{layer}.W"],
                                self.params[f"dec.l{layer}.b"], h0, c0)
            new_state.append((nm.take(x, T - 1), c_last))
        return nm.reshape(x, (T * B, self.config.hidden)), new_state

    # -- readout components ----------------------------------------------------

    @staticmethod
    def attend(query: Tensor, keys: Tensor, weight: Tensor):
        """Bilinear attention: softmax over ``query W keys^T``; returns
        (scores, context)."""
        energy = nm.matmul(nm.matmul(query, weight), nm.transpose(keys))
        scores = nm.softmax(energy, axis=1)
        return scores, nm.matmul(scores, keys)

    def gated_fuse(self, c_s: Tensor, c_m: Tensor, u: Tensor):
        if c_s.shape != c_m.shape:
            raise nm.ShapeError(f"gated_fuse: incompatible shapes {c_s.shape} and {c_m.shape}")
        both = nm.concat([c_s, c_m], axis=1)
        if "fuse" in self.gate_overrides:
            g = Tensor(np.full(c_s.shape, float(self.gate_overrides["fuse"])))
        else:
            g = nm.sigmoid(nm.matmul(both, self.params["gate.fuse.W"]))
        c = nm.add(nm.mul(g, c_s), nm.mul(nm.sub(1.0, g), c_m))
        h_tilde = nm.tanh(nm.matmul(nm.concat([u, c], axis=1), self.params["out.hidden.W"]))
        return g, c, h_tilde

    def vocab_distribution(self, h_tilde: Tensor) -> Tensor:
        logits = nm.add(nm.matmul(h_tilde, self.params["out.vocab.W"]),
                        self.params["out.vocab.b"])
        mask = np.broadcast_to(self._vocab_mask, logits.shape)
        return nm.softmax(logits, axis=1, mask=mask)

    @staticmethod
    def copy_distributions(scores_s: Tensor, scores_m: Tensor, enc: EncodedExample):
        """Attention mass summed per extended-vocabulary word, for each source."""
        size = enc.ext_size
        return (nm.scatter_add(scores_s, enc.sent_ext, size),
                nm.scatter_add(scores_m, enc.ctx_ext, size))

    def copy_gates(self, h_tilde: Tensor, c_s: Tensor, c_m: Tensor):
        rows = h_tilde.shape[0]
        ov = self.gate_overrides
        if "copy" in ov:
            g_v = Tensor(np.full((rows, 1), float(ov["copy"])))
        else:
            g_v = nm.sigmoid(nm.add(nm.matmul(h_tilde, self.params["gate.copy.w"]),
                                    self.params["gate.copy.b"]))
        if "source" in ov:
            g_c = Tensor(np.full((rows, 1), float(ov["source"])))
        else:
            both = nm.concat([c_s, c_m], axis=1)
            g_c = nm.sigmoid(nm.add(nm.matmul(both, self.params["gate.source.w"]),
                                    self.params["gate.source.b"]))
        return g_v, g_c

    @staticmethod
    def final_distribution(p_vocab: Tensor, p_sent: Tensor, p_rel: Tensor,
                           g_v: Tensor, g_c: Tensor) -> Tensor:
        rows, ext = p_sent.shape
        n_oov = ext - p_vocab.shape[1]
        pv = p_vocab if n_oov == 0 else nm.concat([p_vocab, np.zeros((rows, n_oov))], axis=1)
        generate = nm.mul(nm.sub(1.0, g_v), pv)
        from_sent = nm.mul(nm.mul(g_v, g_c), p_sent)
        from_rel = nm.mul(nm.mul(g_v, nm.sub(1.0, g_c)), p_rel)
        return nm.add(nm.add(generate, from_sent), from_rel)

    def readout(self, u: Tensor, sent: EncoderOutput, rel: EncoderOutput,
                enc: EncodedExample, train: bool = False) -> Readout:
        a_s, c_s = self.attend(u, sent.states, self.params["attn.sentence.W"])
        a_m, c_m = self.attend(u, rel.states, self.params["attn.relation.W"])
        g, _, h_tilde = self.gated_fuse(c_s, c_m, u)
        h_tilde = self._dropout(h_tilde, train)
        p_v = self.vocab_distribution(h_tilde)
        p_s, p_m = self.copy_distributions(a_s, a_m, enc)
        g_v, g_c = self.copy_gates(h_tilde, c_s, c_m)
        p = self.final_distribution(p_v, p_s, p_m, g_v, g_c)
        return Readout(a_s, a_m, g, g_v, g_c, p_v, p_s, p_m, p)

    # -- training objective ------------------------------------------------

    def forward_teacher_forced(self, enc: EncodedExample, train: bool = False,
                               with_traces: bool = False):
        """Summed negative log-likelihood of ``enc.target`` (question + EOS).

        Returns ``(loss, traces)``; traces are empty unless requested.
        """
        sent = self.encode_sentence(enc, train)
        rel = self.encode_relation(enc, train)
        state = self.initial_state(sent)
        prev = enc.decoder_inputs.reshape(-1, 1)
        u, _ = self.run_decoder(prev, state, train)
        out = self.readout(u, sent, rel, enc, train)
        T = len(enc.target)
        picked = nm.pick(out.p_final, np.arange(T), enc.target)
        loss = nm.sub(0.0, nm.total(nm.log(picked)))
        traces = out.traces(enc.ext_size) if with_traces else []
        return loss, traces

    def sequence_log_prob(self, enc: EncodedExample, ids: Sequence[int]) -> float:
        """log P(ids | sources) under teacher forcing, eval mode."""
        scored = dataclasses.replace(enc, target=np.asarray(ids, dtype=np.int64))
        loss, _ = self.forward_teacher_forced(scored, train=False)
        return -float(loss.data)
