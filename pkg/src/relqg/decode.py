"""Greedy and beam-search decoding over the extended vocabulary.

Both decoders force EOS at the last permitted step, so every returned
hypothesis of ``max_len`` steps ends in EOS unless EOS has zero probability.

Beam search is length-unnormalized. Candidates are ranked by score, then
lower token id, then earlier parent creation. The ``beam_size`` best
non-EOS candidates continue. An EOS candidate becomes a finished hypothesis
unless continuing candidates were pruned at this step and it ranks below the
last one kept; this makes ``beam_size=1`` coincide with greedy decoding, and
makes the search exact whenever no pruning happens. Search stops early once
the best finished score is at least the best live score, since scores only
decrease.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numeric as nm
from .data import BOS_ID, EOS_ID
from .model import EncodedExample, QGModel, clamp_to_vocab


@dataclass
class Hypothesis:
    ids: tuple[int, ...]
    log_prob: float
    state: list
    finished: bool
    order: int = 0

    def key(self):
        return (-self.log_prob, self.ids[-1] if self.ids else -1, self.order)


@dataclass
class DecodeResult:
    best: Hypothesis
    nbest: list[Hypothesis]


def _prepare(model: QGModel, enc: EncodedExample):
    sent = model.encode_sentence(enc, train=False)
    rel = model.encode_relation(enc, train=False)
    state = [(h.data, c) for h, c in model.initial_state(sent)]
    return sent, rel, state


def _step(model: QGModel, sent, rel, enc, prev_ids: list[int], states: list[list]):
    """One decoder step for a batch of hypotheses; returns log P (B, ext)
    and per-row new states."""
    B = len(prev_ids)
    stacked = [(nm.Tensor(np.concatenate([s[layer][0] for s in states], axis=0)),
                np.concatenate([s[layer][1] for s in states], axis=0))
               for layer in range(len(states[0]))]
    prev = clamp_to_vocab(np.asarray(prev_ids, dtype=np.int64), enc.vocab_size)
    u, new = model.run_decoder(prev.reshape(1, B), stacked, train=False)
    p = model.readout(u, sent, rel, enc, train=False).p_final.data
    with np.errstate(divide="ignore"):
        logp = np.log(p)
    per_row = [[(h.data[r:r + 1].copy(), c[r:r + 1].copy()) for h, c in new]
               for r in range(B)]
    return logp, per_row


def greedy_decode(model: QGModel, enc: EncodedExample, max_len: int) -> Hypothesis:
    if max_len <= 0:
        raise ValueError("max_len must be positive")
    sent, rel, state = _prepare(model, enc)
    ids: list[int] = []
    total = 0.0
    for step in range(1, max_len + 1):
        logp, states = _step(model, sent, rel, enc, [ids[-1] if ids else BOS_ID], [state])
        row = logp[0]
        w = EOS_ID if step == max_len else int(np.argmax(row))
        total += float(row[w])
        ids.append(w)
        state = states[0]
        if w == EOS_ID:
            break
    return Hypothesis(tuple(ids), total, state, ids[-1] == EOS_ID)


def beam_search(model: QGModel, enc: EncodedExample, beam_size: int,
                max_len: int) -> DecodeResult:
    if beam_size <= 0:
        raise ValueError("beam_size must be positive")
    if max_len <= 0:
        raise ValueError("max_len must be positive")
    sent, rel, state = _prepare(model, enc)
    alive = [Hypothesis((), 0.0, state, False, 0)]
    finished: list[Hypothesis] = []
    created = 1
    for step in range(1, max_len + 1):
        prev = [h.ids[-1] if h.ids else BOS_ID for h in alive]
        logp, states = _step(model, sent, rel, enc, prev, [h.state for h in alive])
        base = np.array([h.log_prob for h in alive])
        scores = base[:, None] + logp
        orders = np.array([h.order for h in alive])

        cont = scores.copy()
        cont[:, EOS_ID] = -np.inf
        if step == max_len:
            cont[:] = -np.inf
        rows, cols = np.nonzero(np.isfinite(cont))
        # rank: score desc, token id asc, parent order asc
        rank = np.lexsort((orders[rows], cols, -cont[rows, cols]))
        pruned = len(rank) > beam_size
        keep = rank[:beam_size]
        cutoff = None
        if pruned:
            k = keep[-1]
            cutoff = (-cont[rows[k], cols[k]], int(cols[k]), int(orders[rows[k]]))

        for b, hyp in enumerate(alive):
            s = scores[b, EOS_ID]
            if not np.isfinite(s):
                continue
            key = (-s, EOS_ID, hyp.order)
            if cutoff is None or key < cutoff:
                finished.append(Hypothesis(hyp.ids + (EOS_ID,), float(s), states[b],
                                           True, created))
                created += 1

        next_alive = []
        for k in keep:
            b, w = int(rows[k]), int(cols[k])
            next_alive.append(Hypothesis(alive[b].ids + (w,), float(cont[b, w]),
                                         states[b], False, created))
            created += 1
        if not next_alive:
            break
        alive = next_alive
        if finished and max(h.log_prob for h in finished) >= alive[0].log_prob:
            break

    pool = finished if finished else alive
    nbest = sorted(pool, key=Hypothesis.key)
    return DecodeResult(nbest[0], nbest)
