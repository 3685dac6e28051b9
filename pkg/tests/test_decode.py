import itertools

import pytest

from relqg.data import EOS_ID, RESERVED, UNK_ID, Vocabulary
from relqg.decode import beam_search, greedy_decode
from relqg.model import QGModel, encode_example

from conftest import example, grad_examples, tiny_config


def exhaustive_toy(seed):
    """Fixed vocabulary of reserved ids only plus one OOV source word, so the
    generable tokens are UNK, EOS and the copied word."""
    vocab = Vocabulary(RESERVED)
    ex = example("toy", "zebra", 0, 0, "zebra ?")
    model = QGModel(tiny_config(seed=seed), vocab)
    return model, encode_example(ex, vocab, with_target=False)


def enumerate_sequences(enc, max_len):
    words = [UNK_ID, enc.vocab_size]  # the only non-EOS tokens with nonzero probability
    for n in range(max_len):
        for prefix in itertools.product(words, repeat=n):
            yield tuple(prefix) + (EOS_ID,)


@pytest.mark.parametrize("seed", range(6))
def test_beam4_equals_exhaustive_enumeration(seed):
    model, enc = exhaustive_toy(seed)
    scored = {ids: model.sequence_log_prob(enc, ids) for ids in enumerate_sequences(enc, 3)}
    assert len(scored) == 7
    best_ids = max(scored, key=lambda ids: (scored[ids], [-i for i in ids]))
    result = beam_search(model, enc, beam_size=4, max_len=3)
    assert result.best.ids == best_ids
    assert result.best.log_prob == pytest.approx(scored[best_ids], abs=1e-12)
    for hyp in result.nbest:
        assert hyp.log_prob == pytest.approx(scored[hyp.ids], abs=1e-12)


def test_beam1_equals_greedy():
    examples, vocab = grad_examples()
    for seed in range(4):
        model = QGModel(tiny_config(seed=seed), vocab)
        for ex in examples:
            enc = encode_example(ex, vocab, with_target=False)
            g = greedy_decode(model, enc, 8)
            b = beam_search(model, enc, 1, 8).best
            assert b.ids == g.ids
            assert b.log_prob == pytest.approx(g.log_prob, abs=1e-12)


def test_beam_is_deterministic():
    examples, vocab = grad_examples()
    model = QGModel(tiny_config(), vocab)
    enc = encode_example(examples[0], vocab, with_target=False)
    a = beam_search(model, enc, 3, 10)
    b = beam_search(model, enc, 3, 10)
    assert [h.ids for h in a.nbest] == [h.ids for h in b.nbest]
    assert [h.log_prob for h in a.nbest] == [h.log_prob for h in b.nbest]


def test_max_len_forces_eos():
    examples, vocab = grad_examples()
    model = QGModel(tiny_config(), vocab)
    enc = encode_example(examples[1], vocab, with_target=False)
    for max_len in (1, 2, 5):
        hyp = beam_search(model, enc, 3, max_len).best
        assert hyp.finished and hyp.ids[-1] == EOS_ID and len(hyp.ids) <= max_len
        assert greedy_decode(model, enc, max_len).ids[-1] == EOS_ID


def test_nbest_sorted_by_score():
    examples, vocab = grad_examples()
    model = QGModel(tiny_config(), vocab)
    enc = encode_example(examples[0], vocab, with_target=False)
    scores = [h.log_prob for h in beam_search(model, enc, 4, 6).nbest]
    assert scores == sorted(scores, reverse=True)


def test_invalid_sizes():
    model, enc = exhaustive_toy(0)
    with pytest.raises(ValueError):
        beam_search(model, enc, 0, 3)
    with pytest.raises(ValueError):
        beam_search(model, enc, 2, 0)
    with pytest.raises(ValueError):
        greedy_decode(model, enc, 0)
