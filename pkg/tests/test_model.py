import json

import numpy as np
import pytest

from relqg import numeric as nm
from relqg.data import BOS_ID, EOS_ID, PAD_ID, UNK_ID
from relqg.model import ModelConfig, QGModel, encode_example

from conftest import grad_examples, tiny_config


@pytest.fixture
def setup():
    examples, vocab = grad_examples()
    model = QGModel(tiny_config(), vocab)
    return model, vocab, [encode_example(ex, vocab) for ex in examples]


def test_extended_vocabulary_ids(setup):
    _, vocab, (copy_enc, fallback_enc) = setup
    V = len(vocab)
    assert copy_enc.oov_words == ["polonium"]
    pol = copy_enc.ext_id("polonium", vocab)
    assert pol >= V
    assert copy_enc.target[-1] == EOS_ID
    assert copy_enc.target[4] == pol
    assert copy_enc.sent_ext[3] == pol and copy_enc.ctx_ext[3] == pol
    assert copy_enc.decoder_inputs[5] == UNK_ID  # OOV inputs are clamped
    assert copy_enc.decoder_inputs[0] == BOS_ID
    assert fallback_enc.oov_words == []
    np.testing.assert_array_equal(fallback_enc.ctx_words, fallback_enc.sent_words)


def test_render_uses_source_surface(setup):
    _, vocab, (copy_enc, _) = setup
    ids = [vocab.id("when"), copy_enc.ext_id("polonium", vocab), EOS_ID, vocab.id("when")]
    assert copy_enc.render(ids, vocab) == ["when", "polonium"]


def test_parameter_shapes_follow_config():
    _, vocab = grad_examples()
    cfg = tiny_config(hidden=7, layers=2, word_dim=5)
    model = QGModel(cfg, vocab)
    P = model.params
    assert P["enc_s.l0.fwd.W"].shape == (5 + 3 + 3 + 3 + 7, 28)
    assert P["enc_s.l1.bwd.W"].shape == (14 + 7, 28)
    assert P["enc_m.l0.fwd.W"].shape == (5 + 3 + 7, 28)
    assert P["dec.l1.W"].shape == (7 + 7, 28)
    assert P["gate.fuse.W"].shape == (28, 14)
    assert P["out.vocab.W"].shape == (7, len(vocab))


def test_same_seed_same_weights():
    _, vocab = grad_examples()
    a, b = QGModel(tiny_config(), vocab), QGModel(tiny_config(), vocab)
    for name in a.params:
        assert a.params[name].data.tobytes() == b.params[name].data.tobytes()


def test_distributions_and_gates(setup):
    model, _, encs = setup
    for enc in encs:
        loss, traces = model.forward_teacher_forced(enc, with_traces=True)
        assert len(traces) == len(enc.target)
        for tr in traces:
            for p in (tr.p_vocab, tr.p_sentence, tr.p_relation, tr.p_final):
                assert abs(p.sum() - 1.0) < 1e-9
            assert 0 < tr.copy_gate < 1 and 0 < tr.source_gate < 1
            assert np.all((tr.fuse_gate > 0) & (tr.fuse_gate < 1))
            assert tr.p_vocab[PAD_ID] == 0 and tr.p_vocab[BOS_ID] == 0
            for w in enc.oov_words:
                assert tr.p_final[enc.vocab_size + enc.oov_words.index(w)] > 0
        assert float(loss.data) > 0


def test_gate_overrides_reproduce_endpoints(setup):
    model, _, (enc, _) = setup
    sent = model.encode_sentence(enc)
    rel = model.encode_relation(enc)
    u, _ = model.run_decoder(enc.decoder_inputs.reshape(-1, 1), model.initial_state(sent))
    model.gate_overrides = {"copy": 0.0}
    out = model.readout(u, sent, rel, enc)
    V = enc.vocab_size
    np.testing.assert_allclose(out.p_final.data[:, :V], out.p_vocab.data, atol=1e-12, rtol=0)
    assert np.abs(out.p_final.data[:, V:]).max() <= 1e-12
    model.gate_overrides = {"copy": 1.0, "source": 1.0}
    out = model.readout(u, sent, rel, enc)
    np.testing.assert_allclose(out.p_final.data, out.p_sentence.data, atol=1e-12, rtol=0)
    model.gate_overrides = {"fuse": 1.0}
    a_s, c_s = model.attend(u, sent.states, model.params["attn.sentence.W"])
    a_m, c_m = model.attend(u, rel.states, model.params["attn.relation.W"])
    _, fused, _ = model.gated_fuse(c_s, c_m, u)
    np.testing.assert_allclose(fused.data, c_s.data, atol=1e-12, rtol=0)


def test_gated_fuse_shape_error(setup):
    model, _, _ = setup
    with pytest.raises(nm.ShapeError):
        model.gated_fuse(nm.Tensor(np.zeros((2, 10))), nm.Tensor(np.zeros((2, 8))),
                         nm.Tensor(np.zeros((2, 5))))


def test_gradient_check_small_model(setup):
    _, vocab, encs = setup
    model = QGModel(tiny_config(hidden=3, word_dim=3, pos_dim=2, ner_dim=2, ans_dim=2), vocab)

    def loss():
        total = None
        for enc in encs:
            l, _ = model.forward_teacher_forced(enc, train=False)
            total = l if total is None else nm.add(total, l)
        return total

    assert nm.gradient_check(loss, model.parameters()) < 1e-4


def test_dropout_changes_train_loss_only(setup):
    _, vocab, (enc, _) = setup
    model = QGModel(tiny_config(dropout_p=0.3), vocab)
    a = float(model.forward_teacher_forced(enc, train=False)[0].data)
    b = float(model.forward_teacher_forced(enc, train=False)[0].data)
    c = float(model.forward_teacher_forced(enc, train=True)[0].data)
    assert a == b and c != a


def test_sequence_log_prob_matches_loss(setup):
    model, _, (enc, _) = setup
    loss, _ = model.forward_teacher_forced(enc)
    assert model.sequence_log_prob(enc, enc.target) == pytest.approx(-float(loss.data), abs=0)


def test_trace_json_is_serializable(setup):
    model, _, (enc, _) = setup
    _, traces = model.forward_teacher_forced(enc, with_traces=True)
    rec = json.loads(json.dumps(traces[0].to_json()))
    assert abs(rec["p_final_sum"] - 1.0) < 1e-9


def test_config_unknown_key_lists_valid():
    with pytest.raises(ValueError, match="hidden"):
        ModelConfig.from_dict({"hiden": 3})
    assert ModelConfig.desk().hidden == 64 and ModelConfig().hidden == 600


def test_state_arrays_shape_mismatch(setup):
    model, vocab, _ = setup
    other = QGModel(tiny_config(hidden=4), vocab)
    with pytest.raises(ValueError, match="shape"):
        model.load_state_arrays(other.state_arrays())
