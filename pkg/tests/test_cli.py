import json
import subprocess
import sys

import pytest

from relqg.cli import main, split_raw
from relqg.data import Vocabulary, load_corpus
from relqg.decode import greedy_decode
from relqg.evaluation import load_predictions
from relqg.model import encode_example
from relqg.relation import corpus_relation_stats
from relqg.training import best_checkpoint_path, load_model

from conftest import FIXTURES

TINY_MODEL = {"word_dim": 8, "pos_dim": 2, "ner_dim": 2, "ans_dim": 2, "hidden": 8,
              "layers": 1, "dropout_p": 0.1, "vocab_cap": 300}


def write_config(path, prepared, ckpt, epochs=2):
    path.write_text(json.dumps({
        "train_corpus": str(prepared / "prepared.jsonl"),
        "dev_corpus": str(prepared / "prepared.jsonl"),
        "vocab": str(prepared / "vocab.json"),
        "model": TINY_MODEL,
        "training": {"epochs": epochs, "halve_after_epoch": 1, "batch_size": 8,
                     "checkpoint_dir": str(ckpt)},
    }))
    return path


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    prepared = root / "prep"
    assert main(["prepare", str(FIXTURES / "toy16.jsonl"), "--out", str(prepared)]) == 0
    cfg = write_config(root / "run.json", prepared, root / "ckpt")
    assert main(["train", "--config", str(cfg)]) == 0
    return root, prepared


def test_prepare_outputs(trained):
    _, prepared = trained
    lines = (prepared / "prepared.jsonl").read_text().splitlines()
    assert len(lines) == 16
    rec = json.loads(lines[3])
    assert rec["relation_context"]["provenance"] == "sentence"
    assert json.loads(lines[0])["relation_context"]["source_index"] == 0
    manifest = json.loads((prepared / "manifest.json").read_text())
    assert manifest["command"] == "prepare" and manifest["input_hashes"]


def test_prepare_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["prepare", str(FIXTURES / "corpus100.jsonl"), "--out",
                     str(tmp_path / name), "--desk"]) == 0
    for f in ("prepared.jsonl", "vocab.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_prepare_nothing_survives(tmp_path, capsys):
    src = tmp_path / "stop.jsonl"
    src.write_text(json.dumps({"id": "s", "sentence_tokens": ["it", "was", "there"],
                               "answer_start": 0, "answer_end": 0,
                               "question_tokens": ["what", "was", "it", "?"]}) + "\n")
    assert main(["prepare", str(src), "--out", str(tmp_path / "out")]) == 1
    assert "no example survives" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_stats_delegates(tmp_path):
    out = tmp_path / "stats.json"
    assert main(["stats", str(FIXTURES / "corpus100.jsonl"), "--out", str(out)]) == 0
    expected = corpus_relation_stats(load_corpus(FIXTURES / "corpus100.jsonl")).as_dict()
    assert json.loads(out.read_text()) == expected
    assert (tmp_path / "stats.json.manifest.json").exists()


def test_stats_empty_input(tmp_path):
    empty = tmp_path / "e.jsonl"
    empty.write_text("")
    assert main(["stats", str(empty)]) == 1


def test_train_report_and_manifest(trained):
    root, _ = trained
    report = json.loads((root / "ckpt" / "report.json").read_text())
    assert len(report["epochs"]) == 2
    assert all(r["dev_perplexity"] > 1 for r in report["epochs"])
    assert best_checkpoint_path(root / "ckpt").exists()
    assert json.loads((root / "ckpt" / "manifest.json").read_text())["command"] == "train"


def test_train_config_errors(tmp_path, trained, capsys):
    _, prepared = trained
    cfg = write_config(tmp_path / "c.json", prepared, tmp_path / "ck")
    raw = json.loads(cfg.read_text())
    raw["training"]["epochs"] = 0
    cfg.write_text(json.dumps(raw))
    assert main(["train", "--config", str(cfg)]) == 1
    raw["training"]["epochs"] = 2
    raw["optimizer"] = "adam"
    cfg.write_text(json.dumps(raw))
    assert main(["train", "--config", str(cfg)]) == 1
    assert "valid keys" in capsys.readouterr().err


def test_generate_beam1_equals_greedy_and_trace(trained, tmp_path):
    root, prepared = trained
    out = tmp_path / "pred.jsonl"
    corpus = prepared / "prepared.jsonl"
    assert main(["generate", str(root / "ckpt"), str(corpus), "--beam-size", "1",
                 "--max-len", "12", "--trace", "--out", str(out)]) == 0
    preds = load_predictions(out)
    vocab = Vocabulary.load(prepared / "vocab.json")
    model, _ = load_model(best_checkpoint_path(root / "ckpt"), vocab)
    steps = 0
    for (ex_id, tokens), ex in zip(preds, load_corpus(corpus)):
        enc = encode_example(ex, vocab, with_target=False)
        ids = greedy_decode(model, enc, 12).ids
        assert ex_id == ex.id and tokens == enc.render(ids, vocab)
        steps += len(ids)
    trace = (tmp_path / "pred.jsonl.trace.jsonl").read_text().splitlines()
    assert len(trace) == steps
    assert abs(json.loads(trace[0])["p_final_sum"] - 1) < 1e-6


def test_generate_worker_pool_keeps_order(trained, tmp_path, monkeypatch):
    root, prepared = trained
    corpus = str(prepared / "prepared.jsonl")
    assert main(["generate", str(root / "ckpt"), corpus, "--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("QG_TOTP_THREADS", "2")
    assert main(["generate", str(root / "ckpt"), corpus, "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_generate_raw_text(trained, capsys):
    root, prepared = trained
    assert main(["generate", str(root / "ckpt"), "--vocab", str(prepared / "vocab.json"),
                 "--text", "Marie Curie discovered polonium in 1898.",
                 "--answer", "1898"]) == 0
    line = json.loads(capsys.readouterr().out.strip())
    assert line["id"] == "raw-0" and isinstance(line["tokens"], list)
    assert split_raw("It's 32.6 °F.") == ["It's", "32.6", "°", "F", "."]


def test_generate_vocab_mismatch(trained, tmp_path, capsys):
    root, _ = trained
    other = tmp_path / "prep2"
    main(["prepare", str(FIXTURES / "corpus100.jsonl"), "--out", str(other)])
    assert main(["generate", str(root / "ckpt"), str(other / "prepared.jsonl")]) == 1
    assert "vocabulary hash mismatch" in capsys.readouterr().err


def test_evaluate_identical_is_100(tmp_path):
    corpus = load_corpus(FIXTURES / "toy16.jsonl")
    pred = tmp_path / "p.jsonl"
    pred.write_text("".join(json.dumps({"id": ex.id, "tokens": [t.surface for t in ex.question]})
                            + "\n" for ex in corpus))
    out = tmp_path / "m.json"
    assert main(["evaluate", str(pred), str(FIXTURES / "toy16.jsonl"), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["bleu4"] == 100.0


def test_evaluate_misaligned_ids(tmp_path, capsys):
    pred = tmp_path / "p.jsonl"
    pred.write_text(json.dumps({"id": "toy00", "tokens": ["x"]}) + "\n")
    assert main(["evaluate", str(pred), str(FIXTURES / "toy16.jsonl")]) == 1
    assert "toy01" in capsys.readouterr().err


def test_analyze_length_filter(tmp_path):
    corpus = load_corpus(FIXTURES / "corpus100.jsonl")
    pred = tmp_path / "p.jsonl"
    pred.write_text("".join(json.dumps({"id": ex.id, "tokens": ["what", "?"]}) + "\n"
                            for ex in corpus))
    out = tmp_path / "a.json"
    assert main(["analyze", str(pred), str(FIXTURES / "corpus100.jsonl"),
                 "--length-filter", "20", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["min_sentence_len"] == 20
    assert sum(b["n_examples"] for b in report["buckets"]) == sum(
        len(ex.sentence) > 20 for ex in corpus)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "relqg.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "generate" in proc.stdout
