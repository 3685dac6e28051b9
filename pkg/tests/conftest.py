from pathlib import Path

import pytest

from relqg.data import load_corpus
from relqg.model import ModelConfig
from relqg.records import AnswerSpan, NaryRelation, QGExample, Token

FIXTURES = Path(__file__).parent / "fixtures"


def toks(text: str) -> tuple[Token, ...]:
    return tuple(Token(w) for w in text.split())


def example(ex_id, sentence, start, end, question, relations=()):
    rels = tuple(NaryRelation(tuple(args), conf, k) for k, (args, conf) in enumerate(relations))
    return QGExample(ex_id, toks(sentence), AnswerSpan(start, end), toks(question), rels)


def tiny_config(**kw) -> ModelConfig:
    base = dict(word_dim=6, pos_dim=3, ner_dim=3, ans_dim=3, hidden=5, layers=1,
                dropout_p=0.0, vocab_cap=40, seed=3)
    base.update(kw)
    return ModelConfig(**base)


@pytest.fixture(scope="session")
def corpus100():
    return load_corpus(FIXTURES / "corpus100.jsonl")


@pytest.fixture(scope="session")
def toy16():
    return load_corpus(FIXTURES / "toy16.jsonl")


@pytest.fixture(scope="session")
def highlighted_examples():
    return load_corpus(FIXTURES / "highlighted_relations.jsonl")


GRAD_WORDS = ("when did curie discover ? marie discovered in 1898 where does the nile "
              "flow flows north").split()


def grad_examples():
    """One example whose target copies an OOV source word ('polonium') and one
    with no relations, so its relation context is the sentence itself."""
    from relqg.data import RESERVED, Vocabulary

    copy_ex = example("g1", "marie curie discovered polonium in 1898", 5, 5,
                      "when did curie discover polonium ?",
                      [(["marie curie", "discovered", "polonium", "in 1898"], 0.9)])
    fallback_ex = example("g2", "the nile flows north", 3, 3, "where does the nile flow ?")
    vocab = Vocabulary(RESERVED + tuple(GRAD_WORDS))
    return [copy_ex, fallback_ex], vocab


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
