"""Record types shared by the data and relation modules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

from .stopwords import is_stopword

NEUTRAL_TAG = "X"

AnswerTag = Literal["B", "I", "O"]


@dataclass(frozen=True)
class Token:
    surface: str
    pos: str = NEUTRAL_TAG
    ner: str = NEUTRAL_TAG
    lower: str = field(init=False)
    is_stop: bool = field(init=False)

    def __post_init__(self):
        low = self.surface.lower()
        object.__setattr__(self, "lower", low)
        object.__setattr__(self, "is_stop", is_stopword(low))


@dataclass(frozen=True)
class AnswerSpan:
    start: int
    end: int

    def within(self, length: int) -> bool:
        return 0 <= self.start <= self.end < length

    def __len__(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class NaryRelation:
    """An n-ary extraction: subject, predicate, then secondary arguments."""

    args: tuple[str, ...]
    confidence: float
    source_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if len(self.args) < 2:
            raise ValueError(f"a relation needs at least 2 arguments, got {len(self.args)}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"relation confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class RelationContext:
    """The relation-side encoder input.

    ``source_index`` is the index of the selected relation, or ``None`` when
    the sentence itself stands in because no relation was extracted.
    """

    tokens: tuple[Token, ...]
    answer_tags: tuple[str, ...]
    source_index: int | None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "answer_tags", tuple(self.answer_tags))
        if not self.tokens:
            raise ValueError("relation context must be nonempty")
        if len(self.tokens) != len(self.answer_tags):
            raise ValueError("relation context tokens and answer tags differ in length")

    @property
    def is_fallback(self) -> bool:
        return self.source_index is None

    @property
    def provenance(self) -> str:
        return "sentence" if self.is_fallback else "relation"


@dataclass(frozen=True)
class QGExample:
    id: str
    sentence: tuple[Token, ...]
    answer: AnswerSpan
    question: tuple[Token, ...]
    relations: tuple[NaryRelation, ...] = ()
    context: RelationContext | None = None

    def __post_init__(self):
        for name in ("sentence", "question", "relations"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.sentence:
            raise ValueError(f"example {self.id}: empty sentence")
        if not self.question:
            raise ValueError(f"example {self.id}: empty question")
        if not self.answer.within(len(self.sentence)):
            raise ValueError(
                f"example {self.id}: answer span out of bounds "
                f"({self.answer.start}, {self.answer.end}) for {len(self.sentence)} tokens")

    @property
    def answer_tokens(self) -> tuple[Token, ...]:
        return self.sentence[self.answer.start:self.answer.end + 1]
