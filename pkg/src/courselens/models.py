"""Core domain types shared by every engine.

Plain value objects: safe to copy between threads, no interior mutability
beyond explicit list/dict fields mutated under the owning course's lock.
Embeddings are numpy float arrays; persistence layers serialize them to
plain lists.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

_PUNCT_RE = re.compile(r"[^0-9a-z]+")


def normalize_keyword_text(raw: str) -> str:
    """Lowercase, strip punctuation to spaces, collapse whitespace.

    Raises ValueError if nothing survives normalization.
    """
    if not raw:
        raise ValueError("keyword text is empty")
    text = _PUNCT_RE.sub(" ", raw.lower()).strip()
    text = " ".join(text.split())
    if not text:
        raise ValueError(f"keyword text {raw!r} is empty after normalization")
    return text


def utcnow() -> datetime:
    # second resolution is all analytics need
    return datetime.now(timezone.utc).replace(microsecond=0)


class KeywordOrigin(str, enum.Enum):
    EXTRACTED = "extracted"
    ACCEPTED = "accepted"
    STAFF_ADDED = "staff_added"
    STAFF_REMOVED = "staff_removed"


class ReviewState(str, enum.Enum):
    PROPOSED = "proposed"
    REVIEWED = "reviewed"


class IdentityMode(str, enum.Enum):
    NAMED = "named"
    ANONYMOUS = "anonymous"


class AnswerSource(str, enum.Enum):
    LLM_CACHED = "llm_cached"
    STAFF_EDITED = "staff_edited"
    STAFF_CREATED = "staff_created"


@dataclass
class KeywordEntry:
    text: str
    embedding: np.ndarray | None = None
    origin: KeywordOrigin = KeywordOrigin.EXTRACTED
    score: float = 0.0

    def __post_init__(self):
        if self.text != normalize_keyword_text(self.text):
            raise ValueError(f"keyword {self.text!r} is not in normalized form")


@dataclass
class Exercise:
    id: str
    course_id: str
    text: str
    keywords: list[KeywordEntry] = field(default_factory=list)
    review_state: ReviewState = ReviewState.PROPOSED

    def active_keywords(self) -> list[KeywordEntry]:
        """Keywords that count toward the course vocabulary.

        staff_removed entries stay on the exercise for audit but are never
        active; raw extracted entries only become active once accepted.
        """
        return [
            k
            for k in self.keywords
            if k.origin in (KeywordOrigin.ACCEPTED, KeywordOrigin.STAFF_ADDED)
        ]


@dataclass
class Course:
    id: str
    title: str
    # union of reviewed exercises' active keywords, keyed by normalized text
    topic_vocabulary: dict[str, KeywordEntry] = field(default_factory=dict)


@dataclass(frozen=True)
class Identity:
    mode: IdentityMode
    student_ref: str | None = None

    def __post_init__(self):
        if self.mode == IdentityMode.ANONYMOUS and self.student_ref is not None:
            raise ValueError("anonymous identity must not carry a student_ref")

    @staticmethod
    def anonymous() -> "Identity":
        return Identity(mode=IdentityMode.ANONYMOUS)

    @staticmethod
    def named(student_ref: str) -> "Identity":
        return Identity(mode=IdentityMode.NAMED, student_ref=student_ref)

    def to_dict(self) -> dict:
        # anonymous identities serialize without the field entirely
        if self.mode == IdentityMode.ANONYMOUS:
            return {"mode": self.mode.value}
        return {"mode": self.mode.value, "student_ref": self.student_ref}

    @staticmethod
    def from_dict(d: dict) -> "Identity":
        return Identity(mode=IdentityMode(d["mode"]), student_ref=d.get("student_ref"))


@dataclass
class QuestionRecord:
    id: str
    course_id: str
    text: str  # stored byte-exact as entered
    identity: Identity
    embedding: np.ndarray | None = None
    exercise_id: str | None = None
    topic: str | None = None  # None = uncategorized
    topic_similarity: float | None = None
    faq_group_id: str | None = None
    needs_relabel: bool = False
    created_at: datetime = field(default_factory=utcnow)


@dataclass
class FaqGroup:
    id: str
    course_id: str
    canonical_question: str
    representative: np.ndarray | None = None  # unit-normalized centroid
    seed_embedding: np.ndarray | None = None  # manual items only
    member_ids: list[str] = field(default_factory=list)
    member_similarities: dict[str, float] = field(default_factory=dict)
    answer: str = ""
    answer_source: AnswerSource = AnswerSource.LLM_CACHED
    answered: bool = False
    published: bool = False
    view_count: int = 0
    view_events: list[tuple[datetime, Identity]] = field(default_factory=list)


@dataclass
class DifficultyRating:
    exercise_id: str
    identity: Identity
    value: int
    created_at: datetime = field(default_factory=utcnow)

    def __post_init__(self):
        if not 1 <= self.value <= 5:
            raise ValueError(f"difficulty rating {self.value} outside 1..5")
