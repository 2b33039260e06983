"""Durable persistence: append-only event log plus derived state.

Every mutation in the system is an event appended to a single JSONL file.
Derived state (courses, questions, FAQ groups, analytics) is a pure fold
over that log, so crash recovery is replay and the fold itself is the
auditing oracle. The anonymization policy is enforced at append time: an
anonymous event that carries a student identifier anywhere in its payload
is rejected outright and nothing is persisted.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from courselens.models import (
    AnswerSource,
    Course,
    Exercise,
    FaqGroup,
    Identity,
    IdentityMode,
    KeywordEntry,
    KeywordOrigin,
    QuestionRecord,
    ReviewState,
    utcnow,
)
from courselens.vectors import centroid

EVENT_KINDS = {
    "course_created",
    "exercise_created",
    "keywords_reviewed",
    "question_asked",
    "labeled",
    "group_assigned",
    "answer_cached",
    "answer_edited",
    "faq_created_manual",
    "faq_published",
    "faq_viewed",
    "rating_submitted",
    "transcript_recorded",
}


class AnonymityViolation(ValueError):
    """An anonymous event carried a student identifier."""


def _find_student_ref(obj) -> bool:
    """True if a student_ref key with a non-null value exists at any depth."""
    if isinstance(obj, dict):
        for k, v in obj.items():
            if k == "student_ref" and v is not None:
                return True
            if _find_student_ref(v):
                return True
    elif isinstance(obj, list):
        return any(_find_student_ref(x) for x in obj)
    return False


def validate_anonymity(identity: Identity, payload: dict) -> None:
    if identity.mode != IdentityMode.ANONYMOUS:
        return
    if identity.student_ref is not None or _find_student_ref(payload):
        raise AnonymityViolation(
            "anonymous event must not carry a student_ref anywhere"
        )


@dataclass
class DerivedState:
    """Pure fold over the event log. No I/O, no clocks, no randomness."""

    courses: dict[str, Course] = field(default_factory=dict)
    exercises: dict[str, Exercise] = field(default_factory=dict)
    questions: dict[str, QuestionRecord] = field(default_factory=dict)
    groups: dict[str, FaqGroup] = field(default_factory=dict)
    # (exercise_id, student_ref) -> value for named ratings (overwrite);
    # anonymous ratings are a plain list of (exercise_id, value)
    named_ratings: dict[tuple[str, str], int] = field(default_factory=dict)
    anonymous_ratings: list[tuple[str, int]] = field(default_factory=list)
    transcripts: list[dict] = field(default_factory=list)
    last_seq: int = 0

    def apply(self, event: dict) -> None:
        seq = event["seq"]
        if seq <= self.last_seq:
            raise ValueError(f"event seq {seq} not increasing (last {self.last_seq})")
        self.last_seq = seq
        kind = event["kind"]
        p = event["payload"]
        identity = Identity.from_dict(event["identity"])

        if kind == "course_created":
            self.courses[p["course_id"]] = Course(id=p["course_id"], title=p["title"])
        elif kind == "exercise_created":
            self.exercises[p["exercise_id"]] = Exercise(
                id=p["exercise_id"], course_id=p["course_id"], text=p["text"]
            )
        elif kind == "keywords_reviewed":
            ex = self.exercises[p["exercise_id"]]
            ex.keywords = [
                KeywordEntry(
                    text=k["text"],
                    embedding=np.asarray(k["embedding"]) if k.get("embedding") else None,
                    origin=KeywordOrigin(k["origin"]),
                    score=k.get("score", 0.0),
                )
                for k in p["keywords"]
            ]
            ex.review_state = ReviewState.REVIEWED
            self._rebuild_vocabulary(ex.course_id)
        elif kind == "question_asked":
            self.questions[p["question_id"]] = QuestionRecord(
                id=p["question_id"],
                course_id=p["course_id"],
                exercise_id=p.get("exercise_id"),
                text=p["text"],
                embedding=np.asarray(p["embedding"]) if p.get("embedding") else None,
                identity=identity,
            )
        elif kind == "labeled":
            q = self.questions[p["question_id"]]
            q.topic = p.get("topic")
            q.topic_similarity = p.get("similarity")
            q.needs_relabel = bool(p.get("needs_relabel", False))
        elif kind == "group_assigned":
            self._apply_group_assigned(p)
        elif kind == "answer_cached":
            g = self.groups[p["group_id"]]
            if g.answer_source == AnswerSource.STAFF_EDITED:
                raise ValueError("cached answer may not overwrite a staff edit")
            g.answer = p["answer"]
            g.answered = True
            g.answer_source = AnswerSource.LLM_CACHED
        elif kind == "answer_edited":
            g = self.groups[p["group_id"]]
            g.answer = p["answer"]
            g.answered = True
            g.answer_source = AnswerSource.STAFF_EDITED
        elif kind == "faq_created_manual":
            g = FaqGroup(
                id=p["group_id"],
                course_id=p["course_id"],
                canonical_question=p["question"],
                representative=np.asarray(p["embedding"]) if p.get("embedding") else None,
                seed_embedding=np.asarray(p["embedding"]) if p.get("embedding") else None,
                answer=p["answer"],
                answer_source=AnswerSource.STAFF_CREATED,
                answered=True,
            )
            self.groups[g.id] = g
        elif kind == "faq_published":
            self.groups[p["group_id"]].published = bool(p["published"])
        elif kind == "faq_viewed":
            g = self.groups[p["group_id"]]
            g.view_count += 1
            g.view_events.append((event["at"], identity))
        elif kind == "rating_submitted":
            if identity.mode == IdentityMode.NAMED:
                self.named_ratings[(p["exercise_id"], identity.student_ref)] = p["value"]
            else:
                self.anonymous_ratings.append((p["exercise_id"], p["value"]))
        elif kind == "transcript_recorded":
            self.transcripts.append(p)
        else:
            raise ValueError(f"unknown event kind {kind!r}")

    def _rebuild_vocabulary(self, course_id: str) -> None:
        vocab: dict[str, KeywordEntry] = {}
        for ex in self.exercises.values():
            if ex.course_id != course_id or ex.review_state != ReviewState.REVIEWED:
                continue
            for entry in ex.active_keywords():
                vocab.setdefault(entry.text, entry)
        self.courses[course_id].topic_vocabulary = vocab

    def _apply_group_assigned(self, p: dict) -> None:
        gid = p["group_id"]
        q = self.questions[p["question_id"]]
        if p.get("created", False) and gid not in self.groups:
            self.groups[gid] = FaqGroup(
                id=gid, course_id=q.course_id, canonical_question=q.text
            )
        g = self.groups[gid]
        g.member_ids.append(q.id)
        if p.get("similarity") is not None:
            g.member_similarities[q.id] = p["similarity"]
        q.faq_group_id = gid
        member_vecs = [
            self.questions[m].embedding
            for m in g.member_ids
            if self.questions[m].embedding is not None
        ]
        if g.seed_embedding is not None:
            # manual items keep their own embedding in the centroid
            member_vecs = [g.seed_embedding] + member_vecs
        if member_vecs:
            g.representative = centroid(member_vecs)

    # --- analytics -------------------------------------------------------

    def topic_counts(self, course_id: str) -> dict[str, int]:
        counts: dict[str, int] = {}
        for q in self.questions.values():
            if q.course_id == course_id and q.topic is not None:
                counts[q.topic] = counts.get(q.topic, 0) + 1
        return counts

    def faq_view_counts(self, course_id: str) -> dict[str, int]:
        return {
            g.id: g.view_count
            for g in self.groups.values()
            if g.course_id == course_id
        }

    def difficulty_histograms(self, course_id: str) -> dict[str, list[int]]:
        hists: dict[str, list[int]] = {}

        def bump(exercise_id: str, value: int):
            ex = self.exercises.get(exercise_id)
            if ex is None or ex.course_id != course_id:
                return
            hists.setdefault(exercise_id, [0] * 5)[value - 1] += 1

        for (exercise_id, _), value in self.named_ratings.items():
            bump(exercise_id, value)
        for exercise_id, value in self.anonymous_ratings:
            bump(exercise_id, value)
        return hists


@dataclass
class AnalyticsSnapshot:
    course_id: str
    topic_counts: dict[str, int]
    faq_view_counts: dict[str, int]
    difficulty_histograms: dict[str, list[int]]
    as_of_seq: int

    def to_dict(self) -> dict:
        return {
            "course_id": self.course_id,
            "topic_counts": self.topic_counts,
            "faq_view_counts": self.faq_view_counts,
            "difficulty_histograms": self.difficulty_histograms,
            "as_of_seq": self.as_of_seq,
        }


class EventStore:
    """JSONL event log with an in-memory derived view, replayed on open."""

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self.state = DerivedState()
        self._lock = threading.RLock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists():
            self._replay()
        self._fh = open(self.path, "a", encoding="utf-8")

    def _replay(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    self.state.apply(json.loads(line))

    def append(self, kind: str, payload: dict, identity: Identity, at: str | None = None) -> int:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        validate_anonymity(identity, payload)
        with self._lock:
            event = {
                "seq": self.state.last_seq + 1,
                "kind": kind,
                "at": at or utcnow().isoformat(),
                "identity": identity.to_dict(),
                "payload": payload,
            }
            # validate against the fold before touching the file
            line = json.dumps(event, ensure_ascii=False)
            self.state.apply(event)
            self._fh.write(line + "\n")
            self._fh.flush()
            os.fsync(self._fh.fileno())
            return event["seq"]

    def events(self) -> list[dict]:
        with open(self.path, encoding="utf-8") as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def close(self) -> None:
        self._fh.close()

    # --- queries ---------------------------------------------------------

    def snapshot_analytics(self, course_id: str) -> AnalyticsSnapshot:
        with self._lock:
            return AnalyticsSnapshot(
                course_id=course_id,
                topic_counts=self.state.topic_counts(course_id),
                faq_view_counts=self.state.faq_view_counts(course_id),
                difficulty_histograms=self.state.difficulty_histograms(course_id),
                as_of_seq=self.state.last_seq,
            )

    def export(self, course_id: str) -> dict:
        """Structured dump for inspection; anonymous records carry no
        identity fields at any nesting depth."""
        with self._lock:
            s = self.state
            course = s.courses.get(course_id)
            return {
                "course": {
                    "id": course_id,
                    "title": course.title if course else None,
                    "topic_vocabulary": sorted(course.topic_vocabulary)
                    if course
                    else [],
                },
                "exercises": [
                    {
                        "id": ex.id,
                        "text": ex.text,
                        "review_state": ex.review_state.value,
                        "keywords": [
                            {"text": k.text, "origin": k.origin.value, "score": k.score}
                            for k in ex.keywords
                        ],
                    }
                    for ex in s.exercises.values()
                    if ex.course_id == course_id
                ],
                "questions": [
                    {
                        "id": q.id,
                        "text": q.text,
                        "exercise_id": q.exercise_id,
                        "topic": q.topic,
                        "faq_group_id": q.faq_group_id,
                        "identity": q.identity.to_dict(),
                        "created_at": q.created_at.isoformat()
                        if hasattr(q.created_at, "isoformat")
                        else q.created_at,
                    }
                    for q in s.questions.values()
                    if q.course_id == course_id
                ],
                "faq_groups": [
                    {
                        "id": g.id,
                        "canonical_question": g.canonical_question,
                        "answer": g.answer,
                        "answer_source": g.answer_source.value,
                        "published": g.published,
                        "member_ids": list(g.member_ids),
                        "view_count": g.view_count,
                        "view_events": [
                            {"at": at, "identity": ident.to_dict()}
                            for at, ident in g.view_events
                        ],
                    }
                    for g in s.groups.values()
                    if g.course_id == course_id
                ],
                "ratings": [
                    {
                        "exercise_id": exercise_id,
                        "value": value,
                        "identity": {"mode": "named", "student_ref": ref},
                    }
                    for (exercise_id, ref), value in s.named_ratings.items()
                    if self._rating_in_course(s, exercise_id, course_id)
                ]
                + [
                    {
                        "exercise_id": exercise_id,
                        "value": value,
                        "identity": {"mode": "anonymous"},
                    }
                    for exercise_id, value in s.anonymous_ratings
                    if self._rating_in_course(s, exercise_id, course_id)
                ],
            }

    @staticmethod
    def _rating_in_course(state: DerivedState, exercise_id: str, course_id: str) -> bool:
        ex = state.exercises.get(exercise_id)
        return ex is not None and ex.course_id == course_id


def replay_fold(events: list[dict]) -> DerivedState:
    """Independent replay of an event list; the fold-equivalence oracle."""
    state = DerivedState()
    for ev in events:
        state.apply(ev)
    return state
