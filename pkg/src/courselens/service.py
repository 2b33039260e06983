"""Course service: ties embedder, labeler, FAQ grouping, gateway, and the
event store into the question pipeline and the staff workflows.

All mutations go through the event store; this layer holds no durable
state of its own beyond in-memory keyword proposals awaiting review.
Per-course writes are serialized through one lock per course.
"""

from __future__ import annotations

import threading
import uuid
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterator

from courselens.embedding import EmbeddingBackendError, EmbedderConfig, make_embedder
from courselens.gateway import ChatMessage, LlmGateway, LlmUnavailableError
from courselens.keywords import KeywordExtractor, review_keywords
from courselens.labeling import TopicLabeler
from courselens.models import (
    AnswerSource,
    Exercise,
    FaqGroup,
    Identity,
    KeywordOrigin,
)
from courselens.store import EventStore
from courselens.vectors import cosine


class NotFoundError(KeyError):
    pass


class ConflictError(ValueError):
    pass


def _new_id(prefix: str) -> str:
    return f"{prefix}-{uuid.uuid4().hex[:12]}"


@dataclass
class ServiceSettings:
    tau_topic: float = 0.35
    tau_faq: float = 0.75
    promote_at: int = 3
    serve_cached_first: bool = True
    auto_publish: bool = False

    def validate(self):
        if not 0 < self.tau_faq < 1:
            raise ValueError(f"tau_faq {self.tau_faq} outside (0, 1)")
        if not 0 <= self.tau_topic <= 1:
            raise ValueError(f"tau_topic {self.tau_topic} outside [0, 1]")
        if self.promote_at < 1:
            raise ValueError("promote_at must be >= 1")


@dataclass
class QuestionOutcome:
    question_id: str
    group_id: str
    group_created: bool
    topic: str | None
    served_from: str  # "llm" | "faq_cache"
    stream: Iterator[str]


class CourseService:
    def __init__(
        self,
        store: EventStore,
        embedder,
        gateway: LlmGateway | None = None,
        settings: ServiceSettings | None = None,
    ):
        self.store = store
        self.embedder = embedder
        self.gateway = gateway
        self.settings = settings or ServiceSettings()
        self.settings.validate()
        self.extractor = KeywordExtractor(embedder=embedder)
        self._proposed: dict[str, list] = {}  # exercise_id -> KeywordEntry list
        self._course_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)

    # --- course / exercise setup ----------------------------------------

    def create_course(self, title: str) -> str:
        course_id = _new_id("course")
        self.store.append(
            "course_created",
            {"course_id": course_id, "title": title},
            Identity.anonymous(),
        )
        return course_id

    def add_exercise(self, course_id: str, text: str) -> str:
        self._require_course(course_id)
        exercise_id = _new_id("ex")
        self.store.append(
            "exercise_created",
            {"exercise_id": exercise_id, "course_id": course_id, "text": text},
            Identity.anonymous(),
        )
        return exercise_id

    def extract_keywords(self, exercise_id: str) -> list[dict]:
        ex = self._require_exercise(exercise_id)
        entries = self.extractor.extract(ex.text)
        self._proposed[exercise_id] = entries
        return [{"text": e.text, "score": e.score} for e in entries]

    def review_exercise_keywords(
        self, exercise_id: str, decisions: list[tuple[str, str]]
    ) -> dict:
        stored = self._require_exercise(exercise_id)
        with self._course_locks[stored.course_id]:
            # start from current stored keywords plus any fresh proposals
            working = Exercise(
                id=stored.id,
                course_id=stored.course_id,
                text=stored.text,
                keywords=list(stored.keywords),
                review_state=stored.review_state,
            )
            known = {k.text for k in working.keywords}
            for entry in self._proposed.get(exercise_id, []):
                if entry.text not in known:
                    working.keywords.append(entry)
                    known.add(entry.text)
            review_keywords(working, decisions, self.embedder)
            self.store.append(
                "keywords_reviewed",
                {
                    "exercise_id": exercise_id,
                    "keywords": [
                        {
                            "text": k.text,
                            "origin": k.origin.value,
                            "score": k.score,
                            "embedding": k.embedding.tolist()
                            if k.embedding is not None
                            else None,
                        }
                        for k in working.keywords
                    ],
                },
                Identity.anonymous(),
            )
            self._proposed.pop(exercise_id, None)
        return {
            "exercise_id": exercise_id,
            "active_keywords": sorted(k.text for k in working.active_keywords()),
        }

    # --- question pipeline ----------------------------------------------

    def submit_question(
        self,
        course_id: str,
        text: str,
        identity: Identity,
        exercise_id: str | None = None,
        session_messages: list[ChatMessage] | None = None,
    ) -> QuestionOutcome:
        """Persist, embed, label, group, then answer a student question.

        The answer comes from the FAQ cache when the question lands in a
        published, answered group (and serve_cached_first is on), else it
        streams from the LLM runner and is cached for new groups. The
        question is persisted and labeled even when the runner is down;
        the returned stream then raises LlmUnavailableError.
        """
        if not text.strip():
            raise ValueError("question text is empty")
        self._require_course(course_id)
        question_id = _new_id("q")
        with self._course_locks[course_id]:
            embedding = None
            embed_failed = False
            try:
                embedding = self.embedder.embed(text)
            except EmbeddingBackendError:
                embed_failed = True
            self.store.append(
                "question_asked",
                {
                    "question_id": question_id,
                    "course_id": course_id,
                    "exercise_id": exercise_id,
                    "text": text,
                    "embedding": embedding.tolist() if embedding is not None else None,
                },
                identity,
            )
            topic, similarity = (None, None)
            if not embed_failed:
                topic, similarity = self._label(course_id, embedding)
            self.store.append(
                "labeled",
                {
                    "question_id": question_id,
                    "topic": topic,
                    "similarity": similarity,
                    "needs_relabel": embed_failed,
                },
                identity,
            )
            group_id, group_sim, created = self._assign_group(
                course_id, question_id, embedding
            )

            group = self.store.state.groups[group_id]
            use_cache = (
                self.settings.serve_cached_first
                and not created
                and group.answered
                and group.published
            )
        if use_cache:
            stream = iter([group.answer])
            served_from = "faq_cache"
        else:
            stream = self._llm_stream(question_id, group_id, text, session_messages, identity)
            served_from = "llm"
        return QuestionOutcome(
            question_id=question_id,
            group_id=group_id,
            group_created=created,
            topic=topic,
            served_from=served_from,
            stream=stream,
        )

    def _label(self, course_id: str, embedding) -> tuple[str | None, float | None]:
        course = self.store.state.courses[course_id]
        vocab = [
            (text, entry.embedding)
            for text, entry in sorted(course.topic_vocabulary.items())
            if entry.embedding is not None
        ]
        if not vocab:
            return None, None
        labeler = TopicLabeler(min_similarity=self.settings.tau_topic).fit(vocab)
        return labeler.predict_one(embedding)

    def _assign_group(self, course_id, question_id, embedding):
        """Leader clustering step against the course's stored groups."""
        best_id, best_sim = None, None
        if embedding is not None:
            for gid in sorted(self.store.state.groups):
                g = self.store.state.groups[gid]
                if g.course_id != course_id or g.representative is None:
                    continue
                sim = cosine(embedding, g.representative)
                if best_sim is None or sim > best_sim:
                    best_id, best_sim = gid, sim
        if best_sim is not None and best_sim >= self.settings.tau_faq:
            self.store.append(
                "group_assigned",
                {
                    "question_id": question_id,
                    "group_id": best_id,
                    "similarity": best_sim,
                    "created": False,
                },
                Identity.anonymous(),
            )
            return best_id, best_sim, False
        group_id = _new_id("faq")
        self.store.append(
            "group_assigned",
            {
                "question_id": question_id,
                "group_id": group_id,
                "similarity": None,
                "created": True,
            },
            Identity.anonymous(),
        )
        if self.settings.auto_publish:
            self.store.append(
                "faq_published",
                {"group_id": group_id, "published": True},
                Identity.anonymous(),
            )
        return group_id, None, True

    def _llm_stream(self, question_id, group_id, text, session_messages, identity):
        # lazy: the question is already persisted and labeled, so a dead
        # runner surfaces from the stream, not from submit_question
        def run():
            if self.gateway is None:
                raise LlmUnavailableError("no LLM gateway configured")
            messages = list(session_messages or [])
            messages.append(ChatMessage(role="user", content=text))
            inner = self.gateway.chat(messages)
            chunks = []
            for fragment in inner:
                chunks.append(fragment)
                yield fragment
            transcript = self.gateway.last_transcript
            self.store.append(
                "transcript_recorded",
                {
                    "question_record_id": question_id,
                    "model_name": transcript.model_name,
                    "response": transcript.response,
                    "truncated": transcript.truncated,
                    "latency": transcript.latency,
                },
                Identity.anonymous(),
            )
            answer = "".join(chunks)
            group = self.store.state.groups.get(group_id)
            if answer and group is not None and not group.answered:
                self.store.append(
                    "answer_cached",
                    {"group_id": group_id, "answer": answer},
                    Identity.anonymous(),
                )

        return run()

    def relabel_course(self, course_id: str) -> int:
        """Re-run topic labeling over all stored questions; returns the
        number of changed labels."""
        self._require_course(course_id)
        changed = 0
        with self._course_locks[course_id]:
            for q in list(self.store.state.questions.values()):
                if q.course_id != course_id or q.embedding is None:
                    continue
                topic, similarity = self._label(course_id, q.embedding)
                if topic != q.topic:
                    changed += 1
                    self.store.append(
                        "labeled",
                        {
                            "question_id": q.id,
                            "topic": topic,
                            "similarity": similarity,
                        },
                        Identity.anonymous(),
                    )
        return changed

    # --- FAQ curation ----------------------------------------------------

    def cache_answer(self, group_id: str, answer: str) -> None:
        g = self._require_group(group_id)
        with self._course_locks[g.course_id]:
            if g.answer_source == AnswerSource.STAFF_EDITED:
                raise ConflictError("group answer was staff-edited; not overwriting")
            self.store.append(
                "answer_cached",
                {"group_id": group_id, "answer": answer},
                Identity.anonymous(),
            )

    def edit_answer(self, group_id: str, staff_text: str) -> None:
        g = self._require_group(group_id)
        with self._course_locks[g.course_id]:
            self.store.append(
                "answer_edited",
                {"group_id": group_id, "answer": staff_text},
                Identity.anonymous(),
            )

    def set_published(self, group_id: str, published: bool) -> None:
        g = self._require_group(group_id)
        with self._course_locks[g.course_id]:
            self.store.append(
                "faq_published",
                {"group_id": group_id, "published": published},
                Identity.anonymous(),
            )

    def create_manual_faq(self, course_id: str, question: str, answer: str) -> str:
        self._require_course(course_id)
        if not question.strip() or not answer.strip():
            raise ValueError("manual FAQ needs non-empty question and answer")
        group_id = _new_id("faq")
        embedding = self.embedder.embed(question)
        with self._course_locks[course_id]:
            self.store.append(
                "faq_created_manual",
                {
                    "group_id": group_id,
                    "course_id": course_id,
                    "question": question,
                    "answer": answer,
                    "embedding": embedding.tolist(),
                },
                Identity.anonymous(),
            )
            self.store.append(
                "faq_published",
                {"group_id": group_id, "published": True},
                Identity.anonymous(),
            )
        return group_id

    def record_view(self, group_id: str, identity: Identity, role: str = "student") -> int:
        g = self._require_group(group_id)
        if role == "student" and not g.published:
            raise ConflictError("FAQ item is not published")
        with self._course_locks[g.course_id]:
            self.store.append("faq_viewed", {"group_id": group_id}, identity)
            return self.store.state.groups[group_id].view_count

    def list_faq(self, course_id: str, role: str = "student") -> list[dict]:
        """Staff see groups of size >= promote_at plus manual items;
        students see published items only. Ordered by member count desc,
        view count desc, then id."""
        self._require_course(course_id)
        items = []
        for g in self.store.state.groups.values():
            if g.course_id != course_id:
                continue
            if role == "staff":
                visible = (
                    len(g.member_ids) >= self.settings.promote_at
                    or g.answer_source == AnswerSource.STAFF_CREATED
                    or g.published
                )
            else:
                visible = g.published
            if visible:
                items.append(g)
        items.sort(key=lambda g: (-len(g.member_ids), -g.view_count, g.id))
        return [self._group_view(g, role) for g in items]

    def _group_view(self, g: FaqGroup, role: str) -> dict:
        view = {
            "id": g.id,
            "question": g.canonical_question,
            "answer": g.answer if g.answered else None,
            "answer_source": g.answer_source.value,
            "published": g.published,
            "member_count": len(g.member_ids),
            "view_count": g.view_count,
        }
        return view

    # --- ratings ----------------------------------------------------------

    def rate_exercise(self, exercise_id: str, value: int, identity: Identity) -> None:
        if not isinstance(value, int) or not 1 <= value <= 5:
            raise ValueError(f"difficulty rating {value} outside 1..5")
        ex = self._require_exercise(exercise_id)
        with self._course_locks[ex.course_id]:
            self.store.append(
                "rating_submitted",
                {"exercise_id": exercise_id, "value": value},
                identity,
            )

    # --- lookups ----------------------------------------------------------

    def _require_course(self, course_id: str):
        course = self.store.state.courses.get(course_id)
        if course is None:
            raise NotFoundError(f"unknown course {course_id!r}")
        return course

    def _require_exercise(self, exercise_id: str) -> Exercise:
        ex = self.store.state.exercises.get(exercise_id)
        if ex is None:
            raise NotFoundError(f"unknown exercise {exercise_id!r}")
        return ex

    def _require_group(self, group_id: str) -> FaqGroup:
        g = self.store.state.groups.get(group_id)
        if g is None:
            raise NotFoundError(f"unknown FAQ group {group_id!r}")
        return g
