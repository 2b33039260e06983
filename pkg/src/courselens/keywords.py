"""Keyword extraction and staff review.

Extraction ranks candidate 1-2-grams of an exercise text by cosine
similarity between the candidate's embedding and the whole-document
embedding, optionally reranked with maximal marginal relevance. Staff then
accept, remove, or add keywords; the reviewed union across exercises
becomes the course's topic vocabulary.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_extraction.text import ENGLISH_STOP_WORDS

from courselens.models import (
    Course,
    Exercise,
    KeywordEntry,
    KeywordOrigin,
    ReviewState,
    normalize_keyword_text,
)
from courselens.vectors import cosine


def candidate_ngrams(
    text: str,
    ngram_range: tuple[int, int] = (1, 2),
    stop_words: frozenset[str] | set[str] = ENGLISH_STOP_WORDS,
) -> list[str]:
    """Unique 1..n-grams over the stopword-filtered normalized token stream.

    First-occurrence order is preserved; it is the tie rank for equal
    extraction scores. Raises ValueError when nothing survives filtering.
    """
    lo, hi = ngram_range
    if lo < 1 or lo > hi:
        raise ValueError(f"bad ngram_range {ngram_range}")
    tokens = [t for t in normalize_keyword_text(text).split() if t not in stop_words]
    if not tokens:
        raise ValueError("text is empty after stopword filtering")
    seen: dict[str, None] = {}
    for n in range(lo, hi + 1):
        for i in range(len(tokens) - n + 1):
            seen.setdefault(" ".join(tokens[i : i + n]), None)
    return list(seen)


def mmr_rerank(
    candidates_with_scores: Sequence[tuple[str, float]],
    lam: float,
    k: int,
    embedder,
) -> list[tuple[str, float]]:
    """Greedy maximal-marginal-relevance selection.

    Picks argmax of lam*relevance - (1-lam)*max cosine to the already
    selected set; lam=1 reduces to plain top-k. Ties go to the earlier
    candidate.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"mmr lambda {lam} outside [0, 1]")
    remaining = list(range(len(candidates_with_scores)))
    vectors = [embedder.embed(text) for text, _ in candidates_with_scores]
    selected: list[int] = []
    while remaining and len(selected) < k:
        best_i, best_val = None, None
        for i in remaining:
            redundancy = max(
                (cosine(vectors[i], vectors[j]) for j in selected), default=0.0
            )
            val = lam * candidates_with_scores[i][1] - (1.0 - lam) * redundancy
            if best_val is None or val > best_val:
                best_i, best_val = i, val
        selected.append(best_i)
        remaining.remove(best_i)
    return [candidates_with_scores[i] for i in selected]


class KeywordExtractor(BaseEstimator):
    """Ranks candidate n-grams of a document against the document embedding.

    Parameters
    ----------
    embedder : embedding backend with an ``embed(text)`` method
    ngram_range : candidate phrase lengths, default (1, 2)
    stop_words : token stoplist applied before candidate generation
    top_k : number of keywords returned, default 10
    use_mmr : apply maximal-marginal-relevance reranking instead of plain
        top-k, default False
    mmr_lambda : relevance/diversity trade-off, used only with use_mmr
    """

    def __init__(
        self,
        embedder=None,
        ngram_range: tuple[int, int] = (1, 2),
        stop_words=ENGLISH_STOP_WORDS,
        top_k: int = 10,
        use_mmr: bool = False,
        mmr_lambda: float = 0.5,
    ):
        self.embedder = embedder
        self.ngram_range = ngram_range
        self.stop_words = stop_words
        self.top_k = top_k
        self.use_mmr = use_mmr
        self.mmr_lambda = mmr_lambda

    def _validate(self):
        if self.embedder is None:
            raise ValueError("KeywordExtractor needs an embedder")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")

    def score_candidates(self, text: str) -> list[tuple[str, float]]:
        """All candidates with their document-similarity scores, ranked."""
        self._validate()
        candidates = candidate_ngrams(text, self.ngram_range, self.stop_words)
        doc_vec = self.embedder.embed(text)
        scored = [(c, cosine(self.embedder.embed(c), doc_vec)) for c in candidates]
        # stable sort: equal scores keep first-occurrence order
        return sorted(scored, key=lambda cs: -cs[1])

    def extract(self, text: str) -> list[KeywordEntry]:
        ranked = self.score_candidates(text)
        if self.use_mmr:
            ranked = mmr_rerank(ranked, self.mmr_lambda, self.top_k, self.embedder)
        else:
            ranked = ranked[: self.top_k]
        return [
            KeywordEntry(
                text=text_,
                embedding=self.embedder.embed(text_),
                origin=KeywordOrigin.EXTRACTED,
                score=score,
            )
            for text_, score in ranked
        ]


def review_keywords(
    exercise: Exercise,
    decisions: Sequence[tuple[str, str]],
    embedder,
) -> Exercise:
    """Apply staff accept/remove/add decisions and mark the exercise reviewed.

    Removed keywords are kept with origin=staff_removed for audit; added
    keywords are normalized and embedded immediately.
    """
    by_text = {k.text: k for k in exercise.keywords}
    for raw_text, action in decisions:
        if action == "add":
            text = normalize_keyword_text(raw_text)
            existing = by_text.get(text)
            if existing is not None and existing.origin != KeywordOrigin.STAFF_REMOVED:
                raise ValueError(f"duplicate keyword {text!r}")
            entry = KeywordEntry(
                text=text,
                embedding=embedder.embed(text),
                origin=KeywordOrigin.STAFF_ADDED,
            )
            if existing is not None:
                exercise.keywords[exercise.keywords.index(existing)] = entry
            else:
                exercise.keywords.append(entry)
            by_text[text] = entry
            continue
        entry = by_text.get(normalize_keyword_text(raw_text))
        if entry is None:
            raise ValueError(f"unknown keyword {raw_text!r}")
        if action == "accept":
            if entry.origin == KeywordOrigin.EXTRACTED:
                entry.origin = KeywordOrigin.ACCEPTED
        elif action == "remove":
            entry.origin = KeywordOrigin.STAFF_REMOVED
        else:
            raise ValueError(f"unknown review action {action!r}")
    exercise.review_state = ReviewState.REVIEWED
    return exercise


def rebuild_vocabulary(course: Course, exercises: Sequence[Exercise]) -> Course:
    """Recompute the course topic vocabulary as the union of reviewed
    exercises' active keywords (first definition of a text wins)."""
    vocab: dict[str, KeywordEntry] = {}
    for ex in exercises:
        if ex.course_id != course.id or ex.review_state != ReviewState.REVIEWED:
            continue
        for entry in ex.active_keywords():
            vocab.setdefault(entry.text, entry)
    course.topic_vocabulary = vocab
    return course
