"""Topic labeling: nearest course keyword in embedding space."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from courselens.vectors import nearest


class TopicLabeler(BaseEstimator):
    """Nearest-keyword classifier over a course's topic vocabulary.

    fit() takes the active vocabulary as (keyword text, embedding) pairs;
    predict_one() returns (topic, similarity) with topic None when the best
    similarity falls below min_similarity or the vocabulary is empty.
    Ties between equally near keywords go to the lexicographically smaller
    text, so labeling is reproducible across runs.
    """

    def __init__(self, min_similarity: float = 0.35):
        self.min_similarity = min_similarity

    def fit(self, vocabulary: list[tuple[str, np.ndarray]]):
        self.vocabulary_ = list(vocabulary)
        return self

    def predict_one(self, embedding: np.ndarray) -> tuple[str | None, float | None]:
        if not getattr(self, "vocabulary_", None):
            return None, None
        topic, sim = nearest(embedding, self.vocabulary_)
        if sim < self.min_similarity:
            return None, sim
        return topic, sim

    def predict(self, embeddings: list[np.ndarray]) -> list[tuple[str | None, float | None]]:
        return [self.predict_one(e) for e in embeddings]


def label_question(question_text: str, course, embedder, min_similarity: float = 0.35):
    """Embed a question and label it against the course's active vocabulary."""
    vocab = [
        (text, entry.embedding)
        for text, entry in sorted(course.topic_vocabulary.items())
        if entry.embedding is not None
    ]
    if not vocab:
        return None, None
    emb = embedder.embed(question_text)
    return TopicLabeler(min_similarity=min_similarity).fit(vocab).predict_one(emb)
