"""Incremental leader/centroid clustering of question embeddings.

Each new item joins the nearest existing cluster whose representative
cosine meets the threshold, or founds a new cluster. Representatives are
unit-normalized centroids recomputed over all members after every insert.
Insertion-order dependence is inherent and accepted; replaying the same
stream sequentially always reproduces the same partition.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from courselens.vectors import centroid, cosine


class IncrementalQuestionClusterer(BaseEstimator):
    """Online single-pass clusterer with a cosine admission threshold.

    Attributes after fitting:
    cluster_centers_ : list of unit-normalized centroids
    labels_ : cluster index assigned to each item, in arrival order
    members_ : per-cluster lists of item indices
    """

    def __init__(self, threshold: float = 0.75):
        self.threshold = threshold

    def _init_state(self):
        self.cluster_centers_: list[np.ndarray] = []
        self.members_: list[list[int]] = []
        self._member_vectors: list[list[np.ndarray]] = []
        self.labels_: list[int] = []
        self._n_seen = 0

    def partial_fit(self, embedding: np.ndarray) -> tuple[int, float | None, bool]:
        """Assign one embedding; returns (cluster index, similarity, created).

        similarity is None for a newly founded cluster. Ties between
        equally similar clusters go to the smallest index.
        """
        if not hasattr(self, "labels_"):
            self._init_state()
        item = self._n_seen
        self._n_seen += 1
        best_idx, best_sim = None, None
        for idx, rep in enumerate(self.cluster_centers_):
            sim = cosine(embedding, rep)
            if best_sim is None or sim > best_sim:
                best_idx, best_sim = idx, sim
        if best_sim is not None and best_sim >= self.threshold:
            self._member_vectors[best_idx].append(embedding)
            self.members_[best_idx].append(item)
            self.cluster_centers_[best_idx] = centroid(self._member_vectors[best_idx])
            self.labels_.append(best_idx)
            return best_idx, best_sim, False
        self.cluster_centers_.append(centroid([embedding]))
        self._member_vectors.append([embedding])
        self.members_.append([item])
        self.labels_.append(len(self.cluster_centers_) - 1)
        return len(self.cluster_centers_) - 1, None, True

    def fit(self, embeddings: list[np.ndarray]):
        self._init_state()
        for e in embeddings:
            self.partial_fit(e)
        return self

    def fit_predict(self, embeddings: list[np.ndarray]) -> list[int]:
        return self.fit(embeddings).labels_
