"""Embedding-space arithmetic: cosine, normalization, centroids, nearest.

Everything here is deterministic and pure. Vocabularies stay small (a few
hundred keywords at most) so nearest() is an exhaustive scan by design.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


def as_vector(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    return v


def cosine(a, b) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding."""
    a = as_vector(a)
    b = as_vector(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined for zero-norm vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def unit_normalize(v) -> np.ndarray:
    v = as_vector(v)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def centroid(vs: Sequence) -> np.ndarray:
    """Unit-normalized arithmetic mean of the given vectors."""
    if len(vs) == 0:
        raise ValueError("centroid of empty list")
    arr = np.stack([as_vector(v) for v in vs])
    mean = arr.mean(axis=0)
    n = np.linalg.norm(mean)
    if n == 0.0:
        raise ValueError("degenerate centroid: vectors cancel to zero")
    return mean / n


def nearest(query, candidates: Iterable[tuple[str, np.ndarray]]) -> tuple[str, float]:
    """Candidate with maximal cosine to query; ties broken by smallest id."""
    best: tuple[str, float] | None = None
    for cid, vec in candidates:
        sim = cosine(query, vec)
        if best is None or sim > best[1] or (sim == best[1] and cid < best[0]):
            best = (cid, sim)
    if best is None:
        raise ValueError("nearest() needs at least one candidate")
    return best
