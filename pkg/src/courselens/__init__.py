"""Course chat mediation and question analytics.

Proxies student chat to a local LLM runner untouched, mines the questions
into topic labels and a dynamic FAQ, and stores everything under an opt-in
anonymization policy.
"""

from courselens.models import (
    Course,
    DifficultyRating,
    Exercise,
    FaqGroup,
    Identity,
    IdentityMode,
    KeywordEntry,
    KeywordOrigin,
    QuestionRecord,
    normalize_keyword_text,
)
from courselens.embedding import EmbedderConfig, MockEmbedder, HttpEmbedder, make_embedder
from courselens.keywords import KeywordExtractor, candidate_ngrams, mmr_rerank
from courselens.labeling import TopicLabeler
from courselens.clustering import IncrementalQuestionClusterer

__all__ = [
    "Course",
    "DifficultyRating",
    "EmbedderConfig",
    "Exercise",
    "FaqGroup",
    "HttpEmbedder",
    "Identity",
    "IdentityMode",
    "IncrementalQuestionClusterer",
    "KeywordEntry",
    "KeywordExtractor",
    "KeywordOrigin",
    "MockEmbedder",
    "QuestionRecord",
    "TopicLabeler",
    "candidate_ngrams",
    "make_embedder",
    "mmr_rerank",
    "normalize_keyword_text",
]

__version__ = "0.1.0"
