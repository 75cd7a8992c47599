"""
Synthetic document categorization on a word graph.

Words carry 2-D embedding coordinates and become graph nodes. Each class owns
a few topic centres; a document picks one of its class's topics and draws
words near that centre (plus background words), and its signal is the
normalized bag-of-words over the vocabulary.
"""

import numpy as np

from dsgc.data.schemas import DatasetFile, DatasetKind, GraphDocument
from dsgc.graph.spatial import knn_build
from dsgc.training.tasks import random_splits
from dsgc.utils.error_handlers import ParameterError
from dsgc.utils.logging import get_logger

logger = get_logger(__name__)

DOC_FRACTIONS = (0.8, 0.1, 0.1)
TOPICS_PER_CLASS = 2
TOPIC_SPREAD = 0.15
BACKGROUND = 0.3


def gen_synthetic_documents(
    vocab: int = 200,
    docs: int = 1000,
    classes: int = 4,
    seed: int = 0,
    words_per_doc: int = 50,
    k: int = 9,
    topic_spread: float = TOPIC_SPREAD,
) -> DatasetFile:
    if classes < 2:
        raise ParameterError("need at least two classes", name="classes", value=classes)
    if vocab < 2 or words_per_doc < 1:
        raise ParameterError("vocabulary and document length must be positive", name="vocab", value=vocab)
    rng = np.random.default_rng(seed)
    words = rng.random((vocab, 2))
    centres = rng.random((classes, TOPICS_PER_CLASS, 2))

    labels = rng.permutation(np.arange(docs) % classes)
    background = np.full(vocab, 1.0 / vocab)
    inputs = np.zeros((docs, vocab))
    for d, label in enumerate(labels):
        centre = centres[label, rng.integers(TOPICS_PER_CLASS)]
        sq = np.sum((words - centre) ** 2, axis=1)
        topical = np.exp(-sq / (2.0 * topic_spread ** 2))
        probs = (1.0 - BACKGROUND) * topical / topical.sum() + BACKGROUND * background
        counts = rng.multinomial(words_per_doc, probs / probs.sum())
        inputs[d] = counts / counts.sum()

    graph = knn_build(words, min(k, vocab))
    splits = random_splits(docs, DOC_FRACTIONS, rng)
    logger.info("documents_generated", vocab=vocab, docs=docs, classes=classes, seed=seed)
    return DatasetFile(
        kind=DatasetKind.DOCS,
        task="topics",
        seed=seed,
        graph=GraphDocument.model_validate(graph.to_document()),
        splits={name: idx.tolist() for name, idx in splits.items()},
        inputs=inputs[:, :, None].tolist(),
        labels=labels.tolist(),
        classes=classes,
        metadata={"words_per_doc": words_per_doc, "topic_spread": topic_spread},
    )
