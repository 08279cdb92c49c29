"""Necessary and sufficient shared-aspect explanations for a prediction.

An aspect is necessary when dropping it from the aggregated pair vector
flips the predicted class, and sufficient when its embedding alone yields the
same class as the full aggregate.  Neither the embeddings nor the classifier
are modified along the way.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .aspects import AspectSet, pair_aspects
from .classify import Prediction, predict_many
from .embed import EmbeddingTable
from .kg import AnnotationMap, OntologyGraph
from .pairrep import aggregate


@dataclass
class AspectRecord:
    class_id: int
    label: str
    solo: Prediction
    ablated: Prediction
    necessary: bool
    sufficient: bool

    def to_dict(self) -> dict:
        return {"class_id": self.class_id, "label": self.label, "solo": self.solo.to_dict(),
                "ablated": self.ablated.to_dict(), "necessary": self.necessary,
                "sufficient": self.sufficient}


@dataclass
class Explanation:
    pair: tuple[str, str]
    aspects: AspectSet
    global_prediction: Prediction
    records: list[AspectRecord] = field(default_factory=list)
    all_sufficient: Prediction | None = None
    without_necessary: Prediction | None = None

    @property
    def empty_aspects(self) -> bool:
        return self.aspects.empty

    @property
    def necessary(self) -> list[str]:
        return [r.label for r in self.records if r.necessary]

    @property
    def sufficient(self) -> list[str]:
        return [r.label for r in self.records if r.sufficient]

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "global": self.global_prediction.to_dict(),
            "aspects": [r.to_dict() for r in self.records],
            "all_sufficient": self.all_sufficient.to_dict() if self.all_sufficient else None,
            "without_necessary": self.without_necessary.to_dict() if self.without_necessary else None,
            "empty_aspects": self.empty_aspects,
        }


def _aspect_matrix(K: EmbeddingTable, D: AspectSet) -> np.ndarray:
    return K.vectors(D.aspects)


def _global(E, M, dim, op):
    return predict_many(M, aggregate(E, op, dimension=dim)[None, :])[0]


def ablated_predictions(K: EmbeddingTable, M, D: AspectSet, op: str = "average") -> list[Prediction]:
    """Prediction for the aggregate of ``D`` minus each aspect in turn."""
    E = _aspect_matrix(K, D)
    if len(E) == 0:
        return []
    rows = [aggregate(np.delete(E, i, axis=0), op, dimension=K.dimension) for i in range(len(E))]
    return predict_many(M, np.vstack(rows))


def solo_predictions(K: EmbeddingTable, M, D: AspectSet) -> list[Prediction]:
    E = _aspect_matrix(K, D)
    return predict_many(M, E) if len(E) else []


def necessary_aspects(pair, K: EmbeddingTable, M, D: AspectSet, op: str = "average") -> list[str]:
    E = _aspect_matrix(K, D)
    if len(E) == 0:
        return []
    p = _global(E, M, K.dimension, op).predicted_class
    return [d for d, q in zip(D.aspects, ablated_predictions(K, M, D, op)) if q.predicted_class != p]


def sufficient_aspects(pair, K: EmbeddingTable, M, D: AspectSet, op: str = "average") -> list[str]:
    E = _aspect_matrix(K, D)
    if len(E) == 0:
        return []
    p = _global(E, M, K.dimension, op).predicted_class
    return [d for d, q in zip(D.aspects, solo_predictions(K, M, D)) if q.predicted_class == p]


def explain_aspects(D: AspectSet, K: EmbeddingTable, M, g: OntologyGraph,
                    op: str = "average") -> Explanation:
    """Full report for an already computed aspect set."""
    E = _aspect_matrix(K, D)
    dim = K.dimension
    glob = _global(E, M, dim, op)
    if len(E) == 0:
        return Explanation(D.pair, D, glob)
    solo = solo_predictions(K, M, D)
    ablated = ablated_predictions(K, M, D, op)
    records = []
    for i, d in enumerate(D.aspects):
        records.append(AspectRecord(g.id_of(d), d, solo[i], ablated[i],
                                    necessary=ablated[i].predicted_class != glob.predicted_class,
                                    sufficient=solo[i].predicted_class == glob.predicted_class))
    suff = [i for i, r in enumerate(records) if r.sufficient]
    nec = [i for i, r in enumerate(records) if r.necessary]
    all_sufficient = without_necessary = None
    if suff:
        all_sufficient = _global(E[suff], M, dim, op)
    if nec:
        keep = [i for i in range(len(E)) if i not in set(nec)]
        without_necessary = _global(E[keep], M, dim, op)
    return Explanation(D.pair, D, glob, records, all_sufficient, without_necessary)


def explanation_report(pair, K: EmbeddingTable, M, annotations: AnnotationMap,
                       g: OntologyGraph, op: str = "average") -> Explanation:
    e1, e2 = pair
    return explain_aspects(pair_aspects(g, annotations, e1, e2), K, M, g, op)


def write_explanations(path, explanations) -> None:
    """One JSON object per pair, in a top-level array."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump([e.to_dict() if isinstance(e, Explanation) else e for e in explanations],
                  fh, indent=1)
        fh.write("\n")


def read_explanations(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
