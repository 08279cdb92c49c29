"""Relation prediction over ontology-backed knowledge graphs using the
embeddings of the semantic aspects an entity pair shares, with necessary and
sufficient aspect explanations for every prediction."""

__version__ = "0.1.0"

from .aspects import AspectSet, common_ancestors, disjoint_common_ancestors, pair_aspects
from .classify import ClassifierConfig, ClassifierModel, Prediction, predict, train_classifier
from .embed import EmbeddingTable, TrainConfig, generate_walks, score_triple, train_embeddings
from .explain import Explanation, explanation_report, necessary_aspects, sufficient_aspects
from .kg import (AnnotationMap, OntologyGraph, TripleStore, ancestors, build_ontology,
                 load_annotations, parse_triples)
from .pairrep import aggregate, represent_pair_baseline, represent_pair_seek

__all__ = [
    "AnnotationMap", "AspectSet", "ClassifierConfig", "ClassifierModel", "EmbeddingTable",
    "Explanation", "OntologyGraph", "Prediction", "TrainConfig", "TripleStore", "aggregate",
    "ancestors", "build_ontology", "common_ancestors", "disjoint_common_ancestors",
    "explanation_report", "generate_walks", "load_annotations", "necessary_aspects",
    "pair_aspects", "parse_triples", "predict", "represent_pair_baseline", "represent_pair_seek",
    "score_triple", "sufficient_aspects", "train_classifier", "train_embeddings",
]
