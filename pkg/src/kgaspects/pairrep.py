"""Pair representations built from node embeddings.

SEEK vectors aggregate the embeddings of a pair's shared aspects; baseline
vectors combine the two entity embeddings directly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .aspects import AspectSet, pair_aspects
from .embed import EmbeddingTable
from .errors import ConfigError, DimensionMismatchError
from .kg import AnnotationMap, OntologyGraph

AGGREGATIONS = ("average", "hadamard", "sum")
BASELINE_OPERATORS = ("hadamard", "average", "sum", "l1")


@dataclass
class PairVector:
    pair: tuple[str, str]
    vector: np.ndarray
    provenance: str  # "seek" or "baseline"
    aspects: AspectSet | None = None

    @property
    def empty_aspects(self) -> bool:
        return self.aspects is not None and self.aspects.empty


def aggregate(vectors, op: str = "average", dimension: int | None = None) -> np.ndarray:
    """Element-wise average, product or sum of equally sized vectors.

    The aggregate of an empty collection is the zero vector of ``dimension``.
    """
    if op not in AGGREGATIONS:
        raise ConfigError(f"unknown aggregation {op!r}; choose from {AGGREGATIONS}")
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        stack = vectors
    else:
        vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
        if not vectors:
            if dimension is None:
                raise DimensionMismatchError("dimension is required to aggregate an empty set")
            return np.zeros(dimension)
        lengths = {v.shape for v in vectors}
        if len(lengths) != 1 or vectors[0].ndim != 1:
            raise DimensionMismatchError(f"vectors have mixed shapes {sorted(lengths)}")
        stack = np.stack(vectors)
    if len(stack) == 0:
        return np.zeros(stack.shape[1] if dimension is None else dimension)
    if dimension is not None and stack.shape[1] != dimension:
        raise DimensionMismatchError(f"expected dimension {dimension}, got {stack.shape[1]}")
    if op == "average":
        return stack.mean(axis=0)
    if op == "sum":
        return stack.sum(axis=0)
    return np.prod(stack, axis=0)


def combine_entities(v1, v2, op: str = "hadamard") -> np.ndarray:
    v1, v2 = np.asarray(v1, dtype=np.float64), np.asarray(v2, dtype=np.float64)
    if v1.shape != v2.shape:
        raise DimensionMismatchError(f"entity vectors differ in shape: {v1.shape} vs {v2.shape}")
    if op == "l1":
        return np.abs(v1 - v2)
    if op not in BASELINE_OPERATORS:
        raise ConfigError(f"unknown baseline operator {op!r}; choose from {BASELINE_OPERATORS}")
    return aggregate([v1, v2], op)


def represent_aspects(aspects: AspectSet, table: EmbeddingTable, op: str = "average") -> PairVector:
    vec = aggregate(table.vectors(aspects.aspects), op, dimension=table.dimension)
    return PairVector(aspects.pair, vec, "seek", aspects)


def represent_pair_seek(pair, annotations: AnnotationMap, g: OntologyGraph,
                        table: EmbeddingTable, op: str = "average") -> PairVector:
    e1, e2 = pair
    return represent_aspects(pair_aspects(g, annotations, e1, e2), table, op)


def represent_pair_baseline(pair, table: EmbeddingTable, op: str = "hadamard") -> PairVector:
    e1, e2 = pair
    return PairVector((e1, e2), combine_entities(table.vector(e1), table.vector(e2), op), "baseline")


def feature_matrix(vectors: Sequence[PairVector]) -> np.ndarray:
    return np.vstack([pv.vector for pv in vectors])


def write_features_csv(path, pair_ids: Sequence[str], X: np.ndarray, labels: Sequence[int]) -> None:
    """Feature export: ``pair_id, f0 .. f{d-1}, label`` with lossless floats."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pair_id", *[f"f{i}" for i in range(X.shape[1])], "label"])
        for pid, row, y in zip(pair_ids, X, labels):
            w.writerow([pid, *[repr(float(x)) for x in row], int(y)])


def read_features_csv(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d = len(header) - 2
    ids = [r[0] for r in body]
    X = np.array([[float(x) for x in r[1:-1]] for r in body], dtype=np.float64).reshape(len(body), d)
    y = np.array([int(r[-1]) for r in body], dtype=np.int64)
    return ids, X, y
