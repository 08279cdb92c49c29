import numpy as np
import pytest

from conftest import TOY_EDGES, graph_from_edges
from kgaspects.embed import EmbeddingTable
from kgaspects.errors import DimensionMismatchError, MissingEmbeddingError
from kgaspects.kg import load_annotations
from kgaspects.pairrep import (aggregate, combine_entities, read_features_csv,
                               represent_pair_baseline, represent_pair_seek, write_features_csv)


def make_table(vectors: dict):
    names = list(vectors)
    return EmbeddingTable("walk", names, np.array([vectors[n] for n in names], dtype=float))


def test_aggregate_examples():
    assert np.array_equal(aggregate([[1, 2], [3, 4]], "average"), [2, 3])
    assert np.array_equal(aggregate([[1, 2], [3, 4]], "hadamard"), [3, 8])
    assert np.array_equal(aggregate([[1, 2], [3, 4]], "sum"), [4, 6])
    assert np.array_equal(aggregate([], "average", dimension=4), np.zeros(4))
    assert np.array_equal(aggregate(np.empty((0, 3)), "average"), np.zeros(3))


def test_mixed_lengths_rejected():
    with pytest.raises(DimensionMismatchError):
        aggregate([[1, 2], [1, 2, 3]])


def test_seek_examples():
    g = graph_from_edges(TOY_EDGES)
    ann = load_annotations("e1\tA1\ne1\tB1\ne2\tA2\ne2\tB1\n", g)
    table = make_table({"A": [1, 0], "B1": [0, 1], "R": [9, 9], "A1": [5, 5]})
    pv = represent_pair_seek(("e1", "e2"), ann, g, table)
    assert np.array_equal(pv.vector, [0.5, 0.5])
    assert pv.provenance == "seek" and set(pv.aspects.aspects) == {"A", "B1"}
    back = represent_pair_seek(("e2", "e1"), ann, g, table)
    assert np.array_equal(back.vector, pv.vector)


def test_seek_singleton_and_empty():
    g = graph_from_edges([("X", "R"), ("Y", "R2")])
    ann = load_annotations("a\tX\nb\tX\nc\tY\n", g)
    table = make_table({"X": [2, 3], "R": [0, 0], "Y": [1, 1], "R2": [1, 1]})
    assert np.array_equal(represent_pair_seek(("a", "b"), ann, g, table).vector, [2, 3])
    empty = represent_pair_seek(("a", "c"), ann, g, table)
    assert empty.empty_aspects and np.array_equal(empty.vector, [0, 0])


def test_seek_missing_embedding():
    g = graph_from_edges([("X", "R")])
    ann = load_annotations("a\tX\nb\tX\n", g)
    with pytest.raises(MissingEmbeddingError):
        represent_pair_seek(("a", "b"), ann, g, make_table({"R": [0, 0]}))


def test_baseline_examples():
    table = make_table({"e1": [1, 2], "e2": [3, 4], "one": [1, 1], "zero": [0, 0]})
    assert np.array_equal(represent_pair_baseline(("e1", "e2"), table).vector, [3, 8])
    assert np.array_equal(represent_pair_baseline(("e1", "one"), table).vector, [1, 2])
    assert np.array_equal(represent_pair_baseline(("zero", "e2"), table).vector, [0, 0])
    assert np.array_equal(combine_entities([1, 5], [4, 2], "l1"), [3, 3])
    with pytest.raises(MissingEmbeddingError):
        represent_pair_baseline(("e1", "nobody"), table)


def test_removal_matches_closed_form():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n, d = int(rng.integers(2, 13)), int(rng.integers(1, 9))
        E = rng.normal(size=(n, d))
        v = aggregate(E, "average")
        for i in range(n):
            direct = aggregate(np.delete(E, i, axis=0), "average")
            closed = (n * v - E[i]) / (n - 1)
            assert np.max(np.abs(direct - closed)) <= 1e-9


def test_features_csv_round_trip(tmp_path):
    X = np.random.default_rng(1).normal(size=(4, 3))
    write_features_csv(tmp_path / "f.csv", ["p0", "p1", "p2", "p3"], X, [1, 0, 1, 0])
    ids, X2, y = read_features_csv(tmp_path / "f.csv")
    assert ids == ["p0", "p1", "p2", "p3"]
    assert np.array_equal(X, X2) and y.tolist() == [1, 0, 1, 0]
