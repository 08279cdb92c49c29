import time
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from kgaspects.embed import (BILINEAR, HYPERPLANE, TRANSLATIONAL, EmbeddingTable, TrainConfig,
                             _train_skipgram, _walk_ids, generate_walks, margin_ranking_loss,
                             negative_corrupt, score_triple, skipgram_loss, skipgram_pairs,
                             train_embeddings, triple_scores)
from kgaspects.errors import ConfigError, SamplingError, UnsupportedOperationError
from kgaspects.kg import TripleStore
from oracles import numeric_grad, rel_error

SCORED = (TRANSLATIONAL, HYPERPLANE, BILINEAR)


def table_2d(method, h, r, t, w=None):
    normals = None if w is None else np.array([w], dtype=float)
    return EmbeddingTable(method, ["h", "t"], np.array([h, t], dtype=float), ["r"],
                          np.array([r], dtype=float), normals)


def toy_kg():
    """30 nodes, three relations, 89 triples."""
    triples = []
    for i in range(30):
        triples.append((f"n{i}", "next", f"n{(i + 1) % 30}"))
        triples.append((f"n{i}", "skip", f"n{(i + 7) % 30}"))
        if i:
            triples.append((f"n{i}", "subClassOf", f"n{(i - 1) // 2}"))
    return TripleStore.from_triples(triples)


TOY_CONFIG = dict(dimension=16, epochs=200, learning_rate=0.05, batch_size=32, seed=0)


def test_score_examples():
    assert score_triple(table_2d(TRANSLATIONAL, [1, 0], [0, 1], [1, 1]), "h", "r", "t") == 0.0
    assert score_triple(table_2d(BILINEAR, [1, 2], [3, 0], [2, 1]), "h", "r", "t") == 6.0
    t = table_2d(HYPERPLANE, [2, 3], [0, 0], [5, 3], w=[1, 0])
    assert score_triple(t, "h", "r", "t") == pytest.approx(0.0, abs=1e-12)


def test_walk_tables_have_no_triple_score():
    t = EmbeddingTable("walk", ["h", "t"], np.zeros((2, 2)))
    with pytest.raises(UnsupportedOperationError):
        score_triple(t, "h", "r", "t")


def test_negative_corrupt_outcomes():
    seen = {negative_corrupt(("a", "p", "b"), ["c"], seed=s) for s in range(40)}
    assert seen == {("c", "p", "b"), ("a", "p", "c")}
    for s in range(20):
        out = negative_corrupt(("a", "p", "b"), ["a", "b"], seed=s)
        assert out != ("a", "p", "b")
    with pytest.raises(SamplingError):
        negative_corrupt(("a", "p", "a"), ["a"], seed=0)


def test_walk_examples():
    store = TripleStore.from_triples([("a", "p", "b")])
    walks = generate_walks(store, depth=2, walks_per_node=1, seed=0)
    assert ["a", "p", "b"] in walks
    assert ["b"] in walks


def test_walks_alternate_and_respect_depth():
    store = toy_kg()
    rels = store.relations
    for walk in generate_walks(store, depth=3, walks_per_node=5, seed=1):
        assert len(walk) % 2 == 1 and len(walk) <= 7
        assert all((tok in rels) == (i % 2 == 1) for i, tok in enumerate(walk))


def test_star_walks_are_uniform():
    store = TripleStore.from_triples([("a", "p", "x"), ("a", "p", "y"), ("a", "p", "z")])
    walks = [w for w in generate_walks(store, depth=1, walks_per_node=100, seed=5) if w[0] == "a"]
    assert len(walks) == 100
    counts = Counter(w[2] for w in walks)
    assert chisquare([counts[k] for k in "xyz"]).pvalue > 0.01


def test_isolated_start_yields_single_token():
    store = TripleStore.from_triples([("a", "p", "b")])
    assert _walk_ids(store, 4, 1, 0)[1] == [1]


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(dimension=0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(margin=-1).validate()


def _margin_instance(rng, method):
    b, d = int(rng.integers(1, 4)), int(rng.integers(2, 9))
    arrs = [rng.normal(size=(b, d)) for _ in range(5)]
    W = rng.normal(size=(b, d)) if method == HYPERPLANE else None
    margin = float(rng.uniform(0.5, 4.0))
    return arrs, W, margin


@pytest.mark.parametrize("method", SCORED)
def test_margin_loss_gradients(method):
    rng = np.random.default_rng(42)
    checked = 0
    while checked < 100:
        (H, R, T, Hn, Tn), W, margin = _margin_instance(rng, method)
        s_pos = triple_scores(method, H, R, T, W)
        s_neg = triple_scores(method, Hn, R, Tn, W)
        if np.min(np.abs(margin + s_neg - s_pos)) < 1e-3:
            continue  # too close to the hinge kink for finite differences
        params = [H, R, T, Hn, Tn] + ([W] if W is not None else [])
        _, grads = margin_ranking_loss(method, H, R, T, Hn, Tn, margin, W)
        for i, p in enumerate(params):
            def f(x, i=i):
                args = list(params)
                args[i] = x
                w = args[5] if W is not None else None
                return margin_ranking_loss(method, *args[:5], margin, w)[0]
            assert rel_error(grads[i], numeric_grad(f, p)) <= 1e-4
        checked += 1


def test_skipgram_loss_gradients():
    rng = np.random.default_rng(7)
    for _ in range(100):
        b, k, d = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(2, 9))
        U, V, Vn = rng.normal(size=(b, d)), rng.normal(size=(b, d)), rng.normal(size=(b, k, d))
        _, (dU, dV, dVn) = skipgram_loss(U, V, Vn)
        assert rel_error(dU, numeric_grad(lambda x: skipgram_loss(x, V, Vn)[0], U)) <= 1e-4
        assert rel_error(dV, numeric_grad(lambda x: skipgram_loss(U, x, Vn)[0], V)) <= 1e-4
        assert rel_error(dVn, numeric_grad(lambda x: skipgram_loss(U, V, x)[0], Vn)) <= 1e-4


@pytest.mark.parametrize("method", SCORED)
def test_true_triples_outscore_corruptions(method):
    store = toy_kg()
    start = time.perf_counter()
    table = train_embeddings(store, method, TrainConfig(**TOY_CONFIG))
    assert time.perf_counter() - start < 30
    triples = list(store.named_triples())
    nodes = sorted(store.nodes)
    rng = np.random.default_rng(0)
    negs = [negative_corrupt(triples[int(rng.integers(len(triples)))], nodes, rng)
            for _ in range(1000)]
    pos = np.mean([score_triple(table, *t) for t in triples])
    neg = np.mean([score_triple(table, *t) for t in negs])
    assert pos > neg
    assert table.loss_history[-1] < table.loss_history[0]


def test_translational_rows_are_unit_norm():
    table = train_embeddings(toy_kg(), TRANSLATIONAL, TrainConfig(**{**TOY_CONFIG, "epochs": 3}))
    assert np.allclose(np.linalg.norm(table.node_vectors, axis=1), 1.0, atol=1e-9)


def test_hyperplane_normals_stay_unit():
    table = train_embeddings(toy_kg(), HYPERPLANE, TrainConfig(**{**TOY_CONFIG, "epochs": 5}))
    norms = np.linalg.norm(table.normals, axis=1)
    assert np.all(np.abs(norms - 1.0) <= 1e-6)


@pytest.mark.parametrize("method", SCORED + ("walk",))
def test_same_seed_same_table_and_dimension(method):
    cfg = TrainConfig(dimension=16, epochs=2, walks_per_node=3, seed=9)
    a = train_embeddings(toy_kg(), method, cfg)
    b = train_embeddings(toy_kg(), method, cfg)
    assert a.checksum() == b.checksum()
    assert a.node_vectors.shape == (30, 16)
    if a.relation_vectors is not None:
        assert a.relation_vectors.shape[1] == 16
    c = train_embeddings(toy_kg(), method, TrainConfig(dimension=16, epochs=2, walks_per_node=3,
                                                       seed=10))
    assert c.checksum() != a.checksum()


def test_skipgram_cooccurring_pairs_score_higher():
    store = toy_kg()
    cfg = TrainConfig(dimension=16, epochs=5, learning_rate=0.05, batch_size=128, walks_per_node=20,
                      window=3, seed=0)
    rng = np.random.default_rng(cfg.seed)
    walks = _walk_ids(store, cfg.walk_depth, cfg.walks_per_node, rng)
    vocab = len(store.node_names) + len(store.relation_names)
    W_in, W_out, history = _train_skipgram(walks, vocab, cfg, rng)
    assert history[-1] < history[0]
    centers, contexts = skipgram_pairs(walks, cfg.window)
    pick = rng.choice(len(centers), size=2000, replace=False)
    together = np.mean(np.sum(W_in[centers[pick]] * W_out[contexts[pick]], axis=1))
    a, b = rng.integers(vocab, size=2000), rng.integers(vocab, size=2000)
    apart = np.mean(np.sum(W_in[a] * W_out[b], axis=1))
    assert together > apart


@pytest.mark.parametrize("method", (HYPERPLANE, "walk"))
def test_save_load_is_lossless(tmp_path, method):
    table = train_embeddings(toy_kg(), method, TrainConfig(dimension=8, epochs=2, walks_per_node=2))
    table.save(tmp_path / "emb.tsv")
    back = EmbeddingTable.load(tmp_path / "emb.tsv")
    assert back.method == table.method and back.node_names == table.node_names
    assert np.array_equal(back.node_vectors, table.node_vectors)
    assert back.checksum() == table.checksum()
    assert back.seed == table.seed
