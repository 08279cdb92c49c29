"""Node embeddings for the whole knowledge graph.

Four trainers are provided:

* ``translational``: TransE, score ``-||h + r - t||``
* ``translational-hyperplane``: TransH, entities projected on a per-relation
  hyperplane with unit normal ``w`` before translating
* ``bilinear-diagonal``: DistMult, score ``sum(h * r * t)``
* ``walk``: random walks over the graph fed to skip-gram with negative
  sampling (a stand-in for RDF2Vec / OWL2Vec* without lexical features)

The three triple-scoring methods share one margin ranking loss,
``max(0, margin + score(neg) - score(pos))``, minimised with mini-batch SGD.
Everything is plain numpy and fully determined by ``TrainConfig.seed``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (ConfigError, InputError, MissingEmbeddingError, SamplingError,
                     UnsupportedOperationError)
from .kg import TripleStore

log = logging.getLogger(__name__)

TRANSLATIONAL = "translational"
HYPERPLANE = "translational-hyperplane"
BILINEAR = "bilinear-diagonal"
WALK = "walk"
METHODS = (TRANSLATIONAL, HYPERPLANE, BILINEAR, WALK)
ALIASES = {"transe": TRANSLATIONAL, "transh": HYPERPLANE, "distmult": BILINEAR,
           "rdf2vec": WALK, "owl2vec": WALK}


def resolve_method(name: str) -> str:
    method = ALIASES.get(name.lower(), name.lower())
    if method not in METHODS:
        raise ConfigError(f"unknown embedding method {name!r}; choose from {METHODS}")
    return method


@dataclass
class TrainConfig:
    dimension: int = 100
    epochs: int = 100
    learning_rate: float = 0.01
    margin: float = 1.0
    negatives: int = 5
    batch_size: int = 128
    walk_depth: int = 4
    walks_per_node: int = 100
    window: int = 5
    seed: int = 0

    def validate(self) -> "TrainConfig":
        for name in ("dimension", "epochs", "negatives", "batch_size", "walk_depth",
                     "walks_per_node", "window"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate!r}")
        if not self.margin >= 0:
            raise ConfigError(f"margin must be >= 0, got {self.margin!r}")
        return self


@dataclass
class EmbeddingTable:
    method: str
    node_names: list[str]
    node_vectors: np.ndarray
    relation_names: list[str] = field(default_factory=list)
    relation_vectors: np.ndarray | None = None
    normals: np.ndarray | None = None
    seed: int = 0
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.node_index = {n: i for i, n in enumerate(self.node_names)}
        self.relation_index = {n: i for i, n in enumerate(self.relation_names)}

    @property
    def dimension(self) -> int:
        return int(self.node_vectors.shape[1])

    def __contains__(self, node: str) -> bool:
        return node in self.node_index

    def vector(self, node: str) -> np.ndarray:
        try:
            return self.node_vectors[self.node_index[node]]
        except KeyError:
            raise MissingEmbeddingError(f"no embedding for node {node!r}") from None

    def vectors(self, nodes) -> np.ndarray:
        """Stack the vectors of ``nodes`` into an ``(len(nodes), dimension)`` array."""
        idx = []
        for n in nodes:
            if n not in self.node_index:
                raise MissingEmbeddingError(f"no embedding for node {n!r}")
            idx.append(self.node_index[n])
        return self.node_vectors[np.asarray(idx, dtype=np.int64)].reshape(len(idx), self.dimension)

    def checksum(self) -> str:
        h = hashlib.sha256(np.ascontiguousarray(self.node_vectors).tobytes())
        for arr in (self.relation_vectors, self.normals):
            if arr is not None:
                h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def save(self, path) -> None:
        """Write ``<path>`` (node TSV), ``<path>.relations.tsv`` and ``<path>.json``.

        Floats are written with ``repr`` so a reload is bit-exact.
        """
        path = Path(path)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for name, vec in zip(self.node_names, self.node_vectors):
                fh.write(name + "\t" + " ".join(repr(float(x)) for x in vec) + "\n")
        with open(_relations_path(path), "w", encoding="utf-8", newline="\n") as fh:
            for kind, arr in (("vector", self.relation_vectors), ("normal", self.normals)):
                if arr is None:
                    continue
                for name, vec in zip(self.relation_names, arr):
                    fh.write(f"{name}\t{kind}\t" + " ".join(repr(float(x)) for x in vec) + "\n")
        header = {"method": self.method, "dimension": self.dimension, "seed": self.seed,
                  "nodes": len(self.node_names), "relations": len(self.relation_names),
                  "loss_history": self.loss_history}
        with open(_header_path(path), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(header, fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "EmbeddingTable":
        path = Path(path)
        with open(_header_path(path), encoding="utf-8") as fh:
            header = json.load(fh)
        dim = header["dimension"]
        names, rows = [], []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                name, _, values = line.rstrip("\n").partition("\t")
                names.append(name)
                rows.append([float(x) for x in values.split()])
        vectors = np.asarray(rows, dtype=np.float64).reshape(len(rows), dim)
        rel: dict[str, dict[str, list[float]]] = {"vector": {}, "normal": {}}
        rel_names: list[str] = []
        rel_file = _relations_path(path)
        if rel_file.exists():
            with open(rel_file, encoding="utf-8") as fh:
                for line in fh:
                    name, kind, values = line.rstrip("\n").split("\t")
                    if name not in rel["vector"] and name not in rel["normal"]:
                        rel_names.append(name)
                    rel[kind][name] = [float(x) for x in values.split()]
        rel_vecs = normals = None
        if rel["vector"]:
            rel_vecs = np.asarray([rel["vector"][n] for n in rel_names], dtype=np.float64)
        if rel["normal"]:
            normals = np.asarray([rel["normal"][n] for n in rel_names], dtype=np.float64)
        return cls(header["method"], names, vectors, rel_names, rel_vecs, normals,
                   seed=header.get("seed", 0), loss_history=header.get("loss_history", []))


def _relations_path(path: Path) -> Path:
    return path.with_name(path.name + ".relations.tsv")


def _header_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


# --------------------------------------------------------------------------
# scoring functions and their gradients
# --------------------------------------------------------------------------

def triple_scores(method, H, R, T, W=None, with_grad=False):
    """Vectorised scores for rows of head/relation/tail vectors.

    Returns ``scores`` of shape ``(B,)`` and, when ``with_grad`` is set, the
    gradients of each score with respect to ``H, R, T`` (and ``W`` for the
    hyperplane method, else ``None``).
    """
    H, R, T = np.atleast_2d(H), np.atleast_2d(R), np.atleast_2d(T)
    if method == TRANSLATIONAL:
        u = H + R - T
        norm = np.linalg.norm(u, axis=1)
        scores = -norm
        if not with_grad:
            return scores
        g = u / np.maximum(norm, 1e-12)[:, None]
        return scores, (-g, -g, g, None)
    if method == HYPERPLANE:
        W = np.atleast_2d(W)
        e = H - T
        we = np.sum(W * e, axis=1)
        u = e + R - we[:, None] * W
        norm = np.linalg.norm(u, axis=1)
        scores = -norm
        if not with_grad:
            return scores
        g = u / np.maximum(norm, 1e-12)[:, None]
        wg = np.sum(W * g, axis=1)
        proj = g - wg[:, None] * W
        gW = wg[:, None] * e + we[:, None] * g
        return scores, (-proj, -g, proj, gW)
    if method == BILINEAR:
        scores = np.sum(H * R * T, axis=1)
        if not with_grad:
            return scores
        return scores, (R * T, H * T, H * R, None)
    raise UnsupportedOperationError(f"method {method!r} has no triple score")


def score_triple(table: EmbeddingTable, h: str, r: str, t: str) -> float:
    """Plausibility of ``(h, r, t)`` under ``table``; higher is more plausible."""
    if table.method == WALK:
        raise UnsupportedOperationError("walk embeddings do not score triples")
    if r not in table.relation_index:
        raise MissingEmbeddingError(f"no parameters for relation {r!r}")
    ri = table.relation_index[r]
    W = table.normals[ri] if table.method == HYPERPLANE else None
    return float(triple_scores(table.method, table.vector(h), table.relation_vectors[ri],
                               table.vector(t), W)[0])


def margin_ranking_loss(method, H, R, T, Hn, Tn, margin, W=None):
    """Summed hinge loss over positive/negative rows plus parameter gradients.

    Negative rows share the relation (and normal) of their positive row.
    Returns ``loss, (dH, dR, dT, dHn, dTn, dW)`` with ``dW`` ``None`` unless
    the hyperplane method is used.
    """
    s_pos, (ph, pr, pt, pw) = triple_scores(method, H, R, T, W, with_grad=True)
    s_neg, (nh, nr, nt, nw) = triple_scores(method, Hn, R, Tn, W, with_grad=True)
    raw = margin + s_neg - s_pos
    active = (raw > 0).astype(np.float64)[:, None]
    loss = float(np.sum(np.maximum(raw, 0.0)))
    dW = None
    if method == HYPERPLANE:
        dW = active * (nw - pw)
    return loss, (-active * ph, active * (nr - pr), -active * pt, active * nh, active * nt, dW)


def skipgram_loss(U, V, Vneg):
    """Negative-sampling skip-gram loss for a batch of (center, context) rows.

    ``U`` holds center input vectors ``(B, d)``, ``V`` context output vectors
    ``(B, d)`` and ``Vneg`` negative output vectors ``(B, k, d)``.  The loss is
    ``-log s(u.v) - sum log s(-u.vneg)`` summed over the batch.
    """
    pos = np.sum(U * V, axis=1)
    neg = np.einsum("bd,bkd->bk", U, Vneg)
    loss = float(np.sum(np.logaddexp(0.0, -pos)) + np.sum(np.logaddexp(0.0, neg)))
    gpos = _sigmoid(pos) - 1.0
    gneg = _sigmoid(neg)
    dU = gpos[:, None] * V + np.einsum("bk,bkd->bd", gneg, Vneg)
    dV = gpos[:, None] * U
    dVneg = gneg[:, :, None] * U[:, None, :]
    return loss, (dU, dV, dVneg)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# --------------------------------------------------------------------------
# negative sampling
# --------------------------------------------------------------------------

def negative_corrupt(triple, candidates, seed=None):
    """Replace the head or the tail of ``triple`` with a random candidate.

    The side is chosen by a fair coin; when no candidate differs from the
    node on that side the other side is used instead.  ``seed`` may be an int
    or a ``numpy.random.Generator``.
    """
    candidates = list(candidates)
    if not candidates:
        raise SamplingError("candidate set is empty")
    rng = np.random.default_rng(seed)
    h, r, t = triple
    first = int(rng.integers(2))
    for side in (first, 1 - first):
        original = h if side == 0 else t
        valid = [c for c in candidates if c != original]
        if valid:
            c = valid[int(rng.integers(len(valid)))]
            return (c, r, t) if side == 0 else (h, r, c)
    raise SamplingError(f"every candidate collides with {triple!r}")


def _corrupt_batch(pos: np.ndarray, n_nodes: int, rng: np.random.Generator) -> np.ndarray:
    if n_nodes < 2:
        raise SamplingError("need at least two nodes to corrupt triples")
    neg = pos.copy()
    side = np.where(rng.random(len(pos)) < 0.5, 0, 2)
    rows = np.arange(len(pos))
    todo = rows
    while len(todo):
        repl = rng.integers(n_nodes, size=len(todo))
        neg[todo, side[todo]] = repl
        todo = todo[repl == pos[todo, side[todo]]]
    return neg


# --------------------------------------------------------------------------
# random walks
# --------------------------------------------------------------------------

def _walk_ids(store: TripleStore, depth: int, walks_per_node: int, seed) -> list[list[int]]:
    """Walks as token ids: nodes keep their store id, relation r becomes n_nodes + r."""
    if depth < 1:
        raise ConfigError("walk depth must be >= 1")
    rng = np.random.default_rng(seed)
    n = len(store.node_names)
    out_edges: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for h, r, t in store.triples:
        out_edges[h].append((n + r, t))
    walks = []
    for _ in range(walks_per_node):
        for start in range(n):
            walk = [start]
            node = start
            for _ in range(depth):
                edges = out_edges[node]
                if not edges:
                    break
                rel, node = edges[int(rng.integers(len(edges)))]
                walk.extend((rel, node))
            walks.append(walk)
    return walks


def generate_walks(store: TripleStore, depth: int, walks_per_node: int, seed=None) -> list[list[str]]:
    """Random walks of at most ``depth`` hops from every node.

    Sequences alternate node and relation names and stop early at nodes with
    no outgoing edge.
    """
    vocab = store.node_names + store.relation_names
    return [[vocab[i] for i in walk] for walk in _walk_ids(store, depth, walks_per_node, seed)]


def skipgram_pairs(walks: list[list[int]], window: int) -> tuple[np.ndarray, np.ndarray]:
    """All (center, context) token pairs within ``window`` positions."""
    if not walks:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    width = max(len(w) for w in walks)
    grid = np.full((len(walks), width), -1, dtype=np.int64)
    for i, w in enumerate(walks):
        grid[i, :len(w)] = w
    centers, contexts = [], []
    for off in range(1, min(window, width - 1) + 1):
        a, b = grid[:, :-off].ravel(), grid[:, off:].ravel()
        ok = (a >= 0) & (b >= 0)
        centers += [a[ok], b[ok]]
        contexts += [b[ok], a[ok]]
    if not centers:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(centers), np.concatenate(contexts)


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------

def _sparse_update(param: np.ndarray, idx: np.ndarray, grad: np.ndarray, lr: float) -> None:
    """SGD step on the rows ``idx``; repeated rows get the mean of their gradients.

    Summing instead would scale the step of frequent tokens (the subclass
    relation, near-root classes) with their batch frequency.
    """
    uniq, inv, counts = np.unique(idx, return_inverse=True, return_counts=True)
    acc = np.zeros((len(uniq), param.shape[1]))
    np.add.at(acc, inv.ravel(), grad)
    param[uniq] -= lr * acc / counts[:, None]


def _init_uniform(rng, shape):
    bound = 6.0 / math.sqrt(shape[1])
    return rng.uniform(-bound, bound, size=shape)


def _normalize_rows(a: np.ndarray, rows=None) -> None:
    if rows is None:
        a /= np.maximum(np.linalg.norm(a, axis=1, keepdims=True), 1e-12)
    else:
        a[rows] /= np.maximum(np.linalg.norm(a[rows], axis=1, keepdims=True), 1e-12)


def train_embeddings(store: TripleStore, method: str, config: TrainConfig | None = None) -> EmbeddingTable:
    """Train a node embedding table over every triple in ``store``."""
    config = (config or TrainConfig()).validate()
    method = resolve_method(method)
    if len(store) == 0:
        raise InputError("cannot train embeddings on an empty triple store")
    if method == WALK:
        return _train_walk(store, config)
    return _train_margin(store, method, config)


def _train_margin(store: TripleStore, method: str, cfg: TrainConfig) -> EmbeddingTable:
    rng = np.random.default_rng(cfg.seed)
    n, m, d = len(store.node_names), len(store.relation_names), cfg.dimension
    E = _init_uniform(rng, (n, d))
    R = _init_uniform(rng, (m, d))
    W = None
    if method == TRANSLATIONAL:
        _normalize_rows(R)
    if method == HYPERPLANE:
        W = _init_uniform(rng, (m, d))
        _normalize_rows(W)
    _normalize_rows(E)

    triples = store.as_array()
    lr, k = cfg.learning_rate, cfg.negatives
    history = []
    for epoch in range(cfg.epochs):
        total = 0.0
        order = rng.permutation(len(triples))
        for start in range(0, len(order), cfg.batch_size):
            pos = np.repeat(triples[order[start:start + cfg.batch_size]], k, axis=0)
            neg = _corrupt_batch(pos, n, rng)
            h, r, t, hn, tn = pos[:, 0], pos[:, 1], pos[:, 2], neg[:, 0], neg[:, 2]
            Wb = W[r] if W is not None else None
            loss, (dH, dR, dT, dHn, dTn, dW) = margin_ranking_loss(
                method, E[h], R[r], E[t], E[hn], E[tn], cfg.margin, Wb)
            total += loss
            _sparse_update(E, np.concatenate([h, t, hn, tn]),
                           np.concatenate([dH, dT, dHn, dTn]), lr)
            _sparse_update(R, r, dR, lr)
            if W is not None:
                _sparse_update(W, r, dW, lr)
                _normalize_rows(W, np.unique(r))
        _normalize_rows(E)
        history.append(total / (len(triples) * k))
        log.debug("%s epoch %d loss %.6f", method, epoch, history[-1])
    return EmbeddingTable(method, list(store.node_names), E, list(store.relation_names), R, W,
                          seed=cfg.seed, loss_history=history)


def _train_skipgram(walks, vocab_size, cfg: TrainConfig, rng):
    """Return input and output vectors plus per-epoch mean loss."""
    d = cfg.dimension
    centers, contexts = skipgram_pairs(walks, cfg.window)
    W_in = rng.uniform(-0.5 / d, 0.5 / d, size=(vocab_size, d))
    W_out = np.zeros((vocab_size, d))
    counts = np.bincount(np.concatenate([np.asarray(w) for w in walks]), minlength=vocab_size)
    noise = counts.astype(np.float64) ** 0.75
    noise /= noise.sum()
    cdf = np.cumsum(noise)
    k = cfg.negatives
    n_pairs = len(centers)
    total_steps = max(1, cfg.epochs * math.ceil(n_pairs / cfg.batch_size))
    step = 0
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n_pairs)
        total = 0.0
        for start in range(0, n_pairs, cfg.batch_size):
            lr = cfg.learning_rate * max(1e-4, 1.0 - step / total_steps)
            step += 1
            idx = order[start:start + cfg.batch_size]
            c, o = centers[idx], contexts[idx]
            negs = np.minimum(np.searchsorted(cdf, rng.random((len(idx), k))), vocab_size - 1)
            loss, (dU, dV, dVn) = skipgram_loss(W_in[c], W_out[o], W_out[negs])
            total += loss
            _sparse_update(W_in, c, dU, lr)
            _sparse_update(W_out, np.concatenate([o, negs.ravel()]),
                           np.concatenate([dV, dVn.reshape(-1, d)]), lr)
        history.append(total / max(n_pairs, 1))
        log.debug("walk epoch %d loss %.6f", epoch, history[-1])
    return W_in, W_out, history


def _train_walk(store: TripleStore, cfg: TrainConfig) -> EmbeddingTable:
    rng = np.random.default_rng(cfg.seed)
    walks = _walk_ids(store, cfg.walk_depth, cfg.walks_per_node, rng)
    n = len(store.node_names)
    vocab_size = n + len(store.relation_names)
    W_in, _, history = _train_skipgram(walks, vocab_size, cfg, rng)
    return EmbeddingTable(WALK, list(store.node_names), W_in[:n].copy(), seed=cfg.seed,
                          loss_history=history)


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
