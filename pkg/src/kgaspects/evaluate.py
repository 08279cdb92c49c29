"""Cross-validation, metrics, significance testing and explanation ablations."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .aspects import pair_aspects
from .classify import predict_many
from .embed import EmbeddingTable
from .errors import InputError, NotFoundError, SamplingError, StratificationError
from .kg import AnnotationMap, OntologyGraph
from .pairrep import aggregate

# Which reference class decides sufficiency in each output (see
# effectiveness_sufficient).
SUFFICIENCY_KEYS = {"explanations": "predicted", "effectiveness_sufficient": "truth"}


@dataclass
class PairDataset:
    pairs: list[tuple[str, str, int]]
    source: str = ""
    seed: int | None = None

    def __post_init__(self):
        seen = set()
        for e1, e2, label in self.pairs:
            key = frozenset((e1, e2))
            if key in seen:
                raise InputError(f"duplicate pair ({e1}, {e2})")
            seen.add(key)
            if label not in (0, 1):
                raise InputError(f"label must be 0 or 1, got {label!r}")

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def labels(self) -> np.ndarray:
        return np.array([p[2] for p in self.pairs], dtype=np.int64)

    def check_annotated(self, annotations: AnnotationMap) -> None:
        for e1, e2, _ in self.pairs:
            for e in (e1, e2):
                if e not in annotations:
                    raise NotFoundError(f"pair entity {e!r} has no annotations")


def read_pairs(fh, default_label: int | None = None) -> list[tuple[str, str, int]]:
    """Parse ``e1<TAB>e2[<TAB>label]`` lines."""
    out = []
    for lineno, raw in enumerate(fh, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) == 3:
            out.append((parts[0], parts[1], int(parts[2])))
        elif len(parts) == 2 and default_label is not None:
            out.append((parts[0], parts[1], default_label))
        else:
            raise InputError(f"line {lineno}: malformed pair line {line!r}")
    return out


def sample_negative_pairs(entities: Sequence[str], positives: Iterable[tuple[str, str]],
                          n: int, seed=None) -> list[tuple[str, str]]:
    """Draw ``n`` distinct unordered non-positive pairs uniformly at random."""
    entities = list(dict.fromkeys(entities))
    index = {e: i for i, e in enumerate(entities)}
    blocked = set()
    for a, b in positives:
        if a in index and b in index and a != b:
            blocked.add((min(index[a], index[b]), max(index[a], index[b])))
    m = len(entities)
    available = m * (m - 1) // 2 - len(blocked)
    if n < 0:
        raise InputError("n must be non-negative")
    if n > available:
        raise SamplingError(f"requested {n} negative pairs but only {available} exist")
    rng = np.random.default_rng(seed)
    if n == 0:
        return []
    if 2 * n > available:
        space = [(i, j) for i in range(m) for j in range(i + 1, m) if (i, j) not in blocked]
        chosen = [space[k] for k in rng.choice(len(space), size=n, replace=False)]
    else:
        chosen, taken = [], set()
        while len(chosen) < n:
            i, j = sorted(int(x) for x in rng.choice(m, size=2, replace=False))
            if (i, j) in blocked or (i, j) in taken:
                continue
            taken.add((i, j))
            chosen.append((i, j))
    return [(entities[i], entities[j]) for i, j in chosen]


def stratified_kfold(labels, k: int, seed=None) -> list[np.ndarray]:
    """Split indices into ``k`` folds with per-class counts differing by at most 1.

    ``labels`` may be a label sequence or a :class:`PairDataset`.
    """
    if isinstance(labels, PairDataset):
        labels = labels.labels
    labels = np.asarray(labels)
    if k < 2:
        raise StratificationError("k must be at least 2")
    if len(labels) < k:
        raise StratificationError(f"{len(labels)} items cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for cls in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == cls))
        assignment[members] = (offset + np.arange(len(members))) % k
        offset = (offset + len(members)) % k
    return [np.flatnonzero(assignment == f) for f in range(k)]


@dataclass
class Metrics:
    precision: float
    recall: float
    weighted_f1: float
    support: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "weighted_f1": self.weighted_f1,
                "support": {str(k): v for k, v in self.support.items()}}


def _safe_div(a, b):
    return a / b if b else 0.0


def compute_metrics(predictions, labels) -> Metrics:
    """Positive-class precision/recall and support-weighted F1 over both classes."""
    pred = np.asarray(predictions).astype(np.int64)
    true = np.asarray(labels).astype(np.int64)
    if pred.shape != true.shape or pred.ndim != 1:
        raise InputError(f"predictions {pred.shape} and labels {true.shape} differ")
    if len(true) == 0:
        raise InputError("need at least one prediction")
    f1s, support = {}, {}
    precision = recall = 0.0
    for c in (0, 1):
        tp = int(np.sum((pred == c) & (true == c)))
        fp = int(np.sum((pred == c) & (true != c)))
        fn = int(np.sum((pred != c) & (true == c)))
        p, r = _safe_div(tp, tp + fp), _safe_div(tp, tp + fn)
        f1s[c] = _safe_div(2 * p * r, p + r)
        support[c] = tp + fn
        if c == 1:
            precision, recall = p, r
    weighted = _safe_div(sum(support[c] * f1s[c] for c in (0, 1)), len(true))
    return Metrics(precision, recall, weighted, support)


def _rank_abs(d: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) of ``|d|``, ties sharing their mean rank."""
    a = np.abs(d)
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(len(a))
    sorted_a = a[order]
    i = 0
    while i < len(a):
        j = i
        while j + 1 < len(a) and sorted_a[j + 1] == sorted_a[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


EXACT_MAX_N = 12


def wilcoxon_signed_rank(a, b) -> float:
    """Two-sided p-value of the Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped.  Up to 12 remaining pairs the null
    distribution of the positive rank sum is computed exactly over all sign
    assignments; beyond that a normal approximation with tie correction is
    used.  All-zero differences give ``p = 1``.
    """
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError("samples must be 1-D and of equal length")
    d = a - b
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 1.0
    ranks = _rank_abs(d)
    w_plus = float(ranks[d > 0].sum())
    if n <= EXACT_MAX_N:
        # Midranks are multiples of 1/2, so doubled ranks are integers and the
        # rank-sum distribution is a subset-sum count.
        doubled = np.rint(2 * ranks).astype(np.int64)
        counts = np.zeros(int(doubled.sum()) + 1, dtype=np.float64)
        counts[0] = 1.0
        for r in doubled:
            shifted = np.zeros_like(counts)
            shifted[r:] = counts[:len(counts) - r]
            counts = counts + shifted
        total = 2.0 ** n
        t = int(round(2 * w_plus))
        lower = counts[:t + 1].sum() / total
        upper = counts[t:].sum() / total
        return float(min(1.0, 2.0 * min(lower, upper)))
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts ** 3 - tie_counts) / 48.0
    if var <= 0:
        return 1.0
    z = (w_plus - mean) / math.sqrt(var)
    return float(min(1.0, math.erfc(abs(z) / math.sqrt(2.0))))


@dataclass
class DeltaMetrics:
    scenario: str
    subset_size: int
    delta_precision: float | None
    delta_recall: float | None
    delta_f1: float | None

    @property
    def defined(self) -> bool:
        return self.subset_size > 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["defined"] = self.defined
        return out


def delta_metrics(scenario: str, labels, global_pred, ablated_pred) -> DeltaMetrics:
    """Metric differences (ablated minus global) on an already selected subset."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        return DeltaMetrics(scenario, 0, None, None, None)
    g = compute_metrics(global_pred, labels)
    a = compute_metrics(ablated_pred, labels)
    return DeltaMetrics(scenario, len(labels), a.precision - g.precision, a.recall - g.recall,
                        a.weighted_f1 - g.weighted_f1)


def ablation_rows(test_pairs, K: EmbeddingTable, M, annotations: AnnotationMap,
                   g: OntologyGraph, scenario: str, op: str = "average"):
    """Labels, global and ablated predicted classes for the scenario's subset."""
    labels, glob, abl = [], [], []
    for e1, e2, label in test_pairs:
        D = pair_aspects(g, annotations, e1, e2)
        E = K.vectors(D.aspects)
        full = aggregate(E, op, dimension=K.dimension)
        p_global = predict_many(M, full[None, :])[0].predicted_class
        correct = p_global == label
        if scenario == "without-necessary":
            if not correct:
                continue
            keep = []
            if len(E):
                rows = np.vstack([aggregate(np.delete(E, i, axis=0), op, dimension=K.dimension)
                                  for i in range(len(E))])
                flips = [q.predicted_class != p_global for q in predict_many(M, rows)]
                keep = [i for i, f in enumerate(flips) if not f]
            vec = aggregate(E[keep], op, dimension=K.dimension)
        else:
            if correct:
                continue
            keep = []
            if len(E):
                keep = [i for i, q in enumerate(predict_many(M, E)) if q.predicted_class == label]
            vec = aggregate(E[keep], op, dimension=K.dimension)
        labels.append(label)
        glob.append(p_global)
        abl.append(predict_many(M, vec[None, :])[0].predicted_class)
    return labels, glob, abl


def effectiveness_necessary(test_pairs, K: EmbeddingTable, M, annotations: AnnotationMap,
                            g: OntologyGraph, op: str = "average") -> DeltaMetrics:
    """Drop every necessary aspect of each correctly predicted pair and re-score."""
    return delta_metrics("without-necessary",
                         *ablation_rows(test_pairs, K, M, annotations, g, "without-necessary", op))


def effectiveness_sufficient(test_pairs, K: EmbeddingTable, M, annotations: AnnotationMap,
                             g: OntologyGraph, op: str = "average") -> DeltaMetrics:
    """Keep only the truth-aligned sufficient aspects of each misclassified pair.

    Here an aspect counts as sufficient when its solo prediction equals the
    true label, not the (wrong) global prediction.
    """
    return delta_metrics("only-sufficient",
                         *ablation_rows(test_pairs, K, M, annotations, g, "only-sufficient", op))


def explanation_length_stats(explanations, kind: str) -> tuple[float, float]:
    """Mean and population standard deviation of explanation lengths.

    Accepts :class:`~kgaspects.explain.Explanation` objects or their JSON dicts.
    """
    if kind not in ("necessary", "sufficient"):
        raise InputError(f"kind must be 'necessary' or 'sufficient', got {kind!r}")
    lengths = []
    for e in explanations:
        if isinstance(e, dict):
            lengths.append(sum(1 for a in e["aspects"] if a[kind]))
        else:
            lengths.append(len(getattr(e, kind)))
    if not lengths:
        raise InputError("no explanations given")
    arr = np.asarray(lengths, dtype=np.float64)
    return float(arr.mean()), float(arr.std())
