"""Planted-signal fixture generator.

Builds a three-branch ontology under a single root.  Every branch holds a few
mid-level classes, each with leaf classes.  One mid-level class of branch 1
is the planted class: positive pairs are entities annotated with two
different leaves below it, so their branch-1 aspect is exactly the planted
class.  Negative pairs never share a branch-1 mid-level class, so branch 1
only contributes the near-root branch class.  Branches 2 and 3 add noise
aspects to both kinds of pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kg import SUBCLASS_OF

PART_OF = "partOf"


@dataclass
class SynthSpec:
    n_entities: int = 120
    n_positive: int = 200
    n_negative: int = 200
    mids: int = 4
    leaves: int = 6
    label_noise: float = 0.0
    seed: int = 7


def _leaf(b, m, l):
    return f"b{b}_m{m}_l{l}"


def generate(spec: SynthSpec):
    """Return (ontology triples, annotations, positives, negatives, info)."""
    rng = np.random.default_rng(spec.seed)
    triples = []
    for b in (1, 2, 3):
        triples.append((f"branch_{b}", SUBCLASS_OF, "root"))
        for m in range(spec.mids):
            triples.append((f"b{b}_m{m}", SUBCLASS_OF, f"branch_{b}"))
            for l in range(spec.leaves):
                triples.append((_leaf(b, m, l), SUBCLASS_OF, f"b{b}_m{m}"))
    # a few non-subsumption edges: they feed the walks but not the hierarchy
    for b in (2, 3):
        for m in range(spec.mids):
            triples.append((_leaf(b, m, 0), PART_OF, f"b{b}_m{(m + 1) % spec.mids}"))
    planted = "b1_m0"

    entities = [f"e{i:03d}" for i in range(spec.n_entities)]
    half = spec.n_entities // 2
    b1_mid, b1_leaf = {}, {}
    annotations = []
    for i, e in enumerate(entities):
        mid = 0 if i < half else 1 + int(rng.integers(spec.mids - 1))
        leaf = int(rng.integers(spec.leaves))
        b1_mid[e], b1_leaf[e] = mid, leaf
        annotations.append((e, _leaf(1, mid, leaf)))
        for b in (2, 3):
            annotations.append((e, _leaf(b, int(rng.integers(spec.mids)), int(rng.integers(spec.leaves)))))

    signal = entities[:half]
    positives, seen = [], set()
    while len(positives) < spec.n_positive:
        i, j = sorted(int(x) for x in rng.choice(half, size=2, replace=False))
        a, b = signal[i], signal[j]
        if b1_leaf[a] == b1_leaf[b] or (a, b) in seen:
            continue
        seen.add((a, b))
        positives.append((a, b))

    negatives = []
    while len(negatives) < spec.n_negative:
        i, j = sorted(int(x) for x in rng.choice(spec.n_entities, size=2, replace=False))
        a, b = entities[i], entities[j]
        if b1_mid[a] == b1_mid[b] or (a, b) in seen:
            continue
        seen.add((a, b))
        negatives.append((a, b))

    # swap a fraction of pairs between the two files to inject label noise
    flipped = int(round(spec.label_noise * min(len(positives), len(negatives))))
    if flipped:
        pi = sorted(rng.choice(len(positives), size=flipped, replace=False).tolist())
        ni = sorted(rng.choice(len(negatives), size=flipped, replace=False).tolist())
        moved_pos = [positives[i] for i in pi]
        moved_neg = [negatives[i] for i in ni]
        positives = [p for i, p in enumerate(positives) if i not in set(pi)] + moved_neg
        negatives = [p for i, p in enumerate(negatives) if i not in set(ni)] + moved_pos

    info = {"planted_class": planted, "seed": spec.seed, "entities": spec.n_entities,
            "positives": len(positives), "negatives": len(negatives),
            "flipped_pairs": flipped}
    return triples, annotations, positives, negatives, info


CONFIG_TEMPLATE = """\
[paths]
ontology = ontology.tsv
annotations = annotations.tsv
positives = positives.tsv
negatives = negatives.tsv
output = run

[ontology]
subclass_relation = subClassOf

[embedding]
method = walk
dimension = 32
epochs = 10
learning_rate = 0.05
negatives = 5
batch_size = 256
walk_depth = 4
walks_per_node = 20
window = 4

[representation]
aggregation = average
baseline_operator = hadamard

[classifier]
kind = mlp
hidden = 32
learning_rate = 0.2
epochs = 60
batch_size = 16

[run]
folds = 10
seed = {seed}
"""


def write_fixture(outdir, spec: SynthSpec | None = None) -> Path:
    """Write the fixture files plus a ready-to-run ``config.ini`` into ``outdir``."""
    spec = spec or SynthSpec()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    triples, annotations, positives, negatives, info = generate(spec)

    def dump(name, rows):
        with open(outdir / name, "w", encoding="utf-8", newline="\n") as fh:
            for row in rows:
                fh.write("\t".join(row) + "\n")

    dump("ontology.tsv", triples)
    dump("annotations.tsv", annotations)
    dump("positives.tsv", positives)
    dump("negatives.tsv", negatives)
    (outdir / "synth_info.json").write_text(json.dumps(info, indent=2) + "\n", encoding="utf-8")
    config = outdir / "config.ini"
    config.write_text(CONFIG_TEMPLATE.format(seed=spec.seed), encoding="utf-8")
    return config
