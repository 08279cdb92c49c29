"""End-to-end experiment: ingest, embed, represent, train, explain, evaluate.

Each stage reads its inputs from the configured source files or from the
artifacts of earlier stages in the output directory, and writes its own
artifacts there.  Running the stages one by one therefore produces the same
files as :func:`run_experiment`.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .aspects import AspectSet, pair_aspects, read_aspects_tsv, write_aspects_tsv
from .classify import ClassifierConfig, ClassifierModel, predict_many, train_classifier
from .embed import EmbeddingTable, TrainConfig, resolve_method, train_embeddings
from .errors import ConfigError, KGAspectsError, NotFoundError, StageError
from .evaluate import (SUFFICIENCY_KEYS, PairDataset, ablation_rows, compute_metrics,
                       delta_metrics, explanation_length_stats, read_pairs,
                       sample_negative_pairs, stratified_kfold, wilcoxon_signed_rank)
from .explain import explain_aspects, read_explanations, write_explanations
from .kg import (HAS_ANNOTATION, SUBCLASS_OF, AnnotationMap, OntologyGraph, TripleStore,
                 build_ontology, load_annotations, parse_triples)
from .pairrep import (AGGREGATIONS, BASELINE_OPERATORS, aggregate, combine_entities,
                      read_features_csv, write_features_csv)

log = logging.getLogger(__name__)

STAGES = ("ingest", "embed", "represent", "train", "explain", "evaluate")
REPRESENTATIONS = ("seek", "baseline")


@dataclass
class RunConfig:
    ontology: Path
    annotations: Path
    positives: Path
    output: Path
    negatives: Path | None = None
    ontology_format: str = "tsv"
    subclass_relation: str = SUBCLASS_OF
    annotation_relation: str = HAS_ANNOTATION
    method: str = "walk"
    embedding: TrainConfig = field(default_factory=TrainConfig)
    aggregation: str = "average"
    baseline_operator: str = "hadamard"
    classifier_kind: str = "mlp"
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    folds: int = 10
    seed: int = 0

    def validate(self, check_files: bool = True) -> "RunConfig":
        self.method = resolve_method(self.method)
        self.embedding.seed = self.seed
        self.embedding.validate()
        self.classifier.validate()
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"unknown aggregation {self.aggregation!r}")
        if self.baseline_operator not in BASELINE_OPERATORS:
            raise ConfigError(f"unknown baseline operator {self.baseline_operator!r}")
        if self.classifier_kind not in ("logistic", "mlp"):
            raise ConfigError(f"unknown classifier kind {self.classifier_kind!r}")
        if self.folds < 2:
            raise ConfigError("folds must be at least 2")
        if check_files:
            for name in ("ontology", "annotations", "positives", "negatives"):
                path = getattr(self, name)
                if path is not None and not Path(path).is_file():
                    raise ConfigError(f"{name} file not found: {path}")
        return self

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, Path):
                out[k] = str(v)
        return out

    def digest(self) -> str:
        """Hash of the semantic config; the output path does not take part."""
        data = self.to_dict()
        data.pop("output")
        for k in ("ontology", "annotations", "positives", "negatives"):
            if data[k] is not None:
                data[k] = _file_digest(Path(data[k]))
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


_INT_FIELDS = {f for f in TrainConfig.__dataclass_fields__ if f not in ("learning_rate", "margin")}


def load_config(path, overrides: dict[str, str] | None = None, check_files: bool = True) -> RunConfig:
    """Read an INI-style config.  Relative paths resolve against its directory.

    ``overrides`` maps ``section.key`` to a string value and wins over the file.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";",))
    parser.read(path, encoding="utf-8")
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if not key:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value)

    base = path.parent

    def get(section, key, default=None):
        if parser.has_option(section, key):
            return parser.get(section, key).strip()
        return default

    def resolve(value):
        if value in (None, ""):
            return None
        p = Path(value)
        return p if p.is_absolute() else base / p

    for key in ("ontology", "annotations", "positives", "output"):
        if get("paths", key) is None:
            raise ConfigError(f"missing [paths] {key}")

    try:
        emb = TrainConfig()
        if parser.has_section("embedding"):
            for key, value in parser.items("embedding"):
                if key == "method":
                    continue
                if key not in TrainConfig.__dataclass_fields__:
                    raise ConfigError(f"unknown [embedding] option {key!r}")
                setattr(emb, key, int(value) if key in _INT_FIELDS else float(value))
        clf = ClassifierConfig()
        if parser.has_section("classifier"):
            for key, value in parser.items("classifier"):
                if key == "kind":
                    continue
                if key not in ClassifierConfig.__dataclass_fields__:
                    raise ConfigError(f"unknown [classifier] option {key!r}")
                setattr(clf, key, float(value) if key in ("learning_rate", "l2") else int(value))
        cfg = RunConfig(
            ontology=resolve(get("paths", "ontology")),
            annotations=resolve(get("paths", "annotations")),
            positives=resolve(get("paths", "positives")),
            negatives=resolve(get("paths", "negatives")),
            output=resolve(get("paths", "output")),
            ontology_format=get("ontology", "format", "tsv"),
            subclass_relation=get("ontology", "subclass_relation", SUBCLASS_OF),
            annotation_relation=get("ontology", "annotation_relation", HAS_ANNOTATION),
            method=get("embedding", "method", "walk"),
            embedding=emb,
            aggregation=get("representation", "aggregation", "average"),
            baseline_operator=get("representation", "baseline_operator", "hadamard"),
            classifier_kind=get("classifier", "kind", "mlp"),
            classifier=clf,
            folds=int(get("run", "folds", "10")),
            seed=int(get("run", "seed", "0")),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate(check_files=check_files)


# --------------------------------------------------------------------------
# shared loaders
# --------------------------------------------------------------------------

def load_inputs(cfg: RunConfig) -> tuple[TripleStore, OntologyGraph, AnnotationMap]:
    with open(cfg.ontology, encoding="utf-8") as fh:
        store = parse_triples(fh, cfg.ontology_format)
    g = build_ontology(store, cfg.subclass_relation)
    with open(cfg.annotations, encoding="utf-8") as fh:
        annotations = load_annotations(fh, g)
    return store, g, annotations


def _read_pairs_file(path) -> list[tuple[str, str, str, int]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            pid, e1, e2, label = line.rstrip("\n").split("\t")
            rows.append((pid, e1, e2, int(label)))
    return rows


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _median(values) -> float:
    return float(np.median(np.asarray(values, dtype=np.float64)))


# --------------------------------------------------------------------------
# stages
# --------------------------------------------------------------------------

def stage_ingest(cfg: RunConfig) -> None:
    out = Path(cfg.output)
    store, g, annotations = load_inputs(cfg)
    with open(cfg.positives, encoding="utf-8") as fh:
        positives = read_pairs(fh, default_label=1)
    positives = [(a, b, 1) for a, b, _ in positives]
    if cfg.negatives is not None:
        with open(cfg.negatives, encoding="utf-8") as fh:
            negatives = [(a, b, 0) for a, b, _ in read_pairs(fh, default_label=0)]
    else:
        entities = list(dict.fromkeys(e for a, b, _ in positives for e in (a, b)))
        sampled = sample_negative_pairs(entities, [(a, b) for a, b, _ in positives],
                                        len(positives), seed=cfg.seed)
        negatives = [(a, b, 0) for a, b in sampled]
    dataset = PairDataset(positives + negatives, source=str(cfg.positives), seed=cfg.seed)
    dataset.check_annotated(annotations)

    graph = TripleStore()
    graph.extend(store)
    for triple in annotations.triples(cfg.annotation_relation):
        graph.add(*triple)
    with open(out / "graph.tsv", "w", encoding="utf-8", newline="\n") as fh:
        graph.write_tsv(fh)

    ids = [f"p{i:05d}" for i in range(len(dataset))]
    with open(out / "pairs.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for pid, (a, b, y) in zip(ids, dataset.pairs):
            fh.write(f"{pid}\t{a}\t{b}\t{y}\n")
    with open(out / "aspects.tsv", "w", encoding="utf-8", newline="\n") as fh:
        write_aspects_tsv(fh, ((pid, pair_aspects(g, annotations, a, b))
                               for pid, (a, b, _) in zip(ids, dataset.pairs)))


def stage_embed(cfg: RunConfig) -> None:
    out = Path(cfg.output)
    with open(out / "graph.tsv", encoding="utf-8") as fh:
        graph = parse_triples(fh, "tsv")
    table = train_embeddings(graph, cfg.method, cfg.embedding)
    table.save(out / "embeddings.tsv")


def stage_represent(cfg: RunConfig) -> None:
    out = Path(cfg.output)
    _, g, _ = load_inputs(cfg)
    table = EmbeddingTable.load(out / "embeddings.tsv")
    pairs = _read_pairs_file(out / "pairs.tsv")
    with open(out / "aspects.tsv", encoding="utf-8") as fh:
        aspects = read_aspects_tsv(fh)
    ids = [p[0] for p in pairs]
    labels = [p[3] for p in pairs]
    seek = np.vstack([aggregate(table.vectors(aspects.get(pid, ())), cfg.aggregation,
                                dimension=table.dimension) for pid in ids])
    base = np.vstack([combine_entities(table.vector(a), table.vector(b), cfg.baseline_operator)
                      for _, a, b, _ in pairs])
    write_features_csv(out / "features_seek.csv", ids, seek, labels)
    write_features_csv(out / "features_baseline.csv", ids, base, labels)


def _fold_seed(cfg: RunConfig, fold: int) -> int:
    return cfg.seed * 1000 + fold


def stage_train(cfg: RunConfig) -> None:
    out = Path(cfg.output)
    (out / "models").mkdir(exist_ok=True)
    feats = {rep: read_features_csv(out / f"features_{rep}.csv") for rep in REPRESENTATIONS}
    ids, _, y = feats["seek"]
    folds = stratified_kfold(y, cfg.folds, seed=cfg.seed)
    fold_of = np.empty(len(y), dtype=np.int64)
    for f, idx in enumerate(folds):
        fold_of[idx] = f
    preds = {rep: [None] * len(y) for rep in REPRESENTATIONS}
    for f, test in enumerate(folds):
        train = np.flatnonzero(fold_of != f)
        for rep in REPRESENTATIONS:
            _, X, _ = feats[rep]
            model = train_classifier(X[train], y[train], cfg.classifier_kind, cfg.classifier,
                                     seed=_fold_seed(cfg, f))
            model.save(out / "models" / f"{rep}_fold{f:02d}.json")
            for i, p in zip(test, predict_many(model, X[test])):
                preds[rep][i] = p
    with open(out / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pair_id", "fold", "label", "seek_class", "seek_likelihood",
                    "baseline_class", "baseline_likelihood"])
        for i, pid in enumerate(ids):
            s, b = preds["seek"][i], preds["baseline"][i]
            w.writerow([pid, int(fold_of[i]), int(y[i]), s.predicted_class, repr(s.likelihood),
                        b.predicted_class, repr(b.likelihood)])


def _read_predictions(out: Path) -> list[dict]:
    with open(out / "predictions.csv", newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _load_model(out: Path, rep: str, fold: int) -> ClassifierModel:
    return ClassifierModel.load(out / "models" / f"{rep}_fold{fold:02d}.json")


def stage_explain(cfg: RunConfig) -> None:
    out = Path(cfg.output)
    _, g, _ = load_inputs(cfg)
    table = EmbeddingTable.load(out / "embeddings.tsv")
    pairs = _read_pairs_file(out / "pairs.tsv")
    with open(out / "aspects.tsv", encoding="utf-8") as fh:
        aspects = read_aspects_tsv(fh)
    folds = {row["pair_id"]: int(row["fold"]) for row in _read_predictions(out)}
    models = {f: _load_model(out, "seek", f) for f in sorted(set(folds.values()))}
    explanations = []
    for pid, a, b, _ in pairs:
        D = AspectSet((a, b), aspects.get(pid, ()))
        explanations.append(explain_aspects(D, table, models[folds[pid]], g, cfg.aggregation))
    write_explanations(out / "explanations.json", explanations)


def _metric_block(per_fold) -> dict:
    return {
        "per_fold": [m.to_dict() for m in per_fold],
        "median": {k: _median([getattr(m, k) for m in per_fold])
                   for k in ("precision", "recall", "weighted_f1")},
    }


def stage_evaluate(cfg: RunConfig) -> dict:
    out = Path(cfg.output)
    _, g, annotations = load_inputs(cfg)
    table = EmbeddingTable.load(out / "embeddings.tsv")
    pairs = {p[0]: p for p in _read_pairs_file(out / "pairs.tsv")}
    rows = _read_predictions(out)
    k = max(int(r["fold"]) for r in rows) + 1

    per_fold = {rep: [] for rep in REPRESENTATIONS}
    for f in range(k):
        fold_rows = [r for r in rows if int(r["fold"]) == f]
        labels = [int(r["label"]) for r in fold_rows]
        for rep in REPRESENTATIONS:
            per_fold[rep].append(compute_metrics([int(r[f"{rep}_class"]) for r in fold_rows], labels))

    seek_f1 = [m.weighted_f1 for m in per_fold["seek"]]
    base_f1 = [m.weighted_f1 for m in per_fold["baseline"]]

    effectiveness = {}
    for scenario, key in (("without-necessary", "without_necessary"),
                          ("only-sufficient", "only_sufficient")):
        fold_deltas, pooled = [], ([], [], [])
        for f in range(k):
            model = _load_model(out, "seek", f)
            test = [(pairs[r["pair_id"]][1], pairs[r["pair_id"]][2], int(r["label"]))
                    for r in rows if int(r["fold"]) == f]
            lab, glob, abl = ablation_rows(test, table, model, annotations, g, scenario,
                                           cfg.aggregation)
            fold_deltas.append(delta_metrics(scenario, lab, glob, abl).to_dict())
            for acc, part in zip(pooled, (lab, glob, abl)):
                acc.extend(part)
        effectiveness[key] = {"per_fold": fold_deltas,
                              "pooled": delta_metrics(scenario, *pooled).to_dict()}

    explanations = read_explanations(out / "explanations.json")
    lengths = {}
    for kind in ("necessary", "sufficient"):
        avg, std = explanation_length_stats(explanations, kind)
        lengths[kind] = {"avg": avg, "std": std}
    sizes = np.asarray([len(e["aspects"]) for e in explanations], dtype=np.float64)
    lengths["aspects"] = {"avg": float(sizes.mean()), "std": float(sizes.std())}

    metrics = {
        "config_hash": cfg.digest(),
        "folds": k,
        "method": cfg.method,
        "classifier": cfg.classifier_kind,
        "seek": _metric_block(per_fold["seek"]),
        "baseline": _metric_block(per_fold["baseline"]),
        "wilcoxon": {"metric": "weighted_f1", "run": "seek", "reference": "baseline",
                     "p_value": wilcoxon_signed_rank(seek_f1, base_f1)},
        "effectiveness": effectiveness,
        "sufficiency_key": SUFFICIENCY_KEYS,
        "explanation_length": lengths,
        "empty_aspect_pairs": int(sum(1 for e in explanations if e["empty_aspects"])),
    }
    _write_json(out / "metrics.json", metrics)
    _write_tables(out / "tables.csv", metrics)
    return metrics


def _write_tables(path: Path, metrics: dict) -> None:
    """Flat CSV laid out like the performance, effectiveness and length tables."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["table", "row", "column", "value"])
        for rep in REPRESENTATIONS:
            for name, key in (("Pr", "precision"), ("Re", "recall"), ("F1", "weighted_f1")):
                w.writerow(["performance", rep, name, f"{metrics[rep]['median'][key]:.3f}"])
        w.writerow(["performance", "seek", "wilcoxon_p", f"{metrics['wilcoxon']['p_value']:.6g}"])
        for scen in ("without_necessary", "only_sufficient"):
            pooled = metrics["effectiveness"][scen]["pooled"]
            for name, key in (("dPr", "delta_precision"), ("dRe", "delta_recall"), ("dF1", "delta_f1")):
                value = pooled[key]
                w.writerow(["effectiveness", scen, name, "" if value is None else f"{value:.3f}"])
        for kind in ("sufficient", "necessary"):
            stats = metrics["explanation_length"][kind]
            w.writerow(["length", kind, "Avg", f"{stats['avg']:.1f}"])
            w.writerow(["length", kind, "Std", f"{stats['std']:.1f}"])


STAGE_FUNCS = {"ingest": stage_ingest, "embed": stage_embed, "represent": stage_represent,
               "train": stage_train, "explain": stage_explain, "evaluate": stage_evaluate}

ARTIFACTS = {
    "ingest": ["graph.tsv", "pairs.tsv", "aspects.tsv"],
    "embed": ["embeddings.tsv", "embeddings.tsv.json", "embeddings.tsv.relations.tsv"],
    "represent": ["features_seek.csv", "features_baseline.csv"],
    "train": ["predictions.csv", "models/"],
    "explain": ["explanations.json"],
    "evaluate": ["metrics.json", "tables.csv"],
}


def _update_manifest(cfg: RunConfig, stage: str, ok: bool, error: str | None = None) -> None:
    out = Path(cfg.output)
    path = out / "manifest.json"
    manifest = {}
    if path.exists():
        manifest = json.loads(path.read_text(encoding="utf-8"))
    digest = cfg.digest()
    if manifest.get("config_hash") != digest:
        manifest = {}
    stages = manifest.get("stages", {})
    stages[stage] = {"status": "ok" if ok else "failed", "artifacts": ARTIFACTS[stage]}
    if error:
        stages[stage]["error"] = error
    # a rerun invalidates everything downstream
    for later in STAGES[STAGES.index(stage) + 1:]:
        stages.pop(later, None)
    manifest = {
        "config_hash": digest,
        "config": cfg.to_dict(),
        "versions": {"kgaspects": __version__, "numpy": np.__version__},
        "seeds": {"run": cfg.seed, "embedding": cfg.embedding.seed,
                  "folds": cfg.seed, "negative_sampling": cfg.seed,
                  "classifier": [_fold_seed(cfg, f) for f in range(cfg.folds)]},
        "stages": stages,
        "complete": all(stages.get(s, {}).get("status") == "ok" for s in STAGES),
    }
    _write_json(path, manifest)


def run_stage(cfg: RunConfig, stage: str):
    """Run one stage, recording its outcome in ``manifest.json``."""
    if stage not in STAGE_FUNCS:
        raise ConfigError(f"unknown stage {stage!r}")
    Path(cfg.output).mkdir(parents=True, exist_ok=True)
    log.info("stage %s", stage)
    try:
        result = STAGE_FUNCS[stage](cfg)
    except (KGAspectsError, OSError, ValueError, KeyError) as exc:
        _update_manifest(cfg, stage, False, f"{type(exc).__name__}: {exc}")
        raise StageError(stage, exc) from exc
    _update_manifest(cfg, stage, True)
    return result


def run_experiment(cfg: RunConfig) -> Path:
    """Execute every stage in order and return the output directory."""
    cfg.validate()
    for stage in STAGES:
        run_stage(cfg, stage)
    return Path(cfg.output)


def export_chart_data(explanations, pair) -> list[tuple[str, str, float, int]]:
    """Bar rows ``(group, bar, likelihood, class)`` for one explained pair.

    Groups are ``global``, ``solo`` (one bar per aspect), ``all_sufficient``
    and ``without_necessary``; absent predictions are skipped.
    """
    if isinstance(explanations, (str, Path)):
        explanations = read_explanations(explanations)
    target = frozenset(pair)
    for e in explanations:
        e = e if isinstance(e, dict) else e.to_dict()
        if frozenset(e["pair"]) != target:
            continue
        rows = [("global", "global", e["global"]["likelihood"], e["global"]["class"])]
        for a in e["aspects"]:
            rows.append(("solo", a["label"], a["solo"]["likelihood"], a["solo"]["class"]))
        for key in ("all_sufficient", "without_necessary"):
            if e[key] is not None:
                rows.append((key, key, e[key]["likelihood"], e[key]["class"]))
        return rows
    raise NotFoundError(f"pair {tuple(pair)!r} not found in explanations")


def write_chart_csv(fh, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["group", "bar", "likelihood", "class"])
    for group, bar, lik, cls in rows:
        w.writerow([group, bar, repr(float(lik)), int(cls)])
