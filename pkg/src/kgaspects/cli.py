"""Command line entry point: ``kgaspects <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .aspects import pair_aspects, write_aspects_tsv
from .errors import KGAspectsError, StageError
from .evaluate import read_pairs
from .kg import build_ontology, load_annotations, parse_triples
from .pipeline import (STAGES, export_chart_data, load_config, run_experiment, run_stage,
                       write_chart_csv)
from .synth import SynthSpec, write_fixture


def _overrides(pairs) -> dict[str, str]:
    out = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise SystemExit(f"--set expects section.key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _add_config_args(p):
    p.add_argument("config", type=Path, help="INI run configuration")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override a config value (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgaspects", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_config_args(sub.add_parser("run", help="run every stage"))
    for stage in STAGES:
        _add_config_args(sub.add_parser(stage, help=f"run the {stage} stage only"))

    p = sub.add_parser("export-chart", help="bar chart rows for one explained pair")
    p.add_argument("explanations", type=Path)
    p.add_argument("entity1")
    p.add_argument("entity2")
    p.add_argument("-o", "--output", type=Path)

    p = sub.add_parser("synth", help="write the planted-signal fixture and its config")
    p.add_argument("outdir", type=Path)
    p.add_argument("--entities", type=int, default=SynthSpec.n_entities)
    p.add_argument("--positives", type=int, default=SynthSpec.n_positive)
    p.add_argument("--negatives", type=int, default=SynthSpec.n_negative)
    p.add_argument("--label-noise", type=float, default=0.0,
                   help="fraction of pairs swapped between the positive and negative files")
    p.add_argument("--seed", type=int, default=SynthSpec.seed)

    p = sub.add_parser("aspects", help="shared aspects of every pair in a pairs TSV")
    p.add_argument("ontology", type=Path)
    p.add_argument("annotations", type=Path)
    p.add_argument("pairs", type=Path)
    p.add_argument("--subclass-relation", default="subClassOf")
    p.add_argument("--format", choices=("tsv", "ntriples"), default="tsv")
    p.add_argument("-o", "--output", type=Path)
    return parser


def _open_out(path):
    return open(path, "w", encoding="utf-8", newline="\n") if path else sys.stdout


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            spec = SynthSpec(n_entities=args.entities, n_positive=args.positives,
                             n_negative=args.negatives, label_noise=args.label_noise,
                             seed=args.seed)
            print(write_fixture(args.outdir, spec))
        elif args.command == "export-chart":
            rows = export_chart_data(args.explanations, (args.entity1, args.entity2))
            fh = _open_out(args.output)
            try:
                write_chart_csv(fh, rows)
            finally:
                if fh is not sys.stdout:
                    fh.close()
        elif args.command == "aspects":
            with open(args.ontology, encoding="utf-8") as fh:
                g = build_ontology(parse_triples(fh, args.format), args.subclass_relation)
            with open(args.annotations, encoding="utf-8") as fh:
                annotations = load_annotations(fh, g)
            with open(args.pairs, encoding="utf-8") as fh:
                pairs = read_pairs(fh, default_label=1)
            out = _open_out(args.output)
            try:
                write_aspects_tsv(out, ((f"p{i:05d}", pair_aspects(g, annotations, a, b))
                                        for i, (a, b, _) in enumerate(pairs)))
            finally:
                if out is not sys.stdout:
                    out.close()
        else:
            cfg = load_config(args.config, _overrides(args.set))
            if args.command == "run":
                print(run_experiment(cfg))
            else:
                run_stage(cfg, args.command)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (KGAspectsError, OSError) as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
