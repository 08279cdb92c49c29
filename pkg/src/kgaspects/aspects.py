"""Shared semantic aspects of an entity pair.

The aspects of a pair are the disjoint common ancestors (DCA) of the two
annotation sets: the common ancestors that do not strictly subsume another
common ancestor.  With ancestor sets stored as bit-sets this is

    common  = closure(C1) & closure(C2)
    covered = OR over b in common of (closure(b) without b)
    dca     = common & ~covered
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, TextIO

from .kg import AnnotationMap, OntologyGraph, iter_bits


@dataclass(frozen=True)
class AspectSet:
    """Ordered DCA of a pair, most specific class first.

    Specificity is measured by how few classes an aspect subsumes; ties are
    broken by class id.
    """

    pair: tuple[str, str]
    aspects: tuple[str, ...]

    @property
    def empty(self) -> bool:
        return not self.aspects

    def __len__(self) -> int:
        return len(self.aspects)

    def __iter__(self):
        return iter(self.aspects)


def _common_mask(g: OntologyGraph, c1: Iterable[str], c2: Iterable[str]) -> int:
    c1, c2 = list(c1), list(c2)
    if not c1 or not c2:
        raise ValueError("annotation sets must be non-empty")
    return g.mask_of(c1) & g.mask_of(c2)


def _minimal_mask(g: OntologyGraph, common: int) -> int:
    covered = 0
    for i in iter_bits(common):
        covered |= g.closure[i] & ~(1 << i)
    return common & ~covered


def common_ancestors(g: OntologyGraph, c1: Iterable[str], c2: Iterable[str]) -> set[str]:
    """Classes subsuming at least one class of ``c1`` and one of ``c2``."""
    return set(g.names_of(_common_mask(g, c1, c2)))


def order_aspects(g: OntologyGraph, classes: Iterable[str]) -> tuple[str, ...]:
    return tuple(sorted(classes, key=lambda c: (g.descendant_count[g.index[c]], g.index[c])))


def disjoint_common_ancestors(g: OntologyGraph, c1: Iterable[str], c2: Iterable[str],
                              pair: tuple[str, str] = ("", "")) -> AspectSet:
    mask = _minimal_mask(g, _common_mask(g, c1, c2))
    return AspectSet(tuple(pair), order_aspects(g, g.names_of(mask)))


def pair_aspects(g: OntologyGraph, annotations: AnnotationMap, e1: str, e2: str) -> AspectSet:
    """DCA of the annotation sets of two entities."""
    return disjoint_common_ancestors(g, annotations[e1], annotations[e2], pair=(e1, e2))


def write_aspects_tsv(fh: TextIO, rows: Iterable[tuple[str, AspectSet]]) -> None:
    """Batch output: one ``pair_id<TAB>aspect<TAB>...`` line per pair."""
    for pair_id, aset in rows:
        fh.write("\t".join([pair_id, *aset.aspects]) + "\n")


def read_aspects_tsv(fh: TextIO) -> dict[str, tuple[str, ...]]:
    out = {}
    for line in fh:
        parts = line.rstrip("\r\n").split("\t")
        if parts and parts[0]:
            out[parts[0]] = tuple(p for p in parts[1:] if p)
    return out
