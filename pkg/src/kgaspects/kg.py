"""Triple ingestion, the subsumption hierarchy and entity annotations.

Triples are read from flat TSV files or from a restricted N-Triples dialect
(IRI terms only, one statement per line).  Node and relation names are
interned to dense integer ids in first-seen order, so identical input bytes
always yield identical ids.

The ontology keeps, for every class, its reflexive-transitive ancestor set as
a bit-set (a Python ``int`` whose bit ``i`` marks class id ``i``).  Common
ancestry of two annotation sets is then a single bit-wise AND.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

import numpy as np

from .errors import AnnotationReferenceError, CycleError, NotFoundError, ParseError

SUBCLASS_OF = "subClassOf"
HAS_ANNOTATION = "hasAnnotation"

_NT_LINE = re.compile(r"^<([^<>\s]*)>\s+<([^<>\s]*)>\s+<([^<>\s]*)>\s*\.\s*$")


def iter_bits(mask: int) -> Iterator[int]:
    """Yield the positions of the set bits of ``mask`` in increasing order."""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass
class TripleStore:
    node_names: list[str] = field(default_factory=list)
    relation_names: list[str] = field(default_factory=list)
    triples: list[tuple[int, int, int]] = field(default_factory=list)
    node_index: dict[str, int] = field(default_factory=dict, repr=False)
    relation_index: dict[str, int] = field(default_factory=dict, repr=False)
    _seen: set = field(default_factory=set, repr=False)

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[str, str, str]]) -> "TripleStore":
        store = cls()
        for h, r, t in triples:
            store.add(h, r, t)
        return store

    def _node(self, name: str) -> int:
        idx = self.node_index.get(name)
        if idx is None:
            idx = self.node_index[name] = len(self.node_names)
            self.node_names.append(name)
        return idx

    def _relation(self, name: str) -> int:
        idx = self.relation_index.get(name)
        if idx is None:
            idx = self.relation_index[name] = len(self.relation_names)
            self.relation_names.append(name)
        return idx

    def add(self, head: str, relation: str, tail: str) -> bool:
        """Intern and append a triple; return False when it was a duplicate."""
        key = (self._node(head), self._relation(relation), self._node(tail))
        if key in self._seen:
            return False
        self._seen.add(key)
        self.triples.append(key)
        return True

    def extend(self, other: "TripleStore") -> "TripleStore":
        for h, r, t in other.named_triples():
            self.add(h, r, t)
        return self

    @property
    def nodes(self) -> set[str]:
        return set(self.node_names)

    @property
    def relations(self) -> set[str]:
        return set(self.relation_names)

    def __len__(self) -> int:
        return len(self.triples)

    def named_triples(self) -> Iterator[tuple[str, str, str]]:
        for h, r, t in self.triples:
            yield self.node_names[h], self.relation_names[r], self.node_names[t]

    def as_array(self) -> np.ndarray:
        """Triples as an ``(n, 3)`` int64 array of (head, relation, tail) ids."""
        return np.asarray(self.triples, dtype=np.int64).reshape(-1, 3)

    def write_tsv(self, fh: TextIO) -> None:
        for h, r, t in self.named_triples():
            fh.write(f"{h}\t{r}\t{t}\n")


def _as_lines(source) -> Iterable[str]:
    if isinstance(source, str):
        return io.StringIO(source)
    return source


def parse_triples(source, format: str = "tsv") -> TripleStore:
    """Parse a TSV or N-Triples stream (or string) into a deduplicated store.

    Blank lines and ``#`` comments are skipped.  A malformed line raises
    :class:`ParseError` carrying its 1-based line number.
    """
    if format not in ("tsv", "ntriples"):
        raise ValueError(f"unknown triple format {format!r}")
    store = TripleStore()
    for lineno, raw in enumerate(_as_lines(source), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if format == "tsv":
            parts = line.split("\t")
            if len(parts) != 3 or not all(parts):
                raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}", lineno)
        else:
            m = _NT_LINE.match(line.strip())
            if m is None:
                raise ParseError("expected '<iri> <iri> <iri> .'", lineno)
            parts = m.groups()
        store.add(*parts)
    return store


class OntologyGraph:
    """Immutable subsumption DAG with per-class ancestor bit-sets.

    Class ids are dense integers in the order classes first appear in the
    subclass triples of the source store.
    """

    def __init__(self, names: list[str], parents: list[tuple[int, ...]], closure: list[int]):
        self.names = names
        self.index = {n: i for i, n in enumerate(names)}
        self.parents = parents
        self.closure = closure
        self.closure_size = [c.bit_count() for c in closure]
        # number of classes each class subsumes (itself included)
        self.descendant_count = [0] * len(names)
        for mask in closure:
            for i in iter_bits(mask):
                self.descendant_count[i] += 1

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, cls: str) -> bool:
        return cls in self.index

    @property
    def classes(self) -> set[str]:
        return set(self.names)

    @property
    def roots(self) -> list[str]:
        return [n for n, ps in zip(self.names, self.parents) if not ps]

    def id_of(self, cls: str) -> int:
        try:
            return self.index[cls]
        except KeyError:
            raise NotFoundError(f"unknown ontology class {cls!r}") from None

    def mask_of(self, classes: Iterable[str]) -> int:
        """Union of the ancestor bit-sets of ``classes``."""
        mask = 0
        for c in classes:
            mask |= self.closure[self.id_of(c)]
        return mask

    def names_of(self, mask: int) -> list[str]:
        return [self.names[i] for i in iter_bits(mask)]

    def is_subclass(self, child: str, parent: str) -> bool:
        """Reflexive subsumption test ``child ⊑ parent``."""
        return bool(self.closure[self.id_of(child)] >> self.id_of(parent) & 1)


def build_ontology(store: TripleStore, subclass_relation: str = SUBCLASS_OF) -> OntologyGraph:
    """Build the class DAG from the ``subclass_relation`` triples of ``store``.

    Other relations are ignored here.  Raises :class:`CycleError` if the
    subclass edges contain a cycle (self-loops included).
    """
    if subclass_relation not in store.relation_index:
        raise NotFoundError(f"relation {subclass_relation!r} not present in triple store")
    rel = store.relation_index[subclass_relation]

    names: list[str] = []
    index: dict[str, int] = {}
    edges: list[tuple[int, int]] = []
    for h, r, t in store.triples:
        if r != rel:
            continue
        ids = []
        for node in (h, t):
            name = store.node_names[node]
            if name not in index:
                index[name] = len(names)
                names.append(name)
            ids.append(index[name])
        edges.append((ids[0], ids[1]))

    n = len(names)
    parent_lists: list[list[int]] = [[] for _ in range(n)]
    for child, parent in edges:
        if child == parent:
            raise CycleError(names[child])
        parent_lists[child].append(parent)

    # Iterative DFS over parent links; closure is finished in post-order so
    # every parent's set is complete before its children use it.
    closure = [0] * n
    state = [0] * n  # 0 new, 1 on stack, 2 done
    for start in range(n):
        if state[start]:
            continue
        stack = [(start, 0)]
        state[start] = 1
        while stack:
            node, i = stack[-1]
            ps = parent_lists[node]
            if i < len(ps):
                stack[-1] = (node, i + 1)
                p = ps[i]
                if state[p] == 1:
                    raise CycleError(names[p])
                if state[p] == 0:
                    state[p] = 1
                    stack.append((p, 0))
                continue
            mask = 1 << node
            for p in ps:
                mask |= closure[p]
            closure[node] = mask
            state[node] = 2
            stack.pop()

    return OntologyGraph(names, [tuple(ps) for ps in parent_lists], closure)


def ancestors(g: OntologyGraph, cls: str) -> set[str]:
    """Reflexive-transitive ancestors of ``cls`` (always contains ``cls``)."""
    return set(g.names_of(g.closure[g.id_of(cls)]))


class AnnotationMap:
    """Entity to ontology-class mapping; every entity has at least one class."""

    def __init__(self, entries: dict[str, frozenset[str]] | None = None):
        self.entries: dict[str, frozenset[str]] = dict(entries or {})

    def __getitem__(self, entity: str) -> frozenset[str]:
        try:
            return self.entries[entity]
        except KeyError:
            raise NotFoundError(f"entity {entity!r} has no annotations") from None

    def __contains__(self, entity: str) -> bool:
        return entity in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def triples(self, relation: str = HAS_ANNOTATION) -> Iterator[tuple[str, str, str]]:
        """Annotation assertions as (entity, relation, class) triples."""
        for entity, classes in self.entries.items():
            for cls in sorted(classes):
                yield entity, relation, cls


def load_annotations(source, g: OntologyGraph) -> AnnotationMap:
    """Read ``entity<TAB>class`` lines, validating every class against ``g``."""
    entries: dict[str, set[str]] = {}
    for lineno, raw in enumerate(_as_lines(source), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not all(parts):
            raise ParseError(f"expected 'entity<TAB>class', got {len(parts)} fields", lineno)
        entity, cls = parts
        if cls not in g:
            raise AnnotationReferenceError(f"class {cls!r} is not in the ontology", lineno)
        entries.setdefault(entity, set()).add(cls)
    return AnnotationMap({e: frozenset(cs) for e, cs in entries.items()})
