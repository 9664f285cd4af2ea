"""Entity assembly and ontology-driven relation extraction."""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .labeling import NONE, PRODUCT, RELEVANT_TERM, VENDOR, VERSION, LabeledToken, check_well_formed

CVE = "CVE"
CWE = "CWE"
ENTITY_TYPES = (VENDOR, PRODUCT, VERSION, RELEVANT_TERM, CVE, CWE)
TEXT_TYPES = (VENDOR, PRODUCT, VERSION, RELEVANT_TERM)

# graph identity namespaces; CVE and CWE ids are self-typed
NAMESPACES = {VENDOR: "vendor", PRODUCT: "product", VERSION: "version", RELEVANT_TERM: "term"}
_TYPE_BY_NAMESPACE = {v: k for k, v in NAMESPACES.items()}

REVERSE_SUFFIX = "_reverse"


@dataclass(frozen=True)
class EntitySpan:
    surface: str
    domain: str
    cve_id: str
    position: int

    @property
    def node(self) -> str:
        if self.domain in (CVE, CWE):
            return self.surface
        return f"{NAMESPACES[self.domain]}:{self.surface}"


@dataclass(frozen=True, order=True)
class Triple:
    head: str
    relation: str
    tail: str

    def __post_init__(self):
        if not (self.head and self.relation and self.tail):
            raise ValueError(f"triple has an empty component: {self!r}")


@dataclass(frozen=True)
class Ontology:
    edges: frozenset[tuple[str, str, str]]

    def __post_init__(self):
        seen = {}
        for head, rel, tail in self.edges:
            if (head, tail) in seen:
                raise ValueError(f"two relations ({seen[(head, tail)]}, {rel}) between {head} and {tail}")
            if head not in ENTITY_TYPES or tail not in ENTITY_TYPES:
                raise ValueError(f"unknown entity type in edge ({head}, {rel}, {tail})")
            seen[(head, tail)] = rel

    @classmethod
    def default(cls) -> "Ontology":
        return cls(DEFAULT_EDGES)

    @classmethod
    def from_list(cls, edges: Iterable[Sequence[str]]) -> "Ontology":
        return cls(frozenset(tuple(e) for e in edges))

    def relation_types(self) -> dict[str, tuple[str, str]]:
        return {rel: (head, tail) for head, rel, tail in self.edges}


DEFAULT_EDGES = frozenset({
    (VENDOR, "has_product", PRODUCT),
    (PRODUCT, "has_version", VERSION),
    (CVE, "has_weakness", CWE),
    (CVE, "has_vendor", VENDOR),
    (CVE, "affects_product", PRODUCT),
    (CVE, "affects_version", VERSION),
    (RELEVANT_TERM, "describes", CVE),
})


def entity_type(node: str) -> str:
    """Recover the entity type from a graph node name."""
    if node.startswith("CVE-"):
        return CVE
    if node.startswith("CWE-"):
        return CWE
    ns = node.split(":", 1)[0]
    if ns not in _TYPE_BY_NAMESPACE:
        raise ValueError(f"node {node!r} has no known type namespace")
    return _TYPE_BY_NAMESPACE[ns]


def assemble_entities(labeled: Sequence[LabeledToken], cve_id: str, cwe_ids: Sequence[str] = ()) -> list[EntitySpan]:
    """Group B(I)* runs into spans; add the record's CVE and CWE spans."""
    check_well_formed(labeled)
    spans = [EntitySpan(cve_id, CVE, cve_id, -1)]
    spans += [EntitySpan(cwe, CWE, cve_id, -1) for cwe in dict.fromkeys(cwe_ids)]
    start = None
    for i, lt in enumerate([*labeled, None]):
        if start is not None and (lt is None or lt.iob != "I"):
            words = [t.token.text for t in labeled[start:i]]
            spans.append(EntitySpan(" ".join(words).lower(), labeled[start].domain, cve_id, start))
            start = None
        if lt is not None and lt.iob == "B" and lt.domain != NONE:
            start = i
    return spans


def extract_triples(spans: Sequence[EntitySpan], ontology: Ontology | None = None) -> list[Triple]:
    """Create the relations the ontology allows between one record's spans.

    Textual types are linked by word order: each tail span attaches to the
    nearest preceding head span. CVE-anchored edges connect the record's CVE
    span to every span of the other type.
    """
    ontology = ontology or Ontology.default()
    by_type: dict[str, list[EntitySpan]] = {t: [] for t in ENTITY_TYPES}
    for s in spans:
        by_type[s.domain].append(s)
    for group in by_type.values():
        group.sort(key=lambda s: (s.position, s.surface))

    out: dict[Triple, None] = {}
    for head_t, rel, tail_t in sorted(ontology.edges):
        if head_t == CVE or tail_t == CVE:
            anchors, others = (by_type[head_t], by_type[tail_t]) if head_t == CVE else (by_type[tail_t], by_type[head_t])
            for a in anchors:
                for o in others:
                    pair = (a, o) if head_t == CVE else (o, a)
                    out[Triple(pair[0].node, rel, pair[1].node)] = None
            continue
        heads = by_type[head_t]
        for tail in by_type[tail_t]:
            preceding = [h for h in heads if h.position < tail.position]
            if preceding:
                out[Triple(preceding[-1].node, rel, tail.node)] = None
    return sorted(out)


def record_triples(labeled: Sequence[LabeledToken], cve_id: str, cwe_ids: Sequence[str],
                   ontology: Ontology | None = None) -> list[Triple]:
    return extract_triples(assemble_entities(labeled, cve_id, cwe_ids), ontology)


def merge_triples(groups: Iterable[Iterable[Triple]]) -> list[Triple]:
    merged = set()
    for g in groups:
        merged.update(g)
    return sorted(merged)


def write_triples(triples: Iterable[Triple], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in triples:
            fh.write(f"{t.head}\t{t.relation}\t{t.tail}\n")


def read_triples(path: str | Path) -> list[Triple]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line:
                out.append(Triple(*line.split("\t")))
    return out


def sample_for_validation(triples: Sequence[Triple], n: int, seed: int = 0) -> list[Triple]:
    """Uniform sample without replacement, reproducible under ``seed``."""
    if n > len(triples):
        raise ValueError(f"cannot sample {n} triples from {len(triples)}")
    if n < 0:
        raise ValueError("sample size must be non-negative")
    return random.Random(seed).sample(list(triples), n)


def write_review_sheet(sample: Iterable[Triple], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("head\trelation\ttail\tverdict\n")
        for t in sample:
            fh.write(f"{t.head}\t{t.relation}\t{t.tail}\t\n")


CORRECT = {"1", "y", "yes", "true", "correct", "ok"}
INCORRECT = {"0", "n", "no", "false", "incorrect", "wrong"}


@dataclass
class ReviewScore:
    precision: float | None
    correct: int
    judged: int
    unjudged: int


def score_review_sheet(path: str | Path) -> ReviewScore:
    """Precision over the rows of a filled review sheet that carry a verdict."""
    correct = judged = unjudged = 0
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t", quoting=csv.QUOTE_NONE)
        for row in reader:
            verdict = (row.get("verdict") or "").strip().lower()
            if verdict in CORRECT:
                correct += 1
                judged += 1
            elif verdict in INCORRECT:
                judged += 1
            elif verdict == "":
                unjudged += 1
            else:
                raise ValueError(f"unrecognised verdict {verdict!r}")
    return ReviewScore(correct / judged if judged else None, correct, judged, unjudged)
