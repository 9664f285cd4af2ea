"""Knowledge-graph indexing, reverse augmentation and train/valid/test splits."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .relations import REVERSE_SUFFIX, Triple, read_triples, write_triples


@dataclass(frozen=True)
class KnowledgeGraph:
    entities: tuple[str, ...]
    relations: tuple[str, ...]
    triples: np.ndarray  # (n, 3) int64 rows of (head, relation, tail)

    def __post_init__(self):
        object.__setattr__(self, "_entity_ids", {e: i for i, e in enumerate(self.entities)})
        object.__setattr__(self, "_relation_ids", {r: i for i, r in enumerate(self.relations)})

    def __len__(self):
        return len(self.triples)

    def entity_id(self, name: str) -> int:
        try:
            return self._entity_ids[name]
        except KeyError:
            raise KeyError(f"unknown entity {name!r}") from None

    def relation_id(self, name: str) -> int:
        try:
            return self._relation_ids[name]
        except KeyError:
            raise KeyError(f"unknown relation {name!r}") from None

    def has_entity(self, name: str) -> bool:
        return name in self._entity_ids

    def encode(self, triples: Iterable[Triple]) -> np.ndarray:
        rows = [(self.entity_id(t.head), self.relation_id(t.relation), self.entity_id(t.tail)) for t in triples]
        return np.asarray(rows, dtype=np.int64).reshape(-1, 3)

    def decode(self, rows: np.ndarray) -> list[Triple]:
        return [Triple(self.entities[h], self.relations[r], self.entities[t]) for h, r, t in rows]

    def as_triples(self) -> list[Triple]:
        return self.decode(self.triples)

    def index_hash(self) -> str:
        h = hashlib.sha256()
        for name in (*self.entities, "\x00", *self.relations):
            h.update(name.encode("utf-8") + b"\n")
        return h.hexdigest()


def build_graph(triples: Iterable[Triple], entities: Iterable[str] = (), relations: Iterable[str] = ()) -> KnowledgeGraph:
    """Deduplicate and index triples; ids follow lexicographic order.

    Extra ``entities``/``relations`` are added to the indices even if no
    triple mentions them.
    """
    unique = sorted(set(triples))
    ents = sorted({*entities, *(t.head for t in unique), *(t.tail for t in unique)})
    rels = sorted({*relations, *(t.relation for t in unique)})
    e_ids = {e: i for i, e in enumerate(ents)}
    r_ids = {r: i for i, r in enumerate(rels)}
    rows = np.asarray([(e_ids[t.head], r_ids[t.relation], e_ids[t.tail]) for t in unique], dtype=np.int64)
    return KnowledgeGraph(tuple(ents), tuple(rels), rows.reshape(-1, 3))


@dataclass
class SplitSet:
    train: list[Triple]
    valid: list[Triple]
    test: list[Triple]

    def all(self) -> list[Triple]:
        return [*self.train, *self.valid, *self.test]

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.valid), len(self.test)


def reverse_relation(name: str) -> str:
    return name + REVERSE_SUFFIX


def _reverse_list(triples: Sequence[Triple]) -> list[Triple]:
    for t in triples:
        if t.relation.endswith(REVERSE_SUFFIX):
            raise ValueError(f"relation {t.relation!r} is already reversed; refusing to augment twice")
    return [*triples, *(Triple(t.tail, reverse_relation(t.relation), t.head) for t in triples)]


def augment_reverse(data):
    """Add ``(t, r_reverse, h)`` for every ``(h, r, t)``.

    Accepts a triple list, a :class:`KnowledgeGraph` or a :class:`SplitSet`
    and returns the same kind of object with exactly twice as many triples.
    """
    if isinstance(data, KnowledgeGraph):
        rels = [*data.relations, *(reverse_relation(r) for r in data.relations)]
        return build_graph(_reverse_list(data.as_triples()), data.entities, rels)
    if isinstance(data, SplitSet):
        return SplitSet(_reverse_list(data.train), _reverse_list(data.valid), _reverse_list(data.test))
    return _reverse_list(list(data))


def split_sizes(n: int, ratios: Sequence[float]) -> tuple[int, int, int]:
    n_valid = int(round(n * ratios[1]))
    n_test = int(round(n * ratios[2]))
    return n - n_valid - n_test, n_valid, n_test


def split_triples(kg: KnowledgeGraph | Sequence[Triple], ratios: Sequence[float] = (0.8, 0.1, 0.1),
                  seed: int = 0) -> SplitSet:
    """Uniform random partition of base triples into train/valid/test."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must be three non-negative numbers summing to 1, got {tuple(ratios)}")
    triples = kg.as_triples() if isinstance(kg, KnowledgeGraph) else sorted(set(kg))
    n_train, n_valid, _ = split_sizes(len(triples), ratios)
    perm = np.random.default_rng(seed).permutation(len(triples))
    picked = [triples[i] for i in perm]
    return SplitSet(
        sorted(picked[:n_train]),
        sorted(picked[n_train:n_train + n_valid]),
        sorted(picked[n_train + n_valid:]),
    )


def make_splits(triples: Sequence[Triple], ratios=(0.8, 0.1, 0.1), seed: int = 0,
                augment_before_split: bool = False) -> SplitSet:
    """Split then augment each split (default), or augment then split.

    Augmenting first reproduces the literal ordering but lets the reverse of
    a test triple land in train.
    """
    if augment_before_split:
        return split_triples(augment_reverse(sorted(set(triples))), ratios, seed)
    return augment_reverse(split_triples(triples, ratios, seed))


def save_split(splits: SplitSet, directory: str | Path) -> KnowledgeGraph:
    """Write ``train/valid/test.tsv`` plus ``entities.tsv``/``relations.tsv``.

    Returns the graph over all split triples, whose indices were written.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", splits.train), ("valid", splits.valid), ("test", splits.test)):
        write_triples(part, directory / f"{name}.tsv")
    kg = build_graph(splits.all())
    _write_index(kg.entities, directory / "entities.tsv")
    _write_index(kg.relations, directory / "relations.tsv")
    return kg


def _write_index(names: Sequence[str], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, name in enumerate(names):
            fh.write(f"{i}\t{name}\n")


def _read_index(path: Path) -> list[str]:
    names = []
    with open(path, encoding="utf-8") as fh:
        for expected, line in enumerate(fh):
            idx, name = line.rstrip("\n").split("\t", 1)
            if int(idx) != expected:
                raise ValueError(f"{path}: index ids are not dense at line {expected + 1}")
            names.append(name)
    return names


def load_split(directory: str | Path) -> tuple[SplitSet, KnowledgeGraph]:
    directory = Path(directory)
    splits = SplitSet(*(read_triples(directory / f"{n}.tsv") for n in ("train", "valid", "test")))
    entities = _read_index(directory / "entities.tsv")
    relations = _read_index(directory / "relations.tsv")
    kg = build_graph(splits.all(), entities, relations)
    if list(kg.entities) != entities or list(kg.relations) != relations:
        raise ValueError(f"{directory}: index files do not match the split triples")
    return splits, kg
