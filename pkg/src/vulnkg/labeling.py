"""Distant-supervision labeling of CVE descriptions.

Three labeling functions produce IOB + domain tags for description tokens:
CPE metadata matching, version-phrase regexes and a phrase gazetteer.
``label_record`` merges them with priority CPE > gazetteer > regex.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .nvd_ingest import CpeEntry, CveRecord

VENDOR = "VENDOR"
PRODUCT = "PRODUCT"
VERSION = "VERSION"
RELEVANT_TERM = "RELEVANT_TERM"
NONE = "NONE"
DOMAINS = (VENDOR, PRODUCT, VERSION, RELEVANT_TERM)

VERSION_RE = re.compile(r"\d+(\.[0-9a-zA-Z_-]+)*")
WILDCARD_VERSION_RE = re.compile(r"\d+\.x")
DEFAULT_CUE_WORDS = frozenset(
    {"before", "after", "through", "prior", "to", "earlier", "and", "up", "versions", "version"}
)
UNCONDITIONAL_DOTS = 2
PUNCT = frozenset(string.punctuation)

# equal-length CPE matches resolve in this order
_CPE_DOMAIN_RANK = {PRODUCT: 0, VENDOR: 1, VERSION: 2}


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class LabeledToken:
    token: Token
    iob: str = "O"
    domain: str = NONE

    @property
    def tag(self) -> str:
        return "O" if self.iob == "O" else f"{self.iob}-{self.domain}"


@dataclass
class Gazetteer:
    phrases: set[str] = field(default_factory=set)

    def __post_init__(self):
        self.phrases = {" ".join(p.lower().split()) for p in self.phrases}
        self.phrases.discard("")
        self._by_first: dict[str, list[tuple[str, ...]]] = {}
        for p in self.phrases:
            toks = tuple(p.split())
            self._by_first.setdefault(toks[0], []).append(toks)
        for cands in self._by_first.values():
            cands.sort(key=lambda t: (-len(t), t))

    def candidates(self, first: str) -> list[tuple[str, ...]]:
        return self._by_first.get(first, [])

    def __len__(self):
        return len(self.phrases)

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Gazetteer":
        phrases = set()
        for line in lines:
            line = line.split("#", 1)[0].strip()
            if line:
                phrases.add(line)
        return cls(phrases)

    @classmethod
    def load(cls, path: str | Path | None = None) -> "Gazetteer":
        """Load a phrase file; ``None`` loads the bundled starter gazetteer."""
        if path is None:
            text = resources.files("vulnkg").joinpath("data/gazetteer.txt").read_text("utf-8")
        else:
            text = Path(path).read_text("utf-8")
        return cls.from_lines(text.splitlines())


DEFAULT_PRIORITY = ("cpe", "gazetteer", "regex")


@dataclass(frozen=True)
class LabelingConfig:
    cue_words: frozenset[str] = DEFAULT_CUE_WORDS
    unconditional_dots: int = UNCONDITIONAL_DOTS
    priority: tuple[str, ...] = DEFAULT_PRIORITY

    def __post_init__(self):
        if sorted(self.priority) != sorted(DEFAULT_PRIORITY):
            raise ValueError(f"priority must order exactly {DEFAULT_PRIORITY}, got {tuple(self.priority)}")


def tokenize(text: str) -> list[Token]:
    """Whitespace tokenization with leading/trailing punctuation split off.

    Internal punctuation is kept (``index.php``, ``Cross-site``); a
    version-shaped prefix keeps trailing ``-``/``_`` characters that the
    version pattern admits.
    """
    tokens = []
    for m in re.finditer(r"\S+", text):
        chunk, base = m.group(), m.start()
        lo, hi = 0, len(chunk)
        while lo < hi and chunk[lo] in PUNCT:
            tokens.append(Token(chunk[lo], base + lo, base + lo + 1))
            lo += 1
        tail = []
        vm = VERSION_RE.match(chunk, lo)
        if vm and all(c in PUNCT for c in chunk[vm.end():hi]):
            core_end = vm.end()
        else:
            core_end = hi
            while core_end > lo and chunk[core_end - 1] in PUNCT:
                core_end -= 1
        if core_end > lo:
            tokens.append(Token(chunk[lo:core_end], base + lo, base + core_end))
        for i in range(core_end, hi):
            tail.append(Token(chunk[i], base + i, base + i + 1))
        tokens.extend(tail)
    return tokens


def _phrase_tokens(value: str) -> tuple[str, ...]:
    return tuple(value.replace("_", " ").lower().split())


def _spans_to_labels(tokens: Sequence[Token], spans: Iterable[tuple[int, int, str]]) -> list[LabeledToken]:
    out = [LabeledToken(t) for t in tokens]
    for start, end, domain in spans:
        out[start] = LabeledToken(tokens[start], "B", domain)
        for i in range(start + 1, end):
            out[i] = LabeledToken(tokens[i], "I", domain)
    return out


def _greedy_match(lowered: Sequence[str], lookup, blocked: Sequence[bool]) -> list[tuple[int, int, str]]:
    """Longest-first, left-to-right non-overlapping matching.

    ``lookup(first_token)`` yields ``(phrase_tokens, domain)`` candidates
    already ordered by preference.
    """
    spans, i, n = [], 0, len(lowered)
    while i < n:
        if blocked[i]:
            i += 1
            continue
        hit = None
        for phrase, domain in lookup(lowered[i]):
            end = i + len(phrase)
            if end <= n and tuple(lowered[i:end]) == phrase and not any(blocked[i:end]):
                hit = (i, end, domain)
                break
        if hit:
            spans.append(hit)
            i = hit[1]
        else:
            i += 1
    return spans


def _cpe_spans(tokens, cpes, blocked):
    table: dict[str, set[tuple[tuple[str, ...], str]]] = {}

    def add(value: str, domain: str):
        phrase = _phrase_tokens(value)
        if phrase:
            table.setdefault(phrase[0], set()).add((phrase, domain))

    for cpe in cpes:
        add(cpe.vendor, VENDOR)
        add(cpe.product, PRODUCT)
        if cpe.version not in ("*", "-"):
            # versions match a single token exactly, no underscore folding
            table.setdefault(cpe.version.lower(), set()).add(((cpe.version.lower(),), VERSION))
    ordered = {
        k: sorted(v, key=lambda pd: (-len(pd[0]), _CPE_DOMAIN_RANK[pd[1]], pd[0])) for k, v in table.items()
    }
    lowered = [t.text.lower() for t in tokens]
    return _greedy_match(lowered, lambda w: ordered.get(w, ()), blocked)


def _gazetteer_spans(tokens, gaz: Gazetteer, blocked):
    lowered = [t.text.lower() for t in tokens]
    return _greedy_match(lowered, lambda w: [(p, RELEVANT_TERM) for p in gaz.candidates(w)], blocked)


def is_version_shaped(text: str) -> bool:
    return bool(VERSION_RE.fullmatch(text) and "." in text) or bool(WILDCARD_VERSION_RE.fullmatch(text))


def _regex_spans(tokens, blocked, config: LabelingConfig):
    spans = []
    lowered = [t.text.lower() for t in tokens]
    for i, tok in enumerate(tokens):
        if blocked[i] or not is_version_shaped(tok.text):
            continue
        if tok.text.count(".") >= config.unconditional_dots:
            spans.append((i, i + 1, VERSION))
            continue
        neighbours = lowered[max(i - 1, 0):i] + lowered[i + 1:i + 2]
        if any(w in config.cue_words for w in neighbours):
            spans.append((i, i + 1, VERSION))
    return spans


def label_with_cpe(tokens: Sequence[Token], cpes: Sequence[CpeEntry]) -> list[LabeledToken]:
    return _spans_to_labels(tokens, _cpe_spans(tokens, cpes, [False] * len(tokens)))


def label_with_regex(tokens: Sequence[Token], config: LabelingConfig = LabelingConfig()) -> list[LabeledToken]:
    return _spans_to_labels(tokens, _regex_spans(tokens, [False] * len(tokens), config))


def label_with_gazetteer(tokens: Sequence[Token], gaz: Gazetteer) -> list[LabeledToken]:
    return _spans_to_labels(tokens, _gazetteer_spans(tokens, gaz, [False] * len(tokens)))


def label_record(record: CveRecord, gaz: Gazetteer, config: LabelingConfig = LabelingConfig()) -> list[LabeledToken]:
    """Label a record's description with all three labelers.

    Labelers run in ``config.priority`` order (CPE > gazetteer > regex by
    default). Tokens claimed by a higher-priority labeler are blocked for the lower
    ones, so spans never overlap and IOB stays well-formed.
    """
    tokens = tokenize(record.description)
    blocked = [False] * len(tokens)
    spans = []
    stages = {
        "cpe": lambda b: _cpe_spans(tokens, record.cpes, b),
        "gazetteer": lambda b: _gazetteer_spans(tokens, gaz, b),
        "regex": lambda b: _regex_spans(tokens, b, config),
    }
    for name in config.priority:
        found = stages[name](blocked)
        for start, end, _ in found:
            for i in range(start, end):
                blocked[i] = True
        spans.extend(found)
    return _spans_to_labels(tokens, spans)


def check_well_formed(labels: Sequence[LabeledToken]) -> None:
    """Raise ``ValueError`` unless the sequence satisfies the IOB invariants."""
    prev = None
    for i, lt in enumerate(labels):
        if (lt.iob == "O") != (lt.domain == NONE):
            raise ValueError(f"token {i}: iob {lt.iob} inconsistent with domain {lt.domain}")
        if lt.iob == "I" and (prev is None or prev.iob == "O" or prev.domain != lt.domain):
            raise ValueError(f"token {i}: I-{lt.domain} does not continue an entity")
        prev = lt


# CoNLL-style corpus I/O: token<TAB>IOB<TAB>DOMAIN, blank line between descriptions.
# A "# id" comment line carries the CVE id of each block.

def write_conll(sentences: Iterable[tuple[str, Sequence[LabeledToken]]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for cve_id, labels in sentences:
            fh.write(f"# {cve_id}\n")
            for lt in labels:
                fh.write(f"{lt.token.text}\t{lt.iob}\t{lt.domain}\n")
            fh.write("\n")


def read_conll(path: str | Path) -> list[tuple[str, list[LabeledToken]]]:
    """Read a CoNLL corpus. Offsets are reconstructed assuming single spaces."""
    out, cur, cur_id, pos = [], [], "", 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# ") and not cur:
                cur_id = line[2:]
                continue
            if not line:
                if cur or cur_id:
                    out.append((cur_id, cur))
                cur, cur_id, pos = [], "", 0
                continue
            text, iob, domain = line.split("\t")
            cur.append(LabeledToken(Token(text, pos, pos + len(text)), iob, domain))
            pos += len(text) + 1
    if cur or cur_id:
        out.append((cur_id, cur))
    return out
