"""Parsing of NVD JSON 1.1 feeds into normalized CVE records."""

from __future__ import annotations

import gzip
import json
import logging
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

log = logging.getLogger(__name__)

CVE_ID_RE = re.compile(r"CVE-(\d{4})-\d{4,}")
CWE_ID_RE = re.compile(r"CWE-\d+")
CPE_PREFIX = "cpe:2.3:"
REJECT_MARKER = "** REJECT **"

PART_NAMES = {"a": "application", "o": "os", "h": "hardware"}
PART_CODES = {v: k for k, v in PART_NAMES.items()}


class FeedFormatError(ValueError):
    """Raised for a feed document that is not valid NVD JSON."""


class CpeFormatError(ValueError):
    pass


@dataclass(frozen=True)
class CpeEntry:
    part: str
    vendor: str
    product: str
    version: str = "*"

    def to_uri(self) -> str:
        fields = [_escape(f) for f in (self.vendor, self.product, self.version)]
        return CPE_PREFIX + ":".join([PART_CODES[self.part], *fields])


@dataclass
class CveRecord:
    cve_id: str
    description: str
    cwe_ids: list[str] = field(default_factory=list)
    cpes: list[CpeEntry] = field(default_factory=list)
    year: int = 0

    def __post_init__(self):
        m = CVE_ID_RE.fullmatch(self.cve_id)
        if m is None:
            raise ValueError(f"malformed CVE id {self.cve_id!r}")
        if not self.description.strip():
            raise ValueError(f"{self.cve_id}: empty description")
        if not self.year:
            self.year = int(m.group(1))
        elif self.year != int(m.group(1)):
            raise ValueError(f"{self.cve_id}: year {self.year} does not match id")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> "CveRecord":
        return cls(
            cve_id=d["cve_id"],
            description=d["description"],
            cwe_ids=list(d.get("cwe_ids", [])),
            cpes=[CpeEntry(**c) for c in d.get("cpes", [])],
            year=d.get("year", 0),
        )


@dataclass
class SkipReport:
    missing_id: int = 0
    rejected: int = 0
    no_english_description: int = 0

    @property
    def total(self) -> int:
        return self.missing_id + self.rejected + self.no_english_description

    def merge(self, other: "SkipReport") -> None:
        self.missing_id += other.missing_id
        self.rejected += other.rejected
        self.no_english_description += other.no_english_description


def _split_escaped(uri: str) -> list[str]:
    parts, buf, i = [], [], 0
    while i < len(uri):
        ch = uri[i]
        if ch == "\\" and i + 1 < len(uri):
            buf.append(uri[i + 1])
            i += 2
            continue
        if ch == ":":
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
        i += 1
    parts.append("".join(buf))
    return parts


def _escape(value: str) -> str:
    if value in ("*", "-"):
        return value
    return re.sub(r"([\\:])", r"\\\1", value)


def parse_cpe_uri(uri: str) -> CpeEntry:
    """Parse a CPE 2.3 formatted string into its part/vendor/product/version.

    Backslash-escaped characters are unescaped; missing trailing components
    default to the ``*`` wildcard.
    """
    if not uri.startswith(CPE_PREFIX):
        raise CpeFormatError(f"not a CPE 2.3 URI: {uri!r}")
    comps = _split_escaped(uri)
    if len(comps) < 6:
        raise CpeFormatError(f"too few components in CPE URI: {uri!r}")
    part_code = comps[2]
    if part_code not in PART_NAMES:
        raise CpeFormatError(f"unknown CPE part {part_code!r} in {uri!r}")
    version = comps[5] or "*"
    return CpeEntry(PART_NAMES[part_code], comps[3], comps[4], version)


def _iter_cpe_uris(nodes: Iterable[dict]) -> Iterator[str]:
    for node in nodes:
        for match in node.get("cpe_match", []):
            uri = match.get("cpe23Uri")
            if uri:
                yield uri
        yield from _iter_cpe_uris(node.get("children", []))


def _english_description(cve: dict) -> str | None:
    for entry in cve.get("description", {}).get("description_data", []):
        if entry.get("lang") == "en":
            return entry.get("value", "").strip()
    return None


def _cwe_ids(cve: dict) -> list[str]:
    out = []
    for pt in cve.get("problemtype", {}).get("problemtype_data", []):
        for d in pt.get("description", []):
            value = d.get("value", "")
            # NVD-CWE-Other / NVD-CWE-noinfo carry no class
            if CWE_ID_RE.fullmatch(value) and value not in out:
                out.append(value)
    return out


def parse_item(item: dict, skips: SkipReport) -> CveRecord | None:
    cve = item.get("cve", {})
    cve_id = cve.get("CVE_data_meta", {}).get("ID")
    if not cve_id or not CVE_ID_RE.fullmatch(cve_id):
        skips.missing_id += 1
        return None
    desc = _english_description(cve)
    if not desc:
        skips.no_english_description += 1
        return None
    if desc.startswith(REJECT_MARKER):
        skips.rejected += 1
        return None
    cpes = []
    for uri in _iter_cpe_uris(item.get("configurations", {}).get("nodes", [])):
        try:
            cpes.append(parse_cpe_uri(uri))
        except CpeFormatError:
            log.warning("%s: skipping bad CPE %s", cve_id, uri)
    return CveRecord(cve_id=cve_id, description=desc, cwe_ids=_cwe_ids(cve), cpes=cpes)


def parse_feed(feed_bytes: bytes | str, skips: SkipReport | None = None) -> list[CveRecord]:
    """Parse an NVD JSON 1.1 feed document (top-level ``CVE_Items``).

    Items without an ID, without an English description, or marked as
    rejected are skipped and counted in ``skips``.
    """
    if skips is None:
        skips = SkipReport()
    if isinstance(feed_bytes, bytes):
        feed_bytes = feed_bytes.decode("utf-8")
    try:
        doc = json.loads(feed_bytes)
    except json.JSONDecodeError as e:
        offset = len(feed_bytes[:e.pos].encode("utf-8"))
        raise FeedFormatError(f"malformed JSON at byte offset {offset}: {e.msg}") from e
    if not isinstance(doc, dict) or "CVE_Items" not in doc:
        raise FeedFormatError("missing top-level CVE_Items array")
    records = []
    for item in doc["CVE_Items"]:
        rec = parse_item(item, skips)
        if rec is not None:
            records.append(rec)
    return records


def read_feed_file(path: str | Path, skips: SkipReport | None = None) -> list[CveRecord]:
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix == ".gz":
        raw = gzip.decompress(raw)
    return parse_feed(raw, skips)


def feed_files(source: str | Path) -> list[Path]:
    source = Path(source)
    if source.is_file():
        return [source]
    return sorted(p for p in source.iterdir() if p.name.endswith((".json", ".json.gz")))


def ingest(source: str | Path, require_cpe: bool = False, require_cwe: bool = False) -> tuple[list[CveRecord], SkipReport]:
    """Read every feed under ``source``; records are deduplicated by CVE id (first wins)."""
    skips = SkipReport()
    seen, records = set(), []
    for path in feed_files(source):
        for rec in read_feed_file(path, skips):
            if rec.cve_id in seen:
                continue
            if (require_cpe and not rec.cpes) or (require_cwe and not rec.cwe_ids):
                continue
            seen.add(rec.cve_id)
            records.append(rec)
    return records, skips


def write_jsonl(records: Iterable[CveRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def read_jsonl(path: str | Path) -> list[CveRecord]:
    with open(path, encoding="utf-8") as fh:
        return [CveRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
