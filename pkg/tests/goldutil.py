"""Reader for the hand-labeled fixture ``fixtures/real50_gold.tsv``.

Each data row is ``cve_id, cwe list, cpe uris, annotated description`` where
gold entities are marked inline as ``[surface|V]``, ``[surface|P]`` or
``[surface|VER]``.
"""

import re
from dataclasses import dataclass
from pathlib import Path

from vulnkg.synthetic import _item

FIXTURES = Path(__file__).parent / "fixtures"
GOLD_TSV = FIXTURES / "real50_gold.tsv"
REAL_FEED = FIXTURES / "real50_feed.json"

MARK_RE = re.compile(r"\[([^\[\]|]+)\|(V|P|VER)\]")
MARK_DOMAIN = {"V": "VENDOR", "P": "PRODUCT", "VER": "VERSION"}


@dataclass
class GoldRecord:
    cve_id: str
    cwe_values: list
    cpe_uris: list
    description: str
    spans: list  # (start, end, domain) character spans

    def domain_at(self, start, end):
        for s, e, d in self.spans:
            if start >= s and end <= e:
                return d
        return "NONE"


def strip_markup(annotated):
    text, spans, last = "", [], 0
    for m in MARK_RE.finditer(annotated):
        text += annotated[last:m.start()]
        begin = len(text)
        text += m.group(1)
        spans.append((begin, len(text), MARK_DOMAIN[m.group(2)]))
        last = m.end()
    return text + annotated[last:], spans


def read_gold(path=GOLD_TSV):
    out = []
    for line in Path(path).read_text("utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        cve_id, cwes, cpes, annotated = line.split("\t")
        text, spans = strip_markup(annotated)
        out.append(GoldRecord(cve_id, cwes.split(","), cpes.split(), text, spans))
    return out


def gold_items(records):
    """NVD 1.1 items for the gold records; long CPE lists go in child nodes."""
    items = []
    for rec in records:
        year = int(rec.cve_id[4:8])
        item = _item(rec.cve_id, rec.description, rec.cwe_values, rec.cpe_uris, year)
        if len(rec.cpe_uris) > 2:
            matches = item["configurations"]["nodes"][0]["cpe_match"]
            item["configurations"]["nodes"] = [{
                "operator": "OR", "cpe_match": matches[:1],
                "children": [{"operator": "OR", "children": [], "cpe_match": matches[1:]}],
            }]
        items.append(item)
    return items
