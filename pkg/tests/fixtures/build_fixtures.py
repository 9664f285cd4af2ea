"""Regenerate the JSON fixture feeds from the gold TSV.

    python3 tests/fixtures/build_fixtures.py

Writes ``tests/fixtures/real50_feed.json`` and the bundled 100-record feed
(50 hand-labeled records followed by 50 synthetic ones).
"""

import json
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

from goldutil import REAL_FEED, gold_items, read_gold  # noqa: E402
from vulnkg.synthetic import generate_items, make_feed  # noqa: E402

BUNDLED = HERE.parent.parent / "src" / "vulnkg" / "data" / "nvd_fixture_100.json"


def main():
    real = gold_items(read_gold())
    REAL_FEED.write_text(json.dumps(make_feed(real), indent=1) + "\n", encoding="utf-8")
    synth = generate_items(50, seed=2023)
    BUNDLED.write_text(json.dumps(make_feed(real + synth), indent=1) + "\n", encoding="utf-8")
    print(f"wrote {REAL_FEED} and {BUNDLED}")


if __name__ == "__main__":
    main()
