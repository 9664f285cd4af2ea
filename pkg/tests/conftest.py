import json

import pytest

from goldutil import REAL_FEED, read_gold
from vulnkg.labeling import Gazetteer


@pytest.fixture(scope="session")
def gaz():
    return Gazetteer.load()


@pytest.fixture(scope="session")
def gold_records():
    return read_gold()


@pytest.fixture(scope="session")
def real_feed_bytes():
    return REAL_FEED.read_bytes()


def make_item(cve_id="CVE-2022-0001", text="Limesurvey 5.4.15 allows XSS.", cwes=("CWE-79",),
              cpes=("cpe:2.3:a:limesurvey:limesurvey:5.4.15:*:*:*:*:*:*:*",), lang="en"):
    return {
        "cve": {
            "CVE_data_meta": {"ID": cve_id},
            "problemtype": {"problemtype_data": [{"description": [{"lang": "en", "value": c} for c in cwes]}]},
            "description": {"description_data": [{"lang": lang, "value": text}]},
        },
        "configurations": {"nodes": [{"operator": "OR", "children": [],
                                      "cpe_match": [{"vulnerable": True, "cpe23Uri": u} for u in cpes]}]},
    }


def feed(*items):
    return json.dumps({"CVE_Items": list(items)})


# acceptance verdict lines, printed together at the end of the run
VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Call as ``verdict(n, ok, detail)``; a test that never calls it records FAIL."""
    lines = request.config.stash[VERDICTS]
    called = []

    def record(n, ok, detail):
        called.append(n)
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((n, line))
        print(line)

    yield record
    if not called:
        lines.append((request.node.name, f"{request.node.name}: FAIL  (no verdict, test errored)"))


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda x: str(x[0]).zfill(3)):
            terminalreporter.write_line(line)
