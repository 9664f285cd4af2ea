import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vulnkg.labeling import (
    DEFAULT_PRIORITY, NONE, Gazetteer, LabeledToken, LabelingConfig, Token, check_well_formed, label_record,
    label_with_cpe, label_with_gazetteer, label_with_regex, read_conll, tokenize, write_conll,
)
from vulnkg.nvd_ingest import CpeEntry, CveRecord


def texts(tokens):
    return [t.text for t in tokens]


def tags(labels):
    return [lt.tag for lt in labels]


def toks(*words):
    out, pos = [], 0
    for w in words:
        out.append(Token(w, pos, pos + len(w)))
        pos += len(w) + 1
    return out


# --- tokenize

def test_tokenize_version_then_period():
    assert texts(tokenize("before 2.5.")) == ["before", "2.5", "."]


def test_tokenize_empty():
    assert tokenize("") == []
    assert tokenize("   \n") == []


def test_tokenize_limesurvey_regression():
    text = "Limesurvey 5.4.15 allows XSS."
    got = tokenize(text)
    assert texts(got) == ["Limesurvey", "5.4.15", "allows", "XSS", "."]
    assert [(t.start, t.end) for t in got] == [(0, 10), (11, 17), (18, 24), (25, 28), (28, 29)]


def test_tokenize_splits_surrounding_punctuation():
    assert texts(tokenize('("Sudo") 1.8.x-beta, (foo)')) == ["(", '"', "Sudo", '"', ")", "1.8.x-beta", ",", "(", "foo", ")"]


@given(st.text(alphabet=st.sampled_from("ab1.2-,;() \t\"'x"), max_size=40))
def test_tokenize_offsets_index_original(text):
    got = tokenize(text)
    prev_end = 0
    for t in got:
        assert t.start < t.end
        assert t.start >= prev_end
        assert text[t.start:t.end] == t.text
        prev_end = t.end


# --- CPE labeler

def test_cpe_limesurvey():
    cpe = CpeEntry("application", "limesurvey", "limesurvey", "5.4.15")
    assert tags(label_with_cpe(tokenize("Limesurvey 5.4.15"), [cpe])) == ["B-PRODUCT", "B-VERSION"]


def test_cpe_no_entries_all_outside():
    labels = label_with_cpe(tokenize("Limesurvey 5.4.15"), [])
    assert all(lt.iob == "O" and lt.domain == NONE for lt in labels)


def test_cpe_underscores_become_spaces():
    cpe = CpeEntry("os", "red_hat", "enterprise_linux", "8.0")
    assert tags(label_with_cpe(toks("Red", "Hat"), [cpe])) == ["B-VENDOR", "I-VENDOR"]
    assert tags(label_with_cpe(tokenize("Red Hat Enterprise Linux 8.0"), [cpe])) == \
        ["B-VENDOR", "I-VENDOR", "B-PRODUCT", "I-PRODUCT", "B-VERSION"]


def test_cpe_wildcard_versions_never_label():
    cpes = [CpeEntry("application", "x", "y", "*"), CpeEntry("application", "x", "y", "-")]
    assert tags(label_with_cpe(toks("*", "-", "y"), cpes)) == ["O", "O", "B-PRODUCT"]


def test_cpe_longest_match_wins():
    cpes = [CpeEntry("application", "apache", "http_server", "*"), CpeEntry("application", "apache", "http", "*")]
    assert tags(label_with_cpe(toks("Apache", "HTTP", "Server"), cpes)) == ["B-VENDOR", "B-PRODUCT", "I-PRODUCT"]


# --- regex labeler

def test_regex_before_cue():
    assert tags(label_with_regex(toks("before", "2.5"))) == ["O", "B-VERSION"]


def test_regex_plain_integer_ignored():
    assert tags(label_with_regex(toks("port", "8080"))) == ["O", "O"]


def test_regex_two_dots_unconditional():
    assert tags(label_with_regex(toks("5.4.15"))) == ["B-VERSION"]


def test_regex_wildcard_version_with_cue():
    assert tags(label_with_regex(toks("2.3.x", "before", "2.3.32"))) == ["B-VERSION", "O", "B-VERSION"]
    assert tags(label_with_regex(toks("versions", "8.x"))) == ["O", "B-VERSION"]
    assert tags(label_with_regex(toks("uses", "8.x"))) == ["O", "O"]


def test_regex_single_dot_needs_cue():
    assert tags(label_with_regex(toks("uses", "1.5", "today"))) == ["O", "O", "O"]
    assert tags(label_with_regex(toks("1.5", "and", "earlier"))) == ["B-VERSION", "O", "O"]


def test_regex_config_overrides():
    cfg = LabelingConfig(cue_words=frozenset({"uses"}), unconditional_dots=3)
    assert tags(label_with_regex(toks("uses", "1.5", "5.4.15"), cfg)) == ["O", "B-VERSION", "O"]


def test_regex_unconditional_matches_gold_versions(gold_records):
    """Standalone >=2-dot tokens in the hand-labeled records are nearly always gold versions."""
    hits = agree = 0
    for rec in gold_records:
        tokens = tokenize(rec.description)
        for lt in label_with_regex(tokens, LabelingConfig(cue_words=frozenset())):
            if lt.domain == "VERSION":
                hits += 1
                agree += rec.domain_at(lt.token.start, lt.token.end) == "VERSION"
    assert hits > 50
    assert agree / hits >= 0.95


# --- gazetteer labeler

def test_gazetteer_execute_arbitrary_code():
    gaz = Gazetteer({"execute arbitrary code"})
    assert tags(label_with_gazetteer(toks("execute", "arbitrary", "code"), gaz)) == \
        ["B-RELEVANT_TERM", "I-RELEVANT_TERM", "I-RELEVANT_TERM"]


def test_gazetteer_empty():
    assert tags(label_with_gazetteer(toks("execute", "arbitrary", "code"), Gazetteer())) == ["O"] * 3


def test_gazetteer_longest_first():
    gaz = Gazetteer({"denial of", "denial of service"})
    assert tags(label_with_gazetteer(toks("denial", "of", "service"), gaz)) == \
        ["B-RELEVANT_TERM", "I-RELEVANT_TERM", "I-RELEVANT_TERM"]


def test_gazetteer_case_insensitive_non_overlapping():
    gaz = Gazetteer({"SQL injection", "injection attack"})
    assert tags(label_with_gazetteer(toks("sql", "Injection", "attack"), gaz)) == \
        ["B-RELEVANT_TERM", "I-RELEVANT_TERM", "O"]


def test_gazetteer_file_format(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# outcomes\nExecute  Arbitrary Code\n\ncross-site scripting  # inline comment\n")
    assert Gazetteer.load(p).phrases == {"execute arbitrary code", "cross-site scripting"}


def test_bundled_gazetteer():
    gaz = Gazetteer.load()
    assert 90 <= len(gaz) <= 200
    assert "execute arbitrary code" in gaz.phrases


# --- label_record

def test_record_cpe_version_over_regex(gaz):
    rec = CveRecord("CVE-2022-0001", "Foo before 2.5 allows XSS.", cpes=[CpeEntry("application", "bar", "foo", "2.5")])
    labels = label_record(rec, gaz)
    assert tags(labels)[:3] == ["B-PRODUCT", "O", "B-VERSION"]


def test_record_empty_description(gaz):
    rec = CveRecord("CVE-2022-0001", "x")
    rec.description = ""
    assert label_record(rec, gaz) == []


def test_record_priority_can_be_reordered():
    rec = CveRecord("CVE-2022-0001", "remote code execution", cpes=[CpeEntry("application", "remote", "code", "*")])
    gaz = Gazetteer({"remote code execution"})
    assert tags(label_record(rec, gaz))[:2] == ["B-VENDOR", "B-PRODUCT"]
    cfg = LabelingConfig(priority=("gazetteer", "cpe", "regex"))
    assert tags(label_record(rec, gaz, cfg)) == ["B-RELEVANT_TERM", "I-RELEVANT_TERM", "I-RELEVANT_TERM"]
    with pytest.raises(ValueError):
        LabelingConfig(priority=("cpe", "regex"))
    assert DEFAULT_PRIORITY == ("cpe", "gazetteer", "regex")


def test_check_well_formed_rejects_bad_sequences():
    t = Token("a", 0, 1)
    with pytest.raises(ValueError):
        check_well_formed([LabeledToken(t, "I", "PRODUCT")])
    with pytest.raises(ValueError):
        check_well_formed([LabeledToken(t, "B", "PRODUCT"), LabeledToken(t, "I", "VENDOR")])
    with pytest.raises(ValueError):
        check_well_formed([LabeledToken(t, "O", "PRODUCT")])
    with pytest.raises(ValueError):
        check_well_formed([LabeledToken(t, "B", NONE)])


WORDS = ["Apache", "HTTP", "Server", "Red", "Hat", "before", "2.5", "1.2.3", "8.x", "and", "earlier", "allows",
         "execute", "arbitrary", "code", "denial", "of", "service", "SQL", "injection", ",", ".", "via", "version"]
CPE_PARTS = ["apache", "http_server", "red_hat", "http", "server", "code", "2.5", "1.2.3", "*", "injection"]


@st.composite
def records(draw):
    words = draw(st.lists(st.sampled_from(WORDS), min_size=1, max_size=25))
    cpes = draw(st.lists(st.tuples(st.sampled_from(CPE_PARTS), st.sampled_from(CPE_PARTS),
                                   st.sampled_from(CPE_PARTS)), max_size=4))
    return CveRecord("CVE-2020-1234", " ".join(words), cpes=[CpeEntry("application", *c) for c in cpes])


@settings(max_examples=150)
@given(records())
def test_label_record_always_well_formed(rec):
    labels = label_record(rec, Gazetteer.load())
    check_well_formed(labels)
    assert [lt.token for lt in labels] == tokenize(rec.description)


@settings(max_examples=100)
@given(records(), st.sets(st.sampled_from([w.lower() for w in WORDS] + ["apache http", "red hat", "before 2.5"]),
                          max_size=5))
def test_adding_gazetteer_phrases_keeps_cpe_labels(rec, extra):
    base = Gazetteer({"execute arbitrary code"})
    bigger = Gazetteer(base.phrases | extra)
    cpe_only = label_with_cpe(tokenize(rec.description), rec.cpes)
    before, after = label_record(rec, base), label_record(rec, bigger)
    for c, b, a in zip(cpe_only, before, after):
        if c.iob != "O":
            assert a == b == c


@settings(max_examples=50)
@given(rec=records())
def test_label_record_deterministic(rec, tmp_path_factory):
    gaz = Gazetteer.load()
    d = tmp_path_factory.mktemp("det")
    write_conll([(rec.cve_id, label_record(rec, gaz))], d / "a.conll")
    write_conll([(rec.cve_id, label_record(rec, gaz))], d / "b.conll")
    assert (d / "a.conll").read_bytes() == (d / "b.conll").read_bytes()


def test_conll_round_trip(tmp_path, gaz, gold_records):
    recs = [CveRecord(g.cve_id, g.description) for g in gold_records[:10]]
    corpus = [(r.cve_id, label_record(r, gaz)) for r in recs]
    p = tmp_path / "c.conll"
    write_conll(corpus, p)
    back = read_conll(p)
    assert [cid for cid, _ in back] == [r.cve_id for r in recs]
    for (_, a), (_, b) in zip(corpus, back):
        assert [(x.token.text, x.iob, x.domain) for x in a] == [(x.token.text, x.iob, x.domain) for x in b]
    write_conll(back, tmp_path / "again.conll")
    assert (tmp_path / "again.conll").read_bytes() == p.read_bytes()
