"""Two-stage averaged-perceptron tagger for CVE descriptions.

Stage one predicts IOB tags; stage two predicts domain labels, using the
stage-one predictions as features. Both stages decode greedily left to
right and average their weights lazily with per-weight timestamps.
"""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .labeling import NONE, VERSION_RE, LabeledToken, Token, is_version_shaped

IOB = "IOB"
DOMAIN = "DOMAIN"
IOB_LABELS = ("O", "B", "I")
DOMAIN_LABELS = (NONE, "VENDOR", "PRODUCT", "VERSION", "RELEVANT_TERM")
PAD = "<pad>"

# Feature templates. Each entry: (name, description). The extractor below
# emits exactly these namespaces, so the table doubles as documentation.
FEATURE_TEMPLATES = (
    ("bias", "constant feature"),
    ("w0", "lowercased current token"),
    ("suf3", "last three characters of the lowercased token"),
    ("pre1", "first character of the token"),
    ("shape", "cap / upper / digit / version / punct flags"),
    ("w-1", "lowercased previous token"),
    ("w-2", "lowercased token two back"),
    ("w+1", "lowercased next token"),
    ("w+2", "lowercased token two ahead"),
    ("prev1", "previous predicted label"),
    ("prev2", "label predicted two back"),
    ("prev12", "conjunction of the two previous labels"),
    ("BOS", "first token of the description"),
    ("EOS", "last token of the description"),
    ("iob0", "IOB tag of the current token (domain stage only)"),
    ("iob-1", "IOB tag of the previous token (domain stage only)"),
    ("iob+1", "IOB tag of the next token (domain stage only)"),
    ("iob0w", "current IOB tag conjoined with the token (domain stage only)"),
)


class TrainingError(ValueError):
    pass


def _shapes(text: str) -> list[str]:
    out = []
    if text[:1].isupper():
        out.append("cap")
    if text.isupper() and any(c.isalpha() for c in text):
        out.append("upper")
    if any(c.isdigit() for c in text):
        out.append("digit")
    if is_version_shaped(text) or (VERSION_RE.fullmatch(text) and not text.isdigit()):
        out.append("version")
    if not any(c.isalnum() for c in text):
        out.append("punct")
    if "_" in text or "." in text[1:-1]:
        out.append("inner")
    return out


def extract_features(tokens: Sequence[Token], index: int, prev_labels: Sequence[str],
                     stage: str = IOB, iob_context: Sequence[str] | None = None) -> list[str]:
    """Feature keys for the token at ``index``.

    ``prev_labels`` are the labels already predicted for this sentence; only
    the last two are used.
    """
    if not 0 <= index < len(tokens):
        raise IndexError(f"token index {index} out of range for {len(tokens)} tokens")
    if (stage == DOMAIN) != (iob_context is not None):
        raise ValueError("iob_context is required for, and only for, the domain stage")

    def word(i):
        return tokens[i].text.lower() if 0 <= i < len(tokens) else PAD

    w = word(index)
    p1 = prev_labels[-1] if len(prev_labels) >= 1 else PAD
    p2 = prev_labels[-2] if len(prev_labels) >= 2 else PAD
    feats = [
        "bias",
        f"w0={w}",
        f"suf3={w[-3:]}",
        f"pre1={tokens[index].text[:1]}",
        f"w-1={word(index - 1)}",
        f"w-2={word(index - 2)}",
        f"w+1={word(index + 1)}",
        f"w+2={word(index + 2)}",
        f"prev1={p1}",
        f"prev2={p2}",
        f"prev12={p2}|{p1}",
    ]
    feats.extend(f"shape={s}" for s in _shapes(tokens[index].text))
    if index == 0:
        feats.append("BOS")
    if index == len(tokens) - 1:
        feats.append("EOS")
    if stage == DOMAIN:
        def iob(i):
            return iob_context[i] if 0 <= i < len(iob_context) else PAD
        feats += [f"iob0={iob(index)}", f"iob-1={iob(index - 1)}", f"iob+1={iob(index + 1)}",
                  f"iob0w={iob(index)}|{w}"]
    return feats


@dataclass
class PerceptronModel:
    labels: tuple[str, ...]
    stage: str = IOB
    weights: dict[str, dict[str, float]] = field(default_factory=lambda: defaultdict(dict))
    totals: dict[tuple[str, str], float] = field(default_factory=lambda: defaultdict(float))
    tstamps: dict[tuple[str, str], int] = field(default_factory=lambda: defaultdict(int))
    steps: int = 0
    finalized: bool = False

    def score(self, features: Sequence[str]) -> list[float]:
        scores = dict.fromkeys(self.labels, 0.0)
        for f in features:
            row = self.weights.get(f)
            if row:
                for label, w in row.items():
                    scores[label] += w
        return [scores[lab] for lab in self.labels]

    def predict_label(self, features: Sequence[str]) -> str:
        scores = self.score(features)
        best = 0
        for i in range(1, len(scores)):
            if scores[i] > scores[best]:  # strict: ties keep the lowest index
                best = i
        return self.labels[best]

    def _bump(self, feature: str, label: str, delta: float) -> None:
        key = (feature, label)
        row = self.weights[feature]
        w = row.get(label, 0.0)
        self.totals[key] += (self.steps - self.tstamps[key]) * w
        self.tstamps[key] = self.steps
        row[label] = w + delta

    def update(self, truth: str, guess: str, features: Sequence[str]) -> None:
        if truth != guess:
            for f in features:
                self._bump(f, truth, 1.0)
                self._bump(f, guess, -1.0)

    def tick(self) -> None:
        self.steps += 1

    def finalize(self) -> None:
        """Replace every weight with its average over all steps."""
        if self.finalized:
            return
        for feature, row in self.weights.items():
            for label, w in row.items():
                key = (feature, label)
                total = self.totals[key] + (self.steps - self.tstamps[key]) * w
                row[label] = total / self.steps if self.steps else 0.0
        self.finalized = True
        self.totals.clear()
        self.tstamps.clear()

    def save(self, path: str | Path, precision: int = 6) -> None:
        """Write a sorted, fixed-precision text checkpoint."""
        if not self.finalized:
            raise ValueError("finalize the model before saving")
        lines = [f"#stage\t{self.stage}", "#labels\t" + "\t".join(self.labels)]
        for feature in sorted(self.weights):
            row = self.weights[feature]
            for label in sorted(row):
                value = round(row[label], precision)
                if value != 0.0:
                    lines.append(f"{feature}\t{label}\t{value:.{precision}f}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PerceptronModel":
        stage, labels, weights = IOB, None, defaultdict(dict)
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.startswith("#stage\t"):
                stage = line.split("\t", 1)[1]
            elif line.startswith("#labels\t"):
                labels = tuple(line.split("\t")[1:])
            elif line:
                feature, label, value = line.rsplit("\t", 2)
                weights[feature][label] = float(value)
        if labels is None:
            raise ValueError(f"{path}: checkpoint has no label header")
        return cls(labels=labels, stage=stage, weights=weights, finalized=True)


def _gold(sentence: Sequence[LabeledToken], stage: str) -> list[str]:
    return [lt.iob if stage == IOB else lt.domain for lt in sentence]


def _tag_sentence(model: PerceptronModel, tokens: Sequence[Token],
                  iob_context: Sequence[str] | None = None,
                  gold: Sequence[str] | None = None) -> list[str]:
    """Greedy decode; with ``gold`` given, also apply perceptron updates."""
    out: list[str] = []
    for i in range(len(tokens)):
        feats = extract_features(tokens, i, out, model.stage, iob_context)
        guess = model.predict_label(feats)
        if gold is not None:
            model.update(gold[i], guess, feats)
            model.tick()
        out.append(guess)
    return out


def predict_iob(model: PerceptronModel, tokens: Sequence[Token]) -> list[str]:
    return fix_iob(_tag_sentence(model, tokens))


def fix_iob(tags: Sequence[str]) -> list[str]:
    out = list(tags)
    for i, t in enumerate(out):
        if t == "I" and (i == 0 or out[i - 1] == "O"):
            out[i] = "B"
    return out


def train_ap(corpus: Sequence[Sequence[LabeledToken]], stage: str = IOB, epochs: int = 5, seed: int = 0,
             iob_model: PerceptronModel | None = None) -> PerceptronModel:
    """Train one stage of the tagger.

    For the domain stage, ``iob_model`` must be a finalized IOB model: its
    predictions (not the gold IOB tags) become the ``iob*`` features.
    """
    if not corpus:
        raise TrainingError("empty training corpus")
    labels = IOB_LABELS if stage == IOB else DOMAIN_LABELS
    for sent in corpus:
        for value in _gold(sent, stage):
            if value not in labels:
                raise TrainingError(f"unknown {stage} label {value!r} in corpus")
    if stage == DOMAIN and iob_model is None:
        raise TrainingError("domain stage needs a trained IOB model for its context features")

    items = []
    for sent in corpus:
        tokens = [lt.token for lt in sent]
        context = predict_iob(iob_model, tokens) if stage == DOMAIN else None
        items.append((tokens, context, _gold(sent, stage)))

    model = PerceptronModel(labels=labels, stage=stage)
    rng = random.Random(seed)
    order = list(range(len(items)))
    for _ in range(epochs):
        rng.shuffle(order)
        for k in order:
            tokens, context, gold = items[k]
            _tag_sentence(model, tokens, context, gold)
    model.finalize()
    return model


def predict(model_iob: PerceptronModel, model_domain: PerceptronModel,
            tokens: Sequence[Token]) -> list[LabeledToken]:
    """Tag ``tokens`` with the IOB model, then the domain model."""
    if not tokens:
        return []
    iob = predict_iob(model_iob, tokens)
    domains = _tag_sentence(model_domain, tokens, iob_context=iob)
    out = []
    for i, tok in enumerate(tokens):
        tag, dom = iob[i], domains[i]
        if tag == "O" or dom == NONE:
            out.append(LabeledToken(tok, "O", NONE))
            continue
        if tag == "I" and (out[-1].iob == "O" or out[-1].domain != dom):
            tag = "B"
        out.append(LabeledToken(tok, tag, dom))
    return out


@dataclass
class ClassScore:
    precision: float
    recall: float
    f1: float
    support: int
    predicted: int
    degenerate: bool = False


@dataclass
class NerReport:
    micro: ClassScore
    per_class: dict[str, ClassScore]

    def rows(self) -> list[tuple[str, ClassScore]]:
        return [("micro", self.micro), *sorted(self.per_class.items())]


def _score(tp: int, n_pred: int, n_gold: int) -> ClassScore:
    degenerate = n_pred == 0
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return ClassScore(p, r, f, n_gold, n_pred, degenerate)


def evaluate_ner(pred: Sequence[Sequence[LabeledToken]], gold: Sequence[Sequence[LabeledToken]]) -> NerReport:
    """Token-level scores on the combined IOB-domain tag, O tokens excluded.

    A prediction counts as correct when its full tag (e.g. ``B-PRODUCT``)
    equals the gold tag. Zero predicted positives gives precision 0 with
    ``degenerate`` set.
    """
    if len(pred) != len(gold):
        raise ValueError(f"corpus length mismatch: {len(pred)} predicted vs {len(gold)} gold sentences")
    tp, n_pred, n_gold = defaultdict(int), defaultdict(int), defaultdict(int)
    for ps, gs in zip(pred, gold):
        if len(ps) != len(gs):
            raise ValueError(f"sentence length mismatch: {len(ps)} vs {len(gs)} tokens")
        for p, g in zip(ps, gs):
            if p.iob != "O":
                n_pred[p.domain] += 1
            if g.iob != "O":
                n_gold[g.domain] += 1
                if p.tag == g.tag:
                    tp[g.domain] += 1
    classes = sorted(set(n_pred) | set(n_gold))
    per_class = {c: _score(tp[c], n_pred[c], n_gold[c]) for c in classes}
    micro = _score(sum(tp.values()), sum(n_pred.values()), sum(n_gold.values()))
    return NerReport(micro, per_class)
