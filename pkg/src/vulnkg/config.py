"""Pipeline configuration: dataclass sections loaded from YAML."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import yaml

from .labeling import DEFAULT_CUE_WORDS, DEFAULT_PRIORITY, LabelingConfig
from .relations import ENTITY_TYPES, Ontology
from .tucker import TrainConfig


class ConfigError(ValueError):
    """Validation failure; the message starts with the offending field."""


@dataclass
class PathsSection:
    feeds: str | None = None
    gazetteer: str | None = None
    work_dir: str = "runs/default"


@dataclass
class IngestSection:
    require_cpe: bool = False
    require_cwe: bool = False


@dataclass
class LabelingSection:
    priority: list = field(default_factory=lambda: list(DEFAULT_PRIORITY))
    cue_words: list = field(default_factory=lambda: sorted(DEFAULT_CUE_WORDS))
    unconditional_dots: int = 2

    def to_config(self) -> LabelingConfig:
        return LabelingConfig(frozenset(w.lower() for w in self.cue_words), self.unconditional_dots,
                              tuple(self.priority))


@dataclass
class NerSection:
    train_size: int = 4000
    held_out_fraction: float = 0.2
    max_held_out: int = 1000
    epochs: int = 5
    seed: int = 0


@dataclass
class RelationsSection:
    label_source: str = "predicted"
    edges: list | None = None

    def ontology(self) -> Ontology:
        return Ontology.default() if self.edges is None else Ontology.from_list(self.edges)


@dataclass
class KgSection:
    split_ratios: list = field(default_factory=lambda: [0.8, 0.1, 0.1])
    seed: int = 0
    augment_before_split: bool = False


@dataclass
class KgeSection:
    num_iterations: int = 300
    lr: float = 0.001
    dr: float = 1.0
    batch_size: int = 128
    input_dropout: float = 0.2
    hidden_dropout1: float = 0.1
    hidden_dropout2: float = 0.0
    label_smoothing: float = 0.1
    edim: int = 200
    rdim: int = 30
    seed: int = 0
    batch_norm: bool = False
    eval_every: int = 0

    def to_train_config(self) -> TrainConfig:
        d = asdict(self)
        d.pop("eval_every")
        return TrainConfig(**d)


@dataclass
class EvalSection:
    mode: str = "filtered"
    excluded_relations: list = field(default_factory=list)
    exclude_cve_targets: bool = False


@dataclass
class SampleSection:
    n: int = 100
    seed: int = 0


SECTIONS = {
    "paths": PathsSection, "ingest": IngestSection, "labeling": LabelingSection, "ner": NerSection,
    "relations": RelationsSection, "kg": KgSection, "kge": KgeSection, "eval": EvalSection,
    "sample": SampleSection,
}


@dataclass
class PipelineConfig:
    paths: PathsSection = field(default_factory=PathsSection)
    ingest: IngestSection = field(default_factory=IngestSection)
    labeling: LabelingSection = field(default_factory=LabelingSection)
    ner: NerSection = field(default_factory=NerSection)
    relations: RelationsSection = field(default_factory=RelationsSection)
    kg: KgSection = field(default_factory=KgSection)
    kge: KgeSection = field(default_factory=KgeSection)
    eval: EvalSection = field(default_factory=EvalSection)
    sample: SampleSection = field(default_factory=SampleSection)

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        """Digest of everything except ``paths.work_dir``, which only says where output goes."""
        d = self.to_dict()
        d["paths"] = {k: v for k, v in d["paths"].items() if k != "work_dir"}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(
            self,
            ner=replace(self.ner, seed=seed), kg=replace(self.kg, seed=seed),
            kge=replace(self.kge, seed=seed), sample=replace(self.sample, seed=seed),
        )

    def validate(self) -> "PipelineConfig":
        for name in ("feeds", "gazetteer"):
            value = getattr(self.paths, name)
            if value is not None and not Path(value).exists():
                raise ConfigError(f"paths.{name}: {value} does not exist")
        try:
            self.labeling.to_config()
        except ValueError as exc:
            raise ConfigError(f"labeling.priority: {exc}") from None
        if self.labeling.unconditional_dots < 1:
            raise ConfigError("labeling.unconditional_dots: must be at least 1")
        if self.ner.train_size < 1 or self.ner.epochs < 1:
            raise ConfigError("ner.train_size / ner.epochs: must be positive")
        if not 0.0 < self.ner.held_out_fraction < 1.0:
            raise ConfigError("ner.held_out_fraction: must be in (0, 1)")
        if self.relations.label_source not in ("predicted", "distant"):
            raise ConfigError("relations.label_source: must be 'predicted' or 'distant'")
        if self.relations.edges is not None:
            try:
                for edge in self.relations.edges:
                    if len(edge) != 3:
                        raise ValueError(f"edge {edge!r} is not [head, relation, tail]")
                self.relations.ontology()
            except ValueError as exc:
                raise ConfigError(f"relations.edges: {exc} (types: {', '.join(ENTITY_TYPES)})") from None
        ratios = self.kg.split_ratios
        if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
            raise ConfigError(f"kg.split_ratios: need three non-negative values summing to 1, got {ratios}")
        try:
            self.kge.to_train_config()
        except ValueError as exc:
            raise ConfigError(f"kge: {exc}") from None
        if self.kge.num_iterations < 1:
            raise ConfigError("kge.num_iterations: must be positive")
        if self.eval.mode not in ("raw", "filtered"):
            raise ConfigError("eval.mode: must be 'raw' or 'filtered'")
        if self.sample.n < 0:
            raise ConfigError("sample.n: must be non-negative")
        return self


def _section(name: str, values) -> object:
    cls = SECTIONS[name]
    if values is None:
        return cls()
    if not isinstance(values, dict):
        raise ConfigError(f"{name}: expected a mapping, got {type(values).__name__}")
    known = {f.name for f in fields(cls)}
    for key in values:
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown field (known: {', '.join(sorted(known))})")
    base = cls()
    for key, value in values.items():
        default = getattr(base, key)
        if isinstance(default, bool) and not isinstance(value, bool):
            raise ConfigError(f"{name}.{key}: expected true/false, got {value!r}")
        if isinstance(default, (int, float)) and not isinstance(default, bool):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name}.{key}: expected a number, got {value!r}")
            if isinstance(default, int) and not isinstance(default, bool) and value != int(value):
                raise ConfigError(f"{name}.{key}: expected an integer, got {value!r}")
            value = type(default)(value)
        setattr(base, key, value)
    return base


def from_dict(data: dict | None) -> PipelineConfig:
    data = data or {}
    for name in data:
        if name not in SECTIONS:
            raise ConfigError(f"{name}: unknown section (known: {', '.join(SECTIONS)})")
    return PipelineConfig(**{name: _section(name, data.get(name)) for name in SECTIONS})


def default_yaml() -> str:
    return resources.files("vulnkg").joinpath("data/default_config.yaml").read_text("utf-8")


def load_config(path: str | Path | None = None) -> PipelineConfig:
    text = default_yaml() if path is None else Path(path).read_text("utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path or 'default config'}: invalid YAML: {exc}") from None
    return from_dict(data)


def apply_override(config: PipelineConfig, assignment: str) -> PipelineConfig:
    """Apply one ``section.key=value`` override (value parsed as YAML)."""
    if "=" not in assignment or "." not in assignment.split("=", 1)[0]:
        raise ConfigError(f"override {assignment!r}: expected section.key=value")
    dotted, raw = assignment.split("=", 1)
    section, key = dotted.split(".", 1)
    data = config.to_dict()
    if section not in data:
        raise ConfigError(f"{section}: unknown section (known: {', '.join(SECTIONS)})")
    data[section][key] = yaml.safe_load(raw)
    return from_dict(data)
