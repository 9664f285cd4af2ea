"""``vulnkg`` command line: one subcommand per pipeline stage.

Every stage reads the artifacts of the stage before it from the work
directory and writes its own, recording input/output hashes in
``manifest.json``. ``vulnkg pipeline`` runs all stages in order.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import random
import sys
from dataclasses import asdict, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import kg as kgmod
from . import labeling, nvd_ingest, perceptron, plotting, relations, synthetic, tucker
from .config import ConfigError, PipelineConfig, apply_override, load_config

log = logging.getLogger("vulnkg")

WORK_DIR_ENV = "VULNKG_WORK_DIR"
STAGES = ("ingest", "label", "train-ner", "ner-eval", "extract", "kg-build", "kge-train", "kge-eval",
          "sample-triples")

# artifact -> stage that writes it
PRODUCER = {
    "records.jsonl": "ingest",
    "ingest_skips.json": "ingest",
    "labeled.conll": "label",
    "ner_iob.model": "train-ner",
    "ner_domain.model": "train-ner",
    "ner_split.json": "train-ner",
    "ner_report.tsv": "ner-eval",
    "ner_report.json": "ner-eval",
    "ner_report.png": "ner-eval",
    "predicted.conll": "extract",
    "triples.tsv": "extract",
    "kg/train.tsv": "kg-build",
    "kg/valid.tsv": "kg-build",
    "kg/test.tsv": "kg-build",
    "kg/entities.tsv": "kg-build",
    "kg/relations.tsv": "kg-build",
    "kge/model.npz": "kge-train",
    "kge/loss.tsv": "kge-train",
    "kge/loss.png": "kge-train",
    "kge/report.json": "kge-eval",
    "kge/report.tsv": "kge-eval",
    "kge/ranking.png": "kge-eval",
    "kge/rank_hist.png": "kge-eval",
    "review_sheet.tsv": "sample-triples",
}
KG_FILES = ("kg/train.tsv", "kg/valid.tsv", "kg/test.tsv", "kg/entities.tsv", "kg/relations.tsv")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def bundled_feed() -> Path:
    return Path(str(resources.files("vulnkg").joinpath("data/nvd_fixture_100.json")))


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """A work directory plus the resolved configuration."""

    def __init__(self, config: PipelineConfig, work_dir: Path):
        self.config = config
        self.work = Path(work_dir)

    def path(self, name: str) -> Path:
        return self.work / name

    def require(self, stage: str, *names: str) -> list[Path]:
        out = []
        for name in names:
            p = self.path(name)
            if not p.exists():
                raise StageError(stage, f"missing input {p}; run `vulnkg {PRODUCER[name]}` first")
            out.append(p)
        return out

    def record(self, stage: str, inputs: list[Path], outputs: list[Path]) -> None:
        manifest_path = self.path("manifest.json")
        manifest = json.loads(manifest_path.read_text()) if manifest_path.exists() else {"stages": {}}

        def digest(paths):
            return {self._rel(p): sha256_file(p) for p in sorted(paths) if p.is_file()}

        manifest["stages"][stage] = {
            "config_hash": self.config.hash(),
            "inputs": digest(inputs),
            "outputs": digest(outputs),
        }
        manifest["config"] = self.config.to_dict()
        manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    def _rel(self, p: Path) -> str:
        try:
            return str(p.resolve().relative_to(self.work.resolve()))
        except ValueError:
            return str(p)


# ---------------------------------------------------------------- stages

def stage_ingest(run: Run, args=None) -> None:
    cfg = run.config
    source = Path(cfg.paths.feeds) if cfg.paths.feeds else bundled_feed()
    try:
        records, skips = nvd_ingest.ingest(source, cfg.ingest.require_cpe, cfg.ingest.require_cwe)
    except (OSError, nvd_ingest.FeedFormatError) as exc:
        raise StageError("ingest", str(exc)) from None
    if not records:
        raise StageError("ingest", f"no usable CVE records in {source}")
    out = run.path("records.jsonl")
    nvd_ingest.write_jsonl(records, out)
    skip_path = run.path("ingest_skips.json")
    skip_path.write_text(json.dumps({**asdict(skips), "total_skipped": skips.total, "kept": len(records)},
                                    indent=2, sort_keys=True) + "\n")
    run.record("ingest", nvd_ingest.feed_files(source), [out, skip_path])
    log.info("ingest: %d records (%d skipped) from %s", len(records), skips.total, source)


def _gazetteer(run: Run) -> labeling.Gazetteer:
    return labeling.Gazetteer.load(run.config.paths.gazetteer)


def stage_label(run: Run, args=None) -> None:
    (rec_path,) = run.require("label", "records.jsonl")
    records = nvd_ingest.read_jsonl(rec_path)
    gaz = _gazetteer(run)
    lcfg = run.config.labeling.to_config()
    out = run.path("labeled.conll")
    labeling.write_conll(((r.cve_id, labeling.label_record(r, gaz, lcfg)) for r in records), out)
    run.record("label", [rec_path], [out])
    log.info("label: %d records labeled with %d gazetteer phrases", len(records), len(gaz))


def ner_split(ids: list[str], train_size: int, held_out_fraction: float, max_held_out: int,
              seed: int) -> tuple[list[str], list[str]]:
    """Shuffle ids once; the head becomes the held-out set, the next ``train_size`` the training set."""
    order = sorted(ids)
    random.Random(seed).shuffle(order)
    n_held = min(max_held_out, max(1, int(round(len(order) * held_out_fraction))))
    if len(order) - n_held < 1:
        raise ValueError(f"{len(order)} labeled records are too few to hold out {n_held}")
    return order[n_held:n_held + train_size], order[:n_held]


def stage_train_ner(run: Run, args=None) -> None:
    (conll,) = run.require("train-ner", "labeled.conll")
    ner = run.config.ner
    corpus = {cve: sent for cve, sent in labeling.read_conll(conll) if sent}
    try:
        train_ids, held_ids = ner_split(list(corpus), ner.train_size, ner.held_out_fraction,
                                        ner.max_held_out, ner.seed)
    except ValueError as exc:
        raise StageError("train-ner", str(exc)) from None
    train = [corpus[i] for i in train_ids]
    iob = perceptron.train_ap(train, perceptron.IOB, ner.epochs, ner.seed)
    dom = perceptron.train_ap(train, perceptron.DOMAIN, ner.epochs, ner.seed, iob_model=iob)
    outs = [run.path("ner_iob.model"), run.path("ner_domain.model"), run.path("ner_split.json")]
    iob.save(outs[0])
    dom.save(outs[1])
    outs[2].write_text(json.dumps({"train": train_ids, "held_out": held_ids}, indent=1) + "\n")
    run.record("train-ner", [conll], outs)
    log.info("train-ner: %d training / %d held-out descriptions, %d epochs",
             len(train_ids), len(held_ids), ner.epochs)


def _load_ner(run: Run, stage: str):
    p_iob, p_dom = run.require(stage, "ner_iob.model", "ner_domain.model")
    return perceptron.PerceptronModel.load(p_iob), perceptron.PerceptronModel.load(p_dom), [p_iob, p_dom]


def stage_ner_eval(run: Run, args=None) -> None:
    iob, dom, model_paths = _load_ner(run, "ner-eval")
    conll, split_path = run.require("ner-eval", "labeled.conll", "ner_split.json")
    corpus = dict(labeling.read_conll(conll))
    held = json.loads(split_path.read_text())["held_out"]
    gold = [corpus[i] for i in held]
    pred = [perceptron.predict(iob, dom, [lt.token for lt in sent]) for sent in gold]
    report = perceptron.evaluate_ner(pred, gold)
    tsv, js, png = run.path("ner_report.tsv"), run.path("ner_report.json"), run.path("ner_report.png")
    with open(tsv, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("class\tprecision\trecall\tf1\tsupport\tpredicted\tdegenerate\n")
        for name, s in report.rows():
            fh.write(f"{name}\t{s.precision:.4f}\t{s.recall:.4f}\t{s.f1:.4f}\t{s.support}\t{s.predicted}\t"
                     f"{int(s.degenerate)}\n")
    js.write_text(json.dumps({"scoring": "token-level, combined IOB-domain tag, O excluded",
                              "n_sentences": len(gold),
                              **{name: asdict(s) for name, s in report.rows()}}, indent=2) + "\n")
    plotting.plot_ner_report(report, png)
    run.record("ner-eval", [conll, split_path, *model_paths], [tsv, js, png])
    m = report.micro
    log.info("ner-eval: micro P %.3f R %.3f F1 %.3f on %d held-out descriptions",
             m.precision, m.recall, m.f1, len(gold))


def stage_extract(run: Run, args=None) -> None:
    cfg = run.config
    (rec_path,) = run.require("extract", "records.jsonl")
    records = nvd_ingest.read_jsonl(rec_path)
    ontology = cfg.relations.ontology()
    if cfg.relations.label_source == "predicted":
        iob, dom, inputs = _load_ner(run, "extract")
        labeled = [(r.cve_id, perceptron.predict(iob, dom, labeling.tokenize(r.description))) for r in records]
        pred_path = run.path("predicted.conll")
        labeling.write_conll(labeled, pred_path)
        outputs = [pred_path]
    else:
        (conll,) = run.require("extract", "labeled.conll")
        labeled = labeling.read_conll(conll)
        inputs, outputs = [conll], []
    by_id = {r.cve_id: r for r in records}
    triples = relations.merge_triples(
        relations.record_triples(labels, cve_id, by_id[cve_id].cwe_ids, ontology) for cve_id, labels in labeled
    )
    out = run.path("triples.tsv")
    relations.write_triples(triples, out)
    run.record("extract", [rec_path, *inputs], [*outputs, out])
    log.info("extract: %d distinct triples from %d records (%s labels)",
             len(triples), len(records), cfg.relations.label_source)


def stage_kg_build(run: Run, args=None) -> None:
    (tri_path,) = run.require("kg-build", "triples.tsv")
    triples = relations.read_triples(tri_path)
    if not triples:
        raise StageError("kg-build", f"{tri_path} holds no triples")
    k = run.config.kg
    splits = kgmod.make_splits(triples, k.split_ratios, k.seed, k.augment_before_split)
    graph = kgmod.save_split(splits, run.path("kg"))
    run.record("kg-build", [tri_path], [run.path(p) for p in KG_FILES])
    log.info("kg-build: %d base triples -> train/valid/test %s after reverse augmentation; %d entities",
             len(set(triples)), splits.sizes(), len(graph.entities))


def _load_graph(run: Run, stage: str):
    paths = run.require(stage, *KG_FILES)
    splits, graph = kgmod.load_split(run.path("kg"))
    return splits, graph, paths


def stage_kge_train(run: Run, args=None) -> None:
    splits, graph, inputs = _load_graph(run, "kge-train")
    kcfg = run.config.kge
    tc = kcfg.to_train_config()
    train_rows, valid_rows = graph.encode(splits.train), graph.encode(splits.valid)
    if len(train_rows) == 0:
        raise StageError("kge-train", "training split is empty")
    log.info("kge-train: %d entities, %d relations, %d training triples, %d epochs",
             len(graph.entities), len(graph.relations), len(train_rows), tc.num_iterations)
    try:
        result = tucker.train(train_rows, len(graph.entities), len(graph.relations), tc,
                              valid_triples=valid_rows if len(valid_rows) else None,
                              eval_every=kcfg.eval_every)
    except tucker.TrainingDiverged as exc:
        raise StageError("kge-train", str(exc)) from None
    run.path("kge").mkdir(exist_ok=True)
    model, loss_tsv, loss_png = run.path("kge/model.npz"), run.path("kge/loss.tsv"), run.path("kge/loss.png")
    tucker.save_checkpoint(model, result.params, tc, graph.index_hash())
    with open(loss_tsv, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch\tloss\n")
        for i, loss in enumerate(result.losses, 1):
            fh.write(f"{i}\t{loss:.8f}\n")
    plotting.plot_loss(result.losses, loss_png, result.valid_mrr)
    run.record("kge-train", inputs, [model, loss_tsv, loss_png])
    log.info("kge-train: final loss %.6f", result.losses[-1])


def _load_model(run: Run, stage: str, graph):
    (model_path,) = run.require(stage, "kge/model.npz")
    try:
        params, _, _ = tucker.load_checkpoint(model_path, graph.index_hash())
    except tucker.CheckpointMismatch as exc:
        raise StageError(stage, f"{exc}; rerun `vulnkg kge-train`") from None
    return params, model_path


def cve_target_relations(run: Run, graph) -> list[str]:
    types = run.config.relations.ontology().relation_types()
    return tucker.relations_targeting(graph.relations, types, relations.CVE)


def excluded_relation_ids(run: Run, graph, stage: str) -> list[int]:
    names = list(run.config.eval.excluded_relations)
    if run.config.eval.exclude_cve_targets:
        names += cve_target_relations(run, graph)
    try:
        return sorted({graph.relation_id(n) for n in names})
    except KeyError as exc:
        raise StageError(stage, f"eval.excluded_relations: {exc.args[0]}") from None


def _report_rows(name: str, rep: tucker.RankingReport, relation: str) -> str:
    h = rep.hits_at
    return (f"{name}\t{rep.mode}\t{relation}\t{rep.n_evaluated}\t{rep.mrr:.6f}\t"
            f"{h[1]:.6f}\t{h[3]:.6f}\t{h[10]:.6f}\n")


def stage_kge_eval(run: Run, args=None) -> None:
    splits, graph, inputs = _load_graph(run, "kge-eval")
    params, model_path = _load_model(run, "kge-eval", graph)
    train_rows = graph.encode(splits.train)
    test_rows = graph.encode(splits.test)
    if len(test_rows) == 0:
        raise StageError("kge-eval", "test split is empty")
    known = graph.encode(splits.all())
    excluded = excluded_relation_ids(run, graph, "kge-eval")
    baseline = tucker.FrequencyBaseline(train_rows, len(graph.entities), len(graph.relations))
    models = {"tucker": params, "frequency": baseline}

    results = {}
    lines = ["model\tmode\trelation\tn\tmrr\thits@1\thits@3\thits@10\n"]
    for name, model in models.items():
        results[name] = {}
        for mode in ("filtered", "raw"):
            try:
                rep = tucker.evaluate_ranking(model, test_rows, known, mode, excluded)
            except ValueError as exc:
                raise StageError("kge-eval", str(exc)) from None
            results[name][mode] = rep
            lines.append(_report_rows(name, rep, "*"))
    per_relation = {}
    for rid, rname in enumerate(graph.relations):
        rows = test_rows[test_rows[:, 1] == rid]
        if len(rows) == 0 or rid in excluded:
            continue
        per_relation[rname] = {}
        for name, model in models.items():
            rep = tucker.evaluate_ranking(model, rows, known, run.config.eval.mode)
            per_relation[rname][name] = rep.to_dict()
            lines.append(_report_rows(name, rep, rname))

    primary = run.config.eval.mode
    report = {
        "primary_mode": primary,
        "n_test_triples": int(len(test_rows)),
        "n_entities": len(graph.entities),
        "n_relations": len(graph.relations),
        "excluded_relations": [graph.relations[i] for i in excluded],
        "overall": {name: {mode: rep.to_dict() for mode, rep in by_mode.items()} for name, by_mode in results.items()},
        "per_relation": per_relation,
    }
    outs = [run.path("kge/report.json"), run.path("kge/report.tsv"),
            run.path("kge/ranking.png"), run.path("kge/rank_hist.png")]
    outs[0].write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    with open(outs[1], "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(lines)
    plotting.plot_ranking({f"{n} ({m})": results[n][m] for n in models for m in ("filtered", "raw")}, outs[2])
    plotting.plot_rank_histogram({n: results[n][primary].ranks for n in models}, outs[3])
    run.record("kge-eval", [*inputs, model_path], outs)
    rep = results["tucker"][primary]
    log.info("kge-eval (%s): MRR %.4f Hits@1 %.4f Hits@3 %.4f Hits@10 %.4f; frequency baseline MRR %.4f",
             primary, rep.mrr, rep.hits_at[1], rep.hits_at[3], rep.hits_at[10],
             results["frequency"][primary].mrr)


def stage_sample_triples(run: Run, args=None) -> None:
    (tri_path,) = run.require("sample-triples", "triples.tsv")
    triples = relations.read_triples(tri_path)
    s = run.config.sample
    try:
        sample = relations.sample_for_validation(triples, s.n, s.seed)
    except ValueError as exc:
        raise StageError("sample-triples", str(exc)) from None
    out = run.path("review_sheet.tsv")
    relations.write_review_sheet(sample, out)
    run.record("sample-triples", [tri_path], [out])
    log.info("sample-triples: %d of %d triples written to %s", len(sample), len(triples), out)


STAGE_FUNCS = {
    "ingest": stage_ingest,
    "label": stage_label,
    "train-ner": stage_train_ner,
    "ner-eval": stage_ner_eval,
    "extract": stage_extract,
    "kg-build": stage_kg_build,
    "kge-train": stage_kge_train,
    "kge-eval": stage_kge_eval,
    "sample-triples": stage_sample_triples,
}


def cmd_pipeline(run: Run, args) -> None:
    for name in STAGES:
        log.info("== %s", name)
        STAGE_FUNCS[name](run, args)


def cmd_predict(run: Run, args) -> None:
    splits, graph, _ = _load_graph(run, "predict")
    params, _ = _load_model(run, "predict", graph)
    try:
        head, rel = graph.entity_id(args.head), graph.relation_id(args.relation)
    except KeyError as exc:
        raise StageError("predict", exc.args[0]) from None
    tucker.warn_if_cve_target(args.relation, cve_target_relations(run, graph))
    mode = args.mode or run.config.eval.mode
    ranked = tucker.predict_tail(params, head, rel, args.k, mode, graph.encode(splits.all()))
    lines = ["rank\tentity\tscore\n"] + [f"{i}\t{graph.entities[e]}\t{s:.6f}\n" for i, (e, s) in enumerate(ranked, 1)]
    if args.out:
        Path(args.out).write_text("".join(lines), encoding="utf-8")
    else:
        sys.stdout.write("".join(lines))


def cmd_score_review(run: Run, args) -> None:
    sheet = Path(args.sheet) if args.sheet else run.require("score-review", "review_sheet.tsv")[0]
    try:
        score = relations.score_review_sheet(sheet)
    except (OSError, ValueError) as exc:
        raise StageError("score-review", str(exc)) from None
    precision = "undefined" if score.precision is None else f"{score.precision:.4f}"
    sys.stdout.write(f"precision\t{precision}\ncorrect\t{score.correct}\njudged\t{score.judged}\n"
                     f"unjudged\t{score.unjudged}\n")


def cmd_kge_grid(run: Run, args) -> None:
    splits, graph, inputs = _load_graph(run, "kge-grid")
    base = replace(run.config.kge.to_train_config(), num_iterations=args.num_iterations or run.config.kge.num_iterations)
    train_rows, valid_rows = graph.encode(splits.train), graph.encode(splits.valid)
    if len(valid_rows) == 0:
        raise StageError("kge-grid", "validation split is empty")
    rows = tucker.grid_search(train_rows, valid_rows, len(graph.entities), len(graph.relations),
                              base=base, subset_fraction=args.subset_fraction, repeats=args.repeats,
                              seed=run.config.kge.seed)
    run.path("kge").mkdir(exist_ok=True)
    out = run.path("kge/grid.tsv")
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("rank\thidden_dropout\tlr\trdim\tedim\tmean_valid_mrr\tvalid_mrrs\n")
        for i, row in enumerate(rows, 1):
            c = row.config
            fh.write(f"{i}\t{c.hidden_dropout1}\t{c.lr}\t{c.rdim}\t{c.edim}\t{row.mean_mrr:.6f}\t"
                     f"{','.join(f'{m:.6f}' for m in row.mrrs)}\n")
    run.record("kge-grid", inputs, [out])
    best = rows[0].config
    log.info("kge-grid: %d configs; best hidden_dropout %s lr %s rdim %s (mean valid MRR %.4f)",
             len(rows), best.hidden_dropout1, best.lr, best.rdim, rows[0].mean_mrr)


def cmd_synth_feed(run: Run, args) -> None:
    path = synthetic.write_feed(args.out, args.n, getattr(args, "seed", 0))
    log.info("synth-feed: %d synthetic NVD items written to %s", args.n, path)


# ---------------------------------------------------------------- argument parsing

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="YAML pipeline config")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="override every stage seed")
    p.add_argument("--work-dir", metavar="PATH", default=argparse.SUPPRESS,
                   help=f"artifact directory (fallback: ${WORK_DIR_ENV}, then paths.work_dir)")
    p.add_argument("--set", metavar="SECTION.KEY=VALUE", action="append", default=argparse.SUPPRESS,
                   help="override one config value; repeatable")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    p.add_argument("-q", "--quiet", action="store_true", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="vulnkg", parents=[common],
                                     description="Build and query a vulnerability knowledge graph from NVD feeds.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_, func):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    p = add("ingest", "parse NVD JSON feeds into records.jsonl", stage_ingest)
    p.add_argument("--feeds", help="feed file or directory (overrides paths.feeds)")
    add("label", "distant-label descriptions into labeled.conll", stage_label)
    p = add("train-ner", "train the two-stage averaged perceptron", stage_train_ner)
    p.add_argument("--epochs", type=int)
    p.add_argument("--train-size", type=int)
    add("ner-eval", "score the tagger on held-out distant labels", stage_ner_eval)
    p = add("extract", "tag records and extract triples.tsv", stage_extract)
    p.add_argument("--label-source", choices=("predicted", "distant"))
    add("kg-build", "index, split and reverse-augment the triples", stage_kg_build)
    p = add("kge-train", "train TuckER embeddings", stage_kge_train)
    p.add_argument("--num-iterations", type=int)
    p = add("kge-eval", "Hits@n / MRR on the test split, with a frequency baseline", stage_kge_eval)
    p.add_argument("--mode", choices=("filtered", "raw"))
    p = add("predict", "top-k tails for a (head, relation) query", cmd_predict)
    p.add_argument("--head", required=True)
    p.add_argument("--relation", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--mode", choices=("filtered", "raw"))
    p.add_argument("--out", help="write the ranking here instead of stdout")
    p = add("sample-triples", "draw a review sheet of triples for manual validation", stage_sample_triples)
    p.add_argument("--n", type=int)
    p = add("score-review", "precision of a filled review sheet", cmd_score_review)
    p.add_argument("--sheet", help="defaults to <work-dir>/review_sheet.tsv")
    p = add("kge-grid", "grid search over dropout / lr / rdim", cmd_kge_grid)
    p.add_argument("--subset-fraction", type=float, default=0.5)
    p.add_argument("--repeats", type=int, default=2)
    p.add_argument("--num-iterations", type=int)
    p = add("synth-feed", "write a synthetic NVD feed for offline runs", cmd_synth_feed)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p = add("pipeline", "run every stage in order", cmd_pipeline)
    p.add_argument("--feeds", help="feed file or directory (overrides paths.feeds)")
    return parser


def resolve_config(args) -> PipelineConfig:
    config = load_config(getattr(args, "config", None))
    for assignment in getattr(args, "set", None) or ():
        config = apply_override(config, assignment)
    seed = getattr(args, "seed", None)
    if seed is not None:
        config = config.with_seed(seed)
    if getattr(args, "feeds", None):
        config = replace(config, paths=replace(config.paths, feeds=args.feeds))
    if getattr(args, "epochs", None) is not None:
        config = replace(config, ner=replace(config.ner, epochs=args.epochs))
    if getattr(args, "train_size", None) is not None:
        config = replace(config, ner=replace(config.ner, train_size=args.train_size))
    if getattr(args, "label_source", None):
        config = replace(config, relations=replace(config.relations, label_source=args.label_source))
    if getattr(args, "num_iterations", None) is not None and args.command == "kge-train":
        config = replace(config, kge=replace(config.kge, num_iterations=args.num_iterations))
    if getattr(args, "mode", None) and args.command == "kge-eval":
        config = replace(config, eval=replace(config.eval, mode=args.mode))
    if getattr(args, "n", None) is not None and args.command == "sample-triples":
        config = replace(config, sample=replace(config.sample, n=args.n))
    work_dir = getattr(args, "work_dir", None) or os.environ.get(WORK_DIR_ENV) or config.paths.work_dir
    config = replace(config, paths=replace(config.paths, work_dir=work_dir))
    return config.validate()


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING if getattr(args, "quiet", False) \
        else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        config = resolve_config(args)
    except ConfigError as exc:
        print(f"vulnkg: config error: {exc}", file=sys.stderr)
        return 2
    run = Run(config, Path(config.paths.work_dir))
    if args.command != "synth-feed":
        run.work.mkdir(parents=True, exist_ok=True)
    try:
        args.func(run, args)
    except StageError as exc:
        print(f"vulnkg: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
