"""TuckER tensor-factorization model for tail-entity prediction.

A triple ``(h, r, t)`` is scored with the trilinear form
``sum_ijk W[i, j, k] * E[h, i] * R[r, j] * E[t, k]``, evaluated against all
entities at once (1-N scoring). Training minimises binary cross-entropy
against label-smoothed multi-hot targets with Adam. Gradients are derived by
hand; ``tests/test_tucker.py`` checks them against finite differences.
"""

from __future__ import annotations

import json
import logging
import warnings
from collections import defaultdict
from dataclasses import asdict, dataclass, field, replace
from itertools import product
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
HITS_AT = (1, 3, 10)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    # defaults are the best TuckER setting reported for the NVD graph
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
    entity_init_std: float = 0.05

    def __post_init__(self):
        for name in ("input_dropout", "hidden_dropout1", "hidden_dropout2"):
            p = getattr(self, name)
            if not 0.0 <= p < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {p}")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError(f"label_smoothing must be in [0, 1), got {self.label_smoothing}")
        if self.edim < 1 or self.rdim < 1 or self.batch_size < 1:
            raise ValueError("edim, rdim and batch_size must be positive")

    @property
    def dropouts(self) -> tuple[float, float, float]:
        return self.input_dropout, self.hidden_dropout1, self.hidden_dropout2


@dataclass
class TuckerParams:
    E: np.ndarray  # (n_entities, edim)
    R: np.ndarray  # (n_relations, rdim)
    W: np.ndarray  # (edim, rdim, edim)
    bn_mean: np.ndarray | None = None
    bn_var: np.ndarray | None = None

    def __post_init__(self):
        ne, de = self.E.shape
        nr, dr = self.R.shape
        if self.W.shape != (de, dr, de):
            raise ValueError(f"core tensor shape {self.W.shape} does not match dims ({de}, {dr}, {de})")

    @property
    def n_entities(self) -> int:
        return self.E.shape[0]

    @property
    def n_relations(self) -> int:
        return self.R.shape[0]

    def n_parameters(self) -> int:
        return self.E.size + self.R.size + self.W.size

    def copy(self) -> "TuckerParams":
        return TuckerParams(
            self.E.copy(), self.R.copy(), self.W.copy(),
            None if self.bn_mean is None else self.bn_mean.copy(),
            None if self.bn_var is None else self.bn_var.copy(),
        )

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in (self.E, self.R, self.W))

    def scores(self, heads, rels) -> np.ndarray:
        """Eval-mode logits of every entity as tail, shape (batch, n_entities)."""
        return forward(self, np.atleast_1d(heads), np.atleast_1d(rels))[0]


def init_params(n_entities: int, n_relations: int, config: TrainConfig | None = None,
                seed: int | None = None) -> TuckerParams:
    config = config or TrainConfig()
    if n_entities < 1 or n_relations < 1:
        raise ValueError("need at least one entity and one relation")
    rng = np.random.default_rng(config.seed if seed is None else seed)
    de, dr = config.edim, config.rdim
    E = rng.normal(0.0, config.entity_init_std, size=(n_entities, de))
    R = rng.normal(0.0, config.entity_init_std, size=(n_relations, dr))
    W = rng.uniform(-1.0, 1.0, size=(de, dr, de))
    params = TuckerParams(E, R, W)
    if config.batch_norm:
        params.bn_mean = np.zeros(de)
        params.bn_var = np.ones(de)
    return params


def _dropout_mask(rng, shape, p):
    if p <= 0.0:
        return None
    return (rng.random(shape) >= p) / (1.0 - p)


def forward(params: TuckerParams, heads: np.ndarray, rels: np.ndarray, train_mode: bool = False,
            dropout: Sequence[float] = (0.0, 0.0, 0.0), rng: np.random.Generator | None = None):
    """Batched 1-N logits and the cache needed by :func:`backward`.

    Dropout (inverted) is applied only in ``train_mode``: the first rate to
    the head embedding, the second to the relation-specific core matrix, the
    third to the hidden vector before the final product with ``E``.
    """
    E, R, W = params.E, params.R, params.W
    de, dr = W.shape[0], W.shape[1]
    if np.any((heads < 0) | (heads >= E.shape[0])) or np.any((rels < 0) | (rels >= R.shape[0])):
        raise IndexError("entity or relation id out of range")
    if train_mode and any(dropout) and rng is None:
        raise ValueError("train-mode dropout needs an rng")
    p0, p1, p2 = dropout if train_mode else (0.0, 0.0, 0.0)
    B = len(heads)

    h = E[heads]
    m0 = _dropout_mask(rng, h.shape, p0)
    hd = h * m0 if m0 is not None else h

    r = R[rels]
    W_flat = W.transpose(1, 0, 2).reshape(dr, de * de)
    M = (r @ W_flat).reshape(B, de, de)
    m1 = _dropout_mask(rng, M.shape, p1)
    Md = M * m1 if m1 is not None else M

    z = np.matmul(hd[:, None, :], Md)[:, 0, :]
    bn = None
    if params.bn_mean is not None:
        if train_mode and B > 1:
            mu, var = z.mean(axis=0), z.var(axis=0)
            params.bn_mean = (1 - BN_MOMENTUM) * params.bn_mean + BN_MOMENTUM * mu
            params.bn_var = (1 - BN_MOMENTUM) * params.bn_var + BN_MOMENTUM * var
        else:
            mu, var = params.bn_mean, params.bn_var
        inv = 1.0 / np.sqrt(var + BN_EPS)
        zs = (z - mu) * inv
        bn = (inv, zs, train_mode and B > 1)
    else:
        zs = z
    m2 = _dropout_mask(rng, zs.shape, p2)
    zd = zs * m2 if m2 is not None else zs

    logits = zd @ E.T
    cache = dict(heads=heads, rels=rels, hd=hd, r=r, W_flat=W_flat, Md=Md,
                 m0=m0, m1=m1, m2=m2, zd=zd, bn=bn)
    return logits, cache


def backward(params: TuckerParams, cache: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. E, R and W given d(loss)/d(logits)."""
    E, W = params.E, params.W
    de, dr = W.shape[0], W.shape[1]
    B = dlogits.shape[0]

    dE = dlogits.T @ cache["zd"]
    dz = dlogits @ E
    if cache["m2"] is not None:
        dz = dz * cache["m2"]
    if cache["bn"] is not None:
        inv, zs, batch_stats = cache["bn"]
        if batch_stats:
            dz = inv * (dz - dz.mean(axis=0) - zs * (dz * zs).mean(axis=0))
        else:
            dz = dz * inv

    Md, hd = cache["Md"], cache["hd"]
    dhd = np.matmul(Md, dz[:, :, None])[:, :, 0]
    dM = hd[:, :, None] * dz[:, None, :]
    if cache["m1"] is not None:
        dM = dM * cache["m1"]
    dM_flat = dM.reshape(B, de * de)
    dr_rows = dM_flat @ cache["W_flat"].T
    dW = (cache["r"].T @ dM_flat).reshape(dr, de, de).transpose(1, 0, 2)

    dh = dhd * cache["m0"] if cache["m0"] is not None else dhd
    np.add.at(dE, cache["heads"], dh)
    dR = np.zeros_like(params.R)
    np.add.at(dR, cache["rels"], dr_rows)
    return {"E": dE, "R": dR, "W": dW}


def smooth_targets(targets: np.ndarray, label_smoothing: float) -> np.ndarray:
    n = targets.shape[-1]
    return (1.0 - label_smoothing) * targets + label_smoothing / n


def bce_with_logits(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy over all entries and its gradient."""
    # softplus(x) = max(x, 0) - log(sigmoid(|x|)); sigmoid(x) = inv or e * inv
    # with e = exp(-|x|) and inv = 1 / (1 + e). In-place ops keep the
    # (batch x n_entities) temporaries down to two.
    e = np.abs(logits)
    np.negative(e, out=e)
    np.exp(e, out=e)
    inv = e + 1.0
    np.reciprocal(inv, out=inv)
    size = logits.size
    loss = (np.maximum(logits, 0.0).sum() - np.log(inv).sum() - np.vdot(targets, logits)) / size
    np.multiply(e, inv, out=e)
    np.copyto(e, inv, where=logits >= 0)
    e -= targets
    e /= size
    return float(loss), e


def loss_and_grads(params: TuckerParams, heads, rels, targets, config: TrainConfig,
                   rng: np.random.Generator | None = None, train_mode: bool = True):
    logits, cache = forward(params, heads, rels, train_mode, config.dropouts, rng)
    loss, dlogits = bce_with_logits(logits, smooth_targets(targets, config.label_smoothing))
    return loss, backward(params, cache, dlogits)


def score_all_tails(params: TuckerParams, head: int, relation: int, train_mode: bool = False,
                    dropout_rng: np.random.Generator | None = None,
                    config: TrainConfig | None = None) -> np.ndarray:
    dropout = config.dropouts if config is not None else (0.0, 0.0, 0.0)
    logits, _ = forward(params, np.array([head]), np.array([relation]), train_mode, dropout, dropout_rng)
    return logits[0]


class Adam:
    def __init__(self, params: TuckerParams, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.lr, self.betas, self.eps = lr, betas, eps
        self.t = 0
        self.m = {k: np.zeros_like(getattr(params, k)) for k in ("E", "R", "W")}
        self.v = {k: np.zeros_like(getattr(params, k)) for k in ("E", "R", "W")}

    def step(self, params: TuckerParams, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.betas
        c1, c2 = 1 - b1 ** self.t, 1 - b2 ** self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            getattr(params, k)[...] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def tails_by_query(triples: np.ndarray) -> dict[tuple[int, int], list[int]]:
    vocab = defaultdict(list)
    for h, r, t in triples:
        vocab[(int(h), int(r))].append(int(t))
    return dict(vocab)


@dataclass
class TrainResult:
    params: TuckerParams
    losses: list[float]
    valid_mrr: list[tuple[int, float]] = field(default_factory=list)


def train(train_triples: np.ndarray, n_entities: int, n_relations: int, config: TrainConfig | None = None,
          valid_triples: np.ndarray | None = None, eval_every: int = 0,
          params: TuckerParams | None = None,
          on_epoch: Callable[[int, float], None] | None = None) -> TrainResult:
    """Fit TuckER on (already reverse-augmented) id triples.

    Each epoch shuffles the distinct ``(head, relation)`` queries and fits
    every mini-batch against all of its known tails at once.
    """
    config = config or TrainConfig()
    train_triples = np.asarray(train_triples, dtype=np.int64).reshape(-1, 3)
    if len(train_triples) == 0:
        raise ValueError("no training triples")
    params = params or init_params(n_entities, n_relations, config)
    rng = np.random.default_rng(config.seed)
    vocab = tails_by_query(train_triples)
    queries = np.array(sorted(vocab), dtype=np.int64)
    opt = Adam(params, config.lr)
    losses, valid_curve = [], []
    known = train_triples if valid_triples is None else np.vstack([train_triples, valid_triples])
    for epoch in range(1, config.num_iterations + 1):
        order = rng.permutation(len(queries))
        epoch_losses = []
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            batch = queries[order[start:start + config.batch_size]]
            targets = np.zeros((len(batch), n_entities))
            for i, (h, r) in enumerate(batch):
                targets[i, vocab[(int(h), int(r))]] = 1.0
            loss, grads = loss_and_grads(params, batch[:, 0], batch[:, 1], targets, config, rng)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch {b}")
            opt.step(params, grads)
            epoch_losses.append(loss)
        opt.lr *= config.dr
        losses.append(float(np.mean(epoch_losses)))
        if on_epoch is not None:
            on_epoch(epoch, losses[-1])
        if valid_triples is not None and eval_every and epoch % eval_every == 0 and len(valid_triples):
            mrr = evaluate_ranking(params, valid_triples, known).mrr
            valid_curve.append((epoch, mrr))
            log.info("epoch %d loss %.6f valid MRR %.4f", epoch, losses[-1], mrr)
    return TrainResult(params, losses, valid_curve)


@dataclass
class RankingReport:
    hits_at: dict[int, float]
    mrr: float
    mode: str
    excluded_relations: list = field(default_factory=list)
    n_evaluated: int = 0
    n_skipped: int = 0
    ranks: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "mrr": self.mrr,
            "hits_at": {str(k): v for k, v in sorted(self.hits_at.items())},
            "excluded_relations": list(self.excluded_relations),
            "n_evaluated": self.n_evaluated,
            "n_skipped": self.n_skipped,
        }


def known_tails(triples: np.ndarray) -> dict[tuple[int, int], np.ndarray]:
    return {k: np.array(sorted(set(v)), dtype=np.int64) for k, v in tails_by_query(triples).items()}


def rank_targets(logits: np.ndarray, targets: np.ndarray, filters: Sequence[np.ndarray | None]) -> np.ndarray:
    """Rank of each target among its row: 1 + #higher + half the exact ties.

    ``filters[i]`` lists competitor ids removed before ranking row ``i``
    (the target itself is never removed).
    """
    logits = logits.copy()
    rows = np.arange(len(targets))
    target_scores = logits[rows, targets]
    for i, f in enumerate(filters):
        if f is not None and len(f):
            logits[i, f] = -np.inf
    logits[rows, targets] = target_scores
    higher = (logits > target_scores[:, None]).sum(axis=1)
    ties = (logits == target_scores[:, None]).sum(axis=1) - 1
    return 1.0 + higher + 0.5 * ties


def evaluate_ranking(model, eval_triples: np.ndarray, all_known_triples: np.ndarray | None = None,
                     mode: str = "filtered", excluded_relations: Iterable[int] = (),
                     batch_size: int = 256, hits_at: Sequence[int] = HITS_AT) -> RankingReport:
    """Hits@n and MRR for tail prediction on id triples.

    ``model`` is anything with a ``scores(heads, rels)`` method returning a
    (batch, n_entities) array. In filtered mode every other known tail of
    the query is dropped from the competitor set.
    """
    if mode not in ("raw", "filtered"):
        raise ValueError(f"mode must be 'raw' or 'filtered', got {mode!r}")
    eval_triples = np.asarray(eval_triples, dtype=np.int64).reshape(-1, 3)
    if len(eval_triples) == 0:
        raise ValueError("empty evaluation set")
    excluded = set(int(r) for r in excluded_relations)
    keep = np.array([int(r) not in excluded for r in eval_triples[:, 1]], dtype=bool)
    kept = eval_triples[keep]
    if len(kept) == 0:
        raise ValueError("every evaluation triple has an excluded relation")
    filt = {}
    if mode == "filtered":
        known = eval_triples if all_known_triples is None else np.vstack([all_known_triples, eval_triples])
        filt = known_tails(known)
    ranks = np.empty(len(kept))
    for start in range(0, len(kept), batch_size):
        chunk = kept[start:start + batch_size]
        logits = np.asarray(model.scores(chunk[:, 0], chunk[:, 1]), dtype=float)
        filters = [filt.get((int(h), int(r))) for h, r, _ in chunk] if filt else [None] * len(chunk)
        ranks[start:start + len(chunk)] = rank_targets(logits, chunk[:, 2], filters)
    return RankingReport(
        hits_at={n: float(np.mean(ranks <= n)) for n in hits_at},
        mrr=float(np.mean(1.0 / ranks)),
        mode=mode,
        excluded_relations=sorted(excluded),
        n_evaluated=len(kept),
        n_skipped=int((~keep).sum()),
        ranks=ranks,
    )


class FrequencyBaseline:
    """Ranks tails of relation ``r`` by how often they are tails of ``r`` in training."""

    def __init__(self, train_triples: np.ndarray, n_entities: int, n_relations: int):
        self.counts = np.zeros((n_relations, n_entities))
        np.add.at(self.counts, (train_triples[:, 1], train_triples[:, 2]), 1.0)

    def scores(self, heads, rels) -> np.ndarray:
        return self.counts[np.atleast_1d(rels)]


def predict_tail(model, head: int, relation: int, k: int = 10, mode: str = "filtered",
                 known_triples: np.ndarray | None = None) -> list[tuple[int, float]]:
    """Top-``k`` tail ids with logits, best first; ties broken by lower id."""
    logits = np.asarray(model.scores(np.array([head]), np.array([relation]))[0], dtype=float)
    candidates = np.arange(len(logits))
    if mode == "filtered" and known_triples is not None and len(known_triples):
        mask = (known_triples[:, 0] == head) & (known_triples[:, 1] == relation)
        drop = set(int(t) for t in known_triples[mask, 2])
        candidates = np.array([c for c in candidates if c not in drop], dtype=np.int64)
    order = candidates[np.lexsort((candidates, -logits[candidates]))]
    return [(int(i), float(logits[i])) for i in order[:k]]


def save_checkpoint(path: str | Path, params: TuckerParams, config: TrainConfig,
                    entity_hash: str, relation_hash: str = "") -> None:
    extra = {}
    if params.bn_mean is not None:
        extra = {"bn_mean": params.bn_mean, "bn_var": params.bn_var}
    meta = {"edim": params.E.shape[1], "rdim": params.R.shape[1], "n_entities": params.n_entities,
            "n_relations": params.n_relations, "index_hash": entity_hash, "relation_hash": relation_hash,
            "config": asdict(config)}
    with open(path, "wb") as fh:
        np.savez(fh, E=params.E, R=params.R, W=params.W, meta=np.array(json.dumps(meta, sort_keys=True)), **extra)


class CheckpointMismatch(ValueError):
    pass


def load_checkpoint(path: str | Path, entity_hash: str | None = None) -> tuple[TuckerParams, TrainConfig, dict]:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if entity_hash is not None and meta["index_hash"] != entity_hash:
            raise CheckpointMismatch(f"{path}: checkpoint was trained on a different graph index")
        params = TuckerParams(data["E"].copy(), data["R"].copy(), data["W"].copy())
        if "bn_mean" in data:
            params.bn_mean, params.bn_var = data["bn_mean"].copy(), data["bn_var"].copy()
    return params, TrainConfig(**meta["config"]), meta


def relations_targeting(relation_names: Sequence[str], relation_types: dict[str, tuple[str, str]],
                        entity_type: str) -> list[str]:
    """Relations (incl. ``_reverse`` forms) whose tail is of ``entity_type``."""
    out = []
    for name in relation_names:
        if name.endswith("_reverse"):
            base = relation_types.get(name[: -len("_reverse")])
            tail = base[0] if base else None
        else:
            base = relation_types.get(name)
            tail = base[1] if base else None
        if tail == entity_type:
            out.append(name)
    return out


def warn_if_cve_target(relation: str, cve_relations: Iterable[str]) -> None:
    if relation in set(cve_relations):
        warnings.warn(
            f"relation {relation!r} predicts CVE identifiers, which are always known from the raw record",
            stacklevel=2,
        )


DEFAULT_GRID = {
    "hidden_dropout": (0.0, 0.1, 0.2),
    "lr": (0.001, 0.01, 0.1),
    "rdim": (10, 30, 200),
}


@dataclass
class GridRow:
    config: TrainConfig
    mrrs: list[float]

    @property
    def mean_mrr(self) -> float:
        return float(np.mean(self.mrrs))


def expand_grid(grid: dict[str, Sequence], base: TrainConfig) -> list[TrainConfig]:
    keys = sorted(grid)
    configs = []
    for values in product(*(grid[k] for k in keys)):
        overrides = {}
        for k, v in zip(keys, values):
            if k == "hidden_dropout":
                overrides["hidden_dropout1"] = overrides["hidden_dropout2"] = v
            else:
                overrides[k] = v
        configs.append(replace(base, **overrides))
    return configs


def grid_search(train_triples: np.ndarray, valid_triples: np.ndarray, n_entities: int, n_relations: int,
                grid: dict[str, Sequence] | None = None, base: TrainConfig | None = None,
                subset_fraction: float = 0.5, repeats: int = 2, seed: int = 0) -> list[GridRow]:
    """Train each grid point ``repeats`` times on different training subsets.

    Rows come back sorted by mean filtered validation MRR, best first.
    """
    grid = DEFAULT_GRID if grid is None else grid
    base = base or TrainConfig()
    configs = expand_grid(grid, base)
    if not configs:
        raise ValueError("empty grid")
    rng = np.random.default_rng(seed)
    subsets = []
    for _ in range(repeats):
        n = max(1, int(round(len(train_triples) * subset_fraction)))
        subsets.append(train_triples[np.sort(rng.choice(len(train_triples), size=n, replace=False))])
    known = np.vstack([train_triples, valid_triples])
    rows = []
    for cfg in configs:
        mrrs = []
        for i, subset in enumerate(subsets):
            result = train(subset, n_entities, n_relations, replace(cfg, seed=cfg.seed + i))
            mrrs.append(evaluate_ranking(result.params, valid_triples, known).mrr)
        rows.append(GridRow(cfg, mrrs))
    rows.sort(key=lambda row: -row.mean_mrr)
    return rows
