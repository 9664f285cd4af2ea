import warnings
from dataclasses import asdict

import numpy as np
import pytest

import toygraph
from vulnkg.tucker import (
    DEFAULT_GRID, CheckpointMismatch, FrequencyBaseline, TrainConfig, TrainingDiverged, TuckerParams,
    bce_with_logits, evaluate_ranking, expand_grid, forward, grid_search, init_params, load_checkpoint,
    loss_and_grads, predict_tail, rank_targets, save_checkpoint, smooth_targets, train, warn_if_cve_target,
)

TOY = TrainConfig(num_iterations=200, lr=0.01, edim=20, rdim=20, label_smoothing=0.1,
                  input_dropout=0.1, hidden_dropout1=0.1, hidden_dropout2=0.1, batch_size=128)
NO_DROPOUT = dict(input_dropout=0.0, hidden_dropout1=0.0, hidden_dropout2=0.0)


class TableModel:
    """Scores looked up from a fixed (n_entities, n_relations, n_entities) table."""

    def __init__(self, table):
        self.table = table

    def scores(self, heads, rels):
        return self.table[np.atleast_1d(heads), np.atleast_1d(rels)]


# --- parameters and forward pass

def test_shapes_and_seeded_init():
    cfg = TrainConfig(edim=6, rdim=4, seed=3)
    p = init_params(11, 5, cfg)
    assert (p.E.shape, p.R.shape, p.W.shape) == ((11, 6), (5, 4), (6, 4, 6))
    q = init_params(11, 5, cfg)
    assert all(np.array_equal(getattr(p, k), getattr(q, k)) for k in "ERW")
    assert not np.array_equal(p.E, init_params(11, 5, cfg, seed=4).E)
    logits, _ = forward(p, np.array([0, 3, 10]), np.array([1, 1, 4]))
    assert logits.shape == (3, 11)


def test_parameter_count_formula():
    p = init_params(7, 3, TrainConfig(edim=10, rdim=4))
    assert p.n_parameters() == 7 * 10 + 3 * 4 + 10 * 4 * 10
    n_e, n_r = 8605, 14
    assert n_e * 200 + n_r * 30 + 200 * 30 * 200 == TuckerParams(
        np.zeros((n_e, 200)), np.zeros((n_r, 30)), np.zeros((200, 30, 200))).n_parameters()


def test_core_shape_checked():
    with pytest.raises(ValueError, match="core tensor"):
        TuckerParams(np.zeros((3, 2)), np.zeros((1, 2)), np.zeros((2, 3, 2)))


def test_scalar_logits():
    p = TuckerParams(E=np.array([[1.0], [-1.0]]), R=np.array([[3.0]]), W=np.array([[[2.0]]]))
    assert forward(p, np.array([0]), np.array([0]))[0].tolist() == [[6.0, -6.0]]


def test_zero_core_gives_zero_logits():
    p = init_params(5, 2, TrainConfig(edim=3, rdim=2))
    p.W[...] = 0.0
    assert not forward(p, np.array([0, 1]), np.array([0, 1]))[0].any()


def test_forward_matches_triple_loop():
    p = init_params(6, 3, TrainConfig(edim=4, rdim=3, seed=1))
    heads, rels = np.array([0, 2, 5]), np.array([1, 0, 2])
    logits = forward(p, heads, rels)[0]
    de, dr = 4, 3
    for b, (h, r) in enumerate(zip(heads, rels)):
        for t in range(6):
            s = 0.0
            for i in range(de):
                for j in range(dr):
                    for k in range(de):
                        s += p.W[i, j, k] * p.E[h, i] * p.R[r, j] * p.E[t, k]
            assert abs(logits[b, t] - s) <= 1e-10


def test_forward_rejects_bad_ids():
    p = init_params(3, 1, TrainConfig(edim=2, rdim=2))
    with pytest.raises(IndexError):
        forward(p, np.array([3]), np.array([0]))


# --- loss and gradients

def test_bce_matches_reference_and_is_stable():
    x = np.array([[-1000.0, -3.0, 0.0, 2.5, 1000.0]])
    t = np.array([[0.0, 1.0, 0.3, 1.0, 1.0]])
    loss, grad = bce_with_logits(x, t)
    ref = np.mean(np.logaddexp(0, x) - t * x)
    assert loss == pytest.approx(ref, abs=1e-12)
    with np.errstate(over="ignore"):
        sig = 1 / (1 + np.exp(-x))
    np.testing.assert_allclose(grad, (sig - t) / x.size, atol=1e-15)


@pytest.mark.parametrize("batch_norm", [False, True])
def test_finite_difference_gradients(batch_norm):
    cfg = TrainConfig(edim=4, rdim=3, label_smoothing=0.1, batch_norm=batch_norm, seed=2, **NO_DROPOUT)
    p = init_params(5, 2, cfg)
    p.E *= 10
    p.R *= 10
    heads, rels = np.array([0, 1, 3]), np.array([0, 1, 1])
    targets = np.zeros((3, 5))
    targets[[0, 1, 2], [2, 4, 0]] = 1.0

    def loss_at(q):
        # eval mode keeps running statistics fixed, so the loss is a pure function
        return loss_and_grads(q, heads, rels, targets, cfg, train_mode=False)[0]

    _, grads = loss_and_grads(p, heads, rels, targets, cfg, train_mode=False)
    eps = 1e-6
    for name in "ERW":
        arr = getattr(p, name)
        numeric = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + eps
            up = loss_at(p)
            arr[idx] = old - eps
            down = loss_at(p)
            arr[idx] = old
            numeric[idx] = (up - down) / (2 * eps)
        err = np.abs(numeric - grads[name]).max() / max(1e-8, np.abs(numeric).max())
        assert err <= 1e-4, (name, err)


def test_train_mode_without_dropout_equals_eval():
    cfg = TrainConfig(edim=5, rdim=3, **NO_DROPOUT)
    p = init_params(7, 2, cfg)
    h, r = np.array([1, 4]), np.array([0, 1])
    a = forward(p, h, r, train_mode=True, dropout=cfg.dropouts, rng=np.random.default_rng(0))[0]
    assert np.array_equal(a, forward(p, h, r)[0])


def test_dropout_changes_train_logits_only():
    cfg = TrainConfig(edim=5, rdim=3)
    p = init_params(7, 2, cfg)
    h, r = np.array([1]), np.array([0])
    a = forward(p, h, r, train_mode=True, dropout=(0.5, 0.5, 0.5), rng=np.random.default_rng(0))[0]
    assert not np.array_equal(a, forward(p, h, r)[0])
    with pytest.raises(ValueError, match="rng"):
        forward(p, h, r, train_mode=True, dropout=(0.5, 0.0, 0.0))


def test_label_smoothing_bounds():
    t = np.zeros((2, 10))
    t[0, 3] = 1.0
    s = smooth_targets(t, 0.1)
    assert s.min() == pytest.approx(0.01) and s.max() == pytest.approx(0.91)
    assert ((s > 0) & (s < 1)).all()
    assert np.array_equal(smooth_targets(t, 0.0), t)


@pytest.mark.parametrize("field,value", [("input_dropout", 1.0), ("label_smoothing", -0.1), ("edim", 0)])
def test_config_validation(field, value):
    with pytest.raises(ValueError):
        TrainConfig(**{field: value})


def test_defaults():
    c = TrainConfig()
    assert (c.num_iterations, c.lr, c.dr, c.batch_size, c.input_dropout, c.hidden_dropout1,
            c.hidden_dropout2, c.label_smoothing) == (300, 0.001, 1.0, 128, 0.2, 0.1, 0.0, 0.1)
    assert (c.edim, c.rdim, c.batch_norm) == (200, 30, False)


# --- ranking

def test_rank_example_metrics():
    logits = np.array([[9.0, 1.0, 2.0, 3.0, 0.0]] * 3)
    ranks = rank_targets(logits, np.array([0, 3, 1]), [None] * 3)
    assert ranks.tolist() == [1.0, 2.0, 4.0]
    table = np.zeros((5, 1, 5))
    table[0, 0] = [9.0, 1.0, 2.0, 3.0, 0.0]
    rep = evaluate_ranking(TableModel(table), np.array([[0, 0, 0], [0, 0, 3], [0, 0, 1]]), mode="raw")
    assert rep.mrr == pytest.approx((1 + 1 / 2 + 1 / 4) / 3, abs=1e-4)
    assert round(rep.mrr, 4) == 0.5833
    assert rep.hits_at[1] == pytest.approx(1 / 3) and rep.hits_at[3] == pytest.approx(2 / 3)


def test_ties_get_half_credit():
    assert rank_targets(np.array([[1.0, 1.0, 1.0, 0.0]]), np.array([1]), [None]).tolist() == [2.0]


def _oracle_rank(row, target, drop):
    cands = [c for c in range(len(row)) if c == target or c not in drop]
    ordered = sorted(cands, key=lambda c: -row[c])
    s = row[target]
    positions = [i + 1 for i, c in enumerate(ordered) if row[c] == s]
    return (positions[0] + positions[-1]) / 2


@pytest.mark.parametrize("seed", range(5))
def test_ranking_matches_sort_oracle(seed):
    rng = np.random.default_rng(seed)
    n_e, n_r = 12, 3
    table = rng.integers(0, 4, size=(n_e, n_r, n_e)).astype(float)
    known = np.unique(np.column_stack([rng.integers(0, n_e, 60), rng.integers(0, n_r, 60),
                                       rng.integers(0, n_e, 60)]), axis=0)
    test = known[rng.choice(len(known), 15, replace=False)]
    model = TableModel(table)
    raw = evaluate_ranking(model, test, known, mode="raw")
    filt = evaluate_ranking(model, test, known, mode="filtered")
    for i, (h, r, t) in enumerate(test):
        drop = {int(x[2]) for x in known if x[0] == h and x[1] == r and x[2] != t}
        assert raw.ranks[i] == _oracle_rank(table[h, r], t, set())
        assert filt.ranks[i] == _oracle_rank(table[h, r], t, drop)
    assert (filt.ranks <= raw.ranks).all() and filt.mrr >= raw.mrr


def test_ranking_deterministic_and_metrics_ordered():
    table = np.random.default_rng(0).normal(size=(30, 2, 30))
    test = np.column_stack([np.arange(30), np.arange(30) % 2, (np.arange(30) * 7) % 30])
    a = evaluate_ranking(TableModel(table), test, batch_size=7)
    b = evaluate_ranking(TableModel(table), test, batch_size=256)
    assert a.to_dict() == b.to_dict()
    assert a.hits_at[1] <= a.hits_at[3] <= a.hits_at[10]
    assert a.hits_at[1] <= a.mrr <= 1.0


def test_ranking_errors_and_exclusions():
    model = TableModel(np.zeros((3, 2, 3)))
    with pytest.raises(ValueError, match="empty"):
        evaluate_ranking(model, np.zeros((0, 3), dtype=int))
    with pytest.raises(ValueError, match="mode"):
        evaluate_ranking(model, np.array([[0, 0, 1]]), mode="both")
    with pytest.raises(ValueError, match="excluded"):
        evaluate_ranking(model, np.array([[0, 0, 1]]), excluded_relations=[0])
    rep = evaluate_ranking(model, np.array([[0, 0, 1], [0, 1, 2]]), excluded_relations=[1])
    assert (rep.n_evaluated, rep.n_skipped) == (1, 1)


def test_frequency_baseline():
    train_rows = np.array([[0, 0, 2], [1, 0, 2], [1, 0, 3], [0, 1, 1]])
    fb = FrequencyBaseline(train_rows, 4, 2)
    assert fb.scores([5], [0]).tolist() == [[0.0, 0.0, 2.0, 1.0]]


# --- training

def test_toy_loss_decreases_early():
    train_rows, _ = toygraph.toy_graph(0)
    cfg = TrainConfig(**{**asdict(TOY), "num_iterations": 5})
    losses = train(train_rows, toygraph.N_ENTITIES, toygraph.N_RELATIONS, cfg).losses
    upticks = sum(b > a for a, b in zip(losses, losses[1:]))
    assert upticks <= 1 and losses[-1] < losses[0]


def test_training_deterministic():
    train_rows, _ = toygraph.toy_graph(1)
    cfg = TrainConfig(**{**asdict(TOY), "num_iterations": 3})
    a = train(train_rows, 20, 4, cfg)
    b = train(train_rows, 20, 4, cfg)
    assert a.losses == b.losses and np.array_equal(a.params.W, b.params.W)


def test_training_divergence_aborts():
    train_rows, _ = toygraph.toy_graph(0)
    cfg = TrainConfig(edim=4, rdim=4, num_iterations=2)
    p = init_params(20, 4, cfg)
    p.W[0, 0, 0] = np.inf
    with pytest.raises(TrainingDiverged, match="epoch 1"), np.errstate(invalid="ignore"):
        train(train_rows, 20, 4, cfg, params=p)
    with pytest.raises(ValueError, match="no training"):
        train(np.zeros((0, 3), dtype=int), 20, 4, cfg)


@pytest.fixture(scope="module")
def toy_model():
    train_rows, test_rows = toygraph.toy_graph(0)
    return train(train_rows, toygraph.N_ENTITIES, toygraph.N_RELATIONS, TOY).params, train_rows, test_rows


def test_toy_model_predicts_held_out_roots(toy_model):
    params, train_rows, test_rows = toy_model
    for h, r, t in test_rows:
        top = predict_tail(params, int(h), int(r), k=1, known_triples=train_rows)
        assert top[0][0] == t


def test_predict_tail_full_permutation(toy_model):
    params, _, _ = toy_model
    out = predict_tail(params, 0, toygraph.R1, k=toygraph.N_ENTITIES, mode="raw")
    assert sorted(i for i, _ in out) == list(range(toygraph.N_ENTITIES))
    scores = [s for _, s in out]
    assert scores == sorted(scores, reverse=True)


def test_predict_tail_filtered_drops_known():
    model = TableModel(np.tile(np.arange(4.0), (4, 1, 1)))
    known = np.array([[0, 0, 3]])
    assert [i for i, _ in predict_tail(model, 0, 0, k=4, known_triples=known)] == [2, 1, 0]
    assert [i for i, _ in predict_tail(model, 0, 0, k=2, mode="raw", known_triples=known)] == [3, 2]


def test_cve_target_warning():
    with pytest.warns(UserWarning, match="CVE"):
        warn_if_cve_target("has_weakness_reverse", ["has_weakness_reverse"])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        warn_if_cve_target("has_weakness", ["has_weakness_reverse"])


def test_checkpoint_round_trip_and_mismatch(tmp_path, toy_model):
    params, _, _ = toy_model
    save_checkpoint(tmp_path / "m.npz", params, TOY, "abc")
    loaded, cfg, meta = load_checkpoint(tmp_path / "m.npz", "abc")
    assert cfg == TOY and meta["n_entities"] == 20 and np.array_equal(loaded.W, params.W)
    with pytest.raises(CheckpointMismatch):
        load_checkpoint(tmp_path / "m.npz", "other")


# --- grid

def test_default_grid_has_27_configs():
    configs = expand_grid(DEFAULT_GRID, TrainConfig())
    assert len(configs) == 27
    assert {c.rdim for c in configs} == {10, 30, 200} and {c.edim for c in configs} == {200}
    assert all(c.hidden_dropout1 == c.hidden_dropout2 for c in configs)


def test_grid_single_config():
    train_rows, test_rows = toygraph.toy_graph(0)
    base = TrainConfig(edim=4, rdim=4, num_iterations=2)
    rows = grid_search(train_rows, test_rows, 20, 4, grid={"lr": [0.01]}, base=base, repeats=2)
    assert len(rows) == 1 and len(rows[0].mrrs) == 2 and 0 < rows[0].mean_mrr <= 1
