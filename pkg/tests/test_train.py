"""Loss oracles, Adam against a hand reference, the training loop, and
checkpoint round trips."""

import struct

import numpy as np
import pytest

from conftest import blob_dataset
from qspike.data import Dataset
from qspike.model import ModelConfig, SpikingQuantumClassifier, forward
from qspike.train import (AdamConfig, AdamState, CheckpointError, TrainConfig,
                          adam_step, cross_entropy, evaluate, fit,
                          load_checkpoint, save_checkpoint, write_report_csv)

# -ln(1/4) - 3 ln(3/4), the loss of a uniform 4-class prediction
UNIFORM_4CLASS_LOSS = 2.2493405784


def test_cross_entropy_uniform_oracle():
    for target in range(4):
        loss = cross_entropy(np.full(4, 0.25), target)
        assert loss == pytest.approx(UNIFORM_4CLASS_LOSS, abs=1e-9)


def test_cross_entropy_hand_value():
    probs = np.array([0.5, 0.3, 0.2])
    expected = -np.log(0.5) - np.log(0.7) - np.log(0.8)
    assert cross_entropy(probs, 0) == pytest.approx(expected, abs=1e-12)


def test_cross_entropy_confident_prediction_is_cheap():
    assert cross_entropy(np.array([1.0, 0.0, 0.0, 0.0]), 0) <= 1e-6
    assert cross_entropy(np.array([0.0, 1.0, 0.0]), 0) > 16.0


def test_cross_entropy_depends_only_on_target_and_rest_multiset():
    a = cross_entropy(np.array([0.7, 0.2, 0.1]), 0)
    b = cross_entropy(np.array([0.7, 0.1, 0.2]), 0)
    assert a == b


def test_cross_entropy_validation():
    with pytest.raises(ValueError):
        cross_entropy(np.eye(2), 0)
    with pytest.raises(ValueError):
        cross_entropy(np.full(3, 1 / 3), 3)


def make_params(seed=0):
    rng = np.random.default_rng(seed)
    return {"a": rng.normal(0, 1, (2, 3)), "b": rng.normal(0, 1, 4)}


def test_adam_zero_gradient_is_a_fixed_point():
    params = make_params()
    before = {k: p.copy() for k, p in params.items()}
    state = AdamState.init(params)
    adam_step(params, {k: np.zeros_like(p) for k, p in params.items()}, state)
    for k in params:
        assert np.array_equal(params[k], before[k])


def test_adam_first_step_is_signed_learning_rate():
    cfg = AdamConfig()
    params = {"w": np.array([1.0, -2.0, 3.0])}
    grads = {"w": np.array([0.5, -1.5, 2.0])}
    state = AdamState.init(params, cfg)
    adam_step(params, grads, state)
    step = np.array([1.0, -2.0, 3.0]) - params["w"]
    assert np.allclose(step, cfg.lr * np.sign(grads["w"]), atol=1e-7)


def test_adam_matches_hand_reference_over_two_steps():
    cfg = AdamConfig(lr=0.1, beta1=0.9, beta2=0.99, eps=1e-8)
    params = {"w": np.array([0.5])}
    state = AdamState.init(params, cfg)
    w, m, v = 0.5, 0.0, 0.0
    for t, g in [(1, 0.3), (2, -0.2)]:
        adam_step(params, {"w": np.array([g])}, state)
        m = cfg.beta1 * m + (1 - cfg.beta1) * g
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
        m_hat = m / (1 - cfg.beta1 ** t)
        v_hat = v / (1 - cfg.beta2 ** t)
        w -= cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
        assert params["w"][0] == pytest.approx(w, abs=1e-12)
    assert state.t == 2


def test_adam_updates_in_place():
    params = make_params()
    ids = {k: id(p) for k, p in params.items()}
    state = AdamState.init(params)
    adam_step(params, {k: np.ones_like(p) for k, p in params.items()}, state)
    assert {k: id(p) for k, p in params.items()} == ids


def test_adam_minimizes_a_quadratic():
    target = np.array([1.3, -0.7, 2.1])
    params = {"x": np.zeros(3)}
    state = AdamState.init(params)
    initial = 0.5 * np.sum(target ** 2)
    for _ in range(2000):
        adam_step(params, {"x": params["x"] - target}, state)
    final = 0.5 * np.sum((params["x"] - target) ** 2)
    assert np.max(np.abs(params["x"] - target)) < 0.01
    assert final < 1e-4 * initial


def test_adam_key_and_shape_validation():
    params = make_params()
    state = AdamState.init(params)
    with pytest.raises(ValueError):
        adam_step(params, {"a": np.zeros((2, 3))}, state)
    bad = {"a": np.zeros((3, 2)), "b": np.zeros(4)}
    with pytest.raises(ValueError):
        adam_step(params, bad, state)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(mode="sampled")


def toy_net():
    cfg = ModelConfig(in_dim=4, hidden_dim=3, feature_dim=2, n_qubits=2,
                      n_layers=1, n_classes=2, T=4, dt=1.0)
    return SpikingQuantumClassifier.build(cfg)


def test_evaluate_uniform_model():
    net = toy_net()
    for arr in net.parameters().values():
        arr[...] = 0.0
    ds = Dataset(np.random.default_rng(0).uniform(0, 1, (6, 4)),
                 np.array([0, 1, 0, 1, 1, 1]))
    loss, acc = evaluate(net, ds)
    assert loss == pytest.approx(-2.0 * np.log(0.5), abs=1e-9)
    assert acc == pytest.approx(2 / 6)


def test_fit_validation():
    net = toy_net()
    with pytest.raises(ValueError):
        fit(net, Dataset(np.zeros((0, 4)), np.zeros(0, dtype=np.int64)),
            TrainConfig(epochs=1, folds=1))
    with pytest.raises(ValueError):
        fit(net, Dataset(np.zeros((4, 5)), np.zeros(4, dtype=np.int64)),
            TrainConfig(epochs=1, folds=1))


def test_fit_overfits_a_tiny_set():
    rng = np.random.default_rng(0)
    ds = Dataset(rng.uniform(0, 1, (2, 4)), np.array([0, 1]))
    cfg = TrainConfig(epochs=600, batch_size=2, folds=1, seed=0,
                      mode="expected")
    report = fit(toy_net(), ds, cfg)
    train_rows = [r for r in report.rows if r.split == "train"]
    assert train_rows[-1].loss < 0.1
    assert report.best_accuracy == 1.0
    loss0, acc0 = evaluate(report.best_model, ds)
    assert acc0 == 1.0


def test_fit_row_bookkeeping():
    ds = blob_dataset(10, seed=1, side=3, n_classes=2)
    cfg = TrainConfig(epochs=2, batch_size=4, folds=5, seed=3,
                      mode="expected")
    net = SpikingQuantumClassifier.build(
        ModelConfig(in_dim=9, hidden_dim=3, feature_dim=2, n_qubits=2,
                    n_layers=1, n_classes=2, T=2))
    report = fit(net, ds, cfg)
    assert len(report.rows) == 5 * 2 * 2
    seen = [(r.fold, r.epoch, r.split) for r in report.rows]
    expected = [(f, e, s) for f in range(5) for e in range(2)
                for s in ("train", "val")]
    assert seen == expected
    val_best = max(r.accuracy for r in report.rows if r.split == "val")
    assert report.best_accuracy == val_best


@pytest.mark.parametrize("mode", ["expected", "stochastic"])
def test_fit_is_deterministic(mode):
    ds = blob_dataset(8, seed=2, side=3, n_classes=2)
    net = SpikingQuantumClassifier.build(
        ModelConfig(in_dim=9, hidden_dim=3, feature_dim=2, n_qubits=2,
                    n_layers=1, n_classes=2, T=3))
    cfg = TrainConfig(epochs=2, batch_size=4, folds=2, seed=9, mode=mode)
    a = fit(net, ds, cfg)
    b = fit(net, ds, cfg)
    assert a.rows == b.rows
    assert (a.best_fold, a.best_epoch) == (b.best_fold, b.best_epoch)
    for k, p in a.best_model.parameters().items():
        assert np.array_equal(p, b.best_model.parameters()[k])


def test_fit_moves_every_tensor():
    ds = blob_dataset(8, seed=4, side=3, n_classes=2)
    base = SpikingQuantumClassifier.build(
        ModelConfig(in_dim=9, hidden_dim=3, feature_dim=2, n_qubits=2,
                    n_layers=1, n_classes=2, T=2))
    cfg = TrainConfig(epochs=3, batch_size=4, folds=1, seed=5,
                      mode="expected")
    report = fit(base, ds, cfg)
    fresh = SpikingQuantumClassifier.build(
        base.config, np.random.default_rng([cfg.seed, 0]), seed=cfg.seed)
    for k, p in report.best_model.parameters().items():
        assert not np.array_equal(p, fresh.parameters()[k]), k


def test_write_report_csv_format(tmp_path):
    ds = Dataset(np.random.default_rng(0).uniform(0, 1, (2, 4)),
                 np.array([0, 1]))
    report = fit(toy_net(), ds,
                 TrainConfig(epochs=1, batch_size=2, folds=1, mode="expected"))
    out = tmp_path / "report.csv"
    write_report_csv(report, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "fold,epoch,split,loss,accuracy"
    assert len(lines) == 3
    fold, epoch, split, loss, acc = lines[1].split(",")
    assert (fold, epoch, split) == ("0", "0", "train")
    float(loss), float(acc)


def test_checkpoint_round_trip_is_byte_exact(tmp_path):
    net = toy_net()
    state = AdamState.init(net.parameters())
    adam_step(net.parameters(),
              {k: np.full_like(p, 0.01) for k, p in net.parameters().items()},
              state)
    p1, p2 = tmp_path / "a.qspk", tmp_path / "b.qspk"
    save_checkpoint(net, state, p1)
    net2, state2 = load_checkpoint(p1)
    save_checkpoint(net2, state2, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert state2.t == state.t
    image = np.random.default_rng(1).uniform(0, 1, 4)
    a, _ = forward(net, image)
    b, _ = forward(net2, image)
    assert np.array_equal(a, b)


def test_checkpoint_without_optimizer_state(tmp_path):
    cfg = ModelConfig(in_dim=4, hidden_dim=3, feature_dim=2, n_qubits=2,
                      n_layers=1, n_classes=2, T=4, head_kind="classical")
    net = SpikingQuantumClassifier.build(cfg, np.random.default_rng(7))
    path = tmp_path / "c.qspk"
    save_checkpoint(net, None, path)
    net2, state2 = load_checkpoint(path)
    assert state2 is None
    assert net2.config == cfg
    for k, p in net.parameters().items():
        assert np.array_equal(p, net2.parameters()[k])


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "x.qspk"
    path.write_bytes(b"ZIP!" + b"\x00" * 32)
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_checkpoint_truncated_header(tmp_path):
    path = tmp_path / "x.qspk"
    path.write_bytes(b"QSPK\x00\x00")
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)


def test_checkpoint_unsupported_version(tmp_path):
    path = tmp_path / "x.qspk"
    path.write_bytes(b"QSPK" + struct.pack(">II", 99, 0))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)


def test_checkpoint_truncated_payload(tmp_path):
    net = toy_net()
    path = tmp_path / "x.qspk"
    save_checkpoint(net, None, path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(path)


def test_checkpoint_trailing_garbage(tmp_path):
    net = toy_net()
    path = tmp_path / "x.qspk"
    save_checkpoint(net, None, path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(CheckpointError, match="trailing"):
        load_checkpoint(path)


def test_checkpoint_corrupt_meta(tmp_path):
    path = tmp_path / "x.qspk"
    blob = b"{not json"
    path.write_bytes(b"QSPK" + struct.pack(">II", 1, len(blob)) + blob)
    with pytest.raises(CheckpointError, match="meta"):
        load_checkpoint(path)
