import numpy as np
import pytest

from trica.classify import (IcaConfig, LogisticConfig, PipelineConfig, aggregate, logistic_loss_grad, predict,
                            predict_proba, relational_features, run_ica, train_base, transfer_features, tr_ica)
from trica.experiment import accuracy, pica_features
from trica.factorization import FitConfig
from trica.graph import LabeledSplit, binarize_labels, split_labeled
from trica.ingest import PlantedPartitionParams, generate_planted_partition

from conftest import make_network


def star(labels):
    """Node 0 joined to nodes 1..len(labels), labeled a/b."""
    n = len(labels) + 1
    net = make_network(n, [(0, i) for i in range(1, n)], labels=["a"] + list(labels))
    return binarize_labels(net, "a")


def test_relational_proportions():
    net = star(["a", "a", "b"])
    current = net.label_index()
    pos = net.positive_index()
    feat = relational_features(net, current, 0)
    assert feat[pos] == pytest.approx(2 / 3) and feat[1 - pos] == pytest.approx(1 / 3)


def test_relational_no_assigned_neighbors():
    net = star(["a", "b"])
    current = np.full(net.n, -1)
    assert not relational_features(net, current, 0).any()
    assert not relational_features(make_network(2, [], labels=["a", "b"]), np.array([0, 1]), 0).any()


def test_relational_single_neighbor():
    net = star(["a"])
    feat = relational_features(net, net.label_index(), 0)
    assert feat[net.positive_index()] == 1.0 and feat.sum() == 1.0


def test_aggregations():
    c = np.array([1.0, 3.0])
    assert aggregate(c, "count").tolist() == [1.0, 3.0]
    assert aggregate(c, "mode").tolist() == [0.0, 1.0]
    with pytest.raises(ValueError):
        aggregate(c, "median")


def test_zero_weights_give_half():
    rng = np.random.default_rng(0)
    model = train_base(np.zeros((4, 3)), np.array([0, 1, 0, 1]))
    assert np.allclose(model.weights, 0.0)
    assert predict_proba(model, rng.standard_normal(3)) == pytest.approx(0.5)


def test_separable_one_dimensional():
    X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    y = np.array([0, 0, 1, 1])
    model = train_base(X, y)
    assert [predict(model, x)[0] for x in X] == [0, 0, 1, 1]


def test_predict_threshold_inclusive():
    model = train_base(np.zeros((2, 1)), np.array([0, 1]))
    label, p = predict(model, [5.0])
    assert p == pytest.approx(0.5) and label == 1


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((30, 4))
    y = (rng.random(30) < 0.5).astype(float)
    params = rng.standard_normal(5)
    _, grad = logistic_loss_grad(params, X, y, 1e-3)
    h = 1e-6
    fd = np.array([(logistic_loss_grad(params + h * e, X, y, 1e-3)[0]
                    - logistic_loss_grad(params - h * e, X, y, 1e-3)[0]) / (2 * h) for e in np.eye(5)])
    assert np.max(np.abs(fd - grad)) <= 1e-5


def test_training_loss_is_monotone():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((80, 5))
    y = (X[:, 0] + 0.5 * rng.standard_normal(80) > 0).astype(float)
    model = train_base(X, y, config=LogisticConfig(max_iter=300))
    h = np.array(model.loss_history)
    assert model.trained and (np.diff(h) <= 1e-15).all()


def test_single_class_gives_prior():
    model = train_base(np.ones((3, 2)), np.array([1, 1, 1]))
    assert model.constant_prior and not model.trained
    assert predict_proba(model, [0.0, 0.0]) == pytest.approx(4 / 5)


def test_train_rejects_bad_input():
    with pytest.raises(ValueError):
        train_base(np.ones((3, 2)), np.array([0, 1]))
    with pytest.raises(ValueError):
        train_base(np.array([[np.nan], [1.0]]), np.array([0, 1]))


def planted_binary(seed, sizes=(40, 40), p_in=0.2, p_out=0.02, noise=1.0, dim=8, prefix="block"):
    net = generate_planted_partition(PlantedPartitionParams(list(sizes), p_in, p_out, feature_dim=dim,
                                                            feature_noise=noise, seed=seed, label_prefix=prefix))
    return binarize_labels(net, f"{prefix}0")


def test_ica_all_labeled_is_unchanged():
    net = planted_binary(0)
    split = split_labeled(net, 1.0, seed=0)
    res = run_ica(net, split)
    assert res.passes == 0 and res.converged
    assert res.predicted.tolist() == net.label_index().tolist()


def test_ica_keeps_observed_labels():
    net = planted_binary(1)
    split = split_labeled(net, 0.3, seed=1)
    res = run_ica(net, split)
    truth = net.label_index()
    assert (res.predicted[split.labeled] == truth[split.labeled]).all()
    assert set(res.labels) <= set(net.label_set)


def test_ica_ignores_hidden_labels():
    net = planted_binary(2)
    split = split_labeled(net, 0.3, seed=2)
    hidden = net.with_labels([y if i in set(split.labeled.tolist()) else None for i, y in enumerate(net.labels)],
                             label_set=net.label_set, positive_label=net.positive_label)
    a, b = run_ica(net, split), run_ica(hidden, split)
    assert a.predicted.tolist() == b.predicted.tolist()


def test_ica_deterministic():
    net = planted_binary(3)
    split = split_labeled(net, 0.2, seed=3)
    a, b = run_ica(net, split, config=IcaConfig(seed=5)), run_ica(net, split, config=IcaConfig(seed=5))
    assert a.predicted.tolist() == b.predicted.tolist()
    assert np.array_equal(a.probabilities, b.probabilities)


def test_ica_beats_chance_on_clear_structure():
    net = planted_binary(4, noise=0.5)
    split = split_labeled(net, 0.3, seed=4)
    res = run_ica(net, split)
    assert accuracy(res.predicted, net.label_index(), split.unlabeled) >= 0.8


def test_ica_pass_cap():
    net = planted_binary(5, noise=3.0)
    split = split_labeled(net, 0.1, seed=5)
    res = run_ica(net, split, config=IcaConfig(max_iterations=1))
    assert res.passes == 1 and len(res.changes) == 1


def test_ica_rejects_bad_split():
    net = planted_binary(6)
    with pytest.raises(ValueError):
        run_ica(net, LabeledSplit(np.array([0, 1]), np.array([1, 2]), 0.1, 0))


def test_ica_latent_row_count_checked():
    net = planted_binary(7)
    split = split_labeled(net, 0.3, seed=7)
    with pytest.raises(ValueError):
        run_ica(net, split, latent=np.ones((3, 2)))


def test_self_transfer_matches_single_network():
    net = planted_binary(8, noise=2.0)
    split = split_labeled(net, 0.2, seed=8)
    truth = net.label_index()
    cfg = PipelineConfig(fit=FitConfig(seed=0), k=4)
    tr = tr_ica(net, net, split, cfg)
    pica = run_ica(net, split, pica_features(net, split, cfg).rows, cfg.ica, cfg.base)
    acc_tr = accuracy(tr.predicted, truth, split.unlabeled)
    acc_pica = accuracy(pica.predicted, truth, split.unlabeled)
    assert acc_tr >= acc_pica - 0.02


def test_k_below_two_is_clamped():
    net = planted_binary(9, sizes=(10, 10))
    split = split_labeled(net, 0.5, seed=9)
    latent = transfer_features(net, net, split, PipelineConfig(fit=FitConfig(max_sweeps=10), k=1))
    assert latent.k == 2 and latent.rows.shape == (20, 2)


def test_automatic_k_records_scores():
    net = planted_binary(10, sizes=(15, 15))
    split = split_labeled(net, 0.5, seed=10)
    latent = transfer_features(net, net, split, PipelineConfig(fit=FitConfig(max_sweeps=10), k_max=6, k_step=2))
    assert [k for k, _ in latent.scores] == [2, 4, 6]
    assert latent.k in (2, 4, 6)
