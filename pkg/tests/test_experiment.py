import csv
import io
import math

import numpy as np
import pytest

import trica.experiment as experiment
from trica.classify import PipelineConfig
from trica.experiment import (CSV_COLUMNS, ExperimentConfig, accuracy, as_binary_task, cell_seed,
                              load_network_ref, parse_config, pica_features, result_rows, results_csv,
                              run_experiment)
from trica.factorization import FitConfig, fit_single
from trica.graph import split_labeled
from trica.ingest import write_network

SOURCE = "planted:blocks=30x2,p_in=0.25,p_out=0.02,dim=10,noise=2,seed=1,prefix=s"
TARGET = "planted:blocks=30x2,p_in=0.25,p_out=0.02,dim=8,noise=2,seed=2"
FAST = PipelineConfig(fit=FitConfig(max_sweeps=20), k=4)


def test_accuracy_values():
    truth = np.array([0, 1, 1, 0])
    assert accuracy(truth, truth, [0, 1, 2, 3]) == 1.0
    assert accuracy(1 - truth, truth, [0, 1, 2, 3]) == 0.0
    assert accuracy([0, 1, 0, 0], truth, [0, 1, 2, 3]) == 0.75


def test_accuracy_empty_eval_set():
    with pytest.raises(ValueError):
        accuracy([0], [0], [])


def test_two_factor_identity_residual():
    f = fit_single(np.eye(6), 6, init=(np.eye(6), np.eye(6)))
    assert np.linalg.norm(np.eye(6) - f.F @ f.R.T) <= 1e-6


def test_pica_features_shape_and_k():
    target = as_binary_task(load_network_ref(TARGET))
    split = split_labeled(target, 0.3, seed=0)
    latent = pica_features(target, split, FAST)
    assert latent.rows.shape == (60, 4) and latent.k == 4
    auto = pica_features(target, split, PipelineConfig(fit=FitConfig(max_sweeps=20), k_max=6, k_step=2))
    assert [k for k, _ in auto.scores] == [2, 4, 6]


def test_load_network_ref_forms(tmp_path):
    net = load_network_ref("planted:blocks=5x3,p_in=0.5,p_out=0.1,seed=4")
    assert net.n == 15 and len(net.label_set) == 3
    uneven = load_network_ref("planted:blocks=4/6,seed=1")
    assert uneven.n == 10
    write_network(net, tmp_path / "net.txt")
    assert load_network_ref(str(tmp_path / "net.txt")) == net


def test_as_binary_task_picks_largest_class():
    net = load_network_ref("planted:blocks=4/6/5,seed=1")
    binary = as_binary_task(net)
    assert binary.positive_label == "block1"
    assert as_binary_task(binary) is binary


def test_cell_seed_paired_and_distinct():
    assert cell_seed(0, 0.1, 0) == cell_seed(0, 0.1, 0)
    assert len({cell_seed(0, p, r) for p in (0.1, 0.2) for r in range(3)}) == 6
    assert cell_seed(0, 0.1, 0) != cell_seed(1, 0.1, 0)


def small_config(**kw):
    base = dict(target=TARGET, source=SOURCE, methods=("ica", "pica", "trica"), p_grid=(0.2, 0.4),
                repeats=2, pipeline=FAST)
    base.update(kw)
    return ExperimentConfig(**base)


def test_row_counts_and_means():
    results = run_experiment(small_config(beta_grid=(0.1,), k_grid=(3,)))
    # 3 methods x 2 p x 2 repeats, beta sweep 2 cells, k sweep 2 methods x 2 repeats
    assert len(results) == 12 + 2 + 4
    rows = result_rows(results, "S", "T")
    per_cell = [r for r in rows if r["repeat"] != "mean"]
    means = [r for r in rows if r["repeat"] == "mean"]
    assert len(per_cell) == 18 and len(means) == 9
    for i, row in enumerate(rows):
        if row["repeat"] == "mean":
            members = rows[i - 2:i]
            expected = np.mean([float(m["accuracy"]) for m in members])
            assert abs(float(row["accuracy"]) - expected) <= 1e-12
            assert {m["method"] for m in members} == {row["method"]}
    assert all(r["source"] == ("S" if r["method"] == "trica" else "") for r in rows)


def test_methods_share_splits():
    results = run_experiment(small_config(p_grid=(0.3,), repeats=1))
    assert len({r.seed for r in results}) == 1


def test_csv_is_deterministic_without_wall_time():
    cfg = small_config(p_grid=(0.3,), repeats=2)
    a = results_csv(run_experiment(cfg), "S", "T", include_wall_time=False)
    b = results_csv(run_experiment(cfg), "S", "T", include_wall_time=False)
    assert a == b
    header = next(csv.reader(io.StringIO(a)))
    assert tuple(header) == CSV_COLUMNS


def test_failed_cell_is_recorded(monkeypatch):
    real = experiment.run_method

    def flaky(method, *args, **kw):
        if method == "pica":
            raise RuntimeError("boom")
        return real(method, *args, **kw)

    monkeypatch.setattr(experiment, "run_method", flaky)
    results = run_experiment(small_config(p_grid=(0.3,), repeats=1))
    failed = [r for r in results if r.failed]
    assert [r.method for r in failed] == ["pica"]
    assert math.isnan(failed[0].accuracy) and "boom" in failed[0].error
    rows = result_rows(results)
    assert [r["converged"] for r in rows if r["method"] == "pica"][0] == "failed"
    assert len([r for r in results if not r.failed]) == 2


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(target=TARGET, methods=("trica",))
    with pytest.raises(ValueError):
        ExperimentConfig(target=TARGET, methods=("svm",))
    with pytest.raises(ValueError):
        ExperimentConfig(target=TARGET, methods=("ica",), p_grid=(1.0,))


def test_parse_config():
    text = """
    # toy sweep
    target = t.txt
    source = s.txt
    methods = ica, trica
    p_grid = 0.1, 0.2
    repeats = 4
    beta_grid = 0.01 0.1 1
    k_grid = 5, 10
    rules = standard
    beta = 0.5
    k = 7
    alpha = 0.3
    """
    cfg = parse_config(text)
    assert cfg.methods == ("ica", "trica") and cfg.p_grid == (0.1, 0.2)
    assert cfg.repeats == 4 and cfg.beta_grid == (0.01, 0.1, 1.0) and cfg.k_grid == (5, 10)
    assert cfg.pipeline.fit.rule_set == "standard_tri_nmf" and cfg.pipeline.fit.normalize == "none"
    assert cfg.pipeline.fit.beta == 0.5 and cfg.pipeline.k == 7 and cfg.pipeline.affinity.alpha == 0.3


def test_parse_config_defaults_and_errors():
    cfg = parse_config("target = t.txt\nmethods = ica\n")
    assert cfg.pipeline.k is None and cfg.repeats == 3
    with pytest.raises(ValueError):
        parse_config("target = t\nbogus = 1\n")
    with pytest.raises(ValueError):
        parse_config("methods = ica\n")
    with pytest.raises(ValueError):
        parse_config("target t\n")


@pytest.mark.slow
def test_moderate_beta_not_worse_than_tiny():
    src = "planted:blocks=60x2,p_in=0.25,p_out=0.01,dim=30,noise=3,seed=101,prefix=s"
    tgt = "planted:blocks=60x2,p_in=0.25,p_out=0.01,dim=20,noise=3,seed=201"
    cfg = ExperimentConfig(target=tgt, source=src, methods=("trica",), p_grid=(0.5,), repeats=3,
                           beta_grid=(0.01, 0.5, 1.0), pipeline=PipelineConfig(k=10))
    results = run_experiment(cfg)
    mean = {b: np.mean([r.accuracy for r in results if r.beta == b]) for b in (0.01, 0.5, 1.0)}
    assert min(mean[0.5], mean[1.0]) >= mean[0.01] - 0.02
