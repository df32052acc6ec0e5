import math
from dataclasses import replace

import numpy as np
import pytest

from confdiff.datasets import LabeledDataset
from confdiff.errors import AbortedRunError, ConfigError
from confdiff.models import ModelParams, ModelSpec
from confdiff.optim import OptimizerConfig
from confdiff.rng import stream
from confdiff.synth import GaussianMixtureSpec, bayes_accuracy, bayes_rule_linear, make_labeled_dataset, make_training_sets
from confdiff.trainer import Estimator, TrainConfig, epoch_batches, evaluate_accuracy, train


def _sets(spec, n, seed=0):
    return make_training_sets(spec, n, stream(seed, "train")), make_labeled_dataset(spec, 2000, stream(seed, "test"))


def _small(estimator, epochs=5, **kw):
    return TrainConfig(estimator=estimator, epochs=epochs, batch_pairs=32, eval_tail_epochs=2,
                       model=ModelSpec("mlp", 2, (8, 8), 1), optimizer=OptimizerConfig(learning_rate=1e-2), **kw)


def test_separable_supervised():
    spec = GaussianMixtureSpec.isotropic([3.0, 3.0], [-3.0, -3.0], 1.0, 0.5)
    sets, test = _sets(spec, 500)
    cfg = TrainConfig(estimator="supervised_hard", epochs=50, batch_pairs=64, eval_tail_epochs=10,
                      model=ModelSpec("linear", 2), optimizer=OptimizerConfig(learning_rate=1e-2))
    result = train(sets.labeled, test, cfg)
    assert result.final_accuracy > 0.99


def test_frozen_zero_model_has_ln2_risk(spec):
    sets, test = _sets(spec, 300)
    cfg = TrainConfig(estimator="confdiff_unbiased", epochs=4, batch_pairs=50, eval_tail_epochs=1,
                      model=ModelSpec("linear", 2), optimizer=OptimizerConfig(learning_rate=0.0))
    zero = ModelParams(cfg.model.layer_shapes())
    result = train(sets.confdiff, test, cfg, params=zero)
    np.testing.assert_allclose(result.train_risk, math.log(2), rtol=1e-14)
    np.testing.assert_array_equal(result.params.flat, 0.0)


@pytest.mark.parametrize("est", list(Estimator))
def test_every_estimator_runs_and_is_deterministic(spec, est):
    sets, test = _sets(spec, 120)
    cfg = _small(est, alpha=0.3)
    a = train(sets.select(est.data_type), test, cfg)
    b = train(sets.select(est.data_type), test, cfg)
    assert a.to_lines() == b.to_lines() and a.to_json() == b.to_json()
    assert len(a.train_risk) == len(a.test_accuracy) == 5
    assert 0.0 <= a.final_accuracy <= 1.0
    assert a.final_accuracy == pytest.approx(np.mean(a.test_accuracy[-2:]))
    assert a.min_train_risk == min(a.train_risk)


@pytest.mark.parametrize("est", ["confdiff_relu", "confdiff_abs"])
def test_corrected_risks_nonnegative(spec, est):
    sets, test = _sets(spec, 60, seed=3)
    cfg = replace(_small(est, epochs=30), batch_pairs=8)
    result = train(sets.confdiff, test, cfg)
    assert min(result.train_risk) >= 0.0


def test_seed_changes_shuffle(spec):
    sets, test = _sets(spec, 200)
    a = train(sets.confdiff, test, _small("confdiff_abs", seed=1))
    b = train(sets.confdiff, test, _small("confdiff_abs", seed=2))
    assert a.train_risk != b.train_risk


def test_epoch_batches_partition(rng):
    for n, bs in ((10, 3), (7, 7), (5, 16), (256, 32)):
        batches = epoch_batches(n, bs, rng)
        assert all(len(b) == bs for b in batches[:-1]) and 1 <= len(batches[-1]) <= bs
        assert sorted(np.concatenate(batches).tolist()) == list(range(n))


def test_estimator_dataset_mismatch(spec):
    sets, test = _sets(spec, 20)
    with pytest.raises(ConfigError):
        train(sets.labeled, test, _small("confdiff_abs"))
    with pytest.raises(ConfigError):
        train(sets.confdiff, test, _small("pcomp_unbiased"))
    with pytest.raises(ConfigError):
        train(sets.confdiff, test, replace(_small("confdiff_abs"), model=ModelSpec("linear", 3)))
    with pytest.raises(ConfigError):
        TrainConfig(epochs=5, eval_tail_epochs=10)
    with pytest.raises(ValueError):
        TrainConfig(estimator="nonsense")


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_aborts(spec):
    sets, test = _sets(spec, 50)
    cfg = TrainConfig(estimator="supervised_hard", epochs=20, batch_pairs=10, eval_tail_epochs=1,
                      model=ModelSpec("linear", 2), optimizer=OptimizerConfig("sgd", learning_rate=1e308))
    with pytest.raises(AbortedRunError) as info:
        train(sets.labeled, test, cfg)
    assert info.value.epoch >= 1


class TestEvaluate:
    def test_zero_scores_count_positives(self, rng):
        y = np.array([1, 1, 1, -1, -1, 1, -1, 1.0])
        data = LabeledDataset(rng.normal(size=(8, 2)), y)
        zero = ModelParams(ModelSpec("linear", 2).layer_shapes())
        assert evaluate_accuracy(zero, data) == 5 / 8

    def test_flip_labels(self, spec, rng):
        data = make_labeled_dataset(spec, 500, rng)
        p = ModelParams(ModelSpec("linear", 2).layer_shapes(), [0.4, 1.0, -0.1])
        a = evaluate_accuracy(p, data)
        flipped = LabeledDataset(data.x, -data.y)
        assert evaluate_accuracy(p, flipped) == pytest.approx(1.0 - a, abs=1e-15)

    def test_bayes_rule_params(self, spec, rng):
        w, b = bayes_rule_linear(spec)
        p = ModelParams(ModelSpec("linear", 2).layer_shapes(), np.concatenate([w, [b]]))
        acc = evaluate_accuracy(p, make_labeled_dataset(spec, 200_000, rng))
        ref, _ = bayes_accuracy(spec, rng)
        assert abs(acc - ref) < 0.01


def test_run_result_formats(spec):
    sets, test = _sets(spec, 40)
    r = train(sets.confdiff, test, _small("confdiff_abs", epochs=3))
    lines = r.to_lines().splitlines()
    assert lines[0] == "#epoch,train_risk,test_accuracy"
    assert len(lines) == 5 and lines[-1].startswith("#summary estimator=confdiff_abs")
    epoch, risk_s, acc_s = lines[1].split(",")
    assert epoch == "1" and float(risk_s) == r.train_risk[0] and len(risk_s.split("e")[0].replace("-", "")) == 18
    import json
    doc = json.loads(r.to_json())
    assert doc["train_risk"] == r.train_risk and doc["final_accuracy"] == r.final_accuracy
