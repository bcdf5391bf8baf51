# -*- coding: utf-8 -*-

import pytest
import torch

from NN.autodiff import DTYPE
from NN.features import TensorFeatureModel
from solvers.training import (
    DivergenceError,
    LrSchedule,
    TrainingConfig,
    TrainingError,
    sgd_step,
    train_network,
)


def _quadratic(model, target):
    def loss_fn(epoch):
        loss = torch.sum((model.coefficients - target) ** 2)
        return loss, float(loss), {"marker": float(epoch)}

    return loss_fn


def test_schedule_thresholds_are_one_based():
    schedule = LrSchedule.from_pairs([[1, 1e-2], [10000, 1e-3], [40000, 1e-4]])
    assert schedule.rate_at(1) == 1e-2
    assert schedule.rate_at(9999) == 1e-2
    assert schedule.rate_at(10000) == 1e-3
    assert schedule.rate_at(39999) == 1e-3
    assert schedule.rate_at(40000) == 1e-4
    assert schedule.rate_at(10 ** 6) == 1e-4


def test_schedule_accepts_mapping_pairs():
    schedule = LrSchedule.from_pairs([{"from": 1, "rate": 0.5}, {"from": 3, "rate": 0.1}])
    assert schedule.to_list() == [[1, 0.5], [3, 0.1]]
    assert LrSchedule.constant(0.2).rate_at(100) == 0.2


@pytest.mark.parametrize("pairs", [[], [[1, 0.1], [1, 0.01]], [[5, 0.1], [2, 0.01]], [[1, 0.0]], [[1, -1.0]]])
def test_schedule_validation(pairs):
    with pytest.raises(TrainingError):
        LrSchedule.from_pairs(pairs)


def test_sgd_step():
    theta = torch.tensor([1.0, 2.0], dtype=DTYPE)
    grad = torch.tensor([0.5, -1.0], dtype=DTYPE)
    assert sgd_step(theta, grad, 0.1).tolist() == pytest.approx([0.95, 2.1])
    with pytest.raises(TrainingError):
        sgd_step(theta, torch.zeros(3, dtype=DTYPE), 0.1)


def test_training_stops_on_parameter_tolerance():
    model = TensorFeatureModel(1, modes=4)
    target = torch.tensor([1.0, -2.0, 0.5, 3.0], dtype=DTYPE)
    config = TrainingConfig(epochs=5000, schedule=LrSchedule.constant(0.1), tol=1e-10)
    result = train_network(model, _quadratic(model, target), config)

    assert result.stopped == "tol"
    assert result.epochs_run < 5000
    assert torch.allclose(model.coefficients.detach(), target, atol=1e-8)
    assert result.initial_loss == pytest.approx(float(torch.sum(target ** 2)))
    assert result.history[-1]["step_norm"] < 1e-10


def test_training_runs_full_budget():
    model = TensorFeatureModel(1, modes=2)
    target = torch.ones(2, dtype=DTYPE)
    config = TrainingConfig(epochs=7, schedule=LrSchedule.constant(1e-3), tol=0.0)
    result = train_network(model, _quadratic(model, target), config)

    assert result.stopped == "epochs"
    assert result.epochs_run == 7
    frame = result.frame(step=3)
    assert list(frame.columns[:5]) == ["step", "epoch", "loss", "rate", "step_norm"]
    assert frame["step"].unique().tolist() == [3]
    assert frame["marker"].tolist() == [float(e) for e in range(1, 8)]


def test_start_epoch_resumes_schedule():
    model = TensorFeatureModel(1, modes=2)
    config = TrainingConfig(epochs=10, schedule=LrSchedule.from_pairs([[1, 0.1], [6, 0.01]]), tol=0.0)
    result = train_network(model, _quadratic(model, torch.ones(2, dtype=DTYPE)), config, start_epoch=6)
    assert result.epochs_run == 5
    assert [r["epoch"] for r in result.history] == [6, 7, 8, 9, 10]
    assert {r["rate"] for r in result.history} == {0.01}


def test_divergence_is_detected():
    model = TensorFeatureModel(1, modes=2)
    target = torch.ones(2, dtype=DTYPE)
    # 学习率 5 时每步把误差放大 9 倍
    config = TrainingConfig(epochs=100, schedule=LrSchedule.constant(5.0), tol=0.0)
    with pytest.raises(DivergenceError) as info:
        train_network(model, _quadratic(model, target), config)
    assert abs(info.value.loss) > 1e6 * max(abs(info.value.initial_loss), 1.0)
    assert info.value.epoch > 1


def test_non_finite_loss_raises():
    model = TensorFeatureModel(1, modes=2)

    def loss_fn(epoch):
        loss = torch.sum(model.coefficients) * float("nan")
        return loss, float(loss), {}

    with pytest.raises(TrainingError):
        train_network(model, loss_fn, TrainingConfig(epochs=3, schedule=LrSchedule.constant(0.1)))


@pytest.mark.parametrize("optimizer", ["momentum", "adam"])
def test_torch_optimizers_decrease_loss(optimizer):
    model = TensorFeatureModel(1, modes=3)
    target = torch.tensor([1.0, 2.0, 3.0], dtype=DTYPE)
    config = TrainingConfig(epochs=300, schedule=LrSchedule.constant(0.05), tol=0.0, optimizer=optimizer)
    result = train_network(model, _quadratic(model, target), config)
    assert result.final_loss < 1e-2 * result.initial_loss


@pytest.mark.parametrize("kwargs", [{"epochs": 0}, {"tol": -1.0}, {"optimizer": "lbfgs"}])
def test_config_validation(kwargs):
    options = {"epochs": 1, "schedule": LrSchedule.constant(0.1), **kwargs}
    with pytest.raises(TrainingError):
        TrainingConfig(**options)
