# -*- coding: utf-8 -*-

import logging
import math

import pytest
import torch

from NN.autodiff import DTYPE
from OT.exact import entropic_gap, exact_transport
from OT.sinkhorn import SinkhornError, cost_matrix, divergence, sinkhorn


def _instance(n, m, seed, dim=2):
    generator = torch.Generator().manual_seed(seed)
    x = torch.rand(n, dim, generator=generator, dtype=DTYPE)
    y = torch.rand(m, dim, generator=generator, dtype=DTYPE)
    a = torch.rand(n, generator=generator, dtype=DTYPE) + 0.1
    b = torch.rand(m, generator=generator, dtype=DTYPE) + 0.1
    return a / a.sum(), b / b.sum(), cost_matrix(x, y)


@pytest.mark.parametrize("n", [10, 80, 200])
def test_marginals_converge(n):
    a, b, cost = _instance(n, n, seed=n)
    state = sinkhorn(a, b, cost, epsilon=0.05, tol=1e-10, max_iters=20000)
    assert state.converged
    assert state.residual < 1e-9
    assert float((state.plan.sum(dim=1) - a).abs().max()) < 1e-9
    assert float((state.plan.sum(dim=0) - b).abs().max()) < 1e-9


def test_objective_equals_regularized_primal():
    a, b, cost = _instance(12, 9, seed=1)
    eps = 0.1
    state = sinkhorn(a, b, cost, eps, tol=1e-12, max_iters=20000)
    plan = state.plan
    kl = float(torch.sum(plan * torch.log(plan / (a[:, None] * b[None, :]))))
    assert state.objective == pytest.approx(state.transport_cost + eps * kl, abs=1e-9)
    assert state.transport_cost == pytest.approx(float(torch.sum(plan * cost)))


def test_scalings_reproduce_plan():
    a, b, cost = _instance(6, 7, seed=2)
    state = sinkhorn(a, b, cost, 0.2)
    u, v = state.scalings
    kernel = torch.exp(-cost / state.epsilon)
    assert torch.allclose((a * u)[:, None] * kernel * (b * v)[None, :], state.plan, atol=1e-14)


def test_entropic_cost_brackets_linear_program():
    epsilons = [0.1, 0.01, 0.001]
    for seed in range(100):
        n, m = 2 + seed % 3, 2 + (seed // 3) % 3
        a, b, cost = _instance(n, m, seed=1000 + seed)
        exact, _ = exact_transport(a, b, cost)
        costs = []
        for eps in epsilons:
            state = sinkhorn(a, b, cost, eps, tol=1e-10, max_iters=50000)
            assert state.transport_cost >= exact - 1e-8
            assert state.transport_cost <= exact + 0.5 * eps * math.log(max(n, m)) + 1e-8
            costs.append(state.transport_cost)
        # ε 减小时熵正则计划的传输代价单调下降
        assert costs[0] + 1e-8 >= costs[1] >= costs[2] - 1e-8


def test_potential_is_gradient_in_b():
    a, b, cost = _instance(8, 8, seed=3)
    eps = 0.1
    base = sinkhorn(a, b, cost, eps, tol=1e-13, max_iters=50000)
    direction = torch.randn(8, generator=torch.Generator().manual_seed(0), dtype=DTYPE)
    direction = direction - direction.mean()
    h = 1e-6
    plus = sinkhorn(a, b + h * direction, cost, eps, tol=1e-13, max_iters=50000).objective
    minus = sinkhorn(a, b - h * direction, cost, eps, tol=1e-13, max_iters=50000).objective
    numeric = (plus - minus) / (2 * h)
    assert float(base.g @ direction) == pytest.approx(numeric, rel=1e-4, abs=1e-7)


def test_divergence_of_identical_measures_is_zero():
    a, _, _ = _instance(10, 10, seed=4)
    x = torch.rand(10, 2, generator=torch.Generator().manual_seed(4), dtype=DTYPE)
    cost = cost_matrix(x)
    value, grad, states = divergence(a, a, cost, 0.05, tol=1e-11, max_iters=20000)
    assert value == pytest.approx(0.0, abs=1e-8)
    # 梯度只在相差常数的意义下确定
    assert float((grad - grad.mean()).abs().max()) < 1e-6
    assert len(states) == 3


def test_divergence_is_positive_for_distinct_measures():
    x = torch.rand(15, 2, generator=torch.Generator().manual_seed(5), dtype=DTYPE)
    cost = cost_matrix(x)
    a = torch.full((15,), 1.0 / 15, dtype=DTYPE)
    b = torch.linspace(1.0, 3.0, 15, dtype=DTYPE)
    b = b / b.sum()
    value, _, _ = divergence(a, b, cost, 0.05, tol=1e-11, max_iters=20000)
    assert value > 0


def test_zero_mass_atoms():
    a = torch.tensor([0.5, 0.0, 0.5], dtype=DTYPE)
    b = torch.tensor([0.25, 0.75], dtype=DTYPE)
    x = torch.tensor([[0.0], [0.5], [1.0]], dtype=DTYPE)
    y = torch.tensor([[0.2], [0.9]], dtype=DTYPE)
    state = sinkhorn(a, b, cost_matrix(x, y), 0.05, tol=1e-11)
    assert state.converged
    assert float(state.plan[1].abs().sum()) == 0.0
    assert math.isfinite(state.objective)


def test_non_convergence_is_reported(caplog):
    a, b, cost = _instance(20, 20, seed=6)
    with caplog.at_level(logging.WARNING, logger="training"):
        state = sinkhorn(a, b, cost, 0.001, tol=1e-12, max_iters=2)
    assert not state.converged
    assert state.iterations == 2
    assert any("Sinkhorn" in r.getMessage() for r in caplog.records)


def test_invalid_inputs():
    a = torch.tensor([0.5, 0.5], dtype=DTYPE)
    cost = torch.zeros(2, 2, dtype=DTYPE)
    with pytest.raises(SinkhornError):
        sinkhorn(a, a, cost, 0.0)
    with pytest.raises(SinkhornError):
        sinkhorn(torch.tensor([0.6, 0.6], dtype=DTYPE), a, cost, 0.1)
    with pytest.raises(SinkhornError):
        sinkhorn(torch.tensor([1.5, -0.5], dtype=DTYPE), a, cost, 0.1)
    with pytest.raises(SinkhornError):
        sinkhorn(a, a, torch.zeros(2, 3, dtype=DTYPE), 0.1)


def test_exact_transport_known_values():
    a = torch.tensor([0.5, 0.5], dtype=DTYPE)
    x = torch.tensor([[0.0], [1.0]], dtype=DTYPE)
    y = torch.tensor([[0.5], [2.0]], dtype=DTYPE)
    value, plan = exact_transport(a, a, cost_matrix(x, y))
    assert value == pytest.approx(0.5 * 0.25 + 0.5 * 1.0)
    assert plan[0, 0] == pytest.approx(0.5)

    value, _ = exact_transport(a, a, cost_matrix(x))
    assert value == pytest.approx(0.0, abs=1e-12)


def test_entropic_gap_is_nonnegative():
    a, b, cost = _instance(4, 4, seed=8)
    state = sinkhorn(a, b, cost, 0.01, tol=1e-10, max_iters=20000)
    assert entropic_gap(state, a, b) >= -1e-9


@pytest.mark.parametrize("seed", range(5))
def test_sinkhorn_is_symmetric(seed):
    a, b, cost = _instance(12, 12, seed=200 + seed)
    forward = sinkhorn(a, b, cost, 0.1, tol=1e-13, max_iters=50000)
    backward = sinkhorn(b, a, cost.t(), 0.1, tol=1e-13, max_iters=50000)
    assert forward.transport_cost == pytest.approx(backward.transport_cost, abs=1e-10)
    assert forward.objective == pytest.approx(backward.objective, abs=1e-10)


def test_divergence_is_symmetric():
    x = torch.rand(15, 2, generator=torch.Generator().manual_seed(6), dtype=DTYPE)
    cost = cost_matrix(x)
    a, b, _ = _instance(15, 15, seed=7)
    forward, _, _ = divergence(a, b, cost, 0.1, tol=1e-13, max_iters=50000)
    backward, _, _ = divergence(b, a, cost, 0.1, tol=1e-13, max_iters=50000)
    assert forward == pytest.approx(backward, abs=1e-10)
