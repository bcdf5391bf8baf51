# -*- coding: utf-8 -*-

import logging

import pytest
import torch

from NN import autodiff
from NN.autodiff import DTYPE, AutodiffError, NonFiniteError, check_finite, gradient, seed_jet
from NN.network import Architecture, init_xavier


def _autograd_derivatives(net, x):
    """逐点用 torch.autograd 计算梯度和 Hessian，作为对照"""
    grads, hessians = [], []
    for point in x:
        p = point.clone().requires_grad_(True)
        out = net(p.unsqueeze(0))[0]
        (g,) = torch.autograd.grad(out, p)
        h = torch.autograd.functional.hessian(lambda y: net(y.unsqueeze(0))[0], point.clone())
        grads.append(g)
        hessians.append(h)
    return torch.stack(grads), torch.stack(hessians)


@pytest.mark.parametrize("activation", ["tanh", "sigmoid"])
@pytest.mark.parametrize("blocks", [0, 2])
def test_jet_matches_autograd(activation, blocks):
    net = init_xavier(Architecture(3, 1, blocks=blocks, width=5, activation=activation), seed=3)
    x = torch.rand(6, 3, generator=torch.Generator().manual_seed(1), dtype=DTYPE)

    jet = net.jet(x, 2)
    grads, hessians = _autograd_derivatives(net, x)

    assert torch.allclose(jet.value, net(x), atol=1e-14)
    assert torch.allclose(jet.grad, grads, atol=1e-12)
    laplacians = torch.diagonal(hessians, dim1=1, dim2=2).sum(dim=1)
    assert torch.allclose(jet.lap, laplacians, atol=1e-10)


def test_trace_dims_restrict_laplacian():
    net = init_xavier(Architecture(3, 1, blocks=1, width=4), seed=11)
    x = torch.rand(4, 3, generator=torch.Generator().manual_seed(5), dtype=DTYPE)

    partial = net.jet(x, 2, trace_dims=[1, 2]).lap
    _, hessians = _autograd_derivatives(net, x)
    expected = hessians[:, 1, 1] + hessians[:, 2, 2]
    assert torch.allclose(partial, expected, atol=1e-10)


def test_order_controls_fields(small_net):
    x = torch.rand(3, 2, dtype=DTYPE)
    assert small_net.jet(x, 0).grad is None
    first = small_net.jet(x, 1)
    assert first.grad.shape == (3, 2)
    assert first.lap is None
    assert small_net.jet(x, 2).lap.shape == (3,)


def test_relu_laplacian_matches_autograd_and_warns(caplog):
    autodiff._warned_activations.discard("relu")
    net = init_xavier(Architecture(2, 1, blocks=1, width=8, activation="relu"), seed=2)
    x = torch.rand(10, 2, generator=torch.Generator().manual_seed(8), dtype=DTYPE)
    with caplog.at_level(logging.WARNING, logger="training"):
        jet = net.jet(x, 2)
    # 激活本身无曲率，门控乘积仍给出非零拉普拉斯
    _, hessians = _autograd_derivatives(net, x)
    assert torch.allclose(jet.lap, torch.diagonal(hessians, dim1=1, dim2=2).sum(dim=1), atol=1e-10)
    assert any("relu" in record.getMessage() for record in caplog.records)


def test_input_dimension_mismatch(small_net):
    with pytest.raises(AutodiffError):
        small_net.jet(torch.zeros(2, 3, dtype=DTYPE), 1)


def test_seed_jet_rejects_bad_order():
    with pytest.raises(AutodiffError):
        seed_jet(torch.zeros(2, 2, dtype=DTYPE), 3)


def test_check_finite_reports_first_index():
    values = torch.tensor([0.0, 1.0, float("nan"), float("inf")], dtype=DTYPE)
    with pytest.raises(NonFiniteError) as info:
        check_finite(values, "测试")
    assert info.value.index == 2


def test_gradient_is_one_reverse_sweep(small_net):
    x = torch.rand(5, 2, dtype=DTYPE)
    loss = torch.sum(small_net.jet(x, 1).grad ** 2)
    flat = gradient(loss, small_net.parameters())

    small_net.zero_grad()
    torch.sum(small_net.jet(x, 1).grad ** 2).backward()
    # 输出偏置不影响 ∇w，backward 后其 grad 为 None
    expected = torch.cat(
        [(p.grad if p.grad is not None else torch.zeros_like(p)).reshape(-1) for p in small_net.parameters()]
    )
    assert torch.allclose(flat, expected, atol=1e-14)
    assert torch.count_nonzero(flat[-1:]) == 0


def test_gradient_is_linear_in_the_loss(small_net):
    x = torch.rand(7, 2, generator=torch.Generator().manual_seed(3), dtype=DTYPE)

    def first():
        return torch.sum(small_net(x) ** 2)

    def second():
        return torch.sum(small_net.jet(x, 1).grad ** 2)

    g1 = gradient(first(), small_net.parameters())
    g2 = gradient(second(), small_net.parameters())
    combined = gradient(2.5 * first() - 0.75 * second(), small_net.parameters())
    assert torch.allclose(combined, 2.5 * g1 - 0.75 * g2, rtol=1e-13, atol=1e-13)


def test_gradient_is_deterministic():
    arch = Architecture(3, 1, blocks=2, width=5)
    x = torch.rand(9, 3, generator=torch.Generator().manual_seed(4), dtype=DTYPE)
    runs = []
    for _ in range(2):
        net = init_xavier(arch, seed=12)
        runs.append(gradient(torch.sum(net.jet(x, 2).lap ** 2), net.parameters()))
    assert torch.equal(runs[0], runs[1])


def test_gradient_of_constant_loss_is_zero(small_net):
    flat = gradient(torch.tensor(3.0, dtype=DTYPE), small_net.parameters())
    assert flat.shape == (small_net.architecture.parameter_count,)
    assert torch.count_nonzero(flat) == 0


def test_gradient_rejects_non_scalar(small_net):
    with pytest.raises(AutodiffError):
        gradient(small_net(torch.rand(3, 2, dtype=DTYPE)), small_net.parameters())
