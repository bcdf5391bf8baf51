# -*- coding: utf-8 -*-

import dataclasses

import pytest
import torch

from NN.autodiff import DTYPE, gradient
from NN.network import Architecture, init_xavier
from PDE.domain import DIRICHLET, NEUMANN, BoxDomain, SamplingError
from PDE.nitsche import DiffusionSpec
from PDE.problems import ProblemError, problem_dirichlet_sine, problem_neumann_product
from solvers.dgm import (
    CHECKPOINT_NAME,
    STATE_NAME,
    DgmConfig,
    dgm_loss,
    dgm_terms,
    sample_space_time,
    solve_dgm,
)
from solvers.training import LrSchedule, TrainingConfig


def _derivatives(net, points):
    """逐点 ∂_t w、∇_x w 与 Δ_x w（二次反向传播，与前向 jet 无关）"""
    points = points.clone().requires_grad_(True)
    value = net(points)
    first = torch.autograd.grad(value.sum(), points, create_graph=True)[0]
    lap = torch.zeros(points.shape[0], dtype=DTYPE)
    for i in range(1, points.shape[1]):
        lap = lap + torch.autograd.grad(first[:, i].sum(), points, retain_graph=True)[0][:, i]
    return value.detach(), first[:, 0].detach(), first[:, 1:].detach(), lap.detach()


def test_space_time_times_in_half_open_interval():
    domain = BoxDomain.unit(2)
    cloud = sample_space_time(domain, 0.5, 200, 20, 50, seed=1)
    for points in (cloud.interior, cloud.dirichlet):
        assert float(points[:, 0].min()) > 0.0
        assert float(points[:, 0].max()) <= 0.5
        assert points.shape[1] == 3
    assert cloud.initial.shape == (50, 2)
    assert cloud.weight("interior") == pytest.approx(0.5 / 200)
    assert cloud.weight(DIRICHLET) == pytest.approx(0.5 * 4 / 80)
    assert cloud.weight(NEUMANN) == 0.0

    again = sample_space_time(domain, 0.5, 200, 20, 50, seed=1)
    assert torch.equal(cloud.interior, again.interior)
    with pytest.raises(SamplingError):
        sample_space_time(domain, 0.5, 10, 2, 0)


@pytest.mark.parametrize("problem", [problem_dirichlet_sine(2), problem_neumann_product(2)], ids=["sine", "product"])
def test_terms_match_autograd_derivatives(problem):
    net = init_xavier(Architecture(3, 1, blocks=2, width=5), seed=4)
    cloud = sample_space_time(problem.domain, problem.horizon, 30, 5, 12, seed=2)
    terms = dgm_terms(net, cloud, problem)

    _, w_t, _, lap = _derivatives(net, cloud.interior)
    t, x = cloud.interior[:, 0], cloud.interior[:, 1:]
    residual = w_t - lap - problem.forcing(t, x)
    assert float(terms["interior"]) == pytest.approx(cloud.weight("interior") * float(torch.sum(residual ** 2)), rel=1e-10)

    if cloud.neumann.shape[0]:
        _, _, grad_x, _ = _derivatives(net, cloud.neumann)
        flux = torch.sum(grad_x * cloud.neumann_normals, dim=1)
        expected = cloud.weight(NEUMANN) * float(torch.sum(flux ** 2))
        assert float(terms[NEUMANN]) == pytest.approx(expected, rel=1e-10)
        assert float(terms[DIRICHLET]) == 0.0
    else:
        value = net(cloud.dirichlet).detach()
        jump = value - problem.dirichlet(cloud.dirichlet[:, 0], cloud.dirichlet[:, 1:])
        expected = cloud.weight(DIRICHLET) * float(torch.sum(jump ** 2))
        assert float(terms[DIRICHLET]) == pytest.approx(expected, rel=1e-10)

    start = torch.cat([torch.zeros(12, 1, dtype=DTYPE), cloud.initial], dim=1)
    mismatch = net(start).detach() - problem.initial(cloud.initial)
    assert float(terms["initial"]) == pytest.approx(float(torch.sum(mismatch ** 2)) / 12, rel=1e-10)
    assert float(dgm_loss(net, cloud, problem)) >= 0.0


def test_exact_solution_has_small_loss():
    problem = problem_dirichlet_sine(2)

    class Exact:
        def __call__(self, tx):
            return problem.exact(tx[:, 0], tx[:, 1:])

        def jet(self, tx, order, trace_dims=None):
            from NN.autodiff import SpatialJet, seed_jet

            seed = seed_jet(tx, order, trace_dims)
            value, w_t, grad_x, lap = _derivatives(self, tx)
            grad = torch.cat([w_t.unsqueeze(1), grad_x], dim=1)
            return SpatialJet(value, grad, lap if order == 2 else None, seed.trace_weights)

    cloud = sample_space_time(problem.domain, problem.horizon, 40, 5, 10, seed=3)
    assert float(dgm_loss(Exact(), cloud, problem)) < 1e-20


def test_loss_gradient_is_finite():
    problem = problem_dirichlet_sine(2)
    net = init_xavier(Architecture(3, 1, 1, 4), seed=0)
    cloud = sample_space_time(problem.domain, 1.0, 20, 3, 5, seed=0)
    grad = gradient(dgm_loss(net, cloud, problem), net.parameters())
    assert grad.shape == (Architecture(3, 1, 1, 4).parameter_count,)
    assert bool(torch.isfinite(grad).all())


@pytest.mark.parametrize("seed", range(50))
def test_loss_gradient_matches_finite_differences(seed):
    dim = 2 + seed % 2
    problem = problem_dirichlet_sine(dim) if seed % 4 < 2 else problem_neumann_product(dim)
    net = init_xavier(Architecture(dim + 1, 1, blocks=1 + seed % 2, width=4), seed=seed)
    cloud = sample_space_time(problem.domain, 0.5, 20, 3, 8, seed=seed)

    theta = net.flat()
    direction = torch.randn(theta.numel(), generator=torch.Generator().manual_seed(seed), dtype=DTYPE)
    analytic = float(gradient(dgm_loss(net, cloud, problem), net.parameters()) @ direction)

    h = 1e-5
    values = []
    for sign in (1.0, -1.0):
        net.load_flat(theta + sign * h * direction)
        values.append(float(dgm_loss(net, cloud, problem)))
    numeric = (values[0] - values[1]) / (2 * h)
    assert abs(analytic - numeric) / max(abs(numeric), 1e-3) < 1e-5


def _config(epochs, every=2):
    training = TrainingConfig(epochs=epochs, schedule=LrSchedule.constant(1e-3), tol=0.0, log_every=0)
    return DgmConfig(training=training, n_interior=20, per_face=3, n_initial=10, seed=5, checkpoint_every=every)


def test_input_dimension_is_checked():
    problem = problem_dirichlet_sine(2)
    with pytest.raises(ProblemError):
        solve_dgm(problem, Architecture(2, 1, 1, 4), _config(1))


def test_anisotropic_diffusion_is_rejected():
    problem = dataclasses.replace(
        problem_dirichlet_sine(2), diffusion=DiffusionSpec.from_matrix([[2.0, 0.0], [0.0, 1.0]])
    )
    with pytest.raises(ProblemError):
        solve_dgm(problem, Architecture(3, 1, 1, 4), _config(1))


def test_resume_continues_from_saved_epoch(tmp_path):
    problem = problem_dirichlet_sine(2)
    arch = Architecture(3, 1, blocks=1, width=4)

    straight = solve_dgm(problem, arch, _config(6))
    assert straight.training.epochs_run == 6

    first = solve_dgm(problem, arch, _config(4), str(tmp_path))
    assert (tmp_path / CHECKPOINT_NAME).exists()
    assert (tmp_path / STATE_NAME).exists()
    assert first.training.epochs_run == 4

    resumed = solve_dgm(problem, arch, _config(6), str(tmp_path), resume=True)
    assert resumed.training.epochs_run == 2
    assert resumed.log["epoch"].tolist() == [1, 2, 3, 4, 5, 6]
    assert torch.equal(resumed.network.flat(), straight.network.flat())
    assert {"interior", DIRICHLET, NEUMANN, "initial"} <= set(resumed.log.columns)


def test_resume_without_state_starts_fresh(tmp_path):
    problem = problem_dirichlet_sine(2)
    result = solve_dgm(problem, Architecture(3, 1, 1, 4), _config(2), str(tmp_path), resume=True)
    assert result.training.epochs_run == 2
