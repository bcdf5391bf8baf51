# -*- coding: utf-8 -*-

import math

import pytest
import torch

from NN.autodiff import DTYPE
from PDE.domain import DIRICHLET, NEUMANN, sample_clouds
from PDE.problems import (
    ProblemError,
    grid_quadrature,
    make_problem,
    problem_dirichlet_sine,
    problem_neumann_product,
    residual_check,
    total_mass,
)


@pytest.mark.parametrize("dim", [1, 2, 5])
def test_dirichlet_sine_satisfies_pde(dim):
    assert residual_check(problem_dirichlet_sine(dim)) < 1e-6


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_neumann_product_satisfies_pde(dim):
    assert residual_check(problem_neumann_product(dim)) < 1e-6


def test_dirichlet_sine_values():
    problem = problem_dirichlet_sine(2)
    x = torch.tensor([[0.25, 0.5]], dtype=DTYPE)
    exact = problem.exact(1.0, x)
    assert float(exact[0]) == pytest.approx(math.sin(1.0) * math.sin(0.75))
    assert float(problem.initial(x)[0]) == 0.0
    assert problem.domain.faces(DIRICHLET) == [0, 1, 2, 3]


def test_neumann_product_mass_is_conserved():
    problem = problem_neumann_product(3)
    for t in (0.0, 0.01, 0.1, 1.0):
        assert total_mass(problem, t, points_per_axis=8) == pytest.approx(1.0, abs=1e-12)


def test_neumann_product_flux_vanishes():
    problem = problem_neumann_product(2)
    clouds = sample_clouds(problem.domain, 5, 10, seed=0)
    data = problem.step_data(0.2, clouds)
    assert clouds.count(NEUMANN) == 40
    assert torch.count_nonzero(data.neumann) == 0
    assert torch.count_nonzero(data.forcing) == 0

    # 精确解的法向导数在边界上为 0（中心差分）
    h = 1e-6
    x = clouds.neumann
    n = clouds.neumann_normals
    inner = problem.exact(0.2, x - h * n)
    outer = problem.exact(0.2, x + h * n)
    assert float(((outer - inner) / (2 * h)).abs().max()) < 1e-6


def test_neumann_product_positive_and_bounded():
    problem = problem_neumann_product(4)
    x = torch.rand(500, 4, dtype=DTYPE)
    values = problem.initial(x)
    assert float(values.min()) >= 0.5 - 1e-15
    assert float(values.max()) <= 1.5 + 1e-15


def test_grid_quadrature_integrates_polynomials():
    points, weights = grid_quadrature(problem_dirichlet_sine(2).domain, points_per_axis=4)
    assert float(weights.sum()) == pytest.approx(1.0)
    assert float(torch.sum(weights * points[:, 0] ** 3 * points[:, 1] ** 2)) == pytest.approx(1.0 / 12.0)


def test_time_argument_may_be_a_tensor():
    problem = problem_dirichlet_sine(3)
    x = torch.rand(4, 3, dtype=DTYPE)
    t = torch.tensor([0.1, 0.2, 0.3, 0.4], dtype=DTYPE)
    expected = torch.stack([problem.exact(float(ti), xi.unsqueeze(0))[0] for ti, xi in zip(t, x)])
    assert torch.allclose(problem.exact(t, x), expected)


def test_unknown_flavor():
    with pytest.raises(ProblemError):
        make_problem("wave", 2)
    with pytest.raises(ProblemError):
        problem_dirichlet_sine(0)


def test_require_exact():
    problem = make_problem("neumann-heat", 2)
    assert problem.require_exact() is problem.exact
