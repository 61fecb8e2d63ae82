import numpy as np
import pytest

from vempoly.problem import MANUFACTURED_SOLUTION, polynomial_solution, random_polynomial


def fd_gradient(u, p, eps=1e-6):
    ex, ey = np.array([eps, 0.0]), np.array([0.0, eps])
    return (u(p + ex) - u(p - ex)) / (2 * eps), (u(p + ey) - u(p - ey)) / (2 * eps)


def fd_laplacian(u, p, eps=1e-4):
    ex, ey = np.array([eps, 0.0]), np.array([0.0, eps])
    return (u(p + ex) + u(p - ex) + u(p + ey) + u(p - ey) - 4 * u(p)) / eps**2


def test_source_is_minus_laplacian_fd(rng):
    p = rng.uniform(0, 1, (100, 2))
    # Richardson step removes the eps^2 truncation term
    lap = (4 * fd_laplacian(MANUFACTURED_SOLUTION.u, p, 5e-4) - fd_laplacian(MANUFACTURED_SOLUTION.u, p, 1e-3)) / 3
    assert np.abs(MANUFACTURED_SOLUTION.f(p) + lap).max() < 1e-6


def test_source_is_minus_laplacian_of_gradient(rng):
    # divergence of the closed-form gradient, differenced with a smaller step
    p = rng.uniform(0, 1, (100, 2))
    eps = 1e-6
    gxp, _ = MANUFACTURED_SOLUTION.grad(p + [eps, 0])
    gxm, _ = MANUFACTURED_SOLUTION.grad(p - [eps, 0])
    _, gyp = MANUFACTURED_SOLUTION.grad(p + [0, eps])
    _, gym = MANUFACTURED_SOLUTION.grad(p - [0, eps])
    div = (gxp - gxm + gyp - gym) / (2 * eps)
    assert np.abs(MANUFACTURED_SOLUTION.f(p) + div).max() < 1e-6 * np.abs(div).max()


def test_gradient_matches_fd(rng):
    p = rng.uniform(0, 1, (100, 2))
    gx, gy = MANUFACTURED_SOLUTION.grad(p)
    fx, fy = fd_gradient(MANUFACTURED_SOLUTION.u, p)
    assert max(np.abs(gx - fx).max(), np.abs(gy - fy).max()) < 1e-6


def test_sympy_oracle(rng):
    sp = pytest.importorskip("sympy")
    x, y = sp.symbols("x y")
    u = (x**5 + x**4 * y - x * y**4 + x**3 - x * y - x + y - 1
         + sp.sin(2 * sp.pi * x) * sp.sin(sp.pi * y) + sp.log(x**2 + y**4 + 1))
    f = sp.lambdify((x, y), -(sp.diff(u, x, 2) + sp.diff(u, y, 2)), "numpy")
    p = rng.uniform(0, 1, (100, 2))
    np.testing.assert_allclose(MANUFACTURED_SOLUTION.f(p), f(p[:, 0], p[:, 1]), rtol=1e-12, atol=1e-12)


def test_known_values():
    assert MANUFACTURED_SOLUTION.u(np.array([[0.0, 0.0]]))[0] == pytest.approx(-1.0)
    # u(1,1): 1+1-1+1-1-1+1-1 + 0 + log 3
    assert MANUFACTURED_SOLUTION.u(np.array([[1.0, 1.0]]))[0] == pytest.approx(np.log(3.0), abs=1e-14)


def test_polynomial_solution_fields(rng):
    ex = polynomial_solution({(2, 0): 1.0, (0, 2): -1.0, (1, 1): 3.0, (0, 0): 2.0})
    p = rng.uniform(-1, 1, (20, 2))
    x, y = p.T
    np.testing.assert_allclose(ex.u(p), x**2 - y**2 + 3 * x * y + 2)
    np.testing.assert_allclose(ex.grad(p)[0], 2 * x + 3 * y)
    np.testing.assert_allclose(ex.grad(p)[1], -2 * y + 3 * x)
    np.testing.assert_allclose(ex.f(p), 0.0, atol=1e-14)


def test_random_polynomial_deterministic():
    p = np.array([[0.3, 0.7]])
    assert random_polynomial(3, 5).u(p) == random_polynomial(3, 5).u(p)
    assert random_polynomial(3, 5).u(p) != random_polynomial(3, 6).u(p)
