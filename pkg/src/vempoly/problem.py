"""Manufactured solution on the unit square and polynomial patch fields."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

PI = np.pi

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ExactSolution:
    u: Field
    grad: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    f: Field  # -Laplacian of u
    name: str = ""


def _xy(p):
    p = np.atleast_2d(p)
    return p[:, 0], p[:, 1]


def u_ex(p):
    x, y = _xy(p)
    return (
        x**5 + x**4 * y - x * y**4 + x**3 - x * y - x + y - 1.0
        + np.sin(2 * PI * x) * np.sin(PI * y)
        + np.log(x**2 + y**4 + 1.0)
    )


def grad_u_ex(p):
    x, y = _xy(p)
    s = x**2 + y**4 + 1.0
    ux = (5 * x**4 + 4 * x**3 * y - y**4 + 3 * x**2 - y - 1.0
          + 2 * PI * np.cos(2 * PI * x) * np.sin(PI * y) + 2 * x / s)
    uy = (x**4 - 4 * x * y**3 - x + 1.0
          + PI * np.sin(2 * PI * x) * np.cos(PI * y) + 4 * y**3 / s)
    return ux, uy


def f_ex(p):
    x, y = _xy(p)
    s = x**2 + y**4 + 1.0
    lap_poly = 20 * x**3 + 12 * x**2 * y - 12 * x * y**2 + 6 * x
    lap_trig = -5 * PI**2 * np.sin(2 * PI * x) * np.sin(PI * y)
    lap_log = 2 / s - 4 * x**2 / s**2 + 12 * y**2 / s - 16 * y**6 / s**2
    return -(lap_poly + lap_trig + lap_log)


MANUFACTURED_SOLUTION = ExactSolution(u_ex, grad_u_ex, f_ex, "manufactured")


def polynomial_solution(coeffs: dict[tuple[int, int], float]) -> ExactSolution:
    """u = sum c_ab x^a y^b with its gradient and -Laplacian."""
    items = list(coeffs.items())

    def u(p):
        x, y = _xy(p)
        return sum(c * x**a * y**b for (a, b), c in items) + 0.0 * x

    def grad(p):
        x, y = _xy(p)
        gx = sum(c * a * x ** max(a - 1, 0) * y**b for (a, b), c in items if a) + 0.0 * x
        gy = sum(c * b * x**a * y ** max(b - 1, 0) for (a, b), c in items if b) + 0.0 * x
        return gx, gy

    def f(p):
        x, y = _xy(p)
        out = 0.0 * x
        for (a, b), c in items:
            if a >= 2:
                out = out - c * a * (a - 1) * x ** (a - 2) * y**b
            if b >= 2:
                out = out - c * b * (b - 1) * x**a * y ** (b - 2)
        return out

    return ExactSolution(u, grad, f, "poly")


def random_polynomial(degree: int, rng) -> ExactSolution:
    rng = np.random.default_rng(rng)
    coeffs = {(d - i, i): float(rng.uniform(-1, 1)) for d in range(degree + 1) for i in range(d + 1)}
    return polynomial_solution(coeffs)
