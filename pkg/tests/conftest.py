import numpy as np
import pytest


def random_convex_polygon(rng, n=None):
    """Counterclockwise convex polygon with n vertices on a jittered circle."""
    n = n or int(rng.integers(3, 11))
    # jittered equispaced angles keep the polygon away from degeneracy
    ang = np.linspace(0, 2 * np.pi, n, endpoint=False) + rng.uniform(-0.3, 0.3, n) * (np.pi / n)
    r = rng.uniform(0.7, 1.3, 1)
    pts = np.column_stack([np.cos(ang), np.sin(ang)]) * r
    scale = 10.0 ** rng.uniform(-2, 0)
    return pts * scale + rng.uniform(-1, 1, 2)


def random_star_polygon(rng, n=None):
    """Star-shaped (possibly non-convex) ccw polygon around the origin."""
    n = n or int(rng.integers(5, 13))
    ang = np.linspace(0, 2 * np.pi, n, endpoint=False) + rng.uniform(-0.2, 0.2, n) * (np.pi / n)
    r = rng.uniform(0.6, 1.2, n)
    return np.column_stack([r * np.cos(ang), r * np.sin(ang)])


def l_shape():
    return np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2]], dtype=float)


def unit_square():
    return np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one verdict line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: dict[int, list[tuple[bool, str]]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[c]
        ok = all(p[0] for p in parts)
        terminalreporter.write_line(f"criterion {c}: {'PASS' if ok else 'FAIL'}")
        for good, detail in parts:
            terminalreporter.write_line(f"    [{'pass' if good else 'FAIL'}] {detail}")
