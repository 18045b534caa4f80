import numpy as np
import pytest

from hadamard.maps import make_map

_ACCEPTANCE = []


def bisect_scalar(g, y, lo=-1e6, hi=1e6, steps=200):
    """Root of an increasing scalar function ``g(x) = y`` by plain bisection."""
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if g(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bisection_inverse(g, y):
    """Componentwise inverse of a diagonal map given its scalar profile ``g``."""
    return np.array([bisect_scalar(g, yi) for yi in np.ravel(y)])


SCALAR_PROFILES = {
    "sine_perturbed": lambda k: (lambda x: x + k * np.sin(x)),
    "cubic": lambda _: (lambda x: x ** 3 + x),
    "arctan_drift": lambda a: (lambda x: x + a * np.arctan(x)),
}


@pytest.fixture
def sine4():
    return make_map("sine_perturbed", 4, k=0.5)


@pytest.fixture
def spiral():
    return make_map("exp_spiral")


def record_criterion(number, title, passed, detail=""):
    _ACCEPTANCE.append((number, title, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        mark = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{mark}] {number:2d}. {title}" + (f" -- {detail}" if detail else ""))
