import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from abl_lab import (  # noqa: E402
    BlochDirection,
    Observable,
    Outcome,
    PrePostContext,
    Projector,
    StateVector,
    X_AXIS,
    Z_AXIS,
    spin_observable,
)

C45 = BlochDirection(math.pi / 4)


def random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return StateVector.normalized(v)


def random_observable(rng, dim, name="Q"):
    """Random orthonormal basis split into 1..dim groups of consecutive vectors."""
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    u, _ = np.linalg.qr(m)
    n_groups = rng.integers(1, dim + 1)
    cuts = sorted(rng.choice(np.arange(1, dim), size=n_groups - 1, replace=False)) if n_groups > 1 else []
    bounds = [0, *cuts, dim]
    outs = []
    for i, (lo, hi) in enumerate(zip(bounds, bounds[1:])):
        cols = u[:, lo:hi]
        outs.append(Outcome(float(i), f"q{i}", Projector(cols @ cols.conj().T)))
    return Observable(name, tuple(outs))


def random_direction(rng):
    u, v = rng.random(2)
    return BlochDirection(min(math.acos(1 - 2 * u), math.pi), (2 * math.pi * v) % (2 * math.pi))


def bloch_angle(x, y):
    return math.acos(max(-1.0, min(1.0, float(x.vector() @ y.vector()))))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def zx():
    """Pre-selected z-up, post-selected x-up."""
    return PrePostContext(Z_AXIS.up(), X_AXIS.up())


@pytest.fixture
def sigma_c():
    return spin_observable(C45, "c")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
