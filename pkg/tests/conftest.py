import json
import math
from pathlib import Path

import numpy as np
import pytest

from anisoharm.geometry import AnisotropySpec

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def p0():
    return AnisotropySpec.preset("p0-2d")


@pytest.fixture(scope="session")
def p0_3d():
    return AnisotropySpec.preset("p0-3d")


@pytest.fixture(scope="session")
def iso():
    return AnisotropySpec.preset("iso-2d")


def load_fixture(name):
    with open(FIXTURES / name) as fh:
        return json.load(fh)


def rho_closed_p0(x):
    """Independent closed form for alpha = (1, 2): t^2 solves u^2 - x1^2 u - x2^2 = 0."""
    x = np.asarray(x, dtype=float)
    a2 = x[..., 0] ** 2
    return np.sqrt(0.5 * (a2 + np.sqrt(a2 * a2 + 4.0 * x[..., 1] ** 2)))


def point_at_rho(spec, d, theta=0.7, center=None):
    """A point with rho(x - center) = d along the polar direction theta."""
    u = np.zeros(spec.n)
    u[0], u[1] = math.cos(theta), math.sin(theta)
    c = np.zeros(spec.n) if center is None else np.asarray(center, dtype=float)
    return c + d ** spec.alpha_array * u
