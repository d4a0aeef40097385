import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisoharm.errors import EvaluationError
from anisoharm.functions import RadialProfile, builtin_field, builtin_profile, mean_on_ellipsoid
from anisoharm.geometry import AnisotropySpec, Ellipsoid
from anisoharm.quadrature import ball_integrals

from conftest import point_at_rho


def test_field_examples(p0):
    ind = builtin_field(p0, "indicator-ellipsoid", r=1.0)
    assert ind.support_radius == 1.0
    assert ind([0.5, 0.5]) == 1.0 and ind([2.0, 0.0]) == 0.0
    g = builtin_field(p0, "gauss-rho")
    assert g(point_at_rho(p0, 1.0)) == pytest.approx(math.exp(-1))
    assert builtin_field(p0, "log-rho")([1.0, 0.0]) == pytest.approx(0.0, abs=1e-15)
    pc = builtin_field(p0, "power-campanato", lam=0.2)
    assert pc(point_at_rho(p0, 2.0)) == pytest.approx(2.0 ** 0.6)
    pw = builtin_field(p0, "power-rho-truncated", a=-0.5, R=2.0)
    assert pw(point_at_rho(p0, 0.25)) == pytest.approx(2.0) and pw(point_at_rho(p0, 3.0)) == 0.0


def test_field_errors(p0):
    with pytest.raises(ValueError):
        builtin_field(p0, "nope")
    with pytest.raises(ValueError):
        builtin_field(p0, "gauss-rho", width=2)
    with pytest.raises(ValueError):
        builtin_field(p0, "power-rho-truncated", a=-3.0)
    with pytest.raises(ValueError):
        builtin_field(p0, "power-campanato", lam=0.5)


def test_field_arithmetic(p0):
    f = builtin_field(p0, "gauss-rho")
    b = builtin_field(p0, "coordinate", index=0)
    x = np.array([0.4, -0.3])
    assert (2.0 * f)(x) == pytest.approx(2 * f(x))
    assert (f - f)(x) == pytest.approx(0.0)
    assert (b * f)(x) == pytest.approx(0.4 * f(x))
    assert builtin_field(p0, "zero").is_zero


def test_profile_examples():
    assert builtin_profile("power", a=-1.0)(2.0) == pytest.approx(0.5)
    phi2 = builtin_profile("remark-phi2", gamma=3, p=2, beta=0.5)
    assert phi2(1.0) == pytest.approx(2.0)
    phi1 = builtin_profile("remark-phi1", gamma=3, p=2, beta=0.5)
    assert phi1(0.5) == math.inf and phi1(4.0) == pytest.approx(4.0 ** -1.0)
    assert builtin_profile("morrey", lam=1.0, p=2.0, gamma=3.0)(4.0) == pytest.approx(4.0 ** -1.0)


def test_profile_errors():
    with pytest.raises(ValueError):
        builtin_profile("remark-phi1", gamma=3, p=2, beta=1.5)
    with pytest.raises(ValueError):
        builtin_profile("unknown")
    with pytest.raises(ValueError):
        builtin_profile("power", a=1.0)(0.0)
    with pytest.raises(EvaluationError):
        RadialProfile(lambda r: -r)(1.0)


@pytest.mark.parametrize("name,params", [
    ("power", {"a": -1.0}), ("power", {"a": 2.0}), ("morrey", {"lam": 1.0, "p": 2.0, "gamma": 3.0}),
    ("remark-phi1", {"gamma": 3.0, "p": 2.0, "beta": 0.5}), ("remark-phi2", {"gamma": 3.0, "p": 2.0, "beta": 0.5}),
    ("constant", {"value": 2.0}),
])
def test_monotonicity_hints_honest(name, params):
    phi = builtin_profile(name, **params)
    assert phi.check_monotonicity()
    assert phi.reciprocal().check_monotonicity()


def test_reciprocal_conventions():
    phi1 = builtin_profile("remark-phi1", gamma=3, p=2, beta=0.5)
    inv = phi1.reciprocal()
    assert inv(0.5) == 0.0 and inv(4.0) == pytest.approx(4.0)
    assert phi1.times_power(1.5)(0.5) == math.inf
    assert inv.times_power(2.0)(0.5) == 0.0


def test_mean_on_ellipsoid_examples(p0):
    E2 = Ellipsoid([0.0, 0.0], 2.0)
    assert mean_on_ellipsoid(builtin_field(p0, "constant", value=3.5), E2) == pytest.approx(3.5, rel=1e-13)
    ind = builtin_field(p0, "indicator-ellipsoid", r=1.0)
    assert mean_on_ellipsoid(ind, E2) == pytest.approx(0.125, rel=1e-10)
    x1 = builtin_field(p0, "coordinate", index=0)
    assert mean_on_ellipsoid(x1, Ellipsoid([0.0, 0.0], 1.0)) == pytest.approx(0.0, abs=1e-14)


def test_mean_off_center_indicator(p0):
    # E(c, 0.5) sits inside E(0, 2): the mean is its volume share 0.25^3 = 1/64
    ind = builtin_field(p0, "indicator-ellipsoid", center=[0.3, 0.1], r=0.5)
    assert mean_on_ellipsoid(ind, Ellipsoid([0.0, 0.0], 2.0)) == pytest.approx(1 / 64, rel=1e-6)


def test_support_radius_honoured(p0):
    f = builtin_field(p0, "power-rho-truncated", a=1.0, R=1.5)
    fn = lambda y: f.evaluate_full(y)
    a, _ = ball_integrals(p0, fn, f.center, [1.5], f.radial_breaks(f.center))
    b, _ = ball_integrals(p0, fn, f.center, [4.0], f.radial_breaks(f.center))
    assert b[0] == pytest.approx(a[0], rel=1e-12)
    # int_0^1.5 t * 3 pi t^2 dt = 3 pi 1.5^4 / 4
    assert a[0] == pytest.approx(3 * math.pi * 1.5**4 / 4, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.2, 3.0))
def test_mean_linear(a, c, r):
    spec = AnisotropySpec.preset("p0-2d")
    f = builtin_field(spec, "gauss-rho")
    g = builtin_field(spec, "coordinate", index=1, center=[0.0, 0.5])
    E = Ellipsoid([0.1, -0.2], r)
    lhs = mean_on_ellipsoid(a * f + c * g, E)
    rhs = a * mean_on_ellipsoid(f, E) + c * mean_on_ellipsoid(g, E)
    assert lhs == pytest.approx(rhs, abs=1e-12)
