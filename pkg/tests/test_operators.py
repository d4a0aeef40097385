import math

import numpy as np
import pytest

from anisoharm.errors import PreconditionError
from anisoharm.functions import builtin_field
from anisoharm.kernels import builtin_kernel
from anisoharm.operators import (QuadratureScheme, commutator_singular, e1_majorant, marcinkiewicz,
                                 marcinkiewicz_commutator, maximal, maximal_commutator, maximal_many,
                                 singular_pv, singular_pv_many)

from conftest import load_fixture, point_at_rho, rho_closed_p0
from make_oracles import pv_offsupport


@pytest.fixture(scope="module")
def disk_grid():
    """Dense midpoint grid of the unit disk E(0, 1) for the P0 spec."""
    h = 2.0 / 1500
    c = -1.0 + h * (np.arange(1500) + 0.5)
    Y = np.stack(np.meshgrid(c, c, indexing="ij"), axis=-1).reshape(-1, 2)
    return Y[np.sum(Y * Y, axis=1) < 1.0], h * h


def _dense_sup(d, v, cell):
    order = np.argsort(d)
    d, v = d[order], v[order]
    avg = np.cumsum(v) * cell / (math.pi * d**3)
    return avg[d > 1e-2].max()


@pytest.fixture(scope="module")
def ind(p0):
    return builtin_field(p0, "indicator-ellipsoid", r=1.0)


def test_scheme_validation():
    with pytest.raises(ValueError):
        QuadratureScheme(rho_min=1.0, rho_max=0.5)
    with pytest.raises(ValueError):
        QuadratureScheme(sphere_nodes=2)
    with pytest.raises(ValueError):
        QuadratureScheme(pv_ratio=1.0)


def test_maximal_examples(p0, ind, disk_grid):
    one = builtin_kernel(p0, "const")
    assert maximal(one, ind, [0.0, 0.0]).value == pytest.approx(1.0, rel=1e-12)
    assert maximal(one, builtin_field(p0, "zero"), [0.3, 0.0]).value == 0.0
    x = point_at_rho(p0, 2.0)
    val = maximal(one, ind, x).value
    Y, cell = disk_grid
    oracle = _dense_sup(rho_closed_p0(x - Y), np.ones(len(Y)), cell)
    assert 0 < val < 1
    assert val == pytest.approx(oracle, rel=0.02)


def test_maximal_needs_no_cancellation(p0, ind):
    assert maximal(builtin_kernel(p0, "cos2"), ind, [0.5, 0.0]).value > 0


def test_singular_odd_kernel_even_field(p0):
    g = builtin_field(p0, "gauss-rho")
    assert abs(singular_pv(builtin_kernel(p0, "cos1"), g, [0.0, 0.0]).value) <= 1e-6


def test_singular_zero_and_precondition(p0, ind):
    k = builtin_kernel(p0, "cos2-projected")
    assert singular_pv(k, builtin_field(p0, "zero"), [0.1, 0.1]).value == 0.0
    with pytest.raises(PreconditionError):
        singular_pv(builtin_kernel(p0, "cos2"), ind, [0.1, 0.1])


def test_singular_offsupport_live_oracle(p0, ind):
    x = point_at_rho(p0, 3.0, theta=1.1)
    ref, _ = pv_offsupport("cos2-projected", [0.0, 0.0], 1.0, list(x))
    val = singular_pv(builtin_kernel(p0, "cos2-projected"), ind, x).value
    assert val == pytest.approx(ref, rel=1e-4)


@pytest.mark.parametrize("case", load_fixture("pv_offsupport.json")[:6])
def test_singular_offsupport_frozen(p0, case):
    f = builtin_field(p0, "indicator-ellipsoid", center=case["center"], r=case["r"])
    val = singular_pv(builtin_kernel(p0, case["kernel"]), f, case["x"]).value
    assert val == pytest.approx(case["value"], rel=1e-4)


def test_pv_increments_geometric(p0):
    g = builtin_field(p0, "gauss-rho")
    res = singular_pv(builtin_kernel(p0, "cos2-projected"), g, [0.3, 0.2])
    inc = np.abs(res.increments)
    assert res.pv_converged and abs(inc[-1]) <= 1e-6
    assert np.all(inc[4:] / inc[3:-1] < 0.9)


def test_commutator_examples(p0, ind):
    k = builtin_kernel(p0, "cos2-projected")
    x = point_at_rho(p0, 3.0)
    assert commutator_singular(builtin_field(p0, "constant", value=2.0), k, ind, x).value == pytest.approx(0, abs=1e-12)
    assert commutator_singular(ind, k, builtin_field(p0, "zero"), x).value == 0.0
    b = builtin_field(p0, "log-rho")
    a = commutator_singular(b, k, ind, x)
    c = commutator_singular(b, k, ind, x, form="identity")
    assert a.value == pytest.approx(c.value, rel=1e-4)


def test_commutator_identity_inside_support(p0):
    k = builtin_kernel(p0, "cos2-projected")
    g = builtin_field(p0, "gauss-rho")
    b = builtin_field(p0, "coordinate", index=0)
    x = [0.3, 0.2]
    a = commutator_singular(b, k, g, x)
    c = commutator_singular(b, k, g, x, form="identity")
    assert abs(a.value - c.value) <= a.est_error + c.est_error + 1e-6


def test_maximal_commutator_examples(p0, ind, disk_grid):
    one = builtin_kernel(p0, "const")
    assert maximal_commutator(builtin_field(p0, "constant"), one, ind, [0.2, 0.0]).value == 0.0
    b = builtin_field(p0, "log-rho")
    assert maximal_commutator(b, one, builtin_field(p0, "zero"), [0.2, 0.0]).value == 0.0
    # b(x) = ln rho(x) must be finite, so x = 0 is replaced by rho(x) = 1/2
    x = point_at_rho(p0, 0.5)
    val = maximal_commutator(b, one, ind, x).value
    Y, cell = disk_grid
    v = np.abs(math.log(0.5) - np.log(rho_closed_p0(Y)))
    assert val > 0
    assert val == pytest.approx(_dense_sup(rho_closed_p0(x - Y), v, cell), rel=0.02)


def test_marcinkiewicz_examples(p0, ind):
    k = builtin_kernel(p0, "cos2-projected")
    x = point_at_rho(p0, 2.0)
    assert marcinkiewicz(k, builtin_field(p0, "zero"), x).value == 0.0
    m1 = marcinkiewicz(k, ind, x).value
    assert marcinkiewicz(k, 2.0 * ind, x).value == pytest.approx(2 * m1, rel=1e-12)
    maj = e1_majorant(k.abs_kernel(), ind, x)
    assert m1 <= 2**-0.5 * maj * 1.1
    with pytest.raises(PreconditionError):
        marcinkiewicz(builtin_kernel(p0, "cos2"), ind, x)


def test_marcinkiewicz_commutator_examples(p0, ind):
    k = builtin_kernel(p0, "cos2-projected")
    x = point_at_rho(p0, 2.0)
    assert marcinkiewicz_commutator(builtin_field(p0, "constant"), k, ind, x).value == pytest.approx(0, abs=1e-14)
    b = builtin_field(p0, "log-rho")
    assert marcinkiewicz_commutator(b, k, builtin_field(p0, "zero"), x).value == 0.0
    coarse = marcinkiewicz_commutator(b, k, ind, x).value
    fine = marcinkiewicz_commutator(b, k, ind, x, QuadratureScheme(radial_nodes_per_decade=80, sphere_nodes=1024)).value
    assert 0 < coarse < math.inf
    assert coarse == pytest.approx(fine, rel=0.02)


def test_e1_majorant_examples(p0, ind):
    one = builtin_kernel(p0, "const")
    x = point_at_rho(p0, 10.0)
    assert e1_majorant(one, builtin_field(p0, "zero"), x) == 0.0
    m = e1_majorant(one, ind, x)
    assert m == pytest.approx(math.pi / 1000, rel=0.15)
    assert e1_majorant(one, ind, x, c0=2.0) == pytest.approx(2 * m, rel=1e-14)
    with pytest.raises(PreconditionError):
        e1_majorant(one, ind, [0.5, 0.0])


def test_sublinearity(p0):
    k = builtin_kernel(p0, "cos2theta-projected")
    f = builtin_field(p0, "gauss-rho", scale=0.7)
    g = builtin_field(p0, "indicator-ellipsoid", center=[0.2, -0.1], r=0.6)
    rng = np.random.default_rng(11)
    for x in rng.uniform(-1.0, 1.0, (4, 2)):
        a, b, c = (singular_pv(k, h, x) for h in (f + g, f, g))
        assert abs(a.value) <= abs(b.value) + abs(c.value) + 2 * (a.est_error + b.est_error + c.est_error) + 1e-9


def test_bulk_matches_pointwise(p0, ind):
    k = builtin_kernel(p0, "cos2-projected")
    sch = QuadratureScheme(radial_nodes_per_decade=12, sphere_nodes=64)
    X = np.array([[0.3, 0.2], [1.4, 0.5], [-0.2, 1.6]])
    bulk = singular_pv_many(k, ind, X, sch)
    ref = np.array([singular_pv(k, ind, x).value for x in X])
    assert np.allclose(bulk, ref, rtol=0.03, atol=1e-3)
    mb = maximal_many(k, ind, X, sch)
    mr = np.array([maximal(k, ind, x).value for x in X])
    assert np.allclose(mb, mr, rtol=0.05)
