import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anisoharm.functions import builtin_field, builtin_profile
from anisoharm.geometry import Ellipsoid
from anisoharm.spaces import (bmo_norm_sampled, local_campanato_norm, local_morrey_norm, lp_norm, r_grid,
                              weak_lp_norm)

SMALL = dict(r_window=(0.1, 10.0), per_decade=6)


@pytest.fixture(scope="module")
def ind(p0):
    return builtin_field(p0, "indicator-ellipsoid", r=1.0)


@pytest.fixture(scope="module")
def catalog(p0):
    return [builtin_field(p0, "indicator-ellipsoid", r=1.0),
            builtin_field(p0, "gauss-rho"),
            builtin_field(p0, "power-rho-truncated", a=-1.0, R=2.0),
            builtin_field(p0, "indicator-ellipsoid", center=[0.4, -0.3], r=0.5)]


def test_r_grid():
    g = r_grid()
    assert g[0] == pytest.approx(1e-3) and g[-1] == pytest.approx(1e3) and g.size == 151
    with pytest.raises(ValueError):
        r_grid((1.0, 0.5))


def test_lp_examples(p0, ind):
    assert lp_norm(ind, 1, Ellipsoid([0, 0], 2.0)) == pytest.approx(math.pi, rel=1e-10)
    assert lp_norm(ind, 2) == pytest.approx(math.sqrt(math.pi), rel=1e-10)
    assert lp_norm(builtin_field(p0, "zero"), 3) == 0.0
    with pytest.raises(ValueError):
        lp_norm(ind, 0.5)


def test_lp_gauss_whole_space(p0):
    # int exp(-2 rho^2) dx = 3 pi int r^2 exp(-2 r^2) dr = 3 pi sqrt(pi) / (8 sqrt(2))
    exact = math.sqrt(3 * math.pi**1.5 / (8 * math.sqrt(2)))
    assert lp_norm(builtin_field(p0, "gauss-rho"), 2) == pytest.approx(exact, rel=1e-8)


def test_weak_examples(p0, ind):
    region = Ellipsoid([0, 0], 2.0)
    assert weak_lp_norm(ind, 1, region) == pytest.approx(math.pi, rel=1e-10)
    c = builtin_field(p0, "constant", value=-1.5)
    assert weak_lp_norm(c, 2, region) == pytest.approx(1.5 * math.sqrt(8 * math.pi), rel=1e-10)
    g = builtin_field(p0, "gauss-rho")
    unit = Ellipsoid([0, 0], 1.0)
    assert 0 < weak_lp_norm(g, 2, unit) <= lp_norm(g, 2, unit)


def test_morrey_examples(p0, ind):
    one = builtin_profile("constant", value=1.0)
    for p in (1.0, 2.5):
        rep = local_morrey_norm(builtin_field(p0, "constant"), p, one, [0.3, -0.2], **SMALL)
        assert rep.value == pytest.approx(1.0, rel=1e-10)
    rep = local_morrey_norm(ind, 1, builtin_profile("power", a=-3.0), [0, 0])
    assert rep.value == pytest.approx(1.0, rel=1e-10)
    # the quantity is min(r, 1)**gamma, so every r >= 1 attains the sup
    assert rep.argsup_r >= 1.0 - 1e-12
    assert all(v == pytest.approx(min(r, 1.0) ** 3, rel=1e-9) for r, v in rep.grid)
    assert local_morrey_norm(builtin_field(p0, "zero"), 2, one, [0, 0], **SMALL).value == 0.0


def test_morrey_infinite_phi_contributes_zero(p0, ind):
    phi = builtin_profile("remark-phi1", gamma=3.0, p=2.0, beta=0.5)
    rep = local_morrey_norm(ind, 2, phi, [0, 0], **SMALL)
    assert rep.diagnostics["infinite_phi_nodes"] == 7
    assert all(v == 0.0 for r, v in rep.grid if r <= 1.0)


def test_morrey_specialization_pointwise(ind):
    p, lam = 2.0, 1.0
    rep = local_morrey_norm(ind, p, builtin_profile("morrey", lam=lam, p=p, gamma=3.0), [0, 0])
    for r, v in rep.grid:
        morrey = r ** (-lam / p) * (math.pi * min(r, 1.0) ** 3) ** (1 / p)
        assert v == pytest.approx(math.pi ** (-1 / p) * morrey, rel=1e-9)


def test_weak_morrey_below_strong(catalog):
    phi = builtin_profile("morrey", lam=1.0, p=2.0, gamma=3.0)
    for f in catalog:
        s = local_morrey_norm(f, 2.0, phi, [0.1, 0.1], **SMALL)
        w = local_morrey_norm(f, 2.0, phi, [0.1, 0.1], weak=True, **SMALL)
        assert w.value <= s.value * (1 + 1e-12)


@settings(max_examples=15, deadline=None)
@given(c=st.floats(-50, 50).filter(lambda c: abs(c) > 1e-3))
def test_morrey_scaling(p0, c):
    f = builtin_field(p0, "gauss-rho")
    phi = builtin_profile("morrey", lam=0.5, p=1.5, gamma=3.0)
    a = local_morrey_norm(f, 1.5, phi, [0.2, 0.0], **SMALL).value
    b = local_morrey_norm(c * f, 1.5, phi, [0.2, 0.0], **SMALL).value
    assert b == pytest.approx(abs(c) * a, rel=1e-12)


def test_campanato_examples(p0, ind):
    assert local_campanato_norm(builtin_field(p0, "constant", value=4.0), 1, 0, [0, 0]).value \
        == 0.0
    rep = local_campanato_norm(ind, 1, 0.0, [0, 0])
    assert rep.value == pytest.approx(0.5, rel=1e-6)
    assert rep.argsup_r == pytest.approx(2 ** (1 / 3), rel=1e-3)
    for r, v in rep.grid:
        if r > 1:
            assert v == pytest.approx(2 * (r**-3 - r**-6), abs=1e-9)
    with pytest.raises(ValueError):
        local_campanato_norm(ind, 1, 1 / 3, [0, 0])


def test_campanato_log_window_stable(p0):
    b = builtin_field(p0, "log-rho")
    base = local_campanato_norm(b, 1, 0.0, [0, 0]).value
    wide = local_campanato_norm(b, 1, 0.0, [0, 0], r_window=(1e-4, 1e4)).value
    assert 0 < base < math.inf
    assert wide == pytest.approx(base, rel=0.02)


def test_campanato_monotone_in_p(catalog):
    for b in catalog:
        vals = [local_campanato_norm(b, p, 0.0, [0.1, 0.0], **SMALL).value for p in (1.0, 1.5, 2.0, 3.0)]
        assert np.all(np.diff(vals) >= -1e-12 * max(vals))


def test_bmo_sampled(p0):
    b = builtin_field(p0, "log-rho")
    single = bmo_norm_sampled(b, 1, [[0, 0]]).value
    assert single == local_campanato_norm(b, 1, 0.0, [0, 0]).value
    assert bmo_norm_sampled(b, 1, [[0, 0], [5, 0]]).value >= single
    assert bmo_norm_sampled(builtin_field(p0, "constant"), 1, [[0, 0]], **SMALL).value == 0.0
    with pytest.raises(ValueError):
        bmo_norm_sampled(b, 1, [])


def test_report_serialization(ind, tmp_path):
    rep = local_campanato_norm(ind, 1, 0.0, [0, 0], **SMALL)
    d = rep.to_json()
    assert d["value"] == max(v for _, v in d["grid"])
    rep.write_csv(tmp_path / "g.csv")
    rows = (tmp_path / "g.csv").read_text().splitlines()
    assert rows[0] == "r,local_value" and len(rows) == len(rep.grid) + 1
