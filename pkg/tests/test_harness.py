import json
import math

import numpy as np
import pytest

from anisoharm import harness as H
from anisoharm.errors import CalibrationError
from anisoharm.functions import builtin_field, builtin_profile
from anisoharm.geometry import AnisotropySpec

RADII = (0.3, 1.0, 3.0)
IND = {"id": "indicator-ellipsoid", "params": {"center": [0.0, 0.0], "r": 1.0}}
LOG = {"id": "log-rho", "params": {}}


def _case(p0, suite, f=IND, **kw):
    base = {"local": dict(p=2.0), "weak": dict(p=1.0),
            "commutator": dict(p=2.0, p1=4.0, p2=4.0, b=LOG)}[suite]
    base.update({"r_grid": RADII})
    base.update(kw)
    return H.VerificationCase(f"t/{suite}", p0, "cos2-projected", f, suite, **base)


def test_case_validation(p0):
    with pytest.raises(ValueError):
        _case(p0, "commutator", p1=3.0)
    with pytest.raises(ValueError):
        _case(p0, "weak", p=2.0)
    with pytest.raises(ValueError):
        _case(p0, "local", r_grid=(0.0, 1.0))
    with pytest.raises(ValueError):
        H.VerificationCase("x", p0, "cos1", IND, "global")
    assert _case(p0, "local").branch == "s_prime_le_p"
    assert _case(p0, "local", s=3.0).branch == "s_prime_le_p"
    assert _case(p0, "local", p=1.2, s=3.0).branch == "p_lt_s"


def test_case_json_round_trip(p0):
    c = _case(p0, "commutator", lam=0.1, s=4.0, seed=3)
    d = json.loads(json.dumps(c.to_json()))
    c2 = H.VerificationCase.from_json(d)
    assert c2.to_json() == c.to_json()
    with pytest.raises(ValueError):
        H.VerificationCase.from_json(dict(d, bogus=1))


@pytest.mark.parametrize("suite", ["local", "weak", "commutator"])
def test_zero_field_passes_trivially(p0, suite):
    rep = H.run_case(_case(p0, suite, f={"id": "zero", "params": {}}))
    assert all(lhs == 0 and ratio == 0 for _, lhs, _, ratio in rep.rows)
    assert rep.max_ratio == 0


@pytest.mark.parametrize("suite", ["local", "weak", "commutator"])
def test_ratios_invariant_under_doubling(p0, suite):
    f = builtin_field(p0, "gauss-rho")
    a = H.run_case(_case(p0, suite, f=f))
    b = H.run_case(_case(p0, suite, f=2.0 * f))
    assert all(ra[3] > 0 for ra in a.rows)
    assert np.allclose([r[3] for r in a.rows], [r[3] for r in b.rows], rtol=1e-9)


def test_constant_b_commutator_vanishes(p0):
    rep = H.run_case(_case(p0, "commutator", b={"id": "constant", "params": {"value": 3.0}}))
    assert all(lhs == 0 for _, lhs, _, _ in rep.rows) and rep.max_ratio == 0


def test_report_fields(p0):
    rep = H.run_case(_case(p0, "local"))
    assert len(rep.rows) == len(RADII)
    assert all(rhs > 0 for _, _, rhs, _ in rep.rows)
    ratios = [r[3] for r in rep.rows]
    assert rep.max_ratio == max(ratios)
    assert rep.stability == pytest.approx(max(ratios) / np.median(ratios))
    assert rep.diagnostics["k"] == pytest.approx(p0.k_quasi)


def test_ratio_csv_deterministic(p0, tmp_path):
    outs = []
    for i in range(2):
        rep = H.run_case(_case(p0, "local"), H.OperatorCache())
        H.write_ratio_csv(tmp_path / f"r{i}.csv", [rep])
        outs.append((tmp_path / f"r{i}.csv").read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].splitlines()[0] == b"case_id,r,lhs,rhs,ratio"


def test_caps_refuse_other_config(p0, tmp_path):
    cases = [_case(p0, "local")]
    path = tmp_path / "caps.json"
    H.calibrate(("local",), path, cases_by_suite={"local": cases})
    caps = json.loads(path.read_text())["suites"]["local"]
    assert caps["config_hash"] == H.config_hash(cases)
    res = H.verify_ratio_suite("local", cases, path)
    assert res.passed and res.reports[0].cap == pytest.approx(1.5 * res.reports[0].max_ratio)
    with pytest.raises(CalibrationError):
        H.verify_ratio_suite("local", [_case(p0, "local", p=3.0)], path)
    with pytest.raises(CalibrationError):
        H.load_caps(tmp_path / "missing.json")


def test_cap_failure_reported(p0, tmp_path):
    cases = [_case(p0, "local")]
    path = tmp_path / "caps.json"
    H.calibrate(("local",), path, cases_by_suite={"local": cases})
    data = json.loads(path.read_text())
    data["suites"]["local"]["caps"] = {k: v / 10 for k, v in data["suites"]["local"]["caps"].items()}
    path.write_text(json.dumps(data))
    res = H.verify_ratio_suite("local", cases, path)
    assert not res.passed and res.reports[0].status == "fail"


def test_default_cases_grid():
    for suite in H.RATIO_SUITES:
        cases = H.default_cases(suite)
        assert len(cases) == 18 and len({c.id for c in cases}) == 18
        assert all(len(c.r_grid) == 10 for c in cases)


def test_threads_env(monkeypatch):
    monkeypatch.setenv("ANISOHARM_THREADS", "3")
    assert H.threads() == 3
    monkeypatch.setenv("ANISOHARM_THREADS", "0")
    with pytest.raises(ValueError):
        H.threads()


def test_lemma4_trivial_examples(p0):
    b = builtin_field(p0, "log-rho")
    rows = H.lemma4_quotients(b, 1.0, 0.0, [(0.1, 0.1)], 1.0)
    assert rows[0][3] == pytest.approx(0.0, abs=1e-12)
    rep = H.verify_lemma4("constant", r_pairs=[(1.0, 0.1), (0.5, 0.05)])
    assert all(q == 0 for r in rep.rows for q in r[2:])


def test_lp_bound_scale_invariance(p0):
    f = builtin_field(p0, "gauss-rho")
    fields = {"g": f, "g3": 3.0 * f, "zero": builtin_field(p0, "zero")}
    rep = H.verify_lp_bound(fields=fields)
    assert len(rep.rows) == 2
    assert rep.rows[0][4] == pytest.approx(rep.rows[1][4], rel=1e-9)
    assert rep.rows[0][5] == pytest.approx(rep.rows[1][5], rel=1e-9)
    assert rep.pointwise_max <= 1.0 + 1e-6


def test_remark_pair():
    rep = H.verify_remark_pair()
    assert rep.passed
    assert rep.reports["e37*"].growth_ratio <= 1.2 and rep.reports["e35"].growth_ratio >= 10


def test_morrey_composition():
    gamma, p = 3.0, 2.0
    phi = builtin_profile("morrey", lam=1.0, p=p, gamma=gamma)
    rep = H.verify_morrey_composition(phi, phi, p, gamma)
    assert rep.passed and rep.verdict == "satisfied_on_window"
    phi1 = builtin_profile("remark-phi1", gamma=gamma, p=p, beta=0.5)
    phi2 = builtin_profile("remark-phi2", gamma=gamma, p=p, beta=0.5)
    assert H.verify_morrey_composition(phi1, phi2, p, gamma).passed
    assert H.verify_morrey_composition(phi, phi, p, gamma, log_weighted=True).passed


def test_hardy_suite():
    rep = H.verify_hardy(samples=10)
    assert rep.passed and len(rep.rows) == 3


def test_three_dim_smoke():
    spec = AnisotropySpec.preset("p0-3d")
    c = H.VerificationCase("3d", spec, "cos2-projected", {"id": "gauss-rho", "params": {}},
                           "local", p=2.0, r_grid=(0.5, 2.0), x0=(0.3, 0.2, 0.1))
    rep = H.run_case(c)
    assert all(math.isfinite(r[3]) and r[2] > 0 for r in rep.rows)
