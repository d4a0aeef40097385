"""Quantitative verification suites built on the operator, norm and condition modules.

Local estimates compare ``||T f||`` on ellipsoids E(x0, r) with tail
integrals of ``||f||`` over larger ellipsoids.  The implied constants are
unknown, so each case is checked against a cap frozen by a calibration run
(1.5 x the observed maximum ratio) together with a stability bound on the
spread of ratios across radii.  Caps carry a hash of the configuration
that produced them and are refused for any other configuration.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import conditions as cond
from .errors import CalibrationError, EvaluationError
from .functions import ScalarField, builtin_field, builtin_profile
from .geometry import AnisotropySpec, unit_volume
from .kernels import builtin_kernel
from .operators import (DEFAULT_SCHEME, QuadratureScheme, e1_majorant, maximal, maximal_many, singular_pv,
                        singular_pv_many, commutator_singular)
from .quadrature import ball_integrals, ball_measure, gauss_legendre
from .spaces import local_campanato_norm, weak_from_samples

HARNESS_SCHEME = QuadratureScheme(radial_nodes_per_decade=12, sphere_nodes=64, bulk_decades=5.0)
DEFAULT_RADII = tuple(np.geomspace(0.1, 10.0, 10).tolist())
DEFAULT_X0 = (0.3, 0.2)
CAP_FACTOR = 1.5
STABILITY_LIMIT = 3.0
CAPS_FILE = "caps.json"

# ball measure used for the left-hand sides: few nodes, many evaluation points
_LHS_PER_PANEL = 2
_LHS_SPHERE = {2: 32, 3: (6, 12)}
_LHS_INNER_DECADES = 2
_SPOT_CHECKS = 2


def threads() -> int:
    env = os.environ.get("ANISOHARM_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("ANISOHARM_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# catalogs


def field_catalog(spec: AnisotropySpec) -> dict[str, dict]:
    """The six test fields of the local-estimate suites, as JSON-ready references."""
    def c(*xs):
        return list(xs) + [0.0] * (spec.n - len(xs))

    return {
        "ind-c0-r1": {"id": "indicator-ellipsoid", "params": {"center": c(0.0), "r": 1.0}},
        "ind-off-r05": {"id": "indicator-ellipsoid", "params": {"center": c(0.5, 0.3), "r": 0.5}},
        "gauss": {"id": "gauss-rho", "params": {}},
        "pow-a1-R1": {"id": "power-rho-truncated", "params": {"a": 1.0, "R": 1.0}},
        "pow-am05-R2": {"id": "power-rho-truncated", "params": {"a": -0.5, "R": 2.0}},
        "gauss-shift": {"id": "gauss-rho", "params": {"center": c(0.4, -0.3), "scale": 0.5, "amplitude": 2.0}},
    }


SUITE_KERNELS = ("cos2-projected", "cos1", "sign4-projected")


def make_field(spec: AnisotropySpec, ref) -> ScalarField:
    if isinstance(ref, ScalarField):
        return ref
    if isinstance(ref, str):
        ref = {"id": ref, "params": {}}
    return builtin_field(spec, ref["id"], **dict(ref.get("params", {})))


# ---------------------------------------------------------------------------
# cases and reports


@dataclass
class VerificationCase:
    id: str
    spec: AnisotropySpec
    kernel: str
    f: dict | str
    suite: str = "local"  # local | weak | commutator
    b: dict | str | None = None
    p: float = 2.0
    p1: float | None = None
    p2: float | None = None
    s: float = math.inf
    lam: float = 0.0
    r_grid: tuple = DEFAULT_RADII
    scheme: QuadratureScheme = HARNESS_SCHEME
    seed: int = 0
    x0: tuple | None = None

    def __post_init__(self):
        if self.suite not in ("local", "weak", "commutator"):
            raise ValueError(f"unknown suite {self.suite!r}")
        if not self.s > 1:
            raise ValueError("s must lie in (1, inf]")
        self.r_grid = tuple(float(r) for r in self.r_grid)
        if not self.r_grid or min(self.r_grid) <= 0:
            raise ValueError("r_grid must contain positive radii")
        if self.x0 is None:
            self.x0 = (0.0,) * self.spec.n
        if self.suite == "weak" and self.p != 1:
            raise ValueError("the weak-type estimate is the p = 1 case")
        if self.suite == "commutator":
            if self.b is None or self.p1 is None or self.p2 is None:
                raise ValueError("commutator cases need b, p1 and p2")
            if not math.isclose(1.0 / self.p, 1.0 / self.p1 + 1.0 / self.p2, rel_tol=1e-12):
                raise ValueError("commutator cases need 1/p = 1/p1 + 1/p2")
            if not 0 <= self.lam < 1.0 / self.spec.gamma:
                raise ValueError("lam must lie in [0, 1/gamma)")
        if self.suite == "weak" and math.isfinite(self.s):
            raise ValueError("the weak-type case is implemented for s = inf only")
        if self.suite == "local" and not self.p > 1:
            raise ValueError("local estimates need p > 1")

    @property
    def branch(self) -> str:
        """``s_prime_le_p`` (the default branch) or ``p_lt_s``."""
        q = self.p1 if self.suite == "commutator" else self.p
        s_prime = 1.0 if math.isinf(self.s) else self.s / (self.s - 1.0)
        if s_prime <= q:
            return "s_prime_le_p"
        if q < self.s:
            return "p_lt_s"
        raise ValueError("neither s' <= p nor p < s holds")

    def to_json(self) -> dict:
        sch = self.scheme
        return {"id": self.id, "spec": self.spec.to_json(), "kernel": self.kernel, "f": self.f,
                "suite": self.suite, "b": self.b, "p": self.p, "p1": self.p1, "p2": self.p2,
                "s": "inf" if math.isinf(self.s) else self.s, "lam": self.lam, "r_grid": list(self.r_grid),
                "x0": list(self.x0), "seed": self.seed,
                "scheme": {k: getattr(sch, k) for k in sch.__dataclass_fields__}}

    @classmethod
    def from_json(cls, d: dict, spec: AnisotropySpec | None = None) -> "VerificationCase":
        d = dict(d)
        sp = AnisotropySpec.from_json(d.pop("spec")) if "spec" in d else spec
        if sp is None:
            raise ValueError("case needs a spec")
        scheme = d.pop("scheme", None)
        sch = HARNESS_SCHEME if scheme is None else QuadratureScheme(**scheme)
        s = d.pop("s", math.inf)
        s = math.inf if s in ("inf", None) else float(s)
        known = {"id", "kernel", "f", "suite", "b", "p", "p1", "p2", "lam", "r_grid", "seed", "x0"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown case keys {sorted(extra)}")
        if "x0" in d and d["x0"] is not None:
            d["x0"] = tuple(float(v) for v in d["x0"])
        return cls(spec=sp, scheme=sch, s=s, **d)


@dataclass
class RatioReport:
    case_id: str
    rows: list  # (r, lhs, rhs, ratio)
    max_ratio: float
    median_ratio: float
    stability: float
    cap: float | None = None
    passed: bool | None = None
    status: str = "unchecked"  # pass | fail | inconclusive | unchecked
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"case_id": self.case_id, "max_ratio": self.max_ratio, "median_ratio": self.median_ratio,
                "stability": self.stability, "cap": self.cap, "passed": self.passed, "status": self.status,
                "diagnostics": self.diagnostics, "rows": [list(r) for r in self.rows]}

    def csv_rows(self):
        for r, lhs, rhs, ratio in self.rows:
            yield [self.case_id, f"{r:.17g}", f"{lhs:.17g}", f"{rhs:.17g}", f"{ratio:.17g}"]


def write_ratio_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case_id", "r", "lhs", "rhs", "ratio"])
        for rep in reports:
            w.writerows(rep.csv_rows())


def _ratio_report(case_id, rs, lhs, rhs, diag) -> RatioReport:
    rows, ratios = [], []
    for r, a, b in zip(rs, lhs, rhs):
        if b > 0:
            q = a / b
        elif a == 0:
            q = 0.0  # both sides vanish (f = 0 or b constant)
        else:
            q = math.inf
        rows.append((float(r), float(a), float(b), float(q)))
        ratios.append(q)
    mx = max(ratios)
    med = statistics.median(ratios)
    if med > 0:
        stab = mx / med
    else:
        stab = 0.0 if mx == 0 else math.inf
    return RatioReport(case_id, rows, float(mx), float(med), float(stab), diagnostics=diag)


# ---------------------------------------------------------------------------
# right-hand sides: tail integrals of ||f||_{L_q(E(x0, t))}


def _tail_rhs(spec, f, x0, q, radii, a, prefactor_exp, k, log_weighted, per_decade=8):
    """``r^e int_{2kr}^inf (1 + ln(t/r))^[log] t^(-a-1) ||f||_{L_q(E(x0,t))} dt`` for each r.

    ``||f||_{L_q(E(x0,t))}`` is constant once ``E(x0,t)`` contains the support
    of ``f``; beyond that radius the integral is evaluated in closed form.
    """
    radii = np.asarray(radii, dtype=float)
    if not a > 0:
        raise ValueError("tail exponent must be positive for a convergent integral")
    lows = 2.0 * k * radii
    R_end = f.support_about(x0)
    if not math.isfinite(R_end):
        raise EvaluationError("right-hand sides need a compactly supported f")
    R_end = max(R_end, float(lows.max())) * 1.01
    lo = float(lows.min())
    n = max(int(math.ceil(per_decade * math.log10(R_end / lo))), 1)
    brk = [b for b in f.radial_breaks(np.asarray(x0)) if lo < b < R_end]
    edges = np.unique(np.concatenate([np.geomspace(lo, R_end, n + 1), lows, brk]))
    gx, gw = gauss_legendre(4)
    le = np.log(edges)
    dl = np.diff(le)
    t = np.exp(le[:-1, None] + dl[:, None] * gx).ravel()
    w_ln = (dl[:, None] * gw).ravel()
    pan = np.repeat(np.arange(edges.size - 1), 4)

    def fq(y):
        v, lev = f.evaluate_full(y)
        return np.abs(v) ** q, lev

    I, _ = ball_integrals(spec, fq, x0, np.concatenate([t, [R_end]]), f.radial_breaks(np.asarray(x0)),
                          per_panel=4, sphere_nodes=128 if spec.n == 2 else (16, 32))
    N = I ** (1.0 / q)
    Nt, N_end = N[:-1], N[-1]
    out = np.empty(radii.size)
    for i, (r, low) in enumerate(zip(radii, lows)):
        m = pan >= int(np.searchsorted(edges, low * (1 - 1e-12)))
        tt = t[m]
        fac = 1.0 + np.log(tt / r) if log_weighted else 1.0
        body = float(np.sum(w_ln[m] * fac * tt ** (-a) * Nt[m]))
        tail = N_end * R_end ** (-a) / a
        if log_weighted:
            tail = N_end * R_end ** (-a) * ((1.0 + math.log(R_end / r)) / a + 1.0 / a**2)
        out[i] = r**prefactor_exp * (body + tail)
    return out


# ---------------------------------------------------------------------------
# left-hand sides


class OperatorCache:
    """Operator values at the LHS measure points, shared by suites using the same (f, kernel, b)."""

    def __init__(self):
        self._store: dict[str, tuple] = {}

    def get(self, key, compute):
        if key not in self._store:
            self._store[key] = compute()
        return self._store[key]


def _lhs_measure(spec, f, x0, radii):
    return ball_measure(spec, np.asarray(x0, dtype=float), radii, f.radial_breaks(np.asarray(x0)), None,
                        _LHS_PER_PANEL, _LHS_SPHERE.get(spec.n),
                        inner_decades=_LHS_INNER_DECADES)


def _ref_key(ref):
    # in-memory fields are keyed by identity, catalog references by value
    return f"object:{id(ref)}" if isinstance(ref, ScalarField) else ref


def _operator_values(case: VerificationCase, f, b, cache: OperatorCache | None):
    kernel = builtin_kernel(case.spec, case.kernel)
    key = json.dumps([case.spec.to_json(), case.kernel, _ref_key(case.f), _ref_key(case.b) if b is not None else None,
                      list(case.r_grid), list(case.x0), case.to_json()["scheme"]], sort_keys=True)

    def compute():
        meas = _lhs_measure(case.spec, f, case.x0, case.r_grid)
        vals = singular_pv_many(kernel, f, meas.points, case.scheme, b=b)
        # spot-check the bulk rule against the adaptive principal value
        rng = np.random.default_rng(case.seed)
        idx = rng.choice(meas.points.shape[0], size=min(_SPOT_CHECKS, meas.points.shape[0]), replace=False)
        spot, conv = [], True
        for i in idx:
            x = meas.points[i]
            res = (singular_pv(kernel, f, x) if b is None else commutator_singular(b, kernel, f, x))
            conv = conv and res.pv_converged
            spot.append((float(vals[i]), float(res.value)))
        return meas, vals, spot, conv

    if cache is None:
        return compute()
    return cache.get(key, compute)


def _spot_diag(spot, conv):
    dev = max((abs(a - b) / max(abs(b), 1e-12) for a, b in spot), default=0.0)
    return {"spot_check_max_rel_dev": float(dev), "spot_checks": float(len(spot)), "pv_converged": float(conv)}


def verify_local_estimate(case: VerificationCase, cache: OperatorCache | None = None) -> RatioReport:
    """``||T f||_{L_p(E(x0,r))}`` against ``r^(g/p) int_{2kr}^inf t^(-g/p-1) ||f||_{L_p(E(x0,t))} dt``
    (or the ``p < s`` branch with exponents shifted by ``g/s``)."""
    spec, g, p = case.spec, case.spec.gamma, case.p
    f = make_field(spec, case.f)
    rs = np.asarray(case.r_grid)
    k = spec.k_quasi
    diag = {"k": k, "branch": case.branch}
    if f.is_zero:
        return _finish(_ratio_report(case.id, rs, np.zeros(rs.size), np.zeros(rs.size), diag))
    meas, vals, spot, conv = _operator_values(case, f, None, cache)
    lhs = meas.integrals(np.abs(vals) ** p, rs) ** (1.0 / p)
    gs = 0.0 if case.branch == "s_prime_le_p" else g / case.s
    rhs = _tail_rhs(spec, f, case.x0, p, rs, g / p - gs, g / p - gs, k, False)
    diag.update(_spot_diag(spot, conv))
    return _finish(_ratio_report(case.id, rs, lhs, rhs, diag), conv)


def verify_weak_type(case: VerificationCase, cache: OperatorCache | None = None) -> RatioReport:
    """Weak L_1 norm of ``T f`` on E(x0, r) against ``r^g int_{2kr}^inf t^(-g-1) ||f||_{L_1(E(x0,t))} dt``."""
    spec, g = case.spec, case.spec.gamma
    f = make_field(spec, case.f)
    rs = np.asarray(case.r_grid)
    k = spec.k_quasi
    diag = {"k": k, "q": 1.0}
    if f.is_zero:
        return _finish(_ratio_report(case.id, rs, np.zeros(rs.size), np.zeros(rs.size), diag))
    meas, vals, spot, conv = _operator_values(case, f, None, cache)
    av = np.abs(vals)
    lhs = np.array([weak_from_samples(av[: meas.prefix(r)], meas.weights[: meas.prefix(r)], 1.0) for r in rs])
    rhs = _tail_rhs(spec, f, case.x0, 1.0, rs, g, g, k, False)
    diag.update(_spot_diag(spot, conv))
    return _finish(_ratio_report(case.id, rs, lhs, rhs, diag), conv)


def verify_commutator_estimate(case: VerificationCase, cache: OperatorCache | None = None) -> RatioReport:
    """``||[b, T] f||_{L_p(E(x0,r))}`` against the log-weighted tail integral of ``||f||_{L_p1}``."""
    spec, g = case.spec, case.spec.gamma
    f = make_field(spec, case.f)
    b = make_field(spec, case.b)
    rs = np.asarray(case.r_grid)
    k = spec.k_quasi
    p, p1, p2, lam = case.p, case.p1, case.p2, case.lam
    if b.is_zero:
        b_norm = 0.0
    else:
        nkey = json.dumps(["campanato", spec.to_json(), case.b, p2, lam, list(case.x0)], sort_keys=True)
        compute = lambda: local_campanato_norm(b, p2, lam, np.asarray(case.x0)).value  # noqa: E731
        b_norm = cache.get(nkey, compute) if cache is not None else compute()
    diag = {"k": k, "branch": case.branch, "b_campanato_norm": b_norm}
    if f.is_zero or b_norm == 0.0:
        return _finish(_ratio_report(case.id, rs, np.zeros(rs.size), np.zeros(rs.size), diag))
    meas, vals, spot, conv = _operator_values(case, f, b, cache)
    lhs = meas.integrals(np.abs(vals) ** p, rs) ** (1.0 / p)
    gs = 0.0 if case.branch == "s_prime_le_p" else g / case.s
    rhs = b_norm * _tail_rhs(spec, f, case.x0, p1, rs, g / p1 - g * lam - gs, g / p - gs, k, True)
    diag.update(_spot_diag(spot, conv))
    return _finish(_ratio_report(case.id, rs, lhs, rhs, diag), conv)


def _finish(rep: RatioReport, converged: bool = True) -> RatioReport:
    if not converged:
        rep.status = "inconclusive"
    return rep


_VERIFIERS = {"local": verify_local_estimate, "weak": verify_weak_type, "commutator": verify_commutator_estimate}


def run_case(case: VerificationCase, cache: OperatorCache | None = None) -> RatioReport:
    return _VERIFIERS[case.suite](case, cache)


# ---------------------------------------------------------------------------
# default suites, calibration and caps


def default_cases(suite: str, spec: AnisotropySpec | None = None,
                  scheme: QuadratureScheme = HARNESS_SCHEME, x0=None) -> list[VerificationCase]:
    """6 fields x 3 kernels on 10 radii in [0.1, 10] at the base point ``x0``."""
    spec = spec or AnisotropySpec.preset("p0-2d")
    x0 = tuple(DEFAULT_X0[: spec.n]) + (0.0,) * max(spec.n - len(DEFAULT_X0), 0) if x0 is None else tuple(x0)
    out = []
    for fid, fref in field_catalog(spec).items():
        for kid in SUITE_KERNELS:
            cid = f"{suite}/{fid}/{kid}"
            if suite == "local":
                out.append(VerificationCase(cid, spec, kid, fref, "local", p=2.0, scheme=scheme, x0=x0))
            elif suite == "weak":
                out.append(VerificationCase(cid, spec, kid, fref, "weak", p=1.0, scheme=scheme, x0=x0))
            elif suite == "commutator":
                out.append(VerificationCase(cid, spec, kid, fref, "commutator", b={"id": "log-rho", "params": {}},
                                            p=2.0, p1=4.0, p2=4.0, lam=0.0, scheme=scheme, x0=x0))
            else:
                raise ValueError(f"unknown suite {suite!r}")
    return out


RATIO_SUITES = ("local", "weak", "commutator")


def config_hash(cases) -> str:
    blob = json.dumps([c.to_json() for c in cases], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def default_caps_path() -> Path:
    return Path(str(resources.files("anisoharm") / "data" / CAPS_FILE))


def load_caps(path=None) -> dict:
    path = Path(path) if path is not None else default_caps_path()
    if not path.exists():
        raise CalibrationError(f"no calibration fixtures at {path}; run `anisoharm calibrate` first")
    with open(path) as fh:
        return json.load(fh)


def _run_reports(cases, cache=None, n_threads=None):
    cache = cache or OperatorCache()
    n_threads = n_threads or threads()
    # cases sharing operator values must not race on the cache; group by operator key
    if n_threads <= 1 or len(cases) <= 1:
        return [run_case(c, cache) for c in cases]
    groups: dict[str, list[int]] = {}
    for i, c in enumerate(cases):
        groups.setdefault(json.dumps([c.kernel, _ref_key(c.f), _ref_key(c.b)], sort_keys=True), []).append(i)
    out: list = [None] * len(cases)

    def work(idx):
        for i in idx:
            out[i] = run_case(cases[i], cache)

    with ThreadPoolExecutor(n_threads) as ex:
        list(ex.map(work, groups.values()))
    return out


def calibrate(suites=RATIO_SUITES, path=None, spec=None, cases_by_suite=None, cache=None) -> dict:
    """Run the ratio suites and freeze ``cap = 1.5 x max_ratio`` per case together with the config hash."""
    cache = cache or OperatorCache()
    data = {"cap_factor": CAP_FACTOR, "suites": {}}
    for suite in suites:
        cases = (cases_by_suite or {}).get(suite) or default_cases(suite, spec)
        reps = _run_reports(cases, cache)
        data["suites"][suite] = {
            "config_hash": config_hash(cases),
            "caps": {r.case_id: CAP_FACTOR * r.max_ratio for r in reps},
            "observed": {r.case_id: r.max_ratio for r in reps},
        }
    path = Path(path) if path is not None else default_caps_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    existing = {}
    if path.exists():
        with open(path) as fh:
            existing = json.load(fh)
    merged = dict(existing, cap_factor=CAP_FACTOR)
    merged.setdefault("suites", {}).update(data["suites"])
    with open(path, "w") as fh:
        json.dump(merged, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return merged


@dataclass
class SuiteResult:
    """``passed`` is the cap check over all cases; ``stable`` the max/median limit."""

    suite: str
    reports: list
    passed: bool
    stable: bool = True
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"suite": self.suite, "passed": self.passed, "stable": self.stable,
                "diagnostics": self.diagnostics, "reports": [r.to_json() for r in self.reports]}


def verify_ratio_suite(suite: str, cases=None, caps_path=None, cache=None, spec=None) -> SuiteResult:
    """Run a ratio suite against frozen caps; refuses caps from a different configuration."""
    cases = cases or default_cases(suite, spec)
    caps = load_caps(caps_path).get("suites", {}).get(suite)
    h = config_hash(cases)
    if caps is None or caps.get("config_hash") != h:
        raise CalibrationError(f"caps for suite {suite!r} were calibrated for a different configuration "
                               f"(expected hash {h[:12]}...); rerun calibration")
    reports = _run_reports(cases, cache)
    ok = True
    for rep in reports:
        rep.cap = float(caps["caps"][rep.case_id])
        rep.passed = bool(rep.max_ratio <= rep.cap)
        if rep.status != "inconclusive":
            rep.status = "pass" if rep.passed else "fail"
        ok = ok and rep.status != "fail"
    worst = max((r.stability for r in reports), default=0.0)
    unstable = sorted(r.case_id for r in reports if r.stability > STABILITY_LIMIT)
    return SuiteResult(suite, reports, ok, not unstable,
                       {"config_hash": h, "max_stability": worst, "stability_limit": STABILITY_LIMIT,
                        "unstable_cases": unstable})


# ---------------------------------------------------------------------------
# Lemma on Campanato means


@dataclass
class Lemma4Report:
    rows: list  # (r1, r2, quotient_a, quotient_b, quotient_c)
    wide_rows: list
    fitted_c: dict
    fitted_c_wide: dict
    c_stability: dict
    flatness: dict
    passed: bool
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"rows": self.rows, "wide_rows": self.wide_rows, "fitted_c": self.fitted_c,
                "fitted_c_wide": self.fitted_c_wide, "c_stability": self.c_stability,
                "flatness": self.flatness, "passed": self.passed, "diagnostics": self.diagnostics}


def _pairs(r2_values, ratios):
    return [(float(r2 * q), float(r2)) for r2 in r2_values for q in ratios]


def lemma4_quotients(b: ScalarField, p: float, lam: float, pairs, b_norm: float, x0=None):
    """Quotients LHS / ((1 + ln(r1/r2)) * envelope * ||b||) for the three Lemma inequalities.

    (a) normalised oscillation of b on E(x0, r1) about the mean on E(x0, r2);
    (b) ``|b_E(r1) - b_E(r2)|`` with envelope ``|E(x0, r1)|^lam``;
    (c) ``||b - b_E||_{L_p(E)}`` with E = E(x0, r1) and envelope ``r1^(g/p + g lam)``.
    """
    spec = b.spec
    g = spec.gamma
    x0 = np.zeros(spec.n) if x0 is None else np.asarray(x0, dtype=float)
    radii = sorted({r for pr in pairs for r in pr})
    meas = ball_measure(spec, x0, radii, b.radial_breaks(x0), b.evaluate_full, 6,
                        128 if spec.n == 2 else None, 1.25)
    vals = b(meas.points)
    w = meas.weights
    if np.ptp(vals) == 0:
        vals = np.zeros_like(vals)  # constant samples: oscillations vanish exactly
    means = {r: float(np.dot(w[: meas.prefix(r)], vals[: meas.prefix(r)]) / w[: meas.prefix(r)].sum())
             for r in radii}
    vol = {r: float(w[: meas.prefix(r)].sum()) for r in radii}
    rows = []
    for r1, r2 in pairs:
        if r1 < r2:
            raise ValueError("pairs must satisfy r1 >= r2")
        fac = (1.0 + math.log(r1 / r2)) * b_norm
        e = meas.prefix(r1)
        osc_a = (float(np.dot(w[:e], np.abs(vals[:e] - means[r2]) ** p)) / vol[r1] ** (1 + lam * p)) ** (1 / p)
        diff_b = abs(means[r1] - means[r2])
        osc_c = float(np.dot(w[:e], np.abs(vals[:e] - means[r1]) ** p)) ** (1 / p)
        qa = osc_a / fac if fac > 0 else 0.0
        qb = diff_b / (fac * vol[r1] ** lam) if fac > 0 else 0.0
        qc = osc_c / (fac * r1 ** (g / p + g * lam)) if fac > 0 else 0.0
        rows.append((r1, r2, qa, qb, qc))
    return rows


def verify_lemma4(b_id="log-rho", p: float = 1.0, lam: float = 0.0, r_pairs=None, spec=None,
                  ratios=(1.0, 10.0, 100.0, 1000.0), b_params=None) -> Lemma4Report:
    """Fit C as the max quotient on a base pair set and on a 10x wider one; check stability and flatness.

    Flatness: the OLS slope of the (b) quotient against ln(r1/r2) over pairs
    with r1/r2 in {10, 100, 1000}, relative to the mean quotient, must lie in
    [-0.1, 0.1].
    """
    spec = spec or AnisotropySpec.preset("p0-2d")
    b = builtin_field(spec, b_id, **dict(b_params or {}))
    x0 = np.zeros(spec.n)
    b_norm = local_campanato_norm(b, p, lam, x0).value if not b.is_zero else 0.0
    base = list(r_pairs) if r_pairs is not None else _pairs(np.geomspace(1e-2, 1e-1, 3), ratios)
    r2s = sorted({r2 for _, r2 in base})
    wide_r2 = np.geomspace(min(r2s) / 10.0, max(r2s) * 10.0, len(r2s) + 2)
    qs = sorted({r1 / r2 for r1, r2 in base})
    wide = _pairs(wide_r2, qs)
    rows = lemma4_quotients(b, p, lam, base, b_norm, x0)
    wrows = lemma4_quotients(b, p, lam, wide, b_norm, x0)
    parts = ("a", "b", "c")
    fit = {k: max(r[2 + i] for r in rows) for i, k in enumerate(parts)}
    fit_w = {k: max(r[2 + i] for r in wrows) for i, k in enumerate(parts)}
    stab = {k: (fit_w[k] / fit[k] if fit[k] > 0 else (1.0 if fit_w[k] == 0 else math.inf)) for k in parts}
    sel = [r for r in rows if r[0] / r[1] > 1.5]
    flat = {"slope": 0.0, "relative_slope": 0.0, "spread": 0.0}
    if sel and fit["b"] > 0:
        x = np.log([r[0] / r[1] for r in sel])
        y = np.array([r[3] for r in sel])
        slope = float(np.polyfit(x, y, 1)[0]) if np.ptp(x) > 0 else 0.0
        flat = {"slope": slope, "relative_slope": slope / float(y.mean()),
                "spread": float((y.max() - y.min()) / y.mean())}
    passed = all(s <= 1.2 for s in stab.values()) and abs(flat["relative_slope"]) <= 0.1
    return Lemma4Report([list(r) for r in rows], [list(r) for r in wrows], fit, fit_w, stab, flat, passed,
                        {"b_norm": b_norm, "p": p, "lambda": lam, "b": b_id})


# ---------------------------------------------------------------------------
# global L_p bounds


def _whole_space_lp(vals, meas, outer, p, gamma):
    """L_p norm over the measure plus a ``rho^-gamma`` tail beyond ``outer``."""
    e = meas.prefix(outer)
    inner = float(np.dot(meas.weights[:e], np.abs(vals[:e]) ** p))
    # the last panel carries the decay constant: |v| ~ c rho^-gamma
    lo = meas.ends[-2]
    shell = np.abs(vals[lo:e]) ** p
    rr = meas.radius[lo:e]
    cst = float(np.dot(meas.weights[lo:e], shell * rr ** (gamma * p)) / meas.weights[lo:e].sum())
    # int_{outer}^inf c t^(-gamma p) dV with dV = |E(0,1)| gamma t^(gamma-1) dt
    vol1 = meas.weights[:e].sum() / outer**gamma
    tail = cst * vol1 * gamma * outer ** (gamma - gamma * p) / (gamma * p - gamma)
    return (inner + tail) ** (1.0 / p), tail / max(inner + tail, 1e-300)


@dataclass
class LpBoundReport:
    kernel: str
    p: float
    s: float
    rows: list  # (field, ||f||_p, ||T f||_p, ||M f||_p, ratio_T, ratio_M, tail_share)
    max_ratio_t: float
    max_ratio_m: float
    pointwise_max: float
    caps: dict | None = None
    passed: bool | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"kernel": self.kernel, "p": self.p, "s": "inf" if math.isinf(self.s) else self.s,
                "rows": self.rows, "max_ratio_t": self.max_ratio_t, "max_ratio_m": self.max_ratio_m,
                "pointwise_max": self.pointwise_max, "caps": self.caps, "passed": self.passed,
                "diagnostics": self.diagnostics}


class _RadialMeasure:
    """A ball measure annotated with the rho-radius of each node."""

    def __init__(self, spec, x0, radii, breaks):
        from .quadrature import radial_nodes, ball_edges, _refine_edges
        from .geometry import sphere_grid

        edges = _refine_edges(ball_edges(radii, breaks, _LHS_INNER_DECADES), 1.6)
        r, wr, panel = radial_nodes(edges, spec.gamma, _LHS_PER_PANEL)
        grid = sphere_grid(spec.n, _LHS_SPHERE.get(spec.n))
        J = np.sum(spec.alpha_array * grid.points**2, axis=-1)
        self.points = (np.asarray(x0) - r[:, None, None] ** spec.alpha_array * grid.points[None]).reshape(-1, spec.n)
        self.weights = (wr[:, None] * (grid.weights * J)[None]).ravel()
        self.radius = np.repeat(r, grid.size)
        self.edges = edges
        self.ends = np.searchsorted(np.repeat(panel, grid.size), np.arange(edges.size), side="left")

    def prefix(self, r):
        i = int(np.searchsorted(self.edges, r))
        return int(self.ends[i])


def verify_lp_bound(kernel_id: str = "cos2-projected", p: float = 2.0, s: float = math.inf, fields=None,
                    spec=None, scheme: QuadratureScheme = HARNESS_SCHEME, outer_factor: float = 8.0) -> LpBoundReport:
    """``||T f||_p / ||f||_p`` and ``||M_Omega f||_p / ||f||_p`` over a field catalog.

    Whole-space norms integrate out to ``outer_factor`` times the support
    extent and add the ``rho^-gamma`` decay tail.  The maximal function is
    also compared pointwise with the size majorant: ``M_Omega f <=
    majorant / |E(0,1)|`` off the support.
    """
    spec = spec or AnisotropySpec.preset("p0-2d")
    s_prime = 1.0 if math.isinf(s) else s / (s - 1.0)
    if not (s_prime <= p or p < s) or p <= 1:
        raise ValueError("need p > 1 with s' <= p or p < s")
    fields = fields or field_catalog(spec)
    kernel = builtin_kernel(spec, kernel_id, s)
    g = spec.gamma
    x0 = np.zeros(spec.n)
    vol1 = unit_volume(spec)
    rows, pointwise = [], []
    for fid, ref in fields.items():
        f = make_field(spec, ref)
        if f.is_zero:
            continue
        R = f.support_about(x0)
        outer = outer_factor * R
        fnorm = float(ball_integrals(spec, lambda y: (np.abs(f.evaluate_full(y)[0]) ** p, f.evaluate_full(y)[1]),
                                     f.center, [f.support_radius], f.radial_breaks(f.center))[0][0] ** (1 / p))
        meas = _RadialMeasure(spec, x0, np.geomspace(R / 4, outer, 6), f.radial_breaks(x0))
        tv = singular_pv_many(kernel, f, meas.points, scheme)
        mv = maximal_many(kernel, f, meas.points, scheme)
        t_norm, t_tail = _whole_space_lp(tv, meas, outer, p, g)
        m_norm, m_tail = _whole_space_lp(mv, meas, outer, p, g)
        rows.append([fid, fnorm, t_norm, m_norm, t_norm / fnorm, m_norm / fnorm, max(t_tail, m_tail)])
        # pointwise absolute-value form just outside the support; the finer
        # default sphere grid is needed once the mass subtends a small angle
        for ang in (0.3, 2.0, 4.1):
            u = np.zeros(spec.n)
            u[0], u[1] = math.cos(ang), math.sin(ang)
            x = f.center + (1.25 * f.support_radius) ** spec.alpha_array * u
            maj = e1_majorant(kernel, f, x, DEFAULT_SCHEME)
            mx = maximal(kernel, f, x, DEFAULT_SCHEME).value
            pointwise.append(mx * vol1 / maj if maj > 0 else 0.0)
    rep = LpBoundReport(kernel_id, p, s, rows, max(r[4] for r in rows), max(r[5] for r in rows),
                        max(pointwise) if pointwise else 0.0,
                        diagnostics={"outer_factor": outer_factor, "max_tail_share": max(r[6] for r in rows)})
    return rep


def check_lp_bound(rep: LpBoundReport, caps_path=None) -> LpBoundReport:
    caps = load_caps(caps_path).get("lp_bound", {}).get(f"{rep.kernel}/p={rep.p:g}")
    if caps is None:
        raise CalibrationError(f"no L_p-bound caps for {rep.kernel} at p={rep.p:g}")
    rep.caps = caps
    rep.passed = bool(math.isfinite(rep.max_ratio_t) and math.isfinite(rep.max_ratio_m)
                      and rep.max_ratio_t <= caps["T"] and rep.max_ratio_m <= caps["M"]
                      and rep.pointwise_max <= 1.0 + 1e-6)
    return rep


def calibrate_lp_bound(path=None, kernels=SUITE_KERNELS, p=2.0) -> dict:
    path = Path(path) if path is not None else default_caps_path()
    data = {}
    if path.exists():
        with open(path) as fh:
            data = json.load(fh)
    lp = data.setdefault("lp_bound", {})
    for kid in kernels:
        rep = verify_lp_bound(kid, p)
        lp[f"{kid}/p={p:g}"] = {"T": CAP_FACTOR * rep.max_ratio_t, "M": CAP_FACTOR * rep.max_ratio_m}
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return data


# ---------------------------------------------------------------------------
# weight-pair suites


@dataclass
class PairReport:
    reports: dict
    passed: bool
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"passed": self.passed, "diagnostics": self.diagnostics,
                "reports": {k: v.to_json() for k, v in self.reports.items()}}


def verify_remark_pair(gamma: float = 3.0, p: float = 2.0, beta: float = 0.5,
                       base_window=cond.BASE_WINDOW, extended_window=cond.EXTENDED_WINDOW) -> PairReport:
    """The separating example: the sup-condition with the essinf tail holds, the plain integral one fails."""
    phi1 = builtin_profile("remark-phi1", gamma=gamma, p=p, beta=beta)
    phi2 = builtin_profile("remark-phi2", gamma=gamma, p=p, beta=beta)
    r37 = cond.check_condition(cond.condition_kind("SUP_E37", p=p, gamma=gamma), phi1, phi2,
                               base_window, extended_window)
    r35 = cond.check_condition(cond.condition_kind("SUP_E35"), phi1, phi2, base_window, extended_window)
    ok = r37.verdict == cond.Verdict.SATISFIED and r35.verdict == cond.Verdict.VIOLATED
    return PairReport({"e37*": r37, "e35": r35}, ok, {"gamma": gamma, "p": p, "beta": beta})


@dataclass
class CompositionReport:
    hardy_constant: float
    condition_sup: float
    rel_diff: float
    verdict: str
    passed: bool

    def to_json(self) -> dict:
        return {"hardy_constant": cond._js(self.hardy_constant), "condition_sup": cond._js(self.condition_sup),
                "rel_diff": cond._js(self.rel_diff), "verdict": self.verdict, "passed": self.passed}


def verify_morrey_composition(phi1, phi2, p: float, gamma: float, window=cond.BASE_WINDOW,
                              log_weighted: bool = False, lam: float = 0.0, tol: float = 1e-6) -> CompositionReport:
    """Hardy-operator step of the Morrey-to-Morrey theorems.

    With ``v2 = 1/phi2``, ``v1 = phi1^-1 r^(-g/p)`` and ``omega = r^(g lam - g/p - 1)``
    the Hardy best constant must equal the sup of the corresponding weight
    condition (plain or log-weighted) on the same window.
    """
    v1 = phi1.reciprocal().times_power(-gamma / p)
    v2 = phi2.reciprocal()
    omega = builtin_profile("power", a=gamma * lam - gamma / p - 1.0)
    B = cond.hardy_best_constant(v1, v2, omega, log_weighted, window)
    kind = (cond.condition_kind("LOG_37", p1=p, lam=lam, gamma=gamma) if log_weighted
            else cond.condition_kind("SUP_E37", p=p, gamma=gamma))
    rs, cs, _ = cond.condition_profile(kind, phi1, phi2, window)
    c = float(np.max(cs))
    if math.isinf(B) and math.isinf(c):
        rel = 0.0
    else:
        rel = abs(B - c) / max(abs(c), 1e-300)
    rep = cond.check_condition(kind, phi1, phi2, window, (window[0] / 10, window[1] * 10))
    return CompositionReport(B, c, rel, rep.verdict.value, rel <= tol)


# ---------------------------------------------------------------------------
# Hardy best constants


def hardy_configurations() -> dict:
    """Three closed-form configurations ``(v1, v2, omega, log_weighted, B)``."""
    one = builtin_profile("constant", value=1.0)
    t = builtin_profile("power", a=1.0)
    chi01 = builtin_profile("power", a=0.0, hi=1.0)
    decay = builtin_profile("power", a=-2.0, lo=1.0)
    return {
        "unit-window": (one, one, chi01, False, 1.0),
        "linear-decay": (one, t, decay, False, 1.0),
        "log-decay": (one, t, decay, True, 2.0),
    }


@dataclass
class HardySuiteReport:
    rows: list  # (config, B computed, B expected, rel err, best step ratio, max random ratio / B)
    passed: bool

    def to_json(self) -> dict:
        return {"rows": self.rows, "passed": self.passed}


def verify_hardy(samples: int = 50, seed: int = 0, window=cond.HARDY_WINDOW) -> HardySuiteReport:
    """Best constants vs closed forms, the step family g_a = chi_(a, inf), and random non-decreasing g."""
    rng = np.random.default_rng(seed)
    rows, ok = [], True
    lo, hi = window
    for name, (v1, v2, om, logw, B_exact) in hardy_configurations().items():
        B = cond.hardy_best_constant(v1, v2, om, logw, window)
        rel = abs(B - B_exact) / B_exact
        steps = [cond.hardy_ratio(cond.StepFunction([a], [1.0]), v1, v2, om, logw, window)
                 for a in np.geomspace(lo, hi, 17)[:-1]]
        best = max(steps)
        worst = 0.0
        for _ in range(samples):
            m = int(rng.integers(1, 6))
            jumps = np.sort(np.exp(rng.uniform(math.log(lo), math.log(hi), m)))
            g = cond.StepFunction(jumps, rng.uniform(0.0, 1.0, m), base=float(rng.uniform(0.0, 1.0)))
            worst = max(worst, cond.hardy_ratio(g, v1, v2, om, logw, window) / B)
        good = rel <= 0.01 and best >= 0.95 * B and worst <= 1.0 + 1e-6
        ok = ok and good
        rows.append([name, B, B_exact, rel, best, worst, good])
    return HardySuiteReport(rows, ok)
