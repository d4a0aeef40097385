"""Command line front end.

Every subcommand accepts ``--config`` (JSON with keys ``spec``, ``cases``,
``output_dir``, ``seed``); explicit flags override the config.  Exit codes:
0 when every requested verification passes, 1 on a failed verification,
2 on a bad config or invocation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import conditions as cond
from . import harness as H
from .errors import AnisoHarmError, CalibrationError
from .functions import builtin_profile
from .geometry import AnisotropySpec, Ellipsoid, monte_carlo_volume, rho, unit_volume
from .kernels import CANCELLATION_TOL, builtin_kernel, cancellation_residual, sphere_s_norm
from .operators import (QuadratureScheme, commutator_singular, e1_majorant, marcinkiewicz,
                        marcinkiewicz_commutator, maximal, maximal_commutator, singular_pv)
from .spaces import local_campanato_norm, local_morrey_norm, lp_norm, weak_lp_norm

EXIT_OK, EXIT_FAIL, EXIT_BAD_CONFIG = 0, 1, 2

SUITES = ("local", "weak", "commutator", "lemma4", "lp-bound", "remark-pair", "hardy", "composition")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# config and parsing helpers


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(cfg) - {"spec", "cases", "output_dir", "seed"}
    if extra:
        raise ConfigError(f"unknown config keys {sorted(extra)}")
    return cfg


def _spec(args, cfg) -> AnisotropySpec:
    raw = args.spec if args.spec is not None else cfg.get("spec", "p0-2d")
    try:
        return AnisotropySpec.from_json(raw)
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"bad spec: {exc}") from None


def _vector(text: str, n: int | None = None) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse point {text!r}") from None
    if n is not None and v.size != n:
        raise ConfigError(f"point {text!r} has {v.size} coordinates, expected {n}")
    return v


def _window(text: str) -> tuple[float, float]:
    lo, hi = _vector(text)
    return float(lo), float(hi)


def _ref(text: str | None):
    """A catalog reference: a bare id or ``{"id": ..., "params": {...}}``."""
    if text is None:
        return None
    text = text.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON reference: {exc}") from None
    return {"id": text, "params": {}}


def _profile(text: str):
    ref = _ref(text)
    return builtin_profile(ref["id"], **dict(ref.get("params", {})))


def _params(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"parameter {item!r} is not key=value")
        out[key] = math.inf if val in ("inf", "infinity") else float(val)
    return out


def _output_dir(args, cfg) -> Path | None:
    out = args.output_dir if args.output_dir is not None else cfg.get("output_dir")
    if out is None:
        return None
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _seed(args, cfg) -> int:
    return int(args.seed if args.seed is not None else cfg.get("seed", 0))


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _fmt(v) -> str:
    return f"{v:.12g}"


# ---------------------------------------------------------------------------
# subcommands


def cmd_rho_eval(args, cfg) -> int:
    spec = _spec(args, cfg)
    for pt in args.point:
        print(_fmt(rho(spec, _vector(pt, spec.n))))
    return EXIT_OK


def cmd_volume(args, cfg) -> int:
    spec = _spec(args, cfg)
    exact = unit_volume(spec) * args.radius**spec.gamma
    print(f"volume {_fmt(exact)}")
    if args.samples:
        mc = monte_carlo_volume(spec, args.radius, args.samples, _seed(args, cfg))
        print(f"monte_carlo {_fmt(mc)} rel_err {abs(mc - exact) / exact:.3e}")
    return EXIT_OK


def cmd_kernel_check(args, cfg) -> int:
    spec = _spec(args, cfg)
    k = builtin_kernel(spec, args.kernel, args.s)
    res = cancellation_residual(k)
    print(f"kernel {k.name}")
    print(f"residual {_fmt(res)}")
    print(f"s_norm {_fmt(sphere_s_norm(k, k.s_exponent))}")
    ok = abs(res) <= CANCELLATION_TOL
    print(f"cancellation {'ok' if ok else 'FAILED'}")
    if args.allow_noncancelling:
        return EXIT_OK
    return EXIT_OK if ok else EXIT_FAIL


_OPS = {
    "singular": lambda k, f, b, x, sch: singular_pv(k, f, x, sch),
    "maximal": lambda k, f, b, x, sch: maximal(k, f, x, sch),
    "marcinkiewicz": lambda k, f, b, x, sch: marcinkiewicz(k, f, x, sch),
    "majorant": lambda k, f, b, x, sch: e1_majorant(k, f, x, sch),
    "commutator": lambda k, f, b, x, sch: commutator_singular(b, k, f, x, sch),
    "maximal-commutator": lambda k, f, b, x, sch: maximal_commutator(b, k, f, x, sch),
    "marcinkiewicz-commutator": lambda k, f, b, x, sch: marcinkiewicz_commutator(b, k, f, x, sch),
}


def cmd_op_eval(args, cfg) -> int:
    spec = _spec(args, cfg)
    kernel = builtin_kernel(spec, args.kernel)
    f = H.make_field(spec, _ref(args.field))
    b = H.make_field(spec, _ref(args.b)) if args.b else None
    if "commutator" in args.op and b is None:
        raise ConfigError(f"{args.op} needs --b")
    scheme = QuadratureScheme(radial_nodes_per_decade=args.per_decade, sphere_nodes=args.sphere_nodes)
    out = []
    for pt in args.point:
        x = _vector(pt, spec.n)
        res = _OPS[args.op](kernel, f, b, x, scheme)
        value = res if isinstance(res, float) else res.value
        err = 0.0 if isinstance(res, float) else res.est_error
        print(f"{pt} {_fmt(value)} est_error {err:.3e}")
        out.append({"point": x.tolist(), "value": value, "est_error": err})
    od = _output_dir(args, cfg)
    if od is not None:
        _write_json(od / f"op-{args.op}.json", out)
    return EXIT_OK


def cmd_norm_eval(args, cfg) -> int:
    spec = _spec(args, cfg)
    f = H.make_field(spec, _ref(args.field))
    x0 = _vector(args.x0, spec.n) if args.x0 else np.zeros(spec.n)
    window = _window(args.window)
    od = _output_dir(args, cfg)
    if args.norm in ("lp", "weak"):
        region = Ellipsoid(x0, args.radius) if args.radius else None
        if args.norm == "lp":
            value = lp_norm(f, args.p, region)
        else:
            if region is None:
                raise ConfigError("the weak norm needs --radius")
            value = weak_lp_norm(f, args.p, region)
        print(f"{args.norm} {_fmt(value)}")
        return EXIT_OK
    if args.norm == "morrey":
        phi = _profile(args.phi or "constant")
        rep = local_morrey_norm(f, args.p, phi, x0, weak=args.weak, r_window=window)
    else:
        rep = local_campanato_norm(f, args.p, args.lam, x0, r_window=window)
    print(f"{args.norm} {_fmt(rep.value)} argsup_r {_fmt(rep.argsup_r)}")
    if od is not None:
        rep.write_csv(od / f"norm-{args.norm}.csv")
        _write_json(od / f"norm-{args.norm}.json", rep.to_json())
    return EXIT_OK


def cmd_check_pair(args, cfg) -> int:
    kind = cond.condition_kind(args.condition, **_params(args.param))
    phi1 = _profile(args.phi1)
    phi2 = _profile(args.phi2) if args.phi2 else None
    rep = cond.check_condition(kind, phi1, phi2, _window(args.window), _window(args.extended_window))
    print(f"{kind.tag.value} c_sup {_fmt(rep.c_sup)} growth {_fmt(rep.growth_ratio)} verdict {rep.verdict.value}")
    od = _output_dir(args, cfg)
    if od is not None:
        rep.write_csv(od / f"condition-{kind.tag.value}.csv")
        _write_json(od / f"condition-{kind.tag.value}.json", rep.to_json())
    return EXIT_OK if rep.verdict == cond.Verdict.SATISFIED else EXIT_FAIL


def cmd_hardy(args, cfg) -> int:
    rep = H.verify_hardy(args.samples, _seed(args, cfg))
    _print_hardy(rep)
    od = _output_dir(args, cfg)
    if od is not None:
        _write_json(od / "hardy.json", rep.to_json())
    return EXIT_OK if rep.passed else EXIT_FAIL


def _print_hardy(rep):
    for name, B, B_exact, rel, best, worst, good in rep.rows:
        print(f"hardy {name}: B {_fmt(B)} (closed form {_fmt(B_exact)}, rel {rel:.2e}) "
              f"best step {_fmt(best)} max random/B {_fmt(worst)} {'ok' if good else 'FAIL'}")


def _cases_from_config(cfg, suite, spec):
    raw = cfg.get("cases")
    if not raw:
        return None
    cases = [H.VerificationCase.from_json(c, spec) for c in raw]
    cases = [c for c in cases if c.suite == suite]
    seed = cfg.get("seed")
    if seed is not None:
        for c in cases:
            c.seed = int(seed)
    return cases or None


def _run_suite(suite, args, cfg, od) -> bool:
    spec = _spec(args, cfg)
    if suite in H.RATIO_SUITES:
        cases = _cases_from_config(cfg, suite, spec)
        res = H.verify_ratio_suite(suite, cases, args.caps, spec=spec)
        for rep in res.reports:
            print(f"{rep.case_id}: max {_fmt(rep.max_ratio)} cap {_fmt(rep.cap)} "
                  f"stability {_fmt(rep.stability)} {rep.status}")
        print(f"suite {suite}: {'pass' if res.passed else 'FAIL'} "
              f"(max stability {_fmt(res.diagnostics['max_stability'])})")
        if od is not None:
            H.write_ratio_csv(od / f"{suite}.csv", res.reports)
            _write_json(od / f"{suite}.json", res.to_json())
        return res.passed
    if suite == "lemma4":
        rep = H.verify_lemma4(spec=spec)
        print(f"lemma4: fitted C {rep.fitted_c} wide {rep.fitted_c_wide} flatness {rep.flatness} "
              f"{'pass' if rep.passed else 'FAIL'}")
        out = rep.to_json()
    elif suite == "lp-bound":
        ok = True
        out = {}
        for kid in H.SUITE_KERNELS:
            rep = H.check_lp_bound(H.verify_lp_bound(kid, 2.0, spec=spec), args.caps)
            print(f"lp-bound {kid}: T {_fmt(rep.max_ratio_t)} M {_fmt(rep.max_ratio_m)} "
                  f"pointwise {_fmt(rep.pointwise_max)} {'pass' if rep.passed else 'FAIL'}")
            ok = ok and rep.passed
            out[kid] = rep.to_json()
        out = {"passed": ok, "kernels": out}
        rep = argparse.Namespace(passed=ok)
    elif suite == "remark-pair":
        rep = H.verify_remark_pair()
        for name, r in rep.reports.items():
            print(f"{name}: c_sup {_fmt(r.c_sup)} growth {_fmt(r.growth_ratio)} verdict {r.verdict.value}")
            if od is not None:
                r.write_csv(od / f"remark-{name.rstrip('*')}.csv")
        out = rep.to_json()
    elif suite == "hardy":
        rep = H.verify_hardy(seed=_seed(args, cfg))
        _print_hardy(rep)
        out = rep.to_json()
    elif suite == "composition":
        ok, out = True, {}
        for name, (phi1, phi2, p, g, logw, lam) in _composition_configs().items():
            r = H.verify_morrey_composition(phi1, phi2, p, g, log_weighted=logw, lam=lam)
            print(f"composition {name}: B {_fmt(r.hardy_constant)} sup C {_fmt(r.condition_sup)} "
                  f"{'pass' if r.passed else 'FAIL'}")
            ok = ok and r.passed
            out[name] = r.to_json()
        out = {"passed": ok, "configs": out}
        rep = argparse.Namespace(passed=ok)
    else:
        raise ConfigError(f"unknown suite {suite!r}; known: {', '.join(SUITES)}")
    if od is not None:
        _write_json(od / f"{suite}.json", out)
    return bool(rep.passed)


def _composition_configs() -> dict:
    g, p = 3.0, 2.0
    morrey = builtin_profile("morrey", lam=1.0, p=p, gamma=g)
    return {
        "morrey": (morrey, morrey, p, g, False, 0.0),
        "remark": (builtin_profile("remark-phi1", gamma=g, p=p, beta=0.5),
                   builtin_profile("remark-phi2", gamma=g, p=p, beta=0.5), p, g, False, 0.0),
        "morrey-log": (morrey, morrey, p, g, True, 0.0),
    }


def cmd_verify(args, cfg) -> int:
    od = _output_dir(args, cfg)
    suites = SUITES if args.suite == "all" else (args.suite,)
    ok = True
    for suite in suites:
        ok = _run_suite(suite, args, cfg, od) and ok
    return EXIT_OK if ok else EXIT_FAIL


def cmd_calibrate(args, cfg) -> int:
    spec = _spec(args, cfg)
    suites = tuple(args.suites) or H.RATIO_SUITES + ("lp-bound",)
    ratio = tuple(s for s in suites if s in H.RATIO_SUITES)
    unknown = set(suites) - set(H.RATIO_SUITES) - {"lp-bound"}
    if unknown:
        raise ConfigError(f"cannot calibrate {sorted(unknown)}")
    if ratio:
        by_suite = {s: _cases_from_config(cfg, s, spec) for s in ratio}
        H.calibrate(ratio, args.caps, spec, {k: v for k, v in by_suite.items() if v})
    if "lp-bound" in suites:
        H.calibrate_lp_bound(args.caps)
    print(f"caps written to {args.caps or H.default_caps_path()}")
    return EXIT_OK


def cmd_report(args, cfg) -> int:
    src = Path(args.input)
    if not src.is_dir():
        raise ConfigError(f"{src} is not a directory")
    ok, seen = True, 0
    for path in sorted(src.glob("*.json")):
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict) or "passed" not in data:
            continue
        seen += 1
        ok = ok and bool(data["passed"])
        print(f"{path.stem}: {'pass' if data['passed'] else 'FAIL'}")
    if not seen:
        raise ConfigError(f"no verification reports in {src}")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config with spec, cases, output_dir, seed")
    common.add_argument("--spec", help="preset name or JSON spec object")
    common.add_argument("--output-dir", dest="output_dir")
    common.add_argument("--seed", type=int)

    ap = argparse.ArgumentParser(prog="anisoharm", description="Anisotropic rough-kernel operators and norms.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rho-eval", parents=[common], help="evaluate the quasi-norm")
    p.add_argument("--point", action="append", required=True, help="comma-separated coordinates")
    p.set_defaults(func=cmd_rho_eval)

    p = sub.add_parser("volume", parents=[common], help="ellipsoid volume, optionally by Monte Carlo")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=0)
    p.set_defaults(func=cmd_volume)

    p = sub.add_parser("kernel-check", parents=[common], help="cancellation residual of a catalog kernel")
    p.add_argument("--kernel", required=True)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--allow-noncancelling", action="store_true",
                   help="report the residual without requiring cancellation")
    p.set_defaults(func=cmd_kernel_check)

    p = sub.add_parser("op-eval", parents=[common], help="evaluate an operator at points")
    p.add_argument("--op", choices=sorted(_OPS), required=True)
    p.add_argument("--kernel", required=True)
    p.add_argument("--field", required=True, help="catalog id or JSON reference")
    p.add_argument("--b", help="commutator symbol (catalog id or JSON reference)")
    p.add_argument("--point", action="append", required=True)
    p.add_argument("--per-decade", dest="per_decade", type=int, default=40)
    p.add_argument("--sphere-nodes", dest="sphere_nodes", type=int, default=512)
    p.set_defaults(func=cmd_op_eval)

    p = sub.add_parser("norm-eval", parents=[common], help="Lebesgue, Morrey and Campanato norms")
    p.add_argument("--norm", choices=("lp", "weak", "morrey", "campanato"), required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--phi", help="profile id or JSON reference (Morrey)")
    p.add_argument("--weak", action="store_true", help="weak Morrey variant")
    p.add_argument("--lam", type=float, default=0.0)
    p.add_argument("--x0")
    p.add_argument("--radius", type=float, help="ellipsoid radius for lp/weak (default whole space)")
    p.add_argument("--window", default="1e-3,1e3")
    p.set_defaults(func=cmd_norm_eval)

    p = sub.add_parser("check-pair", parents=[common], help="classify a weight condition")
    p.add_argument("--condition", required=True, choices=[t.value for t in cond.ConditionTag])
    p.add_argument("--phi1", required=True)
    p.add_argument("--phi2")
    p.add_argument("--param", action="append", help="key=value condition parameter")
    p.add_argument("--window", default="1e-2,1e2")
    p.add_argument("--extended-window", dest="extended_window", default="1e-3,1e3")
    p.set_defaults(func=cmd_check_pair)

    p = sub.add_parser("hardy", parents=[common], help="Hardy-operator best constants")
    p.add_argument("--samples", type=int, default=50)
    p.set_defaults(func=cmd_hardy)

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("suite", choices=SUITES + ("all",))
    p.add_argument("--caps", help="calibration fixtures (default: packaged caps)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("calibrate", parents=[common], help="freeze caps for the ratio suites")
    p.add_argument("suites", nargs="*", help="subset of local, weak, commutator, lp-bound")
    p.add_argument("--caps", help="output fixtures file (default: packaged caps)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("report", parents=[common], help="summarise JSON reports in a directory")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def run_cli(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _load_config(args.config)
        return args.func(args, cfg)
    except (ConfigError, CalibrationError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except AnisoHarmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
