"""Command line entry point: verify | sweep | pfaffian | report.

Output files (all floats with 17 significant digits; the only
run-dependent text is the leading '#' comment line of each CSV):

  report.json   list of residual reports
  summary.csv   identity,key,lhs,rhs,abs_residual,rel_residual,metric,
                tolerance,converged,status
  sweep.csv     t,lnD_numeric,lnD_predicted,residual
  sweep.json    the sweep result with prediction components
  plot.gp       gnuplot script plotting |residual| against t on a log scale
  pfaffian.json value of the Pfaffian and the optional series cross-check
"""
import argparse
import configparser
from dataclasses import dataclass, field, replace
import datetime as _dt
import json
import math
import os
import sys
import warnings

import numpy as np

from .errors import ConfigError, ContractViolation, PflabError
from .identities import (GridSpec, IdentityId, STATUS_FAIL, STATUS_HYP, default_params,
                         default_profile, default_tolerance, run_suite, _canonical_grid, _ops,
                         _orthogonal_M, _symplectic_M)
from .linop import epsilon_operator
from .pfaffian import fredholm_pfaffian_series, pf_via_sqrt_det, symplectic_block_kernel
from .profiles import KINDS, Profile, profile_from_dict
from .quadrature import gauss_legendre
from . import kernels as kn

__all__ = ["RunConfig", "load_config", "main", "run_verify", "run_sweep", "run_pfaffian",
           "run_report"]

_T_IDS = {"C11", "C16", "C17AUX", "Z26", "A6", "C23", "C26", "C30", "C31", "C28", "Z47", "Z48"}
_END_IDS = {"C3", "C7", "Z7", "Z12"}


def fmt(x):
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


@dataclass
class RunConfig:
    profile: Profile = None
    grid: GridSpec = field(default_factory=GridSpec)
    ids: list = None                      # None: full default suite
    t_values: list = None
    endpoints: tuple = None
    variant: str = None
    sweep_t: list = None
    pf_t: float = 0.0
    pf_cls: str = "orthogonal"
    series_n: int = 12
    series_ell: int = 3
    out: str = "pflab_out"
    tolerances: dict = field(default_factory=dict)
    expected_violations: set = field(default_factory=set)


def _option_lines(path):
    """(section, key) -> line number, for diagnostics."""
    where = {}
    sec = None
    with open(path) as fh:
        for i, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line[0] in "#;":
                continue
            if line.startswith("[") and line.endswith("]"):
                sec = line[1:-1].strip()
            elif sec is not None:
                for sep in ("=", ":"):
                    if sep in line:
                        where[(sec, line.split(sep, 1)[0].strip().lower())] = i
                        break
    return where


_KNOWN = {
    "profile": {"kind", "c", "a", "x0", "alpha"},
    "grid": {"n", "tail", "refine", "inner_n"},
    "verify": {"ids", "t", "endpoints", "expected_violations"},
    "sweep": {"variant", "t0", "t1", "steps", "t"},
    "pfaffian": {"t", "class", "series_n", "series_ell"},
    "output": {"dir"},
    "tolerances": None,
}


def load_config(path):
    """Parse an INI-style run description into a RunConfig."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path!r} not found") from None
    except configparser.DuplicateOptionError as e:
        raise ConfigError(f"duplicate option in section [{e.section}]", e.lineno, e.option) from None
    except configparser.DuplicateSectionError as e:
        raise ConfigError(f"duplicate section [{e.section}]", e.lineno) from None
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("option outside any [section]", e.lineno) from None
    except configparser.ParsingError as e:
        ln = e.errors[0][0] if e.errors else None
        raise ConfigError("unparseable line", ln) from None
    lines = _option_lines(path)
    cfg = RunConfig()

    def err(sec, key, msg):
        raise ConfigError(msg, lines.get((sec, key)), f"{sec}.{key}")

    def get(sec, key, conv, default=None):
        if not cp.has_option(sec, key):
            return default
        raw = cp.get(sec, key)
        try:
            return conv(raw)
        except (ValueError, PflabError) as exc:
            err(sec, key, f"bad value {raw!r}: {exc}")

    for sec in cp.sections():
        if sec not in _KNOWN:
            raise ConfigError(f"unknown section [{sec}]", None, sec)
        allowed = _KNOWN[sec]
        for key in cp.options(sec):
            if allowed is not None and key not in allowed:
                err(sec, key, "unknown field")

    if cp.has_section("profile"):
        d = {k: cp.get("profile", k) for k in cp.options("profile")}
        if "kind" not in d:
            raise ConfigError("profile needs a kind", None, "profile.kind")
        if d["kind"] not in KINDS:
            err("profile", "kind", f"unknown profile kind {d['kind']!r}")
        try:
            cfg.profile = profile_from_dict(d)
        except (ValueError, PflabError) as exc:
            raise ConfigError(str(exc), lines.get(("profile", "kind")), "profile") from None
    if cp.has_section("grid"):
        try:
            cfg.grid = GridSpec(get("grid", "n", int, 64), get("grid", "tail", float, 12.0),
                                get("grid", "refine", float, 1.5),
                                get("grid", "inner_n", int, 20))
        except ContractViolation as exc:
            raise ConfigError(str(exc), None, "grid") from None
    if cp.has_section("verify"):
        cfg.ids = get("verify", "ids", _parse_ids, [])
        cfg.t_values = get("verify", "t", _floats, None)
        cfg.endpoints = get("verify", "endpoints", _endpoints, None)
        cfg.expected_violations = set(get("verify", "expected_violations", _parse_ids, []))
    if cp.has_section("sweep"):
        cfg.variant = get("sweep", "variant", str, None)
        if cp.has_option("sweep", "t"):
            cfg.sweep_t = get("sweep", "t", _floats)
        elif cp.has_option("sweep", "t0"):
            t0 = get("sweep", "t0", float)
            t1 = get("sweep", "t1", float, t0)
            steps = get("sweep", "steps", int, 1)
            if steps < 1:
                err("sweep", "steps", "steps must be at least 1")
            cfg.sweep_t = _range(t0, t1, steps)
    if cp.has_section("pfaffian"):
        cfg.pf_t = get("pfaffian", "t", float, 0.0)
        cfg.pf_cls = get("pfaffian", "class", str, "orthogonal")
        if cfg.pf_cls not in ("symplectic", "orthogonal"):
            err("pfaffian", "class", "class must be symplectic or orthogonal")
        cfg.series_n = get("pfaffian", "series_n", int, 12)
        cfg.series_ell = get("pfaffian", "series_ell", int, 3)
    if cp.has_section("output"):
        cfg.out = get("output", "dir", str, cfg.out)
    if cp.has_section("tolerances"):
        for key in cp.options("tolerances"):
            try:
                ident = IdentityId.parse(key)
            except ContractViolation as exc:
                err("tolerances", key, str(exc))
            v = get("tolerances", key, float)
            if not v > 0:
                err("tolerances", key, "tolerances must be positive")
            cfg.tolerances[ident.value] = v
    _validate(cfg, lines)
    return cfg


def _validate(cfg, lines=None):
    lines = lines or {}
    p = cfg.profile
    if p is not None and cfg.t_values and p.family in ("wiener-hopf", "bessel-mult"):
        if any(not t > 0 for t in cfg.t_values):
            raise ConfigError("this profile family needs t > 0", lines.get(("verify", "t")),
                              "verify.t")
    if cfg.variant is not None:
        from .asymptotics import VARIANTS
        if cfg.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}",
                              lines.get(("sweep", "variant")), "sweep.variant")


def _parse_ids(s):
    return [IdentityId.parse(x).value for x in s.replace(",", " ").split()]


def _floats(s):
    vals = [float(x) for x in s.replace(",", " ").split()]
    if any(not math.isfinite(v) for v in vals):
        raise ValueError("values must be finite")
    return vals


def _endpoints(s):
    e = _floats(s)
    if len(e) < 2 or len(e) % 2 or any(b <= a for a, b in zip(e[:-1], e[1:])):
        raise ValueError("need an even number of increasing endpoints")
    return tuple(e)


def _range(t0, t1, steps):
    if steps == 1:
        return [float(t0)]
    return [float(v) for v in np.linspace(t0, t1, steps)]


# ------------------------------------------------------------------ flags

def _apply_flags(cfg, args):
    if args.profile is not None or any(getattr(args, k) is not None for k in ("c", "a", "alpha")):
        base = cfg.profile
        kind = args.profile or (base.kind if base is not None else "sech")
        d = base.as_dict() if base is not None and base.kind == kind else {"kind": kind}
        d["kind"] = kind
        for k in ("c", "a", "alpha"):
            if getattr(args, k) is not None:
                d[k] = getattr(args, k)
        cfg.profile = profile_from_dict(d)
    g = cfg.grid
    if args.n is not None:
        g = replace(g, n=args.n)
    if args.tail is not None:
        g = replace(g, tail=args.tail)
    if args.refine is not None:
        g = replace(g, refine=args.refine)
    cfg.grid = g
    if args.out is not None:
        cfg.out = args.out
    if args.tol is not None:
        if not args.tol > 0:
            raise ConfigError("--tol must be positive", None, "tol")
        cfg.tolerances = {i.value: args.tol for i in IdentityId}
    if args.t0 is not None:
        t1 = args.t1 if args.t1 is not None else args.t0
        steps = args.steps or 1
        ts = _range(args.t0, t1, steps)
        cfg.sweep_t = ts
        cfg.t_values = ts
        cfg.pf_t = args.t0
    ids = getattr(args, "ids", None)
    if ids:
        cfg.ids = _parse_ids(ids)
    if getattr(args, "variant", None):
        cfg.variant = args.variant
    if getattr(args, "cls", None):
        cfg.pf_cls = args.cls
    _validate(cfg)
    return cfg


# ------------------------------------------------------------------ verify

def _profile_for(ident, cfg):
    """The configured profile when its family suits the identity, else the default."""
    dflt = default_profile(ident)
    p = cfg.profile
    if p is not None and (p.family == dflt.family or (
            ident in ("C3", "C7", "Z7", "Z12") and p.family in ("hankel", "wiener-hopf"))):
        return p
    return dflt


def build_tasks(cfg):
    ids = [i.value for i in IdentityId] if cfg.ids is None else list(cfg.ids)
    tasks = []
    for ident in ids:
        p = _profile_for(ident, cfg)
        tol = cfg.tolerances.get(ident, default_tolerance(ident))
        if ident in _T_IDS and cfg.t_values:
            ts = cfg.t_values
            if p.family != "hankel":
                ts = [t for t in ts if t > 0] or [default_params(ident)["t"]]
            for t in ts:
                tasks.append((ident, p, {"t": t}, cfg.grid, tol))
        elif ident in _END_IDS and cfg.endpoints:
            tasks.append((ident, p, {"endpoints": cfg.endpoints}, cfg.grid, tol))
        else:
            tasks.append((ident, p, {}, cfg.grid, tol))
    return tasks


def _key(rep):
    prm = {k: v for k, v in rep.params.items() if k not in ("profile", "grid")}
    return ";".join(f"{k}={v}" for k, v in sorted(prm.items()))


def _header():
    return "# pflab " + _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ") + "\n"


def write_reports(reports, out):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "report.json"), "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=1, default=_json_default)
        fh.write("\n")
    with open(os.path.join(out, "summary.csv"), "w") as fh:
        fh.write(_header())
        fh.write("identity,key,lhs,rhs,abs_residual,rel_residual,metric,tolerance,converged,status\n")
        for r in reports:
            fh.write(",".join([r.identity.value, '"' + _key(r) + '"', fmt(r.lhs), fmt(r.rhs),
                               fmt(r.abs_residual), fmt(r.rel_residual), r.metric,
                               fmt(r.tolerance), str(bool(r.converged)).lower(), r.status]) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def exit_status(reports, expected=()):
    """1 iff some report FAILed or violated a hypothesis not listed as expected."""
    for r in reports:
        status = r.status if hasattr(r, "status") else r["status"]
        ident = r.identity.value if hasattr(r, "identity") else r["identity"]
        if status == STATUS_FAIL:
            return 1
        if status == STATUS_HYP and ident not in expected:
            return 1
    return 0


def run_verify(cfg, workers=None, stream=None):
    stream = stream or sys.stdout
    tasks = build_tasks(cfg)
    reports = run_suite(tasks, workers=workers, sort=False)
    write_reports(reports, cfg.out)
    for r in reports:
        print(f"{r.status:<20} {r.identity.value:<7} {_key(r):<40} "
              f"{r.metric}_residual={r.residual:.3e} tol={r.tolerance:.1e}", file=stream)
    return exit_status(reports, cfg.expected_violations)


# ------------------------------------------------------------------ sweep

def _default_variant(p):
    return "wh-orthogonal" if p.family == "wiener-hopf" else "hankel-orthogonal"


def plot_script(csv_name="sweep.csv", title="residual vs t"):
    return "\n".join([
        "# gnuplot script: |ln D numeric - ln D predicted| against t",
        "set datafile separator ','",
        "set logscale y",
        "set format y '%.0e'",
        "set xlabel 't'",
        "set ylabel '|residual|'",
        f"set title '{title}'",
        "set key off",
        "set terminal pngcairo size 800,500",
        "set output 'residual.png'",
        f"plot '{csv_name}' every ::1 using 1:(abs($4)) with linespoints pt 7",
        "",
    ])


def run_sweep(cfg, workers=None, stream=None):
    stream = stream or sys.stdout
    from .asymptotics import sweep as do_sweep
    p = cfg.profile or default_profile("C26")
    variant = cfg.variant or _default_variant(p)
    ts = cfg.sweep_t
    if not ts:
        ts = [2.0, 3.0, 4.0, 5.0, 6.0] if p.family == "wiener-hopf" else [-2.0, -3.0, -4.0, -5.0, -6.0]
    res = do_sweep(p, variant, ts, cfg.grid, workers=workers)
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "sweep.csv"), "w") as fh:
        fh.write(_header())
        fh.write("t,lnD_numeric,lnD_predicted,residual\n")
        for row in res.rows():
            fh.write(",".join(fmt(v) for v in row) + "\n")
    with open(os.path.join(cfg.out, "sweep.json"), "w") as fh:
        json.dump(res.to_dict(), fh, indent=1, default=_json_default)
        fh.write("\n")
    with open(os.path.join(cfg.out, "plot.gp"), "w") as fh:
        fh.write(plot_script(title=f"{variant} {p.kind}"))
    for t, num, pred, r in res.rows():
        print(f"t={fmt(t)} lnD={fmt(num)} predicted={fmt(pred)} residual={fmt(r)}", file=stream)
    print(f"decay_rate={fmt(res.decay_rate)}", file=stream)
    return 1 if res.flagged else 0


# ------------------------------------------------------------------ pfaffian

def _block(p, cls, grid, gs):
    S, G, H = _ops(p, cls, grid, gs)
    if cls == "orthogonal":
        return _orthogonal_M(S, G, H, epsilon_operator(grid))
    return _symplectic_M(S, G, H)


def run_pfaffian(cfg, stream=None):
    stream = stream or sys.stdout
    p = cfg.profile or default_profile("C11")
    cls = cfg.pf_cls if p.family != "bessel-mult" else "symplectic"
    gs = cfg.grid
    t = cfg.pf_t
    out = {"profile": p.as_dict(), "t": t, "class": cls, "grid": gs.as_dict()}
    if p.is_zero:
        out["pfaffian"] = 1.0
    else:
        out["pfaffian"] = pf_via_sqrt_det(_block(p, cls, _canonical_grid(p, t, gs), gs))
    # series cross-check on a small single-panel grid, where it is affordable
    cross = None
    if not p.is_zero and p.family in ("hankel", "wiener-hopf") and cfg.series_n ** cfg.series_ell <= 14 ** 4:
        if p.family == "hankel":
            small = gauss_legendre(cfg.series_n, t, max(t, p.centre) + 10.0)
        else:
            small = gauss_legendre(cfg.series_n, -t, t)
        S, G, H = kn.main_kernels(p, cls, gs.inner)
        eps = kn.epsilon_kernel() if cls == "orthogonal" else None
        sq = pf_via_sqrt_det(_block(p, cls, small, gs))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            ser = fredholm_pfaffian_series(symplectic_block_kernel(S, G, H, eps), small,
                                           cfg.series_ell, strict=False)
        cross = {"n": cfg.series_n, "ell_max": cfg.series_ell, "series": ser, "sqrt_det": sq,
                 "rel_difference": abs(ser - sq) / max(abs(sq), 1e-300),
                 "warnings": [str(w.message) for w in caught]}
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    out["series_cross_check"] = cross
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "pfaffian.json"), "w") as fh:
        json.dump(out, fh, indent=1, default=_json_default)
        fh.write("\n")
    print(f"pfaffian={fmt(out['pfaffian'])}", file=stream)
    if cross is not None:
        print(f"series={fmt(cross['series'])} sqrt_det={fmt(cross['sqrt_det'])} "
              f"rel_difference={cross['rel_difference']:.3e}", file=stream)
    return 0


# ------------------------------------------------------------------ report

def run_report(cfg, stream=None):
    stream = stream or sys.stdout
    path = os.path.join(cfg.out, "report.json")
    try:
        with open(path) as fh:
            reports = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"no report at {path}; run 'pflab verify' first") from None
    for r in reports:
        res = r["abs_residual"] if r["metric"] == "abs" else r["rel_residual"]
        res = float("nan") if res is None else res
        print(f"{r['status']:<20} {r['identity']:<7} {r['metric']}_residual={res:.3e}", file=stream)
    n_pass = sum(r["status"] == "PASS" for r in reports)
    print(f"{n_pass}/{len(reports)} PASS", file=stream)
    return exit_status(reports, cfg.expected_violations)


# ------------------------------------------------------------------ main

def build_parser():
    ap = argparse.ArgumentParser(
        prog="pflab",
        description="Fredholm determinant and Pfaffian identity checks and asymptotic sweeps.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("\n", 2)[2])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH", help="INI-style run file")
        sp.add_argument("--profile", choices=sorted(KINDS), help="profile kind")
        sp.add_argument("--c", type=float, help="profile amplitude")
        sp.add_argument("--a", type=float, help="profile decay rate")
        sp.add_argument("--alpha", type=float, help="bessel order")
        sp.add_argument("--t0", type=float, help="first t (or the only t)")
        sp.add_argument("--t1", type=float, help="last t")
        sp.add_argument("--steps", type=int, help="number of t values from t0 to t1")
        sp.add_argument("--n", type=int, help="Gauss nodes per panel")
        sp.add_argument("--tail", type=float, help="half-line truncation length")
        sp.add_argument("--out", metavar="DIR", help="output directory (created if missing)")
        sp.add_argument("--tol", type=float, help="tolerance override for every identity")
        sp.add_argument("--refine", type=float, help="grid refinement factor for convergence")
        sp.add_argument("--threads", type=int, help="worker cap (default: PFLAB_THREADS or cpu count)")

    v = sub.add_parser("verify", help="run identity checks; writes report.json and summary.csv")
    common(v)
    v.add_argument("--ids", help="comma separated identity ids (default: all)")
    s = sub.add_parser("sweep", help="t-sweep against the asymptotic prediction")
    common(s)
    s.add_argument("--variant", help="hankel-symplectic | hankel-orthogonal | wh-symplectic | wh-orthogonal")
    pf = sub.add_parser("pfaffian", help="Pfaffian by the square-root route")
    common(pf)
    pf.add_argument("--class", dest="cls", choices=("symplectic", "orthogonal"))
    r = sub.add_parser("report", help="summarise an existing report.json")
    common(r)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = _apply_flags(cfg, args)
        if args.command == "verify":
            return run_verify(cfg, workers=args.threads)
        if args.command == "sweep":
            return run_sweep(cfg, workers=args.threads)
        if args.command == "pfaffian":
            return run_pfaffian(cfg)
        return run_report(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (PflabError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
