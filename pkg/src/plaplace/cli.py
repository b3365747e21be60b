"""Command-line entry point: one command per process, CSV profiles and JSON reports."""

import argparse
import math
import os
import sys
import warnings
from importlib import metadata

import numpy as np

from . import estimates, family, io
from .core import (ExtremalKind, check_dimension, Exponential, PowerShift, ProblemSpec, Regime, exact_extremal, power_exponent_m,
                   regime)
from .errors import PLaplaceError
from .radial_solver import (extremal_approximation, minimal_solution, residual, shoot_lambda,
                            trace_branch)
from .stability import marginality_study, min_eigenvalue

ENV_OUT = "PLAPLACE_OUT"
COMMANDS = ("solve", "branch", "extremal", "stability", "verify", "family", "demo-blowup", "report")
SUITES = ("lemma21", "prop22", "theorem14", "theorem15", "lemma23", "lemma24", "theorem12", "all")
RESIDUAL_TOL = 1e-8
EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# --- parsing ------------------------------------------------------------------


def _common(parser):
    parser.add_argument("--config", help="file of 'key = value' lines mirroring the flags")
    parser.add_argument("--out", help=f"output directory (default ${ENV_OUT} or the current directory)")
    parser.add_argument("--name", help="stem for output files (default: the command name)")
    parser.add_argument("--N", type=int, help="dimension")
    parser.add_argument("--p", type=float, help="p-Laplace exponent")
    parser.add_argument("--f", choices=("exp", "power"), default="exp", help="nonlinearity")
    parser.add_argument("--m", type=float, help="exponent of (1+t)^m (default: the closed-form value)")
    parser.add_argument("--lambda", dest="lam", type=float, help="parameter lambda")
    parser.add_argument("--amplitude", type=float, help="central value u(0)")
    parser.add_argument("--mesh-count", type=int, default=400, help="stability mesh elements")
    parser.add_argument("--cut-radius", type=float, default=1e-4, help="inner radius of the stability pencil")
    parser.add_argument("--r-min", type=float, default=1e-8, help="smallest radius of family grids")
    parser.add_argument("--a-min", type=float, default=0.1, help="smallest branch amplitude")
    parser.add_argument("--a-max", type=float, default=30.0, help="largest branch amplitude")
    parser.add_argument("--steps", type=int, default=30, help="branch amplitudes")
    parser.add_argument("--seed", type=int, default=0, help="seed for random test functions")


def build_parser():
    parser = argparse.ArgumentParser(prog="plaplace", description="Radial p-Laplace laboratory.")
    parser.add_argument("--version", action="version", version=version())
    sub = parser.add_subparsers(dest="command", required=True)
    cmds = {}
    for name in COMMANDS:
        cmds[name] = sub.add_parser(name)
        if name != "report":
            _common(cmds[name])
    cmds["solve"].add_argument("--amplitude-search", action="store_true",
                               help="find the minimal solution at --lambda by searching over u(0)")
    cmds["stability"].add_argument("--profile", help="profile CSV (default: solve the minimal solution)")
    cmds["stability"].add_argument("--extrapolate", action="store_true", help="run the cut/mesh ladder")
    cmds["verify"].add_argument("--profile", required=False, help="profile CSV to check")
    cmds["verify"].add_argument("--suite", choices=SUITES, default="all")
    cmds["family"].add_argument("--h", default="zero",
                                help="generator: 'zero', 'power:c,k' or 'bumps:r1,d1,y1;r2,d2,y2;...'")
    cmds["demo-blowup"].add_argument("--order", type=int, choices=(1, 2, 3), default=1)
    cmds["demo-blowup"].add_argument("--terms", type=int, default=4, help="use r_n = 4^-n for n = 1..terms")
    cmds["demo-blowup"].add_argument("--targets", help="comma-separated M_n (default 10^(n+1))")
    cmds["report"].add_argument("inputs", nargs="+", help="JSON reports to aggregate")
    cmds["report"].add_argument("--out", help="output directory")
    cmds["report"].add_argument("--name", default="reproduction")
    cmds["report"].add_argument("--config", help=argparse.SUPPRESS)
    return parser, cmds


def read_config(path):
    """'key = value' lines; '#' starts a comment; keys may use '-' or '_'."""
    values = {}
    with open(path) as fh:
        for k, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{k}: expected 'key = value'")
            key, value = (x.strip() for x in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _apply_config(sub, values):
    known = {a.dest: a for a in sub._actions}
    known.setdefault("lambda", known.get("lam"))
    defaults = {}
    for key, raw in values.items():
        action = known.get(key)
        if action is None:
            raise UsageError(f"unknown config key '{key}'")
        if isinstance(action, argparse._StoreTrueAction):
            value = raw.lower() in ("1", "true", "yes", "on")
        else:
            value = action.type(raw) if action.type else raw
            if action.choices and value not in action.choices:
                raise UsageError(f"config key '{key}': {raw!r} not in {list(action.choices)}")
        defaults[action.dest] = value
    sub.set_defaults(**defaults)


def parse(argv):
    parser, cmds = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        _apply_config(cmds[args.command], read_config(args.config))
        args = parser.parse_args(argv)
    return args


# --- helpers --------------------------------------------------------------------


def _need(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + ("lambda" if n == "lam" else n)
                                                                      for n in missing))


def _nonlinearity(args):
    if args.f == "exp":
        return Exponential()
    m = args.m
    if m is None:
        _need(args, "N", "p")
        m = power_exponent_m(args.N, args.p)
    return PowerShift(m)


def _closed_form_kind(args):
    """The closed-form extremal matching (N, p, f), if any."""
    reg = regime(args.N, args.p)
    if args.f == "exp" and reg is Regime.CRITICAL:
        return ExtremalKind.EXPONENTIAL_CRITICAL
    if args.f == "power" and reg is Regime.SUPERCRITICAL:
        m = power_exponent_m(args.N, args.p)
        if args.m is None or math.isclose(args.m, m, rel_tol=1e-12):
            return ExtremalKind.POWER_SUPERCRITICAL
    return None


def _config_echo(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("config",)}


class Outputs:
    def __init__(self, args):
        folder = args.out or os.environ.get(ENV_OUT) or "."
        if not os.path.isdir(folder):
            try:
                os.makedirs(folder, exist_ok=True)
            except OSError as exc:
                raise UsageError(f"cannot create output directory {folder}: {exc}") from None
        if not os.access(folder, os.W_OK):
            raise UsageError(f"output directory {folder} is not writable")
        self.folder = folder
        self.stem = args.name or args.command
        self.doc = io.ReportDocument(command=args.command, config=_config_echo(args), version=version())

    def path(self, suffix):
        return os.path.join(self.folder, self.stem + suffix)

    def profile(self, profile, suffix=".csv", role="profile"):
        path = self.path(suffix)
        io.save_profile(path, profile)
        self.doc.profiles.append({"role": role, "path": os.path.basename(path), "N": profile.N, "p": profile.p,
                                  "nodes": profile.grid.count})
        return path

    def finish(self):
        path = self.path(".json")
        io.write_report(path, self.doc)
        print(f"report: {path}")
        failures = self.doc.failures
        for sid in failures:
            print(f"FAILED: {sid}", file=sys.stderr)
        return EXIT_CHECK if failures else EXIT_OK


def _verdict(ok):
    return "pass" if ok else "fail"


def _self_checks(out, profile, g):
    res = residual(profile, g)
    out.doc.add(io.PLUMBING, res, _verdict(res < RESIDUAL_TOL), RESIDUAL_TOL, check="pde_residual")
    mono = bool(np.all(np.diff(profile.u) < 0.0))
    out.doc.add(io.PLUMBING, float(mono), _verdict(mono), 0.0, check="u_strictly_decreasing")


# --- commands ---------------------------------------------------------------------


def cmd_solve(args, out):
    _need(args, "N", "p")
    f = _nonlinearity(args)
    if args.amplitude is not None and not args.amplitude_search:
        res = shoot_lambda(args.N, args.p, f, args.amplitude)
        spec = ProblemSpec(args.N, args.p, res.lam, f)
        profile = res.profile
        out.doc.add(io.PLUMBING, res.evaluations, "pass", 0.0, check="shooting_evaluations")
    elif args.lam is not None:
        spec = ProblemSpec(args.N, args.p, args.lam, f)
        if args.amplitude_search:
            profile = minimal_solution(spec)
        else:
            raise UsageError("with --lambda use --amplitude-search, or give --amplitude alone")
    else:
        raise UsageError("give --amplitude, or --lambda with --amplitude-search")
    out.doc.add(io.PLUMBING, spec.lam, "pass", 0.0, check="lambda")
    out.doc.add(io.PLUMBING, float(profile.u[0]), "pass", 0.0, check="u_at_first_node")
    _self_checks(out, profile, spec.g)
    out.profile(profile)


def _branch(args, out):
    _need(args, "N", "p")
    f = _nonlinearity(args)
    br = trace_branch(args.N, args.p, f, args.a_min, args.a_max, args.steps)
    lines = ["amplitude,lambda"] + ["%.17g,%.17g" % pt for pt in br.points]
    io.atomic_write(out.path("-branch.csv"), "\n".join(lines) + "\n")
    out.doc.profiles.append({"role": "branch", "path": os.path.basename(out.path("-branch.csv"))})
    kind = _closed_form_kind(args)
    exact = exact_extremal(kind, args.N, args.p).lambda_star if kind else None
    details = {"uncertainty": br.lambda_star_uncertainty, "mode": br.mode, "partial": br.partial,
               "ordering_verified": br.ordering_verified, "closed_form": exact}
    if exact is not None:
        rel = abs(br.lambda_star_estimate - exact) / exact
        out.doc.add("remark13.lambda_star", br.lambda_star_estimate, _verdict(rel <= 0.01), 0.01,
                    relative_error=rel, **details)
    else:
        ok = math.isfinite(br.lambda_star_estimate)
        out.doc.add("remark13.lambda_star", br.lambda_star_estimate, _verdict(ok), br.lambda_star_uncertainty,
                    **details)
    out.doc.add(io.PLUMBING, float(br.ordering_verified), _verdict(br.ordering_verified), 0.0,
                check="minimal_ordering")
    return br, f, kind


def cmd_branch(args, out):
    _branch(args, out)


def cmd_extremal(args, out):
    br, f, kind = _branch(args, out)
    if kind is not None:
        profile = exact_extremal(kind, args.N, args.p).profile
        source = "closed_form"
    else:
        profile = extremal_approximation(br)
        source = "branch_approximation"
    out.doc.add(io.PLUMBING, 0.0, "pass", 0.0, check="extremal_source", source=source)
    for rep in estimates.check_theorem12(profile, f):
        out.doc.add_estimate(rep)
    out.profile(profile, "-extremal.csv", role="extremal")


def _profile_and_spec(args):
    _need(args, "N", "p")
    f = _nonlinearity(args)
    if getattr(args, "profile", None):
        _need(args, "lam")
        prof = io.load_profile(args.profile, args.N, args.p)
        return prof, ProblemSpec(args.N, args.p, args.lam, f), False
    if args.lam is not None:
        spec = ProblemSpec(args.N, args.p, args.lam, f)
        return minimal_solution(spec), spec, True
    if args.amplitude is not None:
        res = shoot_lambda(args.N, args.p, f, args.amplitude)
        return res.profile, ProblemSpec(args.N, args.p, res.lam, f), True
    raise UsageError("give --profile with --lambda, --lambda, or --amplitude")


def cmd_stability(args, out):
    prof, spec, fresh = _profile_and_spec(args)
    gprime = spec.g
    if args.extrapolate:
        study = marginality_study(prof, gprime)
        srep = study.report
        out.doc.add("section1.semistability", study.extrapolated, srep.verdict.value.lower(), srep.stability_tol,
                    route="extrapolated", cuts=list(study.cuts), richardson=list(study.richardson))
    rep = min_eigenvalue(prof, gprime, cut_radius=args.cut_radius, mesh_count=args.mesh_count)
    out.doc.add("section1.semistability", rep.min_eigenvalue, rep.verdict.value.lower(), rep.stability_tol,
                cut_radius=rep.cut_radius, mesh_count=rep.mesh_count, mass=rep.mass, route=rep.route)
    if fresh:
        out.profile(prof)


def _suite_reports(suite, prof, spec):
    g = spec.g
    runs = {
        "lemma21": lambda: estimates.check_lemma21(prof),
        "prop22": lambda: estimates.check_prop22(prof),
        "theorem14": lambda: estimates.check_theorem14(prof),
        "theorem15": lambda: estimates.check_theorem15(prof, g),
        "lemma23": lambda: estimates.check_lemma23(prof, g),
        "lemma24": lambda: estimates.check_lemma24(prof),
        "theorem12": lambda: estimates.check_theorem12(prof, spec.f),
    }
    names = [s for s in SUITES if s != "all"] if suite == "all" else [suite]
    reports = []
    for name in names:
        out = runs[name]()
        reports.extend(out if isinstance(out, list) else [out])
    return reports


def cmd_verify(args, out):
    prof, spec, fresh = _profile_and_spec(args)
    for rep in _suite_reports(args.suite, prof, spec):
        out.doc.add_estimate(rep)
    if fresh:
        out.profile(prof)


def parse_generator(text):
    text = text.strip()
    if text == "zero":
        return family.ZeroH()
    kind, _, body = text.partition(":")
    try:
        if kind == "power":
            c, k = (float(x) for x in body.split(","))
            return family.PowerH(c, k)
        if kind == "bumps":
            rows = [[float(x) for x in part.split(",")] for part in body.split(";") if part.strip()]
            if any(len(r) != 3 for r in rows):
                raise ValueError("each bump needs centre, half-width and height")
            c, d, y = (np.array(col) for col in zip(*rows))
            return family.BumpSumH(c, d, y)
    except ValueError as exc:
        raise UsageError(f"bad generator '{text}': {exc}") from None
    raise UsageError(f"unknown generator '{text}'")


def _certificates(out, sol):
    for name, ok in sol.certificates.items():
        out.doc.add(f"theorem31.{name}", float(ok), _verdict(ok), 0.0,
                    **{k: v for k, v in sol.details.items() if not isinstance(v, list)})


def cmd_family(args, out):
    _need(args, "N", "p")
    h = parse_generator(args.h)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sol = family.family_profile(h, args.N, args.p, r_min=args.r_min)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    sol = family.verify_family(sol, seed=args.seed, cut_radius=args.cut_radius, mesh_count=args.mesh_count)
    _certificates(out, sol)
    res = residual(sol.profile, sol.g_recovered)
    out.doc.add(io.PLUMBING, res, _verdict(res < RESIDUAL_TOL), RESIDUAL_TOL, check="roundtrip_residual")
    out.profile(sol.profile)


BLOWUP_IDS = {1: "prop33.u_r", 2: "prop35.u_rr", 3: "prop37.u_rrr"}


def cmd_demo_blowup(args, out):
    _need(args, "N", "p")
    if args.terms < 1:
        raise UsageError("--terms must be positive")
    rn = 4.0 ** -np.arange(1, args.terms + 1)
    if args.targets:
        try:
            Mn = np.array([float(x) for x in args.targets.split(",")])
        except ValueError:
            raise UsageError("--targets must be comma-separated numbers") from None
        if Mn.size != rn.size:
            raise UsageError("--targets needs one value per term")
    else:
        Mn = 10.0 ** (np.arange(1, args.terms + 1) + 1.0)
    res = family.demonstrate_blowup(args.order, rn, Mn, args.N, args.p, r_min=args.r_min)
    for n, (r, M, v, ok, amp) in enumerate(zip(rn, res.targets, res.values, res.achieved, res.amplification), 1):
        out.doc.add(f"{BLOWUP_IDS[args.order]}.n{n}", v / M, _verdict(ok), 0.0, max_ratio_location=float(r),
                    target=M, achieved_value=v, amplification=amp)
    _certificates(out, res.solution)
    out.profile(res.solution.profile)


def cmd_report(args):
    rows = {}
    for path in args.inputs:
        doc = io.read_report(path)
        for rec in doc["records"]:
            if rec["statement_id"] == io.PLUMBING:
                continue
            rows.setdefault(rec["statement_id"], []).append((os.path.basename(path), rec))
    table = {sid: [{"source": src, "fitted_constant": rec["fitted_constant"], "verdict": rec["verdict"],
                    "tolerance": rec["tolerance"]} for src, rec in recs] for sid, recs in sorted(rows.items())}
    folder = args.out or os.environ.get(ENV_OUT) or "."
    os.makedirs(folder, exist_ok=True)
    doc = io.ReportDocument(command="report", config={"inputs": [os.path.basename(p) for p in args.inputs]},
                            version=version())
    for sid, entries in table.items():
        fails = [e for e in entries if e["verdict"] == "fail"]
        doc.add(sid, entries[0]["fitted_constant"], "fail" if fails else entries[0]["verdict"],
                entries[0]["tolerance"], sources=entries)
    path = os.path.join(folder, args.name + ".json")
    io.write_report(path, doc)
    width = max([len(s) for s in table] + [12])
    print(f"{'statement':<{width}}  {'constant':>14}  verdict  source")
    for sid, entries in table.items():
        for e in entries:
            c = e["fitted_constant"]
            c = f"{c:14.6g}" if isinstance(c, (int, float)) else f"{str(c):>14}"
            print(f"{sid:<{width}}  {c}  {e['verdict']:<7}  {e['source']}")
    print(f"report: {path}")
    return EXIT_CHECK if doc.failures else EXIT_OK


HANDLERS = {"solve": cmd_solve, "branch": cmd_branch, "extremal": cmd_extremal, "stability": cmd_stability,
            "verify": cmd_verify, "family": cmd_family, "demo-blowup": cmd_demo_blowup}


def run(args):
    if args.command == "report":
        return cmd_report(args)
    if args.N is not None and args.p is not None:
        check_dimension(args.N, args.p)
    out = Outputs(args)
    HANDLERS[args.command](args, out)
    return out.finish()


def main(argv=None):
    try:
        args = parse(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except (UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return run(args)
    except (UsageError, PLaplaceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
