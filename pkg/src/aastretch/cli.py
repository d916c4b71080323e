"""Command-line front end.

Subcommands: ``modulus``, ``distortion``, ``msp``, ``verify`` and
``open-question``.  Exit status is 0 when every check passes, 1 when a check
fails (the report is still written) and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings

import numpy as np

from .maps import beltrami, jacobian_mu, msp_indicator, pushforward_bounds, pushforward_speed
from .modulus import (
    NotConverged,
    build_problem,
    discrete_modulus,
    extremal_density_modulus,
    open_question_function,
    radial_image_modulus,
)
from .stretch import (
    InvalidParameters,
    canonical_kind,
    load_config,
    make_scenario,
    sample_connecting_family,
)
from .verify import PROFILES, open_question_report, reports_to_csv, verify_linear, verify_radial

SCHEMA = 1
DISCRETE_RTOL = 0.05


def _num(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return json.dumps(str(x))
    return "%.17g" % x


def dumps(obj) -> str:
    """Deterministic JSON with sorted keys and 17 significant digits."""
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ", ".join(f"{json.dumps(k)}: {dumps(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    return json.dumps(str(obj))


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario kind (linear_lt1, linear_gt1, radial) or a JSON config path")
    common.add_argument("--k", type=float)
    common.add_argument("--r0", type=float)
    common.add_argument("--psi0", type=float)
    common.add_argument("--grid", type=int)
    common.add_argument("--curves", type=int)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--out")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol-profile", choices=sorted(PROFILES), default="strict")

    parser = argparse.ArgumentParser(prog="aastretch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    m = sub.add_parser("modulus", parents=[common], help="closed-form and discrete 4-modulus")
    m.add_argument("--perturbation", type=float, default=0.0,
                   help="relative amplitude of curve perturbations (0 uses extremal fibers)")
    sub.add_parser("distortion", parents=[common], help="Beltrami coefficient, distortion and Jacobian table")
    sub.add_parser("msp", parents=[common], help="minimal stretching indicator along fibers")
    sub.add_parser("verify", parents=[common], help="full report for a scenario")
    sub.add_parser("open-question", parents=[common], help="radial modulus ratio and monotonicity sweep")
    return parser


def _settings(args) -> dict:
    cfg = {}
    scen = args.scenario
    if scen and (scen.endswith(".json") or os.path.isfile(scen)):
        try:
            cfg = load_config(scen)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {scen}: {exc}") from exc
        scen = cfg["kind"]
    out = {
        "kind": scen,
        "k": args.k if args.k is not None else cfg.get("k"),
        "r0": args.r0 if args.r0 is not None else cfg.get("r0"),
        "psi0": args.psi0 if args.psi0 is not None else cfg.get("psi0"),
        "grid": args.grid if args.grid is not None else cfg.get("grid"),
        "curves": args.curves if args.curves is not None else cfg.get("curves"),
        "tolerances": cfg.get("tolerances"),
    }
    return out


def _scenario(st: dict):
    if st["kind"] is None:
        raise UsageError("--scenario is required")
    if st["k"] is None:
        raise UsageError("--k is required")
    try:
        canonical_kind(st["kind"])
        return make_scenario(st["kind"], float(st["k"]), st["r0"], st["psi0"])
    except InvalidParameters as exc:
        raise UsageError(str(exc)) from exc


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    keys = list(rows[0]) if rows else []
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (_num(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    return buf.getvalue()


def cmd_modulus(args, st):
    sc = _scenario(st)
    grid = st["grid"] or 32
    n_curves = st["curves"] or 500
    _, quad = extremal_density_modulus(sc.foliation)
    curves = sample_connecting_family(sc, n_curves, args.perturbation, seed=args.seed)
    problem = build_problem(sc.foliation, curves, grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotConverged)
        res = discrete_modulus(problem)
    rel = (res.value - sc.mod_gamma0) / sc.mod_gamma0
    passed = res.max_violation <= 1e-9
    if args.perturbation == 0:
        passed = passed and abs(rel) <= DISCRETE_RTOL
    report = {"scenario": sc.describe(), "closed_form": sc.mod_gamma0, "quadrature": quad,
              "discrete": res.to_dict(), "relative_error": rel, "tolerance": DISCRETE_RTOL,
              "passed": passed}
    rows = [{"kind": sc.kind, "k": sc.k, "closed_form": sc.mod_gamma0, "quadrature": quad,
             "discrete": res.value, "relative_error": rel, "grid": "x".join(map(str, res.grid)),
             "curves": res.n_curves, "iterations": res.iterations, "converged": res.converged,
             "max_violation": res.max_violation}]
    return report, rows, passed


def _grid_points(sc, n):
    axes = [np.linspace(lo, hi, n + 2)[1:-1] for lo, hi in sc.foliation.bounds]
    grids = np.meshgrid(*axes, indexing="ij")
    return sc.foliation.curve_map(*[g.ravel() for g in grids])


def cmd_distortion(args, st):
    sc = _scenario(st)
    p = _grid_points(sc, st["grid"] or 6)
    mu = beltrami(sc.stretch, p)
    K = (1 + np.abs(mu)) / (1 - np.abs(mu))
    J = jacobian_mu(sc.stretch, p)
    rows = [{"a": a, "lam": l, "t": t, "mu_re": m.real, "mu_im": m.imag, "K": k_, "J": j}
            for a, l, t, m, k_, j in zip(p.a, p.lam, p.t, mu, K, J)]
    passed = bool(np.all(np.abs(mu) < 1) and np.all(J > 0))
    report = {"scenario": sc.describe(), "points": rows, "max_K": float(K.max()), "passed": passed}
    return report, rows, passed


def cmd_msp(args, st):
    sc = _scenario(st)
    fol = sc.foliation
    n = st["grid"] or 9
    fibers = sample_connecting_family(sc, st["curves"] or 4, 0.0, seed=args.seed)
    s = np.linspace(fol.c, fol.d, n + 2)[1:-1]
    rows, passed = [], True
    for idx, fiber in enumerate(fibers):
        ind = msp_indicator(sc.stretch, fiber, s)
        speed = pushforward_speed(sc.stretch, fiber, s)
        lo, _ = pushforward_bounds(sc.stretch, fiber, s)
        ok = np.all(np.abs(ind.imag) < 1e-10) & np.all(np.abs(speed - lo) <= 1e-9 * np.maximum(1, lo))
        if sc.k != 1:
            ok &= np.all(ind.real < 0)
        passed &= bool(ok)
        for si, i, v, l in zip(s, ind, speed, lo):
            rows.append({"curve": idx, "s": si, "indicator_re": i.real, "indicator_im": i.imag,
                         "pushforward_speed": v, "lower_bound": l})
    report = {"scenario": sc.describe(), "traces": rows, "passed": passed}
    return report, rows, passed


def cmd_verify(args, st):
    sc = _scenario(st)
    tol = st["tolerances"]
    if sc.kind == "radial":
        rep = verify_radial(sc.k, sc.r0, sc.psi0, profile=args.tol_profile, seed=args.seed, tolerances=tol)
    else:
        rep = verify_linear(sc.k, sc.kind, profile=args.tol_profile, seed=args.seed, tolerances=tol)
    buf = io.StringIO()
    reports_to_csv([rep], buf)
    return rep.to_dict(), buf.getvalue(), rep.passed


def cmd_open_question(args, st):
    if st["k"] is None:
        raise UsageError("--k is required")
    k = float(st["k"])
    r0 = st["r0"] if st["r0"] is not None else math.e
    psi0 = st["psi0"] if st["psi0"] is not None else math.pi / 3
    try:
        rep = open_question_report(k, r0, psi0, grid=st["grid"] or 99)
    except InvalidParameters as exc:
        raise UsageError(str(exc)) from exc
    ks = np.linspace(0.01, 0.99, st["grid"] or 99)
    mod = (2.0 / math.log(r0)) ** 3 * (psi0 + math.sin(psi0) * math.cos(psi0))
    rows = [{"k": kk, "ratio": radial_image_modulus(kk, r0, psi0) / mod, "bound": kk ** -3.5,
             "K2": kk ** -4.0, "h": float(open_question_function(kk, psi0))} for kk in ks]
    out = rep.to_dict()
    out["sweep"] = rows
    return out, rows, rep.passed


COMMANDS = {
    "modulus": cmd_modulus,
    "distortion": cmd_distortion,
    "msp": cmd_msp,
    "verify": cmd_verify,
    "open-question": cmd_open_question,
}


def run(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        st = _settings(args)
        report, rows, passed = COMMANDS[args.command](args, st)
    except UsageError as exc:
        print(f"aastretch: error: {exc}", file=sys.stderr)
        return 2
    if args.format == "json":
        text = dumps({"schema": SCHEMA, "command": args.command, **report}) + "\n"
    else:
        text = rows if isinstance(rows, str) else _csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if passed else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
