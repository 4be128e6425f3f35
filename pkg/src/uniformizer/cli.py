"""Command-line interface: generation, transformation, solves, verification.

Subcommands:

* ``example``: build one of the model domains and write its JSON file.
* ``validate-phi``: check a dampening function against its admissibility
  conditions.
* ``transform``: write the dampened realization of a domain (inspection
  artifact; solve commands re-derive the transform in memory from base
  domain plus phi so edge masses stay exact).
* ``solve``: Dirichlet solve; with ``--phi`` runs the dampened pipeline with
  the point at infinity, otherwise solves on the domain as given.
* ``capacity`` / ``modulus``: condenser energies by the two dual engines.
* ``classify``: parabolic/hyperbolic verdict for the far end.
* ``verify``: property checks emitting (check, params, value, pass) rows.
* ``report``: merge run reports into one summary.

Exit codes: 0 success, 1 when a requested verification reports pass=false,
2 on input errors (malformed files, unknown flags, bad parameters).
All outputs are written atomically; JSON reports embed the config hash and
seed, and a timestamp field excluded from reproducibility comparisons.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time

import numpy as np

from .analysis import (
    AnalysisError,
    boundary_fatness,
    classify_parabolicity,
    dist_infinity_check,
    doubling_constant,
    mass_exponents,
    sample_boundary,
    sample_interior,
    sample_pairs,
    uniformity_spot_check,
)
from .dampening import (
    Dampening,
    DampeningError,
    log_power,
    power,
    tabulated,
)
from .dampening import validate as validate_dampening
from .domains import GENERATORS, DomainBundle, generate
from .energy import (
    EnergyError,
    adams_check,
    adams_exponent,
    besov_norm,
    hardy_check,
    poincare_check,
    random_smooth_fields,
)
from .graphspace import DomainFormatError, GraphSpace, dump_domain, load_domain
from .solver import (
    Condenser,
    DirichletProblem,
    SolveOptions,
    SolverError,
    capacity,
    modulus,
    solve_dirichlet_unbounded,
    solve_p_harmonic,
)
from .transform import (
    BoundaryMeasure,
    TransformError,
    attach_infinity,
    codimensional_measure,
    transform,
    verify_codimensionality,
)
from .util import atomic_write_text, canonical_json, config_hash, jsonable

INPUT_ERRORS = (
    DomainFormatError,
    DampeningError,
    TransformError,
    SolverError,
    AnalysisError,
    EnergyError,
    OSError,
    ValueError,
)


def _parse_phi(spec: str) -> Dampening:
    kind, _, rest = spec.partition(":")
    if kind == "power":
        return power(float(rest))
    if kind == "log_power":
        return log_power(float(rest))
    if kind == "tabulated":
        with open(rest) as fh:
            samples = json.load(fh)
        return tabulated([(float(t), float(v)) for t, v in samples])
    raise DampeningError(f"unknown dampening spec {spec!r} (power:B, log_power:B, tabulated:FILE)")


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_vertices(text: str) -> list[str]:
    if text.startswith("@"):
        with open(text[1:]) as fh:
            data = json.load(fh)
        if not isinstance(data, list):
            raise DomainFormatError(f"{text[1:]}: vertex list file must hold a JSON list")
        return [str(v) for v in data]
    return [v for v in text.split(",") if v]


def _load_nu(path: str) -> BoundaryMeasure:
    with open(path) as fh:
        return BoundaryMeasure.from_payload(json.load(fh))


def _boundary_data(spec: str, space: GraphSpace) -> dict:
    """Boundary data from 'const:V', 'coord:x', 'coord:y', or a JSON file."""
    bids = [space.ids[i] for i in space.boundary_indices()]
    if spec.startswith("const:"):
        val = float(spec[6:])
        return {v: val for v in bids}
    if spec.startswith("coord:"):
        axis = {"x": 0, "y": 1}.get(spec[6:])
        if axis is None:
            raise DomainFormatError(f"bad data spec {spec!r}")
        if space.coords is None:
            raise DomainFormatError("domain carries no coordinates for coord: data")
        return {v: float(space.coords[v][axis]) for v in bids}
    with open(spec) as fh:
        raw = json.load(fh)
    if isinstance(raw, dict) and "values" in raw:
        raw = raw["values"]
    if not isinstance(raw, dict):
        raise DomainFormatError(f"{spec}: boundary data must be a JSON object")
    return {str(k): float(v) for k, v in raw.items()}


def _report_payload(args: argparse.Namespace, body: dict) -> dict:
    config = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in ("func",) and not callable(v)
    }
    payload = {
        "command": args.command,
        "config": config,
        "config_hash": config_hash(config),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    payload.update(body)
    return jsonable(payload)


def _write_json(path: str, payload: dict) -> None:
    atomic_write_text(path, canonical_json(payload))


def _write_rows(path: str, payload: dict, rows: list[dict]) -> None:
    """Write check rows as CSV (with a JSON sidecar payload) or as JSON."""
    if path.endswith(".csv"):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["check", "params", "value", "pass"])
        for row in rows:
            writer.writerow(
                [
                    row["check"],
                    json.dumps(row["params"], sort_keys=True),
                    row["value"],
                    row["pass"],
                ]
            )
        atomic_write_text(path, buf.getvalue())
    else:
        _write_json(path, payload)


# ---------------------------------------------------------------------------
# subcommands


def cmd_example(args) -> int:
    kwargs = {"h": args.h}
    if args.name == "plane_minus_cantor_square":
        kwargs["R"] = args.H
    else:
        kwargs["H"] = args.H
    if args.name in ("cantor_slit", "plane_minus_cantor_square"):
        if args.level is None:
            raise DomainFormatError(f"{args.name} requires --level")
        kwargs["level"] = args.level
    bundle = generate(args.name, **kwargs)
    dump_domain(bundle.space, args.out)
    if args.nu:
        _write_json(args.nu, bundle.nu.to_payload())
    print(
        f"{args.name}: {bundle.space.n_vertices} vertices, "
        f"{bundle.space.n_edges} edges, theta={bundle.theta:.6g} -> {args.out}"
    )
    return 0


def cmd_validate_phi(args) -> int:
    phi = _parse_phi(args.phi)
    band_measures = None
    if args.domain:
        space = load_domain(args.domain)
        band_measures = space.bands().band_measure
    report = validate_dampening(phi, args.p, band_measures=band_measures, n_max=args.n_max)
    payload = _report_payload(args, {"report": report.to_dict(), "pass": report.all_pass})
    if args.out:
        _write_json(args.out, payload)
    for name, ok in sorted(report.passes.items()):
        print(f"{name}: {'pass' if ok else 'FAIL'}")
    return 0 if report.all_pass else 1


def cmd_transform(args) -> int:
    space = load_domain(args.domain)
    phi = _parse_phi(args.phi)
    ts = transform(space, phi, args.p)
    if not args.no_infinity:
        ts = attach_infinity(ts)
    dump_domain(ts.graph, args.out)
    d_inf = ts.distance_to_infinity() if ts.infinity_attached else None
    print(
        f"transformed: {ts.graph.n_vertices} vertices; "
        + (f"max d_phi to infinity {float(np.nanmax(d_inf[np.isfinite(d_inf)])):.6g}" if d_inf is not None else "no infinity vertex")
    )
    return 0


def _solve_options(args) -> SolveOptions:
    opts = SolveOptions()
    if getattr(args, "tol", None) is not None:
        opts.tol = args.tol
    if getattr(args, "max_iter", None) is not None:
        opts.max_iter = args.max_iter
    if getattr(args, "eps_schedule", None):
        opts.eps_schedule = _parse_floats(args.eps_schedule)
    return opts


def cmd_solve(args) -> int:
    space = load_domain(args.domain)
    data = _boundary_data(args.data, space)
    opts = _solve_options(args)
    if args.phi:
        phi = _parse_phi(args.phi)
        res = solve_dirichlet_unbounded(
            space, phi, args.p, data, at_infinity=args.at_infinity, options=opts
        )
        values = {vid: res.u[i] for i, vid in enumerate(space.ids)}
        body = {
            "values": values,
            "at_infinity": res.at_infinity_value,
            "energy": res.solve.energy,
            "iterations": res.solve.iterations,
            "residual": res.solve.residual,
            "flags": res.solve.flags,
        }
        flags = res.solve.flags
    else:
        if args.at_infinity is not None:
            raise SolverError("--at-infinity requires --phi (the dampened pipeline)")
        sres = solve_p_harmonic(DirichletProblem(space, args.p, data, opts))
        values = {vid: sres.u[i] for i, vid in enumerate(space.ids)}
        body = {
            "values": values,
            "energy": sres.energy,
            "iterations": sres.iterations,
            "residual": sres.residual,
            "flags": sres.flags,
        }
        flags = sres.flags
    _write_json(args.out, _report_payload(args, body))
    print(f"solved: energy={body['energy']:.8g} iterations={body['iterations']} flags={flags}")
    return 0


def _condenser_setup(args):
    space = load_domain(args.domain)
    target = space
    if args.phi:
        phi = _parse_phi(args.phi)
        ts = transform(space, phi, args.p)
        if args.with_infinity:
            ts = attach_infinity(ts)
        target = ts
    E = _parse_vertices(args.E)
    F = _parse_vertices(args.F)
    U = _parse_vertices(args.U) if args.U else None
    return target, Condenser(E=E, F=F, U=U)


def cmd_capacity(args) -> int:
    target, cond = _condenser_setup(args)
    res = capacity(target, cond, args.p, _solve_options(args))
    body = {"value": res.value, "flags": res.solve.flags}
    if args.out:
        _write_json(args.out, _report_payload(args, body))
    print(f"capacity: {res.value:.10g}")
    return 0


def cmd_modulus(args) -> int:
    target, cond = _condenser_setup(args)
    res = modulus(target, cond, args.p, tol=args.tol, max_paths=args.max_paths)
    body = {"value": res.value, "paths_used": res.paths_used, "flags": res.flags}
    if args.out:
        _write_json(args.out, _report_payload(args, body))
    print(f"modulus: {res.value:.10g} ({res.paths_used} paths)")
    return 0


def cmd_classify(args) -> int:
    space = load_domain(args.domain)
    phi = _parse_phi(args.phi)
    ts = attach_infinity(transform(space, phi, args.p))
    theory_fit = None
    if args.with_theory:
        bands = space.bands()
        radii = [2.0**k for k in range(0, max(3, bands.n_max))]
        centers = sample_interior(space, 3, args.seed)
        theory_fit = mass_exponents(space, centers, radii)
    report = classify_parabolicity(
        ts, args.p, n_shells=args.shells, options=_solve_options(args), theory_fit=theory_fit
    )
    body = {"report": report.to_dict()}
    if args.out:
        _write_json(args.out, _report_payload(args, body))
    print(f"classification: {report.verdict} (spread {report.spread:.3g})")
    return 0


def cmd_report(args) -> int:
    runs = []
    for path in args.inputs:
        with open(path) as fh:
            runs.append(json.load(fh))

    def any_fail(node) -> bool:
        if isinstance(node, dict):
            return any(
                (k == "pass" and v is False) or any_fail(v) for k, v in node.items()
            )
        if isinstance(node, list):
            return any(any_fail(x) for x in node)
        return False

    failed = any(any_fail(r) for r in runs)
    _write_json(args.out, _report_payload(args, {"runs": runs, "pass": not failed}))
    print(f"merged {len(runs)} reports -> {args.out} ({'FAIL' if failed else 'pass'})")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# verify


def _verify_rows(args) -> list[dict]:
    space = load_domain(args.domain)
    nu = _load_nu(args.nu) if args.nu else None
    phi = _parse_phi(args.phi) if args.phi else None
    seed = args.seed
    h = nu.mesh_scale if nu is not None else None
    rows: list[dict] = []

    def add(check: str, params: dict, value, ok: bool) -> None:
        rows.append({"check": check, "params": params, "value": value, "pass": bool(ok)})

    def need_nu() -> BoundaryMeasure:
        if nu is None:
            raise AnalysisError(f"check {args.check!r} requires --nu")
        return nu

    def need_ts(attach: bool = False):
        if phi is None:
            raise AnalysisError(f"check {args.check!r} requires --phi")
        ts = transform(space, phi, args.p)
        return attach_infinity(ts) if attach else ts

    def default_radii(scale: float) -> list[float]:
        out = []
        r = 4 * scale
        while r <= 0.25 * (1 + 1e-9) and len(out) < 4:
            out.append(r)
            r *= 2
        return out or [4 * scale]

    if args.check == "codim":
        m = need_nu()
        radii = _parse_floats(args.radii) if args.radii else default_radii(m.mesh_scale)
        rep = verify_codimensionality(space, m, radii, spread_bound=args.bound or 16.0)
        add("codim", {"theta": m.theta, "radii": radii}, rep.spread, rep.passed)
    elif args.check == "doubling":
        target = need_ts(attach=True) if (phi and args.at_infinity) else (need_ts() if phi else space)
        if phi and args.at_infinity:
            centers = [target.graph.infinity_id]
            d = target.distance_to_infinity()
            fin = d[np.isfinite(d) & (d > 0)]
            base_r = float(fin.min()) * 2
            radii = [base_r * 2**k for k in range(5)]
        else:
            centers = sample_interior(target, args.samples, seed)
            radii = _parse_floats(args.radii) if args.radii else [0.5, 1.0, 2.0, 4.0]
        rep = doubling_constant(target, centers, radii, bound=args.bound)
        add("doubling", {"radii": radii, "at_infinity": bool(args.at_infinity)}, rep.max_ratio, rep.passed)
    elif args.check == "exponents":
        target = need_ts(attach=True) if (phi and args.at_infinity) else (need_ts() if phi else space)
        if phi and args.at_infinity:
            centers = [target.graph.infinity_id]
            d = target.distance_to_infinity()
            fin = d[np.isfinite(d) & (d > 0)]
            lo = float(fin.min()) * 2
            hi = float(fin.max()) * 0.5
            radii = list(np.geomspace(lo, hi, 6)) if hi > lo else [lo, 2 * lo, 4 * lo]
        else:
            centers = sample_interior(target, args.samples, seed)
            radii = _parse_floats(args.radii) if args.radii else [1.0, 2.0, 4.0, 8.0]
        fit = mass_exponents(target, centers, radii)
        ok = fit.Q_plus <= fit.Q_minus
        if args.expect is not None:
            ok = ok and abs(fit.slope - args.expect) <= (args.tol or 0.3)
        add(
            "exponents",
            {"radii": [float(r) for r in radii], "expect": args.expect},
            {"Q_minus": fit.Q_minus, "Q_plus": fit.Q_plus, "slope": fit.slope},
            ok,
        )
    elif args.check == "distinf":
        ts = need_ts(attach=True)
        rep = dist_infinity_check(ts)
        ok = args.bound is None or rep.kappa_emp <= args.bound
        add("distinf", {"bound": args.bound}, rep.kappa_emp, ok)
    elif args.check == "poincare":
        target = need_ts() if phi else space
        fields = random_smooth_fields(target, args.fields, seed)
        centers = sample_interior(target, args.samples, seed + 1)
        radii = _parse_floats(args.radii) if args.radii else [1.0, 2.0]
        rep = poincare_check(target, args.p, centers, radii, fields, lam=2.0)
        ok = np.isfinite(rep.C_P) and (args.bound is None or rep.C_P <= args.bound)
        add("poincare", {"lambda": 2.0, "n_fields": args.fields}, rep.C_P, ok)
    elif args.check == "hardy":
        ts = need_ts()
        fields = random_smooth_fields(space, args.fields, seed)
        worst = max(hardy_check(ts, f) for f in fields)
        ok = np.isfinite(worst) and (args.bound is None or worst <= args.bound)
        add("hardy", {"n_fields": args.fields}, worst, ok)
    elif args.check == "adams":
        ts = need_ts()
        m = need_nu()
        if args.q is not None:
            q = args.q
        else:
            centers = sample_interior(space, 3, seed)
            bands = space.bands()
            radii = [2.0**k for k in range(0, max(3, bands.n_max))]
            fit = mass_exponents(space, centers, radii)
            qb = (phi.beta * args.p - fit.Q_minus) / (phi.beta - 1)
            q = adams_exponent(m.theta, args.p, qb, p_tilde=args.p_tilde)
        fields = random_smooth_fields(ts, args.fields, seed)
        centers = sample_boundary(space, min(args.samples, 10), seed + 2)
        radii = _parse_floats(args.radii) if args.radii else [0.25, 0.5]
        balls = [(c, r) for c in centers for r in radii]
        worst = 0.0
        violated = False
        for f in fields:
            rep = adams_check(ts, m, f, q, m.theta, balls)
            worst = max(worst, rep.max_ratio)
            violated = violated or bool(rep.violations)
        add("adams", {"q": q, "n_fields": args.fields}, worst, np.isfinite(worst) and not violated)
    elif args.check == "besov":
        m = need_nu()
        rng = np.random.default_rng(seed)
        bids = [space.ids[i] for i in space.boundary_indices()]
        alpha = args.alpha
        worst = 0.0
        for _ in range(args.fields):
            f1 = {v: float(rng.normal()) for v in bids}
            f2 = {v: float(rng.normal()) for v in bids}
            f12 = {v: f1[v] + f2[v] for v in bids}
            n1 = besov_norm(space, m, f1, alpha, args.p)
            n2 = besov_norm(space, m, f2, alpha, args.p)
            n12 = besov_norm(space, m, f12, alpha, args.p)
            if n1 + n2 > 0:
                worst = max(worst, n12 / (n1 + n2))
        add("besov", {"alpha": alpha, "n_fields": args.fields}, worst, worst <= 1 + 1e-9)
    elif args.check == "uniformity":
        target = need_ts() if phi else space
        pairs = sample_pairs(target, args.samples, seed)
        rep = uniformity_spot_check(target, pairs)
        ok = np.isfinite(rep.C_U) and (args.bound is None or rep.C_U <= args.bound)
        add("uniformity", {"n_pairs": len(pairs)}, rep.C_U, ok)
    elif args.check == "fatness":
        ts = need_ts()
        m = need_nu()
        centers = sample_boundary(space, args.samples, seed)
        radii = _parse_floats(args.radii) if args.radii else default_radii(m.mesh_scale)
        rep = boundary_fatness(ts, m, args.p, centers, radii, floor=args.floor)
        add("fatness", {"radii": radii, "floor": args.floor}, rep.min_ratio, rep.passed)
    else:
        raise AnalysisError(f"unknown check {args.check!r}")
    return rows


def cmd_verify(args) -> int:
    rows = _verify_rows(args)
    ok = all(r["pass"] for r in rows)
    payload = _report_payload(args, {"rows": rows, "pass": ok})
    if args.out:
        _write_rows(args.out, payload, rows)
    for r in rows:
        print(f"{r['check']}: value={r['value']} pass={r['pass']}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="uniformizer",
        description="Dampened-metric laboratory for unbounded graph domains",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("example", help="generate a model domain")
    p.add_argument("--name", required=True, choices=sorted(GENERATORS))
    p.add_argument("--h", type=float, required=True, help="mesh width (must divide 1)")
    p.add_argument("--H", type=float, required=True, help="truncation extent (power of two; the window radius R for plane_minus_cantor_square)")
    p.add_argument("--level", type=int, default=None, help="cantor construction level")
    p.add_argument("--out", required=True)
    p.add_argument("--nu", default=None, help="optional path for the boundary measure JSON")
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("validate-phi", help="check dampening admissibility")
    p.add_argument("--phi", required=True, help="power:B | log_power:B | tabulated:FILE")
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--n-max", type=int, default=20)
    p.add_argument("--domain", default=None, help="use this domain's band measures")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_validate_phi)

    p = sub.add_parser("transform", help="write the dampened realization")
    p.add_argument("--domain", required=True)
    p.add_argument("--phi", required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--no-infinity", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("solve", help="p-harmonic Dirichlet solve")
    p.add_argument("--domain", required=True)
    p.add_argument("--phi", default=None)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--data", required=True, help="JSON file | const:V | coord:x | coord:y")
    p.add_argument("--at-infinity", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--eps-schedule", default=None, help="comma list of regularization values")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    for name, fn in (("capacity", cmd_capacity), ("modulus", cmd_modulus)):
        p = sub.add_parser(name, help=f"condenser {name}")
        p.add_argument("--domain", required=True)
        p.add_argument("--phi", default=None)
        p.add_argument("--with-infinity", action="store_true")
        p.add_argument("--p", type=float, default=2.0)
        p.add_argument("--E", required=True, help="comma list of vertex ids or @file.json")
        p.add_argument("--F", required=True)
        p.add_argument("--U", default=None)
        p.add_argument("--tol", type=float, default=1e-6)
        if name == "modulus":
            p.add_argument("--max-paths", type=int, default=200)
        else:
            p.add_argument("--max-iter", type=int, default=None)
        p.add_argument("--out", default=None)
        p.set_defaults(func=fn)

    p = sub.add_parser("classify", help="parabolic/hyperbolic verdict at infinity")
    p.add_argument("--domain", required=True)
    p.add_argument("--phi", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--shells", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--with-theory", action="store_true", help="attach the exponent-formula prediction")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("verify", help="property checks with pass/fail rows")
    p.add_argument(
        "--check",
        required=True,
        choices=[
            "poincare", "hardy", "adams", "codim", "besov",
            "doubling", "exponents", "distinf", "uniformity", "fatness",
        ],
    )
    p.add_argument("--domain", required=True)
    p.add_argument("--phi", default=None)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--nu", default=None)
    p.add_argument("--fields", type=int, default=20, help="random field count (random:N)")
    p.add_argument("--samples", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radii", default=None, help="comma list")
    p.add_argument("--bound", type=float, default=None)
    p.add_argument("--expect", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--p-tilde", type=float, default=None)
    p.add_argument("--floor", type=float, default=1e-6)
    p.add_argument("--at-infinity", action="store_true", help="center sweeps at the infinity vertex")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="merge JSON reports")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def run(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> int:
    return run()


if __name__ == "__main__":
    sys.exit(main())
