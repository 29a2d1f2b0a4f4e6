"""Command-line surface: billiard-lab {classify|attract|sweep|manifolds|twist|cones}.

All subcommands read a JSON run config (see README for the schema), write
CSV/JSON artifacts into the output directory, and exit 0 on success, 1 on
numerical non-convergence (partial outputs are still written), 2 on
invalid input.  Flags override config fields.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_NONCONVERGED = 1
EXIT_INVALID = 2


def _load_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise SystemExit2(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise SystemExit2(f"config is not valid JSON: {exc}")


class SystemExit2(Exception):
    """Invalid-input errors mapped to exit code 2."""


def _build_inputs(cfg, lam_override=None):
    from .dynamics import dissipation_from_spec
    from .geometry import curve_from_spec

    if "domain" not in cfg:
        raise SystemExit2("config missing required field 'domain'")
    try:
        curve = curve_from_spec(cfg["domain"])
    except (KeyError, ValueError) as exc:
        raise SystemExit2(f"invalid domain spec: {exc}")
    dspec = cfg.get("dissipation", 0.5)
    if lam_override is not None:
        dspec = float(lam_override)
    try:
        diss = dissipation_from_spec(dspec)
    except (KeyError, ValueError) as exc:
        raise SystemExit2(f"invalid dissipation spec: {exc}")
    return curve, diss


def _outdir(cfg):
    out = Path(cfg.get("output_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_classify(cfg, args):
    from .dynamics import ConstantDissipation
    from .exports import write_csv
    from .orbits import classify_two_periodic, find_two_periodic

    curve, diss = _build_inputs(cfg, args.lam)
    if not isinstance(diss, ConstantDissipation):
        raise SystemExit2("classify requires constant dissipation")
    lam = diss.value
    grid = int(cfg.get("grids", {}).get("orbit_seeds", 64))
    orbits = find_two_periodic(curve, grid)
    P = curve.perimeter
    rows = []
    for o in orbits:
        if o.length_critical_type == "degenerate":
            rows.append((o.s1 / P, o.s2 / P, o.tau, o.K1, o.K2, o.k12,
                         "DegenerateFamily", math.nan, math.nan, math.nan, math.nan))
            continue
        c = classify_two_periodic(o, lam)
        rows.append((
            o.s1 / P, o.s2 / P, o.tau, o.K1, o.K2, o.k12,
            f"{c.orbit_type}({lam:g})",
            c.moduli[0] if c.is_complex else c.eigenvalues[0].real,
            c.moduli[1] if c.is_complex else c.eigenvalues[1].real,
            c.lambda_minus if c.lambda_minus is not None else math.nan,
            c.lambda_bar if c.lambda_bar is not None else math.nan,
        ))
    out = write_csv(
        _outdir(cfg) / "classification.csv", cfg,
        ["s1_over_P", "s2_over_P", "tau", "K1", "K2", "k12", "type",
         "mu1", "mu2", "lambda_minus", "lambda_bar"],
        rows, reproducible=args.reproducible,
    )
    print(f"wrote {out} ({len(rows)} orbits)")
    return EXIT_OK


def cmd_attract(cfg, args):
    from .attractor import birkhoff_trim, graph_test, iterate_annulus
    from .exports import write_csv, write_json, write_pgm

    curve, diss = _build_inputs(cfg, args.lam)
    g = cfg.get("grids", {})
    C, R = int(g.get("columns", 512)), int(g.get("rows", 512))
    n = int(cfg.get("iterations", 30))
    grid = iterate_annulus(curve, diss, C, R, n, threads=args.threads)
    trimmed = birkhoff_trim(grid)
    verdict, folds = graph_test(trimmed)

    out = _outdir(cfg)
    P = curve.perimeter
    for name, gobj in (("attractor_cells.csv", grid), ("attractor_trimmed.csv", trimmed)):
        centers = gobj.cell_centers()
        write_csv(out / name, cfg, ["s_over_P", "r"],
                  [(c[0] / P, c[1]) for c in centers], reproducible=args.reproducible)
    if cfg.get("pgm", False):
        write_pgm(out / "attractor.pgm", grid.occupied)
        write_pgm(out / "attractor_trimmed.pgm", trimmed.occupied)
    write_json(out / "attract_report.json", cfg, {
        "verdict": verdict, "fold_columns": folds[:64],
        "occupied": grid.occupied_count(), "trimmed": trimmed.occupied_count(),
        "trim_mode": trimmed.trim_mode, "iterations": n, "grid": [C, R],
    }, reproducible=args.reproducible)
    print(f"verdict: {verdict} ({grid.occupied_count()} cells, trim {trimmed.occupied_count()})")
    return EXIT_OK


def cmd_sweep(cfg, args):
    from .exports import write_csv
    from .rotation import SweepBudgets, lambda_sweep

    curve, _ = _build_inputs(cfg)
    lambdas = cfg.get("lambdas")
    if not lambdas or len(lambdas) < 2:
        raise SystemExit2("sweep needs a 'lambdas' list with at least 2 values")
    g = cfg.get("grids", {})
    budgets = SweepBudgets(
        columns=int(g.get("columns", 256)), rows=int(g.get("rows", 256)),
        n_iter=int(cfg.get("iterations", 30)),
        rotation_steps=int(cfg.get("rotation_steps", 2000)),
        n_starts=int(cfg.get("rotation_starts", 16)),
        horseshoe_at_top=bool(cfg.get("horseshoe_at_top", False)),
        threads=max(1, args.threads or os.cpu_count() or 1),
        seed=int(cfg.get("seed", 0)),
    )
    rows = lambda_sweep(curve, lambdas, budgets)
    out = write_csv(
        _outdir(cfg) / "phase_diagram.csv", cfg,
        ["lambda", "verdict", "rho_minus", "rho_plus", "width", "contains_half",
         "horseshoe", "area_lower"],
        [(r.lam, r.graph_verdict, r.rho_minus, r.rho_plus, r.width,
          int(r.contains_half), "" if r.horseshoe_flag is None else int(r.horseshoe_flag),
          r.attractor_area_lower) for r in rows],
        reproducible=args.reproducible,
    )
    print(f"wrote {out} ({len(rows)} rows)")
    bad = [r for r in rows if r.graph_verdict == "Error"]
    return EXIT_NONCONVERGED if bad else EXIT_OK


def cmd_manifolds(cfg, args):
    from .dynamics import ConstantDissipation
    from .exports import write_csv, write_json
    from .manifolds import grow_stable, grow_unstable, homoclinic_intersections
    from .orbits import classify_two_periodic, find_two_periodic

    curve, diss = _build_inputs(cfg, args.lam)
    if not isinstance(diss, ConstantDissipation):
        raise SystemExit2("manifolds requires constant dissipation")
    orbits = find_two_periodic(curve, int(cfg.get("grids", {}).get("orbit_seeds", 48)))
    saddles = [o for o in orbits if o.length_critical_type != "degenerate"
               and classify_two_periodic(o, diss.value).orbit_type == "Saddle"]
    if not saddles:
        raise SystemExit2("no saddle 2-periodic orbit found; nothing to grow")
    sd = saddles[0]
    budget = cfg.get("budgets", {})
    arclen = float(budget.get("arclength", 10.0))
    maxpts = int(budget.get("max_points", 100_000))

    out = _outdir(cfg)
    P = curve.perimeter
    u1, u2 = grow_unstable(curve, diss, sd, arclen, maxpts)
    s1, s2 = grow_stable(curve, diss, sd, arclen, maxpts)
    for br, name in ((u1, "unstable_plus"), (u2, "unstable_minus"),
                     (s1, "stable_plus"), (s2, "stable_minus")):
        write_csv(out / f"branch_{name}.csv", cfg, ["index", "s_over_P", "r"],
                  [(k, p[0] / P, p[1]) for k, p in enumerate(br.polyline)],
                  reproducible=args.reproducible)
    cert = homoclinic_intersections([s1, s2], [u1, u2], curve=curve)
    write_json(out / "horseshoe_certificate.json", cfg, {
        "passes": cert.passes,
        "pairs_with_crossing": cert.pairs_with_crossing,
        "min_angle": cert.min_angle if cert.crossings else None,
        "tangential": cert.tangential_count,
        "crossings": [
            {"s_over_P": c.point[0], "r": c.point[1], "angle": c.angle}
            for c in cert.crossings[:512]
        ],
        "sinks_reached": [u1.arrived_sink, u2.arrived_sink],
    }, reproducible=args.reproducible)
    print(f"4 branches written; homoclinic certificate passes={cert.passes} "
          f"({len(cert.crossings)} crossings)")
    # budget-truncated growth still counts as success (partial data written);
    # a branch that failed to grow at all is a numerical failure
    degenerate = any(len(b.polyline) < 10 for b in (u1, u2, s1, s2))
    return EXIT_NONCONVERGED if degenerate else EXIT_OK


def cmd_twist(cfg, args):
    from .dynamics import twist_certificate
    from .exports import write_json

    curve, diss = _build_inputs(cfg, args.lam)
    cert = twist_certificate(curve, diss)
    write_json(_outdir(cfg) / "twist_certificate.json", cfg, {
        "passes": cert.passes, "beta": cert.beta,
        "min_upper_right_entry": cert.min_upper_right_entry,
        "max_abs_tilt_term": cert.max_abs_tilt_term,
        "proof_bound": cert.proof_bound, "grid": list(cert.grid),
    }, reproducible=args.reproducible)
    print(f"twist certificate: passes={cert.passes} beta={cert.beta:.5f}")
    return EXIT_OK if cert.passes else EXIT_NONCONVERGED


def cmd_cones(cfg, args):
    from .attractor import build_cone_field, cone_contraction_check
    from .dynamics import ConstantDissipation
    from .exports import write_json

    curve, diss = _build_inputs(cfg, args.lam)
    if not isinstance(diss, ConstantDissipation):
        raise SystemExit2("cone check requires constant dissipation")
    try:
        cone = build_cone_field(curve)
    except ValueError as exc:
        raise SystemExit2(str(exc))
    rep = cone_contraction_check(curve, diss, cone)
    write_json(_outdir(cfg) / "cone_report.json", cfg, {
        "passes": rep.passes, "min_margin": rep.min_margin,
        "n_failures": rep.n_failures, "lambda": rep.lam,
        "lambda_max_certified": cone.lambda_max_certified,
        "alpha0": cone.alpha0, "c0": cone.c0, "delta0": cone.delta0,
        "K0": cone.K0, "mu0": cone.mu0,
    }, reproducible=args.reproducible)
    print(f"cone check at lambda={rep.lam:g}: passes={rep.passes} "
          f"(certified bound {cone.lambda_max_certified:.5f})")
    return EXIT_OK if rep.passes else EXIT_NONCONVERGED


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="billiard-lab",
        description="dissipative billiard attractors, orbit classification, "
                    "invariant manifolds, and rotation numbers",
    )
    parser.add_argument("command",
                        choices=["classify", "attract", "sweep", "manifolds",
                                 "twist", "cones"])
    parser.add_argument("--config", required=True, help="JSON run config")
    parser.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="override the dissipation constant")
    parser.add_argument("--threads", type=int, default=0,
                        help="worker threads (0 = all cores)")
    parser.add_argument("--reproducible", action="store_true",
                        help="suppress timestamps for byte-identical outputs")
    args = parser.parse_args(argv)

    try:
        cfg = _load_config(args.config)
        if args.lam is not None and not (0.0 < args.lam < 1.0):
            raise SystemExit2("--lambda must lie in (0, 1)")
        handler = {
            "classify": cmd_classify, "attract": cmd_attract, "sweep": cmd_sweep,
            "manifolds": cmd_manifolds, "twist": cmd_twist, "cones": cmd_cones,
        }[args.command]
        return handler(cfg, args)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
