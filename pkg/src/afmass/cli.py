"""Command-line surface.

Subcommands:
  mass <config>        ADM mass extrapolation against the closed-form mass
  solve <config>       harmonic solves; writes fields, reports residuals
  region <config>      full per-member pipeline; writes row and artifacts
  sweep <configs...>   multi-member sweep with CSV, fits, and SVG plots
  report <dir>         summarize a sweep directory

Exit codes: 0 success, 1 configuration/validation failure, 2 pipeline failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from afmass.config import parse_config
from afmass.conformal import MetricGrid, adm_mass_extrapolated
from afmass.corpus import member_factor, standard_corpus
from afmass.elliptic import solve_harmonic_triple
from afmass.fields_io import save_field
from afmass.pipeline import csv_header, csv_row, run_pipeline, sweep


def _load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return None
    cfg, errors = parse_config(text)
    if errors:
        for e in errors:
            print(f"{path}: {e}", file=sys.stderr)
        return None
    return cfg


def _cmd_mass(args):
    cfg = _load_config(args.config)
    if cfg is None:
        return 1
    try:
        factor = member_factor(cfg)
        radii = np.linspace(cfg.L_box / 2.0, cfg.L_box - 1.0, 6)
        m_adm = adm_mass_extrapolated(factor, radii, L_box=cfg.L_box)
    except Exception as exc:  # noqa: BLE001
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return 2
    print(f"m_exact = {factor.m_exact!r}")
    print(f"m_adm   = {m_adm!r}")
    if factor.m_exact > 0:
        print(f"rel_err = {abs(m_adm - factor.m_exact) / factor.m_exact!r}")
    return 0


def _cmd_solve(args):
    cfg = _load_config(args.config)
    if cfg is None:
        return 1
    try:
        grid = MetricGrid(member_factor(cfg), h=cfg.h, L_box=cfg.L_box)
        triple = solve_harmonic_triple(grid, tol=cfg.solver_tol)
        os.makedirs(args.out, exist_ok=True)
        for j in (1, 2, 3):
            save_field(os.path.join(args.out, f"{cfg.name}-u{j}.field"),
                       triple.u[j - 1], f"u{j}", cfg.h, cfg.L_box)
    except Exception as exc:  # noqa: BLE001
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return 2
    for j, r in enumerate(triple.residual_norm, start=1):
        print(f"u{j}: relative residual {r!r}")
    return 0


def _cmd_region(args):
    cfg = _load_config(args.config)
    if cfg is None:
        return 1
    result = run_pipeline(cfg, args.out, save_artifacts=True)
    row = result.row
    print(csv_header())
    print(csv_row(row))
    if row.status != "ok":
        print(f"pipeline failure: {row.fail_reason}", file=sys.stderr)
        return 2
    return 0


def _cmd_sweep(args):
    if args.standard:
        configs = standard_corpus()
    else:
        if not args.configs:
            print("sweep needs config files or --standard", file=sys.stderr)
            return 1
        configs = []
        for path in args.configs:
            cfg = _load_config(path)
            if cfg is None:
                return 1
            configs.append(cfg)
    report = sweep(configs, args.out, save_artifacts=not args.no_artifacts)
    print(f"wrote {report.csv_path}")
    for p in report.plot_paths:
        print(f"wrote {p}")
    print(f"area fit: {report.area_fit}")
    for k, v in report.verdicts.items():
        print(f"{k}: {v}")
    if any(r.status != "ok" for r in report.rows):
        for r in report.rows:
            if r.status != "ok":
                print(f"{r.name}: {r.fail_reason}", file=sys.stderr)
        return 2
    return 0


def _cmd_report(args):
    path = os.path.join(args.dir, "sweep.csv")
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return 1
    if not lines:
        print(f"{path}: empty", file=sys.stderr)
        return 1
    header = lines[0].split(",")
    keep = ["name[-]", "m_exact[length]", "m_adm[length]", "slack_min[length]",
            "boundary_area[length^2]", "coverage_defect[length^3]",
            "weak_integrand[length^3]", "status[-]"]
    idx = [header.index(k) for k in keep if k in header]
    print("  ".join(header[i] for i in idx))
    for line in lines[1:]:
        cells = line.split(",")
        print("  ".join(cells[i] for i in idx))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="afmass", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("mass", help="ADM mass extrapolation")
    p.add_argument("config")
    p.set_defaults(fn=_cmd_mass)
    p = sub.add_parser("solve", help="harmonic coordinate solves")
    p.add_argument("config")
    p.add_argument("--out", default="out")
    p.set_defaults(fn=_cmd_solve)
    p = sub.add_parser("region", help="full single-member pipeline")
    p.add_argument("config")
    p.add_argument("--out", default="out")
    p.set_defaults(fn=_cmd_region)
    p = sub.add_parser("sweep", help="multi-member sweep")
    p.add_argument("configs", nargs="*")
    p.add_argument("--standard", action="store_true",
                   help="run the built-in corpus")
    p.add_argument("--out", default="out")
    p.add_argument("--no-artifacts", action="store_true")
    p.set_defaults(fn=_cmd_sweep)
    p = sub.add_parser("report", help="summarize a sweep directory")
    p.add_argument("dir")
    p.set_defaults(fn=_cmd_report)
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
