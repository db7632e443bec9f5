"""Per-member pipeline and the mass-sweep driver.

``run_pipeline`` takes one run configuration through the full chain: metric
grid, ADM mass extrapolation, harmonic solves, mass lower bound, defect
thresholds and regular region, cylinder/coverage/injectivity measurements,
and geodesic diagnostics.  ``sweep`` drives a member list, fits the area and
monotonicity trends, and emits CSV plus SVG artifacts.  Rows are deterministic
for a fixed config (sampling uses the config seed).
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field, fields

import numpy as np

from afmass import geodesic as ge
from afmass import region as rg
from afmass.config import RunConfig, serialize
from afmass.conformal import MetricGrid, adm_mass_extrapolated
from afmass.corpus import member_factor
from afmass.elliptic import solve_harmonic_triple
from afmass.fields_io import save_field, save_stl
from afmass.mass import mass_report
from afmass.plots import line_plot


@dataclass
class MemberRow:
    name: str = ""
    m_exact: float = np.nan          # mass [length]
    m_adm: float = np.nan            # mass [length]
    bkks_1: float = np.nan           # mass [length]
    bkks_2: float = np.nan
    bkks_3: float = np.nan
    slack_min: float = np.nan        # m_adm - max_j bkks_j [length]
    tau: float = np.nan              # defect threshold [1]
    tau2: float = np.nan             # selected level [1]
    cert_ok: bool = False            # co-area certificate
    seed_ok: bool = False            # outer shell inside the region
    boundary_area: float = np.nan    # metric area [length^2]
    cylinder_ratio: float = np.nan   # Vol/(2 pi L^3) [1]
    coverage_defect: float = np.nan  # uncovered ball volume [length^3]
    weak_integrand: float = np.nan   # int |chi sqrt(det g) - 1| [length^3]
    injectivity_min: float = np.nan  # min image separation ratio [1]
    chart_disc_max: float = np.nan   # max ||U(y)-U(z)| - d|/d [1]
    bg_slack: float = np.nan         # max relative ratio uptick [1]
    sup_hess: float = np.nan         # far-region sup |Hess u|_g [1/length]
    sup_defect: float = np.nan       # far-region sup Gram deviation [1]
    decay_exponent: object = None    # fitted gradient-decay slope or "exact"
    runtime_s: float = np.nan        # wall time [s]
    status: str = "ok"
    fail_reason: str = ""


CSV_UNITS = {
    "name": "-", "m_exact": "length", "m_adm": "length", "bkks_1": "length",
    "bkks_2": "length", "bkks_3": "length", "slack_min": "length",
    "tau": "1", "tau2": "1", "cert_ok": "bool", "seed_ok": "bool",
    "boundary_area": "length^2", "cylinder_ratio": "1",
    "coverage_defect": "length^3", "weak_integrand": "length^3",
    "injectivity_min": "1", "chart_disc_max": "1", "bg_slack": "1",
    "sup_hess": "1/length", "sup_defect": "1", "decay_exponent": "1",
    "runtime_s": "s", "status": "-", "fail_reason": "-",
}


def csv_header() -> str:
    return ",".join(f"{f.name}[{CSV_UNITS[f.name]}]" for f in fields(MemberRow))


def csv_row(row: MemberRow) -> str:
    cells = []
    for f in fields(MemberRow):
        v = getattr(row, f.name)
        if isinstance(v, bool):
            cells.append("true" if v else "false")
        elif isinstance(v, float):
            cells.append(repr(v))
        elif v is None:
            cells.append("")
        else:
            cells.append(str(v))
    return ",".join(cells)


def resolve_tau(cfg: RunConfig, m_exact: float) -> float:
    if cfg.tau_mode == "fixed":
        return cfg.tau0
    if m_exact <= 0.0:
        raise ValueError("power-law tau needs a positive mass")
    tau = m_exact ** cfg.epsilon
    if tau >= 0.25:
        raise ValueError(f"m^epsilon = {tau:.4f} is not below 1/4; "
                         "power-law mode invalid at this mass")
    return tau


@dataclass
class PipelineResult:
    row: MemberRow
    grid: object = None
    triple: object = None
    region: object = None
    certificate: object = None
    defect: object = None
    bg: object = None
    chart: object = None


def run_pipeline(cfg: RunConfig, out_dir: str | None = None,
                 save_artifacts: bool = True) -> PipelineResult:
    """Run one corpus member; returns the report row plus live objects.

    Any exception marks the row failed with the reason recorded; the caller
    (sweep) continues with the next member.
    """
    t0 = time.time()
    row = MemberRow(name=cfg.name)
    result = PipelineResult(row=row)
    try:
        _run_member(cfg, row, result, out_dir if save_artifacts else None)
    except Exception as exc:  # noqa: BLE001 - sweep must continue past any member failure
        row.status = "failed"
        row.fail_reason = f"{type(exc).__name__}: {exc}"
    row.runtime_s = time.time() - t0
    return result


def _run_member(cfg: RunConfig, row: MemberRow, result: PipelineResult,
                out_dir: str | None):
    factor = member_factor(cfg)
    row.m_exact = factor.m_exact
    grid = MetricGrid(factor, h=cfg.h, L_box=cfg.L_box)
    result.grid = grid
    adm_radii = np.linspace(cfg.L_box / 2.0, cfg.L_box - 1.0, 6)
    row.m_adm = adm_mass_extrapolated(factor, adm_radii, L_box=cfg.L_box)

    triple = solve_harmonic_triple(grid, tol=cfg.solver_tol)
    result.triple = triple
    report = mass_report(triple, row.m_adm, r0=cfg.r0)
    row.bkks_1, row.bkks_2, row.bkks_3 = report.bkks_bound
    row.slack_min = min(report.slack)
    row.sup_hess = report.sup_hess
    row.sup_defect = report.sup_defect
    row.decay_exponent = report.decay_exponent

    tau = resolve_tau(cfg, row.m_exact)
    row.tau = tau
    defect = rg.defect_field(triple)
    result.defect = defect
    tau1 = rg.select_tau1(defect.per_j_gradsq, tau)
    cert = rg.select_tau2(defect, tau1, grid, r0=cfg.r0)
    result.certificate = cert
    row.tau2 = cert.tau2
    row.cert_ok = cert.holds
    region = rg.extract_region(defect, cert.tau2, grid, r0=cfg.r0,
                               tau=tau, tau1=tau1)
    result.region = region
    row.seed_ok = region.seed_ok
    row.boundary_area = region.area_g

    rng = np.random.default_rng(cfg.seed)
    if cfg.run_cylinder:
        _, row.cylinder_ratio = rg.cylinder_volume(
            region, grid, triple, cfg.cylinder_direction, cfg.cylinder_L)
    if cfg.run_coverage:
        raster = rg.rasterize_image(region, triple, cfg.coverage_D,
                                    cfg.coverage_voxel)
        row.coverage_defect = raster.uncovered_volume
        row.weak_integrand = raster.weak_volume_integrand
    if cfg.run_injectivity:
        row.injectivity_min, _ = rg.injectivity_probe(region, triple, rng=rng)
    if cfg.run_geodesic:
        c = (grid.dims[0] - 1) // 2
        center_field = ge.fast_marching(grid, (c, c, c))
        bg = ge.bishop_gromov_check(center_field, grid, cfg.bg_Lambda,
                                    cfg.bg_radii)
        result.bg = bg
        row.bg_slack = bg.monotone_slack
        sources = _chart_sources(region, grid)
        dfields = [center_field if s == (c, c, c) else ge.fast_marching(grid, s)
                   for s in sources]
        chart = ge.chart_distance_comparison(region, triple, dfields, rng=rng)
        result.chart = chart
        row.chart_disc_max = chart.max_normalized

    if out_dir is not None:
        d = os.path.join(out_dir, cfg.name)
        os.makedirs(d, exist_ok=True)
        with open(os.path.join(d, "config.txt"), "w") as fh:
            fh.write(serialize(cfg))
        for j in (1, 2, 3):
            save_field(os.path.join(d, f"u{j}.field"), triple.u[j - 1],
                       f"u{j}", cfg.h, cfg.L_box)
        save_field(os.path.join(d, "Q.field"), defect.Q, "Q", cfg.h, cfg.L_box)
        save_field(os.path.join(d, "mask.field"), region.mask, "mask",
                   cfg.h, cfg.L_box)
        save_stl(os.path.join(d, "boundary.stl"), region.boundary_verts,
                 region.boundary_faces, name="regular-region-boundary")


def _chart_sources(region, grid, n_sources: int = 2):
    """Deterministic distance-field sources deep inside the region mask."""
    from scipy import ndimage
    deep = ndimage.binary_erosion(region.mask, iterations=2) & grid.interior(2)
    idx = np.array(np.nonzero(deep)).T
    if len(idx) == 0:
        return []
    c = (grid.dims[0] - 1) // 2
    targets = [np.array([grid.L_box / 2.0, 0.0, 0.0]),
               np.array([-grid.L_box / 2.0, 0.0, 0.0])][:n_sources]
    out = []
    pts = np.stack([grid.axis[idx[:, 0]], grid.axis[idx[:, 1]],
                    grid.axis[idx[:, 2]]], axis=1)
    for t in targets:
        k = int(np.argmin(np.linalg.norm(pts - t, axis=1)))
        s = tuple(int(v) for v in idx[k])
        if s not in out and all(2 <= v <= grid.dims[0] - 3 for v in s):
            out.append(s)
    return out


# -- sweep -------------------------------------------------------------------


@dataclass
class SweepReport:
    rows: list
    area_fit: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    csv_path: str = ""
    plot_paths: list = field(default_factory=list)


def _monotone_verdict(values) -> str:
    vals = [v for v in values if np.isfinite(v)]
    if len(vals) < 2:
        return "insufficient-data"
    diffs = np.diff(vals)
    if np.all(diffs < 0):
        return "strictly-decreasing"
    if np.all(diffs <= 0):
        return "nonincreasing"
    return "not-monotone"


def fit_area_law(masses, areas):
    """Log-log fit of boundary area against mass over positive entries.

    Returns a dict with slope, intercept, stderr, implied-constant spread
    C = area/m^{1/2}, and the member count used.  All-zero areas report the
    degenerate case as "exact-zero".
    """
    m = np.asarray(masses, dtype=float)
    a = np.asarray(areas, dtype=float)
    keep = np.isfinite(m) & np.isfinite(a) & (m > 0) & (a > 0)
    if not np.any(keep):
        return {"kind": "exact-zero", "n_members": 0}
    m, a = m[keep], a[keep]
    if len(m) < 2:
        return {"kind": "single-point", "n_members": 1,
                "constant_ratio": 1.0, "slope": np.nan}
    lx, ly = np.log10(m), np.log10(a)
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    resid = ly - A @ coef
    dof = max(len(m) - 2, 1)
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    stderr = float(np.sqrt(np.sum(resid**2) / dof / max(sxx, 1e-300)))
    C = a / np.sqrt(m)
    return {"kind": "fit", "slope": slope, "intercept": intercept,
            "stderr": stderr, "band": (slope - 2 * stderr, slope + 2 * stderr),
            "constant_ratio": float(np.max(C) / np.min(C)),
            "n_members": int(len(m))}


def sweep(configs, out_dir: str, save_artifacts: bool = True) -> SweepReport:
    """Run every member, write the CSV and trend plots, fit the area law."""
    os.makedirs(out_dir, exist_ok=True)
    # keep only the scalar rows: the live field objects of a member are
    # several hundred MB and must be released before the next one runs
    rows = [run_pipeline(cfg, out_dir, save_artifacts).row for cfg in configs]
    order = np.argsort([-(row.m_exact if np.isfinite(row.m_exact) else -np.inf)
                        for row in rows], kind="stable")
    rows = [rows[i] for i in order]

    csv_path = os.path.join(out_dir, "sweep.csv")
    with open(csv_path, "w") as fh:
        fh.write(csv_header() + "\n")
        for row in rows:
            fh.write(csv_row(row) + "\n")

    report = SweepReport(rows=rows, csv_path=csv_path)
    ok = [r for r in rows if r.status == "ok"]
    nonflat = [r for r in ok if r.m_exact > 1e-14]
    # trends are per family (name prefix before the mass suffix); the two
    # families interleave in the mass ordering and must not be mixed
    families: dict = {}
    for r in nonflat:
        families.setdefault(r.name.rsplit("-", 1)[0], []).append(r)
    for fam, rs in families.items():
        if len(rs) >= 4:
            report.area_fit[fam] = fit_area_law([r.m_exact for r in rs],
                                                [r.boundary_area for r in rs])
        else:
            report.area_fit[fam] = {"kind": "skipped", "n_members": len(rs)}
        for col in ("coverage_defect", "weak_integrand", "chart_disc_max"):
            report.verdicts[f"{fam}.{col}"] = _monotone_verdict(
                [getattr(r, col) for r in rs])

    masses = [r.m_exact for r in nonflat]
    fit_line = None
    for fit in report.area_fit.values():
        if fit.get("kind") == "fit":
            fit_line = (fit["slope"], fit["intercept"])
            break
    specs = [
        ("area-vs-mass.svg", [r.boundary_area for r in nonflat],
         "boundary area", True, fit_line),
        ("slack-vs-mass.svg", [r.slack_min for r in nonflat],
         "mass-bound slack", True, None),
        ("integrand-vs-mass.svg", [r.weak_integrand for r in nonflat],
         "weak-volume integrand", True, None),
    ]
    for fname, ys, label, loglog, fl in specs:
        p = os.path.join(out_dir, fname)
        line_plot(p, masses, ys, title=label + " vs mass", xlabel="m_exact",
                  ylabel=label, loglog=loglog, series_label=label, fit_line=fl)
        report.plot_paths.append(p)
    return report
