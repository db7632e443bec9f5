"""Acceptance gate: one test per numbered criterion at the reference scale.

Reference scale: h = 0.25, L_box = 12 (97^3 nodes).  The session fixture runs
every standard-corpus member once, keeping only the scalar report rows (live
field objects of a member are several hundred MB and are released before the
next member runs).  Each test prints a single "criterion N: PASS/FAIL" line
and then asserts every clause of that criterion.
"""

import gc

import numpy as np
import pytest

from afmass.conformal import MetricGrid, build_conformal_factor
from afmass.corpus import MASS_LADDER, standard_corpus
from afmass.elliptic import radial_ode_oracle, solve_harmonic
from afmass.pipeline import fit_area_law, run_pipeline

H_REF = 0.25
L_REF = 12.0
BALL_D = 6.0
BALL_VOLUME = 4.0 / 3.0 * np.pi * BALL_D**3


def _verdict(n, label, clauses):
    """Print one pass/fail line for criterion ``n`` and assert its clauses.

    ``clauses`` is a list of (ok, description) pairs.
    """
    ok = all(c for c, _ in clauses)
    detail = "; ".join(d for _, d in clauses)
    print(f"criterion {n} ({label}): {'PASS' if ok else 'FAIL'} -- {detail}")
    failed = [d for c, d in clauses if not c]
    assert ok, f"criterion {n} failed: {'; '.join(failed)}"


@pytest.fixture(scope="session")
def corpus_rows():
    """Report rows for every standard-corpus member, plus the flat member's
    Bishop-Gromov ratio sequence (needed beyond its scalar slack)."""
    rows = {}
    flat_extras = {}
    for cfg in standard_corpus():
        result = run_pipeline(cfg, save_artifacts=False)
        rows[cfg.name] = result.row
        if cfg.name == "flat":
            if result.bg is not None:
                flat_extras["bg_ratios"] = np.array(result.bg.ratios)
            if result.triple is not None:
                u, x = result.triple.u, result.grid.coords
                flat_extras["chart_err"] = float(
                    max(np.max(np.abs(u[j] - x[..., j])) for j in range(3)))
            if result.defect is not None:
                flat_extras["sup_Q"] = float(np.max(result.defect.Q))
        del result
        gc.collect()
    return rows, flat_extras


def _bump_rows(rows):
    return [rows[f"bump-{m}"] for m in MASS_LADDER]


def test_criterion_01_flat_baseline(corpus_rows):
    rows, extras = corpus_rows
    r = rows["flat"]
    _verdict(1, "flat baseline", [
        (r.status == "ok", f"status {r.status}"),
        (abs(r.m_adm) < 1e-8, f"|m_adm| = {abs(r.m_adm):.3e}"),
        (extras["chart_err"] < 1e-10, f"max|u - x| = {extras['chart_err']:.3e}"),
        (extras["sup_Q"] < 1e-16, f"sup Q = {extras['sup_Q']:.3e}"),
        (r.boundary_area == 0.0, f"boundary area {r.boundary_area}"),
        (abs(r.cylinder_ratio - 1.0) <= 0.02,
         f"cylinder ratio {r.cylinder_ratio:.4f}"),
        (r.coverage_defect < 1e-6 * BALL_VOLUME,
         f"coverage defect {r.coverage_defect:.3e}"),
    ])


def test_criterion_02_adm_oracle(corpus_rows):
    rows, _ = corpus_rows
    schw, bump = rows["schw-0.2"], rows["bump-0.2"]
    _verdict(2, "mass extrapolation oracle", [
        (abs(schw.m_adm - 0.2) <= 0.02 * 0.2,
         f"schw m_adm {schw.m_adm:.6f} vs 0.2"),
        (abs(bump.m_adm - bump.m_exact) <= 0.02 * bump.m_exact,
         f"bump m_adm {bump.m_adm:.6f} vs {bump.m_exact:.6f}"),
    ])


def test_criterion_03_solver_oracle():
    # free-space oracle Dirichlet data isolates the interior discretization
    # error from box truncation; the smoother s_reg = 1 core puts the three
    # resolutions inside the asymptotic second-order regime
    def solve_err(m, s, h):
        grid = MetricGrid(build_conformal_factor(m, s, []), h=h, L_box=6.0)
        _, _, interp = radial_ode_oracle(m, s, 2.0 * grid.L_box)
        exact = interp(grid.radius.ravel()).reshape(grid.dims) \
            * grid.coords[..., 0]
        u, _ = solve_harmonic(grid, 1, boundary=exact)
        return float(np.max(np.abs(u - exact)) / np.max(np.abs(exact)))

    err_ref = solve_err(0.2, 0.5, H_REF)
    errs = [solve_err(0.2, 1.0, h) for h in (0.5, 0.25, 0.125)]
    order = float(np.log2(errs[1] / errs[2]))
    _verdict(3, "elliptic solver oracle", [
        (err_ref <= 5e-3, f"relative Linf error {err_ref:.3e} at h=0.25"),
        (order >= 1.9, f"observed order {order:.3f} over h in (0.5,0.25,0.125) "
                       f"errors {['%.3e' % e for e in errs]}"),
    ])


def test_criterion_04_mass_inequality(corpus_rows):
    rows, _ = corpus_rows
    clauses = []
    for name, r in rows.items():
        bounds = (r.bkks_1, r.bkks_2, r.bkks_3)
        clauses.append((all(r.m_adm - b >= -1e-4 for b in bounds),
                        f"{name} slack {r.slack_min:.3e}"))
        if r.m_exact > 0:
            clauses.append((min(bounds) > 0.0,
                            f"{name} bound positive {min(bounds):.3e}"))
    _verdict(4, "harmonic-coordinate mass bound", clauses)


def test_criterion_05_coarea_certificate(corpus_rows):
    rows, _ = corpus_rows
    _verdict(5, "level-selection certificate",
             [(r.cert_ok, f"{name} cert {r.cert_ok}")
              for name, r in rows.items()])


def test_criterion_06_area_law(corpus_rows):
    rows, _ = corpus_rows
    bump = _bump_rows(rows)
    fit = fit_area_law([r.m_exact for r in bump],
                       [r.boundary_area for r in bump])
    # the measured boundary area scales like m^2 (the defect field decays as
    # m^2/r^2 in the far field), so the sqrt-mass implied constant spreads
    # far beyond 10x across a 16x mass ladder; the slope clause holds, the
    # constant clause fails structurally at any resolution
    _verdict(6, "boundary-area trend", [
        (fit["kind"] == "fit", f"fit kind {fit['kind']}"),
        (fit.get("slope", 0.0) >= 0.4, f"slope {fit.get('slope'):.3f}"),
        (fit.get("constant_ratio", np.inf) <= 10.0,
         f"area/sqrt(m) spread {fit.get('constant_ratio'):.1f}x"),
    ])


def test_criterion_07_weak_volume_trend(corpus_rows):
    rows, _ = corpus_rows
    bump = _bump_rows(rows)
    coverage = [r.coverage_defect for r in bump]
    integrand = [r.weak_integrand for r in bump]
    smallest = bump[-1]
    band = 4 * smallest.tau + 0.05
    _verdict(7, "weak volume convergence", [
        (all(b < a for a, b in zip(coverage, coverage[1:])),
         f"coverage defects {['%.3g' % c for c in coverage]}"),
        (all(b < a for a, b in zip(integrand, integrand[1:])),
         f"weak integrands {['%.3g' % c for c in integrand]}"),
        (smallest.weak_integrand <= 0.05 * BALL_VOLUME,
         f"smallest-mass integrand {smallest.weak_integrand:.2f} vs "
         f"5% of |B| = {0.05 * BALL_VOLUME:.2f}"),
        (abs(smallest.cylinder_ratio - 1.0) <= band,
         f"cylinder ratio {smallest.cylinder_ratio:.4f} within 1±{band:.2f}"),
    ])


def test_criterion_08_chart_distance(corpus_rows):
    rows, _ = corpus_rows
    bump = _bump_rows(rows)
    # calibrate the fast-marching constant on the flat member, where the
    # chart is exact and the whole discrepancy is scheme error
    c_fm = rows["flat"].chart_disc_max / H_REF
    bound = 4 * bump[0].tau + c_fm * H_REF
    discs = [r.chart_disc_max for r in bump]
    _verdict(8, "chart-distance comparison", [
        (all(d <= bound for d in discs),
         f"max discrepancy {max(discs):.4f} vs bound {bound:.4f}"),
        (all(b < a for a, b in zip(discs, discs[1:])),
         f"discrepancies {['%.4f' % d for d in discs]}"),
    ])


def test_criterion_09_volume_ratio_monotonicity(corpus_rows):
    rows, extras = corpus_rows
    flat_bg = extras["bg_ratios"]
    clauses = [(r.bg_slack <= 0.01, f"{name} slack {r.bg_slack:.3e}")
               for name, r in rows.items()]
    clauses.append((np.max(np.abs(flat_bg - 1.0)) <= 0.02,
                    "flat ratios within 2% of 1 "
                    f"(max dev {np.max(np.abs(flat_bg - 1.0)):.3e})"))
    _verdict(9, "volume-ratio monotonicity", clauses)


def test_criterion_10_far_field_diagnostics(corpus_rows):
    rows, _ = corpus_rows
    bump = _bump_rows(rows)
    hess = [r.sup_hess for r in bump]
    defect = [r.sup_defect for r in bump]
    # implied constants against the scalings used by the sup diagnostics,
    # evaluated over the four-member ladder the scalings are quoted for
    sub = bump[:4]
    c_h = [r.sup_hess / r.m_exact ** (5.0 / 96.0) for r in sub]
    c_d = [r.sup_defect / r.m_exact ** (1.0 / 192.0) for r in sub]
    decays = [r.decay_exponent for name, r in rows.items() if r.m_exact > 0]
    _verdict(10, "far-field sup diagnostics", [
        (all(b < a for a, b in zip(hess, hess[1:])),
         f"sup-Hessian ladder {['%.3g' % v for v in hess]}"),
        (all(b < a for a, b in zip(defect, defect[1:])),
         f"sup-defect ladder {['%.3g' % v for v in defect]}"),
        (max(c_h) / min(c_h) <= 10.0,
         f"Hessian constant spread {max(c_h) / min(c_h):.2f}x"),
        (max(c_d) / min(c_d) <= 10.0,
         f"defect constant spread {max(c_d) / min(c_d):.2f}x"),
        (all(d <= -0.8 for d in decays),
         f"decay exponents max {max(decays):.3f}"),
    ])
