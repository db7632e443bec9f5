"""Metric family: conformal factor, curvature, ADM integrals, decay checks."""

import numpy as np
import pytest

from afmass.conformal import (
    AFParams,
    MetricGrid,
    adm_mass_boundary_integral,
    adm_mass_extrapolated,
    build_conformal_factor,
    check_af_decay,
    ricci_eigenvalues,
    ricci_lower_bound,
)

RNG = np.random.default_rng(7)


def fd_gradient(f, x, eps=1e-6):
    g = np.zeros(3)
    for a in range(3):
        e = np.zeros(3)
        e[a] = eps
        g[a] = (f(x + e) - f(x - e)) / (2 * eps)
    return g


class TestFactor:
    def test_flat_is_identity(self):
        f = build_conformal_factor(0.0, 0.5, [])
        pts = RNG.normal(size=(40, 3)) * 3
        assert np.allclose(f.phi(pts), 1.0)
        assert np.allclose(f.grad_phi(pts), 0.0)
        assert f.m_exact == 0.0

    def test_mass_closed_form(self):
        f = build_conformal_factor(0.2, 0.5, [((1, 0, 0), 0.01, 0.6)])
        expected = 0.2 + 2 * 0.01 * np.pi**1.5 * 0.6**3
        assert f.m_exact == pytest.approx(expected, rel=1e-14)

    def test_gradient_matches_finite_differences(self):
        f = build_conformal_factor(0.3, 0.5, [((1.0, -0.4, 0.2), 0.02, 0.7)])
        for x in RNG.normal(size=(10, 3)) * 2:
            g = f.grad_phi(x)
            g_fd = fd_gradient(lambda p: float(f.phi(p)), x)
            assert np.allclose(g, g_fd, atol=1e-6)

    def test_hessian_trace_is_laplacian(self):
        f = build_conformal_factor(0.3, 0.5, [((0.5, 0.5, -0.5), 0.02, 0.7)])
        pts = RNG.normal(size=(25, 3)) * 2
        H = f.hess_phi(pts)
        tr = np.einsum("...aa->...", H)
        assert np.allclose(tr, f.laplace_phi(pts), rtol=1e-9, atol=1e-12)

    def test_superharmonic_hence_nonnegative_curvature(self):
        f = build_conformal_factor(0.25, 0.5, [((1, 1, 0), 0.03, 0.6)])
        pts = RNG.normal(size=(200, 3)) * 4
        assert np.all(f.laplace_phi(pts) <= 0)
        assert np.all(f.scalar_curvature(pts) >= 0)

    def test_bump_series_smooth_through_center(self):
        # the erf-ratio switches to a series near the bump center; values on
        # a line through the center must be smooth (no jump at the cutoff)
        f = build_conformal_factor(0.0, 0.5, [((0, 0, 0), 0.05, 0.5)])
        t = np.linspace(-1e-2, 1e-2, 2001)
        pts = np.stack([t, 0 * t, 0 * t], axis=-1)
        vals = f.phi(pts)
        d2 = np.diff(vals, 2)
        assert np.max(np.abs(d2)) < 1e-8


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            AFParams(sigma=0.5, A=1.0, B=1.0)
        with pytest.raises(ValueError):
            AFParams(sigma=1.0, A=-1.0, B=1.0)

    def test_decay_passes_for_sigma_one(self):
        f = build_conformal_factor(0.2, 0.5, [])
        p = AFParams(sigma=1.0, A=2.0, B=2.0)
        ok, ratios = check_af_decay(f, p, [8.0, 16.0, 32.0, 64.0])
        assert ok

    def test_decay_fails_for_overclaimed_sigma(self):
        f = build_conformal_factor(0.2, 0.5, [])
        p = AFParams(sigma=1.5, A=2.0, B=0.5)
        ok, ratios = check_af_decay(f, p, [32.0, 128.0, 512.0, 2048.0])
        assert not ok


class TestGrid:
    def test_dims_and_fields(self):
        f = build_conformal_factor(0.1, 0.5, [])
        g = MetricGrid(f, h=0.5, L_box=6.0)
        assert g.dims == (25, 25, 25)
        assert np.all(g.phi >= 1.0)
        assert np.all(g.R >= 0.0)
        assert np.allclose(g.sqrt_g, g.phi**6)

    def test_interior_collar(self):
        f = build_conformal_factor(0.0, 0.5, [])
        g = MetricGrid(f, h=0.5, L_box=6.0)
        inner = g.interior(2)
        assert not inner[0].any() and not inner[1].any()
        assert inner[2:-2, 2:-2, 2:-2].all()


class TestAdmMass:
    def test_schwarzschild_within_two_percent(self):
        f = build_conformal_factor(0.2, 0.5, [])
        radii = np.linspace(6.0, 11.0, 6)
        m = adm_mass_extrapolated(f, radii, L_box=12.0)
        assert m == pytest.approx(0.2, rel=0.02)

    def test_bump_member_within_two_percent(self):
        f = build_conformal_factor(0.1, 0.5, [((1.2, 0.3, -0.4), 0.008, 0.6)])
        radii = np.linspace(6.0, 11.0, 6)
        m = adm_mass_extrapolated(f, radii, L_box=12.0)
        assert m == pytest.approx(f.m_exact, rel=0.02)

    def test_flat_is_zero(self):
        f = build_conformal_factor(0.0, 0.5, [])
        m = adm_mass_boundary_integral(f, 8.0, L_box=12.0)
        assert abs(m) < 1e-14

    def test_radius_validation(self):
        f = build_conformal_factor(0.1, 0.5, [])
        with pytest.raises(ValueError):
            adm_mass_boundary_integral(f, 15.0, L_box=12.0)


class TestRicci:
    def test_flat_bound_is_zero(self):
        f = build_conformal_factor(0.0, 0.5, [])
        assert ricci_lower_bound(f, 6.0, 13) == 0.0

    def test_eigenvalues_real_and_symmetric_pointwise(self):
        f = build_conformal_factor(0.2, 0.5, [((0.5, 0, 0), 0.02, 0.6)])
        ev = ricci_eigenvalues(f, RNG.normal(size=(20, 3)) * 2)
        assert np.all(np.isfinite(ev))

    def test_lower_bound_nonnegative(self):
        f = build_conformal_factor(0.2, 0.5, [])
        lam = ricci_lower_bound(f, 6.0, 13)
        assert lam >= 0.0
