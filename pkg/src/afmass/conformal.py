"""Analytic family of complete asymptotically flat 3-metrics g = phi^4 * delta.

The conformal factor is a regularized point mass plus Gaussian-potential
bumps,

    phi(x) = 1 + m_core / (2 sqrt(|x|^2 + s^2))
               + sum_k a_k pi^{3/2} w_k^3 erf(|x - c_k| / w_k) / |x - c_k|,

so phi, its gradient, Hessian and Laplacian are closed-form, phi is
superharmonic everywhere (Delta phi <= 0) and the scalar curvature
R = -8 phi^{-5} Delta phi is nonnegative.  The exact ADM mass is the
coefficient of 1/(2r) in the expansion of phi, doubled:

    m_exact = m_core + 2 sum_k a_k pi^{3/2} w_k^3.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

_SQRT_PI = np.sqrt(np.pi)

# Below this value of t = rho/w the erf-ratio terms switch to their Taylor
# series; the series is exact to double precision there.
_SERIES_CUTOFF = 1e-3


@dataclass(frozen=True)
class AFParams:
    """Asymptotic flatness parameters: decay |d^k(g - delta)| <= B |x|^(-sigma-k)."""

    A: float
    B: float
    sigma: float

    def __post_init__(self):
        if self.A <= 0 or self.B <= 0:
            raise ValueError("A and B must be positive")
        if self.sigma <= 0.5:
            raise ValueError("sigma must exceed 1/2")


@dataclass(frozen=True)
class Bump:
    """Gaussian-density bump: Newtonian potential of a_k exp(-|x-c|^2/w^2)."""

    center: tuple
    amplitude: float
    width: float


@dataclass(frozen=True)
class ConformalFactor:
    m_core: float
    s_reg: float
    bumps: tuple = ()
    m_exact: float = field(init=False)

    def __post_init__(self):
        if self.m_core < 0:
            raise ValueError("m_core must be nonnegative")
        if self.s_reg <= 0:
            raise ValueError("s_reg must be positive")
        for b in self.bumps:
            if b.amplitude < 0:
                raise ValueError("bump amplitudes must be nonnegative (R >= 0)")
            if b.width <= 0:
                raise ValueError("bump widths must be positive")
        m = self.m_core + 2.0 * sum(
            b.amplitude * np.pi**1.5 * b.width**3 for b in self.bumps
        )
        object.__setattr__(self, "m_exact", float(m))

    # -- pointwise evaluation; x has shape (..., 3) --------------------------

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        out = 1.0 + 0.5 * self.m_core / np.sqrt(r2 + self.s_reg**2)
        for b in self.bumps:
            d = x - np.asarray(b.center)
            rho = np.sqrt(np.sum(d * d, axis=-1))
            out = out + b.amplitude * np.pi**1.5 * b.width**3 * _erf_ratio(rho, b.width)
        return out

    def grad_phi(self, x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        q = (r2 + self.s_reg**2) ** (-1.5)
        out = -0.5 * self.m_core * x * q
        for b in self.bumps:
            d = x - np.asarray(b.center)
            rho = np.sqrt(np.sum(d * d, axis=-1))
            amp = b.amplitude * np.pi**1.5 * b.width**3
            fp_over_rho = _erf_ratio_d1_over_rho(rho, b.width)
            out = out + amp * fp_over_rho[..., None] * d
        return out

    def hess_phi(self, x):
        """Full second-derivative matrix, shape (..., 3, 3)."""
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        q3 = (r2 + self.s_reg**2) ** (-1.5)
        q5 = (r2 + self.s_reg**2) ** (-2.5)
        eye = np.eye(3)
        out = -0.5 * self.m_core * (
            q3[..., None, None] * eye
            - 3.0 * q5[..., None, None] * x[..., :, None] * x[..., None, :]
        )
        for b in self.bumps:
            d = x - np.asarray(b.center)
            rho = np.sqrt(np.sum(d * d, axis=-1))
            amp = b.amplitude * np.pi**1.5 * b.width**3
            fp_over_rho = _erf_ratio_d1_over_rho(rho, b.width)
            fpp = _erf_ratio_d2(rho, b.width)
            nn_scale = np.where(rho > 0, 1.0 / np.maximum(rho, 1e-300) ** 2, 0.0)
            nn = d[..., :, None] * d[..., None, :] * nn_scale[..., None, None]
            out = out + amp * (
                fpp[..., None, None] * nn
                + fp_over_rho[..., None, None] * (eye - nn)
            )
        return out

    def laplace_phi(self, x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        out = -1.5 * self.m_core * self.s_reg**2 * (r2 + self.s_reg**2) ** (-2.5)
        for b in self.bumps:
            d = x - np.asarray(b.center)
            rho2 = np.sum(d * d, axis=-1)
            out = out - 4.0 * np.pi * b.amplitude * np.exp(-rho2 / b.width**2)
        return out

    def scalar_curvature(self, x):
        """R_g = -8 phi^{-5} Delta phi, nonnegative by superharmonicity."""
        return -8.0 * self.phi(x) ** (-5) * self.laplace_phi(x)

    def christoffel(self, x):
        """Gamma^k_{ij} of g = phi^4 delta, shape (..., 3, 3, 3) indexed [k,i,j]."""
        x = np.asarray(x, dtype=float)
        p = self.phi(x)
        dp = self.grad_phi(x) / p[..., None] * 2.0  # 2 phi^{-1} d_phi
        eye = np.eye(3)
        # Gamma^k_ij = delta_ik s_j + delta_jk s_i - delta_ij s_k, s = 2 dphi/phi
        gamma = (
            np.einsum("ki,...j->...kij", eye, dp)
            + np.einsum("kj,...i->...kij", eye, dp)
            - np.einsum("ij,...k->...kij", eye, dp)
        )
        return gamma


def build_conformal_factor(m_core, s_reg, bumps=()):
    """Validate parameters and construct the analytic conformal factor.

    ``bumps`` is an iterable of (center, amplitude, width) triples or Bump
    instances.
    """
    norm = []
    for b in bumps:
        if not isinstance(b, Bump):
            c, a, w = b
            b = Bump(tuple(float(v) for v in c), float(a), float(w))
        norm.append(b)
    return ConformalFactor(float(m_core), float(s_reg), tuple(norm))


# -- erf-ratio helpers: F(rho) = erf(rho/w)/rho and derivatives --------------


def _erf_ratio(rho, w):
    rho = np.asarray(rho, dtype=float)
    t = rho / w
    small = t < _SERIES_CUTOFF
    safe = np.where(small, 1.0, rho)
    out = erf(t) / safe
    t2 = t * t
    series = (2.0 / (_SQRT_PI * w)) * (1.0 - t2 / 3.0 + t2 * t2 / 10.0)
    return np.where(small, series, out)


def _erf_ratio_d1_over_rho(rho, w):
    """F'(rho)/rho, the radial factor of grad(F); regular at rho = 0."""
    rho = np.asarray(rho, dtype=float)
    t = rho / w
    small = t < _SERIES_CUTOFF
    safe = np.where(small, 1.0, rho)
    gauss = (2.0 / (_SQRT_PI * w)) * np.exp(-t * t)
    out = (gauss * safe - erf(t)) / safe**3
    t2 = t * t
    series = (2.0 / (_SQRT_PI * w**3)) * (-2.0 / 3.0 + 2.0 * t2 / 5.0 - t2 * t2 / 7.0)
    return np.where(small, series, out)


def _erf_ratio_d2(rho, w):
    """F''(rho); uses F'' = -(4/(sqrt(pi) w^3)) exp(-t^2) - 2 F'/rho."""
    rho = np.asarray(rho, dtype=float)
    t = rho / w
    gauss3 = (4.0 / (_SQRT_PI * w**3)) * np.exp(-t * t)
    return -gauss3 - 2.0 * _erf_ratio_d1_over_rho(rho, w)


# -- uniform Cartesian discretization ----------------------------------------


class MetricGrid:
    """Uniform node-centered grid on [-L_box, L_box]^3 carrying metric data.

    Nodes are indexed [i, j, k] along (x, y, z); per-node arrays hold phi,
    sqrt(g) = phi^6, the scalar curvature and the inverse-metric scalar
    phi^{-4}.  Gradients of phi are analytic.
    """

    def __init__(self, factor: ConformalFactor, h: float, L_box: float):
        if h <= 0 or L_box <= 0:
            raise ValueError("h and L_box must be positive")
        n = int(round(2.0 * L_box / h)) + 1
        if abs((n - 1) * h / 2.0 - L_box) > 1e-9 * L_box:
            raise ValueError("2*L_box must be an integer multiple of h")
        self.factor = factor
        self.h = float(h)
        self.L_box = float(L_box)
        self.dims = (n, n, n)
        ax = np.linspace(-L_box, L_box, n)
        self.axis = ax
        X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
        self.coords = np.stack([X, Y, Z], axis=-1)
        self.radius = np.sqrt(X * X + Y * Y + Z * Z)
        self.phi = factor.phi(self.coords)
        self.grad_phi = factor.grad_phi(self.coords)
        self.laplace_phi = factor.laplace_phi(self.coords)
        self.sqrt_g = self.phi**6
        self.inv_metric_scalar = self.phi ** (-4)
        self.R = -8.0 * self.phi ** (-5) * self.laplace_phi
        if not np.all(np.isfinite(self.phi)):
            raise ValueError("non-finite phi on grid")
        assert np.all(self.phi >= 1.0)
        assert np.all(self.R >= 0.0)

    def interior(self, collar: int = 1):
        """Boolean mask of nodes at least `collar` cells from every face."""
        m = np.zeros(self.dims, dtype=bool)
        c = collar
        m[c:-c, c:-c, c:-c] = True
        return m


# -- ADM boundary integral ---------------------------------------------------


def adm_mass_boundary_integral(factor: ConformalFactor, r: float, L_box: float,
                               n_phi: int = 64, n_theta: int = 32) -> float:
    """Flux integral (1/16 pi) * surface sum of (g_jk,j - g_jj,k) v^k over S_r.

    Quadrature is uniform in longitude and Gauss-Legendre in the latitude
    cosine; partial derivatives of g = phi^4 delta are analytic.
    """
    A_inner = 0.0  # the family is defined on all of R^3
    if not (A_inner < r < L_box):
        raise ValueError(f"r={r} must lie in (0, L_box={L_box})")
    mu, wt = np.polynomial.legendre.leggauss(n_theta)
    lam = 2.0 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1.0 - mu**2)
    x = r * np.outer(st, np.cos(lam))
    y = r * np.outer(st, np.sin(lam))
    z = r * np.outer(mu, np.ones(n_phi))
    pts = np.stack([x, y, z], axis=-1)
    v = pts / r
    p = factor.phi(pts)
    dp = factor.grad_phi(pts)
    # d_i g_jk = 4 phi^3 (d_i phi) delta_jk:
    #   sum_{j,k} (g_jk,j - g_jj,k) v^k = -2 * d_k(phi^4) v^k
    dg4 = 4.0 * p[..., None] ** 3 * dp
    integrand = -2.0 * np.sum(dg4 * v, axis=-1)
    # dA on the sphere: r^2 dmu dlam
    dA = r * r * (2.0 * np.pi / n_phi)
    total = np.sum(integrand * wt[:, None]) * dA
    return float(total / (16.0 * np.pi))


def adm_mass_extrapolated(factor: ConformalFactor, radii, L_box: float,
                          n_phi: int = 64, n_theta: int = 32) -> float:
    """Fit m_r = m + c1/r + c2/r^2 over the given radii and return m.

    The family's boundary integral converges at O(1/r); the quadratic fit in
    1/r removes the two leading error terms.
    """
    radii = np.asarray(list(radii), dtype=float)
    if len(radii) < 2:
        raise ValueError("need at least two radii to extrapolate")
    vals = np.array([adm_mass_boundary_integral(factor, r, L_box, n_phi, n_theta)
                     for r in radii])
    k = min(3, len(radii))
    V = np.vander(1.0 / radii, k, increasing=True)
    coef, *_ = np.linalg.lstsq(V, vals, rcond=None)
    return float(coef[0])


# -- asymptotic flatness check -----------------------------------------------


def check_af_decay(factor: ConformalFactor, params: AFParams, sample_radii,
                   n_dirs: int = 64, rng=None):
    """Max of |d^k(g - delta)| |x|^(sigma+k) / B over sampled directions.

    Returns ``(passed, per_radius)`` where per_radius maps each radius to the
    worst ratio over derivative orders 0, 1, 2; all ratios <= 1 means the
    factor satisfies the (A, B, sigma) decay at the sampled points.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    dirs = rng.normal(size=(n_dirs, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    report = {}
    for r in sample_radii:
        if r <= params.A:
            raise ValueError("sample radii must exceed A")
        pts = r * dirs
        p = factor.phi(pts)
        dp = factor.grad_phi(pts)
        hp = factor.hess_phi(pts)
        d0 = np.abs(p**4 - 1.0)
        d1 = np.max(np.abs(4.0 * p[:, None] ** 3 * dp), axis=1)
        h2 = (12.0 * p[:, None, None] ** 2 * dp[:, :, None] * dp[:, None, :]
              + 4.0 * p[:, None, None] ** 3 * hp)
        d2 = np.max(np.abs(h2), axis=(1, 2))
        ratios = [
            np.max(d0) * r ** params.sigma / params.B,
            np.max(d1) * r ** (params.sigma + 1) / params.B,
            np.max(d2) * r ** (params.sigma + 2) / params.B,
        ]
        report[float(r)] = float(max(ratios))
    passed = all(v <= 1.0 for v in report.values())
    return passed, report


# -- Ricci curvature of phi^4 delta (offline lower-bound computation) --------


def ricci_eigenvalues(factor: ConformalFactor, x):
    """Eigenvalues of Ric(g) in a g-orthonormal frame at points x (..., 3).

    For g = phi^4 delta (conformal metric e^{2 omega} delta, omega = 2 ln phi):
        Ric_ij = -2 H_ij/phi + 6 dphi_i dphi_j / phi^2
                 - (2 Lap(phi)/phi + 2 |dphi|^2/phi^2) delta_ij,
    and frame eigenvalues are those of phi^{-4} Ric_ij.
    """
    x = np.asarray(x, dtype=float)
    p = factor.phi(x)
    dp = factor.grad_phi(x)
    hp = factor.hess_phi(x)
    lp = factor.laplace_phi(x)
    gradsq = np.sum(dp * dp, axis=-1)
    eye = np.eye(3)
    ric = (
        -2.0 * hp / p[..., None, None]
        + 6.0 * dp[..., :, None] * dp[..., None, :] / p[..., None, None] ** 2
        - (2.0 * lp / p + 2.0 * gradsq / p**2)[..., None, None] * eye
    )
    frame = ric * p[..., None, None] ** (-4)
    return np.linalg.eigvalsh(frame)


def ricci_lower_bound(factor: ConformalFactor, extent: float = 13.0,
                      n: int = 41) -> float:
    """Smallest Ricci eigenvalue over a coarse sample box, as Lambda >= 0
    with Ric >= -2 Lambda.  Used offline to ship per-corpus constants."""
    ax = np.linspace(-extent, extent, n)
    X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
    pts = np.stack([X, Y, Z], axis=-1).reshape(-1, 3)
    ev = ricci_eigenvalues(factor, pts)
    lo = float(np.min(ev))
    return max(0.0, -lo / 2.0)
