"""Discrete Laplace-Beltrami solver for harmonic functions on g = phi^4 delta.

The operator Delta_g u = phi^{-6} d_i(phi^2 d_i u) is discretized in flux form
with face-centered averages of phi^2 (7-point stencil).  Multiplying through
by phi^6 leaves the null space unchanged and yields a symmetric positive
definite M-matrix on the interior unknowns, solved by conjugate gradient with
a smoothed-aggregation multigrid preconditioner.  Dirichlet data u = x^j is
imposed on the outer box faces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pyamg
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import cg

from afmass.conformal import ConformalFactor, MetricGrid

DEFAULT_TOL = 1e-10


class LaplaceBeltramiOperator:
    """Flux-form discretization of -d_i(phi^2 d_i u) on the grid interior."""

    def __init__(self, grid: MetricGrid):
        self.grid = grid
        n = grid.dims[0]
        self.n = n
        self.m = n - 2
        h = grid.h
        phi2 = grid.phi**2
        # face-centered coefficients along each axis, shape (n-1, n, n) etc.
        self.face = [
            0.5 * (phi2[:-1, :, :] + phi2[1:, :, :]) / h**2,
            0.5 * (phi2[:, :-1, :] + phi2[:, 1:, :]) / h**2,
            0.5 * (phi2[:, :, :-1] + phi2[:, :, 1:]) / h**2,
        ]
        self.matrix = self._assemble()
        self._amg = None

    def preconditioner(self):
        """Smoothed-aggregation hierarchy, built once and reused per solve."""
        if self._amg is None:
            ml = pyamg.smoothed_aggregation_solver(self.matrix, max_coarse=500)
            self._amg = ml.aspreconditioner(cycle="V")
        return self._amg

    def _assemble(self):
        m = self.m
        Fx, Fy, Fz = self.face
        # interior slices of face arrays, indexed by the lower adjacent node
        fx = Fx[:, 1:-1, 1:-1]          # (n-1, m, m)
        fy = Fy[1:-1, :, 1:-1]
        fz = Fz[1:-1, 1:-1, :]
        diag = (fx[:-1] + fx[1:] + fy[:, :-1] + fy[:, 1:]
                + fz[:, :, :-1] + fz[:, :, 1:]).ravel()
        idx = np.arange(m**3).reshape(m, m, m)
        rows = [np.arange(m**3)]
        cols = [np.arange(m**3)]
        vals = [diag]
        # interior-interior couplings: face between interior nodes I and I+1
        links = [
            (idx[:-1].ravel(), idx[1:].ravel(), fx[1:-1].ravel()),
            (idx[:, :-1].ravel(), idx[:, 1:].ravel(), fy[:, 1:-1].ravel()),
            (idx[:, :, :-1].ravel(), idx[:, :, 1:].ravel(), fz[:, :, 1:-1].ravel()),
        ]
        for a, b, c in links:
            rows += [a, b]
            cols += [b, a]
            vals += [-c, -c]
        A = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(m**3, m**3),
        ).tocsr()
        return A

    def boundary_rhs(self, u_bc: np.ndarray) -> np.ndarray:
        """RHS contribution of Dirichlet values on the box faces.

        ``u_bc`` is a full-grid field; only its face values are read.
        """
        m = self.m
        Fx, Fy, Fz = self.face
        b = np.zeros((m, m, m))
        b[0] += Fx[0, 1:-1, 1:-1] * u_bc[0, 1:-1, 1:-1]
        b[-1] += Fx[-1, 1:-1, 1:-1] * u_bc[-1, 1:-1, 1:-1]
        b[:, 0] += Fy[1:-1, 0, 1:-1] * u_bc[1:-1, 0, 1:-1]
        b[:, -1] += Fy[1:-1, -1, 1:-1] * u_bc[1:-1, -1, 1:-1]
        b[:, :, 0] += Fz[1:-1, 1:-1, 0] * u_bc[1:-1, 1:-1, 0]
        b[:, :, -1] += Fz[1:-1, 1:-1, -1] * u_bc[1:-1, 1:-1, -1]
        return b.ravel()

    def apply_full(self, u: np.ndarray) -> np.ndarray:
        """Stencil applied to a full-grid field; returns d_i(phi^2 d_i u) on
        interior nodes (zero-padded to full shape)."""
        Fx, Fy, Fz = self.face
        out = np.zeros_like(u)
        out[1:-1, :, :] += Fx[1:, :, :] * (u[2:] - u[1:-1]) - Fx[:-1, :, :] * (u[1:-1] - u[:-2])
        out[:, 1:-1, :] += Fy[:, 1:, :] * (u[:, 2:] - u[:, 1:-1]) - Fy[:, :-1, :] * (u[:, 1:-1] - u[:, :-2])
        out[:, :, 1:-1] += Fz[:, :, 1:] * (u[:, :, 2:] - u[:, :, 1:-1]) - Fz[:, :, :-1] * (u[:, :, 1:-1] - u[:, :, :-2])
        mask = np.zeros_like(u, dtype=bool)
        mask[1:-1, 1:-1, 1:-1] = True
        out[~mask] = 0.0
        return out


def solve_harmonic(grid: MetricGrid, j: int, operator: LaplaceBeltramiOperator | None = None,
                   boundary=None, tol: float = DEFAULT_TOL, maxiter: int | None = None):
    """Solve Delta_g u = 0 with Dirichlet data on the box faces.

    ``j`` in {1, 2, 3} selects the coordinate function x^j used both as the
    default boundary data and as the initial guess.  ``boundary`` may override
    the Dirichlet data with any full-grid field.  Returns ``(u, rel_residual)``.
    """
    if j not in (1, 2, 3):
        raise ValueError("j must be 1, 2 or 3")
    op = operator if operator is not None else LaplaceBeltramiOperator(grid)
    xj = grid.coords[..., j - 1]
    u_bc = xj if boundary is None else np.asarray(boundary, dtype=float)
    b = op.boundary_rhs(u_bc)
    x0 = u_bc[1:-1, 1:-1, 1:-1].ravel().copy()
    A = op.matrix
    if maxiter is None:
        maxiter = 50 * op.n
    norm_b = np.linalg.norm(b)
    r0 = b - A @ x0
    if norm_b > 0 and np.linalg.norm(r0) <= tol * norm_b:
        sol, info = x0, 0
    else:
        M = op.preconditioner()
        sol, info = cg(A, b, x0=x0, rtol=tol, atol=0.0, maxiter=maxiter, M=M)
        if info != 0:
            raise RuntimeError(
                f"conjugate gradient failed to converge (info={info}); "
                "the assembled operator should be SPD -- check the grid"
            )
    res = float(np.linalg.norm(b - A @ sol) / norm_b) if norm_b > 0 else 0.0
    u = u_bc.copy()
    u[1:-1, 1:-1, 1:-1] = sol.reshape(op.m, op.m, op.m)
    return u, res


# -- derivative fields -------------------------------------------------------


def partial_derivatives(u: np.ndarray, h: float) -> np.ndarray:
    """d_a u, shape (3, ...), central 2nd order with one-sided 2nd order at faces."""
    return np.stack(np.gradient(u, h, edge_order=2), axis=0)


def covariant_hessian(grid: MetricGrid, u: np.ndarray, partials: np.ndarray | None = None):
    """Covariant Hessian H_ij = d_i d_j u - Gamma^k_ij d_k u, shape (3, 3, ...).

    Second partials are central differences of the first-derivative fields;
    Christoffels come from the analytic conformal factor.  Values in the
    one-cell boundary collar are one-sided and should be excluded from
    integrals.
    """
    h = grid.h
    if partials is None:
        partials = partial_derivatives(u, h)
    hess = np.empty((3, 3) + u.shape)
    for a in range(3):
        d2 = np.gradient(partials[a], h, edge_order=2)
        for bb in range(3):
            hess[a, bb] = d2[bb]
    # symmetrize the mixed central differences
    hess = 0.5 * (hess + np.swapaxes(hess, 0, 1))
    p = grid.phi
    s = 2.0 * grid.grad_phi / p[..., None]  # s_k = 2 phi^{-1} d_k phi
    s = np.moveaxis(s, -1, 0)
    # Gamma^k_ij d_k u = delta_ik s_j du_k + delta_jk s_i du_k - delta_ij s_k du_k
    sdot = np.einsum("k...,k...->...", s, partials)
    for i in range(3):
        for jj in range(3):
            corr = s[jj] * partials[i] + s[i] * partials[jj]
            if i == jj:
                corr = corr - sdot
            hess[i, jj] -= corr
    return hess


@dataclass
class HarmonicTriple:
    """The three discrete harmonic functions asymptotic to the coordinates.

    ``u`` has shape (3, n, n, n); ``partials`` holds d_a u^j indexed
    [j, a, ...]; covariant Hessians are computed lazily per coordinate.
    """

    grid: MetricGrid
    u: np.ndarray
    partials: np.ndarray
    residual_norm: tuple
    _hessians: dict = field(default_factory=dict, repr=False)

    def hessian(self, j: int) -> np.ndarray:
        if j not in self._hessians:
            self._hessians[j] = covariant_hessian(self.grid, self.u[j - 1],
                                                  self.partials[j - 1])
        return self._hessians[j]

    def metric_gradient_inner(self, j: int, k: int) -> np.ndarray:
        """< grad u^j, grad u^k >_g = phi^{-4} sum_a d_a u^j d_a u^k."""
        dot = np.einsum("a...,a...->...", self.partials[j - 1], self.partials[k - 1])
        return self.grid.inv_metric_scalar * dot


def solve_harmonic_triple(grid: MetricGrid, tol: float = DEFAULT_TOL) -> HarmonicTriple:
    op = LaplaceBeltramiOperator(grid)
    us, res = [], []
    for j in (1, 2, 3):
        u, r = solve_harmonic(grid, j, operator=op, tol=tol)
        us.append(u)
        res.append(r)
    u = np.stack(us)
    partials = np.stack([partial_derivatives(ui, grid.h) for ui in us])
    return HarmonicTriple(grid, u, partials, tuple(res))


# -- radial ODE oracle -------------------------------------------------------


def radial_ode_oracle(m_core: float, s_reg: float, r_max: float,
                      n_table: int = 2048, r_far: float = 400.0):
    """Independent reference for bump-free factors via the ansatz u = f(r) x^j.

    Substituting into d_i(phi^2 d_i u) = 0 gives the linear ODE

        f'' + (4/r + 2 phi'/phi) f' + (2 phi'/(r phi)) f = 0,

    with phi(r) = 1 + m/(2 sqrt(r^2 + s^2)).  The regular solution at r = 0 is
    integrated outward with a high-order method and rescaled to match the
    far-field normalization f(r_far) = 1 - m/(2 r_far) + O(r_far^{-3}).

    Returns ``(r_table, f_table, f_interp)`` on [0, r_max].
    """
    if s_reg <= 0:
        raise ValueError("s_reg must be positive")
    m = float(m_core)
    s = float(s_reg)
    if m == 0.0:
        r_tab = np.linspace(0.0, r_max, n_table)
        f_tab = np.ones_like(r_tab)
        return r_tab, f_tab, lambda r: np.ones_like(np.asarray(r, dtype=float))

    def phi(r):
        return 1.0 + 0.5 * m / np.sqrt(r * r + s * s)

    def dphi(r):
        return -0.5 * m * r * (r * r + s * s) ** (-1.5)

    def rhs(r, y):
        f, fp = y
        p = phi(r)
        dp = dphi(r)
        return [fp, -(4.0 / r + 2.0 * dp / p) * fp - (2.0 * dp / (r * p)) * f]

    # regular series f = f0 (1 + c r^2) with c = m / (10 s^3 phi(0))
    c = m / (10.0 * s**3 * phi(0.0))
    r_eps = 1e-6
    y0 = [1.0 + c * r_eps**2, 2.0 * c * r_eps]
    sol = solve_ivp(rhs, (r_eps, r_far), y0, method="DOP853",
                    rtol=1e-12, atol=1e-14, dense_output=True)
    if not sol.success:
        raise RuntimeError(f"radial ODE integration failed: {sol.message}")
    target = 1.0 - 0.5 * m / r_far
    scale = target / sol.sol(r_far)[0]

    def f_interp(r):
        r = np.asarray(r, dtype=float)
        out = np.empty(r.shape)
        small = r < r_eps
        out[small] = scale * (1.0 + c * r[small] ** 2)
        if np.any(~small):
            out[~small] = scale * sol.sol(np.clip(r[~small], r_eps, r_far))[0]
        return out

    r_tab = np.linspace(0.0, r_max, n_table)
    return r_tab, f_interp(r_tab), f_interp
