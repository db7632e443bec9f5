"""Orthonormality defect, co-area threshold selection, and the regular subregion.

The defect field Q sums the squared deviations of the harmonic-gradient Gram
matrix from the identity in the metric inner product.  Thresholds are picked
in two stages: per-coordinate gradient levels 1 + tau1_j chosen away from node
values (a discrete regular-value surrogate), then a defect level tau2 chosen
by scanning candidates in (tau1_min/2, tau1_min) and keeping the one whose
level surface has the smallest metric area -- the discrete counterpart of the
co-area averaging argument.  The regular subregion is the 6-connected sublevel
component of {Q <= tau2} containing the outer shell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage import measure

from afmass.conformal import MetricGrid
from afmass.elliptic import HarmonicTriple

TAU2_CANDIDATES = 64
LEVEL_CLEARANCE = 1e-12


@dataclass
class DefectField:
    Q: np.ndarray                 # sum_{j,k} |<grad u^j, grad u^k>_g - delta|^2
    gradQ_norm_g: np.ndarray      # |grad Q|_g = phi^{-2} |dQ|
    per_j_gradsq: np.ndarray      # (3, ...) fields |grad u^j|^2_g
    gram: np.ndarray              # (3, 3, ...) Gram matrix entries


def defect_field(triple: HarmonicTriple) -> DefectField:
    grid = triple.grid
    gram = np.empty((3, 3) + grid.dims)
    for j in range(3):
        for k in range(3):
            gram[j, k] = triple.metric_gradient_inner(j + 1, k + 1)
    dev = gram - np.eye(3)[:, :, None, None, None]
    Q = np.einsum("jk...,jk...->...", dev, dev)
    dQ = np.stack(np.gradient(Q, grid.h, edge_order=2), axis=0)
    gradQ = np.sqrt(np.einsum("a...,a...->...", dQ, dQ)) * grid.phi ** (-2)
    return DefectField(Q=Q, gradQ_norm_g=gradQ,
                       per_j_gradsq=np.stack([gram[j, j] for j in range(3)]),
                       gram=gram)


# -- threshold selection -----------------------------------------------------


def _gap_midpoint(values: np.ndarray, lo: float, hi: float) -> float:
    """Midpoint of the widest gap between sorted values inside (lo, hi)."""
    inside = np.sort(values[(values > lo) & (values < hi)])
    knots = np.concatenate([[lo], inside, [hi]])
    gaps = np.diff(knots)
    i = int(np.argmax(gaps))
    return float(0.5 * (knots[i] + knots[i + 1]))


def select_tau1(per_j_gradsq: np.ndarray, tau: float) -> np.ndarray:
    """Pick tau1_j in (tau/2, tau) so the level 1 + tau1_j clears every node
    value of |grad u^j|^2 by at least the clearance margin."""
    if not 0.0 < tau < 0.25:
        raise ValueError("tau must lie in (0, 1/4)")
    out = np.empty(3)
    for j in range(3):
        lvl = _gap_midpoint(per_j_gradsq[j].ravel(), 1.0 + tau / 2.0, 1.0 + tau)
        vals = per_j_gradsq[j].ravel()
        near = np.min(np.abs(vals - lvl)) if vals.size else np.inf
        if near < LEVEL_CLEARANCE:
            raise RuntimeError("no clean gradient level found")  # pragma: no cover
        out[j] = lvl - 1.0
    return out


def level_surface_area(field: np.ndarray, level: float, grid: MetricGrid,
                       keep_cells: np.ndarray | None = None,
                       origin_index=(0, 0, 0)):
    """Marching-cubes surface of {field = level} and its metric area.

    ``field`` may be a subvolume; ``origin_index`` locates its [0,0,0] node on
    the full grid.  ``keep_cells`` (same shape as field) restricts triangles to
    cells with at least one marked corner.  Returns (verts, faces, area_g).
    """
    h = grid.h
    lo, hi = float(field.min()), float(field.max())
    if not (lo < level < hi):
        return np.zeros((0, 3)), np.zeros((0, 3), dtype=int), 0.0
    verts, faces, _, _ = measure.marching_cubes(field, level=level,
                                                spacing=(h, h, h))
    origin = np.array([grid.axis[origin_index[0]], grid.axis[origin_index[1]],
                       grid.axis[origin_index[2]]])
    verts = verts + origin
    if faces.shape[0] == 0:
        return verts, faces, 0.0
    tri = verts[faces]
    cent = tri.mean(axis=1)
    if keep_cells is not None:
        idx = np.clip(((cent - origin) / h).astype(int), 0,
                      np.array(field.shape) - 2)
        keep = np.zeros(len(faces), dtype=bool)
        for di in (0, 1):
            for dj in (0, 1):
                for dk in (0, 1):
                    keep |= keep_cells[idx[:, 0] + di, idx[:, 1] + dj,
                                       idx[:, 2] + dk]
        tri = tri[keep]
        faces = faces[keep]
        cent = cent[keep]
        if len(faces) == 0:
            return verts, faces, 0.0
    a = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    eucl = 0.5 * np.linalg.norm(a, axis=1)
    weight = grid.factor.phi(cent) ** 4
    return verts, faces, float(np.sum(weight * eucl))


@dataclass
class Tau2Certificate:
    tau2: float
    chosen_area: float
    candidate_areas: np.ndarray
    mean_area: float
    coarea_bound: float       # (2/tau1_min) * sum |grad Q|_g dV_g over the domain

    @property
    def holds(self) -> bool:
        return (self.chosen_area <= self.mean_area + 1e-30
                and self.chosen_area <= self.coarea_bound + 1e-30)


def select_tau2(defect: DefectField, tau1: np.ndarray, grid: MetricGrid,
                r0: float = 4.0, n_candidates: int = TAU2_CANDIDATES) -> Tau2Certificate:
    """Scan defect levels in (tau1_min/2, tau1_min) over the ball-interior part
    of E1 and return the level with smallest metric surface area.

    The certificate records the discrete co-area bound: the chosen area never
    exceeds the candidate mean, and the mean times the scan width is dominated
    by the integral of |grad Q|_g over the scan domain.
    """
    tau1_min = float(np.min(tau1))
    e1 = np.ones(grid.dims, dtype=bool)
    for j in range(3):
        e1 &= defect.per_j_gradsq[j] <= 1.0 + tau1[j]
    domain = e1 & (grid.radius < r0) & grid.interior(1)
    coarea = (2.0 / tau1_min) * float(
        np.sum(defect.gradQ_norm_g[domain] * grid.sqrt_g[domain]) * grid.h**3)
    lo, hi = tau1_min / 2.0, tau1_min
    # half-step insets keep candidates strictly inside the interval
    cand = lo + (np.arange(n_candidates) + 0.5) * (hi - lo) / n_candidates
    if not np.any(domain):
        return Tau2Certificate(tau2=0.75 * tau1_min, chosen_area=0.0,
                               candidate_areas=np.zeros(n_candidates),
                               mean_area=0.0, coarea_bound=coarea)
    # restrict the scan to a bounding subbox of the domain for speed
    ii = np.nonzero(domain)
    pad = 2
    sl = tuple(slice(max(int(a.min()) - pad, 0), min(int(a.max()) + pad + 1, n))
               for a, n in zip(ii, grid.dims))
    sub = defect.Q[sl]
    sub_domain = domain[sl]
    origin_index = tuple(s.start for s in sl)
    areas = np.empty(n_candidates)
    for i, t in enumerate(cand):
        _, _, areas[i] = level_surface_area(sub, t, grid, keep_cells=sub_domain,
                                            origin_index=origin_index)
    i_best = int(np.argmin(areas))
    return Tau2Certificate(tau2=float(cand[i_best]), chosen_area=float(areas[i_best]),
                           candidate_areas=areas, mean_area=float(areas.mean()),
                           coarea_bound=coarea)


# -- region extraction -------------------------------------------------------


@dataclass
class RegularRegion:
    tau: float
    tau1: np.ndarray
    tau2: float
    mask: np.ndarray
    seed_ok: bool
    boundary_verts: np.ndarray
    boundary_faces: np.ndarray
    area_g: float
    r0: float


def extract_region(defect: DefectField, tau2: float, grid: MetricGrid,
                   r0: float = 4.0, tau: float = 0.05,
                   tau1: np.ndarray | None = None) -> RegularRegion:
    """6-connected sublevel component of {Q <= tau2} seeded from the outer
    shell {|x| > r0}, with its marching-cubes boundary and metric area."""
    sub = defect.Q <= tau2
    shell = (grid.radius > r0) & grid.interior(1)
    seed_ok = bool(np.all(sub[shell]))
    structure = ndimage.generate_binary_structure(3, 1)  # 6-connectivity
    labels, _ = ndimage.label(sub, structure=structure)
    seed_labels = np.unique(labels[shell & sub])
    seed_labels = seed_labels[seed_labels > 0]
    if seed_labels.size:
        mask = np.isin(labels, seed_labels)
    else:
        mask = np.zeros(grid.dims, dtype=bool)
    verts, faces, area = level_surface_area(defect.Q, tau2, grid, keep_cells=mask)
    return RegularRegion(tau=tau,
                         tau1=tau1 if tau1 is not None else np.full(3, np.nan),
                         tau2=float(tau2), mask=mask, seed_ok=seed_ok,
                         boundary_verts=verts, boundary_faces=faces,
                         area_g=area, r0=r0)


# -- supersampled indicator integrals ----------------------------------------


def _refine_linear(a: np.ndarray) -> np.ndarray:
    """Factor-2 refinement by linear interpolation along each axis."""
    for ax in range(3):
        a = np.moveaxis(a, ax, 0)
        mid = 0.5 * (a[:-1] + a[1:])
        out = np.empty((2 * a.shape[0] - 1,) + a.shape[1:], dtype=a.dtype)
        out[::2] = a
        out[1::2] = mid
        a = np.moveaxis(out, 0, ax)
    return a


def cylinder_volume(region: RegularRegion, grid: MetricGrid, triple: HarmonicTriple,
                    a_direction, L: float):
    """Metric volume of the coordinate cylinder {|u^a| <= L,
    |U|^2 - (u^a)^2 <= L^2} intersected with the regular region.

    Uses factor-2 supersampling of the harmonic fields; returns
    ``(volume, ratio)`` with ratio against the Euclidean model 2 pi L^3.
    """
    a = np.asarray(a_direction, dtype=float)
    a = a / np.linalg.norm(a)
    u = triple.u
    ua = np.einsum("j,j...->...", a, u)
    usq = np.einsum("j...,j...->...", u, u)
    inside = (np.abs(ua) <= L) & (usq - ua**2 <= L * L)
    edge = ~grid.interior(2)
    if np.any(inside & edge):
        raise ValueError(f"cylinder with L={L} escapes the grid interior")
    ua_f = _refine_linear(ua)
    trans_f = _refine_linear(usq - ua**2)
    w6_f = _refine_linear(grid.sqrt_g)
    mask_f = _refine_linear(region.mask.astype(float)) >= 0.5
    ind = (np.abs(ua_f) <= L) & (trans_f <= L * L) & mask_f
    vol = float(np.sum(w6_f[ind]) * (grid.h / 2.0) ** 3)
    return vol, vol / (2.0 * np.pi * L**3)


# -- chart image rasterization ----------------------------------------------


def default_base_point_index(grid: MetricGrid, r0: float = 4.0):
    """Index of the on-axis node just outside the shell radius, used as the
    base point p with image p* = U(p)."""
    i0 = int(np.argmin(np.abs(grid.axis - (r0 + 1.0))))
    c = (grid.dims[0] - 1) // 2
    return (i0, c, c)


@dataclass
class ImageRaster:
    p_star: np.ndarray
    D: float
    voxel: float
    covered: np.ndarray          # bool, voxel grid over the ball bounding box
    in_ball: np.ndarray
    mean_sqrt_det: np.ndarray    # per covered voxel
    uncovered_volume: float
    ball_volume: float
    weak_volume_integrand: float


def rasterize_image(region: RegularRegion, triple: HarmonicTriple, D: float,
                    voxel: float, base_index=None, samples_per_axis: int = 3) -> ImageRaster:
    """Push the chart image of the region through a Euclidean voxel grid.

    Every grid cell fully inside the region mask is sampled on a
    ``samples_per_axis``^3 lattice; samples are splatted into voxels covering
    the bounding box of B(p*, D).  Uncovered in-ball voxels contribute 1 to
    the weak-volume integrand, covered voxels contribute
    |mean sqrt(det g) - 1| with det g = det(Gram)^{-1} in chart coordinates.
    """
    grid = triple.grid
    if voxel > grid.h + 1e-12:
        raise ValueError("voxel pitch coarser than the grid spacing undersamples the image")
    if base_index is None:
        base_index = default_base_point_index(grid, region.r0)
    u = triple.u
    p_star = np.array([u[j][base_index] for j in range(3)])
    _check_ball_inside_image(triple, p_star, D)
    m = region.mask & grid.interior(1)
    cells = m[:-1, :-1, :-1] & m[1:, :-1, :-1] & m[:-1, 1:, :-1] & m[:-1, :-1, 1:] \
        & m[1:, 1:, :-1] & m[1:, :-1, 1:] & m[:-1, 1:, 1:] & m[1:, 1:, 1:]
    ci = np.array(np.nonzero(cells)).T  # (nc, 3) lower-corner node indices
    lo = p_star - D - voxel
    nvox = int(np.ceil(2.0 * (D + voxel) / voxel))
    counts = np.zeros((nvox, nvox, nvox), dtype=np.int64)
    det_sum = np.zeros((nvox, nvox, nvox))
    # Gram determinant per cell (corner average), giving sqrt(det g) = det^(-1/2)
    gram = region_gram(triple)
    detM = np.linalg.det(np.moveaxis(gram, (0, 1), (-2, -1)))
    detM_cell = _corner_average(detM)
    sqrt_det_g = detM_cell[cells.nonzero()] ** (-0.5)
    offs = (np.arange(samples_per_axis) + 0.5) / samples_per_axis
    chunk = 200_000
    for start in range(0, len(ci), chunk):
        idx = ci[start:start + chunk]
        vals = np.empty((len(idx), samples_per_axis**3, 3))
        for j in range(3):
            vals[:, :, j] = _trilinear_cell_samples(u[j], idx, offs)
        pts = vals.reshape(-1, 3)
        v = np.floor((pts - lo) / voxel).astype(int)
        ok = np.all((v >= 0) & (v < nvox), axis=1)
        v = v[ok]
        d_rep = np.repeat(sqrt_det_g[start:start + chunk], samples_per_axis**3)[ok]
        np.add.at(counts, (v[:, 0], v[:, 1], v[:, 2]), 1)
        np.add.at(det_sum, (v[:, 0], v[:, 1], v[:, 2]), d_rep)
    covered = counts > 0
    off = (np.arange(nvox) + 0.5) * voxel
    CX, CY, CZ = np.meshgrid(lo[0] + off, lo[1] + off, lo[2] + off,
                             indexing="ij")
    in_ball = ((CX - p_star[0]) ** 2 + (CY - p_star[1]) ** 2
               + (CZ - p_star[2]) ** 2) <= D * D
    mean_det = np.where(covered, det_sum / np.maximum(counts, 1), 0.0)
    vol_vox = voxel**3
    uncovered = float(np.sum(in_ball & ~covered) * vol_vox)
    integrand = float(np.sum(np.abs(mean_det[in_ball & covered] - 1.0)) * vol_vox
                      + uncovered)
    ball_volume = 4.0 / 3.0 * np.pi * D**3
    return ImageRaster(p_star=p_star, D=D, voxel=voxel, covered=covered,
                       in_ball=in_ball, mean_sqrt_det=mean_det,
                       uncovered_volume=uncovered, ball_volume=ball_volume,
                       weak_volume_integrand=integrand)


def region_gram(triple: HarmonicTriple) -> np.ndarray:
    gram = np.empty((3, 3) + triple.grid.dims)
    for j in range(3):
        for k in range(3):
            gram[j, k] = triple.metric_gradient_inner(j + 1, k + 1)
    return gram


def _corner_average(a: np.ndarray) -> np.ndarray:
    return 0.125 * (a[:-1, :-1, :-1] + a[1:, :-1, :-1] + a[:-1, 1:, :-1]
                    + a[:-1, :-1, 1:] + a[1:, 1:, :-1] + a[1:, :-1, 1:]
                    + a[:-1, 1:, 1:] + a[1:, 1:, 1:])


def _trilinear_cell_samples(field: np.ndarray, idx: np.ndarray, offs: np.ndarray):
    """Trilinear samples of ``field`` at lattice offsets inside the cells with
    lower corners ``idx``; returns shape (len(idx), len(offs)^3)."""
    i, j, k = idx[:, 0], idx[:, 1], idx[:, 2]
    c000 = field[i, j, k][:, None, None, None]
    c100 = field[i + 1, j, k][:, None, None, None]
    c010 = field[i, j + 1, k][:, None, None, None]
    c001 = field[i, j, k + 1][:, None, None, None]
    c110 = field[i + 1, j + 1, k][:, None, None, None]
    c101 = field[i + 1, j, k + 1][:, None, None, None]
    c011 = field[i, j + 1, k + 1][:, None, None, None]
    c111 = field[i + 1, j + 1, k + 1][:, None, None, None]
    fx = offs[None, :, None, None]
    fy = offs[None, None, :, None]
    fz = offs[None, None, None, :]
    out = ((c000 * (1 - fx) + c100 * fx) * (1 - fy)
           + (c010 * (1 - fx) + c110 * fx) * fy) * (1 - fz) \
        + ((c001 * (1 - fx) + c101 * fx) * (1 - fy)
           + (c011 * (1 - fx) + c111 * fx) * fy) * fz
    return out.reshape(len(idx), -1)


def _check_ball_inside_image(triple: HarmonicTriple, p_star: np.ndarray, D: float,
                             margin: float = 0.5):
    """The image ball must stay clear of the image of the grid boundary."""
    u = triple.u
    worst = np.inf
    for ax in range(3):
        for side in (1, -2):
            face = np.stack([np.take(u[j], side, axis=ax) for j in range(3)], axis=-1)
            d = np.min(np.linalg.norm(face - p_star, axis=-1))
            worst = min(worst, float(d))
    if worst < D + margin:
        raise ValueError(
            f"ball of radius D={D} reaches within {worst:.3f} of the image boundary")


def image_coverage(region: RegularRegion, triple: HarmonicTriple, D: float,
                   voxel: float, base_index=None) -> ImageRaster:
    """Uncovered volume |B(p*, D) \\ Y| via rasterization of the chart image."""
    return rasterize_image(region, triple, D, voxel, base_index)


def weak_volume_integrand(region: RegularRegion, triple: HarmonicTriple, D: float,
                          voxel: float, base_index=None) -> float:
    """Integral of |chi_Y sqrt(det g) - 1| over B(p*, D)."""
    return rasterize_image(region, triple, D, voxel, base_index).weak_volume_integrand


# -- injectivity probe -------------------------------------------------------


def injectivity_probe(region: RegularRegion, triple: HarmonicTriple,
                      n_pairs: int = 10_000, rng=None, flag_below: float = 0.5):
    """Minimum of |U(y) - U(z)| / |y - z| over random node pairs in the mask
    at grid distance >= 2h; a small ratio flags a possible chart fold."""
    grid = triple.grid
    if rng is None:
        rng = np.random.default_rng(0)
    nodes = np.array(np.nonzero(region.mask & grid.interior(1))).T
    if len(nodes) < 2:
        raise ValueError("mask too small for the injectivity probe")
    ratios = []
    need = n_pairs
    while need > 0:
        take = min(4 * need, 200_000)
        ia = rng.integers(0, len(nodes), take)
        ib = rng.integers(0, len(nodes), take)
        pa, pb = nodes[ia], nodes[ib]
        d_grid = np.linalg.norm((pa - pb) * grid.h, axis=1)
        ok = d_grid >= 2.0 * grid.h
        pa, pb, d_grid = pa[ok][:need], pb[ok][:need], d_grid[ok][:need]
        ua = np.stack([triple.u[j][pa[:, 0], pa[:, 1], pa[:, 2]] for j in range(3)], axis=1)
        ub = np.stack([triple.u[j][pb[:, 0], pb[:, 1], pb[:, 2]] for j in range(3)], axis=1)
        ratios.append(np.linalg.norm(ua - ub, axis=1) / d_grid)
        need -= len(pa)
    ratios = np.concatenate(ratios)
    r_min = float(np.min(ratios))
    return r_min, r_min < flag_below
