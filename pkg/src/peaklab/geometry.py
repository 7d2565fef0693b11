"""Domains, cut-cell grids, boundary facets and volume quadrature.

A Grid is the set of lattice points c + k*h (k integer) strictly inside
a convex domain in R^N, N >= 3. Along each axis a node either sees an
interior neighbour at distance h or records the exact cut distance
delta in (0, h] to the boundary crossing. Those per-axis distances
drive three things:

* node volumes: product over axes of the dual-cell extent (h/2 toward
  interior neighbours, the full cut distance toward the boundary), a
  first-order boundary-aware cell volume used by ``integrate``;
* the symmetric flux stencil built here and consumed by
  ``peaklab.operators`` (S_ij = -F_ij/dist with F_ij the transverse
  cut-cell face weight, so S is symmetric positive definite while the
  interior rows reduce to the standard (2N+1)-point stencil);
* the boundary lift used for inhomogeneous Dirichlet data: every cut
  face stores its coefficient and the exact crossing point.

Boundary facets for surface quadrature come from a structured
latitude-longitude parameterization (balls, ellipsoids) or face
subdivision (boxes), never from the Cartesian grid, so facet normals
and weights are smooth functions of position.

Node ordering is lexicographic in the integer lattice coordinates and
therefore deterministic; rebuilding the same (domain, h) reproduces
bit-identical arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyGrid, GeometryError, ShapeMismatch, UnsupportedDomain

# Cut distances below this fraction of h are snapped up to keep the
# stencil conditioning bounded; the boundary moves by < CUT_FLOOR*h.
CUT_FLOOR = 1e-2


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class DomainSpec:
    """Convex domain: 'ball', 'ellipsoid' or 'box' in R^N, N >= 3.

    ``extents`` means radius (ball), semiaxes (ellipsoid) or full edge
    lengths (box). ``center`` defaults to the origin.
    """

    kind: str
    dimension: int
    extents: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        if self.dimension < 3:
            raise GeometryError(f"dimension must be >= 3, got {self.dimension}")
        if self.kind not in ("ball", "ellipsoid", "box"):
            raise GeometryError(f"unknown domain kind {self.kind!r}")
        ext = np.asarray(self.extents, dtype=float)
        if self.kind == "ball":
            ext = np.full(self.dimension, float(ext.reshape(-1)[0]))
        if ext.shape != (self.dimension,):
            raise GeometryError(
                f"extents shape {ext.shape} does not match dimension {self.dimension}"
            )
        if not np.all(ext > 0):
            raise GeometryError("extents must be positive")
        cen = np.zeros(self.dimension) if self.center is None else np.asarray(self.center, float)
        if cen.shape != (self.dimension,):
            raise GeometryError("center shape does not match dimension")
        object.__setattr__(self, "extents", ext)
        object.__setattr__(self, "center", cen)
        ext.setflags(write=False)
        cen.setflags(write=False)

    # -- membership ---------------------------------------------------

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Strict interior test, vectorized over rows of ``points``."""
        x = np.atleast_2d(np.asarray(points, float)) - self.center
        if self.kind == "box":
            return np.all(np.abs(x) < self.extents / 2.0, axis=1)
        scaled = x / self.extents
        return np.einsum("ij,ij->i", scaled, scaled) < 1.0

    def boundary_margin(self, points: np.ndarray) -> np.ndarray:
        """Lower bound on distance to the boundary (exact for ball/box).

        For ellipsoids uses (1 - rho(x)) * min(semiaxes) with rho the
        ellipsoidal gauge, a valid inscribed-ball radius.
        """
        x = np.atleast_2d(np.asarray(points, float)) - self.center
        if self.kind == "box":
            return np.min(self.extents / 2.0 - np.abs(x), axis=1)
        if self.kind == "ball":
            return self.extents[0] - np.linalg.norm(x, axis=1)
        rho = np.sqrt(np.einsum("ij,ij->i", x / self.extents, x / self.extents))
        return (1.0 - rho) * np.min(self.extents)

    def axis_cut(self, points: np.ndarray, axis: int, sign: int) -> np.ndarray:
        """Distance along sign*e_axis from interior points to the boundary."""
        x = np.atleast_2d(np.asarray(points, float)) - self.center
        if self.kind == "box":
            half = self.extents[axis] / 2.0
            return half - sign * x[:, axis]
        a = self.extents
        xs = x / a
        quad = np.einsum("ij,ij->i", xs, xs)
        xa = xs[:, axis]
        disc = xa * xa + 1.0 - quad
        disc = np.maximum(disc, 0.0)
        return a[axis] * (-sign * xa + np.sqrt(disc))

    def boundary_normal(self, points: np.ndarray) -> np.ndarray:
        """Outward unit normal at boundary points, one row per point.

        Ball/ellipsoid: normalized gauge gradient x_i/a_i^2.  Box: the
        axis of the nearest face (ties broken by the first axis), so
        values on edges/corners pick one incident face.
        """
        x = np.atleast_2d(np.asarray(points, float)) - self.center
        if self.kind == "box":
            half = self.extents / 2.0
            gap = half - np.abs(x)
            axis = np.argmin(gap, axis=1)
            n = np.zeros_like(x)
            rows = np.arange(x.shape[0])
            n[rows, axis] = np.sign(x[rows, axis])
            zero = n[rows, axis] == 0.0
            n[rows[zero], axis[zero]] = 1.0
            return n
        w = x / (self.extents * self.extents)
        norms = np.linalg.norm(w, axis=1, keepdims=True)
        return w / np.maximum(norms, 1e-300)

    # -- analytic quantities -------------------------------------------

    def volume(self) -> float:
        if self.kind == "box":
            return float(np.prod(self.extents))
        n = self.dimension
        unit = math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)
        return float(unit * np.prod(self.extents))

    def inradius(self) -> float:
        if self.kind == "box":
            return float(np.min(self.extents) / 2.0)
        return float(np.min(self.extents))

    @property
    def is_smooth(self) -> bool:
        """Box boundaries have edges/corners; documented first-order there."""
        return self.kind != "box"


def ball(radius: float, dimension: int, center=None) -> DomainSpec:
    return DomainSpec("ball", dimension, np.full(dimension, float(radius)), center)


def ellipsoid(semiaxes, center=None) -> DomainSpec:
    semiaxes = np.asarray(semiaxes, float)
    return DomainSpec("ellipsoid", len(semiaxes), semiaxes, center)


def box(extents, center=None) -> DomainSpec:
    extents = np.asarray(extents, float)
    return DomainSpec("box", len(extents), extents, center)


# ---------------------------------------------------------------------------
# grid


@dataclass
class Grid:
    """Cut-cell lattice grid over a DomainSpec; immutable after build.

    Stencil arrays are stored in symmetric flux form (matrix S); the
    negative Laplacian is V^{-1} S with V the node volumes. Directions
    are indexed d = 0..2N-1 with axis d//2 and sign +1 for even d.
    """

    domain: DomainSpec
    h: float
    lattice: np.ndarray          # (n, N) int32 integer coordinates
    coords: np.ndarray           # (n, N) float positions
    node_volume: np.ndarray      # (n,) cut-cell volumes
    kmin: np.ndarray             # (N,) lattice origin of the bounding box
    box_shape: tuple
    node_id_box: np.ndarray      # dense int32 lookup, -1 outside
    stencil_diag: np.ndarray     # (n,) diagonal of S
    stencil_idx: np.ndarray      # (2N, n) int32 neighbour ids (self at cuts)
    stencil_coef: np.ndarray     # (2N, n) off-diagonal S entries (0 at cuts)
    cut_node: np.ndarray         # (C,) int32 node owning each cut face
    cut_dir: np.ndarray          # (C,) int8 direction index
    cut_dist: np.ndarray         # (C,) distance to the crossing, in (0, h]
    cut_coef: np.ndarray         # (C,) S-form coefficient F/dist of the face
    cut_point: np.ndarray        # (C, N) boundary crossing positions
    boundary_adjacent: np.ndarray  # (n,) bool, node has at least one cut
    _origin: np.ndarray = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def origin(self) -> np.ndarray:
        """Position of lattice index kmin (corner of the bounding box)."""
        return self._origin

    def cut_distance_table(self):
        """Per-axis boundary cut data as a dict of parallel arrays."""
        return {
            "node": self.cut_node,
            "axis": (self.cut_dir // 2).astype(np.int8),
            "sign": np.where(self.cut_dir % 2 == 0, 1, -1).astype(np.int8),
            "distance": self.cut_dist,
            "point": self.cut_point,
        }

    # -- interpolation --------------------------------------------------

    def sample_multilinear(self, values: np.ndarray, points: np.ndarray):
        """Multilinear interpolation of nodal values at arbitrary points.

        Nodes outside the grid contribute zero (Dirichlet extension).
        Returns (samples, complete) where complete marks points whose
        2^N surrounding corners are all interior nodes.
        """
        values = np.asarray(values, float)
        if values.shape != (self.n_nodes,):
            raise ShapeMismatch(
                f"field has {values.shape}, grid has {self.n_nodes} nodes"
            )
        pts = np.atleast_2d(np.asarray(points, float))
        nd = self.dimension
        rel = (pts - self._origin) / self.h
        base = np.floor(rel).astype(np.int64)
        frac = rel - base
        out = np.zeros(len(pts))
        complete = np.ones(len(pts), dtype=bool)
        shape = np.asarray(self.box_shape)
        for corner in range(1 << nd):
            offs = np.array([(corner >> a) & 1 for a in range(nd)], dtype=np.int64)
            idx = base + offs
            inside_box = np.all((idx >= 0) & (idx < shape), axis=1)
            flat = np.zeros(len(pts), dtype=np.int64)
            if inside_box.any():
                flat[inside_box] = np.ravel_multi_index(
                    idx[inside_box].T, self.box_shape
                )
            ids = np.where(inside_box, self.node_id_box.ravel()[flat], -1)
            weight = np.prod(np.where(offs > 0, frac, 1.0 - frac), axis=1)
            have = ids >= 0
            out[have] += weight[have] * values[ids[have]]
            complete &= have | (weight <= 0.0)
        return out, complete

    def nearest_node(self, point: np.ndarray) -> int:
        """Index of the interior node closest to ``point`` (euclidean)."""
        d2 = np.einsum(
            "ij,ij->i", self.coords - point, self.coords - point
        )
        return int(np.argmin(d2))


def _cell_volumes(domain: DomainSpec, h: float, coords, side_len) -> np.ndarray:
    """Measure of each node's dual cell intersected with the domain.

    The cell spans h/2 toward interior neighbours and the full cut
    distance toward the boundary; adjacent cells never overlap. Cells
    that provably fit inside the domain get the exact product volume;
    the rest are measured by a deterministic midpoint sub-lattice
    (m^N points), which keeps the total within O(h/m) of |Omega|.
    """
    nd = domain.dimension
    n = len(coords)
    lo = np.stack([side_len[2 * a + 1] for a in range(nd)], axis=1)
    hi = np.stack([side_len[2 * a] for a in range(nd)], axis=1)
    product = np.prod(lo + hi, axis=1)
    if domain.kind == "box":
        return product  # cells tile a box exactly
    corner = np.sqrt(np.sum(np.maximum(lo, hi) ** 2, axis=1))
    needs = domain.boundary_margin(coords) < corner
    if not needs.any():
        return product
    m = 4 if nd >= 4 else 6
    steps = (np.arange(m) + 0.5) / m
    mesh = np.meshgrid(*([steps] * nd), indexing="ij")
    unit = np.stack([g.reshape(-1) for g in mesh], axis=1)  # (m^nd, nd)
    volume = product.copy()
    which = np.nonzero(needs)[0]
    chunk = max(1, 2_000_000 // len(unit))
    for start in range(0, len(which), chunk):
        sel = which[start:start + chunk]
        span = lo[sel] + hi[sel]
        pts = (
            coords[sel][:, None, :]
            - lo[sel][:, None, :]
            + unit[None, :, :] * span[:, None, :]
        )
        inside = domain.contains(pts.reshape(-1, nd)).reshape(len(sel), -1)
        frac = np.maximum(inside.mean(axis=1), 1e-3)
        volume[sel] = frac * product[sel]
    return volume


def build_grid(domain: DomainSpec, h: float) -> Grid:
    """Enumerate interior lattice nodes and assemble the cut-cell stencil."""
    if h <= 0:
        raise GeometryError(f"spacing must be positive, got {h}")
    nd = domain.dimension
    half = domain.extents if domain.kind != "box" else domain.extents / 2.0
    kmin = np.floor((-half) / h).astype(np.int64) - 1
    kmax = np.ceil(half / h).astype(np.int64) + 1
    box_shape = tuple((kmax - kmin + 1).astype(int))
    n_box = int(np.prod(box_shape))
    if n_box > 200_000_000:
        raise GeometryError(f"bounding lattice too large ({n_box} cells)")

    axes = [kmin[a] + np.arange(box_shape[a], dtype=np.int64) for a in range(nd)]
    mesh = np.meshgrid(*axes, indexing="ij")
    lattice_all = np.stack([m.reshape(-1) for m in mesh], axis=1)
    coords_all = domain.center + lattice_all * h
    inside = domain.contains(coords_all)
    if not inside.any():
        raise EmptyGrid(f"h={h} leaves no lattice point inside the domain")

    node_id_box = np.full(n_box, -1, dtype=np.int32)
    node_id_box[inside] = np.arange(int(inside.sum()), dtype=np.int32)
    node_id_box = node_id_box.reshape(box_shape)
    lattice = lattice_all[inside].astype(np.int32)
    coords = coords_all[inside]
    n = len(coords)

    # neighbour lookup per direction, -1 where the neighbour is not interior
    ndir = 2 * nd
    nbr = np.full((ndir, n), -1, dtype=np.int32)
    grid_ids = node_id_box.reshape(box_shape)
    for a in range(nd):
        for step, d in ((1, 2 * a), (-1, 2 * a + 1)):
            shifted = np.full(box_shape, -1, dtype=np.int32)
            src = [slice(None)] * nd
            dst = [slice(None)] * nd
            if step == 1:
                src[a] = slice(1, None)
                dst[a] = slice(None, -1)
            else:
                src[a] = slice(None, -1)
                dst[a] = slice(1, None)
            shifted[tuple(dst)] = grid_ids[tuple(src)]
            nbr[d] = shifted.reshape(-1)[inside]

    # per-direction distances: h to interior neighbours, cut distance else
    dist = np.full((ndir, n), h, dtype=float)
    cuts = []
    for d in range(ndir):
        a, sign = d // 2, (1 if d % 2 == 0 else -1)
        missing = nbr[d] < 0
        if not missing.any():
            continue
        pts = coords[missing]
        delta = domain.axis_cut(pts, a, sign)
        # the crossing must sit within one spacing; snap tiny cuts
        delta = np.clip(delta, CUT_FLOOR * h, h)
        dist[d, missing] = delta
        cuts.append((d, np.nonzero(missing)[0], delta))

    # per-axis cell extents: interior sides own half a spacing, cut sides
    # reach the boundary
    interior_side = nbr >= 0
    side_len = np.where(interior_side, 0.5 * h, dist)
    t_axis = np.empty((nd, n))
    for a in range(nd):
        t_axis[a] = side_len[2 * a] + side_len[2 * a + 1]
    node_volume = _cell_volumes(domain, h, coords, side_len)

    # symmetric flux stencil: S_ij = -F_ij/h with transverse face weight
    # F_ij = prod_{a != b} (t_i,a + t_j,a)/2 ; cut faces go to the diagonal
    diag = np.zeros(n)
    stencil_idx = np.empty((ndir, n), dtype=np.int32)
    stencil_coef = np.zeros((ndir, n))
    self_idx = np.arange(n, dtype=np.int32)
    for d in range(ndir):
        b = d // 2
        j = nbr[d]
        have = j >= 0
        stencil_idx[d] = np.where(have, j, self_idx)
        if have.any():
            jj = j[have]
            tt = 0.5 * (t_axis[:, have] + t_axis[:, jj])
            face = np.prod(np.delete(tt, b, axis=0), axis=0)
            coef = -face / h
            stencil_coef[d, have] = coef
            diag[have] -= coef

    cut_node_l, cut_dir_l, cut_dist_l, cut_coef_l, cut_point_l = [], [], [], [], []
    for d, idx, delta in cuts:
        b, sign = d // 2, (1 if d % 2 == 0 else -1)
        t_sub = t_axis[:, idx]
        face = np.prod(np.delete(t_sub, b, axis=0), axis=0)
        coef = face / delta
        diag[idx] += coef
        pts = coords[idx].copy()
        pts[:, b] += sign * delta
        cut_node_l.append(idx.astype(np.int32))
        cut_dir_l.append(np.full(len(idx), d, dtype=np.int8))
        cut_dist_l.append(delta)
        cut_coef_l.append(coef)
        cut_point_l.append(pts)

    if cut_node_l:
        cut_node = np.concatenate(cut_node_l)
        cut_dir = np.concatenate(cut_dir_l)
        cut_dist = np.concatenate(cut_dist_l)
        cut_coef = np.concatenate(cut_coef_l)
        cut_point = np.concatenate(cut_point_l)
    else:
        cut_node = np.empty(0, dtype=np.int32)
        cut_dir = np.empty(0, dtype=np.int8)
        cut_dist = np.empty(0)
        cut_coef = np.empty(0)
        cut_point = np.empty((0, nd))

    boundary_adjacent = np.zeros(n, dtype=bool)
    boundary_adjacent[cut_node] = True

    grid = Grid(
        domain=domain,
        h=float(h),
        lattice=lattice,
        coords=coords,
        node_volume=node_volume,
        kmin=kmin,
        box_shape=box_shape,
        node_id_box=node_id_box,
        stencil_diag=diag,
        stencil_idx=stencil_idx,
        stencil_coef=stencil_coef,
        cut_node=cut_node,
        cut_dir=cut_dir,
        cut_dist=cut_dist,
        cut_coef=cut_coef,
        cut_point=cut_point,
        boundary_adjacent=boundary_adjacent,
        _origin=domain.center + kmin * h,
    )
    for arr in (
        grid.lattice, grid.coords, grid.node_volume, grid.node_id_box,
        grid.stencil_diag, grid.stencil_idx, grid.stencil_coef,
        grid.cut_node, grid.cut_dir, grid.cut_dist, grid.cut_coef,
        grid.cut_point, grid.boundary_adjacent,
    ):
        arr.setflags(write=False)
    return grid


# ---------------------------------------------------------------------------
# volume quadrature


def integrate(values: np.ndarray, grid: Grid) -> float:
    """Sum of nodal values times cut-cell volumes (first-order quadrature)."""
    values = np.asarray(values, float)
    if values.shape != (grid.n_nodes,):
        raise ShapeMismatch(
            f"field has shape {values.shape}, grid has {grid.n_nodes} nodes"
        )
    return float(np.dot(values, grid.node_volume))


# ---------------------------------------------------------------------------
# boundary facets


@dataclass(frozen=True)
class FacetSet:
    """Structured surface quadrature: midpoints, outward unit normals, weights."""

    position: np.ndarray  # (M, N)
    normal: np.ndarray    # (M, N)
    weight: np.ndarray    # (M,)

    def __len__(self):
        return len(self.weight)

    @property
    def total_area(self) -> float:
        return float(self.weight.sum())


def _sphere_mesh(nd: int, counts):
    """Midpoint tensor mesh on S^{nd-1}: unit points and quadrature weights."""
    # angles t_1..t_{nd-2} in (0,pi), t_{nd-1} in (0,2pi); measure
    # prod_k sin^{nd-1-k}(t_k) dt
    grids, wgts = [], []
    for k in range(1, nd):
        m = counts[k - 1]
        hi = 2.0 * math.pi if k == nd - 1 else math.pi
        step = hi / m
        mid = (np.arange(m) + 0.5) * step
        w = np.full(m, step)
        if k < nd - 1:
            w = w * np.sin(mid) ** (nd - 1 - k)
        grids.append(mid)
        wgts.append(w)
    mesh = np.meshgrid(*grids, indexing="ij")
    weight = np.ones(mesh[0].shape)
    for w, m in zip(wgts, np.meshgrid(*[np.arange(len(g)) for g in grids], indexing="ij")):
        weight = weight * w[m]
    angles = [m.reshape(-1) for m in mesh]
    weight = weight.reshape(-1)
    pts = np.empty((len(weight), nd))
    sin_prod = np.ones(len(weight))
    for k in range(nd - 1):
        pts[:, k] = sin_prod * np.cos(angles[k])
        sin_prod = sin_prod * np.sin(angles[k])
    pts[:, nd - 1] = sin_prod
    return pts, weight


def boundary_facets(domain: DomainSpec, spacing: float) -> FacetSet:
    """Tile the boundary with facets of diameter about ``spacing``."""
    if spacing <= 0:
        raise GeometryError("facet spacing must be positive")
    nd = domain.dimension
    if domain.kind in ("ball", "ellipsoid"):
        scale = float(np.max(domain.extents))
        counts = []
        for k in range(1, nd):
            arc = (2.0 if k == nd - 1 else 1.0) * math.pi * scale
            counts.append(max(4, int(math.ceil(arc / spacing))))
        u, w_sphere = _sphere_mesh(nd, counts)
        a = domain.extents
        position = domain.center + u * a
        # surface element of {A u}: |det A| * |A^{-T} u| per unit sphere area
        ainv_u = u / a
        norm = np.linalg.norm(ainv_u, axis=1)
        weight = float(np.prod(a)) * norm * w_sphere
        normal = ainv_u / norm[:, None]
        return FacetSet(position, normal, weight)
    if domain.kind == "box":
        # 2N faces, each an (N-1)-box tiled by midpoint subcells; weights
        # are exact per face, first-order behaviour only at edges/corners
        pos_l, nrm_l, w_l = [], [], []
        half = domain.extents / 2.0
        for a in range(nd):
            others = [b for b in range(nd) if b != a]
            axes_pts, axes_len = [], []
            for b in others:
                m = max(1, int(math.ceil(domain.extents[b] / spacing)))
                step = domain.extents[b] / m
                axes_pts.append(-half[b] + (np.arange(m) + 0.5) * step)
                axes_len.append(step)
            mesh = np.meshgrid(*axes_pts, indexing="ij") if others else []
            count = int(np.prod([len(p) for p in axes_pts])) if others else 1
            w_face = float(np.prod(axes_len)) if others else 1.0
            for sign in (+1, -1):
                pts = np.zeros((count, nd))
                pts[:, a] = sign * half[a]
                for b, m in zip(others, mesh):
                    pts[:, b] = m.reshape(-1)
                nrm = np.zeros((count, nd))
                nrm[:, a] = sign
                pos_l.append(domain.center + pts)
                nrm_l.append(nrm)
                w_l.append(np.full(count, w_face))
        return FacetSet(np.concatenate(pos_l), np.concatenate(nrm_l), np.concatenate(w_l))
    raise UnsupportedDomain(f"no facet rule for domain kind {domain.kind!r}")
