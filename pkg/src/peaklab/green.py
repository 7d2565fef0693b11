"""Green function of the cut-cell Laplacian and the diagonal map that
locates concentration points.

Everything rides on singularity splitting: the discrete solver never sees
a delta source.  G(., y) = Phi_N(|x-y|) + g(x, y) with Phi_N the free-space
fundamental solution, so g is harmonic with smooth boundary data -Phi_N and
one Dirichlet solve per source point yields the regular part directly,
including its diagonal value g(y, y).

The log-order correction solves -Lap Gtilde = G^q with q = 2/(N-2).  Its
singularity is -C_N log|x-y|, and -Lap of that equals C_N (N-2) |x-y|^{-2},
which cancels Phi_N^q exactly: both are the same coefficient times the same
power of r (C_N (N-2) = ((N-2) omega)^{-q}).  The cancellation is used
analytically, so the remaining source G^q - Phi_N^q is mild (O(r^{N-4})
near the source, give or take a log) and gtilde again comes from one clean
Dirichlet solve.  The diagonal map phi(y) = gtilde(y, y) is sampled on
probe lattices; critical points come from Newton iteration on a multilinear
interpolant of its finite-difference gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import (
    GeometryError,
    NoCriticalPoint,
    PeaklabError,
    SourceTooCloseToBoundary,
)
from .geometry import Grid
from .operators import Field, LinearSolveOptions, solve_poisson

__all__ = [
    "Constants",
    "constants",
    "fundamental_solution",
    "GreenBundle",
    "compute_green",
    "compute_tilde_green",
    "green_bundle",
    "RobinMap",
    "robin_map",
    "probe_box_lattice",
    "CriticalPoint",
    "find_critical_points",
]

# Sources (and probes) must keep this many grid spacings of clearance from
# the boundary; the cut-cell stencil loses accuracy within two layers.
SOURCE_MARGIN_FACTOR = 3.0


@dataclass(frozen=True)
class Constants:
    """Dimension-dependent constants of the limit problem."""

    N: int
    omega: float      # area of the unit sphere S^{N-1}
    b0: float
    logC: float       # coefficient of -log|x-y| in the corrected kernel
    cp_limit: float
    Dt_limit: float


def constants(N: int) -> Constants:
    """Closed-form constants for dimension ``N >= 3``.

    omega = 2 pi^{N/2} / Gamma(N/2), b0 = N (N-2)^{N/(N-2)} omega^{2/(N-2)},
    logC = 1 / ((N-2)^{N/(N-2)} omega^{2/(N-2)}), so b0 * logC = N exactly.
    """
    N = int(N)
    if N < 3:
        raise GeometryError(f"constants require dimension >= 3, got {N}")
    omega = 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)
    shared = (N - 2.0) ** (N / (N - 2.0)) * omega ** (2.0 / (N - 2.0))
    b0 = N * shared
    logC = 1.0 / shared
    cp_limit = (N * b0 * math.e / (N - 2.0)) ** ((N - 2.0) / N)
    Dt_limit = ((N - 2.0) / (N * math.e * b0)) ** ((N - 2.0) / N)
    return Constants(N=N, omega=omega, b0=b0, logC=logC,
                     cp_limit=cp_limit, Dt_limit=Dt_limit)


def fundamental_solution(r, dimension: int):
    """Phi_N(r) = 1 / ((N-2) omega_{N-1} r^{N-2}); +inf at r = 0."""
    cst = constants(dimension)
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        out = 1.0 / ((dimension - 2.0) * cst.omega * r ** (dimension - 2.0))
    return out


def _check_source(grid: Grid, y: np.ndarray) -> None:
    inside = bool(grid.domain.contains(y[None, :])[0])
    margin = float(grid.domain.boundary_margin(y[None, :])[0])
    need = SOURCE_MARGIN_FACTOR * grid.h
    if not inside or margin < need:
        raise SourceTooCloseToBoundary(
            f"source at {y.tolist()} has boundary margin {margin:.4g}, "
            f"needs >= {need:.4g} (3h)")


def compute_green(grid: Grid, y, options: LinearSolveOptions | None = None,
                  x0=None):
    """Green function with pole at ``y``: returns ``(G, g, g_diag)``.

    g solves the discrete Laplace problem with zero interior source and
    boundary data -Phi_N(|x-y|), imposed through the cut-cell boundary
    term; G = Phi_N + g.  g is smooth at y, so g_diag is the plain nodal
    value at the node nearest y.  ``x0`` warm-starts the linear solve.
    """
    y = np.asarray(y, dtype=float).reshape(grid.dimension)
    _check_source(grid, y)
    r = np.linalg.norm(grid.coords - y, axis=1)
    phi = fundamental_solution(r, grid.dimension)

    def bc(points):
        rb = np.linalg.norm(points - y, axis=1)
        return -fundamental_solution(rb, grid.dimension)

    g = solve_poisson(np.zeros(grid.n_nodes), grid, options=options,
                      dirichlet=bc, x0=x0)
    G = Field(grid, phi + g.values)
    g_diag = float(g.values[grid.nearest_node(y)])
    return G, g, g_diag


def compute_tilde_green(grid: Grid, y, G: Field,
                        options: LinearSolveOptions | None = None, x0=None):
    """Log-order correction: returns ``(Gtilde, gtilde, phi_diag)``.

    Solves -Lap gtilde = G^q - C_N (N-2) |x-y|^{-2} with boundary data
    gtilde = C_N log|x-y|, where q = 2/(N-2).  The subtracted term is
    exactly -Lap(-C_N log|x-y|) and cancels Phi_N^q analytically, so the
    source actually assembled is G^q - Phi_N^q, evaluated through the
    split G = Phi_N + g to dodge the cancellation:

        q = 1 (N = 4):  G - Phi = g, exact;
        else:           Phi^q * expm1(q * log1p(g / Phi)).

    At a node coinciding with y the residual source is set to 0 (it is
    integrable there; the solution perturbation is O(h^2) or better).
    phi_diag = gtilde at the node nearest y.
    """
    y = np.asarray(y, dtype=float).reshape(grid.dimension)
    _check_source(grid, y)
    nd = grid.dimension
    cst = constants(nd)
    q = 2.0 / (nd - 2.0)

    r = np.linalg.norm(grid.coords - y, axis=1)
    at_src = r < 1e-12 * grid.h
    phi = fundamental_solution(r, nd)
    with np.errstate(invalid="ignore"):
        g_vals = np.where(at_src, 0.0, G.values - phi)

    if nd == 4:
        rhs = g_vals.copy()
    else:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ratio = np.maximum(g_vals / phi, -1.0)
            rhs = phi ** q * np.expm1(q * np.log1p(ratio))
        rhs[~np.isfinite(rhs)] = 0.0
        # The residual source scales like r^{N-4} near the source; for
        # N = 3 that is singular and a node falling nearly on top of y
        # picks up an alignment-dependent spike.  Replace nodal values
        # by a fixed Gauss cell average within 2h of the source (g is
        # smooth there, so only Phi varies across the cell).
        near = (~at_src) & (r < 2.0 * grid.h)
        if np.any(near):
            gl = math.sqrt(3.0 / 5.0)
            pts_1d = np.array([-gl, 0.0, gl]) * (grid.h / 2.0)
            wts_1d = np.array([5.0, 8.0, 5.0]) / 18.0
            mesh = np.meshgrid(*([pts_1d] * nd), indexing="ij")
            offsets = np.stack([m.ravel() for m in mesh], axis=1)
            wmesh = np.meshgrid(*([wts_1d] * nd), indexing="ij")
            weights = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
            for i in np.flatnonzero(near):
                rg = np.linalg.norm(grid.coords[i] + offsets - y, axis=1)
                rg = np.maximum(rg, grid.h / 100.0)   # tame a lucky hit on y
                phig = fundamental_solution(rg, nd)
                ratio_g = np.maximum(g_vals[i] / phig, -1.0)
                fg = phig ** q * np.expm1(q * np.log1p(ratio_g))
                rhs[i] = float(np.sum(weights * fg))
    rhs[at_src] = 0.0

    def bc(points):
        rb = np.linalg.norm(points - y, axis=1)
        return cst.logC * np.log(rb)

    gtilde = solve_poisson(rhs, grid, options=options, dirichlet=bc, x0=x0)
    with np.errstate(divide="ignore"):
        log_r = np.log(r)
    Gtilde = Field(grid, -cst.logC * log_r + gtilde.values)
    phi_diag = float(gtilde.values[grid.nearest_node(y)])
    return Gtilde, gtilde, phi_diag


@dataclass
class GreenBundle:
    """Both kernels for one source point, plus their diagonal values."""

    y: np.ndarray
    G: Field
    g: Field
    Gtilde: Field
    gtilde: Field
    g_diag: float
    phi_diag: float


def green_bundle(grid: Grid, y, options: LinearSolveOptions | None = None,
                 x0_g=None, x0_gt=None) -> GreenBundle:
    """compute_green followed by compute_tilde_green at the same source."""
    y = np.asarray(y, dtype=float).reshape(grid.dimension)
    G, g, g_diag = compute_green(grid, y, options=options, x0=x0_g)
    Gtilde, gtilde, phi_diag = compute_tilde_green(grid, y, G,
                                                   options=options, x0=x0_gt)
    return GreenBundle(y=y, G=G, g=g, Gtilde=Gtilde, gtilde=gtilde,
                       g_diag=g_diag, phi_diag=phi_diag)


@dataclass
class RobinMap:
    """Sampled diagonal map phi(y) = gtilde(y, y) over a probe set."""

    probes: np.ndarray            # (m, N)
    phi: np.ndarray               # (m,), nan where a probe failed
    g_diag: np.ndarray            # (m,), nan where a probe failed
    ok: np.ndarray                # (m,) bool
    failures: list = field(default_factory=list)   # (index, message)

    def __len__(self) -> int:
        return len(self.probes)


def robin_map(grid: Grid, probe_set,
              options: LinearSolveOptions | None = None) -> RobinMap:
    """Evaluate phi(y) per probe via the two kernel solves.

    Probes are processed in order; consecutive probes warm-start each
    other's linear solves (the kernels vary smoothly with the source).
    Per-probe failures are collected, not fatal.
    """
    probes = np.atleast_2d(np.asarray(probe_set, dtype=float))
    if probes.shape[1] != grid.dimension:
        raise GeometryError(
            f"probes have dimension {probes.shape[1]}, grid has {grid.dimension}")
    m = probes.shape[0]
    phi = np.full(m, np.nan)
    gdg = np.full(m, np.nan)
    ok = np.zeros(m, dtype=bool)
    failures: list = []
    warm_g = None
    warm_gt = None
    for i in range(m):
        try:
            bundle = green_bundle(grid, probes[i], options=options,
                                  x0_g=warm_g, x0_gt=warm_gt)
        except PeaklabError as exc:
            failures.append((i, f"{type(exc).__name__}: {exc}"))
            continue
        phi[i] = bundle.phi_diag
        gdg[i] = bundle.g_diag
        ok[i] = True
        warm_g = bundle.g.values
        warm_gt = bundle.gtilde.values
    return RobinMap(probes=probes, phi=phi, g_diag=gdg, ok=ok,
                    failures=failures)


def probe_box_lattice(grid: Grid, spacing: float, margin: float | None = None):
    """Tensor probe lattice on the largest axis-aligned box whose corners
    keep ``margin`` clearance from the boundary.

    Returns ``(axes, points)`` with ``axes`` one 1D array per dimension and
    ``points`` the full lattice in C order, ready for :func:`robin_map`.
    The box is inscribed in {dist >= margin}, so on curved domains it spans
    the central candidate region rather than every margin-respecting point.
    """
    nd = grid.dimension
    if margin is None:
        margin = SOURCE_MARGIN_FACTOR * grid.h
    margin = max(float(margin), SOURCE_MARGIN_FACTOR * grid.h)
    margin *= 1.0 + 1e-9   # corners must clear the source check strictly
    if spacing < 2.0 * grid.h:
        raise GeometryError(
            f"probe spacing {spacing:.4g} below 2h = {2.0 * grid.h:.4g}")
    dom = grid.domain
    if dom.kind == "box":
        half = dom.extents / 2.0 - margin
    else:
        shrink = 1.0 - margin / float(np.min(dom.extents))
        half = shrink * dom.extents / math.sqrt(nd)
    if np.any(half <= 0):
        raise GeometryError("margin leaves no room for a probe box")
    axes = []
    for k in range(nd):
        n_k = int(math.floor(2.0 * half[k] / spacing)) + 1
        if n_k < 3:
            raise GeometryError(
                f"axis {k}: span {2 * half[k]:.4g} too small for 3 probes "
                f"at spacing >= {spacing:.4g}")
        axes.append(dom.center[k] + np.linspace(-half[k], half[k], n_k))
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    return axes, points


@dataclass
class CriticalPoint:
    location: np.ndarray
    value: float
    kind: str                  # "minimum" | "maximum" | "saddle" | "degenerate"
    hessian_eigs: np.ndarray
    grad_norm: float


def _uniform_steps(axes):
    steps = []
    for k, ax in enumerate(axes):
        ax = np.asarray(ax, dtype=float)
        if ax.ndim != 1 or ax.size < 3:
            raise GeometryError(f"axis {k} needs >= 3 probe points")
        d = np.diff(ax)
        if np.any(d <= 0) or np.ptp(d) > 1e-9 * d[0]:
            raise GeometryError(f"axis {k} is not a uniform increasing lattice")
        steps.append(float(d[0]))
    return steps


def find_critical_points(axes, values) -> list[CriticalPoint]:
    """Critical points of a function sampled on a uniform tensor lattice.

    Builds finite-difference gradient and Hessian fields on the lattice,
    interpolates them multilinearly, and runs Newton from the center of
    every cell in which each gradient component either changes sign or
    falls below threshold.  Converged points within one lattice spacing
    of each other are merged at their centroid and classified by the
    Hessian eigenvalue signs.  Points landing in the outermost half-cell
    are discarded (one-sided differences there are the least reliable;
    widen the lattice if the candidate region touches its edge).  Exact
    on quadratics (the interpolated gradient of a quadratic is its true,
    linear gradient).

    Raises NoCriticalPoint when the gradient is bounded away from zero on
    the whole lattice or Newton fails everywhere.
    """
    axes = [np.asarray(ax, dtype=float) for ax in axes]
    nd = len(axes)
    shape = tuple(ax.size for ax in axes)
    values = np.asarray(values, dtype=float).reshape(shape)
    if not np.all(np.isfinite(values)):
        raise GeometryError("lattice values contain non-finite entries")
    steps = _uniform_steps(axes)
    delta = max(steps)

    grads = np.gradient(values, *axes, edge_order=2)
    if nd == 1:
        grads = [grads]
    hess = [[None] * nd for _ in range(nd)]
    for i in range(nd):
        for j in range(nd):
            hess[i][j] = np.gradient(grads[i], axes[j], axis=j, edge_order=2)

    def interp(arr):
        return RegularGridInterpolator(axes, arr, method="linear",
                                       bounds_error=False, fill_value=None)

    g_interp = [interp(g) for g in grads]
    h_interp = [[interp(hess[i][j]) for j in range(nd)] for i in range(nd)]
    v_interp = interp(values)

    def grad_at(x):
        return np.array([gi(x[None, :])[0] for gi in g_interp])

    def hess_at(x):
        H = np.array([[h_interp[i][j](x[None, :])[0] for j in range(nd)]
                      for i in range(nd)])
        return 0.5 * (H + H.T)

    gscale = max(float(np.max(np.abs(g))) for g in grads)
    if gscale == 0.0:
        raise NoCriticalPoint("sampled map is constant on the lattice")
    thresh = 1e-7 * gscale

    # Seed cells: stack the 2^nd corner values of every gradient component.
    lo_hi = [(slice(None, -1), slice(1, None))] * nd
    seed_mask = np.ones(tuple(s - 1 for s in shape), dtype=bool)
    for g in grads:
        comp_min = np.full(seed_mask.shape, np.inf)
        comp_max = np.full(seed_mask.shape, -np.inf)
        for corner in range(2 ** nd):
            sl = tuple(lo_hi[k][(corner >> k) & 1] for k in range(nd))
            comp_min = np.minimum(comp_min, g[sl])
            comp_max = np.maximum(comp_max, g[sl])
        passes = ((comp_min <= 0.0) & (comp_max >= 0.0)) | \
                 (np.minimum(np.abs(comp_min), np.abs(comp_max)) < thresh)
        seed_mask &= passes
    seed_idx = np.argwhere(seed_mask)
    if seed_idx.size == 0:
        raise NoCriticalPoint(
            "every lattice cell has a gradient component bounded away from zero")

    lo = np.array([ax[0] for ax in axes])
    hi = np.array([ax[-1] for ax in axes])
    # One-sided differences on the outermost layer are second-order but
    # noisier; converged points are trusted only half a cell inside it.
    trust_lo = lo + 0.5 * np.array(steps)
    trust_hi = hi - 0.5 * np.array(steps)
    gtol = 1e-8 * gscale
    accepted = []
    for idx in seed_idx:
        x = np.array([0.5 * (axes[k][idx[k]] + axes[k][idx[k] + 1])
                      for k in range(nd)])
        for _ in range(60):
            gv = grad_at(x)
            H = hess_at(x)
            try:
                step = np.linalg.solve(H, -gv)
            except np.linalg.LinAlgError:
                step, *_ = np.linalg.lstsq(H, -gv, rcond=None)
            norm = float(np.linalg.norm(step))
            cap = 1.5 * delta
            if norm > cap:
                step *= cap / norm
            x = np.clip(x + step, lo, hi)
            if norm < 1e-13 * delta + 1e-15:
                break
        gv = grad_at(x)
        if float(np.linalg.norm(gv)) <= max(gtol, 1e4 * np.finfo(float).eps * gscale) \
                and np.all(x >= trust_lo) and np.all(x <= trust_hi):
            accepted.append(x)

    if not accepted:
        raise NoCriticalPoint("Newton failed to converge from every seed cell")

    # Merge duplicates within one probe spacing, centroid per cluster.
    clusters: list[list[np.ndarray]] = []
    for x in accepted:
        for cl in clusters:
            if np.linalg.norm(x - np.mean(cl, axis=0)) <= delta:
                cl.append(x)
                break
        else:
            clusters.append([x])

    out = []
    for cl in clusters:
        loc = np.mean(cl, axis=0)
        H = hess_at(loc)
        eigs = np.linalg.eigvalsh(H)
        tol = 1e-8 * max(float(np.max(np.abs(eigs))), 1e-300)
        if np.all(eigs > tol):
            kind = "minimum"
        elif np.all(eigs < -tol):
            kind = "maximum"
        elif np.any(eigs > tol) and np.any(eigs < -tol):
            kind = "saddle"
        else:
            kind = "degenerate"
        out.append(CriticalPoint(
            location=loc,
            value=float(v_interp(loc[None, :])[0]),
            kind=kind,
            hessian_eigs=eigs,
            grad_norm=float(np.linalg.norm(grad_at(loc))),
        ))
    out.sort(key=lambda cp: cp.grad_norm)
    return out
