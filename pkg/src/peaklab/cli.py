"""Experiment driver: JSON configs in, manifests/CSVs/snapshots out.

Subcommands mirror the experiment kinds (solve, sweep, green, robin,
pohozaev, concentration, report).  Every run validates its whole config
up front, with unknown keys rejected by name, writes a manifest before
any compute, and flushes CSV rows as they are produced, so interrupted
runs keep their partial results.  A run's directory is named by a hash
of its fully defaulted config: rerunning the same config overwrites the
same files and reproduces every numeric CSV column byte for byte.  The
wall-clock ``seconds`` column is the single documented exception, and
the manifest carries timestamps by design.

Grid sweeps solve each p from a cold start so the numbers cannot depend
on scheduling; ``--jobs`` only changes how many of those independent
solves run at once (rows are still written in p order).  The radial
path keeps its warm-started continuation chain, which is itself a fixed
function of the schedule.

Output location precedence: PEAKLAB_OUT env var, then --out, then the
config's "out" field, then ./peaklab-runs.
"""

from __future__ import annotations

import argparse
import concurrent.futures as _fut
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import concentration_report, pohozaev_check, asymptotic_fit
from .errors import ConfigError, GeometryError, NoCriticalPoint, PeaklabError
from .geometry import DomainSpec, Grid, build_grid
from .green import find_critical_points, green_bundle, probe_box_lattice, robin_map
from .leastenergy import energy_report, solve_fixed_point
from .operators import LinearSolveOptions
from .radial import radial_energy_report, radial_pohozaev, solve_radial
from . import __version__

log = logging.getLogger("peaklab.cli")

KINDS = ("solve", "sweep", "green", "robin", "pohozaev", "concentration", "report")

SWEEP_COLUMNS = (
    "p", "c_p", "cp_scaled", "gamma_p", "mass_p", "lambda_p", "L0_running",
    "energy_pplus1", "energy_scaled", "residual", "iterations", "seconds",
)

_GEOMETRY_KEY = {"ball": "R", "ellipsoid": "semiaxes", "box": "sides"}

# keys legal for every kind / per kind; anything else is rejected by name
_COMMON_KEYS = {"kind", "domain", "N", "center", "out", "deterministic", "solver"}
_KIND_KEYS = {
    "solve": {"h", "p"},
    "sweep": {"h", "p", "method", "tol"},
    "green": {"h", "source"},
    "robin": {"h", "spacing", "margin"},
    "pohozaev": {"h", "p", "method", "tol", "y"},
    "concentration": {"h", "p"},
    "report": {"h", "p", "method", "tol"},
}
_SOLVER_KEYS = {"rel_tolerance", "max_iterations", "preconditioner",
                "fp_tolerance", "fp_max_iterations"}


@dataclass
class RunConfig:
    """Validated, fully defaulted experiment description."""

    kind: str
    domain: DomainSpec
    h: float | None
    p_list: list
    method: str                    # "grid" or "radial"
    tol: float                     # radial solver tolerance
    solver: LinearSolveOptions
    fp_tolerance: float
    fp_max_iterations: int
    source: np.ndarray | None
    y: np.ndarray | None
    spacing: float | None
    margin: float | None
    out: str
    deterministic: bool
    echo: dict = field(repr=False, default_factory=dict)


def _want(raw: dict, key: str, types, where: str, default=None, required=False):
    if key not in raw:
        if required:
            raise ConfigError(f"missing required field '{where}{key}'")
        return default
    val = raw[key]
    if types is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"field '{where}{key}' must be a number, got {val!r}")
        return float(val)
    if not isinstance(val, types):
        raise ConfigError(f"field '{where}{key}' has wrong type: {val!r}")
    return val


def _point(raw, key: str, nd: int):
    if key not in raw:
        return None
    val = raw[key]
    if not isinstance(val, list) or len(val) != nd or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in val):
        raise ConfigError(f"field '{key}' must be a list of {nd} numbers")
    return np.asarray(val, dtype=float)


def parse_config(text: str, kind_hint: str | None = None) -> RunConfig:
    """Validate a JSON config document into a RunConfig.

    kind_hint is the subcommand name; a config may omit "kind" and
    inherit it, but an explicit mismatch is an error.  All defaults are
    materialized into ``echo``, which the manifest records verbatim.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg} (line {e.lineno}, column {e.colno})")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")

    kind = raw.get("kind", kind_hint)
    if kind == "full-report":
        kind = "report"
    if kind is None:
        raise ConfigError("missing required field 'kind'")
    if kind not in KINDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    if kind_hint is not None and kind != kind_hint:
        raise ConfigError(f"config kind {kind!r} does not match subcommand {kind_hint!r}")

    dom_kind = _want(raw, "domain", str, "", required=True)
    if dom_kind not in _GEOMETRY_KEY:
        raise ConfigError(f"unknown domain {dom_kind!r}; expected ball, ellipsoid or box")

    nd = _want(raw, "N", int, "", required=True)
    if isinstance(nd, bool) or nd < 3:
        raise ConfigError(f"dimension must be at least 3, got {nd}")

    geo_key = _GEOMETRY_KEY[dom_kind]
    allowed = _COMMON_KEYS | _KIND_KEYS[kind] | {geo_key}
    for key in sorted(raw):
        if key not in allowed:
            raise ConfigError(f"unknown field '{key}' for kind {kind!r} "
                              f"(domain {dom_kind!r})")

    if geo_key == "R":
        rad = _want(raw, "R", float, "", required=True)
        extents = np.full(nd, rad)
    else:
        ext = _point({geo_key: raw.get(geo_key)}, geo_key, nd) \
            if geo_key in raw else None
        if ext is None:
            raise ConfigError(f"missing required field '{geo_key}'")
        extents = ext
    center = _point(raw, "center", nd)
    domain = DomainSpec(dom_kind, nd, extents, center)

    method = _want(raw, "method", str, "", default=None)
    if method is None:
        method = "grid" if "h" in raw else "radial"
    if method not in ("grid", "radial"):
        raise ConfigError(f"field 'method' must be 'grid' or 'radial', got {method!r}")
    if method == "radial" and dom_kind != "ball":
        raise ConfigError("method 'radial' requires a ball domain")
    if kind in ("solve", "green", "robin", "concentration"):
        method = "grid"

    h = _want(raw, "h", float, "")
    if method == "grid":
        if h is None:
            raise ConfigError(f"kind {kind!r} with method 'grid' requires field 'h'")
        if h <= 0:
            raise ConfigError(f"field 'h' must be positive, got {h}")

    p_list = []
    if "p" in raw:
        pv = raw["p"]
        if isinstance(pv, (int, float)) and not isinstance(pv, bool):
            p_list = [float(pv)]
        elif isinstance(pv, list) and pv and all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in pv):
            p_list = [float(x) for x in pv]
        else:
            raise ConfigError("field 'p' must be a positive number or list of numbers")
        if any(x <= 0 for x in p_list):
            raise ConfigError("field 'p' entries must be positive")
        if any(b <= a for a, b in zip(p_list, p_list[1:])):
            raise ConfigError("field 'p' must be strictly increasing")
    if kind in ("solve", "sweep", "pohozaev", "concentration", "report"):
        if not p_list:
            raise ConfigError(f"kind {kind!r} requires field 'p'")
        if kind == "solve" and len(p_list) != 1:
            raise ConfigError("kind 'solve' takes a single p value")

    tol = _want(raw, "tol", float, "", default=1e-10)
    if tol <= 0:
        raise ConfigError(f"field 'tol' must be positive, got {tol}")

    sraw = raw.get("solver", {})
    if not isinstance(sraw, dict):
        raise ConfigError("field 'solver' must be an object")
    for key in sorted(sraw):
        if key not in _SOLVER_KEYS:
            raise ConfigError(f"unknown field 'solver.{key}'")
    solver = LinearSolveOptions(
        rel_tolerance=_want(sraw, "rel_tolerance", float, "solver.", default=1e-10),
        max_iterations=_want(sraw, "max_iterations", int, "solver.", default=None),
        preconditioner=_want(sraw, "preconditioner", str, "solver.",
                             default="diagonal"),
    )
    if solver.preconditioner not in ("diagonal", "none"):
        raise ConfigError("field 'solver.preconditioner' must be 'diagonal' or 'none'")
    fp_tolerance = _want(sraw, "fp_tolerance", float, "solver.", default=1e-8)
    fp_max_iterations = _want(sraw, "fp_max_iterations", int, "solver.", default=300)

    source = _point(raw, "source", nd)
    y = _point(raw, "y", nd)

    spacing = _want(raw, "spacing", float, "")
    if kind == "robin":
        if spacing is None:
            raise ConfigError("kind 'robin' requires field 'spacing'")
        if spacing <= 0:
            raise ConfigError(f"field 'spacing' must be positive, got {spacing}")
    margin = _want(raw, "margin", float, "")

    out = _want(raw, "out", str, "", default="peaklab-runs")
    deterministic = raw.get("deterministic", True)
    if deterministic is not True:
        raise ConfigError("field 'deterministic' must be true (seedless by design)")

    echo = {
        "kind": kind,
        "domain": dom_kind,
        "N": nd,
        geo_key: extents.tolist() if geo_key != "R" else float(extents[0]),
        "center": domain.center.tolist(),
        "method": method,
        "out": out,
        "deterministic": True,
        "solver": {
            "rel_tolerance": solver.rel_tolerance,
            "max_iterations": solver.max_iterations,
            "preconditioner": solver.preconditioner,
            "fp_tolerance": fp_tolerance,
            "fp_max_iterations": fp_max_iterations,
        },
    }
    if method == "grid":
        echo["h"] = h
    else:
        echo["tol"] = tol
    if p_list:
        echo["p"] = p_list
    if source is not None:
        echo["source"] = source.tolist()
    if y is not None:
        echo["y"] = y.tolist()
    if spacing is not None:
        echo["spacing"] = spacing
    if margin is not None:
        echo["margin"] = margin

    return RunConfig(
        kind=kind, domain=domain, h=h, p_list=p_list, method=method, tol=tol,
        solver=solver, fp_tolerance=fp_tolerance,
        fp_max_iterations=fp_max_iterations, source=source, y=y,
        spacing=spacing, margin=margin, out=out, deterministic=True, echo=echo,
    )


# -- result store -----------------------------------------------------------


def write_field_snapshot(path, grid: Grid, values: np.ndarray, name: str):
    """Bit-exact nodal dump: text header plus one hex float per line.

    Nodes are emitted in lexicographic lattice order, which is a pure
    function of the config, never of build internals.
    """
    lat = grid.lattice
    order = np.lexsort(tuple(lat[:, k] for k in range(lat.shape[1] - 1, -1, -1)))
    dom = grid.domain
    with open(path, "w") as f:
        f.write("PEAKLAB-FIELD-1\n")
        f.write(f"name={name}\n")
        f.write(f"dimension={grid.dimension}\n")
        f.write(f"domain={dom.kind} extents={','.join(repr(float(e)) for e in dom.extents)} "
                f"center={','.join(repr(float(c)) for c in dom.center)}\n")
        f.write(f"h={grid.h!r}\n")
        f.write(f"nodes={grid.n_nodes}\n")
        for i in order:
            f.write(float(values[i]).hex() + "\n")


def read_field_snapshot(path):
    """Inverse of write_field_snapshot: (header dict, values array).

    Values come back in the file's lexicographic order.
    """
    with open(path) as f:
        magic = f.readline().strip()
        if magic != "PEAKLAB-FIELD-1":
            raise ConfigError(f"{path}: not a field snapshot (magic {magic!r})")
        header = {}
        for _ in range(5):
            key, _, val = f.readline().strip().partition("=")
            header[key] = val
        n = int(header["nodes"])
        vals = np.array([float.fromhex(f.readline().strip()) for _ in range(n)])
    return header, vals


class _Store:
    """Run directory with manifest-first, flush-per-row persistence."""

    def __init__(self, root: Path, config: RunConfig):
        canonical = json.dumps(config.echo, sort_keys=True, separators=(",", ":"))
        digest = hashlib.sha256(canonical.encode()).hexdigest()[:12]
        self.dir = root / f"{config.kind}-{digest}"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.errors = []
        self.artifacts = []
        self._manifest = {
            "config": config.echo,
            "versions": {
                "python": sys.version.split()[0],
                "numpy": np.__version__,
                "peaklab": __version__,
            },
            "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "status": "running",
        }
        try:
            import scipy
            self._manifest["versions"]["scipy"] = scipy.__version__
        except ImportError:
            pass
        self._write_manifest()

    def _write_manifest(self):
        payload = dict(self._manifest)
        payload["errors"] = self.errors
        payload["artifacts"] = sorted(self.artifacts)
        (self.dir / "manifest.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def csv(self, name: str, columns):
        path = self.dir / name
        fh = open(path, "w")
        fh.write(",".join(columns) + "\n")
        fh.flush()
        self.artifacts.append(name)
        return fh

    @staticmethod
    def row(fh, values):
        fh.write(",".join(
            v if isinstance(v, str) else repr(float(v)) for v in values) + "\n")
        fh.flush()

    def snapshot(self, name: str, grid: Grid, values: np.ndarray):
        write_field_snapshot(self.dir / name, grid, values, name)
        self.artifacts.append(name)

    def error(self, exc: BaseException):
        self.errors.append(f"{type(exc).__name__}: {exc}")
        self._write_manifest()

    def finish(self, status: str):
        self._manifest["status"] = status
        self._manifest["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        self._write_manifest()


# -- experiments -------------------------------------------------------------


def _sweep_row(rep, seconds: float):
    return (rep.p, rep.c_p, rep.cp_scaled, rep.gamma_p, rep.mass_p,
            rep.lambda_p, rep.l0_running, rep.energy_pplus1,
            rep.energy_scaled, rep.residual, float(rep.iterations),
            f"{seconds:.3f}")


def _grid_solves(config: RunConfig, grid: Grid, jobs: int):
    """Yield (p, SolutionPair, seconds) in schedule order.

    Every p starts cold so results are independent of jobs; workers only
    overlap the independent solves.
    """
    def one(p):
        t0 = time.perf_counter()
        sol = solve_fixed_point(
            grid, p, tol=config.fp_tolerance,
            max_iterations=config.fp_max_iterations,
            solve_options=config.solver)
        return sol, time.perf_counter() - t0

    if jobs <= 1:
        for p in config.p_list:
            sol, dt = one(p)
            yield p, sol, dt
        return
    with _fut.ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {p: pool.submit(one, p) for p in config.p_list}
        for p in config.p_list:
            sol, dt = futures[p].result()
            yield p, sol, dt


def _radial_solves(config: RunConfig):
    """Warm-started radial continuation along the schedule."""
    warm = None
    beta = None
    for p in config.p_list:
        t0 = time.perf_counter()
        sol = solve_radial(config.domain.dimension, p,
                           radius=float(config.domain.extents[0]),
                           tol=config.tol, beta_hint=beta, warm=warm)
        if sol.diagnostics.get("method") == "shoot":
            beta = sol.diagnostics["beta_unit"]
        else:
            warm = sol
        yield p, sol, time.perf_counter() - t0


def _run_solve(config: RunConfig, store: _Store, jobs: int):
    grid = build_grid(config.domain, config.h)
    log.info("grid: %d nodes at h=%g", grid.n_nodes, grid.h)
    fh = store.csv("solve.csv", SWEEP_COLUMNS)
    for p, sol, dt in _grid_solves(config, grid, 1):
        rep = energy_report(sol)
        store.row(fh, _sweep_row(rep, dt))
        store.snapshot("u.field", grid, sol.u.values)
        store.snapshot("v.field", grid, sol.v.values)
    fh.close()


def _run_sweep(config: RunConfig, store: _Store, jobs: int):
    fh = store.csv("sweep.csv", SWEEP_COLUMNS)
    reports = []
    if config.method == "radial":
        for p, sol, dt in _radial_solves(config):
            rep = radial_energy_report(sol)
            reports.append(rep)
            store.row(fh, _sweep_row(rep, dt))
            log.info("p=%g done in %.2fs", p, dt)
    else:
        grid = build_grid(config.domain, config.h)
        log.info("grid: %d nodes at h=%g", grid.n_nodes, grid.h)
        last = None
        for p, sol, dt in _grid_solves(config, grid, jobs):
            rep = energy_report(sol)
            reports.append(rep)
            store.row(fh, _sweep_row(rep, dt))
            log.info("p=%g done in %.2fs", p, dt)
            last = sol
        if last is not None:
            store.snapshot(f"u_p{last.p:g}.field", grid, last.u.values)
            store.snapshot(f"v_p{last.p:g}.field", grid, last.v.values)
    fh.close()
    return reports


def _run_green(config: RunConfig, store: _Store, jobs: int):
    grid = build_grid(config.domain, config.h)
    y = config.source if config.source is not None else config.domain.center
    bundle = green_bundle(grid, y, options=config.solver)
    cols = tuple(f"y{k}" for k in range(grid.dimension)) + ("g_diag", "phi_diag")
    fh = store.csv("green.csv", cols)
    store.row(fh, tuple(bundle.y) + (bundle.g_diag, bundle.phi_diag))
    fh.close()
    store.snapshot("G.field", grid, bundle.G.values)
    store.snapshot("g.field", grid, bundle.g.values)
    store.snapshot("Gtilde.field", grid, bundle.Gtilde.values)
    store.snapshot("gtilde.field", grid, bundle.gtilde.values)


def _run_robin(config: RunConfig, store: _Store, jobs: int):
    grid = build_grid(config.domain, config.h)
    axes, points = probe_box_lattice(grid, config.spacing, config.margin)
    log.info("robin lattice: %s probes", len(points))
    rmap = robin_map(grid, points, options=config.solver)
    cols = tuple(f"x{k}" for k in range(grid.dimension)) + ("phi", "g_diag", "ok")
    fh = store.csv("robin.csv", cols)
    for i, pt in enumerate(points):
        store.row(fh, tuple(pt) + (rmap.phi[i], rmap.g_diag[i],
                                   "1" if rmap.ok[i] else "0"))
    fh.close()
    if not np.all(rmap.ok):
        raise PeaklabError(
            f"{int(np.count_nonzero(~rmap.ok))} probes failed: {rmap.failures[:3]}")
    shape = tuple(len(a) for a in axes)
    cols = tuple(f"x{k}" for k in range(grid.dimension)) + (
        "value", "kind", "grad_norm")
    fh = store.csv("critical_points.csv", cols)
    try:
        cps = find_critical_points(axes, rmap.phi.reshape(shape))
    except NoCriticalPoint as e:
        store.errors.append(f"NoCriticalPoint: {e}")
        log.warning("no critical points found: %s", e)
        cps = []
    for cp in cps:
        store.row(fh, tuple(cp.location) + (cp.value, cp.kind, cp.grad_norm))
    fh.close()


def _run_pohozaev(config: RunConfig, store: _Store, jobs: int):
    nd = config.domain.dimension
    if config.method == "radial":
        fh = store.csv("pohozaev.csv", ("p", "lhs", "rhs", "rel_residual"))
        for p, sol, dt in _radial_solves(config):
            lhs, rhs = radial_pohozaev(sol)
            store.row(fh, (p, lhs, rhs, abs(lhs - rhs) / abs(lhs)))
        fh.close()
        return
    grid = build_grid(config.domain, config.h)
    y = config.y if config.y is not None else config.domain.center
    cols = ("p", "lhs", "rhs", "rel_residual") + tuple(
        f"grad{k}" for k in range(nd)) + ("fallback_facets", "cal_u", "cal_v")
    fh = store.csv("pohozaev.csv", cols)
    for p, sol, dt in _grid_solves(config, grid, jobs):
        rep = pohozaev_check(sol, y)
        store.row(fh, (p, rep.lhs, rep.rhs, rep.rel_residual)
                  + tuple(rep.grad_vector)
                  + (float(rep.fallback_facets),
                     rep.flux_calibration[0], rep.flux_calibration[1]))
        log.info("p=%g rel_residual=%.4f", p, rep.rel_residual)
    fh.close()


def _run_concentration(config: RunConfig, store: _Store, jobs: int):
    grid = build_grid(config.domain, config.h)
    nd = grid.dimension
    from .analysis import MASS_RADII
    cols = ("p", "lambda_p", "card_S", "gtilde_compare") + tuple(
        f"peak{k}" for k in range(nd)) + ("peak_height", "peak_on_boundary") + tuple(
        f"mass_r{r:g}" for r in MASS_RADII) + ("mass_full",)
    fh = store.csv("concentration.csv", cols)
    last = None
    for p, sol, dt in _grid_solves(config, grid, jobs):
        first = concentration_report(sol)
        peak = first.peaks[0][0]
        bundle = green_bundle(grid, peak, options=config.solver)
        rep = concentration_report(sol, reference=bundle)
        masses = [m for _, m in rep.f_mass_profile]
        gt = rep.gtilde_compare if rep.gtilde_compare is not None else math.nan
        store.row(fh, (p, rep.lambda_p, float(rep.card_S_estimate), gt)
                  + tuple(peak)
                  + (rep.peaks[0][1], 1.0 if rep.peak_on_boundary else 0.0)
                  + tuple(masses))
        log.info("p=%g card_S=%d gtilde_compare=%s", p, rep.card_S_estimate, gt)
        last = (sol, rep)
    if last is not None:
        sol, rep = last
        store.snapshot(f"w_p{sol.p:g}.field", grid, rep.w.values)
    fh.close()


def _run_report(config: RunConfig, store: _Store, jobs: int):
    reports = _run_sweep(config, store, jobs)
    fit = asymptotic_fit(reports)
    fh = store.csv("fit.csv", ("name", "q_inf", "a_log", "b_inv", "target", "rel_gap"))
    for row in fit.rows:
        store.row(fh, (row.name, row.q_inf, row.a_log, row.b_inv,
                       row.target, row.rel_gap))
    fh.close()
    lines = [f"dimension N = {fit.dimension}",
             f"L0 = {fit.L0!r} in [{fit.L0_bracket[0]!r}, {fit.L0_bracket[1]!r}]"]
    for row in fit.rows:
        lines.append(f"{row.name}: fitted limit {row.q_inf!r} vs target "
                     f"{row.target!r} (relative gap {row.rel_gap:.4f})")
    (store.dir / "report.txt").write_text("\n".join(lines) + "\n")
    store.artifacts.append("report.txt")


_RUNNERS = {
    "solve": _run_solve,
    "sweep": _run_sweep,
    "green": _run_green,
    "robin": _run_robin,
    "pohozaev": _run_pohozaev,
    "concentration": _run_concentration,
    "report": _run_report,
}


def run(config: RunConfig, out_override: str | None = None, jobs: int = 1) -> int:
    """Execute a validated config; returns the process exit code.

    0 on success, 2 when the compute phase raises any package error
    (whatever was already flushed stays on disk), and setup problems
    propagate as exceptions for main() to map to exit code 1.
    """
    env_out = os.environ.get("PEAKLAB_OUT")
    root = Path(env_out or out_override or config.out)
    store = _Store(root, config)
    log.info("run directory: %s", store.dir)
    try:
        _RUNNERS[config.kind](config, store, max(1, jobs))
    except (GeometryError, ConfigError) as e:
        # config passed validation but the setup it describes is unbuildable
        store.error(e)
        store.finish("failed")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except PeaklabError as e:
        store.error(e)
        store.finish("failed")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    store.finish("ok")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="peaklab",
        description="cut-cell laboratory for a semilinear system with "
                    "large exponents")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", required=True, help="path to JSON config")
        sp.add_argument("--out", default=None, help="output directory root")
        sp.add_argument("--jobs", type=int, default=1,
                        help="max concurrent solves (grid schedules only)")
        sp.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s")

    try:
        text = Path(args.config).read_text()
    except OSError as e:
        print(f"error: cannot read config: {e}", file=sys.stderr)
        return 1
    try:
        config = parse_config(text, kind_hint=args.command)
        return run(config, out_override=args.out, jobs=args.jobs)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except PeaklabError as e:
        # geometry/setup failures before the store exists
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
