"""Radial least-energy solver on balls.

On a ball the positive least-energy pair (u, v) is radial and solves

    -(r^{N-1} U')' = r^{N-1} V^{2/(N-2)},
    -(r^{N-1} V')' = r^{N-1} U^p,
    U'(0) = V'(0) = 0,  U(R) = V(R) = 0.

Everything here runs in tau = log r and, on top of that, in the
scaling-adapted pair

    W = e^{a tau} U,   Z = e^{b tau} V,
    a = 2(q+1)/(pq-1), b = 2(p+1)/(pq-1),  q = 2/(N-2),

which makes the system autonomous in tau. The choice is not cosmetic.
The interesting radii span hundreds of e-foldings (the mass of u^p
lives at r ~ e^{-c p} relative to the zero radius), and in the adapted
frame the whole critical profile, including the quantities W^p and
Z^q, stays O(1) for every p: the growth of u^p against the shrinking
of the peak cancels exactly. Plain (U, V) coordinates lose the tail of
V below any absolute tolerance long before the zero crossing.

Two solution regimes:

* p <= 40: two-stage shooting. Fix U(0) = 1, bisect V(0) for a
  bracket, then drive the well-conditioned matching functional
  F(V(0)) = Z at the first zero of W to zero by a guarded secant. At
  the root both components vanish at the same radius, and the exact
  two-parameter scaling symmetry moves the pair onto ball(R) (in the
  adapted frame this is a pure shift of tau).

* p > 40: shooting from one end cannot park a double close enough to
  the separatrix (trajectories peel off like e^{(N-2) tau}, so the
  needed initial precision decays like the square of the zero radius).
  The pair is instead solved as a boundary value problem by collocation
  directly on the ball, with regularity conditions at a truncated left
  end and warm-started continuation in p from the shooting regime.

All radial integrals are evaluated in the log domain (Simpson in tau
plus an analytic origin slab), so powers like u^{p+1} never overflow.
The hard ceiling near p ~ 2000 in N = 4 is the center value of v
itself leaving double range, and is raised as StiffFailure rather than
worked around.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_bvp, solve_ivp

from .errors import ExponentDegenerate, ShootFailed, StiffFailure

OMEGA_CACHE = {}

SHOOT_MAX_P = 40.0


def sphere_area(nd: int) -> float:
    """Surface measure of the unit sphere S^{nd-1}."""
    if nd not in OMEGA_CACHE:
        OMEGA_CACHE[nd] = 2.0 * math.pi ** (nd / 2.0) / math.gamma(nd / 2.0)
    return OMEGA_CACHE[nd]


@dataclass
class RadialSolution:
    """Matched radial pair on ball(radius), sampled on a log-spaced mesh.

    r_nodes[0] = 0 carries the center values; the last node is R with
    both components clamped to their boundary value 0 (pre-clamp
    endpoint residuals are kept in diagnostics). u and v are positive
    on the interior nodes and decreasing.
    """

    dimension: int
    p: float
    radius: float
    r_nodes: np.ndarray
    u: np.ndarray
    v: np.ndarray
    du_dr_end: float
    dv_dr_end: float
    shoot_params: tuple
    match_radius: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def gamma(self) -> float:
        return float(self.u[0])

    def log_uv(self):
        """(log u, log v) on the interior tau mesh, in exact log form."""
        return self.diagnostics["log_u_mesh"], self.diagnostics["log_v_mesh"]


def _scaling_exponents(nd: int, p: float):
    q = 2.0 / (nd - 2.0)
    pq1 = p * q - 1.0
    if pq1 <= 1e-12:
        raise ExponentDegenerate(f"pq - 1 = {pq1} not positive (p={p}, N={nd})")
    return q, 2.0 * (q + 1.0) / pq1, 2.0 * (1.0 + p) / pq1


def _pos_power(x: np.ndarray, power: float, cap: float = 60.0) -> np.ndarray:
    """x_+^power for bulk arrays, overflow-capped for wild Newton iterates."""
    out = np.zeros_like(x)
    pos = x > 0.0
    with np.errstate(over="ignore"):
        out[pos] = np.exp(np.minimum(power * np.log(x[pos]), cap))
    return out


# -- shooting core (p <= SHOOT_MAX_P and chain anchor) -----------------------


def _rhs_factory(nd: int, p: float):
    q, a, b = _scaling_exponents(nd, p)
    ca1 = nd - 2.0 - 2.0 * a
    ca0 = a * (nd - 2.0 - a)
    cb1 = nd - 2.0 - 2.0 * b
    cb0 = b * (nd - 2.0 - b)

    def rhs(tau, y):
        w, dw, z, dz = y
        zq = z**q if z > 0.0 else 0.0
        wp = w**p if w > 0.0 else 0.0
        return (dw, -ca1 * dw + ca0 * w - zq, dz, -cb1 * dz + cb0 * z - wp)

    return rhs


def _series_start(nd: int, p: float, beta: float):
    """Fourth-order series around the origin for U(0)=1, V(0)=beta."""
    q, a, b = _scaling_exponents(nd, p)
    bq = beta**q
    width = math.sqrt(2.0 * nd / max(p * bq, 1e-300))
    r0 = min(1e-3, 1e-2 * width)
    r2, r4 = r0 * r0, r0**4
    c = 1.0 / (2.0 * nd)
    d = 1.0 / (8.0 * nd * (nd + 2.0))
    u = 1.0 - bq * c * r2 + q * beta ** (q - 1.0) * d * r4
    v = beta - c * r2 + p * bq * d * r4
    du = -bq * 2.0 * c * r0 + 4.0 * q * beta ** (q - 1.0) * d * r0 * r2
    dv = -2.0 * c * r0 + 4.0 * p * bq * d * r0 * r2
    tau0 = math.log(r0)
    # W = e^{a tau} U: W_tau = e^{a tau} (r U' + a U), likewise Z
    ea, eb = r0**a, r0**b
    y0 = (ea * u, ea * (r0 * du + a * u), eb * v, eb * (r0 * dv + b * v))
    return tau0, y0


def _shoot(nd, p, beta, rtol, tau_cap, first_event_only=True):
    """Integrate one trial; return (which, tau_w, tau_z, sol).

    which is 'u', 'v' or None depending on the first zero crossing
    ('u' means the u-component crossed first). Zeros of W and Z are
    zeros of U and V since the change of variables is positive.
    """
    rhs = _rhs_factory(nd, p)
    tau0, y0 = _series_start(nd, p, beta)

    def ev_w(tau, y):
        return y[0]

    def ev_z(tau, y):
        return y[2]

    ev_w.direction = -1.0
    ev_z.direction = -1.0
    ev_w.terminal = first_event_only
    ev_z.terminal = first_event_only
    # The start values are as small as r0**b (1e-18 at low p). A fixed
    # atol floor above that scale injects absolute noise that rides the
    # e^{(b-2)tau} mode and stays order-one RELATIVE to the signal for
    # most of the run, so tie atol to the actual initial magnitudes and
    # let rtol take over once the profile has grown.
    atol = 0.1 * rtol * np.abs(np.asarray(y0))
    sol = solve_ivp(
        rhs,
        (tau0, tau_cap),
        np.asarray(y0),
        method="RK45",
        rtol=rtol,
        atol=atol,
        events=(ev_w, ev_z),
        dense_output=not first_event_only,
        max_step=2.0,
    )
    if not sol.success and sol.status != 1:
        raise StiffFailure(f"integrator failed at p={p}, beta={beta}: {sol.message}")
    tu = sol.t_events[0][0] if len(sol.t_events[0]) else None
    tv = sol.t_events[1][0] if len(sol.t_events[1]) else None
    if tu is not None and (tv is None or tu <= tv):
        return "u", tu, tv, sol
    if tv is not None:
        return "v", tu, tv, sol
    return None, None, None, sol


def _tau_cap(nd: int, p: float) -> float:
    # matched zero radius grows like exp(c p); generous headroom
    est = (nd - 2.0) / nd**2 * (p + 1.0)
    return min(2.5 * est + 25.0, 680.0)


def _match_shoot(nd, p, tol, beta_hint=None):
    """Find V(0) so both components vanish together; (beta, tau_end, diag).

    The matching functional is F(beta) = Z at the first zero of W,
    evaluated on the side where W crosses first. F is positive there,
    decreases to zero at the match, and its slope stays polynomial in
    p, unlike the crossing ORDER whose flip point is exponentially
    ill-conditioned (the flat component's zero wanders like
    e^{(N-2) tau} per unit of V(0)).
    """
    cap = _tau_cap(nd, p)
    rtol_scan = max(tol, 1e-8)

    def probe(beta, rtol):
        which, tu, tv, sol = _shoot(nd, p, beta, rtol, cap)
        if which == "u":
            state = sol.y_events[0][0]
            return "u", tu, float(state[2]), float(state[3])
        return which, tv, None, None

    def sign_at(beta, rtol):
        # V crossing first (or neither): V(0) too small -> raise it
        return -1 if probe(beta, rtol)[0] == "u" else +1

    beta = beta_hint if beta_hint else 1.0
    s0 = sign_at(beta, rtol_scan)
    lo = hi = beta
    grow = 3.0
    for _ in range(80):
        if s0 > 0:
            hi = hi * grow
            if sign_at(hi, rtol_scan) < 0:
                lo = hi / grow
                break
        else:
            lo = lo / grow
            if sign_at(lo, rtol_scan) > 0:
                hi = lo * grow
                break
        if not (1e-10 < lo <= hi < 1e10):
            raise ShootFailed(f"no sign change bracketing V(0) at p={p}")
    else:
        raise ShootFailed(f"bracket expansion exhausted at p={p}")

    for _ in range(90):
        mid = math.sqrt(lo * hi)
        if sign_at(mid, rtol_scan) > 0:
            lo = mid
        else:
            hi = mid
        if (hi - lo) < 1e-3 * hi:
            break

    # make sure the upper end evaluates F at the final tolerance
    for _ in range(60):
        got = probe(hi, tol)
        if got[0] == "u":
            break
        lo = max(lo, hi)
        hi *= 1.0 + 2e-3
    else:
        raise ShootFailed(f"no F-valid upper start at p={p}")
    x1, f1 = hi, got[2]
    x0 = f0 = None
    best = None
    for _ in range(80):
        cand = None
        if x0 is not None and f1 != f0:
            cand = x1 - f1 * (x1 - x0) / (f1 - f0)
        if cand is None or not (lo < cand < hi) or not math.isfinite(cand):
            cand = math.sqrt(lo * hi)
        got = probe(cand, tol)
        if got[0] == "u":
            _, tau_u, f_val, f_slope = got
            hi = cand
            dtau = abs(f_val / f_slope) if f_slope else math.inf
            if best is None or dtau < best[1]:
                best = (cand, dtau, f_val)
            if dtau < 1e-9:
                break
            x0, f0, x1, f1 = x1, f1, cand, f_val
        else:
            lo = cand
        if (hi - lo) < 4e-16 * hi:
            break
    if best is None:
        raise ShootFailed(f"matching never reached the F-valid side at p={p}")
    if not (best[1] < 1e-6):
        # converged matches land around 1e-12; returning a stalled best
        # would hand the caller a silent non-solution
        raise ShootFailed(
            f"matching stalled at p={p}: residual tau step {best[1]:.2e}"
        )
    return best


# -- collocation core (p > SHOOT_MAX_P) --------------------------------------


def _bvp_system(nd, p):
    q, a, b = _scaling_exponents(nd, p)
    ca1 = nd - 2.0 - 2.0 * a
    ca0 = a * (nd - 2.0 - a)
    cb1 = nd - 2.0 - 2.0 * b
    cb0 = b * (nd - 2.0 - b)

    def fun(tau, y):
        w, dw, z, dz = y
        zq = _pos_power(z, q)
        wp = _pos_power(w, p)
        return np.vstack(
            (dw, -ca1 * dw + ca0 * w - zq, dz, -cb1 * dz + cb0 * z - wp)
        )

    def bc(ya, yb):
        # left: truncated regularity (r^2 series); right: double zero
        zq0 = math.exp(min(q * math.log(ya[2]), 60.0)) if ya[2] > 0 else 0.0
        wp0 = math.exp(min(p * math.log(ya[0]), 60.0)) if ya[0] > 0 else 0.0
        return np.array(
            [
                ya[1] - a * ya[0] + zq0 / nd,
                ya[3] - b * ya[2] + wp0 / nd,
                yb[0],
                yb[2],
            ]
        )

    return fun, bc


def _bvp_step(nd, p, x, y, tol, max_nodes=120000):
    fun, bc = _bvp_system(nd, p)
    res = solve_bvp(fun, bc, x, y, tol=tol, max_nodes=max_nodes, verbose=0)
    return res


def _shoot_to_mesh(nd, p, tol, beta_hint=None):
    """Anchor solution in the adapted frame on the ball of radius 1.

    The adapted variables are scaling-invariant, so moving the matched
    unit shot onto ball(1) is a pure shift of the tau mesh by
    -log(zero radius); the (W, Z) values and tau-derivatives carry over
    unchanged.
    """
    beta, dtau, _ = _match_shoot(nd, p, tol, beta_hint)
    _, tau_end, _, _ = _probe_full(nd, p, beta, tol)
    _, _, _, sol = _shoot(nd, p, beta, tol, tau_end, first_event_only=False)
    taus = np.linspace(sol.t[0], tau_end, 1201)
    states = sol.sol(taus)
    return taus - tau_end, states, beta, dtau


def _probe_full(nd, p, beta, tol):
    which, tu, tv, sol = _shoot(nd, p, beta, tol, _tau_cap(nd, p))
    if which != "u":
        raise ShootFailed(f"matched shot lost the u-zero at p={p}")
    return which, tu, tv, sol


def _solve_bvp_chain(nd, p_target, tol, warm=None):
    """(x, y, res, walk, trace) in the adapted frame on ball(1).

    Continuation in p with adaptive step size. The step cap comes from
    the u^p forcing: its transition band swings over many orders
    within a tau window of width O(1/p), so Newton converges only
    while the relative profile drift per step stays at a few percent.
    Failed steps are cheap (small node budget) and shrink the step;
    successes grow it. walk is the last loose-tolerance mesh, the
    right seed for further continuation (the final tight mesh is too
    fine to restart from).
    """
    # collocation residual estimates drown in roundoff below ~1e-9
    tol_final = max(tol, 1e-9)
    tol_walk = 1e-5
    alpha = (nd - 2.0) / nd**2
    trace = []
    if warm is not None:
        xw, yw = warm.diagnostics["walk_x"], warm.diagnostics["walk_y"]
        p_now = warm.p
    else:
        anchor_p = SHOOT_MAX_P
        xw, yw, _, _ = _shoot_to_mesh(nd, anchor_p, tol)
        p_now = anchor_p

    res = None
    polished = False
    dp = 0.04 * p_now
    fails = 0
    while not polished:
        p_try = min(p_now + dp, p_target)
        final = p_try >= p_target - 1e-9
        step_tol = tol_final if final else tol_walk
        L_try = -xw[0] + alpha * (p_try - p_now)
        x_try, y_try = _stretch_guess(xw, yw, L_try)
        res = _bvp_step(
            nd, p_try, x_try, y_try, step_tol, 150000 if final else 12000
        )
        if res.status == 0:
            trace.append((p_try, res.x.size, res.niter))
            if final:
                polished = True
            else:
                xw, yw = res.x, res.y
                dp = min(dp * 1.4, 0.12 * p_try)
            p_now = p_try
            fails = 0
        else:
            fails += 1
            dp *= 0.4
            if fails > 14 or dp < 1e-3 * max(p_now, 1.0):
                raise StiffFailure(
                    f"continuation stalled near p={p_try}: {res.message}"
                )
    # re-key the walk seed to p_target so a later chain can resume from it
    xw, yw = _decimate(res.x, res.y)
    return res.x, res.y, res, (xw, yw), trace


def _decimate(x, y, target=4000, kmax=3):
    if x.size <= target * 1.25:
        return x, y
    k = min(kmax, int(math.ceil(x.size / float(target))))
    keep = np.arange(0, x.size, k)
    if keep[-1] != x.size - 1:
        keep = np.append(keep, x.size - 1)
    return x[keep], y[:, keep]


def _stretch_guess(x, y, L_try):
    """Continuation guess: insert extra length left of the boundary region.

    The outer part of the profile (within a few e-foldings of the
    boundary) does not move with p; the core sits at tau ~ -c p and
    drifts left. The map is the identity right of a knee and linear
    left of it, applied to the source mesh NODES, so the adaptive
    clustering survives and the nodal values carry over exactly.
    Derivative components pick up the inverse slope on the moved part.
    A mild decimation keeps the walk meshes from ratcheting up.
    """
    x, y = _decimate(x, y)
    L_now = -x[0]
    knee = min(6.0, 0.4 * L_now)
    factor = (L_try - knee) / (L_now - knee)
    x_new = np.where(x >= -knee, x, -knee + (x + knee) * factor)
    y_new = y.copy()
    left = x < -knee
    y_new[1][left] /= factor
    y_new[3][left] /= factor
    return x_new, y_new


def solve_radial(
    dimension: int,
    p: float,
    radius: float = 1.0,
    tol: float = 1e-10,
    n_nodes: int = 4001,
    beta_hint: float | None = None,
    warm: RadialSolution | None = None,
) -> RadialSolution:
    """Radial pair on ball(radius); shooting or collocation by regime.

    warm: a previously computed solution at a smaller p (same dimension
    and radius) used to warm-start the continuation in the collocation
    regime; ignored in the shooting regime.
    """
    nd = dimension
    if nd < 3:
        raise ShootFailed(f"dimension must be >= 3, got {nd}")
    shift = (nd - 2.0) / 2.0
    if p <= shift + 1e-9:
        raise ExponentDegenerate(f"p={p} too close to (N-2)/2={shift}")
    q, a_exp, b_exp = _scaling_exponents(nd, p)

    if p <= SHOOT_MAX_P:
        beta, match_dtau, match_res = _match_shoot(nd, p, tol, beta_hint)
        _, tau_end, _, _ = _probe_full(nd, p, beta, tol)
        _, _, _, sol = _shoot(nd, p, beta, tol, tau_end, first_event_only=False)
        tau_lo_shift = sol.t[0] - tau_end

        def interp(taus_ball):
            return sol.sol(taus_ball + tau_end - math.log(radius))

        meta = {
            "method": "shoot",
            "beta_unit": beta,
            "match_dtau": match_dtau,
            "match_residual_z": match_res,
            "log_lambda": tau_end - math.log(radius),
        }
        walk_x = np.linspace(tau_lo_shift, 0.0, 1201)
        walk_y = sol.sol(walk_x + tau_end)
    else:
        usable = (
            warm is not None
            and warm.dimension == nd
            and warm.p > SHOOT_MAX_P - 1e-9
            and warm.p <= p
            and "walk_x" in warm.diagnostics
        )
        x, y, res, walk, trace = _solve_bvp_chain(nd, p, tol, warm if usable else None)
        tau_lo_shift = x[0]
        bvp_sol = res.sol

        def interp(taus_ball):
            return bvp_sol(taus_ball - math.log(radius))

        meta = {
            "method": "collocation",
            "bvp_rms_residual": float(np.max(res.rms_residuals)),
            "bvp_nodes": int(x.size),
            "chain_trace": trace,
            "log_lambda": (math.log(max(y[0][0], 1e-300)) - a_exp * x[0]) / a_exp
            if a_exp
            else 0.0,
        }
        walk_x, walk_y = walk

    # sample on a tau-uniform mesh (odd point count for Simpson)
    n_tau = n_nodes - 1
    if n_tau % 2 == 0:
        n_tau += 1
    n_nodes = n_tau + 1
    log_r_hi = math.log(radius)
    taus = np.linspace(tau_lo_shift + log_r_hi, log_r_hi, n_tau)
    states = interp(taus)
    w_raw, dw_raw = states[0], states[1]
    z_raw, dz_raw = states[2], states[3]

    with np.errstate(divide="ignore", invalid="ignore"):
        log_u = np.log(np.maximum(w_raw, 0.0)) - a_exp * taus
        log_v = np.log(np.maximum(z_raw, 0.0)) - b_exp * taus
    log_u[~np.isfinite(log_u)] = -np.inf
    log_v[~np.isfinite(log_v)] = -np.inf
    log_u[-1] = -np.inf
    log_v[-1] = -np.inf
    if log_v[0] > 700.0:
        raise StiffFailure(
            f"center value exp({log_v[0]:.0f}) exceeds double range at p={p}"
        )
    res_u = abs(w_raw[-1]) * math.exp(-a_exp * log_r_hi)
    res_v = abs(z_raw[-1]) * math.exp(-b_exp * log_r_hi)

    r_nodes = np.empty(n_nodes)
    u = np.empty(n_nodes)
    v = np.empty(n_nodes)
    r_nodes[0] = 0.0
    # center values via the series: flat to O(r_lo^2 / width^2)
    u0_log = log_u[0]
    v0_log = log_v[0]
    u[0] = math.exp(u0_log)
    v[0] = math.exp(v0_log)
    r_nodes[1:] = np.exp(taus)
    with np.errstate(over="ignore"):
        u[1:] = np.exp(log_u)
        v[1:] = np.exp(log_v)

    # endpoint slopes: U_tau = e^{-a tau}(W' - a W), u'(R) = U_tau / R
    du_end = (dw_raw[-1] - a_exp * w_raw[-1]) * math.exp(-a_exp * log_r_hi) / radius
    dv_end = (dz_raw[-1] - b_exp * z_raw[-1]) * math.exp(-b_exp * log_r_hi) / radius

    log_lam = meta.get("log_lambda", 0.0)
    diagnostics = {
        "endpoint_residual_u": res_u,
        "endpoint_residual_v": res_v,
        "n_nodes": n_nodes,
        "tol": tol,
        "tau_mesh": taus,
        "log_u_mesh": log_u,
        "log_v_mesh": log_v,
        "walk_x": walk_x,
        "walk_y": walk_y,
        **meta,
    }
    return RadialSolution(
        dimension=nd,
        p=p,
        radius=radius,
        r_nodes=r_nodes,
        u=u,
        v=v,
        du_dr_end=du_end,
        dv_dr_end=dv_end,
        shoot_params=(u[0], v[0]),
        match_radius=radius * math.exp(log_lam),
        diagnostics=diagnostics,
    )


def solve_radial_sweep(dimension, p_values, radius=1.0, tol=1e-10, n_nodes=4001):
    """Warm-started solve_radial along an increasing p schedule."""
    ps = list(p_values)
    if any(b <= a for a, b in zip(ps, ps[1:])):
        raise ValueError("p_values must be strictly increasing")
    out = []
    warm = None
    beta = None
    for p in ps:
        sol = solve_radial(
            dimension, p, radius, tol=tol, n_nodes=n_nodes, beta_hint=beta, warm=warm
        )
        if sol.diagnostics.get("method") == "shoot":
            beta = sol.diagnostics["beta_unit"]
        else:
            warm = sol
        out.append(sol)
    return out


# -- quadrature and reports ---------------------------------------------------


def _log_simpson(log_f: np.ndarray, dtau: float) -> float:
    """log of integral of exp(log_f) d tau on a uniform mesh (Simpson)."""
    n = len(log_f)
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= dtau / 3.0
    m = np.max(log_f)
    if not np.isfinite(m):
        return -math.inf
    return m + math.log(np.sum(w * np.exp(log_f - m)))


def log_radial_power_integral(sol: RadialSolution, which: str, power: float) -> float:
    """log of int_0^R f^power dx (volume measure) for f = u or v.

    Simpson in tau = log r over the sampled mesh plus the analytic
    origin slab r < r_min where f is flat to relative (r_min/width)^2.
    """
    nd = sol.dimension
    log_f = sol.log_uv()[0 if which == "u" else 1]
    taus = sol.diagnostics["tau_mesh"]
    exponents = nd * taus + power * log_f
    dtau = taus[1] - taus[0]
    log_main = _log_simpson(exponents, dtau)
    log_omega = math.log(sphere_area(nd))
    f0 = sol.u[0] if which == "u" else sol.v[0]
    # origin slab: f ~ f(0) constant, volume omega r_min^N / N
    log_slab = power * math.log(f0) + nd * taus[0] - math.log(nd)
    combined = np.logaddexp(log_main, log_slab)
    return float(log_omega + combined)


def radial_energy_report(sol: RadialSolution):
    """EnergyReport of a radial pair via log-domain Simpson quadrature."""
    from .leastenergy import EnergyReport

    nd = sol.dimension
    p = sol.p
    crit = nd / (nd - 2.0)
    log_up1 = log_radial_power_integral(sol, "u", p + 1.0)
    log_mass = log_radial_power_integral(sol, "u", p)
    log_dir = log_radial_power_integral(sol, "v", crit)
    log_cp = (2.0 / nd) * log_dir - log_up1 / (p + 1.0)
    mass = math.exp(log_mass)
    lam = math.exp(2.0 / (nd - 2.0) * log_mass)
    return EnergyReport(
        p=p,
        dimension=nd,
        c_p=math.exp(log_cp),
        gamma_p=sol.gamma,
        mass_p=mass,
        lambda_p=lam,
        energy_pplus1=math.exp(log_up1),
        dirichlet_energy=math.exp(log_dir),
        l0_running=p * lam / math.e,
        method="radial",
        residual=max(
            sol.diagnostics.get("endpoint_residual_u", 0.0),
            sol.diagnostics.get("endpoint_residual_v", 0.0),
        ),
        iterations=0,
    )


def radial_pohozaev(sol: RadialSolution):
    """Boundary-flux identity N/(p+1) int u^{p+1} = u'(R) v'(R) R^N omega.

    Returned as (lhs, rhs). Derivation: multiply each equation by the
    radial multiplier x·grad of the other component and integrate; the
    interior gradient terms cancel against the energy identity, and
    with q = 2/(N-2) the bracket collapses to N/(p+1). Both endpoint
    slopes are negative, so the right side is positive as it must be.
    """
    nd = sol.dimension
    lhs = (
        nd
        / (sol.p + 1.0)
        * math.exp(log_radial_power_integral(sol, "u", sol.p + 1.0))
    )
    rhs = sol.du_dr_end * sol.dv_dr_end * sol.radius**nd * sphere_area(nd)
    return lhs, rhs
