"""Least-energy pairs on a grid: constrained minimization and fixed point.

The pair (u, v) with -Δu = v^{2/(N-2)}, -Δv = u^p and zero boundary
values is computed two ways:

* minimize_cp finds the normalized profile w minimizing the quotient
  (∫|Δw|^{N/2})^{2/N} over ‖w‖_{p+1} = 1 by preconditioned projected
  gradient descent (the preconditioner is the squared inverse
  Laplacian, which makes the step a smoothed fixed-point direction),
  and rescale_to_solution turns the minimizer into the unnormalized
  solution via the problem's exact homogeneity.

* solve_fixed_point iterates u <- s * K((K(u^p))^{2/(N-2)}) where K is
  the Dirichlet inverse Laplacian and s is the unique amplitude making
  the iterate self-consistent. This is the production path; the
  minimizer serves as an independent cross-check.

Scaling note: the amplitude s solves s^{p-(N-2)/2} = mu^{N/2-ish}
homogeneity directly. Substituting u = s*w into -Δ(-Δu)^{(N-2)/2} = u^p
with -Δ(-Δw)^{(N-2)/2} = mu * w^p gives s^{(N-2)/2} * mu = s^p, i.e.
s = mu^{1/(p-(N-2)/2)}. The exponent is +1/(p-(N-2)/2); with it the
identity ∫u^{p+1} = ∫|Δu|^{N/2} holds exactly, which is the accepted
self-consistency check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ExponentDegenerate,
    GeometryError,
    NegativePhase,
    NotConverged,
    OverflowInPower,
)
from .geometry import Grid, integrate
from .operators import Field, LinearSolveOptions, apply_laplacian, solve_poisson
from .radial import sphere_area


@dataclass
class EnergyReport:
    """Scalar summary of one solution pair."""

    p: float
    dimension: int
    c_p: float
    gamma_p: float
    mass_p: float
    lambda_p: float
    energy_pplus1: float
    dirichlet_energy: float
    l0_running: float
    method: str = ""
    residual: float = 0.0
    iterations: int = 0

    @property
    def cp_scaled(self) -> float:
        nd = self.dimension
        return self.c_p * self.p ** ((nd - 2.0) / nd)

    @property
    def energy_scaled(self) -> float:
        return self.p ** ((self.dimension - 2.0) / 2.0) * self.energy_pplus1

    @property
    def energy_identity_gap(self) -> float:
        return abs(self.energy_pplus1 - self.dirichlet_energy) / self.energy_pplus1


@dataclass
class SolutionPair:
    """Discrete (u, v) with equation residuals (V-weighted L2, relative)."""

    u: Field
    v: Field
    p: float
    residual_u: float
    residual_v: float
    iterations: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @property
    def residual(self) -> float:
        return max(self.residual_u, self.residual_v)


@dataclass
class MinimizeResult:
    w: Field
    c_p: float
    energy: float
    iterations: int
    history: list


def sign_power(x: np.ndarray, a: float) -> np.ndarray:
    return np.sign(x) * np.abs(x) ** a


def stable_power(values: np.ndarray, power: float) -> np.ndarray:
    """values**power with the sup factored out so only underflow occurs."""
    gamma = float(np.max(values))
    if gamma <= 0.0:
        return np.zeros_like(values)
    log_scale = power * math.log(gamma)
    if log_scale > 700.0:
        raise OverflowInPower(f"sup^power = exp({log_scale:.0f}) out of range")
    out = np.zeros_like(values)
    pos = values > 0.0
    out[pos] = np.exp(power * np.log(values[pos] / gamma) + log_scale)
    return out


def norm_pp1(values: np.ndarray, grid: Grid, p: float) -> float:
    return integrate(stable_power(np.abs(values), p + 1.0), grid) ** (1.0 / (p + 1.0))


def _l2(values: np.ndarray, grid: Grid) -> float:
    return math.sqrt(integrate(values * values, grid))


def _bump(grid: Grid) -> np.ndarray:
    center = np.asarray(grid.domain.center, dtype=float)
    sigma = grid.domain.inradius() / 2.0
    d2 = np.sum((grid.coords - center) ** 2, axis=1)
    return np.exp(-d2 / sigma**2)


def _amplitude(mu: float, p: float, nd: int) -> float:
    denom = p - (nd - 2.0) / 2.0
    if denom <= 1e-9:
        raise ExponentDegenerate(f"p={p} too close to (N-2)/2={(nd - 2) / 2}")
    return mu ** (1.0 / denom)


def energy_halfN(w: np.ndarray, grid: Grid) -> float:
    aw = apply_laplacian(w, grid)
    return integrate(np.abs(aw) ** (grid.dimension / 2.0), grid)


def minimize_cp(
    grid: Grid,
    p: float,
    tol: float = 1e-9,
    max_iterations: int = 400,
    initial: Field | None = None,
    solve_options: LinearSolveOptions | None = None,
) -> MinimizeResult:
    """Minimize (∫|Δw|^{N/2})^{2/N} over ‖w‖_{p+1} = 1, w >= 0."""
    nd = grid.dimension
    opts = solve_options or LinearSolveOptions()
    w = initial.values.copy() if initial is not None else _bump(grid)
    w = np.maximum(w, 0.0)
    w /= norm_pp1(w, grid, p)

    def quotient(values):
        return energy_halfN(values, grid)

    energy = quotient(w)
    history = [energy]
    eta = 1.0
    stale = 0
    clip_events = 0
    g1 = g2 = None
    for it in range(1, max_iterations + 1):
        aw = apply_laplacian(w, grid)
        if nd == 4:
            lifted = w.copy()
        else:
            g1 = solve_poisson(sign_power(aw, nd / 2.0 - 1.0), grid, opts, x0=g1)
            lifted = g1.values
        g2 = solve_poisson(stable_power(w, p), grid, opts, x0=g2)
        g2b = solve_poisson(g2.values, grid, opts)
        d = (nd / 2.0) * (lifted - energy * g2b.values)
        # keep the step tangent to the constraint sphere (‖w‖_{p+1}=1)
        d -= w * integrate(d * stable_power(w, p), grid)

        accepted = False
        for _ in range(25):
            trial = w - eta * d
            trial = np.maximum(trial, 0.0)
            nrm = norm_pp1(trial, grid, p)
            if nrm <= 0.0:
                eta *= 0.5
                continue
            trial /= nrm
            e_trial = quotient(trial)
            if e_trial < energy * (1.0 - 1e-14):
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            break
        raw = w - eta * d
        negative_mass = integrate(np.maximum(-raw, 0.0) ** 2, grid)
        if negative_mass > 0.1 * integrate(raw * raw, grid):
            clip_events += 1
            if clip_events > 5:
                raise NegativePhase(
                    f"iterate keeps losing >10% mass to the negative part (it={it})"
                )
        drop = (energy - e_trial) / energy
        w, energy = trial, e_trial
        history.append(energy)
        eta = min(eta * 1.4, 4.0)
        stale = stale + 1 if drop < tol else 0
        if stale >= 10:
            break
    else:
        raise NotConverged(max_iterations, history[-2] - history[-1])

    return MinimizeResult(
        w=Field(grid, w),
        c_p=energy ** (2.0 / nd),
        energy=energy,
        iterations=len(history) - 1,
        history=history,
    )


def _pair_residuals(u, v, p, grid):
    q = 2.0 / (grid.dimension - 2.0)
    vq = stable_power(np.maximum(v, 0.0), q)
    up = stable_power(np.maximum(u, 0.0), p)
    ru = _l2(apply_laplacian(u, grid) - vq, grid) / max(_l2(vq, grid), 1e-300)
    rv = _l2(apply_laplacian(v, grid) - up, grid) / max(_l2(up, grid), 1e-300)
    return ru, rv


def rescale_to_solution(minimizer: Field, c_p: float, p: float) -> SolutionPair:
    """Scale the normalized minimizer to solve the unnormalized system.

    v is recovered pointwise as (-Δu)^{(N-2)/2}; the first equation is
    then exact wherever -Δu >= 0 and both residuals are recorded.
    """
    grid = minimizer.grid
    nd = grid.dimension
    s = _amplitude(c_p ** (nd / 2.0), p, nd)
    u = s * minimizer.values
    v = sign_power(apply_laplacian(u, grid), (nd - 2.0) / 2.0)
    ru, rv = _pair_residuals(u, v, p, grid)
    return SolutionPair(
        u=Field(grid, u),
        v=Field(grid, v),
        p=p,
        residual_u=ru,
        residual_v=rv,
        iterations=0,
        diagnostics={"method": "minimizer", "amplitude": s, "c_p": c_p},
    )


def solve_fixed_point(
    grid: Grid,
    p: float,
    tol: float = 1e-8,
    max_iterations: int = 300,
    initial: Field | None = None,
    solve_options: LinearSolveOptions | None = None,
) -> SolutionPair:
    """Picard iteration with per-step amplitude self-consistency."""
    nd = grid.dimension
    q = 2.0 / (nd - 2.0)
    opts = solve_options or LinearSolveOptions()
    u = initial.values.copy() if initial is not None else _bump(grid)
    u = np.maximum(u, 0.0)
    if float(np.max(u)) <= 0.0:
        raise NegativePhase("initial iterate has no positive part")

    v_sol = None
    y_sol = None
    deltas = []
    theta = 1.0
    for it in range(1, max_iterations + 1):
        v_sol = solve_poisson(stable_power(u, p), grid, opts, x0=v_sol)
        vq = stable_power(np.maximum(v_sol.values, 0.0), q)
        y_sol = solve_poisson(vq, grid, opts, x0=y_sol)
        y = np.maximum(y_sol.values, 0.0)
        # mu = ∫|Δy|^{N/2} / ∫y^{p+1}; the numerator equals ∫(v^q)^{N/2}
        # because y was just solved against that right-hand side
        num = integrate(vq ** (nd / 2.0), grid)
        den = integrate(stable_power(y, p + 1.0), grid)
        mu = num / den
        s = _amplitude(mu, p, nd)
        u_new = u + theta * (s * y - u)
        sup = float(np.max(np.abs(u_new)))
        delta = float(np.max(np.abs(u_new - u))) / sup
        deltas.append(delta)
        u = u_new
        if delta < tol:
            break
        if len(deltas) > 6 and deltas[-1] > deltas[-2] > deltas[-3]:
            theta = max(theta * 0.5, 0.25)
    else:
        raise NotConverged(max_iterations, deltas[-1] if deltas else math.nan)

    v_sol = solve_poisson(stable_power(u, p), grid, opts, x0=v_sol)
    v = np.maximum(v_sol.values, 0.0)
    ru, rv = _pair_residuals(u, v, p, grid)
    return SolutionPair(
        u=Field(grid, u),
        v=Field(grid, v),
        p=p,
        residual_u=ru,
        residual_v=rv,
        iterations=it,
        diagnostics={
            "method": "fixed_point",
            "deltas": deltas,
            "theta_final": theta,
            "last_amplitude": s,
        },
    )


def energy_report(pair: SolutionPair) -> EnergyReport:
    grid = pair.grid
    nd = grid.dimension
    p = pair.p
    u = pair.u.values
    int_up1 = integrate(stable_power(u, p + 1.0), grid)
    mass = integrate(stable_power(u, p), grid)
    dirichlet = energy_halfN(u, grid)
    c_p = dirichlet ** (2.0 / nd) / int_up1 ** (1.0 / (p + 1.0))
    lam = mass ** (2.0 / (nd - 2.0))
    return EnergyReport(
        p=p,
        dimension=nd,
        c_p=c_p,
        gamma_p=float(np.max(u)),
        mass_p=mass,
        lambda_p=lam,
        energy_pplus1=int_up1,
        dirichlet_energy=dirichlet,
        l0_running=p * lam / math.e,
        method=pair.diagnostics.get("method", ""),
        residual=pair.residual,
        iterations=pair.iterations,
    )


def continuation_sweep(grid: Grid, p_schedule, opts=None):
    """Warm-started solve along increasing p; list of (pair, report)."""
    ps = list(p_schedule)
    if any(b <= a for a, b in zip(ps, ps[1:])):
        raise ValueError("p_schedule must be strictly increasing")
    out = []
    prev = None
    for p in ps:
        try:
            pair = solve_fixed_point(
                grid, p, initial=prev.u if prev else None, solve_options=opts
            )
        except Exception as exc:
            exc.args = exc.args + (f"while solving p={p}",)
            raise
        out.append((pair, energy_report(pair)))
        prev = pair
    return out


# -- Moser-type test function ------------------------------------------------

_PHI = (
    lambda t: 2.0 * t * t - t**3,
    lambda t: 4.0 * t - 3.0 * t * t,
    lambda t: 4.0 - 6.0 * t,
)


def _cap_profile(s: np.ndarray, eps: float):
    """H, H', H'' on [0,1]: unit ramp with C1 polynomial caps of width eps.

    H(0)=0, H(1)=1, H'(0)=H'(1)=0, slope 1 in the middle. H' is
    continuous so Δ of the composed radial function stays integrable.
    """
    phi, dphi, ddphi = _PHI
    h = np.empty_like(s)
    h1 = np.empty_like(s)
    h2 = np.empty_like(s)
    lo = s < eps
    hi = s > 1.0 - eps
    mid = ~(lo | hi)
    t = s[lo] / eps
    h[lo] = eps * phi(t)
    h1[lo] = dphi(t)
    h2[lo] = ddphi(t) / eps
    h[mid] = s[mid]
    h1[mid] = 1.0
    h2[mid] = 0.0
    t = (1.0 - s[hi]) / eps
    h[hi] = 1.0 - eps * phi(t)
    h1[hi] = dphi(t)
    h2[hi] = -ddphi(t) / eps
    return h, h1, h2


@dataclass
class MoserFunction:
    """Radial plateau/log-ramp profile supported in B_L, constant in B_l."""

    dimension: int
    center: np.ndarray
    l: float
    L: float
    eps: float

    @property
    def ramp_length(self) -> float:
        return math.log(self.L / self.l)

    def radial(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        s = np.clip(np.log(self.L / np.maximum(r, 1e-300)) / self.ramp_length, 0.0, 1.0)
        h, _, _ = _cap_profile(s, self.eps)
        out = np.where(r >= self.L, 0.0, h)
        return np.where(r <= self.l, 1.0, out)

    def on_grid(self, grid: Grid) -> Field:
        r = np.linalg.norm(grid.coords - self.center, axis=1)
        return Field(grid, self.radial(r))


def moser_test_function(grid: Grid, l: float, L: float, eps: float, p: float):
    """Test profile and its quotient value, an upper bound for c_p.

    The quotient (∫|Δm|^{N/2})^{2/N} / ‖m‖_{p+1} is evaluated by 1D
    quadrature of the exact radial profile (the inner radius l shrinks
    like exp(-c p), far below any usable h), in the log-domain so large
    p cannot underflow.
    """
    if not (0.0 < l < L):
        raise ValueError(f"need 0 < l < L, got l={l}, L={L}")
    if not (0.0 < eps < 0.5):
        raise ValueError(f"eps must be in (0, 1/2), got {eps}")
    if L > grid.domain.inradius() * (1.0 + 1e-12):
        raise GeometryError(
            f"B_L with L={L} not inside the domain (inradius {grid.domain.inradius():.4g})"
        )
    nd = grid.dimension
    omega = sphere_area(nd)
    T = math.log(L / l)
    n_q = 20001
    s = np.linspace(0.0, 1.0, n_q)
    h, h1, h2 = _cap_profile(s, eps)
    w = np.ones(n_q)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= (s[1] - s[0]) / 3.0

    lap = h2 / T**2 - (nd - 2.0) * h1 / T
    energy = omega * T * np.sum(w * np.abs(lap) ** (nd / 2.0))

    # ∫ m^{p+1} dx = plateau ball + annulus, both via logs
    log_plateau = nd * math.log(l) - math.log(nd) + math.log(omega)
    with np.errstate(divide="ignore"):
        log_h = np.where(h > 0.0, np.log(np.maximum(h, 1e-300)), -np.inf)
    expo = (p + 1.0) * log_h + nd * (math.log(L) - T * s)
    m = np.max(expo)
    log_annulus = (
        math.log(omega) + math.log(T) + m + math.log(np.sum(w * np.exp(expo - m)))
    )
    log_norm = np.logaddexp(log_plateau, log_annulus) / (p + 1.0)

    bound = energy ** (2.0 / nd) / math.exp(log_norm)
    fn = MoserFunction(
        dimension=nd,
        center=np.asarray(grid.domain.center, dtype=float),
        l=l,
        L=L,
        eps=eps,
    )
    return fn, bound
