"""Direct 1-D kinetic solver for d_t F + v3 d_x3 F = (nu0 / eps) (M[F] - F).

Strang splitting: half relaxation, MUSCL/SSP-RK2 transport, half
relaxation.  Relaxation is integrated exactly towards a discrete Maxwellian
whose moments match those of F on the velocity grid, so mass, momentum and
energy are conserved to round-off.  The Maxwell condition is imposed on the
wall face: incoming face values are built from the outgoing ones with the
discrete diffuse normalisation, so the wall mass flux vanishes identically.

``linear=True`` advances the perturbation f = (F - mu)/sqrt(mu) with the
linearised operator instead (used for energy and boundary-dissipation
checks).
"""
from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .collision import HydroProjection

LIMITER_CODES = {"minmod": 0, "vanleer": 1}


@dataclass
class KineticSolveConfig:
    epsilon: float
    alpha: float = 1.0
    length: float = 3.0
    cells: int = 400
    T: float = 1.0
    cfl: float = 0.5
    nu0: float = 1.0
    limiter: str = "minmod"
    linear: bool = False
    wall_resolution: float = 0.25  # max cell width in units of epsilon

    @property
    def h(self):
        return self.length / self.cells

    def validate(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0.0 < self.cfl <= 0.9:
            raise ValueError("CFL number must lie in (0, 0.9]")
        if self.h > self.wall_resolution * self.epsilon * (1 + 1e-12):
            raise ValueError(
                f"under-resolved wall region: h = {self.h:.4g} > {self.wall_resolution} eps")
        if self.limiter not in LIMITER_CODES:
            raise ValueError(f"unknown limiter {self.limiter!r}")
        return self


@dataclass
class KineticTrajectory:
    x: np.ndarray
    times: np.ndarray  # saved times
    snapshots: list  # F (or f) at the saved times
    steps: int
    dt: float
    wall_flux: np.ndarray  # per step, max over the two stages
    mass: np.ndarray  # per step (nonlinear) or energy (linear)
    far_flux_integral: np.ndarray  # cumulative outflow through x3 = L
    dissipation: np.ndarray = field(default=None)  # (steps, 2): D, |(I-P_gamma) f|^2
    min_value: float = np.inf
    seconds: float = 0.0

    @property
    def final(self):
        return self.snapshots[-1]

    def mass_drift(self):
        """max |mass(t) + outflow(t) - mass(0)| over the run."""
        return float(np.max(np.abs(self.mass + self.far_flux_integral - self.mass[0])))


def discrete_maxwellian(F, grid, tol=1e-13, max_iter=30):
    """exp(a + b v3 + c |v|^2) with the discrete moments (1, v3, |v|^2) of F."""
    F = np.atleast_2d(F)
    w = grid.weights
    phi = np.stack([np.ones_like(grid.v3), grid.v3, grid.speed2])  # (3, V)
    m = F @ (w[:, None] * phi.T)  # (N, 3)
    rho = m[:, 0]
    u = m[:, 1] / rho
    T = (m[:, 2] / rho - u * u) / 3.0
    if np.any(rho <= 0) or np.any(T <= 0):
        raise FloatingPointError("non-positive density or temperature")
    p = np.stack([np.log(rho / (2 * np.pi * T) ** 1.5) - 0.5 * u * u / T, u / T, -0.5 / T], axis=1)
    for _ in range(max_iter):
        M = np.exp(p @ phi)
        r = M @ (w[:, None] * phi.T) - m
        if np.max(np.abs(r) / np.abs(m).max(axis=1, keepdims=True)) < tol:
            break
        J = np.einsum("nv,iv,jv->nij", M * w, phi, phi)
        p = p - np.linalg.solve(J, r[..., None])[..., 0]
    else:
        raise RuntimeError("discrete Maxwellian did not converge")
    return np.exp(p @ phi)


class _Wall:
    """Maxwell reflection on the face x3 = 0 with discrete normalisation."""

    def __init__(self, grid, alpha, linear):
        self.grid = grid
        self.alpha = alpha
        self.inc = grid.incoming
        self.out = grid.outgoing
        self.ref = grid.reflect
        w = grid.weights
        self.w_out = w * np.abs(grid.v3) * self.out
        self.w_in = w * np.abs(grid.v3) * self.inc
        self.linear = linear

    def incoming(self, face):
        """Incoming face values from the outgoing ones (face: (V,))."""
        if self.linear:
            # flux of sqrt(mu) f; the diffuse part is sqrt(mu) times a constant
            sm = self.grid.sqrt_mu
            sigma = np.sum(self.w_out * sm * face) / np.sum(self.w_in * sm * sm)
            diffuse = sm * sigma
        else:
            sigma = np.sum(self.w_out * face) / np.sum(self.w_in * self.grid.mu)
            diffuse = self.grid.mu * sigma
        return (1.0 - self.alpha) * face[self.ref] + self.alpha * diffuse

    def dissipation(self, face):
        """(D, G): D = 1/2 int v3 f^2 outflow minus inflow, G = 1/2 |(I-P_gamma) f|^2."""
        sm = self.grid.sqrt_mu
        out_sq = np.sum(self.w_out * face * face)
        in_sq = np.sum(self.w_in * face * face)
        proj = sm * np.sum(self.w_out * sm * face) / np.sum(self.w_out * sm * sm)
        g = (face - proj) * self.out
        return 0.5 * (out_sq - in_sq), 0.5 * np.sum(self.w_out * g * g)


def _transport_rhs(F, cfg, grid, wall, inflow, code, xc, xf, faces):
    N = F.shape[0]
    u = np.empty((N + 2, F.shape[1]))
    u[1:-1] = F
    u[0] = 2.0 * F[0] - F[1]
    u[-1] = 2.0 * F[-1] - F[-2]
    if not cfg.linear:
        # a non-negative ghost keeps the limited end slopes below the cell
        # value, so face values (and the update) stay positive
        np.maximum(u[0], 0.0, out=u[0])
        np.maximum(u[-1], 0.0, out=u[-1])
    kernels.muscl_faces(u, xc, xf, grid.v3, code, faces)
    inc = grid.incoming
    faces[0, inc] = wall.incoming(faces[0])[inc]
    out = grid.outgoing
    faces[-1, out] = inflow[out]
    flux = faces * grid.v3
    mass_w = grid.weights * (grid.sqrt_mu if cfg.linear else 1.0)
    wall_flux = float(np.sum(mass_w * flux[0]))
    far_flux = float(np.sum(grid.weights * flux[-1]))
    if cfg.linear:
        # energy through x3 = L: 1/2 int v3 f^2 on the face
        far_flux = float(0.5 * np.sum(grid.weights * grid.v3 * faces[-1] ** 2))
    return -(flux[1:] - flux[:-1]) / cfg.h, wall_flux, far_flux, faces[0].copy()


def solve_kinetic_1d(config: KineticSolveConfig, grid, init, inflow=None, save_times=(),
                     model=None, check_every=1):
    """Advance F (or the perturbation f when ``config.linear``) to T.

    init: (cells, V) cell values.  inflow: callable t -> (V,) values used
    for v3 < 0 at x3 = L (default: the reference Maxwellian, i.e. zero
    perturbation).  Returns a KineticTrajectory with snapshots at
    ``save_times`` and at T.
    """
    cfg = config.validate()
    t0 = _time.perf_counter()
    F = np.array(init, dtype=float, copy=True)
    N, V = F.shape
    if N != cfg.cells or V != grid.size:
        raise ValueError("initial data do not match the space/velocity grids")
    if not cfg.linear and F.min() < 0:
        raise ValueError("initial data must be non-negative")
    vmax = np.max(np.abs(grid.v3))
    steps = int(np.ceil(cfg.T * vmax / (cfg.cfl * cfg.h) - 1e-12))
    dt = cfg.T / steps
    if cfg.linear:
        P = model.P if model is not None else HydroProjection(grid)
    default_in = np.zeros(V) if cfg.linear else grid.mu
    inflow = inflow or (lambda t: default_in)
    wall = _Wall(grid, cfg.alpha, cfg.linear)
    code = LIMITER_CODES[cfg.limiter]
    xf = np.linspace(0.0, cfg.length, N + 1)
    xc = np.concatenate([[-0.5 * cfg.h], 0.5 * (xf[1:] + xf[:-1]), [cfg.length + 0.5 * cfg.h]])
    faces = np.empty((N + 1, V))
    decay = np.exp(-0.5 * cfg.nu0 * dt / cfg.epsilon)

    def relax(F):
        if cfg.linear:
            Pf = P.apply(F)
            return Pf + decay * (F - Pf)
        M = discrete_maxwellian(F, grid)
        return M + decay * (F - M)

    save = sorted(float(s) for s in save_times if 0 <= s < cfg.T)
    snaps, snap_t = [], []
    wall_flux = np.zeros(steps)
    far = np.zeros(steps + 1)
    budget = np.zeros(steps + 1)
    diss = np.zeros((steps, 2)) if cfg.linear else None
    w = grid.weights

    def total(F):
        if cfg.linear:
            return 0.5 * cfg.h * np.sum(w * F * F)
        return cfg.h * np.sum(F @ w)

    budget[0] = total(F)
    fmin = float(F.min())
    for n in range(steps):
        t = n * dt
        while save and save[0] <= t + 0.5 * dt:
            snaps.append(F.copy())
            snap_t.append(t)
            save.pop(0)
        F = relax(F)
        k1, w1, f1, face1 = _transport_rhs(F, cfg, grid, wall, inflow(t), code, xc, xf, faces)
        F1 = F + dt * k1
        k2, w2, f2, face2 = _transport_rhs(F1, cfg, grid, wall, inflow(t + dt), code, xc, xf, faces)
        F = 0.5 * F + 0.5 * (F1 + dt * k2)
        F = relax(F)
        wall_flux[n] = max(abs(w1), abs(w2))
        if cfg.linear:
            d1 = wall.dissipation(face1)
            d2 = wall.dissipation(face2)
            diss[n] = 0.5 * (np.array(d1) + np.array(d2))
        far[n + 1] = far[n] + 0.5 * dt * (f1 + f2)
        budget[n + 1] = total(F)
        if n % check_every == 0 or n == steps - 1:
            m = float(F.min())
            fmin = min(fmin, m)
            if not cfg.linear and m < -1e-12:
                raise FloatingPointError(f"negative distribution ({m:.3g}) at step {n}")
            if not np.all(np.isfinite(F)):
                raise FloatingPointError("non-finite values in the kinetic solve")
    snaps.append(F)
    snap_t.append(cfg.T)
    return KineticTrajectory(0.5 * (xf[1:] + xf[:-1]), np.array(snap_t), snaps, steps, dt,
                             wall_flux, budget, far, diss, fmin, _time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# convergence against the composite expansion
# ---------------------------------------------------------------------------
@dataclass
class ConvergenceRow:
    epsilon: float
    cells: int
    norm: float
    coarse_norm: float
    audit_change: float
    wall_flux: float
    mass_drift: float
    min_value: float
    seconds: float

    HEADER = ("epsilon", "cells", "norm", "coarse_norm", "audit_change", "wall_flux",
              "mass_drift", "min_value", "seconds")

    def row(self):
        return tuple(getattr(self, k) for k in self.HEADER)


def composite_inflow(expansion, eps, K=None):
    """Far-end data t -> F(t, L, v) from the composite, linear in time."""
    L = expansion.config.length
    times = expansion.times
    table = np.stack([expansion.compose(eps, t, [L], K=K).values[0] for t in times])

    def inflow(t):
        return np.array([np.interp(t, times, table[:, v]) for v in range(table.shape[1])])

    return inflow


def deficit_norm(F, x, h, expansion, eps, n):
    """||(F - mu - sqrt(eps) sqrt(mu) f1) / (sqrt(eps) sqrt(mu))||_L2 on cells."""
    g = expansion.vgrid
    vals, _ = expansion.ingredient_values(n, x, eps)
    d = (F - g.mu) / (np.sqrt(eps) * g.sqrt_mu) - vals["f1"]
    return float(np.sqrt(h * np.sum(g.integrate(d * d))))


def run_scenario(expansion, eps, cells, K=None, limiter="minmod", cfl=0.5):
    """Direct solve from the composite at t = 0; returns (trajectory, deficit)."""
    cfg = expansion.config
    kcfg = KineticSolveConfig(epsilon=eps, alpha=cfg.alpha, length=cfg.length, cells=cells,
                              T=cfg.T, cfl=cfl, nu0=cfg.nu0, limiter=limiter)
    x = (np.arange(cells) + 0.5) * kcfg.h
    init = expansion.compose(eps, 0.0, x, K=K)
    traj = solve_kinetic_1d(kcfg, expansion.vgrid, init.values,
                            inflow=composite_inflow(expansion, eps, K))
    n = expansion.times.size - 1
    return traj, deficit_norm(traj.final, x, kcfg.h, expansion, eps, n)


def convergence_study(eps_list, expansion, cells_per_eps=8, audit=True, K=None, **kw):
    """Rows per epsilon and the fitted order of the deficit norm.

    The spatial grid has ``cells_per_eps`` cells per epsilon; the audit
    repeats the solve with half as many cells.
    """
    from .expansion import fit_slope

    rows = []
    L = expansion.config.length
    for eps in eps_list:
        cells = int(np.ceil(cells_per_eps * L / eps))
        traj, norm = run_scenario(expansion, eps, cells, K=K, **kw)
        coarse = change = float("nan")
        if audit:
            _, coarse = run_scenario(expansion, eps, cells // 2, K=K, **kw)
            change = abs(coarse - norm) / norm if norm > 0 else 0.0
        rows.append(ConvergenceRow(eps, cells, norm, coarse, change, float(traj.wall_flux.max()),
                                   traj.mass_drift(), traj.min_value, traj.seconds))
    norms = [r.norm for r in rows]
    order = fit_slope(eps_list, norms) if len(rows) > 1 and min(norms) > 0 else float("nan")
    return rows, order


# ---------------------------------------------------------------------------
# boundary dissipation
# ---------------------------------------------------------------------------
def boundary_dissipation(alpha, grid, eps=0.1, length=1.0, cells=40, T=0.2, seed=0):
    """Run a linear solve from a random smooth perturbation and return the
    accumulated wall dissipation D and the accumulated |(I-P_gamma) f|^2 / 2
    on the outgoing half, both integrated over time."""
    rng = np.random.default_rng(seed)
    cfg = KineticSolveConfig(epsilon=eps, alpha=alpha, length=length, cells=cells, T=T,
                             linear=True)
    x = (np.arange(cells) + 0.5) * cfg.h
    shape = np.exp(-((x / (0.3 * length)) ** 2))
    init = np.outer(shape, rng.standard_normal(grid.size) * grid.sqrt_mu)
    traj = solve_kinetic_1d(cfg, grid, init)
    D, G = traj.dissipation.sum(axis=0) * traj.dt
    return float(D), float(G)


def dissipation_regression(alphas, grid, **kw):
    """Fit D = s * alpha (2 - alpha) * G through the origin.

    Returns (rows (alpha, D, G, D/G), fitted s, max relative deviation of
    D/G from s * alpha (2 - alpha)).
    """
    rows = []
    for a in alphas:
        D, G = boundary_dissipation(a, grid, **kw)
        rows.append((float(a), D, G, D / G))
    shape = np.array([a * (2.0 - a) for a in alphas])
    ratio = np.array([r[3] for r in rows])
    s = float(shape @ ratio / (shape @ shape))
    dev = float(np.max(np.abs(ratio - s * shape) / (s * shape)))
    return rows, s, dev
