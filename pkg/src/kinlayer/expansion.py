"""Truncated composite expansion, its kinetic residual and layer scalings.

All ingredients (interior orders, viscous layers, Knudsen layers) are
independent of epsilon; epsilon only enters when they are composed at
zeta = x3 / sqrt(eps) and xi = x3 / eps.  Perturbations are stored in the
normalised form f = (F - mu) / sqrt(mu).

The built-in scenario is planar and axially symmetric: a uniform
temperature excess theta0 (with zero pressure perturbation) next to a wall
at the reference temperature, plus an optional right-going acoustic pulse.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import erfc

from . import hydro
from .collision import make_model
from .interior import (SOUND_SPEED, FluidState, InteriorGrid, MicroClosure, cell_gradient,
                       solve_acoustic, solve_fluid_k)
from .knudsen import KnudsenSetup, XiGrid, assemble_fbb2, slip_coefficients
from .velocity_space import GridSpec, build_axisym_grid
from .viscous import (InteriorTraces, LayerContext, LayerField, LayerGrid, layer_bc_k1,
                      solve_layer_order, wall_derivatives)

MAX_ORDER = 2


@dataclass
class ExpansionConfig:
    K: int = 2
    epsilon: float = 0.05
    alpha: float = 1.0
    model: str = "bgk"
    nu0: float = 1.0
    taylor_depth: int = 2
    # scenario
    T: float = 1.0
    theta0: float = 0.05
    tau0: float = 4.0
    pulse: float = 0.05
    pulse_center: float = 0.9
    pulse_width: float = 0.4
    wall_flow_width: float = 0.3
    # grids
    length: float = 3.5
    interior_cells: int = 600
    zeta_max: float = 40.0
    layer_cells: int = 400
    xi_max: float = 30.0
    xi_cells: int = 200
    velocity: GridSpec = field(default_factory=lambda: GridSpec(points_per_axis=12,
                                                                perp_points=6))

    def validate(self):
        if self.K not in (0, 1, 2, 3):
            raise ValueError("truncation order K must be in 0..3")
        if self.K > MAX_ORDER:
            raise NotImplementedError(
                f"composite assembly is implemented up to K = {MAX_ORDER}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.taylor_depth != 2:
            raise ValueError("the Taylor depth is fixed at 2 for K <= 3")
        return self


@dataclass
class CompositeField:
    time: float
    epsilon: float
    K: int
    x: np.ndarray
    values: np.ndarray  # F on (x, v)
    ingredients: dict  # name -> scaled perturbation (x, V)
    min_value: float

    def perturbation(self, grid):
        return (self.values - grid.mu) / grid.sqrt_mu


def _orders(K):
    names = {1: ("f1", "fb1"), 2: ("f2", "fb2", "fbb2")}
    return [n for k in range(1, K + 1) for n in names[k]]


class Expansion:
    """Solved ingredients of the composite for one scenario."""

    def __init__(self, config: ExpansionConfig):
        self.config = config.validate()
        cfg = config
        self.vgrid = build_axisym_grid(cfg.velocity, 0)
        self.model = make_model(cfg.model, self.vgrid, nu0=cfg.nu0)
        self.closure = MicroClosure(self.model)
        self.igrid = InteriorGrid(cfg.length, cfg.interior_cells)
        self._solve_interior_1()
        self.times = self.interior[1].times
        self.dt = self.interior[1].dt
        self.lgrid = LayerGrid.graded(cfg.zeta_max, cfg.layer_cells)
        self.ctx = LayerContext(self.model, self.lgrid, self.times, cfg.taylor_depth)
        self.setup = KnudsenSetup.build(cfg.alpha, self.vgrid, cfg.model, cfg.nu0,
                                        XiGrid.graded(cfg.xi_max, cfg.xi_cells))
        self.slip = slip_coefficients(self.setup, order=1)
        self.layers = []
        self._solve_layer_1()
        self._solve_interior_2()
        self._solve_layer_2()
        wall = self.layers[0].wall()
        self.fbb2 = assemble_fbb2(self.slip, wall["theta"][1])
        self._fbb2_transport = [-self.model.apply_L(p) for p in self.fbb2.profiles]
        self._fields = {}

    # -- ingredient solves ------------------------------------------------
    def _initial_1(self):
        cfg = self.config
        c = SOUND_SPEED

        def bump(x):
            return cfg.pulse * np.exp(-(((x - cfg.pulse_center) / cfg.pulse_width) ** 2))

        # right-going simple wave: rho = 3/5 p, theta = 2/5 p, u3 = p / c
        return FluidState.from_fields(
            self.igrid, rho=lambda x: -cfg.theta0 + 0.6 * bump(x), u=(0.0, 0.0, lambda x: bump(x) / c),
            theta=lambda x: cfg.theta0 + 0.4 * bump(x), order=1)

    def _solve_interior_1(self):
        self.interior = {1: solve_acoustic(self._initial_1(), self.config.T, self.igrid)}

    def _theta_diffusivity(self):
        return 0.4 * self.ctx.kappa2

    def _erfc_profile(self, value):
        D = self._theta_diffusivity()
        return value * erfc(self.lgrid.zeta / (2.0 * np.sqrt(D * self.config.tau0)))

    def _solve_layer_1(self):
        tr = self.interior[1].trace()
        du, dth = layer_bc_k1((tr[:, 1], tr[:, 2], tr[:, 4]))
        traces = InteriorTraces({1: tr})
        st = solve_layer_order(1, self.ctx, [], traces, dth, du,
                               init_theta=self._erfc_profile(dth[0]))
        self.layers.append(st)

    def _solve_interior_2(self):
        cfg = self.config
        q1 = self.interior[1].q
        wall_u = -self.layers[0].u3_next[:, 0]
        w = cfg.wall_flow_width
        init = FluidState.from_fields(self.igrid, u=(0.0, 0.0, lambda x: wall_u[0] * np.exp(-(x / w) ** 2)),
                                      order=2)
        n = self.times.size - 1
        micro = lambda k: self.closure.flux(2, q1[k])
        self.interior[2] = solve_fluid_k(init, cfg.T, self.igrid, micro_flux=micro,
                                         bc_normal_velocity=wall_u, dt=self.dt)
        if self.interior[2].times.size != n + 1:
            raise RuntimeError("order-2 interior time grid differs from order 1")

    def _solve_layer_2(self):
        c1 = self.slip.c[1]
        st1 = self.layers[0]
        wall1 = st1.wall()
        tr2 = self.interior[2].trace()
        dth = -tr2[:, 4] + c1 * wall1["theta"][1]
        traces = InteriorTraces({1: self.interior[1].trace(), 2: tr2},
                                {(1, 1): self.interior[1].wall_gradient()})
        st2 = solve_layer_order(2, self.ctx, [st1], traces, dth,
                                init_theta=self._erfc_profile(dth[0]))
        self.layers.append(st2)
        self.traces = traces

    # -- evaluation -------------------------------------------------------
    def level(self, t):
        n = int(round(t / self.dt))
        if n < 0 or n >= self.times.size or abs(self.times[n] - t) > 1e-9 * max(1.0, t):
            raise ValueError(f"t = {t} is not a level of the common time grid")
        return n

    def _layer_fields(self):
        if not self._fields:
            ctx = self.ctx
            fb1 = self.layers[0].hydro_field(ctx)
            fb2 = self.layers[1].full_field(ctx)
            self._fields = {"fb1": (fb1, ctx.d_zeta(fb1)), "fb2": (fb2, ctx.d_zeta(fb2))}
        return self._fields

    def ingredient_values(self, n, x, eps, with_derivative=False):
        """Unscaled perturbations of each ingredient at level n, with d/dx3
        (transport of the Knudsen part is replaced by -L phi)."""
        x = np.asarray(x, dtype=float)
        g = self.vgrid
        out, der = {}, {}
        q1 = self.interior[1].values_at(n, x)
        q2 = self.interior[2].values_at(n, x)
        out["f1"] = hydro.field(q1, g)
        out["f2"] = hydro.field(q2, g) + self.closure.values(2, q1)
        zeta = x / np.sqrt(eps)
        for name, (F, dF) in self._layer_fields().items():
            out[name] = F.interpolated(n, self.lgrid.zeta, zeta)
            if with_derivative:
                der[name] = dF.interpolated(n, self.lgrid.zeta, zeta) / np.sqrt(eps)
        out["fbb2"] = self.fbb2.values(n, x / eps)
        if with_derivative:
            traj1, traj2 = self.interior[1], self.interior[2]
            d1 = self._interp_gradient(traj1, n, x)
            d2 = self._interp_gradient(traj2, n, x)
            der["f1"] = hydro.field(d1, g)
            der["f2"] = hydro.field(d2, g) + self.closure.table.closure(q1, d1)
            a = float(self.fbb2.coeffs[0][n])
            rows = np.empty((x.size, g.size))
            xi = x / eps
            prof = self._fbb2_transport[0]
            for v in range(g.size):
                rows[:, v] = np.interp(xi, self.fbb2.xi, prof[:, v], right=0.0)
            # v3 d/dx3 [eps phi(x3/eps)] = v3 d/dxi phi = -L phi
            der["fbb2_transport"] = a * rows
        return out, der

    @staticmethod
    def _interp_gradient(traj, n, x):
        dq = cell_gradient(traj.q[n], traj.grid)
        xs = traj.grid.x
        return np.stack([np.interp(x, xs, dq[a]) for a in range(5)])

    def compose(self, eps, t, x, K=None, exclude=()):
        K = self.config.K if K is None else K
        n = self.level(t)
        g = self.vgrid
        vals, _ = self.ingredient_values(n, x, eps)
        ings = {}
        f = np.zeros((np.size(x), g.size))
        for name in _orders(K):
            k = 1 if name in ("f1", "fb1") else 2
            ings[name] = np.sqrt(eps) ** k * vals[name]
            if name not in exclude:
                f = f + ings[name]
        F = g.mu + g.sqrt_mu * f
        fmin = float(F.min())
        if fmin < 0:
            warnings.warn(f"composite is negative (min {fmin:.3g}) at eps = {eps}")
        return CompositeField(float(self.times[n]), eps, K, np.asarray(x, float), F, ings, fmin)

    def residual(self, eps, x, n=None, K=None):
        """Kinetic residual of the composite at level n (default: last).

        Returns (interior_residual_norm, boundary_residual_norm) of
        (d_t F + v3 d_x3 F - Q(F)/eps) / sqrt(mu) in L2(dx3 dv), with the
        nonlinear relaxation operator, and the Maxwell-condition mismatch at
        the wall.
        """
        K = self.config.K if K is None else K
        n = self.times.size - 1 if n is None else n
        if n < 2:
            raise ValueError("the residual needs three time levels")
        x = np.asarray(x, dtype=float)
        g = self.vgrid
        comps = [self._composite_pert(n - j, x, eps, K) for j in (2, 1, 0)]
        dfdt = (comps[0] - 4.0 * comps[1] + 3.0 * comps[2]) / (2.0 * self.dt)
        vals, der = self.ingredient_values(n, x, eps, with_derivative=True)
        dfdx = np.zeros_like(dfdt)
        transport = np.zeros_like(dfdt)
        for name in _orders(K):
            k = 1 if name in ("f1", "fb1") else 2
            if name == "fbb2":
                transport = transport + np.sqrt(eps) ** k / eps * der["fbb2_transport"]
            else:
                dfdx = dfdx + np.sqrt(eps) ** k * der[name]
        f = comps[2]
        F = g.mu + g.sqrt_mu * f
        Q = self.config.nu0 * (local_maxwellian(F, g) - F)
        r = dfdt + g.v3 * dfdx + transport - Q / (eps * g.sqrt_mu)
        interior = np.sqrt(trapezoid(g.integrate(r * r), x))
        boundary = maxwell_mismatch(F[0], g, self.config.alpha)
        return float(interior), float(boundary)

    def _composite_pert(self, n, x, eps, K):
        vals, _ = self.ingredient_values(n, x, eps)
        f = np.zeros((x.size, self.vgrid.size))
        for name in _orders(K):
            k = 1 if name in ("f1", "fb1") else 2
            f = f + np.sqrt(eps) ** k * vals[name]
        return f

    def residual_grid(self, eps, points=1500):
        """x3 nodes resolving the eps and sqrt(eps) scales next to the wall."""
        L = self.config.length
        inner = np.geomspace(eps * 1e-3, L, points)
        return np.concatenate([[0.0], inner])


def local_maxwellian(F, grid):
    """Continuous Maxwellian with the discrete (rho, u3, T) moments of F."""
    F = np.asarray(F, dtype=float)
    rho = grid.integrate(F)
    u = grid.integrate(F * grid.v3) / rho
    e = grid.integrate(F * grid.speed2) / rho
    T = (e - u * u) / 3.0
    if np.any(T <= 0) or np.any(rho <= 0):
        raise FloatingPointError("non-positive density or temperature")
    c2 = (grid.v3[None, :] - u[..., None]) ** 2 + (grid.speed2 - grid.v3**2)[None, :]
    return (rho / (2 * np.pi * T) ** 1.5)[..., None] * np.exp(-0.5 * c2 / T[..., None])


def maxwell_mismatch(F_wall, grid, alpha):
    """Weighted L2 size of F - [(1-alpha) R F + alpha M_w sigma] on v3 > 0."""
    inc = grid.incoming
    out = grid.outgoing
    flux_out = np.sum(grid.weights[out] * np.abs(grid.v3[out]) * F_wall[out])
    flux_mu = np.sum(grid.weights[inc] * grid.v3[inc] * grid.mu[inc])
    target = (1.0 - alpha) * F_wall[grid.reflect] + alpha * grid.mu * flux_out / flux_mu
    d = (F_wall - target) / grid.sqrt_mu
    return float(np.sqrt(np.sum(grid.weights[inc] * grid.v3[inc] * d[inc] ** 2)))


def fit_slope(eps_list, values):
    """Least-squares slope of log(values) against log(eps)."""
    e = np.log(np.asarray(eps_list, dtype=float))
    v = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(e, v, 1)[0])


def layer_norm(field_values, x, grid):
    """L2(dx3 dv) norm of a perturbation sampled on x3 nodes."""
    return float(np.sqrt(trapezoid(grid.integrate(field_values**2), x)))


def layer_norm_scaling(expansion: Expansion, eps_list, t=None, points=20001):
    """(eps, ||f^b_1(t, x3/sqrt(eps))||) rows and the fitted slope.

    The norm is taken on one fixed x3 grid for every eps, so the values
    differ only through the argument rescaling.
    """
    eps_list = list(eps_list)
    if not eps_list:
        raise ValueError("empty eps list")
    t = expansion.config.T if t is None else t
    n = expansion.level(t)
    F = expansion._layer_fields()["fb1"][0]
    X = expansion.lgrid.zeta_max * np.sqrt(max(eps_list))
    x = np.linspace(0.0, X, points)
    norms = []
    for eps in eps_list:
        vals = F.interpolated(n, expansion.lgrid.zeta, x / np.sqrt(eps))
        norms.append(layer_norm(vals, x, expansion.vgrid))
    slope = fit_slope(eps_list, norms) if len(eps_list) > 1 and min(norms) > 0 else float("nan")
    return list(zip(eps_list, norms)), slope


def profile_norm_scaling(profile, eps_list, x):
    """Same scaling for a scalar profile g(zeta) (analytic checks)."""
    norms = [float(np.sqrt(trapezoid(profile(x / np.sqrt(e)) ** 2, x))) for e in eps_list]
    return norms, fit_slope(eps_list, norms)


def residual_table(expansion: Expansion, eps_list, K=None):
    """Rows (eps, K, interior_residual, boundary_residual) and the interior slope."""
    K = expansion.config.K if K is None else K
    rows = []
    for eps in eps_list:
        x = expansion.residual_grid(eps)
        ri, rb = expansion.residual(eps, x, K=K)
        rows.append((eps, K, ri, rb))
    slope = fit_slope([r[0] for r in rows], [r[2] for r in rows]) if len(rows) > 1 else float("nan")
    return rows, slope
