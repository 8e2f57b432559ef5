"""Viscous boundary layer in zeta = x3 / sqrt(eps).

Kinetic layer fields are kept as short sums of (coefficient(t, zeta),
velocity function) terms so that derivatives act on coefficients and
velocity moments are scalars.  The order-k layer is solved by

1. building (I-P)f^b_{k+1} with the still unknown (u_bar, theta)_k set to
   zero; by parity and the premises u^b_{1,3} = 0 and u^0_{1,3}|wall = 0 the
   unknowns do not enter the fluxes that feed the heat equations,
2. solving the two heat equations (momentum, temperature),
3. rebuilding (I-P)f^b_{k+1} in full and integrating the closures for
   u^b_{k+1,3} and p^b_{k+1} inward from zeta_max.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import math

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.linalg import solve_banded
from scipy.optimize import brentq
from scipy.special import erfc

from . import hydro
from .burnett import burnett_functions, transport_coefficients
from .velocity_space import VelocityGrid


# ---------------------------------------------------------------------------
# grid and heat solver
# ---------------------------------------------------------------------------
@dataclass
class LayerGrid:
    zeta: np.ndarray
    stretch: str = "graded"

    def __post_init__(self):
        self.zeta = np.asarray(self.zeta, dtype=float)
        if self.zeta[0] != 0.0 or np.any(np.diff(self.zeta) <= 0):
            raise ValueError("zeta nodes must start at 0 and increase")

    @property
    def zeta_max(self):
        return float(self.zeta[-1])

    @property
    def size(self):
        return self.zeta.size

    @classmethod
    def graded(cls, zeta_max=40.0, cells=400, h0=0.02):
        uniform = zeta_max / cells
        if h0 >= uniform:
            return cls.uniform(zeta_max, cells)
        beta = brentq(lambda b: zeta_max * np.expm1(b / cells) / np.expm1(b) - h0, 1e-8, 200.0)
        s = np.arange(cells + 1) / cells
        z = zeta_max * np.expm1(beta * s) / np.expm1(beta)
        z[0], z[-1] = 0.0, zeta_max
        return cls(z, "graded")

    @classmethod
    def uniform(cls, zeta_max=40.0, cells=400):
        return cls(np.linspace(0.0, zeta_max, cells + 1), "uniform")


def _laplacian_bands(z, diffusivity, shift):
    """Banded form of (shift I - D d_zz) with Dirichlet rows at both ends."""
    n = z.size
    hm = np.diff(z)[:-1]
    hp = np.diff(z)[1:]
    lo = 2.0 / (hm * (hm + hp))
    up = 2.0 / (hp * (hm + hp))
    ab = np.zeros((3, n))
    ab[1, 0] = ab[1, -1] = 1.0
    ab[1, 1:-1] = shift + diffusivity * (lo + up)
    ab[0, 2:] = -diffusivity * up
    ab[2, :-2] = -diffusivity * lo
    return ab


def solve_heat(diffusivity, dirichlet, init, grid: LayerGrid, dt, source=None,
               check_compatibility=True, tol=1e-10, far_value=0.0):
    """u_t - D u_zz = s on (0, zeta_max), u(0) = dirichlet(t), u(zeta_max) = 0.

    BDF2 in time after one backward Euler step; ``dirichlet`` and ``source``
    are given on the uniform time levels t_n = n dt.  Returns (nt, nz).
    """
    if diffusivity <= 0:
        raise ValueError("diffusivity must be positive")
    dirichlet = np.asarray(dirichlet, dtype=float)
    init = np.asarray(init, dtype=float)
    nt, nz = dirichlet.size, grid.size
    if init.shape != (nz,):
        raise ValueError("initial profile does not match the layer grid")
    scale = max(np.abs(init).max(), np.abs(dirichlet).max(), 1.0)
    if abs(init[-1] - far_value) > 1e-6 * scale:
        raise ValueError("initial profile does not decay at zeta_max")
    if check_compatibility and abs(init[0] - dirichlet[0]) > tol * scale:
        raise ValueError(
            f"corner data incompatible: init(0) = {init[0]:.6g}, boundary value {dirichlet[0]:.6g}")
    if source is not None:
        source = np.broadcast_to(np.asarray(source, dtype=float), (nt, nz))
    U = np.empty((nt, nz))
    U[0] = init
    if nt == 1:
        return U
    be = _laplacian_bands(grid.zeta, diffusivity, 1.0 / dt)
    bdf = _laplacian_bands(grid.zeta, diffusivity, 1.5 / dt)
    for n in range(1, nt):
        if n == 1:
            rhs = U[0] / dt
            ab = be
        else:
            rhs = (2.0 * U[n - 1] - 0.5 * U[n - 2]) / dt
            ab = bdf
        if source is not None:
            rhs = rhs + source[n]
        rhs = rhs.copy()
        rhs[0] = dirichlet[n]
        rhs[-1] = far_value
        U[n] = solve_banded((1, 1), ab, rhs)
    return U


def heat_diffusivity(kind, model):
    k1, k2 = transport_coefficients(model)
    if kind == "momentum":
        return k1
    if kind == "temperature":
        return 0.4 * k2
    raise ValueError("kind must be 'momentum' or 'temperature'")


# ---------------------------------------------------------------------------
# calculus on stored trajectories
# ---------------------------------------------------------------------------
def time_derivative(c, dt):
    """Second-order backward differences along axis 0 (forward at the start)."""
    c = np.asarray(c, dtype=float)
    out = np.empty_like(c)
    n = c.shape[0]
    if n < 3:
        out[:] = np.gradient(c, dt, axis=0) if n > 1 else 0.0
        return out
    out[2:] = (3.0 * c[2:] - 4.0 * c[1:-1] + c[:-2]) / (2.0 * dt)
    out[0] = (-3.0 * c[0] + 4.0 * c[1] - c[2]) / (2.0 * dt)
    out[1] = (c[2] - c[0]) / (2.0 * dt)
    return out


def zeta_derivative(c, zeta):
    c = np.asarray(c, dtype=float)
    if c.shape[-1] == 1:
        return np.zeros_like(c)
    return np.gradient(c, zeta, axis=-1, edge_order=2)


def tail_integral(c, zeta):
    """int_zeta^zeta_max c ds along the last axis (trapezoid)."""
    c = np.asarray(c, dtype=float)
    full = cumulative_trapezoid(c, zeta, axis=-1, initial=0.0)
    return full[..., -1:] - full


def wall_derivatives(c, zeta, npts=5):
    """(value, d/dzeta, d2/dzeta2) at zeta = 0 from a polynomial through the
    first ``npts`` nodes; c has zeta on the last axis."""
    c = np.asarray(c, dtype=float)
    z = zeta[:npts]
    V = np.vander(z, npts, increasing=True)
    coef = np.linalg.solve(V, np.moveaxis(c[..., :npts], -1, 0).reshape(npts, -1))
    shape = c.shape[:-1]
    return (coef[0].reshape(shape), coef[1].reshape(shape), 2.0 * coef[2].reshape(shape))


# ---------------------------------------------------------------------------
# term representation of kinetic layer fields
# ---------------------------------------------------------------------------
class LayerField:
    """sum_i c_i(t, zeta) g_i(v); coefficients broadcast against (nt, nz)."""

    def __init__(self, terms=()):
        self.terms = [(np.asarray(c, dtype=float), g) for c, g in terms]

    def __add__(self, other):
        return LayerField(self.terms + other.terms)

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def scale(self, a):
        return LayerField([(a * c, g) for c, g in self.terms])

    def map_coeff(self, fn):
        return LayerField([(fn(c), g) for c, g in self.terms])

    def map_velocity(self, fn, cache=None):
        cache = {} if cache is None else cache
        out = []
        for c, g in self.terms:
            key = id(g)
            if key not in cache:
                cache[key] = (g, fn(g))
            out.append((c, cache[key][1]))
        return LayerField(out).pruned()

    def pruned(self, tol=1e-14):
        keep = [(c, g) for c, g in self.terms
                if np.max(np.abs(g)) > tol and np.any(c != 0.0)]
        return LayerField(keep)

    def moment(self, M, grid, shape=None):
        w = grid.weights * M
        out = 0.0
        for c, g in self.terms:
            out = out + c * float(np.sum(w * g))
        if shape is not None:
            out = np.broadcast_to(out, shape).copy()
        return out

    def values(self, n, shape_nz):
        """(nz, V) kinetic values at time level n."""
        out = 0.0
        for c, g in self.terms:
            cn = np.broadcast_to(c[n] if c.shape[0] > 1 else c[0], (shape_nz,))
            out = out + np.multiply.outer(cn, g)
        return out

    def interpolated(self, n, zeta_nodes, points):
        """(len(points), V) values at arbitrary zeta >= 0 (zero beyond zeta_max)."""
        out = np.zeros((np.size(points), self.terms[0][1].size)) if self.terms else 0.0
        for c, g in self.terms:
            row = c[n] if c.shape[0] > 1 else c[0]
            row = np.broadcast_to(row, zeta_nodes.shape)
            cv = np.interp(points, zeta_nodes, row, right=0.0)
            out = out + np.multiply.outer(cv, g)
        return out

    def __len__(self):
        return len(self.terms)


# ---------------------------------------------------------------------------
# context: model, grids and cached velocity functions
# ---------------------------------------------------------------------------
class LayerContext:
    """Shared state for assembling layer fields at all orders."""

    def __init__(self, model, grid: LayerGrid, times, taylor_depth=2):
        self.model = model
        self.vgrid = model.grid
        self.grid = grid
        self.times = np.asarray(times, dtype=float)
        self.dt = float(self.times[1] - self.times[0]) if self.times.size > 1 else 1.0
        self.nt = self.times.size
        self.nz = grid.size
        self.taylor_depth = taylor_depth
        self.basis = hydro.basis(self.vgrid)
        self.kappa1, self.kappa2 = transport_coefficients(model)
        B = burnett_functions(self.vgrid)
        self.B3 = B["B3"]
        self.A_3 = {3: B["A33"]}
        if isinstance(self.vgrid, VelocityGrid):
            self.A_3[1] = B["A13"]
            self.A_3[2] = B["A23"]
        self._pair_cache = {}
        self._transport_cache = {}
        self._inv_cache = {}

    # -- building blocks --------------------------------------------------
    def hydro(self, coeffs):
        """Hydrodynamic LayerField from {name: coefficient array}."""
        terms = []
        for name, c in coeffs.items():
            c = np.asarray(c, dtype=float)
            if not np.any(c != 0.0):
                continue
            if name not in self.basis:
                raise ValueError(f"component {name} is not available on this velocity grid")
            terms.append((c, self.basis[name]))
        return LayerField(terms)

    def trace(self, q):
        """Time-only hydrodynamic field from wall values (nt, 5)."""
        q = np.asarray(q, dtype=float)
        return self.hydro({n: q[:, a][:, None] for a, n in enumerate(hydro.NAMES)})

    def pair(self, F: LayerField, G: LayerField):
        """L^-1 [Gamma(F, G) + Gamma(G, F)] term by term."""
        out = []
        for c, f in F.terms:
            for d, g in G.terms:
                key = (id(f), id(g)) if id(f) <= id(g) else (id(g), id(f))
                if key not in self._pair_cache:
                    self._pair_cache[key] = (f, g, self.model.pair_closure(f, g))
                h = self._pair_cache[key][2]
                if np.max(np.abs(h)) > 1e-14:
                    out.append((c * d, h))
        return LayerField(out)

    def inv_transport(self, F: LayerField):
        """-L^-1 (I-P)(v3 d_zeta F)."""
        def op(g):
            return -self.model.invert_L(self.model.P.complement(self.vgrid.v3 * g), check=False)
        return F.map_coeff(lambda c: zeta_derivative(c, self.grid.zeta)).map_velocity(
            op, self._transport_cache)

    def inv(self, F: LayerField):
        """L^-1 (I-P) F."""
        def op(g):
            return self.model.invert_L(self.model.P.complement(g), check=False)
        return F.map_velocity(op, self._inv_cache)

    def d_t(self, F):
        return F.map_coeff(lambda c: time_derivative(c, self.dt) if c.shape[0] > 1 else 0.0 * c)

    def d_zeta(self, F):
        return F.map_coeff(lambda c: zeta_derivative(c, self.grid.zeta))

    def zeta_power(self, F, l):
        z = self.grid.zeta[None, :] ** l
        return F.map_coeff(lambda c: c * z)

    def moment(self, F, M):
        return F.moment(M, self.vgrid, shape=(self.nt, self.nz))


# ---------------------------------------------------------------------------
# interior data seen by the layer
# ---------------------------------------------------------------------------
@dataclass
class InteriorTraces:
    """Wall traces of the interior orders as time series.

    values[i]: (nt, 5) hydrodynamic coefficients of f_i at x3 = 0;
    derivs[(i, l)]: (nt, 5) of d^l f_i / dx3^l at x3 = 0;
    micro[i]: LayerField of (I-P)f_i at the wall (optional).
    """

    values: dict
    derivs: dict = field(default_factory=dict)
    micro: dict = field(default_factory=dict)

    def full(self, ctx, i):
        f = ctx.trace(self.values[i])
        if i in self.micro:
            f = f + self.micro[i]
        return f

    def taylor(self, ctx, i, l):
        if (i, l) not in self.derivs:
            raise KeyError(f"missing wall derivative d^{l} f_{i}")
        return ctx.trace(self.derivs[(i, l)])


# ---------------------------------------------------------------------------
# layer states and closures
# ---------------------------------------------------------------------------
@dataclass
class ViscousLayerState:
    order: int
    grid: LayerGrid
    times: np.ndarray
    u_bar: np.ndarray  # (2, nt, nz)
    theta: np.ndarray
    rho: np.ndarray
    u3: np.ndarray  # u^b_{k,3}
    p: np.ndarray  # p^b_k
    micro: LayerField  # (I-P) f^b_k
    u3_next: np.ndarray = None
    p_next: np.ndarray = None
    micro_next: LayerField = None

    def hydro_coeffs(self):
        return {"rho": self.rho, "u1": self.u_bar[0], "u2": self.u_bar[1], "u3": self.u3,
                "theta": self.theta}

    def hydro_field(self, ctx):
        return ctx.hydro(self.hydro_coeffs())

    def full_field(self, ctx):
        return self.hydro_field(ctx) + self.micro

    def wall(self):
        """Values and zeta-derivatives at the wall, dict name -> (value, d1, d2)."""
        out = {}
        for name, c in self.hydro_coeffs().items():
            out[name] = wall_derivatives(np.broadcast_to(c, (self.times.size, self.grid.size)),
                                         self.grid.zeta)
        return out

    def rows(self, every=1):
        """(t, zeta, u1b, u2b, thetab, rhob, u3-next, p-next) table rows."""
        out = []
        nxt_u = self.u3_next if self.u3_next is not None else np.zeros_like(self.theta)
        nxt_p = self.p_next if self.p_next is not None else np.zeros_like(self.theta)
        for n in range(0, self.times.size, every):
            for j, z in enumerate(self.grid.zeta):
                out.append((self.times[n], z, self.u_bar[0, n, j], self.u_bar[1, n, j],
                            self.theta[n, j], self.rho[n, j], nxt_u[n, j], nxt_p[n, j]))
        return out


def layer_bc_k1(trace):
    """Dirichlet data (u_bar, theta) at zeta = 0 for the order-1 layer from the
    interior wall values (u1, u2, theta)."""
    u1, u2, th = (np.asarray(a, dtype=float) for a in trace)
    return np.stack([-u1, -u2]), -th


def normal_velocity_next(rho_k, ctx: LayerContext, tangential_divergence=None):
    """u^b_{k+1,3}(zeta) = int_zeta^inf (d_t rho^b_k + div_bar u^b_k)."""
    if rho_k is None:
        raise ValueError("the layer density trajectory is required")
    integrand = time_derivative(rho_k, ctx.dt)
    if tangential_divergence is not None:
        integrand = integrand + tangential_divergence
    return tail_integral(integrand, ctx.grid.zeta)


def pressure_next(u3_k, micro_next: LayerField, ctx: LayerContext):
    """p^b_{k+1}(zeta) = int_zeta^inf d_t u^b_{k,3} - <A33, (I-P) f^b_{k+1}>.

    Planar form of the normal momentum balance with p -> 0 at infinity.
    """
    dtu = time_derivative(np.broadcast_to(u3_k, (ctx.nt, ctx.nz)), ctx.dt)
    return tail_integral(dtu, ctx.grid.zeta) - ctx.moment(micro_next, ctx.A_3[3])


def _j_term(k, ctx, layers, interior: InteriorTraces, micro_k):
    """J_{k-1}: the part of (I-P)f^b_{k+1} built from already known orders."""
    if k == 1:
        return LayerField()
    if not getattr(ctx.model, "hydrodynamic_gamma", False):
        raise NotImplementedError(
            "layer orders >= 2 need a collision model whose bilinear term only sees "
            "hydrodynamic parts")
    out = ctx.inv_transport(micro_k)
    prev = layers[k - 2]  # order k-1
    out = out - ctx.inv(ctx.d_t(prev.micro))
    full_b = {j: layers[j - 1].full_field(ctx) for j in range(1, k)}
    for i in range(2, k + 1):
        j = k + 1 - i
        if 1 <= j < k:
            out = out + ctx.pair(interior.full(ctx, i), full_b[j])
    for i in range(2, k):
        j = k + 1 - i
        if i <= j < k:
            w = 0.5 if i == j else 1.0
            out = out + ctx.pair(full_b[i], full_b[j]).scale(w)
    for l in range(1, ctx.taylor_depth + 1):
        for i in range(1, k + 1 - l):
            j = k + 1 - l - i
            if 1 <= j < k:
                term = ctx.pair(interior.taylor(ctx, i, l), full_b[j])
                out = out + ctx.zeta_power(term, l).scale(1.0 / math.factorial(l))
    out = out + ctx.pair(interior.full(ctx, 1) + full_b[1], micro_k)
    return out


def layer_microscopic(k, hydro_k: LayerField, ctx: LayerContext, layers, interior: InteriorTraces,
                      micro_k=None):
    """(I-P) f^b_{k+1} as a LayerField.

    hydro_k is P f^b_k; ``layers`` holds the completed states of orders
    1..k-1; micro_k is (I-P) f^b_k (None for k = 1).
    """
    if k not in (1, 2, 3):
        raise ValueError("layer orders 1..3 are supported")
    micro_k = micro_k if micro_k is not None else LayerField()
    out = ctx.inv_transport(hydro_k)
    f01 = interior.full(ctx, 1)
    if k == 1:
        # Gamma(f^b_1, f^b_1) appears once: half weight on the self term
        out = out + ctx.pair(f01 + hydro_k.scale(0.5), hydro_k)
    else:
        fb1 = layers[0].hydro_field(ctx)
        out = out + ctx.pair(f01 + fb1, hydro_k)
        out = out + _j_term(k, ctx, layers, interior, micro_k)
    return out


def _check_premises(layers, interior, tol=1e-10):
    u03 = np.asarray(interior.values[1])[:, 3]
    if np.max(np.abs(u03)) > tol:
        raise ValueError("the order-1 interior normal velocity must vanish at the wall")
    if layers and np.max(np.abs(layers[0].u3)) > tol:
        raise ValueError("u^b_{1,3} must vanish identically")


def solve_layer_order(k, ctx: LayerContext, layers, interior: InteriorTraces, dirichlet_theta,
                      dirichlet_u=None, init_theta=None, init_u=None, check_compatibility=True):
    """Solve the order-k viscous layer and its closures for order k+1."""
    nt, nz = ctx.nt, ctx.nz
    _check_premises(layers, interior)
    if k == 1:
        u3_k = np.zeros((nt, nz))
        p_k = np.zeros((nt, nz))
        micro_k = LayerField()
    else:
        prev = layers[k - 2]
        u3_k, p_k, micro_k = prev.u3_next, prev.p_next, prev.micro_next
    zeros = np.zeros((nt, nz))
    dirichlet_u = np.zeros((2, nt)) if dirichlet_u is None else np.asarray(dirichlet_u, float)
    init_theta = np.zeros(nz) if init_theta is None else np.asarray(init_theta, float)
    init_u = np.zeros((2, nz)) if init_u is None else np.asarray(init_u, float)

    partial = ctx.hydro({"u3": u3_k})
    R = layer_microscopic(k, partial, ctx, layers, interior, micro_k)
    src_theta = 0.4 * time_derivative(p_k, ctx.dt) - 0.4 * zeta_derivative(
        ctx.moment(R, ctx.B3), ctx.grid.zeta)
    D_theta = 0.4 * ctx.kappa2
    theta = solve_heat(D_theta, dirichlet_theta, init_theta, ctx.grid, ctx.dt, src_theta,
                       check_compatibility)
    u_bar = np.zeros((2, nt, nz))
    for i in (1, 2):
        if i not in ctx.A_3:
            if np.any(dirichlet_u[i - 1] != 0) or np.any(init_u[i - 1] != 0):
                raise ValueError("tangential layer velocity needs a full velocity grid")
            continue
        src = -zeta_derivative(ctx.moment(R, ctx.A_3[i]), ctx.grid.zeta)
        u_bar[i - 1] = solve_heat(ctx.kappa1, dirichlet_u[i - 1], init_u[i - 1], ctx.grid, ctx.dt,
                                  src, check_compatibility)
    rho = p_k - theta
    state = ViscousLayerState(k, ctx.grid, ctx.times, u_bar, theta, rho, u3_k + zeros, p_k + zeros,
                              micro_k)
    full = state.hydro_field(ctx)
    state.micro_next = layer_microscopic(k, full, ctx, layers, interior, micro_k)
    state.u3_next = normal_velocity_next(rho, ctx)
    state.p_next = pressure_next(state.u3, state.micro_next, ctx)
    return state


def assemble_fb1(state: ViscousLayerState, ctx: LayerContext, tol=1e-12):
    """P-only order-1 layer field after checking the order-1 constraints."""
    if np.max(np.abs(state.u3)) > tol or np.max(np.abs(state.rho + state.theta)) > tol:
        raise ValueError("order-1 layer violates u^b_{1,3} = 0 or p^b_1 = 0")
    return state.hydro_field(ctx)


def assemble_fb2(state2: ViscousLayerState, ctx: LayerContext):
    """P f^b_2 + (I-P) f^b_2 (the latter stored on the order-2 state)."""
    return state2.full_field(ctx)


def weighted_tail_fraction(values, zeta, l=2):
    """Share of the (1 + zeta)^l weighted L2 norm located beyond zeta_max / 2."""
    w = (1.0 + zeta) ** (2 * l)
    dens = np.asarray(values) ** 2 * w
    total = trapezoid(dens, zeta, axis=-1)
    half = zeta >= 0.5 * zeta[-1]
    tail = trapezoid(dens[..., half], zeta[half], axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, tail / total, 0.0)


def erfc_benchmark(levels=4, diffusivity=1.0, t0=0.25, T=1.0, zeta_max=16.0, cells=40, steps=8):
    """Heat equation with unit wall value started from the exact erfc profile.

    Space and time are refined together by factors of two.  Returns rows
    (cells, steps, max_error) and the observed orders between levels.
    """
    rows = []
    for lev in range(levels):
        m = 2**lev
        grid = LayerGrid.uniform(zeta_max, cells * m)
        nt = steps * m
        dt = (T - t0) / nt
        exact = lambda t: erfc(grid.zeta / (2.0 * np.sqrt(diffusivity * t)))
        U = solve_heat(diffusivity, np.ones(nt + 1), exact(t0), grid, dt,
                       far_value=float(exact(t0)[-1]))
        err = np.max(np.abs(U[-1] - exact(T)))
        rows.append((cells * m, nt, float(err)))
    orders = [float(np.log2(a[2] / b[2])) for a, b in zip(rows, rows[1:])]
    return rows, orders
