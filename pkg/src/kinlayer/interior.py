"""Interior fluid hierarchy on a planar half-line x3 in [0, L].

The acoustic system and its sourced order-k versions are advanced by a
MUSCL finite-volume scheme with the exact (upwind) linear Riemann flux and
a two-stage SSP Runge-Kutta step.  State arrays hold cell averages of
(rho, u1, u2, u3, theta) on axis 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import hydro
from .burnett import burnett_functions

SOUND_SPEED = np.sqrt(5.0 / 3.0)

# flux matrix of the planar acoustic system in (rho, u1, u2, u3, theta)
FLUX = np.zeros((5, 5))
FLUX[0, 3] = 1.0
FLUX[3, 0] = FLUX[3, 4] = 1.0
FLUX[4, 3] = 2.0 / 3.0
# |A| = A^2 / c because the eigenvalues are -c, 0, c
ABS_FLUX = FLUX @ FLUX / SOUND_SPEED
FLUX_PLUS = 0.5 * (FLUX + ABS_FLUX)
FLUX_MINUS = 0.5 * (FLUX - ABS_FLUX)


@dataclass
class InteriorGrid:
    length: float = 20.0
    cells: int = 2000

    def __post_init__(self):
        if self.length <= 0 or self.cells < 4:
            raise ValueError("interior grid needs length > 0 and at least 4 cells")
        self.h = self.length / self.cells
        self.x = (np.arange(self.cells) + 0.5) * self.h
        self.faces = np.arange(self.cells + 1) * self.h

    @property
    def x3_nodes(self):
        return self.x


@dataclass
class FluidState:
    order: int
    time: float
    q: np.ndarray  # (5, cells)

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        if self.q.ndim != 2 or self.q.shape[0] != 5:
            raise ValueError("fluid state must have shape (5, cells)")
        if not np.all(np.isfinite(self.q)):
            raise ValueError("fluid state contains non-finite values")

    rho = property(lambda s: s.q[0])
    u = property(lambda s: s.q[1:4])
    theta = property(lambda s: s.q[4])

    @classmethod
    def from_fields(cls, grid, rho=0.0, u=(0.0, 0.0, 0.0), theta=0.0, order=1, time=0.0):
        """Cell averages of callables (or constants) by 3-point Gauss per cell."""
        nodes = np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
        wts = np.array([5.0, 8.0, 5.0]) / 18.0
        pts = grid.x[:, None] + 0.5 * grid.h * nodes[None, :]

        def avg(f):
            if callable(f):
                return np.asarray(f(pts), dtype=float) @ wts
            return np.full(grid.cells, float(f))

        q = np.stack([avg(rho), avg(u[0]), avg(u[1]), avg(u[2]), avg(theta)])
        return cls(order, time, q)


@dataclass
class FluidTrajectory:
    order: int
    grid: InteriorGrid
    times: np.ndarray
    q: np.ndarray  # (nt, 5, cells)
    wall_velocity: np.ndarray  # prescribed u3 at x3 = 0, (nt,)
    wall_mass_flux: np.ndarray = field(default=None)  # time-integrated flux through x3 = 0
    far_mass_flux: np.ndarray = field(default=None)  # time-integrated flux through x3 = L

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    def state(self, n):
        return FluidState(self.order, float(self.times[n]), self.q[n])

    def trace(self):
        """Wall values (nt, 5): linear extrapolation, u3 from the boundary datum."""
        tr = 1.5 * self.q[:, :, 0] - 0.5 * self.q[:, :, 1]
        tr[:, 3] = self.wall_velocity
        return tr

    def wall_gradient(self):
        """d/dx3 at the wall (nt, 5) from a quadratic through the wall value
        and the first two cell averages."""
        h = self.grid.h
        q0 = self.trace()
        q1 = self.q[:, :, 0]
        q2 = self.q[:, :, 1]
        # average of a quadratic a + b x + c x^2 over [0,h] and [h,2h]
        # q1 = a + b h/2 + c h^2/3, q2 = a + 3bh/2 + 7ch^2/3
        A = np.array([[h / 2, h * h / 3], [1.5 * h, 7 * h * h / 3]])
        rhs = np.stack([q1 - q0, q2 - q0], axis=-1)
        coef = np.linalg.solve(A, rhs[..., None])[..., 0]
        return coef[..., 0]

    def values_at(self, n, x):
        """Fields (5, len(x)) at time index n by linear interpolation of cell
        centres, with the wall trace at x3 = 0."""
        x = np.asarray(x, dtype=float)
        xs = np.concatenate([[0.0], self.grid.x, [self.grid.length]])
        qn = self.q[n]
        tr = self.trace()[n]
        far = 1.5 * qn[:, -1] - 0.5 * qn[:, -2]
        table = np.concatenate([tr[:, None], qn, far[:, None]], axis=1)
        return np.stack([np.interp(x, xs, table[a]) for a in range(5)])

    def energy(self):
        """1/2 int rho^2 + |u|^2 + 3/2 theta^2 per time level."""
        q = self.q
        dens = q[:, 0] ** 2 + np.sum(q[:, 1:4] ** 2, axis=1) + 1.5 * q[:, 4] ** 2
        return 0.5 * self.grid.h * dens.sum(axis=1)

    def mass(self):
        return self.grid.h * self.q[:, 0].sum(axis=1)

    def rows(self, every=1):
        """(t, x3, rho, u1, u2, u3, theta) table rows."""
        out = []
        for n in range(0, self.times.size, every):
            for j, x in enumerate(self.grid.x):
                out.append((self.times[n], x, *self.q[n, :, j]))
        return out


# ---------------------------------------------------------------------------
# scheme
# ---------------------------------------------------------------------------
LIMITERS = ("none", "minmod", "vanleer")


def _slopes(q, limiter):
    """Limited cell differences (per cell width) with one-sided ends."""
    d = np.diff(q, axis=1)
    left = np.concatenate([d[:, :1], d], axis=1)
    right = np.concatenate([d, d[:, -1:]], axis=1)
    if limiter == "none":
        return 0.5 * (left + right)
    if limiter == "minmod":
        return np.where(left * right > 0, np.sign(left) * np.minimum(abs(left), abs(right)), 0.0)
    if limiter == "vanleer":
        prod = left * right
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(prod > 0, 2.0 * prod / (left + right), 0.0)
        return s
    raise ValueError(f"unknown limiter {limiter!r}")


def _rhs(q, wall_u, micro_flux, source, grid, limiter):
    s = _slopes(q, limiter)
    qL = q + 0.5 * s  # right edge of each cell
    qR = q - 0.5 * s  # left edge of each cell
    n = grid.cells
    F = np.empty((5, n + 1))
    F[:, 1:n] = FLUX_PLUS @ qL[:, :-1] + FLUX_MINUS @ qR[:, 1:]
    c = SOUND_SPEED
    # wall: outgoing invariant p - c u from the interior, u3 prescribed
    qw = qR[:, 0]
    p_star = qw[0] + qw[4] - c * qw[3] + c * wall_u
    F[:, 0] = [wall_u, 0.0, 0.0, p_star, 2.0 / 3.0 * wall_u]
    # far end: nothing enters, outgoing invariant p + c u from the interior
    qf = qL[:, -1]
    w_out = qf[0] + qf[4] + c * qf[3]
    F[:, n] = [w_out / (2 * c), 0.0, 0.0, 0.5 * w_out, w_out / (3 * c)]
    if micro_flux is not None:
        m = micro_flux
        faces = np.empty((5, n + 1))
        faces[:, 1:n] = 0.5 * (m[:, 1:] + m[:, :-1])
        faces[:, 0] = 1.5 * m[:, 0] - 0.5 * m[:, 1]
        faces[:, n] = 1.5 * m[:, -1] - 0.5 * m[:, -2]
        F = F + faces
    out = -(F[:, 1:] - F[:, :-1]) / grid.h
    if source is not None:
        out = out + source
    return out, F[0, 0], F[0, n]


def _at(data, n, default=None):
    if data is None:
        return default
    if callable(data):
        return data(n)
    return data[n]


def _march(init: FluidState, grid, n_steps, dt, wall_u=None, micro_flux=None, sources=None,
           limiter="none", order=None):
    """Advance n_steps of SSP-RK2.  ``wall_u``, ``micro_flux`` and ``sources``
    are indexed by time level (arrays over levels or callables of the
    level index)."""
    q = init.q.copy()
    nt = n_steps + 1
    Q = np.empty((nt, 5, grid.cells))
    Q[0] = q
    wall = np.array([_at(wall_u, n, 0.0) for n in range(nt)], dtype=float)
    mass_in = np.zeros(nt)
    mass_out = np.zeros(nt)
    for n in range(n_steps):
        k1, a1, b1 = _rhs(q, wall[n], _at(micro_flux, n), _at(sources, n), grid, limiter)
        q1 = q + dt * k1
        k2, a2, b2 = _rhs(q1, wall[n + 1], _at(micro_flux, n + 1), _at(sources, n + 1), grid,
                          limiter)
        q = 0.5 * q + 0.5 * (q1 + dt * k2)
        mass_in[n + 1] = mass_in[n] + 0.5 * dt * (a1 + a2)
        mass_out[n + 1] = mass_out[n] + 0.5 * dt * (b1 + b2)
        if not np.all(np.isfinite(q)):
            raise FloatingPointError("interior solver produced non-finite values")
        Q[n + 1] = q
    times = init.time + dt * np.arange(nt)
    return FluidTrajectory(order or init.order, grid, times, Q, wall, mass_in, mass_out)


def time_step(grid, cfl=0.5):
    return cfl * grid.h / SOUND_SPEED


def _steps(T, dt, cfl, grid):
    if dt is None:
        dt = time_step(grid, cfl)
        n = int(np.ceil(T / dt - 1e-12))
        dt = T / n
    else:
        n = int(round(T / dt))
        if abs(n * dt - T) > 1e-9 * max(T, 1.0):
            raise ValueError("T must be an integer multiple of dt")
    if dt * SOUND_SPEED / grid.h > 1.0 + 1e-12:
        raise ValueError(f"CFL violation: c dt / h = {dt * SOUND_SPEED / grid.h:.3f} > 1")
    return n, dt


def solve_acoustic(init: FluidState, T, grid: InteriorGrid, cfl=0.5, dt=None, limiter="none",
                   check_compatibility=True, tol=1e-8):
    """Order-1 acoustic system with the reflecting wall u3 = 0."""
    if check_compatibility:
        u3_wall = 1.5 * init.q[3, 0] - 0.5 * init.q[3, 1]
        if abs(u3_wall) > max(tol, 10 * grid.h * np.abs(init.q[3]).max()):
            raise ValueError("initial normal velocity does not vanish at the wall")
    n, dt = _steps(T, dt, cfl, grid)
    return _march(init, grid, n, dt, limiter=limiter, order=1)


def solve_fluid_k(init: FluidState, T, grid: InteriorGrid, micro_flux=None, bc_normal_velocity=None,
                  sources=None, cfl=0.5, dt=None, limiter="none", check_compatibility=True, tol=1e-8):
    """Order-k fluid system.

    ``micro_flux`` holds the divergence-form terms (5, cells) per time level,
    i.e. (0, <A_13, g>, <A_23, g>, <A_33, g>, 2/3 <B_3, g>) with g = (I-P)f_k;
    ``sources`` are plain right-hand sides (used for manufactured solutions);
    ``bc_normal_velocity`` is the wall datum for u3 per level.
    """
    n, dt = _steps(T, dt, cfl, grid)
    if check_compatibility and bc_normal_velocity is not None:
        g0 = _at(bc_normal_velocity, 0, 0.0)
        u3_wall = 1.5 * init.q[3, 0] - 0.5 * init.q[3, 1]
        if abs(u3_wall - g0) > max(tol, 10 * grid.h * (np.abs(init.q[3]).max() + abs(g0))):
            raise ValueError("initial normal velocity does not match the wall datum")
    for name, data in (("micro_flux", micro_flux), ("bc_normal_velocity", bc_normal_velocity),
                       ("sources", sources)):
        if data is not None and not callable(data) and len(data) < n + 1:
            raise ValueError(f"{name} must cover all {n + 1} time levels")
    return _march(init, grid, n, dt, bc_normal_velocity, micro_flux, sources, limiter,
                  order=init.order)


# ---------------------------------------------------------------------------
# kinetic pieces
# ---------------------------------------------------------------------------
def assemble_f1(state: FluidState, grid):
    """Infinitesimal Maxwellian (cells, V)."""
    return hydro.field(state.q, grid).reshape(state.q.shape[1], -1)


def assemble_f2(state1: FluidState, state2: FluidState, model, table=None):
    """Hydrodynamic part of state2 plus 1/2 (I-P)((P f1)^2 / sqrt(mu))."""
    table = table or hydro.ProductTable(model)
    return hydro.field(state2.q, model.grid) + 0.5 * table.closure(state1.q, state1.q)


def flux_moment_functions(grid):
    """Velocity functions whose moments of (I-P)f_k give the micro fluxes."""
    B = burnett_functions(grid)
    zero = np.zeros(grid.size)
    if "A13" in B and "B1" in B:  # full grid
        return [zero, B["A13"], B["A23"], B["A33"], 2.0 / 3.0 * B["B3"]]
    return [zero, zero, zero, B["A33"], 2.0 / 3.0 * B["B3"]]


class MicroClosure:
    """Moments and kinetic values of (I-P)f_k built from lower orders.

    k = 2: L^-1 Gamma(f1, f1) = 1/2 (I-P)(f1^2/sqrt(mu)).
    k = 3: (I-P)(P f1 P f2 / sqrt(mu)) - L^-1 (I-P)(v3 d3 f1); the time
    derivative drops out because d_t f1 lies in the null space.  For the
    relaxation model the closure only sees hydrodynamic parts.
    """

    def __init__(self, model):
        self.model = model
        self.table = hydro.ProductTable(model)
        self.funcs = flux_moment_functions(model.grid)
        self.T = [self.table.moment_tensor(M) for M in self.funcs]
        g = model.grid
        # L^-1 (I-P) v3 chi_a for the gradient term
        self.grad = {}
        for a, (name, chi) in enumerate(hydro.basis(g).items()):
            idx = hydro.NAMES.index(name)
            rhs = model.P.complement(g.v3 * chi)
            if np.max(np.abs(rhs)) > 1e-13:
                self.grad[idx] = model.invert_L(rhs)
        self.Mgrad = np.zeros((5, 5))
        for idx, h in self.grad.items():
            for m, M in enumerate(self.funcs):
                self.Mgrad[m, idx] = g.inner(M, h)

    def flux(self, k, q1, q2=None, dq1=None):
        """Micro flux moments (5, cells) for order k."""
        if k == 2:
            return 0.5 * np.stack([np.einsum("a...,ab,b...->...", q1, T, q1) for T in self.T])
        if k == 3:
            quad = np.stack([np.einsum("a...,ab,b...->...", q1, T, q2) for T in self.T])
            return quad - np.einsum("mb,b...->m...", self.Mgrad, dq1)
        raise ValueError("micro closures exist for k = 2, 3")

    def values(self, k, q1, q2=None, dq1=None):
        """(I-P)f_k as kinetic values (..., V)."""
        if k == 2:
            return 0.5 * self.table.closure(q1, q1)
        if k == 3:
            out = self.table.closure(q1, q2)
            for idx, h in self.grad.items():
                out = out - np.multiply.outer(dq1[idx], h)
            return out
        raise ValueError("micro closures exist for k = 2, 3")


def microscopic_part_k(lower_states, k, model, dq1=None, closure=None):
    """(I-P)f_k (cells, V) from the hydrodynamic coefficients of lower orders.

    lower_states: [state1] for k = 2, [state1, state2] for k = 3 (the
    order-2 state's hydrodynamic part); dq1 is d/dx3 of state1 (k = 3).
    """
    closure = closure or MicroClosure(model)
    if k == 2:
        out = closure.values(2, lower_states[0].q)
    elif k == 3:
        if dq1 is None:
            raise ValueError("k = 3 needs the normal derivative of the order-1 state")
        out = closure.values(3, lower_states[0].q, lower_states[1].q, dq1)
    else:
        raise ValueError("microscopic_part_k supports k in {2, 3}")
    return out


def cell_gradient(q, grid):
    """Second-order d/dx3 of cell averages (one-sided at the ends)."""
    return np.gradient(q, grid.h, axis=-1, edge_order=2)
