"""Half-space (Knudsen layer) problems with Maxwell reflection.

Discretisation: diamond-difference upwind ordinates on a graded xi grid,
collision term implicit through a Schur complement on cell moments, a
damped fixed-point iteration for the Maxwell wall condition and a specular
symmetry plane at xi_max.  The asymptotic state is read at xi_max and the
returned profiles are in defect form (asymptotic state removed).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.optimize import brentq

from . import kernels
from .burnett import burnett_functions, isotropic_functions
from .collision import make_model
from .velocity_space import VelocityGrid, lift_to_full


# ---------------------------------------------------------------------------
# grids and wall operators
# ---------------------------------------------------------------------------
@dataclass
class XiGrid:
    nodes: np.ndarray

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        if self.nodes[0] != 0.0 or np.any(np.diff(self.nodes) <= 0):
            raise ValueError("xi nodes must start at 0 and increase")
        self.widths = np.diff(self.nodes)

    @property
    def cells(self):
        return self.widths.size

    @property
    def xi_max(self):
        return float(self.nodes[-1])

    @classmethod
    def graded(cls, xi_max=30.0, cells=200, h0=0.01):
        """Exponentially stretched grid with first width close to h0."""
        uniform = xi_max / cells
        if h0 >= uniform:
            return cls(np.linspace(0.0, xi_max, cells + 1))

        def first(beta):
            return xi_max * np.expm1(beta / cells) / np.expm1(beta) - h0

        beta = brentq(first, 1e-8, 200.0)
        s = np.arange(cells + 1) / cells
        nodes = xi_max * np.expm1(beta * s) / np.expm1(beta)
        nodes[0] = 0.0
        nodes[-1] = xi_max
        return cls(nodes)

    @classmethod
    def uniform(cls, xi_max=15.0, cells=300):
        return cls(np.linspace(0.0, xi_max, cells + 1))


class WallOperator:
    """Maxwell reflection K = (1 - alpha) specular + alpha diffuse.

    The diffuse normalisation is computed with the grid quadrature so that
    K sqrt(mu) = sqrt(mu) and the wall mass flux vanishes exactly.  On
    mode-1 reduced grids the diffuse part vanishes by parity.
    """

    def __init__(self, grid, alpha):
        if not (0.0 < alpha <= 1.0):
            raise ValueError("accommodation coefficient must lie in (0, 1]")
        self.grid = grid
        self.alpha = float(alpha)
        self.inc = grid.incoming
        self.out = grid.outgoing
        self.diffuse = grid.mode != 1
        sm = grid.sqrt_mu
        w = grid.weights if grid.mode is None else getattr(grid, "base_weights", grid.weights)
        self._flux_w = np.where(self.out, np.abs(grid.v3) * w * sm, 0.0)
        self._norm = 1.0 / np.sum(self._flux_w * sm)

    def apply(self, trace):
        """Values K[trace] on incoming velocities (zero elsewhere)."""
        trace = np.asarray(trace, dtype=float)
        g = self.grid
        res = (1.0 - self.alpha) * trace[..., g.reflect]
        if self.diffuse:
            dens = (trace @ self._flux_w) * self._norm
            res = res + self.alpha * np.multiply.outer(dens, g.sqrt_mu)
        return np.where(self.inc, res, 0.0)

    def complement(self, h):
        """(I - K)[h] on incoming velocities."""
        return np.where(self.inc, np.asarray(h, dtype=float) - self.apply(h), 0.0)


def maxwell_boundary(trace, alpha, grid):
    """Maxwell-reflected values on v3 > 0 from a wall trace; v3 < 0 entries
    are returned unchanged."""
    op = WallOperator(grid, alpha)
    trace = np.asarray(trace, dtype=float)
    return np.where(op.inc, op.apply(trace), trace)


# ---------------------------------------------------------------------------
# slab solver
# ---------------------------------------------------------------------------
class SlabSolver:
    """Linear solver for v3 d/dxi phi + L phi = S on [0, xi_max]."""

    def __init__(self, model, xi: XiGrid, alpha, chunk=64):
        self.model = model
        self.grid = model.grid
        self.xi = xi
        self.wall = WallOperator(self.grid, alpha)
        g = self.grid
        self.v3 = np.ascontiguousarray(g.v3)
        self.d = np.ascontiguousarray(model.d, dtype=float)
        self.UC = model.U @ model.C
        self.WU = g.weights[:, None] * model.U
        self.k = model.U.shape[1]
        self._build_schur(chunk)

    def sweep(self, q, inflow):
        q = np.ascontiguousarray(q, dtype=float)
        inflow = np.ascontiguousarray(inflow, dtype=float)
        out = np.zeros((self.xi.cells + 1,) + q.shape[1:])
        kernels.sweep(self.v3, self.xi.widths, self.d, q, inflow, self.grid.reflect, out)
        return out

    def cell_moments(self, phi):
        """U^T W applied to cell averages: (M, k, R) for phi (M+1, V, R)."""
        avg = 0.5 * (phi[1:] + phi[:-1])
        return np.einsum("mvr,vk->mkr", avg, self.WU)

    def _build_schur(self, chunk):
        M, V, k = self.xi.cells, self.grid.size, self.k
        n = M * k
        G = np.empty((n, n))
        zero_in = np.zeros((V, chunk))
        for start in range(0, n, chunk):
            cols = np.arange(start, min(start + chunk, n))
            q = np.zeros((M, V, chunk))
            cell, comp = np.divmod(cols, k)
            q[cell, :, np.arange(cols.size)] = self.UC[:, comp].T
            phi = self.sweep(q, zero_in)
            G[:, cols] = self.cell_moments(phi)[:, :, : cols.size].reshape(n, -1)
        self._lu = lu_factor(np.eye(n) - G)

    def solve_inner(self, s_cells, inflow):
        """Solve with prescribed incoming wall values; s_cells (M, V, R)."""
        base = self.sweep(s_cells, inflow)
        b = self.cell_moments(base)
        M, k, R = b.shape
        m = lu_solve(self._lu, b.reshape(M * k, R)).reshape(M, k, R)
        q = s_cells + np.einsum("mkr,vk->mvr", m, self.UC)
        return self.sweep(q, inflow)

    def solve(self, source=None, data=None, damping=0.5, tol=1e-12, max_iter=20000):
        """Damped fixed-point iteration on the Maxwell wall condition

            phi = K phi + data   on v3 > 0 at xi = 0.

        ``source`` holds nodal values (M+1, V) or None; ``data`` (V,).
        Several right-hand sides may be stacked on a trailing axis.
        """
        M, V = self.xi.cells, self.grid.size
        data = np.zeros(V) if data is None else np.asarray(data, dtype=float)
        squeeze = data.ndim == 1
        if squeeze:
            data = data[:, None]
        R = data.shape[1]
        if source is None:
            s_cells = np.zeros((M, V, R))
        else:
            src = np.asarray(source, dtype=float)
            if src.ndim == 2:
                src = src[:, :, None]
            s_cells = 0.5 * (src[1:] + src[:-1])
        data = np.where(self.wall.inc[:, None], data, 0.0)
        h = data.copy()
        prev_step = None
        contraction = 0.0
        scale = max(np.abs(data).max(), np.abs(s_cells).max() if s_cells.size else 0.0, 1e-300)
        for it in range(1, max_iter + 1):
            phi = self.solve_inner(s_cells, h)
            target = self.wall.apply(phi[0].T).T + data
            new = (1.0 - damping) * h + damping * target
            step = np.abs(new - h).max()
            if prev_step:
                contraction = step / prev_step
            prev_step = step
            h = new
            if step <= tol * scale:
                break
        else:
            raise RuntimeError(
                f"Maxwell boundary iteration did not converge (last step {step:.3e})")
        phi = self.solve_inner(s_cells, h)
        if squeeze:
            phi = phi[:, :, 0]
        return phi, it, contraction


# ---------------------------------------------------------------------------
# problems and solutions
# ---------------------------------------------------------------------------
@dataclass
class HalfSpaceProblem:
    """v3 dphi/dxi + L phi = source, phi = K phi + data on v3 > 0, decay."""

    model: object
    alpha: float
    data: np.ndarray
    source: np.ndarray | None = None
    xi: XiGrid = field(default_factory=XiGrid.graded)


@dataclass
class HalfSpaceSolution:
    xi: np.ndarray
    phi: np.ndarray
    asymptotic: np.ndarray
    flux_profile: np.ndarray
    decay_rate: float
    decay_residual: float
    iterations: int
    contraction: float
    grid: object = None

    def profile_rows(self):
        """Rows (xi, v3, |v|, phi) for CSV export."""
        g = self.grid
        speed = np.sqrt(g.speed2)
        rows = []
        for j, x in enumerate(self.xi):
            for v in range(g.size):
                rows.append((x, g.v3[v], speed[v], self.phi[j, v]))
        return rows


_SOLVER_CACHE: dict = {}


def slab_solver(model, xi, alpha):
    key = (id(model), xi.nodes.tobytes(), float(alpha))
    solver = _SOLVER_CACHE.get(key)
    if solver is None or solver.model is not model:
        if len(_SOLVER_CACHE) > 16:
            _SOLVER_CACHE.clear()
        solver = SlabSolver(model, xi, alpha)
        _SOLVER_CACHE[key] = solver
    return solver


def asymptotic_coefficients(model, phi_end):
    return model.P.coefficients(phi_end)


def tail_fit(xi, norms, far_fraction=0.75, floor_factor=1e3):
    """Exponential fit over the last decade of a decaying profile.

    The window ends before the symmetry plane influences the profile (a
    fraction of xi_max) or where the profile reaches the round-off floor.
    Returns (rate, max relative misfit).
    """
    xi = np.asarray(xi)
    norms = np.asarray(norms)
    floor = floor_factor * np.finfo(float).eps * max(norms.max(), 1e-300)
    usable = (xi <= far_fraction * xi[-1]) & (norms > floor)
    if usable.sum() < 3:
        return float("nan"), float("inf")
    end = np.nonzero(usable)[0][-1]
    target = 10.0 * norms[end]
    above = np.nonzero(norms[: end + 1] >= target)[0]
    start = above[-1] if above.size else 0
    sel = slice(start, end + 1)
    if end - start < 2:
        return float("nan"), float("inf")
    A = np.stack([np.ones(end + 1 - start), xi[sel]], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(norms[sel]), rcond=None)
    fit = np.exp(A @ coef)
    return float(-coef[1]), float(np.max(np.abs(fit / norms[sel] - 1.0)))


def solve_half_space(problem: HalfSpaceProblem, remove_density=True, **kw):
    """Solve one half-space problem and return it in defect form."""
    model = problem.model
    solver = slab_solver(model, problem.xi, problem.alpha)
    phi, its, contraction = solver.solve(problem.source, problem.data, **kw)
    return _finish(model, problem.xi, phi, its, contraction, remove_density)


def _finish(model, xi, phi, its, contraction, remove_density):
    g = model.grid
    coeffs = asymptotic_coefficients(model, phi[-1])
    if remove_density and "rho" in model.P.names:
        phi = phi - coeffs[0] * g.sqrt_mu
        coeffs = asymptotic_coefficients(model, phi[-1])
    flux = g.integrate(phi * (g.v3 * g.sqrt_mu))
    plateau = model.P.build(coeffs)
    defect = np.sqrt(np.maximum(g.integrate((phi - plateau) ** 2), 0.0))
    rate, resid = tail_fit(xi.nodes, defect)
    return HalfSpaceSolution(xi.nodes, phi, coeffs, flux, rate, resid, its, contraction, g)


def solve_with_constant(model, alpha, data0, data1, readout, source=None, xi=None, **kw):
    """Find the constant c making the asymptotic state vanish.

    Data are affine in c: data0 + c * data1.  Two trial solves give the
    readout (a linear function of c); the root is found by linear
    interpolation and confirmed by a verification solve.
    """
    xi = xi or XiGrid.graded()
    solver = slab_solver(model, xi, alpha)
    data = np.stack([data0, data0 + data1], axis=1)
    src = None
    if source is not None:
        src = np.repeat(np.asarray(source, dtype=float)[:, :, None], 2, axis=2)
    phi, _, _ = solver.solve(src, data, **kw)
    q = np.array([_readout(model, phi[:, :, r], readout) for r in range(2)])
    slope = q[1] - q[0]
    if slope == 0.0:
        raise RuntimeError("asymptotic state does not depend on the constant")
    c = -q[0] / slope
    # linear in c, so the bracket [c - 1, c + 1] changes sign by construction
    if np.sign(q[0] + (c - 1.0) * slope) == np.sign(q[0] + (c + 1.0) * slope):
        raise RuntimeError("decay defect is not monotone in the constant")
    phi_c, its, contraction = solver.solve(source, data0 + c * data1, **kw)
    sol = _finish(model, xi, phi_c, its, contraction, True)
    verify = _readout(model, phi_c, readout)
    return c, sol, abs(verify)


def _readout(model, phi, name):
    coeffs = asymptotic_coefficients(model, phi[-1])
    return coeffs[model.P.names.index(name)]


# ---------------------------------------------------------------------------
# slip and jump coefficients
# ---------------------------------------------------------------------------
@dataclass
class KnudsenSetup:
    """Everything needed for the wall problems at one accommodation value."""

    alpha: float
    model0: object
    model1: object
    xi: XiGrid
    iso: dict

    @classmethod
    def build(cls, alpha, grid0, kind="bgk", nu0=1.0, xi=None, **model_options):
        m0 = make_model(kind, grid0, nu0=nu0, **model_options)
        m1 = make_model(kind, grid0.with_mode(1), nu0=nu0, **model_options)
        return cls(float(alpha), m0, m1, xi or XiGrid.graded(), isotropic_functions(m0, m1))


def phi0_problem_data(setup, j, phi01=None):
    """(data0, data1, source) for the mode-0 fundamental problem j."""
    m0 = setup.model0
    g = m0.grid
    wall = WallOperator(g, setup.alpha)
    chi4 = 0.5 * (g.speed2 - 3.0) * g.sqrt_mu
    data1 = -wall.complement(chi4)
    source = None
    if j == 1:
        data0 = wall.complement(setup.iso["B3_hat"])
    elif j == 2:
        data0 = wall.complement(-setup.iso["F2"])
    elif j == 3:
        data0 = wall.complement(-setup.iso["A33_hat"])
    elif j == 4:
        if phi01 is None:
            raise ValueError("problem 4 needs the first fundamental solution")
        data0 = np.zeros(g.size)
        source = -m0.apply_L(phi01)
    else:
        raise ValueError("mode-0 problems are numbered 1..4")
    return data0, data1, source


def phi1_problem_data(setup, j, phi11=None):
    m1 = setup.model1
    g = m1.grid
    wall = WallOperator(g, setup.alpha)
    data1 = -wall.complement(g.sqrt_mu)
    source = None
    if j == 1:
        data0 = wall.complement(setup.iso["A13_hat"])
    elif j == 2:
        data0 = wall.complement(-setup.iso["D"])
    elif j == 3:
        if phi11 is None:
            raise ValueError("problem 3 needs the first fundamental solution")
        data0 = np.zeros(g.size)
        source = -m1.apply_L(phi11)
    else:
        raise ValueError("mode-1 problems are numbered 1..3")
    return data0, data1, source


@dataclass
class SlipTable:
    alpha: float
    model: str
    b: dict
    c: dict
    fingerprint: str
    est_error: float
    solutions: dict = field(default_factory=dict, repr=False)

    def row(self):
        return (self.alpha, self.model, self.b[1], self.c[1], self.b.get(2, np.nan),
                self.b.get(3, np.nan), self.c.get(2, np.nan), self.c.get(3, np.nan),
                self.c.get(4, np.nan), self.fingerprint, self.est_error)

    HEADER = ("alpha", "model", "b1", "c1", "b2", "b3", "c2", "c3", "c4",
              "grid_fingerprint", "est_error")


def slip_coefficients(setup: KnudsenSetup, order=2, **kw):
    """b_j, c_j and the fundamental solutions phi^(0)_j, phi^(1)_j.

    order=1 computes only (b1, c1); order=2 adds the coefficients entering
    the next-order wall conditions.
    """
    b, c, sols = {}, {}, {}
    verify = 0.0
    jobs0 = [1] if order == 1 else [1, 2, 3, 4]
    jobs1 = [1] if order == 1 else [1, 2, 3]
    for j in jobs0:
        first = sols[("0", 1)].phi if ("0", 1) in sols else None
        d0, d1, src = phi0_problem_data(setup, j, first)
        c[j], sol, err = solve_with_constant(setup.model0, setup.alpha, d0, d1, "theta",
                                             source=src, xi=setup.xi, **kw)
        sols[("0", j)] = sol
        verify = max(verify, err)
    for j in jobs1:
        first = sols[("1", 1)].phi if ("1", 1) in sols else None
        d0, d1, src = phi1_problem_data(setup, j, first)
        b[j], sol, err = solve_with_constant(setup.model1, setup.alpha, d0, d1, "u1",
                                             source=src, xi=setup.xi, **kw)
        sols[("1", j)] = sol
        verify = max(verify, err)
    fp = setup.model0.grid.fingerprint() + ":" + f"{setup.xi.cells}/{setup.xi.xi_max:g}"
    return SlipTable(setup.alpha, setup.model0.kind, b, c, fp, verify, sols)


# ---------------------------------------------------------------------------
# independent oracle: lagged source iteration
# ---------------------------------------------------------------------------
def source_iteration_oracle(model, alpha, data, xi=None, readout="theta", tol=1e-10,
                            max_iter=200000):
    """Plain source iteration (collision and wall condition lagged).

    Uses the exact shift property of the wall problems: adding c times the
    null function to the solution changes the constant-dependent data by
    c (I - K)[null function], so the constant equals the asymptotic
    coefficient of the solution with zero constant.  Returns (constant,
    estimated iteration error, iterations).
    """
    xi = xi or XiGrid.uniform()
    g = model.grid
    wall = WallOperator(g, alpha)
    M = xi.cells
    UC = model.U @ model.C
    WU = g.weights[:, None] * model.U
    v3 = np.ascontiguousarray(g.v3)
    d = np.ascontiguousarray(model.d, dtype=float)
    data = np.where(wall.inc, np.asarray(data, dtype=float), 0.0)
    phi = np.zeros((M + 1, g.size, 1))
    inflow = data[:, None].copy()
    prev = None
    rate = 0.0
    est = np.inf
    value = 0.0
    for it in range(1, max_iter + 1):
        avg = 0.5 * (phi[1:, :, 0] + phi[:-1, :, 0])
        q = (avg @ WU) @ UC.T
        kernels.sweep(v3, xi.widths, d, np.ascontiguousarray(q[:, :, None]), inflow,
                      g.reflect, phi)
        inflow = (wall.apply(phi[0, :, 0]) + data)[:, None]
        new = _readout(model, phi[:, :, 0], readout)
        if prev is not None:
            step = abs(new - value)
            if prev > 0:
                rate = step / prev
            prev = step
            if 0 < rate < 1:
                est = step * rate / (1.0 - rate)
            if it > 50 and est < tol:
                break
        else:
            prev = abs(new)
        value = new
    return float(value), float(est), it


def oracle_slip(setup_like, alpha, which="c1", xi=None, tol=1e-10):
    """Oracle values of c1 (mode 0) or b1 (mode 1)."""
    if which == "c1":
        model = setup_like.model0
        data = WallOperator(model.grid, alpha).complement(setup_like.iso["B3_hat"])
        return source_iteration_oracle(model, alpha, data, xi=xi, readout="theta", tol=tol)
    model = setup_like.model1
    data = WallOperator(model.grid, alpha).complement(setup_like.iso["A13_hat"])
    return source_iteration_oracle(model, alpha, data, xi=xi, readout="u1", tol=tol)


# ---------------------------------------------------------------------------
# cancellation of macroscopic sources
# ---------------------------------------------------------------------------
@dataclass
class Cancellation:
    psi: np.ndarray
    phi: np.ndarray  # (3, n_xi) coefficients Phi_1, Phi_2, Phi_3
    theta: np.ndarray
    field: np.ndarray  # correction on (xi, v)
    dfield: np.ndarray  # its exact xi-derivative
    residual: float  # max |<v3 d/dxi f - S, chi>| over xi


def _tail_integral(xi, values):
    """int_xi^xi_max of values by the trapezoid rule (accumulated inward)."""
    seg = 0.5 * (values[1:] + values[:-1]) * np.diff(xi)[:, None] if values.ndim > 1 \
        else 0.5 * (values[1:] + values[:-1]) * np.diff(xi)
    out = np.zeros_like(values)
    out[:-1] = np.cumsum(seg[::-1], axis=0)[::-1]
    return out


def cancel_macroscopic_source(a, b, c, xi, grid):
    """Correction removing the macroscopic part of {a + b.v + c|v|^2} sqrt(mu).

    a, c: (n_xi,), b: (n_xi, 3) decaying coefficient profiles.  Returns the
    correction f = {Psi v3 + Phi1 v3 v1 + Phi2 v3 v2 + Phi3 + Theta v3 |v|^2}
    sqrt(mu) with
        Psi = -int_xi^inf (2a + 3c),  Phi_i = -int_xi^inf b_i,
        Theta = (1/5) int_xi^inf a,
    so that v3 df/dxi - S is orthogonal to the null space.
    """
    xi = np.asarray(xi, dtype=float)
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float).reshape(xi.size, 3)
    if not isinstance(grid, VelocityGrid):
        raise ValueError("the cancellation correction needs a full 3-D grid")
    psi = -_tail_integral(xi, 2.0 * a + 3.0 * c)
    phis = -_tail_integral(xi, b)
    theta = 0.2 * _tail_integral(xi, a)
    sm = grid.sqrt_mu
    v1, v2, v3, s2 = grid.v1, grid.v2, grid.v3, grid.speed2

    def assemble(P, F, T):
        return (np.outer(P, v3) + np.outer(F[:, 0], v3 * v1) + np.outer(F[:, 1], v3 * v2)
                + np.outer(F[:, 2], np.ones_like(v3)) + np.outer(T, v3 * s2)) * sm

    f = assemble(psi, phis, theta)
    df = assemble(2.0 * a + 3.0 * c, b, -0.2 * a)
    S = (a[:, None] + b @ np.stack([v1, v2, v3]) + np.outer(c, s2)) * sm
    R = v3 * df - S
    chis = [sm, v1 * sm, v2 * sm, v3 * sm, 0.5 * (s2 - 3.0) * sm]
    resid = max(np.abs(grid.integrate(R * chi)).max() for chi in chis)
    return Cancellation(psi, phis.T, theta, f, df, float(resid))


def flux_identity_rhs(S, xi, grid):
    """-int int S sqrt(mu) dv dxi: the normal velocity jump a source forces."""
    moments = grid.integrate(np.asarray(S) * grid.sqrt_mu)
    return -float(_tail_integral(np.asarray(xi), moments)[0])


def scattering_kernel_matrix(grid, alpha):
    """Dense matrix of K acting on the outgoing half (diagnostics, tests)."""
    op = WallOperator(grid, alpha)
    eye = np.eye(grid.size)
    return op.apply(eye)


# ---------------------------------------------------------------------------
# assembled Knudsen layer fields
# ---------------------------------------------------------------------------
@dataclass
class KnudsenLayerField:
    """sum_r a_r(t) phi_r(xi, v): time coefficients times fixed profiles."""

    xi: np.ndarray
    coeffs: list
    profiles: list

    def values(self, n, points):
        """(len(points), V) values at time level n; zero beyond xi_max."""
        points = np.atleast_1d(np.asarray(points, dtype=float))
        out = 0.0
        for a, prof in zip(self.coeffs, self.profiles):
            an = float(np.asarray(a)[n])
            if an == 0.0:
                continue
            rows = np.empty((points.size, prof.shape[1]))
            for v in range(prof.shape[1]):
                rows[:, v] = np.interp(points, self.xi, prof[:, v], right=0.0)
            out = out + an * rows
        if np.isscalar(out):
            out = np.zeros((points.size, self.profiles[0].shape[1]))
        return out

    def wall(self, n):
        return self.values(n, [0.0])[0]


def _lifted_profiles(sol, target):
    """Fundamental solution profile on the target velocity grid."""
    g = sol.grid
    if not isinstance(target, VelocityGrid):
        if target.fingerprint() != g.with_mode(target.mode).fingerprint():
            raise ValueError("target grid differs from the Knudsen grid")
        return sol.phi
    return lift_to_full(sol.phi, g.with_mode(0), target)


def assemble_fbb2(table: SlipTable, dtheta_wall, du_wall=None, target=None):
    """Order-2 Knudsen layer from the wall gradients of the order-1 viscous layer.

    dtheta_wall: (nt,) values of d theta^b_1 / d zeta at zeta = 0;
    du_wall: (2, nt) tangential velocity gradients (zero if None).
    On a mode-0 target only the temperature term can be represented.
    """
    sol0 = table.solutions[("0", 1)]
    target = target if target is not None else sol0.grid
    dtheta_wall = np.asarray(dtheta_wall, dtype=float)
    coeffs = [dtheta_wall]
    profiles = [_lifted_profiles(sol0, target)]
    if du_wall is not None and np.any(np.asarray(du_wall) != 0.0):
        if not isinstance(target, VelocityGrid):
            raise ValueError("tangential layer gradients need a full velocity grid")
        h = _lifted_profiles(table.solutions[("1", 1)], target)
        coeffs += [np.asarray(du_wall[0], float), np.asarray(du_wall[1], float)]
        profiles += [h * target.v1, h * target.v2]
    return KnudsenLayerField(sol0.xi, coeffs, profiles)
