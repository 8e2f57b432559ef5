import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinlayer import hydro
from kinlayer.interior import (
    FLUX,
    SOUND_SPEED,
    FluidState,
    InteriorGrid,
    MicroClosure,
    assemble_f1,
    assemble_f2,
    flux_moment_functions,
    microscopic_part_k,
    solve_acoustic,
    solve_fluid_k,
    time_step,
)


def _bump(center, width):
    return lambda x: np.exp(-(((x - center) / width) ** 2))


def test_sound_speed_is_largest_eigenvalue():
    eig = np.sort(np.linalg.eigvals(FLUX).real)
    assert eig[-1] == pytest.approx(np.sqrt(5.0 / 3.0), abs=1e-14)
    assert eig[0] == pytest.approx(-np.sqrt(5.0 / 3.0), abs=1e-14)


def test_planar_wave_speed():
    grid = InteriorGrid(length=6.0, cells=1200)
    b = _bump(1.5, 0.25)
    # right-moving eigenvector (1, 0, 0, c, 2/3)
    init = FluidState.from_fields(grid, rho=b, u=(0, 0, lambda x: SOUND_SPEED * b(x)),
                                  theta=lambda x: 2.0 / 3.0 * b(x))
    T = 1.5
    traj = solve_acoustic(init, T, grid)
    rho = traj.q[-1, 0]
    centre = np.sum(grid.x * rho) / np.sum(rho)
    speed = (centre - 1.5) / T
    assert abs(speed - np.sqrt(5.0 / 3.0)) < 0.01 * np.sqrt(5.0 / 3.0)


def test_energy_conserved_with_reflecting_wall():
    grid = InteriorGrid(length=4.0, cells=3200)
    init = FluidState.from_fields(grid, rho=_bump(0.8, 0.2))
    traj = solve_acoustic(init, 1.0, grid)
    E = traj.energy()
    # the pulse reaches the wall and reflects within T = 1
    assert traj.q[:, 0, 0].max() > 0.1
    assert np.abs(E - E[0]).max() / E[0] < 1e-6


def test_entropy_mode_is_steady():
    grid = InteriorGrid(length=2.0, cells=64)
    init = FluidState.from_fields(grid, rho=0.3, theta=-0.3)
    traj = solve_acoustic(init, 0.5, grid)
    assert np.abs(traj.q[-1] - init.q).max() < 1e-14


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_linear_in_initial_data(a, b):
    grid = InteriorGrid(length=3.0, cells=60)
    s1 = FluidState.from_fields(grid, rho=_bump(1.0, 0.3))
    s2 = FluidState.from_fields(grid, theta=_bump(1.4, 0.2), u=(_bump(1.2, 0.3), 0, 0))
    mix = FluidState(1, 0.0, a * s1.q + b * s2.q)
    r1, r2, rm = (solve_acoustic(s, 0.4, grid).q[-1] for s in (s1, s2, mix))
    assert np.allclose(rm, a * r1 + b * r2, atol=1e-12 * (1 + abs(a) + abs(b)))


def test_mass_balance_with_wall_velocity():
    grid = InteriorGrid(length=3.0, cells=150)
    init = FluidState.from_fields(grid, rho=_bump(1.0, 0.3))
    n = 200
    dt = 0.5 / n
    wall = 0.05 * np.sin(np.pi * dt * np.arange(n + 1))
    traj = solve_fluid_k(init, 0.5, grid, bc_normal_velocity=wall, dt=dt)
    change = traj.mass() - traj.mass()[0]
    assert np.allclose(change, traj.wall_mass_flux - traj.far_mass_flux, atol=1e-13)
    assert np.abs(traj.wall_mass_flux).max() > 1e-3


def test_wall_compatibility_enforced():
    grid = InteriorGrid(length=2.0, cells=40)
    init = FluidState.from_fields(grid, u=(0, 0, 1.0))
    with pytest.raises(ValueError):
        solve_acoustic(init, 0.1, grid)


def test_cfl_violation_rejected():
    grid = InteriorGrid(length=1.0, cells=10)
    init = FluidState.from_fields(grid)
    with pytest.raises(ValueError):
        solve_acoustic(init, 1.0, grid, dt=1.0)


def _manufactured_error(cells):
    """Max error against q = phi(x) (1 + t) e_a with sources."""
    grid = InteriorGrid(length=8.0, cells=cells)
    shape = np.array([0.5, 0.2, -0.1, 0.0, 0.3])[:, None]

    def exact(x, t):
        return shape * np.exp(-((x - 2.0) ** 2)) * (1 + t)

    def dx(x, t):
        return shape * (-2 * (x - 2.0)) * np.exp(-((x - 2.0) ** 2)) * (1 + t)

    T = 0.5
    n = int(np.ceil(T / time_step(grid)))
    dt = T / n
    # cell averages of the forcing by 3-point Gauss
    nodes = np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
    wts = np.array([5.0, 8.0, 5.0]) / 18.0
    pts = grid.x[:, None] + 0.5 * grid.h * nodes

    def avg(fun, t):
        return np.einsum("aij,j->ai", fun(pts.ravel(), t).reshape(5, grid.cells, 3), wts)

    def source(k):
        t = k * dt
        return avg(lambda x, s: exact(x, s) / (1 + s), t) + FLUX @ avg(dx, t)

    init = FluidState(2, 0.0, avg(exact, 0.0))
    traj = solve_fluid_k(init, T, grid, sources=source, dt=dt)
    return np.abs(traj.q[-1] - avg(exact, T)).max()


def test_manufactured_solution_second_order():
    e1, e2 = _manufactured_error(200), _manufactured_error(400)
    assert np.log2(e1 / e2) > 1.8


# ---------------------------------------------------------------- kinetic parts
def test_f1_is_infinitesimal_maxwellian(full_grid):
    state = FluidState(1, 0.0, np.arange(20.0).reshape(5, 4) / 10)
    f1 = assemble_f1(state, full_grid)
    sm = full_grid.sqrt_mu
    rho, u1, u2, u3, th = state.q[:, 2]
    want = (rho + u1 * full_grid.v1 + u2 * full_grid.v2 + u3 * full_grid.v3
            + th * 0.5 * (full_grid.speed2 - 3)) * sm
    assert np.allclose(f1[2], want, atol=1e-14)
    assert f1.shape == (4, full_grid.size)


def test_second_order_closure_matches_quadratic_term(bgk_full, rng):
    q1 = rng.standard_normal((5, 3))
    s1 = FluidState(1, 0.0, q1)
    micro = microscopic_part_k([s1], 2, bgk_full)
    f1 = hydro.field(q1, bgk_full.grid)
    want = 0.5 * bgk_full.quadratic_closure(f1, f1)
    assert np.allclose(micro, want, atol=1e-12)
    q2 = rng.standard_normal((5, 3))
    f2 = assemble_f2(s1, FluidState(2, 0.0, q2), bgk_full)
    assert np.allclose(bgk_full.P.apply(f2), hydro.field(q2, bgk_full.grid), atol=1e-12)


def test_micro_flux_moments_match_values(bgk_full, rng):
    closure = MicroClosure(bgk_full)
    q1, q2, dq1 = rng.standard_normal((3, 5, 4))
    funcs = flux_moment_functions(bgk_full.grid)
    for k in (2, 3):
        vals = closure.values(k, q1, q2, dq1)
        mom = np.stack([vals @ (bgk_full.grid.weights * M) for M in funcs])
        assert np.allclose(closure.flux(k, q1, q2, dq1), mom, atol=1e-12)


def test_closure_orders_outside_range(bgk_full):
    with pytest.raises(ValueError):
        microscopic_part_k([], 4, bgk_full)
