import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kinlayer.burnett import burnett_functions
from kinlayer.collision import make_model
from kinlayer.knudsen import (
    HalfSpaceProblem,
    KnudsenSetup,
    SlipTable,
    WallOperator,
    XiGrid,
    assemble_fbb2,
    cancel_macroscopic_source,
    flux_identity_rhs,
    maxwell_boundary,
    oracle_slip,
    phi0_problem_data,
    phi1_problem_data,
    scattering_kernel_matrix,
    slip_coefficients,
    solve_half_space,
    solve_with_constant,
)
from kinlayer.velocity_space import GridSpec, build_axisym_grid, build_full_grid

ALPHAS = (0.25, 0.5, 1.0)
alphas = st.floats(1e-3, 1.0)


@pytest.fixture(scope="module")
def slip_runs(axi0):
    """Order-2 tables on the default xi grid and order-1 tables on a grid
    with twice the cells, for each accommodation value."""
    out = {}
    for a in ALPHAS:
        setup = KnudsenSetup.build(a, axi0, xi=XiGrid.graded(30.0, 200))
        fine = KnudsenSetup.build(a, axi0, xi=XiGrid.graded(30.0, 400))
        out[a] = (setup, slip_coefficients(setup, order=2), slip_coefficients(fine, order=2))
    return out


# ---------------------------------------------------------------- wall operator
@pytest.mark.parametrize("grid_name", ["axi0", "full_grid"])
@settings(max_examples=20, deadline=None)
@given(alpha=alphas)
def test_wall_preserves_equilibrium(grid_name, request, alpha):
    grid = request.getfixturevalue(grid_name)
    op = WallOperator(grid, alpha)
    out = op.apply(grid.sqrt_mu)
    assert np.allclose(out[grid.incoming], grid.sqrt_mu[grid.incoming], atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(alpha=alphas, coeffs=arrays(np.float64, 72, elements=st.floats(-3, 3)))
def test_zero_wall_mass_flux(axi0, alpha, coeffs):
    trace = coeffs * axi0.sqrt_mu
    full = maxwell_boundary(trace, alpha, axi0)
    flux = axi0.integrate(full * axi0.v3 * axi0.sqrt_mu)
    assert abs(flux) <= 1e-13 * (1 + np.abs(coeffs).max())


def test_full_diffuse_emits_maxwellian(full_grid, rng):
    trace = rng.standard_normal(full_grid.size) * full_grid.sqrt_mu
    out = WallOperator(full_grid, 1.0).apply(trace)[full_grid.incoming]
    ratio = out / full_grid.sqrt_mu[full_grid.incoming]
    assert np.ptp(ratio) < 1e-12 * max(1.0, abs(ratio[0]))
    Kmat = scattering_kernel_matrix(full_grid, 1.0)
    assert np.linalg.matrix_rank(Kmat) == 1


def test_alpha_out_of_range(axi0):
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            WallOperator(axi0, bad)


# ---------------------------------------------------------------- half-space problems
def test_homogeneous_problem_is_trivial(bgk0):
    zero = np.zeros(bgk0.grid.size)
    sol = solve_half_space(HalfSpaceProblem(bgk0, 0.5, zero, xi=XiGrid.graded(20.0, 60)))
    assert np.abs(sol.phi).max() == 0.0
    assert np.abs(sol.asymptotic).max() == 0.0
    data1 = -WallOperator(bgk0.grid, 0.5).complement(0.5 * (bgk0.grid.speed2 - 3) * bgk0.grid.sqrt_mu)
    c, sol, _ = solve_with_constant(bgk0, 0.5, zero, data1, "theta", xi=XiGrid.graded(20.0, 60))
    assert c == 0.0 and np.abs(sol.phi).max() == 0.0


@pytest.mark.parametrize("alpha", ALPHAS)
def test_fundamental_solutions(slip_runs, alpha):
    setup, table, _ = slip_runs[alpha]
    assert isinstance(table, SlipTable)
    assert len(table.solutions) == 7
    for key, sol in table.solutions.items():
        # zero-flux law: constant in xi and zero once decay is enforced
        assert np.ptp(sol.flux_profile) <= 1e-8, key
        assert np.abs(sol.flux_profile).max() <= 1e-8, key
        if key in (("0", 1), ("1", 1)):
            assert sol.decay_rate > 0, key
            assert sol.decay_residual < 0.05, key
        assert np.abs(sol.asymptotic).max() < 1e-8, key
    assert all(np.isfinite(v) for v in table.row()[2:9])


@pytest.mark.parametrize("alpha", ALPHAS)
def test_slip_self_convergence(slip_runs, alpha):
    _, coarse, fine = slip_runs[alpha]
    assert abs(coarse.b[1] - fine.b[1]) < 1e-3
    assert abs(coarse.c[1] - fine.c[1]) < 1e-3
    assert abs(coarse.c[3] - fine.c[3]) < 1e-2


@pytest.mark.parametrize("alpha", ALPHAS)
def test_slip_against_source_iteration(slip_runs, alpha):
    setup, table, _ = slip_runs[alpha]
    c1, est_c, _ = oracle_slip(setup, alpha, "c1", tol=1e-8)
    b1, est_b, _ = oracle_slip(setup, alpha, "b1", tol=1e-8)
    assert abs(c1 - table.c[1]) < 1e-2
    assert abs(b1 - table.b[1]) < 1e-2


# Values from the independent source-iteration solver on the default grids
# (12 x 6 velocity nodes, 200 graded xi cells), frozen.
FROZEN = {0.25: (9.113, 11.478), 0.5: (4.046, 5.13), 1.0: (1.437, 1.842)}


@pytest.mark.parametrize("alpha", ALPHAS)
def test_slip_frozen_values(slip_runs, alpha):
    _, table, _ = slip_runs[alpha]
    b1, c1 = FROZEN[alpha]
    assert table.b[1] == pytest.approx(b1, rel=2e-3)
    assert table.c[1] == pytest.approx(c1, rel=2e-3)


def test_slip_decreases_with_accommodation(slip_runs):
    b = [slip_runs[a][1].b[1] for a in ALPHAS]
    c = [slip_runs[a][1].c[1] for a in ALPHAS]
    assert b[0] > b[1] > b[2] > 0
    assert c[0] > c[1] > c[2] > 0


def test_boundary_relation_at_wall(slip_runs):
    setup, table, _ = slip_runs[0.5]
    d0, d1, _ = phi0_problem_data(setup, 1)
    sol = table.solutions[("0", 1)]
    wall = WallOperator(setup.model0.grid, 0.5)
    resid = wall.complement(sol.phi[0]) - (d0 + table.c[1] * d1)
    assert np.abs(resid).max() < 1e-8


def test_sourced_problems_vanish_without_first_solution(slip_runs):
    setup, _, _ = slip_runs[0.5]
    for data_fn, j, model, name in ((phi0_problem_data, 4, setup.model0, "theta"),
                                    (phi1_problem_data, 3, setup.model1, "u1")):
        d0, d1, src = data_fn(setup, j, np.zeros((setup.xi.cells + 1, model.grid.size)))
        assert np.all(d0 == 0) and np.all(src == 0)
        c, sol, _ = solve_with_constant(model, 0.5, d0, d1, name, source=src, xi=setup.xi)
        assert c == 0.0 and np.abs(sol.phi).max() == 0.0


def test_contraction_degrades_towards_specular(axi0):
    xi = XiGrid.graded(20.0, 80)
    model = make_model("bgk", axi0)
    data = WallOperator(axi0, 1.0).complement(model.invert_L(burnett_functions(axi0)["B3"]))
    rates = []
    for a in (1.0, 0.5, 0.25, 0.1):
        data_a = WallOperator(axi0, a).complement(data)
        sol = solve_half_space(HalfSpaceProblem(model, a, data_a, xi=xi))
        rates.append(sol.contraction)
    assert all(x <= y + 1e-12 for x, y in zip(rates, rates[1:]))


def test_tangential_mode_matches_full_grid():
    spec = GridSpec(points_per_axis=8, perp_points=4)
    xi = XiGrid.graded(20.0, 100)
    setup = KnudsenSetup.build(1.0, build_axisym_grid(spec, 0), xi=xi)
    reduced = slip_coefficients(setup, order=1).b[1]
    full = build_full_grid(GridSpec(points_per_axis=8))
    model = make_model("bgk", full)
    wall = WallOperator(full, 1.0)
    a13_hat = model.invert_L(burnett_functions(full)["A13"])
    b1, _, _ = solve_with_constant(model, 1.0, wall.complement(a13_hat),
                                   -wall.complement(full.v1 * full.sqrt_mu), "u1", xi=xi)
    assert abs(b1 - reduced) < 1e-3


# ---------------------------------------------------------------- cancellation
def _decaying_moments(xi, rng):
    rates = rng.uniform(0.3, 1.0, 5)
    amps = rng.standard_normal(5)
    prof = amps[:, None] * np.exp(-rates[:, None] * xi[None, :])
    return prof[0], prof[1:4].T, prof[4]


def test_cancellation_orthogonality(full_grid, rng):
    xi = XiGrid.graded(30.0, 200).nodes
    a, b, c = _decaying_moments(xi, rng)
    out = cancel_macroscopic_source(a, b, c, xi, full_grid)
    assert out.residual < 1e-8
    for prof in (out.psi, out.theta, *out.phi):
        assert abs(prof[-1]) == 0.0


def test_cancellation_bound(full_grid, rng):
    xi = XiGrid.graded(30.0, 200).nodes
    a, b, c = _decaying_moments(xi, rng)
    out = cancel_macroscopic_source(a, b, c, xi, full_grid)
    size = np.abs(a) + np.abs(b).sum(axis=1) + np.abs(c)
    seg = 0.5 * (size[1:] + size[:-1]) * np.diff(xi)
    tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    weight = (1 + full_grid.speed2) ** 1.5 * full_grid.sqrt_mu
    mask = tail > 1e-12
    ratio = np.abs(out.field[mask]) / (tail[mask, None] * weight[None, :])
    assert ratio.max() < 5.0


def test_cancellation_zero_and_grid_checks(full_grid, axi0):
    xi = np.linspace(0, 10, 21)
    out = cancel_macroscopic_source(np.zeros(21), np.zeros((21, 3)), np.zeros(21), xi, full_grid)
    assert np.abs(out.field).max() == 0.0
    with pytest.raises(ValueError):
        cancel_macroscopic_source(np.zeros(21), np.zeros((21, 3)), np.zeros(21), xi, axi0)


def test_flux_identity_rhs(full_grid):
    xi = np.linspace(0, 40, 4001)
    S = np.outer(np.exp(-xi), full_grid.sqrt_mu)
    assert flux_identity_rhs(S, xi, full_grid) == pytest.approx(-1.0, rel=1e-5)


# ---------------------------------------------------------------- assembled layer
def test_fbb2_zero_traces(slip_runs):
    _, table, _ = slip_runs[1.0]
    fld = assemble_fbb2(table, np.zeros(7))
    assert np.abs(fld.values(3, np.linspace(0, 5, 11))).max() == 0.0


def test_fbb2_scales_wall_gradient(slip_runs):
    _, table, _ = slip_runs[1.0]
    grad = np.linspace(0, 1, 5)
    fld = assemble_fbb2(table, grad)
    sol = table.solutions[("0", 1)]
    assert np.allclose(fld.wall(4), sol.phi[0], atol=1e-14)
    assert np.allclose(fld.wall(2), 0.5 * sol.phi[0], atol=1e-14)


def test_order_two_matching(expansion):
    """Wall temperature of the order-2 interior plus layer equals the jump
    constant times the order-1 layer gradient."""
    wall1 = expansion.layers[0].wall()
    lhs = expansion.interior[2].trace()[:, 4] + expansion.layers[1].theta[:, 0]
    rhs = expansion.slip.c[1] * wall1["theta"][1]
    assert np.allclose(lhs, rhs, atol=1e-12)
