import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinlayer.collision import make_model
from kinlayer.velocity_space import GridSpec, build_axisym_grid
from kinlayer.viscous import (
    InteriorTraces,
    LayerContext,
    LayerField,
    LayerGrid,
    assemble_fb1,
    erfc_benchmark,
    layer_bc_k1,
    layer_microscopic,
    solve_heat,
    solve_layer_order,
    tail_integral,
    time_derivative,
    wall_derivatives,
    weighted_tail_fraction,
    zeta_derivative,
)


def test_erfc_benchmark_second_order():
    rows, orders = erfc_benchmark(levels=4)
    assert len(orders) == 3
    assert min(orders) >= 1.9
    assert rows[-1][2] < rows[0][2] / 40


def test_zero_data_gives_zero():
    grid = LayerGrid.graded(20.0, 80)
    U = solve_heat(1.0, np.zeros(11), np.zeros(grid.size), grid, 0.1)
    assert np.all(U == 0.0)


def test_corner_incompatibility_rejected():
    grid = LayerGrid.uniform(10.0, 50)
    init = np.zeros(grid.size)
    with pytest.raises(ValueError, match="corner"):
        solve_heat(1.0, np.ones(5), init, grid, 0.1)
    # accepted when the check is switched off
    U = solve_heat(1.0, np.ones(5), init, grid, 0.1, check_compatibility=False)
    assert U[-1, 0] == pytest.approx(1.0, abs=1e-14)


def test_nonpositive_diffusivity_rejected():
    grid = LayerGrid.uniform(10.0, 20)
    with pytest.raises(ValueError):
        solve_heat(0.0, np.zeros(3), np.zeros(grid.size), grid, 0.1)


@settings(max_examples=40, deadline=None)
@given(wall=st.floats(-1, 1), amp=st.floats(-1, 1), centre=st.floats(0.5, 5),
       width=st.floats(0.3, 3), diffusivity=st.floats(0.2, 3), dt=st.floats(1e-3, 0.2))
def test_maximum_principle(wall, amp, centre, width, diffusivity, dt):
    grid = LayerGrid.graded(20.0, 120)
    z = grid.zeta
    init = wall * np.exp(-z**2) + amp * z * np.exp(-(((z - centre) / width) ** 2))
    init[-1] = 0.0
    U = solve_heat(diffusivity, np.full(30, wall), init, grid, dt)
    bound = max(np.abs(init).max(), abs(wall))
    assert np.abs(U).max() <= bound * (1 + 1e-9) + 1e-15


def test_layer_boundary_values_cancel_interior():
    u_bar, theta = layer_bc_k1((0.3, -0.1, 0.2))
    assert np.allclose(u_bar, [-0.3, 0.1])
    assert theta == pytest.approx(-0.2)


def test_calculus_helpers():
    z = np.linspace(0, 2, 201)
    c = z**2
    assert np.allclose(zeta_derivative(c, z), 2 * z, atol=1e-10)
    assert np.allclose(tail_integral(c, z), (8 - z**3) / 3, atol=1e-4)
    v, d1, d2 = wall_derivatives(1 + 2 * z + 3 * z**2, z)
    assert (v, d1, d2) == pytest.approx((1, 2, 6))
    t = np.linspace(0, 1, 11)[:, None]
    assert np.allclose(time_derivative(t**2, 0.1), 2 * t, atol=1e-12)


# ---------------------------------------------------------------- solved layers
def test_order_one_constraints(expansion):
    st1 = expansion.layers[0]
    assert np.abs(st1.u3).max() <= 1e-12
    assert np.abs(st1.p).max() <= 1e-12
    assert np.abs(st1.rho + st1.theta).max() <= 1e-12
    assemble_fb1(st1, expansion.ctx)


def test_order_one_wall_values(expansion):
    st1 = expansion.layers[0]
    tr = expansion.interior[1].trace()
    assert np.allclose(st1.theta[:, 0], -tr[:, 4], atol=1e-14)


def test_layers_decay(expansion):
    z = expansion.lgrid.zeta
    for st_ in expansion.layers:
        frac = weighted_tail_fraction(st_.theta[-1], z)
        assert frac < 1e-6
        assert np.abs(st_.theta[:, -1]).max() < 1e-30


def test_order_two_closure_against_dense_oracle(expansion):
    """Rebuild (I-P) f^b_3 without the unknown order-2 fields at one time
    level from plain arrays and compare with the term representation."""
    ctx = expansion.ctx
    model = expansion.model
    g = expansion.vgrid
    st1, st2 = expansion.layers
    traces = expansion.traces
    n = ctx.nt // 2
    nz = ctx.nz
    z = ctx.grid.zeta

    partial = ctx.hydro({"u3": st2.u3})
    got = layer_microscopic(2, partial, ctx, [st1], traces, st1.micro_next).values(n, nz)

    def comp(a):
        return model.P.complement(a)

    def pair(a, b):
        return comp(model.P.apply(a) * model.P.apply(b) / g.sqrt_mu)

    def trace_field(q):
        return (q[0] + q[3] * g.v3 + q[4] * 0.5 * (g.speed2 - 3)) * g.sqrt_mu

    hyd = np.multiply.outer(st2.u3[n], g.v3 * g.sqrt_mu)
    micro2 = st1.micro_next.values(n, nz)
    fb1 = st1.hydro_field(ctx).values(n, nz)
    f01 = trace_field(traces.values[1][n])
    f02 = trace_field(traces.values[2][n])
    df01 = trace_field(traces.derivs[(1, 1)][n])
    transport = np.gradient(hyd + micro2, z, axis=0, edge_order=2) * g.v3
    want = (-comp(transport) / model.nu0
            + pair(f01 + fb1, hyd)
            + pair(f02, fb1)
            + z[:, None] * pair(df01, fb1)
            + pair(f01 + fb1, micro2))
    scale = np.abs(want).max()
    assert scale > 0
    assert np.abs(got - want).max() <= 1e-12 * max(scale, 1.0)


def test_layer_field_arithmetic():
    g1, g2 = np.ones(3), np.arange(3.0)
    F = LayerField([(np.ones((1, 4)), g1)])
    G = LayerField([(2 * np.ones((1, 4)), g2)])
    H = (F + G).scale(2.0) - F
    vals = H.values(0, 4)
    assert np.allclose(vals, np.outer(np.ones(4), g1 + 4 * g2))
    assert len(LayerField([(np.zeros((1, 4)), g1)]).pruned()) == 0


def test_hard_sphere_higher_layers_unsupported():
    vgrid = build_axisym_grid(GridSpec(points_per_axis=8, perp_points=4), 0)
    model = make_model("hard-sphere", vgrid, degree=4)
    times = np.linspace(0, 0.2, 5)
    ctx = LayerContext(model, LayerGrid.graded(20.0, 40), times)
    tr = np.zeros((times.size, 5))
    tr[:, 4] = 0.01
    traces = InteriorTraces({1: tr, 2: np.zeros_like(tr)}, {(1, 1): np.zeros_like(tr)})
    dth = np.full(times.size, -0.01)
    init = -0.01 * np.exp(-ctx.grid.zeta**2)
    init[-1] = 0.0
    st1 = solve_layer_order(1, ctx, [], traces, dth, init_theta=init)
    with pytest.raises(NotImplementedError):
        solve_layer_order(2, ctx, [st1], traces, np.zeros(times.size))
