import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kinlayer.collision import HydroProjection, collision_frequency, make_model
from kinlayer.hard_sphere import (
    collision_frequency_hs,
    collision_frequency_radial,
    envelope_constant,
    frequency_bounds,
)
from kinlayer.velocity_space import GridSpec, build_full_grid

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def _random_fields(grid, rng, n):
    return rng.standard_normal((n, grid.size)) * grid.sqrt_mu * (1 + grid.speed2) ** 0.5


# ---------------------------------------------------------------- projection
def test_energy_mode_is_hydrodynamic(full_grid):
    P = HydroProjection(full_grid)
    f = full_grid.speed2 * full_grid.sqrt_mu
    assert np.allclose(P.apply(f), f, atol=1e-12)


def test_shear_mode_is_orthogonal(full_grid):
    P = HydroProjection(full_grid)
    f = full_grid.v1 * full_grid.v2 * full_grid.sqrt_mu
    assert np.abs(P.apply(f)).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, 12 * 12 * 12, elements=finite))
def test_projection_idempotent(full_grid, coeffs):
    P = HydroProjection(full_grid)
    f = coeffs * full_grid.sqrt_mu
    pf = P.apply(f)
    assert np.allclose(P.apply(pf), pf, atol=1e-10 * (1 + np.abs(pf).max()))


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, 12 * 12 * 12, elements=finite),
       arrays(np.float64, 12 * 12 * 12, elements=finite))
def test_bgk_self_adjoint(bgk_full, a, b):
    grid = bgk_full.grid
    f, g = a * grid.sqrt_mu, b * grid.sqrt_mu
    lhs = grid.inner(bgk_full.apply_L(f), g)
    rhs = grid.inner(f, bgk_full.apply_L(g))
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))


# ---------------------------------------------------------------- BGK
def test_bgk_null_space_exact(bgk_full, rng):
    L_chi = bgk_full.apply_L(bgk_full.P.raw.T)
    assert np.abs(L_chi).max() < 1e-12
    g = _random_fields(bgk_full.grid, rng, 100)
    pair = bgk_full.apply_L(g) @ (bgk_full.grid.weights[:, None] * bgk_full.P.raw)
    assert np.abs(pair).max() < 1e-12


def test_bgk_inverse_is_scaling(full_grid, rng):
    model = make_model("bgk", full_grid, nu0=2.5)
    g = model.P.complement(_random_fields(full_grid, rng, 5))
    assert np.allclose(model.invert_L(g), g / 2.5, atol=1e-13)
    assert np.allclose(model.apply_L(model.invert_L(g)), g, atol=1e-10)


def test_invert_rejects_non_orthogonal(bgk_full):
    with pytest.raises(ValueError):
        bgk_full.invert_L(bgk_full.grid.sqrt_mu)


def test_bgk_frequency_flag(bgk_full, hs_full):
    nu, constant = collision_frequency(bgk_full)
    assert constant and np.all(nu == bgk_full.nu0)
    nu_hs, constant_hs = collision_frequency(hs_full)
    assert not constant_hs and np.ptp(nu_hs) > 0


def test_bgk_coercivity_is_one(bgk_full):
    assert bgk_full.coercivity_constant() == pytest.approx(1.0, abs=1e-10)


def test_gamma_of_equilibrium_vanishes(bgk_full, hs_full):
    sm = bgk_full.grid.sqrt_mu
    for model in (bgk_full, hs_full):
        assert np.abs(model.gamma(sm, sm)).max() < 1e-12


@pytest.mark.parametrize("name", ["bgk_full", "hs_full"])
def test_gamma_conserves(name, request, rng):
    model = request.getfixturevalue(name)
    f, g = _random_fields(model.grid, rng, 2)
    moments = model.gamma(f, g) @ (model.grid.weights * model.P.raw.T).T
    assert np.abs(moments).max() < 1e-12


@pytest.mark.parametrize("name", ["bgk_full", "hs_full"])
def test_pair_identity_on_hydrodynamic_fields(name, request, rng):
    model = request.getfixturevalue(name)
    a, b = rng.standard_normal((2, model.P.rank))
    f, g = model.P.build(a), model.P.build(b)
    assert np.allclose(model.pair_closure(f, g), model.quadratic_closure(f, g), atol=1e-10)


def test_bgk_gamma_rejects_mode1(bgk1):
    with pytest.raises(ValueError):
        bgk1.gamma(bgk1.grid.sqrt_mu, bgk1.grid.sqrt_mu)


def test_unknown_model():
    with pytest.raises(ValueError):
        make_model("maxwell-molecules", build_full_grid(GridSpec(points_per_axis=6)))


# ---------------------------------------------------------------- hard sphere
@pytest.mark.parametrize("speed", [0.0, 1e-8, 0.3, 1.0, 2.5, 6.0])
def test_hs_frequency_matches_radial_oracle(speed):
    closed = float(collision_frequency_hs(np.array([speed]))[0])
    assert closed == pytest.approx(collision_frequency_radial(speed), rel=1e-10)


def test_hs_frequency_at_rest():
    # 2 pi E|Z| with E|Z| = 2 sqrt(2/pi)
    assert collision_frequency_hs(np.array([0.0]))[0] == pytest.approx(4 * np.sqrt(2 * np.pi))


def test_hs_frequency_bounds_and_monotone(hs_full):
    r = np.linspace(0, 8, 400)
    nu = collision_frequency_hs(r)
    assert np.all(np.diff(nu) > 0)
    lo, hi = frequency_bounds(r, nu)
    assert 0 < lo <= hi < np.inf
    # linear growth at large speed
    assert nu[-1] / r[-1] == pytest.approx(2 * np.pi, rel=0.03)
    grid = hs_full.grid
    lo, hi = frequency_bounds(np.sqrt(grid.speed2), hs_full.d)
    assert 0 < lo < hi


@pytest.mark.parametrize("name", ["hs_full", "hs0"])
def test_hs_null_space_and_symmetry(name, request, rng):
    model = request.getfixturevalue(name)
    grid = model.grid
    assert np.abs(model.apply_L(model.P.raw.T)).max() < 1e-10
    f, g = _random_fields(grid, rng, 2)
    lhs = grid.inner(model.apply_L(f), g)
    rhs = grid.inner(f, model.apply_L(g))
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))
    h = model.P.complement(f)
    assert np.allclose(model.apply_L(model.invert_L(h)), h, atol=1e-9)


def test_hs_coercivity_positive_and_stable(hs_full):
    c12 = hs_full.coercivity_constant()
    fine = make_model("hard-sphere", build_full_grid(GridSpec(points_per_axis=16)))
    c16 = fine.coercivity_constant()
    assert c12 > 0 and c16 > 0
    assert abs(c16 - c12) <= 0.1 * c12


def test_hs_envelope_constant_finite(hs_full):
    c = envelope_constant(hs_full, samples=400)
    assert np.isfinite(c) and c > 0


def test_hs_higher_order_gamma_rejects_mode1(axi1):
    model = make_model("hard-sphere", axi1)
    with pytest.raises((ValueError, NotImplementedError)):
        model.gamma(axi1.sqrt_mu, axi1.sqrt_mu)
