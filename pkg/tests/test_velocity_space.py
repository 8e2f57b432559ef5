import numpy as np
import pytest

from kinlayer.velocity_space import (AxisymGrid, GridSpec, KineticField, VelocityGrid,
                                     build_axisym_grid, build_full_grid, integrate, lift_to_full)


def chis(g):
    sm = g.sqrt_mu
    return [sm, g.v1 * sm, g.v2 * sm, g.v3 * sm, 0.5 * (g.speed2 - 3.0) * sm]


def test_full_grid_gaussian_moments(fine_full_grid):
    g = fine_full_grid
    assert abs(g.integrate(g.mu) - 1.0) < 1e-10
    assert abs(g.integrate(g.speed2 * g.mu) - 3.0) < 1e-8
    assert abs(g.integrate(g.v1 * g.v2 * g.mu)) < 1e-14
    assert g.tolerance < 1e-10


def test_null_function_gram_matrix(fine_full_grid):
    g = fine_full_grid
    c = chis(g)
    gram = np.array([[g.inner(a, b) for b in c] for a in c])
    assert np.allclose(gram, np.diag([1, 1, 1, 1, 1.5]), atol=1e-8)


def test_integrate_chi_examples(full_grid):
    g = full_grid
    c = chis(g)
    assert integrate(KineticField(c[0] * c[0] / g.sqrt_mu * g.sqrt_mu, g), g) == pytest.approx(1.0, abs=1e-12)
    assert g.integrate(c[4] * c[4]) == pytest.approx(1.5, abs=1e-12)
    assert abs(g.integrate(c[1] * c[2])) < 1e-15


def test_grid_symmetries(full_grid):
    g = full_grid
    nodes = set(map(tuple, np.round(g.nodes, 12)))
    for flip in ([-1, 1, 1], [1, -1, 1], [1, 1, -1], [-1, -1, -1]):
        assert set(map(tuple, np.round(g.nodes * flip, 12))) == nodes
    assert np.all(g.weights > 0)
    assert np.array_equal(g.v3[g.reflect], -g.v3)


def test_uniform_truncated_grid():
    g = build_full_grid(GridSpec(scheme="uniform-truncated", points_per_axis=40, cutoff=6.0))
    assert abs(g.integrate(g.mu) - 1.0) < 1e-8
    with pytest.raises(ValueError):
        build_full_grid(GridSpec(scheme="uniform-truncated", points_per_axis=8))


@pytest.mark.parametrize("bad", [dict(points_per_axis=1), dict(scheme="sparse"),
                                 dict(perp_points=0)])
def test_grid_spec_rejects(bad):
    with pytest.raises(ValueError):
        build_full_grid(GridSpec(**bad))


def test_axisym_mode0_matches_full(axi0, fine_full_grid):
    assert abs(axi0.integrate(axi0.mu) - 1.0) < 1e-10

    def g(v3, s2):
        return (1 + v3 + v3**2 * s2 - 0.1 * s2**2) * np.exp(-0.5 * s2)

    red = axi0.integrate(g(axi0.v3, axi0.speed2))
    full = fine_full_grid.integrate(g(fine_full_grid.v3, fine_full_grid.speed2))
    assert red == pytest.approx(full, abs=1e-8)


def test_axisym_mode1_matches_full(axi1, fine_full_grid):
    f = fine_full_grid

    def h(v3, s2):
        return (1.0 + 0.5 * v3 - 0.2 * s2) * np.exp(-0.25 * s2)

    red = axi1.integrate(h(axi1.v3, axi1.speed2) ** 2)
    full = f.integrate((f.v1 * h(f.v3, f.speed2)) ** 2)
    assert red == pytest.approx(full, abs=1e-8)


def test_odd_function_has_no_mode0_part(fine_full_grid):
    f = fine_full_grid
    assert abs(f.integrate(f.v1 * (1 + f.v3**2) * f.mu)) < 1e-15


def test_lift_round_trip(axi0, fine_full_grid):
    f = fine_full_grid
    vals = (1 + axi0.v3 - 0.3 * axi0.speed2 + axi0.v3**2 * axi0.speed2) * axi0.sqrt_mu
    lifted = lift_to_full(vals, axi0, f)
    expect = (1 + f.v3 - 0.3 * f.speed2 + f.v3**2 * f.speed2) * f.sqrt_mu
    assert np.max(np.abs(lifted - expect)) < 1e-9
    assert f.integrate(lifted * f.sqrt_mu) == pytest.approx(
        axi0.integrate(vals * axi0.sqrt_mu), abs=1e-10)


def test_text_round_trip(full_grid, axi1):
    g2 = VelocityGrid.from_text(full_grid.to_text())
    assert g2.fingerprint() == full_grid.fingerprint()
    a2 = AxisymGrid.from_text(axi1.to_text())
    assert a2.mode == 1 and a2.fingerprint() == axi1.fingerprint()
    with pytest.raises(ValueError):
        AxisymGrid.from_text(full_grid.to_text())


def test_axisym_rejects_bad_mode():
    with pytest.raises(ValueError):
        build_axisym_grid(GridSpec(points_per_axis=8), mode=2)


def test_kinetic_field_checks(axi0):
    with pytest.raises(ValueError):
        KineticField(np.zeros(3), axi0)
    with pytest.raises(ValueError):
        KineticField(np.full(axi0.size, np.nan), axi0)
    other = build_axisym_grid(GridSpec(points_per_axis=8, perp_points=6), 0)
    with pytest.raises(ValueError):
        integrate(KineticField(np.zeros(other.size), other), axi0)
