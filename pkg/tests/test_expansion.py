import warnings

import numpy as np
import pytest

from kinlayer.expansion import (
    Expansion,
    ExpansionConfig,
    fit_slope,
    layer_norm,
    layer_norm_scaling,
    local_maxwellian,
    maxwell_mismatch,
    profile_norm_scaling,
)

EPS = (0.1, 0.05, 0.025, 0.0125)


def test_order_zero_is_equilibrium(expansion):
    x = np.linspace(0, 2, 9)
    F = expansion.compose(0.05, expansion.config.T, x, K=0)
    assert np.array_equal(F.values, np.broadcast_to(expansion.vgrid.mu, F.values.shape))
    assert F.ingredients == {}


def test_composite_is_sum_of_ingredients(expansion):
    x = np.linspace(0, 1, 17)
    t = expansion.times[10]
    F = expansion.compose(0.05, t, x)
    g = expansion.vgrid
    total = sum(F.ingredients.values())
    assert set(F.ingredients) == {"f1", "fb1", "f2", "fb2", "fbb2"}
    assert np.allclose(F.perturbation(g), total, atol=1e-14)
    G = expansion.compose(0.05, t, x, exclude=("fbb2",))
    assert np.allclose(F.perturbation(g) - G.perturbation(g), F.ingredients["fbb2"], atol=1e-14)
    H = expansion.compose(0.05, t, x, K=1)
    assert set(H.ingredients) == {"f1", "fb1"}
    assert np.allclose(H.ingredients["f1"], F.ingredients["f1"])


def test_viscous_layer_scaling_covariance(expansion):
    x = np.linspace(0, 0.5, 41)
    n = expansion.times.size // 2
    a, _ = expansion.ingredient_values(n, x, 0.05)
    b, _ = expansion.ingredient_values(n, x / 2, 0.05 / 4)
    for name in ("fb1", "fb2"):
        assert np.array_equal(a[name], b[name])


def test_composite_positive(expansion):
    for eps in (0.1, 0.05, 0.025):
        x = expansion.residual_grid(eps, points=400)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            F = expansion.compose(eps, expansion.config.T, x)
        assert F.min_value >= 0.0


def test_exponential_profile_norm():
    x = np.linspace(0, 40, 400001)
    norms, slope = profile_norm_scaling(lambda z: np.exp(-z), EPS, x)
    # int_0^inf exp(-2 x / sqrt(eps)) dx = sqrt(eps) / 2
    assert np.allclose(norms, [(e / 4) ** 0.25 for e in EPS], rtol=1e-6)
    assert slope == pytest.approx(0.25, abs=1e-6)


def test_zero_layer_has_zero_norm(axi0):
    x = np.linspace(0, 1, 11)
    assert layer_norm(np.zeros((11, axi0.size)), x, axi0) == 0.0


def test_layer_norm_slope(expansion):
    rows, slope = layer_norm_scaling(expansion, EPS)
    assert abs(slope - 0.25) <= 0.02
    assert all(r[1] > 0 for r in rows)


def test_fit_slope_exact():
    eps = np.array(EPS)
    assert fit_slope(eps, 3.0 * eps**0.7) == pytest.approx(0.7, abs=1e-12)


def test_equilibrium_has_no_residual(axi0):
    mu = np.tile(axi0.mu, (3, 1))
    assert np.allclose(local_maxwellian(mu, axi0), mu, atol=1e-13)
    for alpha in (0.25, 1.0):
        assert maxwell_mismatch(axi0.mu, axi0, alpha) < 1e-13


def test_local_maxwellian_rejects_negative_density(axi0):
    with pytest.raises(FloatingPointError):
        local_maxwellian(-axi0.mu, axi0)


def test_truncation_order_limits():
    with pytest.raises(NotImplementedError):
        Expansion(ExpansionConfig(K=3))
    with pytest.raises(ValueError):
        ExpansionConfig(K=4).validate()
    with pytest.raises(ValueError):
        ExpansionConfig(alpha=0.0).validate()


def test_time_levels(expansion):
    with pytest.raises(ValueError):
        expansion.level(expansion.dt / 3)
    assert expansion.level(expansion.times[5]) == 5


def test_residual_shrinks_with_eps(expansion):
    r = [expansion.residual(e, expansion.residual_grid(e, points=600))[0] for e in (0.1, 0.025)]
    assert r[1] < r[0]
