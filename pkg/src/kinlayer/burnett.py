"""Burnett functions, their collision preimages and transport coefficients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .velocity_space import VelocityGrid


def burnett_functions(grid):
    """Traceless stress A_ij, heat flux B_i and the scalar C on a grid.

    Full grids return every component.  Mode-0 reduced grids return the
    axially symmetric entries (A33, B3, C); mode-1 grids return the reduced
    parts of A13 = v1 * (v3 sqrt(mu)) and B1 = v1 * ((|v|^2 - 5)/2 sqrt(mu)).
    """
    sm = grid.sqrt_mu
    s2 = grid.speed2
    out = {}
    if isinstance(grid, VelocityGrid):
        v = (grid.v1, grid.v2, grid.v3)
        for i in range(3):
            for j in range(3):
                out[f"A{i+1}{j+1}"] = (v[i] * v[j] - (s2 / 3.0 if i == j else 0.0)) * sm
            out[f"B{i+1}"] = 0.5 * (s2 - 5.0) * v[i] * sm
    elif grid.mode == 0:
        out["A33"] = (grid.v3**2 - s2 / 3.0) * sm
        out["B3"] = 0.5 * (s2 - 5.0) * grid.v3 * sm
    else:
        out["A13"] = grid.v3 * sm
        out["B1"] = 0.5 * (s2 - 5.0) * sm
        return out
    out["C"] = (0.25 * s2**2 - 2.5 * s2 + 3.75) * sm
    return out


def hat_functions(model):
    """L^-1 applied to every Burnett function available on the model grid."""
    funcs = burnett_functions(model.grid)
    return {k: model.invert_L(v) for k, v in funcs.items() if k != "C"}


def transport_coefficients(model):
    """(kappa1, kappa2) = (<A12, L^-1 A12>, <B1, L^-1 B1>).

    On reduced grids the same numbers are read from the entries that
    exist there: <A33, L^-1 A33> = 4/3 kappa1 and <B3, L^-1 B3> = kappa2 in
    mode 0, the reduced A13 and B1 in mode 1.
    """
    grid = model.grid
    funcs = burnett_functions(grid)
    if isinstance(grid, VelocityGrid):
        a, b, fac = funcs["A12"], funcs["B1"], 1.0
    elif grid.mode == 0:
        a, b, fac = funcs["A33"], funcs["B3"], 0.75
    else:
        a, b, fac = funcs["A13"], funcs["B1"], 1.0
    k1 = fac * grid.inner(a, model.invert_L(a))
    k2 = grid.inner(b, model.invert_L(b))
    return float(k1), float(k2)


@dataclass
class RadialProfile:
    """alpha(|v|) represented as a polynomial in |v|^2 (coefficients low->high)."""

    coeffs: np.ndarray
    residual: float

    def __call__(self, speed):
        return np.polynomial.polynomial.polyval(np.asarray(speed) ** 2, self.coeffs)


def radial_profile(hat, structural, grid, degree=6, floor=1e-6):
    """Least-squares fit of hat = alpha(|v|) * structural.

    Only nodes where |structural| exceeds ``floor`` (relative to its max)
    take part; the returned residual is the relative weighted misfit.
    """
    hat = np.asarray(hat, dtype=float)
    structural = np.asarray(structural, dtype=float)
    mask = np.abs(structural) > floor * np.abs(structural).max()
    s = grid.speed2[mask]
    w = np.sqrt(grid.weights[mask])
    V = np.vander(s, degree + 1, increasing=True) * structural[mask, None]
    coef, *_ = np.linalg.lstsq(V * w[:, None], hat[mask] * w, rcond=None)
    fit = V @ coef
    res = np.linalg.norm((fit - hat[mask]) * w) / max(np.linalg.norm(hat[mask] * w), 1e-300)
    return RadialProfile(coef, float(res))


def isotropic_functions(model0, model1):
    """Reduced isotropic functions needed by the order-3 wall problems.

    Returns a dict with

    * ``D``   : reduced mode-1 part of (v_i d_jk + ...) D1 + v_i v_j v_k D2 for
                (i, j, k) = (1, 3, 3), i.e. D1 + v3^2 D2,
    * ``v3F1``: reduced mode-1 part of v_i v3 F1,
    * ``F2``  : the mode-0 function F2(|v|, v3),

    each lying in the orthogonal complement of the null space.
    """
    g0, g1 = model0.grid, model1.grid
    if g0.mode != 0 or g1.mode != 1:
        raise ValueError("need a mode-0 and a mode-1 model")
    k1, _ = transport_coefficients(model1)
    _, k2 = transport_coefficients(model0)
    b3_hat = model0.invert_L(burnett_functions(g0)["B3"])
    a13_hat = model1.invert_L(burnett_functions(g1)["A13"])
    sm1 = g1.sqrt_mu
    d_rhs = g1.v3 * a13_hat - k1 * sm1
    v3f1_rhs = _same_nodes(b3_hat, g0, g1) - 0.2 * k2 * sm1
    f2_rhs = g0.v3 * b3_hat - k2 * (g0.speed2 - 3.0) / 3.0 * g0.sqrt_mu
    return {
        "D": model1.invert_L(d_rhs),
        # the stated right-hand side carries a null-space component
        # (-kappa2/5 sqrt(mu)); only its orthogonal part is invertible
        "v3F1": model1.invert_L(model1.P.complement(v3f1_rhs)),
        "F2": model0.invert_L(f2_rhs),
        "B3_hat": b3_hat,
        "A13_hat": a13_hat,
        "A33_hat": model0.invert_L(burnett_functions(g0)["A33"]),
    }


def _same_nodes(values, g_from, g_to):
    if not (np.array_equal(g_from.v3, g_to.v3) and np.array_equal(g_from.vperp, g_to.vperp)):
        raise ValueError("reduced grids must share nodes")
    return values


def split_D(D, grid, degree=4):
    """Separate D1 + v3^2 D2 into radial polynomial profiles times sqrt(mu)."""
    s = grid.speed2
    base = np.vander(s, degree + 1, increasing=True) * grid.sqrt_mu[:, None]
    V = np.concatenate([base, grid.v3[:, None] ** 2 * base], axis=1)
    w = np.sqrt(grid.weights)
    coef, *_ = np.linalg.lstsq(V * w[:, None], D * w, rcond=None)
    d1 = RadialProfile(coef[: degree + 1], 0.0)
    d2 = RadialProfile(coef[degree + 1:], 0.0)
    return d1, d2
