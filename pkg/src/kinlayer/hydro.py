"""Hydrodynamic fields rho + u.v + theta (|v|^2 - 3)/2 and their products.

Coefficient arrays use the fixed component order (rho, u1, u2, u3, theta)
on the leading axis.  Reduced mode-0 grids carry only rho, u3 and theta;
asking them for a nonzero tangential velocity is an error.
"""
from __future__ import annotations

import numpy as np

from .velocity_space import VelocityGrid

NAMES = ("rho", "u1", "u2", "u3", "theta")


def basis(grid):
    """Velocity functions of the five components available on ``grid``."""
    sm = grid.sqrt_mu
    out = {"rho": sm, "u3": grid.v3 * sm, "theta": 0.5 * (grid.speed2 - 3.0) * sm}
    if isinstance(grid, VelocityGrid):
        out["u1"] = grid.v1 * sm
        out["u2"] = grid.v2 * sm
    elif grid.mode != 0:
        raise ValueError("hydrodynamic fields live on full or mode-0 grids")
    return out


def field(coeffs, grid, tol=0.0):
    """Velocity field of coefficients with shape (5, ...); result (..., V)."""
    coeffs = np.asarray(coeffs, dtype=float)
    funcs = basis(grid)
    out = 0.0
    for a, name in enumerate(NAMES):
        if name not in funcs:
            if np.any(np.abs(coeffs[a]) > tol):
                raise ValueError(f"component {name} is not representable on a reduced grid")
            continue
        out = out + np.multiply.outer(coeffs[a], funcs[name])
    return out


def moments(values, grid):
    """Inverse of ``field`` for hydrodynamic values (..., V) -> (5, ...)."""
    values = np.asarray(values, dtype=float)
    funcs = basis(grid)
    w = grid.weights
    out = np.zeros((5,) + values.shape[:-1])
    out[0] = values @ (w * funcs["rho"])
    out[3] = values @ (w * funcs["u3"])
    out[4] = values @ (w * funcs["theta"]) / 1.5
    if "u1" in funcs:
        out[1] = values @ (w * funcs["u1"])
        out[2] = values @ (w * funcs["u2"])
    return out


class ProductTable:
    """(I - P)(chi_a chi_b / sqrt(mu)) for every pair of components.

    Pairs involving rho vanish identically (rho sqrt(mu) * g / sqrt(mu) = rho g
    stays in the null space when g does) and are skipped.
    """

    def __init__(self, model):
        self.model = model
        funcs = basis(model.grid)
        sm = model.grid.sqrt_mu
        self.pairs = {}
        for a, na in enumerate(NAMES):
            for b, nb in enumerate(NAMES):
                if b < a or na == "rho" or nb == "rho":
                    continue
                if na not in funcs or nb not in funcs:
                    continue
                g = model.P.complement(funcs[na] * funcs[nb] / sm)
                if np.max(np.abs(g)) > 1e-13:
                    self.pairs[(a, b)] = g

    def closure(self, q, r):
        """(I - P)(Pf Pg / sqrt(mu)) for coefficient arrays q, r (5, ...)."""
        q = np.asarray(q, dtype=float)
        r = np.asarray(r, dtype=float)
        out = 0.0
        for (a, b), g in self.pairs.items():
            c = q[a] * r[b] + (q[b] * r[a] if a != b else 0.0)
            out = out + np.multiply.outer(c, g)
        return out

    def terms(self, q, r):
        """Same as ``closure`` but as (coefficient, velocity function) pairs."""
        out = []
        for (a, b), g in self.pairs.items():
            c = q[a] * r[b] + (q[b] * r[a] if a != b else 0.0)
            out.append((c, g))
        return out

    def moment_tensor(self, M):
        """T[a, b] = <M, (I-P)(chi_a chi_b / sqrt(mu))>, symmetric in (a, b)."""
        T = np.zeros((5, 5))
        w = self.model.grid.weights
        for (a, b), g in self.pairs.items():
            T[a, b] = T[b, a] = np.sum(w * M * g)
        return T
