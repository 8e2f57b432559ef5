"""Linearised collision operator, its null space and the bilinear term.

Every model is stored in the form

    L f = d * f - U @ C @ U.T @ (W * f)

(diagonal collision frequency minus a symmetric low-rank part), which is
what the half-space solver needs.  The BGK relaxation model is the default;
the hard-sphere model lives in ``hard_sphere.py`` and is opt-in.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh

from .velocity_space import AxisymGrid, VelocityGrid

ORTHO_TOL = 1e-8


def null_functions(grid):
    """Raw null-space functions (columns) and their names for a grid."""
    sm = grid.sqrt_mu
    chi4 = 0.5 * (grid.speed2 - 3.0) * sm
    if isinstance(grid, VelocityGrid):
        cols = [sm, grid.v1 * sm, grid.v2 * sm, grid.v3 * sm, chi4]
        names = ["rho", "u1", "u2", "u3", "theta"]
    elif grid.mode == 0:
        cols = [sm, grid.v3 * sm, chi4]
        names = ["rho", "u3", "theta"]
    else:
        # reduced form of v1 * sqrt(mu)
        cols = [sm]
        names = ["u1"]
    return np.stack(cols, axis=1), names


def orthonormalize(grid, X):
    """W-orthonormal basis for the columns of X (Cholesky of the Gram)."""
    G = X.T @ (grid.weights[:, None] * X)
    R = np.linalg.cholesky(G).T
    return np.linalg.solve(R.T, X.T).T


class HydroProjection:
    """Orthogonal projection P onto the null space in L^2(W)."""

    def __init__(self, grid):
        self.grid = grid
        self.raw, self.names = null_functions(grid)
        self.gram = self.raw.T @ (grid.weights[:, None] * self.raw)
        self.Q = orthonormalize(grid, self.raw)
        self._gram_chol = cho_factor(self.gram)

    @property
    def rank(self):
        return self.Q.shape[1]

    def coefficients(self, f):
        """Coefficients on the raw basis: (rho, u..., theta)."""
        m = np.asarray(f) @ (self.grid.weights[:, None] * self.raw)
        return cho_solve(self._gram_chol, m.reshape(-1, self.rank).T).T.reshape(m.shape)

    def apply(self, f):
        f = np.asarray(f, dtype=float)
        return (f @ (self.grid.weights[:, None] * self.Q)) @ self.Q.T

    def complement(self, f):
        return np.asarray(f, dtype=float) - self.apply(f)

    def build(self, coeffs):
        """Hydrodynamic field from coefficients (..., rank)."""
        return np.asarray(coeffs) @ self.raw.T


def project_null(f, grid):
    return HydroProjection(grid).apply(f)


def _check_orthogonal(model, g, tol):
    pg = model.P.apply(g)
    size = np.sqrt(np.maximum(model.grid.integrate(g * g), 0.0))
    err = np.sqrt(np.maximum(model.grid.integrate(pg * pg), 0.0))
    if np.any(err > tol * np.maximum(size, 1.0)):
        raise ValueError("right-hand side is not orthogonal to the null space")


class CollisionModel:
    """Common machinery; subclasses fill d, U, C."""

    kind = "abstract"

    def __init__(self, grid, nu0=1.0):
        if not isinstance(grid, (VelocityGrid, AxisymGrid)):
            raise TypeError("grid must be a VelocityGrid or AxisymGrid")
        if nu0 <= 0:
            raise ValueError("nu0 must be positive")
        self.grid = grid
        self.nu0 = float(nu0)
        self.P = HydroProjection(grid)
        self.d = None
        self.U = None
        self.C = None
        self._pseudo = None

    # -- operator -----------------------------------------------------
    def apply_L(self, f):
        f = np.asarray(f, dtype=float)
        m = f @ (self.grid.weights[:, None] * self.U)
        return self.d * f - (m @ self.C.T) @ self.U.T

    def collision_frequency(self):
        return self.d.copy()

    def _pseudo_factors(self):
        """Woodbury pieces for (L + P)^-1 (L restricted to N-perp, identity on N)."""
        if self._pseudo is None:
            W = self.grid.weights
            Ut = np.concatenate([self.U, self.P.Q], axis=1)
            k = self.U.shape[1]
            r = self.P.rank
            Ct = np.zeros((k + r, k + r))
            Ct[:k, :k] = self.C
            Ct[k:, k:] = -np.eye(r)
            Dinv_U = Ut / self.d[:, None]
            core = np.linalg.inv(Ct) - Ut.T @ (W[:, None] * Dinv_U)
            self._pseudo = (Ut, Dinv_U, np.linalg.inv(core))
        return self._pseudo

    def invert_L(self, g, check=True, tol=ORTHO_TOL):
        """Solve L f = g for g orthogonal to the null space; f is returned in N-perp."""
        g = np.asarray(g, dtype=float)
        if check:
            _check_orthogonal(self, g, tol)
        g = self.P.complement(g)
        Ut, Dinv_U, core_inv = self._pseudo_factors()
        W = self.grid.weights
        x = g / self.d
        y = (x * W) @ Ut
        x = x + (y @ core_inv.T) @ Dinv_U.T
        return self.P.complement(x)

    def gamma(self, f, g):
        raise NotImplementedError

    def pair_closure(self, f, g):
        """L^-1 [Gamma(f, g) + Gamma(g, f)] for arbitrary f, g."""
        return self.invert_L(self.gamma(f, g) + self.gamma(g, f), check=False)

    def quadratic_closure(self, f, g):
        """(I - P)(Pf Pg / sqrt(mu)); equals L^-1 [Gamma(f,g) + Gamma(g,f)]
        for hydrodynamic arguments."""
        pf = self.P.apply(f)
        pg = self.P.apply(g)
        return self.P.complement(pf * pg / self.grid.sqrt_mu)

    # -- diagnostics ---------------------------------------------------
    def coercivity_constant(self):
        """min <L g, g> / <nu g, g> over g orthogonal to the null space.

        Exact for the discrete operator: the quotient equals one away from
        the range of the low-rank part, so only a small eigenproblem is
        needed.
        """
        W = self.grid.weights
        s = np.sqrt(W / self.d)
        Z = s[:, None] * self.U
        # constraint g in N-perp, written for y = sqrt(W d) g
        Y = np.sqrt(W / self.d)[:, None] * self.P.Q
        # orthonormal basis of the constraint directions in y-space
        Yq, _ = np.linalg.qr(Y)
        Zp = Z - Yq @ (Yq.T @ Z)
        G = Zp.T @ Zp
        # nonzero spectrum of Zp C Zp^T equals that of G^{1/2} C G^{1/2}
        w, V = eigh(G)
        w = np.clip(w, 0.0, None)
        Gh = (V * np.sqrt(w)) @ V.T
        lam = eigh(Gh @ self.C @ Gh, eigvals_only=True)
        top = max(lam.max(), 0.0)
        return 1.0 - top


class BGKModel(CollisionModel):
    """Linearised BGK relaxation: L = nu0 (I - P)."""

    kind = "bgk"
    hydrodynamic_gamma = True

    def __init__(self, grid, nu0=1.0):
        super().__init__(grid, nu0)
        self.d = np.full(grid.size, self.nu0)
        self.U = self.P.Q
        self.C = self.nu0 * np.eye(self.P.rank)

    def invert_L(self, g, check=True, tol=ORTHO_TOL):
        g = np.asarray(g, dtype=float)
        if check:
            _check_orthogonal(self, g, tol)
        return self.P.complement(g) / self.nu0

    def gamma(self, f, g):
        """Quadratic part of nu0 (M[F] - F) in perturbation form."""
        if getattr(self.grid, "mode", None) == 1:
            raise ValueError("the bilinear term is not closed on mode-1 functions")
        return 0.5 * self.nu0 * self.quadratic_closure(f, g)

    def pair_closure(self, f, g):
        # the relaxation model only sees hydrodynamic parts
        return self.quadratic_closure(f, g)


def make_model(kind="bgk", grid=None, nu0=1.0, **options):
    """Factory: ``kind`` is 'bgk' (default) or 'hard-sphere'."""
    if grid is None:
        raise ValueError("a velocity grid is required")
    if kind == "bgk":
        return BGKModel(grid, nu0=nu0)
    if kind in ("hard-sphere", "hard_sphere", "hs"):
        from .hard_sphere import HardSphereModel
        return HardSphereModel(grid, **options)
    raise ValueError(f"unknown collision model {kind!r}")


def apply_L(f, model):
    return model.apply_L(f)


def collision_frequency(model):
    """(nu on the grid nodes, is_constant).  The flag is True for BGK,
    whose rate is the constant nu0 rather than a velocity profile."""
    return model.collision_frequency(), model.kind == "bgk"


def apply_Gamma(f, g, model):
    return model.gamma(f, g)


def invert_L(g, model, check=True):
    return model.invert_L(g, check=check)
