"""Linearised hard-sphere operator L = nu - K on a velocity grid.

nu(v) = 2 pi int |v - u| mu(u) du is evaluated in closed form.  The
remaining part is built from Galerkin matrices

    A_ij = <L (sqrt(mu) psi_i), sqrt(mu) psi_j>
         = 1/4 int int int (|g|/2) mu mu_* Dpsi_i Dpsi_j dsigma du dv,

Dpsi = psi' + psi'_* - psi - psi_*, on polynomials psi.  In centre-of-mass
variables G = (v + u)/2, g = v - u the integrand is a polynomial times a
Gaussian, so tensor Gauss rules integrate it exactly.  K is represented
through the nu-weighted projection onto the polynomial space, which keeps
<L g, g> >= 0, and the operator is sandwiched by (I - P) so that the null
space is exact on the grid.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import erf, roots_genlaguerre, roots_hermite, roots_legendre

from .collision import CollisionModel
from .velocity_space import AxisymGrid, VelocityGrid


# ---------------------------------------------------------------------------
# collision frequency
# ---------------------------------------------------------------------------
def collision_frequency_hs(speed):
    """nu(|v|) = 2 pi E|v - Z|, Z standard normal in R^3."""
    r = np.asarray(speed, dtype=float)
    out = np.empty_like(r)
    small = r < 1e-6
    rs = r[~small]
    out[~small] = (np.sqrt(2 / np.pi) * np.exp(-0.5 * rs**2)
                   + (rs + 1.0 / rs) * erf(rs / np.sqrt(2.0)))
    rr = r[small]
    # series about r = 0: E|Z| (1 + r^2 / 6 + ...)
    out[small] = 2 * np.sqrt(2 / np.pi) * (1 + rr**2 / 6.0)
    return 2 * np.pi * out


def collision_frequency_radial(speed):
    """Independent oracle: the defining integral reduced to one radial
    quadrature, int_S2 |v - rho s| ds = 2 pi / (3 r rho) ((r+rho)^3 - |r-rho|^3),
    expanded so that small r does not cancel."""
    r = float(speed)

    def sphere(rho):
        big, small = max(r, rho), min(r, rho)
        return 4 * np.pi * (big + small * small / (3 * big))

    def integrand(rho):
        return rho**2 * (2 * np.pi) ** -1.5 * np.exp(-0.5 * rho**2) * sphere(rho)

    pts = [r] if r > 0 else None
    val, _ = quad(integrand, 0.0, 40.0, points=pts, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 2 * np.pi * val


def frequency_bounds(speed, nu):
    """(nu0, nu1) with nu0 (1+|v|) <= nu <= nu1 (1+|v|) on the given nodes."""
    ratio = np.asarray(nu) / (1.0 + np.asarray(speed))
    return float(ratio.min()), float(ratio.max())


# ---------------------------------------------------------------------------
# polynomial families
# ---------------------------------------------------------------------------
def family_exponents(kind, degree):
    """Exponent tuples of the polynomial family.

    axisym0: v3^a |v_perp|^(2b), a + 2b <= degree;
    axisym1: v1 v3^a |v_perp|^(2b), 1 + a + 2b <= degree;
    full:    v1^a v2^b v3^c, a + b + c <= degree.
    """
    if kind == "axisym0":
        return [(a, b) for b in range(degree // 2 + 1) for a in range(degree - 2 * b + 1)]
    if kind == "axisym1":
        return [(a, b) for b in range((degree - 1) // 2 + 1) for a in range(degree - 1 - 2 * b + 1)]
    if kind == "full":
        return [(a, b, c) for a in range(degree + 1) for b in range(degree + 1 - a)
                for c in range(degree + 1 - a - b)]
    raise ValueError(f"unknown family {kind!r}")


def _powers(x, top):
    out = [np.ones_like(x)]
    for _ in range(top):
        out.append(out[-1] * x)
    return out


def _eval3(kind, exps, V, component=1):
    """Family values at 3-D velocities V (..., 3) -> (..., n)."""
    v1, v2, v3 = V[..., 0], V[..., 1], V[..., 2]
    out = np.empty(V.shape[:-1] + (len(exps),))
    top = max(max(e) for e in exps)
    if kind == "full":
        p1, p2, p3 = _powers(v1, top), _powers(v2, top), _powers(v3, top)
        for j, (a, b, c) in enumerate(exps):
            out[..., j] = p1[a] * p2[b] * p3[c]
        return out
    pp = _powers(v1 * v1 + v2 * v2, top)
    p3 = _powers(v3, top)
    pre = 1.0 if kind == "axisym0" else (v1 if component == 1 else v2)
    for j, (a, b) in enumerate(exps):
        out[..., j] = pre * p3[a] * pp[b]
    return out


def eval_on_grid(kind, exps, grid):
    """Family values on grid nodes (reduced part only for axisym1)."""
    if kind == "full":
        V = np.stack([grid.v1, grid.v2, grid.v3], axis=-1)
        return _eval3(kind, exps, V)
    out = np.empty((grid.size, len(exps)))
    for j, (a, b) in enumerate(exps):
        out[:, j] = grid.v3**a * grid.vperp ** (2 * b)
    return out


# ---------------------------------------------------------------------------
# collision quadrature
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class CollisionQuadrature:
    """Tensor rule over (G, |g|, g_hat, sigma), exact for polynomial degree 2p."""

    G: np.ndarray  # (nG, 3)
    wG: np.ndarray
    s: np.ndarray  # relative speeds
    ws: np.ndarray
    ghat: np.ndarray  # (na, 3)
    wghat: np.ndarray
    sigma: np.ndarray  # (nsig, 3)
    wsigma: np.ndarray

    @property
    def size(self):
        return self.wG.size * self.ws.size * self.wghat.size * self.wsigma.size


def _sphere_rule(n_polar, n_azimuth):
    c, wc = roots_legendre(n_polar)
    phi = 2 * np.pi * np.arange(n_azimuth) / n_azimuth
    C, PH = np.meshgrid(c, phi, indexing="ij")
    S = np.sqrt(1 - C**2)
    pts = np.stack([S * np.cos(PH), S * np.sin(PH), C], axis=-1).reshape(-1, 3)
    w = (wc[:, None] * np.full(n_azimuth, 2 * np.pi / n_azimuth)[None, :]).ravel()
    return pts, w


@lru_cache(maxsize=8)
def collision_quadrature(degree, axial=True):
    """Rule exact for the Galerkin integrand of polynomials up to ``degree``.

    With ``axial`` the azimuth of g_hat is fixed (valid for integrands that
    are invariant under joint rotations about the v3 axis).
    """
    p = int(degree)
    x, wx = roots_hermite(p + 1)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    G = np.stack([X, Y, Z], axis=-1).reshape(-1, 3)
    wG = np.einsum("i,j,k->ijk", wx, wx, wx).ravel()
    # |g| = 2 sqrt(t): (|g|/2) |g|^2 e^{-|g|^2/4} d|g| = 4 t e^{-t} dt
    t, wt = roots_genlaguerre(p // 2 + 1, 1.0)
    s = 2 * np.sqrt(t)
    ws = 4 * wt
    if axial:
        c, wc = roots_legendre(p + 1)
        ghat = np.stack([np.sqrt(1 - c**2), np.zeros_like(c), c], axis=-1)
        wghat = 2 * np.pi * wc
    else:
        ghat, wghat = _sphere_rule(p + 1, 2 * p + 1)
    sigma, wsigma = _sphere_rule(p + 1, 2 * p + 1)
    return CollisionQuadrature(G, wG, s, ws, ghat, wghat, sigma, wsigma)


def _collision_points(q: CollisionQuadrature, iG):
    """Pre/post-collision velocities for a block of centre-of-mass nodes."""
    G = q.G[iG][:, None, None, None, :]
    g = (q.s[:, None, None, None] * q.ghat[None, :, None, :])[None]
    gp = (q.s[:, None, None, None] * q.sigma[None, None, :, :])[None]
    shape = (G.shape[0], q.s.size, q.ghat.shape[0], q.sigma.shape[0], 3)
    v = np.broadcast_to(G + 0.5 * g, shape)
    vs = np.broadcast_to(G - 0.5 * g, shape)
    vp = np.broadcast_to(G + 0.5 * gp, shape)
    vps = np.broadcast_to(G - 0.5 * gp, shape)
    w = (q.wG[iG][:, None, None, None] * q.ws[None, :, None, None]
         * q.wghat[None, None, :, None] * q.wsigma[None, None, None, :])
    return v, vs, vp, vps, w


def _blocks(q, target=200_000):
    per = q.size // q.wG.size
    step = max(1, target // per)
    for start in range(0, q.wG.size, step):
        yield np.arange(start, min(start + step, q.wG.size))


# 1/4 from the weak form, (2 pi)^-3 from mu mu_*
_PREFACTOR = 0.25 * (2 * np.pi) ** -3


def galerkin_matrix(kind, degree):
    """A_ij = <L(sqrt(mu) psi_i), sqrt(mu) psi_j> for the family ``kind``."""
    exps = family_exponents(kind, degree)
    q = collision_quadrature(degree, axial=kind != "full")
    comps = (1, 2) if kind == "axisym1" else (1,)
    n = len(exps)
    A = np.zeros((n, n))
    for iG in _blocks(q):
        v, vs, vp, vps, w = _collision_points(q, iG)
        wf = w.ravel()
        for comp in comps:
            d = (_eval3(kind, exps, vp, comp) + _eval3(kind, exps, vps, comp)
                 - _eval3(kind, exps, v, comp) - _eval3(kind, exps, vs, comp)).reshape(-1, n)
            A += (d * wf[:, None]).T @ d
    A *= _PREFACTOR / len(comps)
    return 0.5 * (A + A.T)


def gain_tensor(kind, degree):
    """T_ijk = <Gamma(sqrt(mu) psi_i, sqrt(mu) psi_j), sqrt(mu) psi_k>.

    Gamma(f, g) = mu^{-1/2} Q(sqrt(mu) f, sqrt(mu) g); the symmetrised weak
    form 1/2 int B mu mu_* psi_i(v_*) psi_j(v) Dpsi_k keeps conservation exact.
    """
    if kind == "axisym1":
        raise ValueError("the bilinear term is not closed on mode-1 functions")
    exps = family_exponents(kind, degree)
    q = collision_quadrature(degree, axial=kind != "full")
    n = len(exps)
    T = np.zeros((n, n, n))
    # smaller blocks: the (points, n*n) product below is the memory peak
    for iG in _blocks(q, target=max(1000, 2_000_000 // (n * n))):
        v, vs, vp, vps, w = _collision_points(q, iG)
        wf = w.ravel()
        a = _eval3(kind, exps, vs).reshape(-1, n)
        b = _eval3(kind, exps, v).reshape(-1, n)
        d = (_eval3(kind, exps, vp) + _eval3(kind, exps, vps)).reshape(-1, n) - a - b
        bd = ((wf[:, None] * b)[:, :, None] * d[:, None, :]).reshape(-1, n * n)
        T += (a.T @ bd).reshape(n, n, n)
    # 1/2 from symmetrisation, (2 pi)^-3 from mu mu_*, and B = |g|/2 is in ws
    return 0.5 * (2 * np.pi) ** -3 * T


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------
def _family(grid):
    if isinstance(grid, VelocityGrid):
        return "full"
    return "axisym0" if grid.mode == 0 else "axisym1"


def default_degree(grid):
    return 4 if isinstance(grid, VelocityGrid) else 6


class HardSphereModel(CollisionModel):
    """Hard-sphere operator on a grid: L = nu - K with a Galerkin K."""

    kind = "hard-sphere"
    hydrodynamic_gamma = False

    def __init__(self, grid, degree=None, kernel_tol=1e-10, nu0=1.0):
        super().__init__(grid, nu0=1.0)
        self.degree = int(degree or default_degree(grid))
        self.kernel_tol = kernel_tol
        self.family = _family(grid)
        self.exps = family_exponents(self.family, self.degree)
        speed = np.sqrt(grid.speed2)
        self.d = collision_frequency_hs(speed)
        self.nu_bounds = frequency_bounds(speed, self.d)
        W = grid.weights
        sm = grid.sqrt_mu
        Psi = eval_on_grid(self.family, self.exps, grid) * sm[:, None]
        # orthonormalise in the nu-weighted grid inner product
        Qn, R = np.linalg.qr(np.sqrt(W * self.d)[:, None] * Psi)
        keep = np.abs(np.diag(R)) > 1e-10 * np.abs(np.diag(R)).max()
        if not np.all(keep):
            raise ValueError("polynomial family is not resolved by the velocity grid; "
                             "lower the degree")
        Rinv = np.linalg.inv(R)
        self.basis = Psi @ Rinv  # nu-orthonormal on the grid
        A = galerkin_matrix(self.family, self.degree)
        self.galerkin = Rinv.T @ A @ Rinv
        self._coef_map = Rinv
        nu_mass = np.eye(R.shape[0])  # <nu b_i, b_j> = delta_ij
        Kc = nu_mass - self.galerkin
        U0 = self.d[:, None] * self.basis
        # sandwich (I-P)(D - U0 Kc U0^T W)(I-P) in the d - U C U^T W form
        Q = self.P.Q
        DQ = self.d[:, None] * Q
        U0p = U0 - Q @ (Q.T @ (W[:, None] * U0))
        r = Q.shape[1]
        QtWDQ = Q.T @ (W[:, None] * DQ)
        k0 = U0.shape[1]
        self.U = np.concatenate([Q, DQ, U0p], axis=1)
        C = np.zeros((2 * r + k0, 2 * r + k0))
        C[:r, :r] = -QtWDQ
        C[:r, r:2 * r] = np.eye(r)
        C[r:2 * r, :r] = np.eye(r)
        C[2 * r:, 2 * r:] = Kc
        self.C = C
        asym = np.max(np.abs(self.galerkin - self.galerkin.T))
        if asym > kernel_tol * max(1.0, np.abs(self.galerkin).max()):
            raise RuntimeError("Galerkin matrix is not symmetric")
        self._tensor = None

    def apply_K(self, f):
        return self.d * np.asarray(f, dtype=float) - self.apply_L(f)

    def coefficients(self, f):
        """nu-weighted projection coefficients in the orthonormal basis."""
        W = self.grid.weights
        return np.asarray(f, dtype=float) @ ((W * self.d)[:, None] * self.basis)

    def gamma(self, f, g):
        """Galerkin representation of mu^{-1/2} Q(sqrt(mu) f, sqrt(mu) g)."""
        if self._tensor is None:
            T = gain_tensor(self.family, self.degree)
            M = self._coef_map
            self._tensor = np.einsum("ia,jb,kc,ijk->abc", M, M, M, T, optimize=True)
        a = self.coefficients(f)
        b = self.coefficients(g)
        moments = np.einsum("...a,...b,abc->...c", a, b, self._tensor)
        return self.P.complement(moments @ (self.d[:, None] * self.basis).T)

    def kernel_values(self, V, Vp):
        """Continuous kernel k(v, v') of the Galerkin K at 3-D velocity pairs."""
        if self.family != "full":
            raise ValueError("kernel values are available for full-grid models")
        Kc = np.eye(self.galerkin.shape[0]) - self.galerkin
        M = self._coef_map

        def feats(X):
            s2 = np.sum(X * X, axis=-1)
            nu = collision_frequency_hs(np.sqrt(s2))
            sm = (2 * np.pi) ** -0.75 * np.exp(-0.25 * s2)
            return (nu * sm)[..., None] * (_eval3("full", self.exps, X) @ M)

        return np.einsum("...a,ab,...b->...", feats(V), Kc, feats(Vp))


def kernel_envelope(v, vp):
    """{|v-v'| + |v-v'|^-1} exp(-|v-v'|^2/8 - (|v|^2-|v'|^2)^2 / (8|v-v'|^2))."""
    d = np.linalg.norm(v - vp, axis=-1)
    s = np.sum(v * v, axis=-1) - np.sum(vp * vp, axis=-1)
    return (d + 1.0 / d) * np.exp(-d * d / 8.0 - s * s / (8.0 * d * d))


def envelope_constant(model, samples=2000, seed=0, radius=4.0):
    """Smallest C with |k(v, v')| <= C * envelope on random pairs."""
    rng = np.random.default_rng(seed)
    V = rng.uniform(-radius, radius, (samples, 3))
    Vp = rng.uniform(-radius, radius, (samples, 3))
    ok = np.linalg.norm(V - Vp, axis=1) > 1e-3
    k = np.abs(model.kernel_values(V[ok], Vp[ok]))
    return float(np.max(k / kernel_envelope(V[ok], Vp[ok])))
