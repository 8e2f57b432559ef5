"""Velocity grids, quadrature and the global Maxwellian.

Two kinds of velocity sets are provided:

* ``VelocityGrid``: a full three dimensional node set (tensor Gauss-Hermite
  or a truncated uniform midpoint grid).
* ``AxisymGrid``: reduced (v3, |v_perp|) coordinates for functions that are
  axially symmetric about the wall normal (mode 0) or of the form
  ``v1 * h(v3, |v|)`` (mode 1).

All weights are plain ``dv`` weights, so ``sum(W * g)`` approximates the
integral of ``g`` over R^3 (for mode 1: the integral of ``v1**2 * g``).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.laguerre import laggauss
from scipy.interpolate import BarycentricInterpolator
from scipy.linalg import eigh_tridiagonal

GRID_FORMAT_VERSION = 1


def maxwellian(speed2):
    """Global Maxwellian (2 pi)^(-3/2) exp(-|v|^2 / 2) for squared speed."""
    return (2.0 * np.pi) ** -1.5 * np.exp(-0.5 * np.asarray(speed2, dtype=float))


def sqrt_maxwellian(speed2):
    return (2.0 * np.pi) ** -0.75 * np.exp(-0.25 * np.asarray(speed2, dtype=float))


def halfrange_gauss(n, cutoff=14.0, m=800):
    """Gauss nodes/weights for the weight exp(-x^2/2) on (0, inf).

    Recurrence coefficients come from a discretised Stieltjes (Lanczos)
    procedure on a fine Gauss-Legendre discretisation of the measure; the
    Jacobi matrix is then diagonalised (Golub-Welsch).
    """
    if n < 1:
        raise ValueError("need at least one half-range node")
    y, wy = np.polynomial.legendre.leggauss(m)
    x = 0.5 * cutoff * (y + 1.0)
    w = 0.5 * cutoff * wy * np.exp(-0.5 * x * x)
    mass = np.sum(w)
    alpha = np.zeros(n)
    off = np.zeros(n)
    basis = [np.full_like(x, 1.0 / np.sqrt(mass))]
    p_prev = np.zeros_like(x)
    for k in range(n):
        p = basis[-1]
        alpha[k] = np.sum(w * x * p * p)
        q = (x - alpha[k]) * p - (off[k - 1] if k else 0.0) * p_prev
        for b in basis:  # full reorthogonalisation
            q -= np.sum(w * q * b) * b
        off[k] = np.sqrt(np.sum(w * q * q))
        p_prev = p
        basis.append(q / off[k])
    nodes, vecs = eigh_tridiagonal(alpha, off[:-1])
    weights = mass * vecs[0, :] ** 2
    return nodes, weights


def _rule_1d(n, rule):
    """Full-line rule for weight exp(-x^2/2): returns nodes, weights."""
    if rule == "gauss":
        return hermegauss(n)
    if rule == "half-range":
        if n % 2:
            raise ValueError("half-range rule needs an even number of nodes")
        x, w = halfrange_gauss(n // 2)
        return np.concatenate([-x[::-1], x]), np.concatenate([w[::-1], w])
    raise ValueError(f"unknown 1-D rule {rule!r}")


@dataclass
class GridSpec:
    """Parameters shared by the full and reduced grid builders."""

    scheme: str = "tensor-gauss"
    points_per_axis: int = 16
    cutoff: float | None = None
    v3_rule: str = "half-range"
    perp_points: int = 6

    def validate(self):
        if self.scheme not in ("tensor-gauss", "uniform-truncated"):
            raise ValueError(f"unknown velocity scheme {self.scheme!r}")
        if self.points_per_axis < 2:
            raise ValueError("points_per_axis must be >= 2")
        if self.scheme == "uniform-truncated" and not self.cutoff:
            raise ValueError("uniform-truncated grid needs a cutoff")
        if self.perp_points < 1:
            raise ValueError("perp_points must be >= 1")


class _Quadrature:
    """Shared helpers for anything with v3, speed2 and weights."""

    weights: np.ndarray
    v3: np.ndarray
    speed2: np.ndarray

    @property
    def size(self):
        return self.weights.size

    @property
    def sqrt_mu(self):
        return sqrt_maxwellian(self.speed2)

    @property
    def mu(self):
        return maxwellian(self.speed2)

    def integrate(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.size:
            raise ValueError(
                f"field has {values.shape[-1]} velocity values, grid has {self.size}")
        # np.add.reduce on a contiguous last axis is pairwise and deterministic
        return np.add.reduce(np.ascontiguousarray(values * self.weights), axis=-1)

    def inner(self, f, g):
        return self.integrate(np.asarray(f) * np.asarray(g))

    def norm(self, f):
        return np.sqrt(self.inner(f, f))

    @property
    def incoming(self):
        """Mask of velocities entering the gas from the wall (v3 > 0)."""
        return self.v3 > 0

    @property
    def outgoing(self):
        """Mask of velocities hitting the wall from the gas (v3 < 0)."""
        return self.v3 < 0


class VelocityGrid(_Quadrature):
    """Full 3-D velocity node set with plain dv weights."""

    mode = None

    def __init__(self, nodes, weights, scheme="custom", cutoff=None, spec=None):
        nodes = np.ascontiguousarray(nodes, dtype=float)
        weights = np.ascontiguousarray(weights, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 3 or nodes.shape[0] != weights.size:
            raise ValueError("nodes must be (N, 3) and match the weights")
        if not np.all(weights > 0):
            raise ValueError("all quadrature weights must be positive")
        self.nodes = nodes
        self.weights = weights
        self.scheme = scheme
        self.cutoff = float(np.max(np.abs(nodes))) if cutoff is None else float(cutoff)
        self.spec = spec
        self.v1, self.v2, self.v3 = (nodes[:, i].copy() for i in range(3))
        self.speed2 = np.sum(nodes * nodes, axis=1)
        self.reflect = _reflection_index(nodes)
        self.tolerance = abs(self.integrate(self.mu) - 1.0)

    def velocity(self, i):
        return (self.v1, self.v2, self.v3)[i]

    def fingerprint(self):
        return _fingerprint("full", self.nodes, self.weights)

    def to_text(self):
        lines = [f"# kinlayer velocity grid v{GRID_FORMAT_VERSION}",
                 f"# kind=full scheme={self.scheme} size={self.size} cutoff={self.cutoff!r}",
                 "# v1 v2 v3 weight"]
        for (a, b, c), w in zip(self.nodes, self.weights):
            lines.append(f"{float(a)!r} {float(b)!r} {float(c)!r} {float(w)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        header, rows = _parse_table(text, expected_cols=4, kind="full")
        return cls(rows[:, :3], rows[:, 3], scheme=header.get("scheme", "custom"),
                   cutoff=float(header["cutoff"]) if "cutoff" in header else None)


def _reflection_index(nodes):
    """Index map v -> (v1, v2, -v3); raises if the set is not symmetric."""
    target = nodes * np.array([1.0, 1.0, -1.0])
    key = {tuple(np.round(p, 12)): i for i, p in enumerate(nodes)}
    idx = np.empty(len(nodes), dtype=np.intp)
    for i, p in enumerate(target):
        j = key.get(tuple(np.round(p, 12)))
        if j is None:
            raise ValueError("velocity set is not symmetric under v3 -> -v3")
        idx[i] = j
    return idx


def _fingerprint(kind, *arrays):
    h = hashlib.sha256(kind.encode())
    for a in arrays:
        h.update(np.round(np.asarray(a, dtype=float), 13).tobytes())
    return h.hexdigest()[:16]


def _parse_table(text, expected_cols, kind):
    header = {}
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "kinlayer velocity grid" in line:
                version = int(line.rsplit("v", 1)[1])
                if version != GRID_FORMAT_VERSION:
                    raise ValueError(f"unsupported grid format version {version}")
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    header[k] = v
            continue
        rows.append([float(t) for t in line.split()])
    if header.get("kind") != kind:
        raise ValueError(f"expected a {kind} grid table")
    rows = np.array(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != expected_cols:
        raise ValueError("malformed grid table")
    return header, rows


def build_full_grid(spec: GridSpec | None = None, **kwargs) -> VelocityGrid:
    """Tensor Gauss-Hermite (optionally half-range in v3) or uniform grid."""
    spec = spec or GridSpec(**kwargs)
    spec.validate()
    n = spec.points_per_axis
    if spec.scheme == "tensor-gauss":
        x, w = hermegauss(n)
        wx = w * np.exp(0.5 * x * x)
        z, wz = _rule_1d(n, spec.v3_rule)
        wz = wz * np.exp(0.5 * z * z)
        if spec.cutoff is not None:
            keep = np.abs(x) <= spec.cutoff
            x, wx = x[keep], wx[keep]
            keepz = np.abs(z) <= spec.cutoff
            z, wz = z[keepz], wz[keepz]
    else:
        c = float(spec.cutoff)
        h = 2.0 * c / n
        x = -c + h * (np.arange(n) + 0.5)
        wx = np.full(n, h)
        z, wz = x, wx
    g1, g2, g3 = np.meshgrid(x, x, z, indexing="ij")
    w1, w2, w3 = np.meshgrid(wx, wx, wz, indexing="ij")
    nodes = np.stack([g1.ravel(), g2.ravel(), g3.ravel()], axis=1)
    weights = (w1 * w2 * w3).ravel()
    return VelocityGrid(nodes, weights, scheme=spec.scheme, cutoff=spec.cutoff, spec=spec)


class AxisymGrid(_Quadrature):
    """Reduced (v3, |v_perp|) node set.

    ``mode=0`` weights integrate axially symmetric functions over R^3;
    ``mode=1`` weights integrate ``v1**2 * h`` for ``h = h(v3, |v_perp|)``,
    which is the natural inner product for functions ``v1 * h``.
    """

    def __init__(self, v3, vperp, base_weights, mode, spec=None):
        if mode not in (0, 1):
            raise ValueError("mode must be 0 or 1")
        self.v3 = np.ascontiguousarray(v3, dtype=float)
        self.vperp = np.ascontiguousarray(vperp, dtype=float)
        self.base_weights = np.ascontiguousarray(base_weights, dtype=float)
        if not np.all(self.base_weights > 0):
            raise ValueError("all quadrature weights must be positive")
        self.mode = mode
        self.spec = spec
        self.speed2 = self.v3**2 + self.vperp**2
        self.weights = self.base_weights * (0.5 * self.vperp**2 if mode == 1 else 1.0)
        nodes = np.stack([self.vperp, np.zeros_like(self.v3), self.v3], axis=1)
        self.reflect = _reflection_index(nodes)
        self.tolerance = abs(np.sum(self.base_weights * self.mu) - 1.0)

    def with_mode(self, mode):
        return AxisymGrid(self.v3, self.vperp, self.base_weights, mode, self.spec)

    @property
    def v3_nodes(self):
        return np.unique(self.v3)

    def fingerprint(self):
        return _fingerprint(f"axisym{self.mode}", self.v3, self.vperp, self.base_weights)

    def to_text(self):
        lines = [f"# kinlayer velocity grid v{GRID_FORMAT_VERSION}",
                 f"# kind=axisym mode={self.mode} size={self.size}",
                 "# v3 vperp base_weight"]
        for a, b, w in zip(self.v3, self.vperp, self.base_weights):
            lines.append(f"{float(a)!r} {float(b)!r} {float(w)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        header, rows = _parse_table(text, expected_cols=3, kind="axisym")
        return cls(rows[:, 0], rows[:, 1], rows[:, 2], int(header.get("mode", 0)))


def build_axisym_grid(spec: GridSpec | None = None, mode: int = 0, **kwargs) -> AxisymGrid:
    """Half-range (or full) Gauss in v3 times Gauss-Laguerre in |v_perp|^2 / 2."""
    spec = spec or GridSpec(**kwargs)
    spec.validate()
    if spec.scheme == "tensor-gauss":
        z, wz = _rule_1d(spec.points_per_axis, spec.v3_rule)
        wz = wz * np.exp(0.5 * z * z)
    else:
        c = float(spec.cutoff)
        n = spec.points_per_axis
        h = 2.0 * c / n
        z = -c + h * (np.arange(n) + 0.5)
        wz = np.full(n, h)
    s, ws = laggauss(spec.perp_points)
    r = np.sqrt(2.0 * s)
    wr = 2.0 * np.pi * ws * np.exp(s)
    g3, gr = np.meshgrid(z, r, indexing="ij")
    w3, wrr = np.meshgrid(wz, wr, indexing="ij")
    return AxisymGrid(g3.ravel(), gr.ravel(), (w3 * wrr).ravel(), mode, spec)


def _lagrange_lift(xs_src, vals_src, xs_dst):
    """Barycentric interpolation along one axis (vals_src: (..., n_src))."""
    interp = BarycentricInterpolator(xs_src, np.moveaxis(vals_src, -1, 0))
    return np.moveaxis(interp(xs_dst), 0, -1)


def lift_to_full(values, axigrid: AxisymGrid, grid: VelocityGrid):
    """Evaluate a reduced function on a full 3-D grid.

    Mode 0 values are functions of (v3, |v_perp|); mode 1 values are the
    reduced part ``h`` and the lifted field is ``v1 * h``.  The Gaussian
    factor is divided out before polynomial interpolation so that functions
    of the form polynomial * sqrt(mu) are reproduced exactly.
    """
    values = np.asarray(values, dtype=float)
    z = np.unique(axigrid.v3)
    r = np.unique(axigrid.vperp)
    table = np.empty(values.shape[:-1] + (z.size, r.size))
    iz = np.searchsorted(z, axigrid.v3)
    ir = np.searchsorted(r, axigrid.vperp)
    table[..., iz, ir] = values * np.exp(0.25 * axigrid.speed2)
    s_src = 0.5 * r**2
    perp = np.sqrt(grid.v1**2 + grid.v2**2)
    s_dst = 0.5 * perp**2
    # interpolate in v3 first, then in s = |v_perp|^2 / 2
    by_z = _lagrange_lift(z, np.swapaxes(table, -1, -2), grid.v3)  # (..., nr, N)
    by_z = np.swapaxes(by_z, -1, -2)  # (..., N, nr)
    lifted = np.einsum("...nr,nr->...n", by_z, _lagrange_weights(s_src, s_dst))
    lifted = lifted * np.exp(-0.25 * grid.speed2)
    if axigrid.mode == 1:
        lifted = lifted * grid.v1
    return lifted


def _lagrange_weights(xs, targets):
    """Matrix L[j, k] = k-th Lagrange basis polynomial at targets[j]."""
    xs = np.asarray(xs, dtype=float)
    out = np.ones((targets.size, xs.size))
    for k in range(xs.size):
        for m in range(xs.size):
            if m != k:
                out[:, k] *= (targets - xs[m]) / (xs[k] - xs[m])
    return out


@dataclass
class KineticField:
    """Values of a velocity-dependent field on a grid (last axis = velocity)."""

    values: np.ndarray
    grid: object
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[-1] != self.grid.size:
            raise ValueError("field and grid sizes differ")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def integrate(self):
        return self.grid.integrate(self.values)


def integrate(f, grid):
    """Integral over velocity of a field sampled on ``grid``."""
    if isinstance(f, KineticField):
        if f.grid is not grid and f.grid.fingerprint() != grid.fingerprint():
            raise ValueError("field lives on a different grid")
        f = f.values
    return grid.integrate(f)
