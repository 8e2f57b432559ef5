"""Pure numpy versions of the compiled kernels (same signatures)."""
import numpy as np


def sweep(v3, h, d, q, inflow, reflect, out):
    """Diamond-difference transport sweep on a 1-D slab.

    v3: (V,) velocities, h: (M,) cell widths, d: (V,) diagonal coefficient,
    q: (M, V, R) cell sources, inflow: (V, R) wall data (used where v3 > 0),
    reflect: (V,) index of the mirrored velocity, out: (M+1, V, R).
    The far end is a specular plane.
    """
    pos = v3 > 0
    neg = ~pos
    M = h.size
    a = np.abs(v3)[None, :] / h[:, None]
    hd = 0.5 * d[None, :]
    num = (a - hd)[:, :, None]
    den = (a + hd)[:, :, None]
    out[0, pos] = inflow[pos]
    for k in range(M):
        out[k + 1, pos] = (num[k, pos] * out[k, pos] + q[k, pos]) / den[k, pos]
    out[M, neg] = out[M, reflect[neg]]
    for k in range(M - 1, -1, -1):
        out[k, neg] = (num[k, neg] * out[k + 1, neg] + q[k, neg]) / den[k, neg]
    return out


def _limit(a, b, limiter):
    if limiter == 0:  # minmod
        return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)
    prod = a * b
    with np.errstate(invalid="ignore", divide="ignore"):
        vl = np.where(prod > 0, 2.0 * prod / (a + b), 0.0)
    return vl


def muscl_faces(u, xc, xf, v3, limiter, out):
    """Upwind face values of a limited piecewise-linear reconstruction.

    u: (N+2, V) cell values with one ghost cell on each side, xc: (N+2,)
    cell centres, xf: (N+1,) face positions, limiter: 0 minmod, 1 van Leer,
    out: (N+1, V).  Face f sits between cells f and f+1.
    """
    N = u.shape[0] - 2
    dx = np.diff(xc)[:, None]
    grad = np.diff(u, axis=0) / dx  # (N+1, V)
    slope = _limit(grad[:-1], grad[1:], limiter)  # real cells 1..N
    pos = v3 > 0
    left = np.empty_like(out)
    right = np.empty_like(out)
    left[0] = u[0]
    left[1:] = u[1:N + 1] + slope * (xf[1:, None] - xc[1:N + 1, None])
    right[:N] = u[1:N + 1] - slope * (xc[1:N + 1, None] - xf[:N, None])
    right[N] = u[N + 1]
    out[:] = np.where(pos[None, :], left, right)
    return out
