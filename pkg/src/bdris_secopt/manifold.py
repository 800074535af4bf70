"""Product manifold for the joint beamformer / BD-RIS scattering variable.

The optimization variable is a triple

    W     complex N_t x N_s, unit Frobenius norm        (sphere)
    Theta G stacked complex Mt x Mt, Theta_g = Theta_g^T (complex symmetric)
    Psi   G stacked complex Mt x Mt, Psi_g Psi_g^H = I   (unitary group)

treated as one point on the product manifold with the real-trace metric
sum_blocks Re Tr(U^H V). Theta and Psi are stored as (G, Mt, Mt) arrays so
all per-group operations run batched.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np


class ProductDims(NamedTuple):
    n_t: int
    n_s: int
    m_tilde: int
    groups: int


class ProductPoint:
    """A feasible point: unit-norm W, symmetric Theta blocks, unitary Psi blocks."""

    __slots__ = ("W", "Theta", "Psi")

    def __init__(self, W, Theta, Psi):
        self.W = W
        self.Theta = Theta
        self.Psi = Psi


class TangentVector:
    """Same block layout as ProductPoint; tangency holds at its base point."""

    __slots__ = ("W", "Theta", "Psi")

    def __init__(self, W, Theta, Psi):
        self.W = W
        self.Theta = Theta
        self.Psi = Psi


def _as_blocks(obj):
    if isinstance(obj, (ProductPoint, TangentVector)):
        return obj.W, obj.Theta, obj.Psi
    w, th, ps = obj
    return np.asarray(w), np.asarray(th), np.asarray(ps)


def inner_product(u, v) -> float:
    """Real-trace inner product sum_blocks Re Tr(U^H V)."""
    uw, ut, up = _as_blocks(u)
    vw, vt, vp = _as_blocks(v)
    if uw.shape != vw.shape or ut.shape != vt.shape or up.shape != vp.shape:
        raise ValueError("tangent vectors have mismatched block shapes")
    # vdot conjugates its first argument and sums over all entries, which is
    # exactly Re Tr(U^H V) accumulated over the stacked blocks.
    return (np.vdot(uw, vw) + np.vdot(ut, vt) + np.vdot(up, vp)).real


def norm(u) -> float:
    return float(np.sqrt(inner_product(u, u)))


def _sym(a):
    # plain transpose, no conjugation
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _project_blocks(W, Psi, aw, at, ap):
    # sphere: remove the radial component
    pw = aw - W * np.vdot(aw, W).real
    # complex-symmetric subspace: symmetrize with the plain transpose
    pt = _sym(at)
    # unitary group: U - Psi (U^H Psi + Psi^H U)/2, batched over groups
    b = np.swapaxes(Psi, -1, -2).conj() @ ap
    pp = ap - Psi @ (0.5 * (b + np.swapaxes(b, -1, -2).conj()))
    return pw, pt, pp


def project_tangent(base: ProductPoint, ambient) -> TangentVector:
    """Orthogonal projection of ambient block matrices onto the tangent space."""
    aw, at, ap = _as_blocks(ambient)
    if aw.shape != base.W.shape or at.shape != base.Theta.shape or ap.shape != base.Psi.shape:
        raise ValueError("ambient blocks have mismatched shapes")
    return TangentVector(*_project_blocks(base.W, base.Psi, aw, at, ap))


def _qr_unitary(a):
    # Q factor with the triangular factor's diagonal rotated to positive real,
    # so the factorization (and hence the retraction) is deterministic.
    q, r = np.linalg.qr(a)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    mag = np.abs(d)
    if np.any(mag == 0.0):
        raise ValueError("rank-deficient matrix in QR retraction")
    q = q * (d / mag).conj()[..., None, :]
    return q


def retract(base: ProductPoint, step) -> ProductPoint:
    """Map base + step back onto the manifold.

    Sphere block renormalizes, the symmetric block is a linear subspace so the
    identity suffices, and the unitary block takes the Q factor of a QR
    factorization.
    """
    dw, dt, dp = _as_blocks(step)
    w = base.W + dw
    nw = np.linalg.norm(w)
    if nw == 0.0:
        raise ValueError("degenerate sphere retraction: W + dW has zero norm")
    return ProductPoint(w / nw, base.Theta + dt, _qr_unitary(base.Psi + dp))


def transport(frm: ProductPoint, to: ProductPoint, d) -> TangentVector:
    """Carry a tangent vector at `frm` to the tangent space at `to`.

    Implemented as orthogonal projection at the target point; projections never
    expand the norm, which the line-search convergence argument relies on.
    """
    del frm  # the projection transport only needs the target point
    return project_tangent(to, d)


def _complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_point(dims: ProductDims, rng: np.random.Generator) -> ProductPoint:
    """Gaussian draws projected onto the three constraint sets."""
    n_t, n_s, mt, g = dims
    w = _complex_normal(rng, (n_t, n_s))
    while np.linalg.norm(w) == 0.0:  # probability zero, but keep the contract
        w = _complex_normal(rng, (n_t, n_s))
    w = w / np.linalg.norm(w)
    theta = _sym(_complex_normal(rng, (g, mt, mt)))
    psi = _qr_unitary(_complex_normal(rng, (g, mt, mt)))
    return ProductPoint(w, theta, psi)


# -- small tangent arithmetic helpers used by the solvers -------------------

def t_scale(u: TangentVector, c: float) -> TangentVector:
    return TangentVector(c * u.W, c * u.Theta, c * u.Psi)


def t_add_scaled(u: TangentVector, v: TangentVector, c: float) -> TangentVector:
    """u + c * v, blockwise."""
    return TangentVector(u.W + c * v.W, u.Theta + c * v.Theta, u.Psi + c * v.Psi)


def zero_like(p: ProductPoint) -> TangentVector:
    return TangentVector(np.zeros_like(p.W), np.zeros_like(p.Theta), np.zeros_like(p.Psi))


def feasibility_residuals(p: ProductPoint) -> tuple[float, float, float]:
    """(sphere, symmetry, unitarity) constraint residuals of a point."""
    r_w = abs(np.linalg.norm(p.W) ** 2 - 1.0)
    r_t = float(np.max(np.abs(p.Theta - np.swapaxes(p.Theta, -1, -2)))) if p.Theta.size else 0.0
    eye = np.eye(p.Psi.shape[-1])
    gram = p.Psi @ np.swapaxes(p.Psi, -1, -2).conj()
    r_p = float(np.max(np.abs(gram - eye))) if p.Psi.size else 0.0
    return r_w, r_t, r_p
