"""Secrecy objective and its gradients.

The solver minimizes the determinant ratio

    f(W, Theta) = det(I + Ht_e W W^H Ht_e^H) / det(I + Ht_b W W^H Ht_b^H)

over unit-norm W, where Ht_r = sqrt(P/sigma_r2) (sum_g H_ir^g Theta_g H_ai^g
+ H_ar) are the power-normalized effective channels. Minimizing f maximizes
the secrecy rate since SR = max(0, -log2 f). Equality constraints
Psi_g = Theta_g are handled by an augmented Lagrangian whose value and
Euclidean gradients live here; the imperfect-CSI variants replace the noise
term by the interference-plus-noise covariance J_r.

Determinants are evaluated on the stream side via det(I + A A^H) =
det(I + A^H A), which keeps every dense factorization at N_s x N_s.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channels import CeeConfig, ChannelSet, GroupBlocks, SystemConfig, group_blocks
from .manifold import ProductPoint, TangentVector, project_tangent


@dataclass(frozen=True)
class AlState:
    """Augmented-Lagrangian bookkeeping: penalty, duals, thresholds."""
    rho: float
    Phi: np.ndarray          # (G, Mt, Mt) dual blocks
    epsilon: float           # inner gradient-norm threshold
    eta: float = np.inf      # current max constraint violation

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class EffectiveChannels:
    ht_e: np.ndarray  # N_e x N_t
    ht_b: np.ndarray  # N_b x N_t


def as_theta_blocks(theta) -> np.ndarray:
    """Accept a single full matrix (2-D) or stacked/listed blocks; return (G, Mt, Mt)."""
    th = np.asarray(theta)
    if th.ndim == 2:
        th = th[None, :, :]
    if th.ndim != 3 or th.shape[-1] != th.shape[-2]:
        raise ValueError(f"Theta must be square blocks, got shape {th.shape}")
    return th


def effective_channels(blocks: GroupBlocks, theta, p: float,
                       sigma_e2: float, sigma_b2: float) -> EffectiveChannels:
    """Power-normalized effective channels for both receivers."""
    th = as_theta_blocks(theta)
    g, mt, n_t = blocks.h_ai.shape
    if th.shape != (g, mt, mt):
        raise ValueError(f"Theta blocks {th.shape} do not match channel blocks {(g, mt, mt)}")
    t = (th @ blocks.h_ai).reshape(g * mt, n_t)
    # column blocks of h_ib/h_ie concatenate back to the full matrices, so the
    # per-group sum collapses to one flat matmul
    hib = blocks.h_ib.transpose(1, 0, 2).reshape(blocks.h_ib.shape[1], g * mt)
    hie = blocks.h_ie.transpose(1, 0, 2).reshape(blocks.h_ie.shape[1], g * mt)
    return EffectiveChannels(
        ht_e=np.sqrt(p / sigma_e2) * (hie @ t + blocks.h_ae),
        ht_b=np.sqrt(p / sigma_b2) * (hib @ t + blocks.h_ab),
    )


def _inv_det_gram(a: np.ndarray):
    """inv(I + a^H a) and det(I + a^H a); hand-coded for the common tiny sizes."""
    n = a.shape[1]
    g = a.conj().T @ a
    if n == 1:
        d = 1.0 + g[0, 0].real
        return np.array([[1.0 / d]], dtype=complex), d
    if n == 2:
        g00 = 1.0 + g[0, 0].real
        g11 = 1.0 + g[1, 1].real
        g01 = g[0, 1]
        d = g00 * g11 - (g01.real * g01.real + g01.imag * g01.imag)
        inv = np.array([[g11, -g01], [-g01.conjugate(), g00]], dtype=complex)
        inv *= 1.0 / d
        return inv, d
    gm = g + np.eye(n)
    return np.linalg.inv(gm), float(np.linalg.det(gm).real)


class RatioObjective:
    """Determinant-ratio objective with per-group precomputed channel blocks.

    eve_active=False drops the numerator (f = 1/det_b), which is the
    upper-bound objective: minimizing it maximizes Bob's capacity alone.
    """

    def __init__(self, cs: ChannelSet, cfg: SystemConfig, groups: int | None = None,
                 eve_active: bool = True):
        g = cfg.g if groups is None else groups
        blocks = group_blocks(cs, g)
        self.groups = g
        self.cfg = cfg
        self.cs = cs
        self.hai = blocks.h_ai                                  # (G, Mt, N_t)
        c_b = np.sqrt(cfg.p / cfg.sigma_b2)
        c_e = np.sqrt(cfg.p / cfg.sigma_e2)
        self.hib_flat = c_b * cs.h_ib                           # (N_b, M)
        self.hie_flat = c_e * cs.h_ie                           # (N_e, M)
        self.sirH_b = c_b * blocks.h_ib.conj().transpose(0, 2, 1)  # (G, Mt, N_b)
        self.sirH_e = c_e * blocks.h_ie.conj().transpose(0, 2, 1)  # (G, Mt, N_e)
        self.dar_b = c_b * cs.h_ab
        self.dar_e = c_e * cs.h_ae
        self.eve_active = eve_active
        self.n_t = cfg.n_t
        self.m = cfg.m

    def value(self, w: np.ndarray, theta: np.ndarray):
        """Objective value and a cache reused by egrad at the same point."""
        t = (theta @ self.hai).reshape(self.m, self.n_t)
        ht_b = self.hib_flat @ t + self.dar_b
        a_b = ht_b @ w
        inv_b, det_b = _inv_det_gram(a_b)
        if self.eve_active:
            ht_e = self.hie_flat @ t + self.dar_e
            a_e = ht_e @ w
            inv_e, det_e = _inv_det_gram(a_e)
            f = det_e / det_b
        else:
            ht_e = a_e = inv_e = None
            f = 1.0 / det_b
        return f, (ht_b, a_b, inv_b, ht_e, a_e, inv_e, f)

    def egrad(self, w: np.ndarray, theta: np.ndarray, cache):
        """Ambient gradients (d f = Re Tr(grad^H dX) convention)."""
        del theta  # the cache already holds everything Theta-dependent
        ht_b, a_b, inv_b, ht_e, a_e, inv_e, f = cache
        haiw = self.hai @ w                                     # (G, Mt, N_s)
        y_b = a_b @ inv_b
        p1 = -(self.sirH_b @ y_b)
        gw = -(ht_b.conj().T @ y_b)
        if self.eve_active:
            y_e = a_e @ inv_e
            p1 = p1 + self.sirH_e @ y_e
            gw = gw + ht_e.conj().T @ y_e
        two_f = 2.0 * f
        gw *= two_f
        gtheta = two_f * (p1 @ haiw.conj().transpose(0, 2, 1))
        return gw, gtheta

    def secrecy_value(self, f: float) -> float:
        return max(0.0, -np.log2(f)) if self.eve_active else -np.log2(f)


class RobustRatioObjective:
    """Determinant-ratio objective under channel estimation errors.

    The per-receiver noise term becomes the covariance
    J_r = [(s_ai2 s_ir2 M + s_ar2) tau + s_ir2 s] P' I + s_ai2 P' tau K_r + sigma_r2 I
    with tau = Tr(W W^H), s = ||H_ai W||^2, K_r = H_ir H_ir^H, all evaluated on
    the unit-norm W and transmit power folded in. Capacities are evaluated in
    the unnormalized form det(J_r + B_r B_r^H)/det(J_r) with B_r = sqrt(P) H_r W,
    reduced to the stream side via Sylvester's identity.
    """

    def __init__(self, cs: ChannelSet, cfg: SystemConfig, cee: CeeConfig,
                 groups: int | None = None, eve_active: bool = True):
        g = cfg.g if groups is None else groups
        blocks = group_blocks(cs, g)
        self.groups = g
        self.cfg = cfg
        self.cee = cee
        self.hai = blocks.h_ai
        self.hai_full = cs.h_ai
        self.hib_flat = cs.h_ib
        self.hie_flat = cs.h_ie
        self.hirH_b = blocks.h_ib.conj().transpose(0, 2, 1)     # (G, Mt, N_b)
        self.hirH_e = blocks.h_ie.conj().transpose(0, 2, 1)     # (G, Mt, N_e)
        self.dar_b = cs.h_ab
        self.dar_e = cs.h_ae
        self.k_b = cs.h_ib @ cs.h_ib.conj().T                   # N_b x N_b
        self.k_e = cs.h_ie @ cs.h_ie.conj().T
        self.n_t = cfg.n_t
        self.m = cfg.m
        p = cfg.p
        self.p = p
        self.sqrt_p = np.sqrt(p)
        # coefficient of tau on the identity part, per receiver
        self.iso_b = (cee.sigma_ai2 * cee.sigma_ib2 * cfg.m + cee.sigma_ab2) * p
        self.iso_e = (cee.sigma_ai2 * cee.sigma_ie2 * cfg.m + cee.sigma_ae2) * p
        self.s_coef_b = cee.sigma_ib2 * p                       # coefficient of s
        self.s_coef_e = cee.sigma_ie2 * p
        self.k_coef = cee.sigma_ai2 * p                         # coefficient of tau K_r
        self.eve_active = eve_active

    def _cov(self, tau, s, receiver):
        if receiver == "b":
            iso = self.iso_b * tau + self.s_coef_b * s + self.cfg.sigma_b2
            return iso * np.eye(self.k_b.shape[0]) + (self.k_coef * tau) * self.k_b
        iso = self.iso_e * tau + self.s_coef_e * s + self.cfg.sigma_e2
        return iso * np.eye(self.k_e.shape[0]) + (self.k_coef * tau) * self.k_e

    def value(self, w: np.ndarray, theta: np.ndarray):
        t = (theta @ self.hai).reshape(self.m, self.n_t)
        heff_b = self.hib_flat @ t + self.dar_b
        haiw = self.hai_full @ w
        tau = np.vdot(w, w).real
        s = np.vdot(haiw, haiw).real
        b_b = self.sqrt_p * (heff_b @ w)
        j_b = self._cov(tau, s, "b")
        c_b = np.linalg.solve(j_b, b_b)                         # J_b^-1 B_b
        inv_b, det_b = _inv_det_half(b_b, c_b)
        if self.eve_active:
            heff_e = self.hie_flat @ t + self.dar_e
            b_e = self.sqrt_p * (heff_e @ w)
            j_e = self._cov(tau, s, "e")
            c_e = np.linalg.solve(j_e, b_e)
            inv_e, det_e = _inv_det_half(b_e, c_e)
            f = det_e / det_b
        else:
            heff_e = b_e = c_e = inv_e = None
            f = 1.0 / det_b
        return f, (heff_b, heff_e, haiw, b_b, b_e, c_b, c_e, inv_b, inv_e, f)

    def egrad(self, w: np.ndarray, theta: np.ndarray, cache):
        del theta
        heff_b, heff_e, haiw, b_b, b_e, c_b, c_e, inv_b, inv_e, f = cache
        cg_b = c_b @ inv_b                                      # Q_b B_b via Woodbury
        # tr(S_r) and tr(S_r K_r) with S_r = Q_r - J_r^-1 = -C_r Ginv_r C_r^H
        tr_s_b = -np.trace(inv_b @ (c_b.conj().T @ c_b)).real
        tr_sk_b = -np.trace(inv_b @ (c_b.conj().T @ (self.k_b @ c_b))).real

        def wlog(heff, cg, tr_s, tr_sk, iso, s_coef):
            g = self.sqrt_p * (heff.conj().T @ cg)
            g = g + (iso * tr_s + self.k_coef * tr_sk) * w
            g = g + (s_coef * tr_s) * (self.hai_full.conj().T @ haiw)
            return 2.0 * g

        gw = -wlog(heff_b, cg_b, tr_s_b, tr_sk_b, self.iso_b, self.s_coef_b)
        p1 = -(self.hirH_b @ cg_b)                              # (G, Mt, N_s)
        if self.eve_active:
            cg_e = c_e @ inv_e
            tr_s_e = -np.trace(inv_e @ (c_e.conj().T @ c_e)).real
            tr_sk_e = -np.trace(inv_e @ (c_e.conj().T @ (self.k_e @ c_e))).real
            gw = gw + wlog(heff_e, cg_e, tr_s_e, tr_sk_e, self.iso_e, self.s_coef_e)
            p1 = p1 + self.hirH_e @ cg_e
        gw = f * gw
        haiw_blocks = haiw.reshape(self.groups, -1, w.shape[1])
        gtheta = (2.0 * self.sqrt_p * f) * (p1 @ haiw_blocks.conj().transpose(0, 2, 1))
        return gw, gtheta

    def secrecy_value(self, f: float) -> float:
        return max(0.0, -np.log2(f)) if self.eve_active else -np.log2(f)


def _inv_det_half(b, c):
    """inv and det of I + B^H (J^-1 B), given C = J^-1 B."""
    n = b.shape[1]
    g = b.conj().T @ c
    if n == 1:
        d = 1.0 + g[0, 0].real
        return np.array([[1.0 / d]], dtype=complex), d
    if n == 2:
        g00 = 1.0 + g[0, 0].real
        g11 = 1.0 + g[1, 1].real
        # B^H J^-1 B is Hermitian; average the off-diagonal to kill roundoff skew
        g01 = 0.5 * (g[0, 1] + g[1, 0].conjugate())
        d = g00 * g11 - (g01.real * g01.real + g01.imag * g01.imag)
        inv = np.array([[g11, -g01], [-g01.conjugate(), g00]], dtype=complex)
        inv *= 1.0 / d
        return inv, d
    gm = 0.5 * (g + g.conj().T) + np.eye(n)
    return np.linalg.inv(gm), float(np.linalg.det(gm).real)


def noise_covariance_imcsi(w: np.ndarray, theta, cs: ChannelSet, cee: CeeConfig,
                           sigma_r2: float, receiver: str) -> np.ndarray:
    """Interference-plus-noise covariance J_r for receiver 'b' or 'e'.

    w is the power-scaled beamformer (Tr(WW^H) = P). theta is accepted for
    interface symmetry; the simplified covariance is Theta-free because the
    scattering blocks are unitary.
    """
    del theta
    if receiver not in ("b", "e"):
        raise ValueError("receiver must be 'b' or 'e'")
    h_ir = cs.h_ib if receiver == "b" else cs.h_ie
    s_ir2 = cee.sigma_ib2 if receiver == "b" else cee.sigma_ie2
    s_ar2 = cee.sigma_ab2 if receiver == "b" else cee.sigma_ae2
    tau = np.vdot(w, w).real
    s = np.linalg.norm(cs.h_ai @ w) ** 2
    n_r = h_ir.shape[0]
    iso = cee.sigma_ai2 * s_ir2 * cs.h_ai.shape[0] * tau + s_ir2 * s + s_ar2 * tau + sigma_r2
    return iso * np.eye(n_r) + (cee.sigma_ai2 * tau) * (h_ir @ h_ir.conj().T)


# -- augmented Lagrangian ---------------------------------------------------

def _penalty_value(theta, psi, al: AlState) -> float:
    d = psi - theta
    return (0.5 / al.rho) * np.vdot(d, d).real + np.vdot(al.Phi, d).real


def _penalty_grads(theta, psi, al: AlState):
    r = (psi - theta) + al.rho * al.Phi
    inv_rho = 1.0 / al.rho
    return (-inv_rho) * r, inv_rho * r   # (d/dTheta, d/dPsi)


def al_value(point: ProductPoint, al: AlState, ctx) -> float:
    """AL function: objective + quadratic penalty + dual term."""
    f, _ = ctx.value(point.W, point.Theta)
    return f + _penalty_value(point.Theta, point.Psi, al)


def euclidean_gradient(point: ProductPoint, al: AlState, ctx):
    """Ambient gradient blocks (gW, gTheta, gPsi) of the AL function."""
    f, cache = ctx.value(point.W, point.Theta)
    gw, gtheta_f = ctx.egrad(point.W, point.Theta, cache)
    gtheta_pen, gpsi = _penalty_grads(point.Theta, point.Psi, al)
    return gw, gtheta_f + gtheta_pen, gpsi


def riemannian_gradient(point: ProductPoint, al: AlState, ctx) -> TangentVector:
    return project_tangent(point, euclidean_gradient(point, al, ctx))


# imperfect-CSI entry points: same machinery, robust context
def al_value_imcsi(point: ProductPoint, al: AlState, rctx: RobustRatioObjective) -> float:
    return al_value(point, al, rctx)


def euclidean_gradient_imcsi(point: ProductPoint, al: AlState, rctx: RobustRatioObjective):
    return euclidean_gradient(point, al, rctx)


# -- reported rates ---------------------------------------------------------

def capacities(w: np.ndarray, theta, cs: ChannelSet, cfg: SystemConfig) -> tuple[float, float]:
    """(R_b, R_e) in bits/s/Hz for a unit-norm W (power applied internally)."""
    th = as_theta_blocks(theta)
    blocks = group_blocks(cs, th.shape[0])
    ec = effective_channels(blocks, th, cfg.p, cfg.sigma_e2, cfg.sigma_b2)
    r_b = _logdet_capacity(ec.ht_b @ w)
    r_e = _logdet_capacity(ec.ht_e @ w)
    return r_b, r_e


def _logdet_capacity(a: np.ndarray) -> float:
    n = a.shape[1]
    sign, logdet = np.linalg.slogdet(np.eye(n) + a.conj().T @ a)
    if sign.real <= 0:
        raise ValueError("capacity Gram matrix must be positive definite")
    return float(logdet / np.log(2.0))


def secrecy_rate(w: np.ndarray, theta, cs: ChannelSet, cfg: SystemConfig) -> float:
    """SR = max(0, R_b - R_e) with capacities log2 det(I + sigma^-2 H Wbar Wbar^H H^H)."""
    r_b, r_e = capacities(w, theta, cs, cfg)
    return max(0.0, r_b - r_e)


def capacities_imcsi(w: np.ndarray, theta, cs: ChannelSet, cfg: SystemConfig,
                     cee: CeeConfig) -> tuple[float, float]:
    """Robust capacities log2 det(I + B_r^H J_r^-1 B_r), unit-norm W."""
    th = as_theta_blocks(theta)
    blocks = group_blocks(cs, th.shape[0])
    g, mt, n_t = blocks.h_ai.shape
    t = (th @ blocks.h_ai).reshape(g * mt, n_t)
    w_bar = np.sqrt(cfg.p) * w
    out = []
    for receiver, h_ir, h_ar, s2 in (("b", cs.h_ib, cs.h_ab, cfg.sigma_b2),
                                     ("e", cs.h_ie, cs.h_ae, cfg.sigma_e2)):
        b = (h_ir @ t + h_ar) @ w_bar
        j = noise_covariance_imcsi(w_bar, th, cs, cee, s2, receiver)
        c = np.linalg.solve(j, b)
        bhc = b.conj().T @ c
        gm = np.eye(b.shape[1]) + 0.5 * (bhc + bhc.conj().T)
        sign, logdet = np.linalg.slogdet(gm)
        out.append(float(logdet / np.log(2.0)))
    return out[0], out[1]


def secrecy_rate_imcsi(w: np.ndarray, theta, cs: ChannelSet, cfg: SystemConfig,
                       cee: CeeConfig) -> float:
    r_b, r_e = capacities_imcsi(w, theta, cs, cfg, cee)
    return max(0.0, r_b - r_e)


def dual_update(al: AlState, theta: np.ndarray, psi: np.ndarray) -> AlState:
    """Ascent step on the duals: Phi_g += (Psi_g - Theta_g)/rho. rho, epsilon kept."""
    return replace(al, Phi=al.Phi + (psi - theta) / al.rho)
