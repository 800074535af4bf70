"""Comparison schemes: fixed-scattering beamforming, diagonal RIS, upper bound.

All baselines reuse the same conjugate-gradient engine as the main solver,
swapping in the matching geometry: the sphere alone when the scattering
matrix is fixed (or absent), sphere x per-element phase torus for the
diagonal RIS, and the full product manifold with the eavesdropper term
dropped for the upper bound.
"""

from __future__ import annotations

import numpy as np

from .channels import ChannelSet, SystemConfig, cee_variances, group_blocks
from .manifold import _qr_unitary
from .objective import (RatioObjective, RobustRatioObjective, _inv_det_gram,
                        capacities, effective_channels, secrecy_rate,
                        secrecy_rate_imcsi)
from .solver import (SolveTrace, SolverParams, _cg_engine, _SphereGeom,
                     _SphereTorusGeom, pprcgd)


def random_symmetric_unitary(m: int, rng: np.random.Generator) -> np.ndarray:
    """A random matrix that is symmetric (plain transpose) and unitary.

    U U^T for Haar-like unitary U: (UU^T)^T = UU^T and (UU^T)(UU^T)^H = I.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    u = _qr_unitary((rng.standard_normal((m, m))
                     + 1j * rng.standard_normal((m, m))) / np.sqrt(2.0))
    return u @ u.T


class _FixedThetaObjective:
    """Ratio objective in W alone; effective channels precomputed."""

    __slots__ = ("ht_b", "ht_e")

    def __init__(self, ht_b: np.ndarray, ht_e: np.ndarray | None):
        self.ht_b = ht_b
        self.ht_e = ht_e

    def value(self, w):
        a_b = self.ht_b @ w
        inv_b, det_b = _inv_det_gram(a_b)
        if self.ht_e is None:
            return 1.0 / det_b, (a_b, inv_b, None, None, 1.0 / det_b)
        a_e = self.ht_e @ w
        inv_e, det_e = _inv_det_gram(a_e)
        return det_e / det_b, (a_b, inv_b, a_e, inv_e, det_e / det_b)

    def egrad(self, w, cache):
        del w
        a_b, inv_b, a_e, inv_e, f = cache
        gw = -(self.ht_b.conj().T @ (a_b @ inv_b))
        if self.ht_e is not None:
            gw = gw + self.ht_e.conj().T @ (a_e @ inv_e)
        return 2.0 * f * gw


class _DrisObjective:
    """Sphere x torus adapter over the full-matrix ratio objective (G = 1)."""

    __slots__ = ("ro",)

    def __init__(self, ro):
        self.ro = ro

    def value(self, x):
        w, th = x
        return self.ro.value(w, np.diag(th)[None])

    def egrad(self, x, cache):
        w, _ = x
        gw, gtheta = self.ro.egrad(w, None, cache)
        return (gw, np.diagonal(gtheta[0]).copy())


def _random_unit(shape, rng):
    w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return w / np.linalg.norm(w)


def _fixed_effective(cs: ChannelSet, cfg: SystemConfig, theta_fixed):
    if theta_fixed is None:
        c_b = np.sqrt(cfg.p / cfg.sigma_b2)
        c_e = np.sqrt(cfg.p / cfg.sigma_e2)
        return c_b * cs.h_ab, c_e * cs.h_ae
    ec = effective_channels(group_blocks(cs, 1), np.asarray(theta_fixed)[None],
                            cfg.p, cfg.sigma_e2, cfg.sigma_b2)
    return ec.ht_b, ec.ht_e


def _solve_fixed_theta(cs, cfg, theta_fixed, params, rng=None, start=None,
                       eve_active=True):
    par = SolverParams() if params is None else params
    ht_b, ht_e = _fixed_effective(cs, cfg, theta_fixed)
    obj = _FixedThetaObjective(ht_b, ht_e if eve_active else None)
    if start is None:
        rng = np.random.default_rng() if rng is None else rng
        start = _random_unit((cfg.n_t, cfg.n_s), rng)
    trace = SolveTrace()
    w, _, gnorm, reason, n_acc = _cg_engine(_SphereGeom, obj, start,
                                            par.epsilon_min, par, trace, 0)
    trace.termination = reason
    trace.outer_grad_norm.append(gnorm)
    trace.outer_inner_iters.append(n_acc)
    return w, trace


def optimize_fixed_theta(cs: ChannelSet, cfg: SystemConfig, theta_fixed,
                         params: SolverParams | None = None, *,
                         rng: np.random.Generator | None = None,
                         start: np.ndarray | None = None):
    """Beamformer-only optimization with the scattering matrix frozen.

    theta_fixed is a full M x M matrix, or None for no RIS at all.
    Returns (W, SR).
    """
    w, _ = _solve_fixed_theta(cs, cfg, theta_fixed, params, rng=rng, start=start)
    theta_eval = np.zeros((cfg.m, cfg.m), dtype=complex) if theta_fixed is None else theta_fixed
    return w, secrecy_rate(w, theta_eval, cs, cfg)


def _solve_dris(cs, cfg, params, delta=0.0, rng=None, start=None):
    par = SolverParams() if params is None else params
    if delta > 0.0:
        ro = RobustRatioObjective(cs, cfg, cee_variances(cfg, cs, delta), groups=1)
    else:
        ro = RatioObjective(cs, cfg, groups=1)
    obj = _DrisObjective(ro)
    if start is None:
        rng = np.random.default_rng() if rng is None else rng
        w0 = _random_unit((cfg.n_t, cfg.n_s), rng)
        th0 = np.exp(2j * np.pi * rng.random(cfg.m))
        start = (w0, th0)
    trace = SolveTrace()
    x, _, gnorm, reason, n_acc = _cg_engine(_SphereTorusGeom, obj, start,
                                            par.epsilon_min, par, trace, 0)
    trace.termination = reason
    trace.outer_grad_norm.append(gnorm)
    trace.outer_inner_iters.append(n_acc)
    return x[0], x[1], trace


def optimize_dris(cs: ChannelSet, cfg: SystemConfig,
                  params: SolverParams | None = None, *, delta: float = 0.0,
                  rng: np.random.Generator | None = None, start=None):
    """Diagonal RIS with unit-modulus phases, jointly optimized with W.

    Returns (W, theta_diag, SR); SR is the robust rate when delta > 0.
    """
    if cfg.m == 0:  # no elements: the torus factor is empty
        w, sr = optimize_fixed_theta(cs, cfg, None, params, rng=rng)
        return w, np.zeros(0, dtype=complex), sr
    w, th, _ = _solve_dris(cs, cfg, params, delta=delta, rng=rng, start=start)
    if delta > 0.0:
        sr = secrecy_rate_imcsi(w, np.diag(th), cs, cfg, cee_variances(cfg, cs, delta))
    else:
        sr = secrecy_rate(w, np.diag(th), cs, cfg)
    return w, th, sr


def upper_bound(cs: ChannelSet, cfg: SystemConfig,
                params: SolverParams | None = None, *,
                groups: int = 1, rng: np.random.Generator | None = None,
                start=None):
    """Bob-capacity maximization (eavesdropper term dropped): an SR upper bound.

    Returns (W, Theta, Rb).
    """
    w, theta, _ = pprcgd(cs, cfg, params, eve_active=False, groups=groups,
                         rng=rng, start=start)
    rb, _ = capacities(w, theta, cs, cfg)
    return w, theta, rb
