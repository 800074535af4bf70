"""Shared builders for small synthetic problem instances.

Unit tests run on unit-scale CN(0,1) channels (p = sigma^2 = 1) so that
finite-difference probes and closed-form oracles are far from the rounding
floor; the physically scaled geometry is exercised separately.
"""

import numpy as np

from bdris_secopt.channels import ChannelSet, SystemConfig
from bdris_secopt.manifold import ProductDims, random_point
from bdris_secopt.objective import AlState


def cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def synth_config(**kw):
    base = dict(n_t=4, n_b=2, n_e=2, n_s=2, m=4, g=2,
                p=1.0, sigma_b2=1.0, sigma_e2=1.0)
    base.update(kw)
    return SystemConfig(**base)


def synth_channels(cfg, rng):
    return ChannelSet(
        h_ab=cn(rng, (cfg.n_b, cfg.n_t)),
        h_ae=cn(rng, (cfg.n_e, cfg.n_t)),
        h_ai=cn(rng, (cfg.m, cfg.n_t)),
        h_ib=cn(rng, (cfg.n_b, cfg.m)),
        h_ie=cn(rng, (cfg.n_e, cfg.m)),
    )


def synth_point(cfg, rng):
    return random_point(ProductDims(cfg.n_t, cfg.n_s, cfg.m_tilde, cfg.g), rng)


def random_al(cfg, rng):
    rho = float(rng.uniform(0.1, 10.0))
    phi = cn(rng, (cfg.g, cfg.m_tilde, cfg.m_tilde))
    return AlState(rho=rho, Phi=phi, epsilon=1e-2)


def numeric_grad(fun, x, h=1e-6):
    """Central-difference gradient in the d f = Re Tr(G^H dX) convention."""
    g = np.zeros_like(x, dtype=complex)
    flat = x.ravel()
    out = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = fun(x)
        flat[i] = orig - h
        fm = fun(x)
        re = (fp - fm) / (2.0 * h)
        flat[i] = orig + 1j * h
        fp = fun(x)
        flat[i] = orig - 1j * h
        fm = fun(x)
        im = (fp - fm) / (2.0 * h)
        flat[i] = orig
        out[i] = re + 1j * im
    return g


def rel_err(approx, exact):
    denom = np.linalg.norm(exact)
    if denom == 0.0:
        return np.linalg.norm(approx)
    return np.linalg.norm(approx - exact) / denom
