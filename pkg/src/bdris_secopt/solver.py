"""Riemannian conjugate-gradient solver with augmented-Lagrangian outer loop.

The inner loop (prcgd) is CG on a manifold: Fletcher-Reeves directions,
vector transport of the previous direction, strong Wolfe backtracking, and a
steepest-descent restart safeguard. The outer loop (pprcgd) drives the
equality constraint Psi_g = Theta_g to zero by shrinking the penalty
parameter and ascending the duals, while tightening the inner gradient
tolerance geometrically.

The engine is generic over a small geometry adapter so the same loop also
serves the sphere-only and sphere-x-torus baseline solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from .channels import ChannelSet, SystemConfig, cee_variances
from .manifold import (ProductDims, ProductPoint, TangentVector, _qr_unitary,
                       _sym, inner_product, project_tangent, random_point)
from .objective import (AlState, RatioObjective, RobustRatioObjective,
                        dual_update)

__all__ = [
    "SolverParams", "SolveTrace", "LineSearchError", "fletcher_reeves_beta",
    "wolfe_step", "prcgd", "pprcgd", "unitarity_residual", "dual_update",
]


@dataclass(frozen=True)
class SolverParams:
    rho0: float = 1.0
    epsilon0: float = 1e-1
    gamma1: float = 0.8          # penalty shrink (smaller rho = stronger penalty)
    gamma2: float = 0.9          # inner-tolerance shrink
    gamma3: float = 0.9          # required violation decrease per outer round
    eta_min: float = 1e-5
    epsilon_min: float = 1e-4
    sigma1: float = 1e-4         # sufficient decrease
    sigma2: float = 0.4          # curvature, must stay below 1/2
    alpha_init: float = 1.0
    backtrack: float = 0.5
    max_inner: int = 500
    max_outer: int = 150
    max_linesearch: int = 40

    def __post_init__(self):
        if not (self.rho0 > 0 and self.epsilon0 > 0):
            raise ValueError("rho0 and epsilon0 must be positive")
        for name in ("gamma1", "gamma2", "gamma3", "backtrack"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not (self.eta_min > 0 and self.epsilon_min > 0 and self.alpha_init > 0):
            raise ValueError("eta_min, epsilon_min, alpha_init must be positive")
        if not 0.0 < self.sigma1 < self.sigma2 < 0.5:
            raise ValueError("need 0 < sigma1 < sigma2 < 1/2")
        for name in ("max_inner", "max_outer", "max_linesearch"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")


class LineSearchError(RuntimeError):
    pass


@dataclass
class SolveTrace:
    """Per-iteration history of one solve.

    Inner lists are flattened across outer stages; inner_stage marks which
    stage each accepted step belongs to and stage_L0 holds each stage's
    starting AL value (the within-stage L sequence is non-increasing).
    """
    inner_L: list = field(default_factory=list)
    inner_gnorm: list = field(default_factory=list)
    inner_alpha: list = field(default_factory=list)
    inner_time: list = field(default_factory=list)
    inner_stage: list = field(default_factory=list)
    stage_L0: list = field(default_factory=list)
    waived_steps: int = 0
    outer_eta: list = field(default_factory=list)
    outer_rho: list = field(default_factory=list)
    outer_epsilon: list = field(default_factory=list)
    outer_sr: list = field(default_factory=list)
    outer_inner_iters: list = field(default_factory=list)
    outer_grad_norm: list = field(default_factory=list)
    outer_tightened: list = field(default_factory=list)
    termination: str = ""
    wall_s: float = 0.0

    @property
    def n_inner(self) -> int:
        return len(self.inner_L)

    @property
    def n_outer(self) -> int:
        return len(self.outer_eta)

    def final_eta(self) -> float:
        return self.outer_eta[-1] if self.outer_eta else float("inf")


# -- geometry adapters ------------------------------------------------------

class _ProductGeom:
    """Sphere x symmetric x unitary product; tangents are TangentVector."""

    @staticmethod
    def inner(u, v):
        return (np.vdot(u.W, v.W) + np.vdot(u.Theta, v.Theta)
                + np.vdot(u.Psi, v.Psi)).real

    @staticmethod
    def scale(u, c):
        return TangentVector(c * u.W, c * u.Theta, c * u.Psi)

    @staticmethod
    def combine(g, beta, td):
        # -g + beta * td
        return TangentVector(beta * td.W - g.W, beta * td.Theta - g.Theta,
                             beta * td.Psi - g.Psi)

    @staticmethod
    def retract(x, alpha, d):
        w = x.W + alpha * d.W
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise ValueError("degenerate sphere retraction")
        return ProductPoint(w / nw, x.Theta + alpha * d.Theta,
                            _qr_unitary(x.Psi + alpha * d.Psi))

    @staticmethod
    def project(x, amb):
        return project_tangent(x, amb)

    @staticmethod
    def project_pair(x, amb, d):
        # gradient projection and direction transport share the base point, so
        # the expensive unitary-block products run once on stacked groups
        gw_a, gt_a, gp_a = amb
        w = x.W
        pw_g = gw_a - w * np.vdot(gw_a, w).real
        pw_d = d.W - w * np.vdot(d.W, w).real
        pt_g = _sym(gt_a)
        pt_d = _sym(d.Theta)
        base = np.concatenate((x.Psi, x.Psi), axis=0)
        u = np.concatenate((gp_a, d.Psi), axis=0)
        b = np.swapaxes(base, -1, -2).conj() @ u
        proj = u - base @ (0.5 * (b + np.swapaxes(b, -1, -2).conj()))
        g = x.Psi.shape[0]
        return (TangentVector(pw_g, pt_g, proj[:g]),
                TangentVector(pw_d, pt_d, proj[g:]))


class _SphereGeom:
    """Unit-Frobenius-norm matrices; points and tangents are plain arrays."""

    @staticmethod
    def inner(u, v):
        return np.vdot(u, v).real

    @staticmethod
    def scale(u, c):
        return c * u

    @staticmethod
    def combine(g, beta, td):
        return beta * td - g

    @staticmethod
    def retract(x, alpha, d):
        w = x + alpha * d
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise ValueError("degenerate sphere retraction")
        return w / nw

    @staticmethod
    def project(x, amb):
        return amb - x * np.vdot(amb, x).real

    @classmethod
    def project_pair(cls, x, amb, d):
        return cls.project(x, amb), cls.project(x, d)


class _SphereTorusGeom:
    """(W, theta) with unit-norm W and unit-modulus theta entries."""

    @staticmethod
    def inner(u, v):
        return (np.vdot(u[0], v[0]) + np.vdot(u[1], v[1])).real

    @staticmethod
    def scale(u, c):
        return (c * u[0], c * u[1])

    @staticmethod
    def combine(g, beta, td):
        return (beta * td[0] - g[0], beta * td[1] - g[1])

    @staticmethod
    def retract(x, alpha, d):
        w = x[0] + alpha * d[0]
        nw = np.linalg.norm(w)
        th = x[1] + alpha * d[1]
        mag = np.abs(th)
        if nw == 0.0 or np.any(mag == 0.0):
            raise ValueError("degenerate retraction")
        return (w / nw, th / mag)

    @staticmethod
    def project(x, amb):
        w, th = x
        pw = amb[0] - w * np.vdot(amb[0], w).real
        pth = amb[1] - th * np.real(th.conj() * amb[1])
        return (pw, pth)

    @classmethod
    def project_pair(cls, x, amb, d):
        return cls.project(x, amb), cls.project(x, d)


# -- objective adapter for the augmented Lagrangian -------------------------

class _AlObjective:
    __slots__ = ("ctx", "rho", "phi")

    def __init__(self, ctx, al: AlState):
        self.ctx = ctx
        self.rho = al.rho
        self.phi = al.Phi

    def value(self, x):
        f, rc = self.ctx.value(x.W, x.Theta)
        d = x.Psi - x.Theta
        pen = (0.5 / self.rho) * np.vdot(d, d).real + np.vdot(self.phi, d).real
        return f + pen, (rc, d)

    def egrad(self, x, cache):
        rc, d = cache
        gw, gth = self.ctx.egrad(x.W, x.Theta, rc)
        r = d + self.rho * self.phi
        inv_rho = 1.0 / self.rho
        return gw, gth - inv_rho * r, inv_rho * r


# -- conjugate-gradient engine ----------------------------------------------

def _linesearch(geom, obj, x, d, l0, gd, par: SolverParams):
    """Backtracking strong-Wolfe probe. Returns None if no sufficient decrease."""
    alpha = par.alpha_init
    best = None
    for _ in range(par.max_linesearch):
        x_t = geom.retract(x, alpha, d)
        l_t, cache_t = obj.value(x_t)
        if l_t <= l0 + par.sigma1 * alpha * gd:
            g_t, td = geom.project_pair(x_t, obj.egrad(x_t, cache_t), d)
            if abs(geom.inner(g_t, td)) <= par.sigma2 * abs(gd):
                return alpha, x_t, l_t, g_t, td, False
            if best is None or l_t < best[2]:
                best = (alpha, x_t, l_t, g_t, td)
        alpha *= par.backtrack
    if best is not None:
        # curvature never held; fall back to the best sufficient-decrease step
        return best + (True,)
    return None


def _cg_engine(geom, obj, x, eps, par: SolverParams, trace: SolveTrace, stage: int):
    l, cache = obj.value(x)
    g = geom.project(x, obj.egrad(x, cache))
    gnorm2 = geom.inner(g, g)
    d = geom.scale(g, -1.0)
    gd = -gnorm2
    trace.stage_L0.append(l)
    n_acc = 0
    while True:
        if math.sqrt(gnorm2) < eps:
            reason = "grad_tol"
            break
        if n_acc >= par.max_inner:
            reason = "max_inner"
            break
        t0 = perf_counter()
        restarted = False
        if gd >= 0.0:  # CG direction lost descent; restart
            d = geom.scale(g, -1.0)
            gd = -gnorm2
            restarted = True
        hit = _linesearch(geom, obj, x, d, l, gd, par)
        if hit is None and not restarted:
            d = geom.scale(g, -1.0)
            gd = -gnorm2
            hit = _linesearch(geom, obj, x, d, l, gd, par)
        if hit is None:
            reason = "linesearch_failure"
            break
        alpha, x, l, g, td, waived = hit
        gnorm2_new = geom.inner(g, g)
        beta = gnorm2_new / gnorm2
        d = geom.combine(g, beta, td)
        gd = geom.inner(g, d)
        gnorm2 = gnorm2_new
        n_acc += 1
        if waived:
            trace.waived_steps += 1
        trace.inner_L.append(l)
        trace.inner_gnorm.append(math.sqrt(gnorm2))
        trace.inner_alpha.append(alpha)
        trace.inner_time.append(perf_counter() - t0)
        trace.inner_stage.append(stage)
    return x, l, math.sqrt(gnorm2), reason, n_acc


# -- public operations ------------------------------------------------------

def fletcher_reeves_beta(g_now: TangentVector, g_prev: TangentVector) -> float:
    denom = inner_product(g_prev, g_prev)
    if denom == 0.0:
        raise ZeroDivisionError("previous gradient is zero; solver should have stopped")
    return inner_product(g_now, g_now) / denom


def wolfe_step(point: ProductPoint, direction: TangentVector, al: AlState,
               params: SolverParams, ctx):
    """One strong-Wolfe backtracking line search along `direction`.

    Returns (alpha, next_point, next_L). Raises LineSearchError if no step
    with sufficient decrease exists within the backtracking budget.
    """
    obj = _AlObjective(ctx, al)
    l0, cache = obj.value(point)
    g = _ProductGeom.project(point, obj.egrad(point, cache))
    gd = _ProductGeom.inner(g, direction)
    if gd >= 0.0:
        raise ValueError("direction is not a descent direction")
    hit = _linesearch(_ProductGeom, obj, point, direction, l0, gd, params)
    if hit is None:
        raise LineSearchError("no sufficient-decrease step found")
    alpha, x_t, l_t, _, _, _ = hit
    return alpha, x_t, l_t


def prcgd(start: ProductPoint, al: AlState, params: SolverParams, ctx):
    """Inner Riemannian CG: minimize the AL at fixed (rho, Phi) to ||grad|| < al.epsilon."""
    trace = SolveTrace()
    obj = _AlObjective(ctx, al)
    x, _, gnorm, reason, n_acc = _cg_engine(_ProductGeom, obj, start, al.epsilon,
                                            params, trace, 0)
    trace.termination = reason
    trace.outer_grad_norm.append(gnorm)
    trace.outer_inner_iters.append(n_acc)
    return x, trace


def unitarity_residual(theta: np.ndarray) -> float:
    """max_g max-entry |Theta_g Theta_g^H - I|."""
    th = theta if theta.ndim == 3 else theta[None]
    if th.size == 0:
        return 0.0
    eye = np.eye(th.shape[-1])
    return float(np.max(np.abs(th @ np.swapaxes(th, -1, -2).conj() - eye)))


def pprcgd(cs: ChannelSet, cfg: SystemConfig, params: SolverParams | None = None,
           mode: str = "perfect", *, delta: float = 0.0, groups: int | None = None,
           eve_active: bool = True, rng: np.random.Generator | None = None,
           start: ProductPoint | None = None):
    """Full penalized solve. Returns (W, Theta, trace); W is unit-norm.

    mode "perfect" optimizes the nominal ratio objective; "imperfect" builds
    estimation-error variances at level `delta` and optimizes the robust one.
    """
    par = SolverParams() if params is None else params
    g = cfg.g if groups is None else groups
    if mode == "perfect":
        ctx = RatioObjective(cs, cfg, groups=g, eve_active=eve_active)
    elif mode == "imperfect":
        ctx = RobustRatioObjective(cs, cfg, cee_variances(cfg, cs, delta), groups=g,
                                   eve_active=eve_active)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    dims = ProductDims(cfg.n_t, cfg.n_s, cfg.m // g, g)
    if start is None:
        start = random_point(dims, np.random.default_rng() if rng is None else rng)

    t0 = perf_counter()
    trace = SolveTrace()
    x = start
    rho = par.rho0
    eps = par.epsilon0
    phi = np.zeros((g, dims.m_tilde, dims.m_tilde), dtype=complex)
    eta = float(np.max(np.abs(x.Psi - x.Theta))) if x.Psi.size else 0.0
    last_gnorm = math.inf
    termination = "converged"
    outer = 0
    while (eta >= par.eta_min) or (eps >= par.epsilon_min) or (last_gnorm >= par.epsilon_min):
        if outer >= par.max_outer:
            termination = "budget"
            break
        al = AlState(rho=rho, Phi=phi, epsilon=eps, eta=eta)
        obj = _AlObjective(ctx, al)
        x, _, last_gnorm, reason, n_acc = _cg_engine(_ProductGeom, obj, x, eps,
                                                     par, trace, outer)
        eta_new = float(np.max(np.abs(x.Psi - x.Theta))) if x.Psi.size else 0.0
        tightened = eta_new >= par.gamma3 * eta
        if tightened:
            rho *= par.gamma1
        else:
            phi = phi + (x.Psi - x.Theta) / rho
        f, _ = ctx.value(x.W, x.Theta)
        trace.outer_eta.append(eta_new)
        trace.outer_rho.append(al.rho)
        trace.outer_epsilon.append(eps)
        trace.outer_sr.append(ctx.secrecy_value(f))
        trace.outer_inner_iters.append(n_acc)
        trace.outer_grad_norm.append(last_gnorm)
        trace.outer_tightened.append(tightened)
        eta = eta_new
        eps *= par.gamma2
        outer += 1
    trace.termination = termination
    trace.wall_s = perf_counter() - t0
    return x.W, x.Theta, trace
