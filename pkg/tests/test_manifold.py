"""Product-manifold primitives: metric, projections, retraction, transport."""

import numpy as np
import pytest

from bdris_secopt.manifold import (
    ProductDims,
    ProductPoint,
    TangentVector,
    feasibility_residuals,
    inner_product,
    norm,
    project_tangent,
    random_point,
    retract,
    t_add_scaled,
    t_scale,
    transport,
    zero_like,
)

DIMS = ProductDims(n_t=3, n_s=2, m_tilde=2, groups=2)


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _ambient(rng, dims=DIMS):
    return (_cn(rng, (dims.n_t, dims.n_s)),
            _cn(rng, (dims.groups, dims.m_tilde, dims.m_tilde)),
            _cn(rng, (dims.groups, dims.m_tilde, dims.m_tilde)))


def _tangency_residuals(base, v):
    r_w = abs(np.vdot(v.W, base.W).real)
    r_t = np.max(np.abs(v.Theta - np.swapaxes(v.Theta, -1, -2)))
    a = np.swapaxes(v.Psi, -1, -2).conj() @ base.Psi
    b = np.swapaxes(base.Psi, -1, -2).conj() @ v.Psi
    r_p = np.max(np.abs(a + b))
    return r_w, float(r_t), float(r_p)


def _flat(p):
    return np.concatenate([p.W.ravel(), p.Theta.ravel(), p.Psi.ravel()])


# -- inner product ----------------------------------------------------------

def test_inner_product_zero():
    z = (np.zeros((3, 2), complex), np.zeros((2, 2, 2), complex),
         np.zeros((2, 2, 2), complex))
    assert inner_product(z, z) == 0.0


def test_inner_product_identity_block():
    # W block the 2x2 identity, everything else zero: Re Tr(I) = 2
    u = (np.eye(2, dtype=complex), np.zeros((1, 2, 2), complex),
         np.zeros((1, 2, 2), complex))
    assert inner_product(u, u) == pytest.approx(2.0)


def test_inner_product_matches_flat_oracle():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        u = _ambient(rng)
        v = _ambient(rng)
        flat_u = np.concatenate([b.ravel() for b in u])
        flat_v = np.concatenate([b.ravel() for b in v])
        oracle = np.sum(np.conj(flat_u) * flat_v).real
        assert inner_product(u, v) == pytest.approx(oracle, rel=1e-12)
        # symmetric in its arguments
        assert inner_product(v, u) == pytest.approx(oracle, rel=1e-12)


def test_inner_product_shape_mismatch():
    u = (np.zeros((3, 2), complex), np.zeros((2, 2, 2), complex),
         np.zeros((2, 2, 2), complex))
    v = (np.zeros((3, 3), complex), np.zeros((2, 2, 2), complex),
         np.zeros((2, 2, 2), complex))
    with pytest.raises(ValueError):
        inner_product(u, v)


def test_norm_is_sqrt_of_inner():
    rng = np.random.default_rng(7)
    u = _ambient(rng)
    assert norm(u) == pytest.approx(np.sqrt(inner_product(u, u)))


# -- tangent projection -----------------------------------------------------

def test_project_radial_w_to_zero():
    rng = np.random.default_rng(0)
    base = random_point(DIMS, rng)
    amb = (base.W.copy(), np.zeros_like(base.Theta), np.zeros_like(base.Psi))
    v = project_tangent(base, amb)
    assert np.max(np.abs(v.W)) <= 1e-12


def test_project_symmetric_block_cases():
    rng = np.random.default_rng(1)
    base = random_point(DIMS, rng)
    a = _cn(rng, (DIMS.groups, DIMS.m_tilde, DIMS.m_tilde))
    sym = 0.5 * (a + np.swapaxes(a, -1, -2))
    anti = 0.5 * (a - np.swapaxes(a, -1, -2))
    zero_w = np.zeros_like(base.W)
    zero_p = np.zeros_like(base.Psi)
    v_sym = project_tangent(base, (zero_w, sym, zero_p))
    v_anti = project_tangent(base, (zero_w, anti, zero_p))
    assert np.max(np.abs(v_sym.Theta - sym)) <= 1e-12
    assert np.max(np.abs(v_anti.Theta)) <= 1e-12


def test_projection_tangency_and_idempotency():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        base = random_point(DIMS, rng)
        v = project_tangent(base, _ambient(rng))
        r_w, r_t, r_p = _tangency_residuals(base, v)
        assert r_w <= 1e-10 and r_t <= 1e-10 and r_p <= 1e-10
        v2 = project_tangent(base, v)
        assert norm(t_add_scaled(v2, v, -1.0)) <= 1e-12


def test_projection_residual_orthogonal_to_tangents():
    rng = np.random.default_rng(3)
    base = random_point(DIMS, rng)
    amb = _ambient(rng)
    v = project_tangent(base, amb)
    resid = (amb[0] - v.W, amb[1] - v.Theta, amb[2] - v.Psi)
    for _ in range(20):
        t = project_tangent(base, _ambient(rng))
        assert abs(inner_product(resid, t)) <= 1e-10


def test_projection_self_adjoint():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        base = random_point(DIMS, rng)
        u = _ambient(rng)
        v = _ambient(rng)
        pu = project_tangent(base, u)
        pv = project_tangent(base, v)
        assert inner_product(pu, v) == pytest.approx(inner_product(u, pv), abs=1e-10)


def test_project_shape_mismatch():
    rng = np.random.default_rng(5)
    base = random_point(DIMS, rng)
    bad = (np.zeros((4, 2), complex), np.zeros_like(base.Theta),
           np.zeros_like(base.Psi))
    with pytest.raises(ValueError):
        project_tangent(base, bad)


# -- retraction -------------------------------------------------------------

def test_retract_zero_step_is_identity():
    rng = np.random.default_rng(11)
    base = random_point(DIMS, rng)
    out = retract(base, zero_like(base))
    assert np.max(np.abs(_flat(out) - _flat(base))) <= 1e-12


def test_retract_feasibility_any_step_size():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        base = random_point(DIMS, rng)
        step = project_tangent(base, _ambient(rng))
        for scale in (1e-3, 1.0, 10.0, 100.0):
            out = retract(base, t_scale(step, scale))
            r_w, r_t, r_p = feasibility_residuals(out)
            assert r_w <= 1e-8 and r_t <= 1e-8 and r_p <= 1e-8


def test_retract_sphere_normalization_oracle():
    rng = np.random.default_rng(13)
    base = random_point(DIMS, rng)
    dw = _cn(rng, base.W.shape)
    target = base.W + dw
    scale = 2.0 / np.linalg.norm(target)
    dw = (1.0 + 0.0j) * (scale * target - base.W)   # now ||W + dW|| = 2
    out = retract(base, (dw, np.zeros_like(base.Theta), np.zeros_like(base.Psi)))
    assert np.max(np.abs(out.W - (base.W + dw) / 2.0)) <= 1e-12


def test_retract_skew_step_stays_unitary():
    rng = np.random.default_rng(17)
    eye = np.broadcast_to(np.eye(2, dtype=complex), (2, 2, 2)).copy()
    base = ProductPoint(random_point(DIMS, rng).W, np.zeros((2, 2, 2), complex), eye)
    a = _cn(rng, (2, 2, 2))
    skew = 0.05 * (a - np.swapaxes(a, -1, -2).conj())
    out = retract(base, (np.zeros_like(base.W), np.zeros_like(base.Theta), skew))
    gram = out.Psi @ np.swapaxes(out.Psi, -1, -2).conj()
    assert np.max(np.abs(gram - np.eye(2))) <= 1e-10


def test_retract_second_order_slope():
    # ||retract(x, t d) - (x + t d)|| must shrink like t^2
    rng = np.random.default_rng(19)
    base = random_point(DIMS, rng)
    d = project_tangent(base, _ambient(rng))
    d = t_scale(d, 1.0 / norm(d))
    ts = np.logspace(-1, -4, 7)
    errs = []
    for t in ts:
        out = retract(base, t_scale(d, t))
        lin = np.concatenate([(base.W + t * d.W).ravel(),
                              (base.Theta + t * d.Theta).ravel(),
                              (base.Psi + t * d.Psi).ravel()])
        errs.append(np.linalg.norm(_flat(out) - lin))
    slope = np.polyfit(np.log(ts), np.log(errs), 1)[0]
    assert slope >= 1.9, f"retraction error slope {slope:.3f}"


def test_retract_degenerate_sphere():
    rng = np.random.default_rng(23)
    base = random_point(DIMS, rng)
    step = (-base.W, np.zeros_like(base.Theta), np.zeros_like(base.Psi))
    with pytest.raises(ValueError):
        retract(base, step)


def test_retract_rank_deficient_unitary():
    rng = np.random.default_rng(29)
    base = random_point(DIMS, rng)
    dp = np.zeros_like(base.Psi)
    dp[0] = -base.Psi[0]          # zeroes out one Psi block entirely
    with pytest.raises(ValueError):
        retract(base, (np.zeros_like(base.W), np.zeros_like(base.Theta), dp))


# -- transport --------------------------------------------------------------

def test_transport_same_point_equals_projection():
    rng = np.random.default_rng(31)
    p = random_point(DIMS, rng)
    amb = _ambient(rng)
    moved = transport(p, p, amb)
    proj = project_tangent(p, amb)
    assert norm(t_add_scaled(moved, proj, -1.0)) <= 1e-13


def test_transport_zero_is_zero():
    rng = np.random.default_rng(37)
    frm = random_point(DIMS, rng)
    to = random_point(DIMS, rng)
    out = transport(frm, to, zero_like(frm))
    assert norm(out) == 0.0


def test_transport_tangent_at_target_and_nonexpansive():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        frm = random_point(DIMS, rng)
        to = random_point(DIMS, rng)
        d = project_tangent(frm, _ambient(rng))
        out = transport(frm, to, d)
        r_w, r_t, r_p = _tangency_residuals(to, out)
        assert r_w <= 1e-10 and r_t <= 1e-10 and r_p <= 1e-10
        assert norm(out) <= norm(d) + 1e-12


# -- random points ----------------------------------------------------------

def test_random_point_feasible_and_deterministic():
    for seed in range(10):
        p = random_point(DIMS, np.random.default_rng(seed))
        r_w, r_t, r_p = feasibility_residuals(p)
        assert r_w <= 1e-10 and r_t <= 1e-10 and r_p <= 1e-8
        q = random_point(DIMS, np.random.default_rng(seed))
        assert np.array_equal(p.W, q.W)
        assert np.array_equal(p.Theta, q.Theta)
        assert np.array_equal(p.Psi, q.Psi)


def test_random_point_theta_not_unitary():
    # Theta starts as a plain symmetrized Gaussian; unitarity only ever
    # arrives through the Psi coupling, so raw draws must violate it.
    dims = ProductDims(n_t=2, n_s=1, m_tilde=4, groups=1)
    rng = np.random.default_rng(41)
    mean_res = 0.0
    n = 1000
    for _ in range(n):
        p = random_point(dims, rng)
        gram = p.Theta[0] @ p.Theta[0].conj().T
        mean_res += np.linalg.norm(gram - np.eye(4)) / n
    assert mean_res > 0.1


# -- small helpers ----------------------------------------------------------

def test_tangent_arithmetic():
    rng = np.random.default_rng(43)
    base = random_point(DIMS, rng)
    u = project_tangent(base, _ambient(rng))
    v = project_tangent(base, _ambient(rng))
    w = t_add_scaled(u, v, -2.0)
    assert np.max(np.abs(w.W - (u.W - 2.0 * v.W))) <= 1e-15
    s = t_scale(u, 3.0)
    assert norm(s) == pytest.approx(3.0 * norm(u), rel=1e-12)
    z = zero_like(base)
    assert norm(z) == 0.0 and z.W.shape == base.W.shape


def test_feasibility_residuals_flag_violations():
    rng = np.random.default_rng(47)
    p = random_point(DIMS, rng)
    bad = ProductPoint(2.0 * p.W, p.Theta, p.Psi)
    assert feasibility_residuals(bad)[0] == pytest.approx(3.0)
    bad = ProductPoint(p.W, p.Theta, 2.0 * p.Psi)
    assert feasibility_residuals(bad)[2] == pytest.approx(3.0)
