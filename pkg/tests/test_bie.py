import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from elastic_cq import checks
from elastic_cq.bie import (FreqSystem, NystromGrid, SingularSystemError, _split_kernels, assemble_system,
                            damping_factor, damping_order, eval_observation, global_split_safe, kernel_D,
                            kernel_D_direct, kernel_H, kernel_H_direct, kress_weights, point_field, solve_frequency)
from elastic_cq.cq import make_grid
from elastic_cq.geometry import GeometryError, ObservationCircle, StarCurve, TrigPoly, apple, circle, peanut

C1, C2 = 3.0, 1.6
TRIG = StarCurve((0.0, 0.0), TrigPoly((0.8, 0.1, -0.05, 0.02), (0.04, 0.03, -0.01)))
SHAPES = {"peanut": peanut(), "circle": circle(0.6, (0.05, -0.02)), "trig": TRIG}
freq = st.builds(complex, st.floats(0.3, 20.0), st.floats(-25.0, 25.0))


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------
def test_weight_examples():
    R, T = kress_weights(1)
    assert R[0] == pytest.approx(-np.pi)
    _, T = kress_weights(2)
    assert np.allclose(T, [0, np.pi, 0, -np.pi], atol=1e-15)
    with pytest.raises(ValueError):
        kress_weights(0)


@pytest.mark.parametrize("n", [3, 7, 16, 32, 50])
def test_weight_identities(n):
    err, total = checks.quadrature_identity_error(n)
    assert err <= 1e-10 and total <= 1e-12
    R, T = kress_weights(n)
    j = np.arange(2 * n)
    ref_R = -(2 * np.pi / n) * sum(np.cos(m * j * np.pi / n) / m for m in range(1, n)) - (-1.0) ** j * np.pi / n**2
    assert np.allclose(R, ref_R, atol=1e-13)
    # odd in the index, 2n-periodic
    assert np.allclose(T[(-j) % (2 * n)], -T, atol=1e-13)


def test_cauchy_weights_integrate_trig():
    # -sum_j T_(i-j) f(eta_j) approximates p.v. int f(eta)/sin(eta - t_i): exact for sin(eta - t) / sin(eta - t) = 1
    n = 16
    grid = NystromGrid(n)
    t = grid.nodes
    # f(eta) = cos(eta)  ->  p.v. int cos(eta)/sin(eta - t) d eta = -2 pi sin(t)... check via f = sin(eta - t_i) * g
    for i in (0, 5):
        f = np.cos(t - t[i])
        val = -grid.T_matrix[i] @ f
        # p.v. int cos(eta - t)/sin(eta - t) = 0 (odd integrand), and int 1 = 2 pi
        assert abs(val) <= 1e-12
        val1 = -grid.T_matrix[i] @ np.sin(t - t[i])
        assert val1 == pytest.approx(2 * np.pi, abs=1e-10)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------
def test_diagonal_values():
    r0 = 0.7
    D1, D2 = kernel_D(0.4, 0.4, 1.0 + 1j, C1, circle(r0))
    assert D1 == 0 and D2 == pytest.approx(-1 / (2 * np.pi), rel=1e-14)
    H = kernel_H(1.3, 1.3, 2.0 - 1j, C2, apple())
    assert np.allclose(H, (1 / np.pi, 0, 0))
    # 2 pi wrap counts as diagonal
    assert kernel_H(0.0, 2 * np.pi, 1.0, C1, peanut())[0] == pytest.approx(1 / np.pi)


@pytest.mark.parametrize("curve", [apple(), peanut(), TRIG])
@given(s=freq, theta=st.floats(0, 2 * np.pi))
def test_split_reconstruction(curve, s, theta):
    for delta in (np.pi, np.pi / 2, 0.3):
        eta = theta - delta
        log = np.log(4 * np.sin(delta / 2) ** 2)
        D1, D2 = kernel_D(theta, eta, s, C1, curve)
        ref = kernel_D_direct(theta, eta, s, C1, curve)
        # the split terms grow like exp(Re(s) r / c) and cancel; the floor is their size
        assert abs(D1 * log + D2 - ref) <= 1e-10 * max(1.0, abs(ref), abs(D1 * log), abs(D2))
        H1, H2, H3 = kernel_H(theta, eta, s, C2, curve)
        refH = kernel_H_direct(theta, eta, s, C2, curve)
        scale = max(1.0, abs(refH), abs(H1 / np.sin(eta - theta)), abs(H2 * log), abs(H3))
        assert abs(H1 / np.sin(eta - theta) + H2 * log + H3 - refH) <= 1e-10 * scale


def test_cauchy_coefficient_limit_on_circle():
    H1, _, _ = kernel_H(1.0, 1.0 + 1e-4, 1.5, C1, circle(0.8))
    assert H1 == pytest.approx(1 / np.pi, abs=1e-6)


@given(s=freq)
def test_kernel_conjugation(s):
    th, et = 0.3, 2.1
    for fn in (kernel_D, kernel_H):
        a = fn(th, et, np.conj(s), C1, peanut())
        b = fn(th, et, s, C1, peanut())
        assert np.allclose(a, np.conj(b), rtol=1e-13, atol=1e-15)


def test_kernel_real_frequency_is_real():
    D1, D2 = kernel_D(0.3, 2.0, 2.5, C1, apple())
    assert abs(np.imag(D1 * np.log(4 * np.sin(-0.85) ** 2) + D2)) <= 1e-14 * abs(D2)


def test_damping_factor():
    z = np.array([1e-3, 0.1 + 0.1j, 0.5j])
    # 1 + O(z^m)
    assert np.allclose(damping_factor(z, 12), 1.0, atol=1e-14)
    big = np.array([60.0 + 0j, 200.0])
    assert np.all(np.abs(damping_factor(big, 12) * np.exp(big)) < 1e30)
    assert damping_order(1.0) == 12
    m = damping_order(400.0)
    assert 2 <= m < 12 and 400.0 ** (m - 1) / math.factorial(m - 1) <= 1e12


def test_damped_split_sums_to_direct_kernel():
    theta = np.array([0.2, 1.1, 3.0, 1.0])
    eta = np.array([2.5, 4.0, 0.1, 1.001])
    curve = peanut()
    pt, d1t, d2t = curve.eval(theta)
    pe = curve.eval(eta)[0]
    s = 40.0 + 20j
    D1g, _, _, H2g, _ = _split_kernels(theta, eta, pt, d1t, d2t, pe, s, C2)
    D1, D2, H1, H2, H3 = _split_kernels(theta, eta, pt, d1t, d2t, pe, s, C2, damp=damping_order(50.0))
    log = np.log(4 * np.sin((theta - eta) / 2) ** 2)
    ref = kernel_D_direct(theta, eta, s, C2, curve)
    scale = np.maximum(np.abs(D1 * log), np.abs(D2))
    assert np.all(np.abs(D1 * log + D2 - ref) <= 1e-14 * scale + 1e-300)
    refH = kernel_H_direct(theta, eta, s, C2, curve)
    scaleH = np.maximum.reduce([np.abs(H1 / np.sin(eta - theta)), np.abs(H2 * log), np.abs(H3)])
    assert np.all(np.abs(H1 / np.sin(eta - theta) + H2 * log + H3 - refH) <= 1e-14 * scaleH)
    # damping shrinks the far coefficients by orders of magnitude and leaves near ones alone
    assert np.all(np.abs(D1[:3]) < np.abs(D1g[:3])) and np.abs(D1[1]) < 1e-7 * np.abs(D1g[1])
    assert D1[3] == pytest.approx(D1g[3], rel=1e-12) and H2[3] == pytest.approx(H2g[3], rel=1e-12)
    assert not global_split_safe(s, C2, 1.0)
    assert global_split_safe(1.0, C1, 1.0)


# ---------------------------------------------------------------------------
# assembly and solve
# ---------------------------------------------------------------------------
def test_assembly_example():
    sys_ = assemble_system(circle(1.0), 1.0, 1.0, 1.0, NystromGrid(2))
    A = sys_.matrix
    assert A.shape == (8, 8) and np.all(np.isfinite(A))
    X_diag = np.diag(A[:4, :4]) + 1.0
    assert np.allclose(X_diag, -0.25)


@given(s=freq)
def test_assembly_deterministic_and_conjugate(s):
    grid = NystromGrid(8)
    a = assemble_system(peanut(), s, C1, C2, grid).matrix
    b = assemble_system(peanut(), s, C1, C2, grid).matrix
    assert np.array_equal(a, b)
    c = assemble_system(peanut(), np.conj(s), C1, C2, grid).matrix
    assert np.allclose(c, np.conj(a), rtol=1e-13, atol=1e-14)


def test_solve_linearity_and_zero():
    grid = NystromGrid(16)
    sys_ = assemble_system(apple(), 2.0 + 3j, C1, C2, grid)
    rng = np.random.default_rng(4)
    w = (rng.standard_normal(32) + 0j, rng.standard_normal(32) + 0j)
    d = solve_frequency(sys_, w)
    d2 = solve_frequency(sys_, (2 * w[0], 2 * w[1]))
    assert np.allclose(d2.phi1, 2 * d.phi1) and np.allclose(d2.phi2, 2 * d.phi2)
    z = solve_frequency(sys_, (np.zeros(32), np.zeros(32)))
    assert np.all(z.phi1 == 0) and np.all(z.phi2 == 0)
    with pytest.raises(ValueError):
        solve_frequency(sys_)


def test_solve_residual_check():
    grid = NystromGrid(16)
    sys_ = assemble_system(peanut(), 1.0 + 1j, C1, C2, grid, (np.ones(32), np.zeros(32)))
    d = solve_frequency(sys_)
    x = np.concatenate([d.phi1, d.phi2])
    assert np.linalg.norm(sys_.matrix @ x - sys_.rhs) / np.linalg.norm(sys_.rhs) <= 1e-10


def test_singular_system_reports_index():
    A = np.ones((4, 4), dtype=complex)
    with pytest.raises(SingularSystemError) as exc:
        solve_frequency(FreqSystem(A, np.arange(4.0) + 0j, 1.0, 7))
    assert exc.value.index == 7


# ---------------------------------------------------------------------------
# manufactured solution
# ---------------------------------------------------------------------------
@pytest.mark.parametrize("name", list(SHAPES))
def test_manufactured_solution(name):
    for s in checks.manufactured_frequencies():
        assert checks.manufactured_error(SHAPES[name], s, 50) <= 1e-6


def test_manufactured_solution_high_frequencies():
    # the upper half of the contour, where the damped log split is active
    s_all = make_grid(10.0, 128).s
    for s in s_all[40:65:6]:
        assert abs(s) > 30
        assert checks.manufactured_error(peanut(), s, 50) <= 1e-6


@pytest.mark.parametrize("name", list(SHAPES))
def test_manufactured_spectral_convergence(name):
    s = 3.0 + 4j
    e = [checks.manufactured_error(SHAPES[name], s, n) for n in (8, 16, 32)]
    assert e[2] < e[1] < e[0] or e[2] <= 1e-10
    assert e[2] <= 1e-6


def test_manufactured_apple_converges():
    s = make_grid(10.0, 128).s[8]
    src = ((0.5, 0.0), (0.6, 0.1))
    e = [checks.manufactured_error(apple(), s, n, sources=src) for n in (16, 32, 50, 80)]
    assert all(b < a for a, b in zip(e, e[1:]))
    assert e[-1] <= 1e-6


# ---------------------------------------------------------------------------
# exterior field
# ---------------------------------------------------------------------------
def test_eval_observation_zero_and_conjugate():
    grid = NystromGrid(16)
    obs = ObservationCircle()
    s = 2.0 + 1.5j
    w = (np.cos(grid.nodes) + 0j, np.sin(2 * grid.nodes) + 0j)
    d = solve_frequency(assemble_system(peanut(), s, C1, C2, grid, w))
    dc = solve_frequency(assemble_system(peanut(), np.conj(s), C1, C2, grid, w))
    v = eval_observation(peanut(), obs, s, C1, C2, d, grid)
    vc = eval_observation(peanut(), obs, np.conj(s), C1, C2, dc, grid)
    assert np.allclose(vc, np.conj(v), rtol=1e-12, atol=1e-15)
    z = eval_observation(peanut(), obs, s, C1, C2, d.__class__(0 * d.phi1, 0 * d.phi2), grid)
    assert np.all(z == 0)
    assert np.allclose(point_field(obs.points(), peanut(), s, C1, C2, d, grid), v)


def test_eval_observation_requires_exterior_circle():
    grid = NystromGrid(8)
    d = solve_frequency(assemble_system(apple(), 1.0, C1, C2, grid, (np.ones(16), np.zeros(16))))
    with pytest.raises(GeometryError):
        eval_observation(apple(), ObservationCircle(radius=0.9), 1.0, C1, C2, d, grid)
