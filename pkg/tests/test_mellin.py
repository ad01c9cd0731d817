import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gtrace import mellin as M
from gtrace.errors import DomainError, SingularityError, SobolevIndexError

CFG = M.TiltConfig()
ALPHAS = (np.pi / 6, np.pi / 4, np.pi / 3)


def _admissible(cfg, n, seed):
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=(2, n))
    w = 2 * rng.normal(size=n)
    phi = rng.uniform(-np.pi, np.pi, n)
    rho, psi = M.cov_forward(cfg, u, v, w, phi)
    ok = np.abs(rho * np.cos(psi) - u) > 1e-3 * (1 + rho + np.abs(u))
    return u[ok], v[ok], w[ok], phi[ok], rho[ok], psi[ok]


def test_config_validation():
    with pytest.raises(DomainError):
        M.TiltConfig(alpha=0.0)
    with pytest.raises(SobolevIndexError):
        M.TiltConfig(s=0.5)


def test_forward_phi_zero_is_polar_of_uv():
    u, v = 0.3, -1.2
    for w in (-3.0, 0.0, 5.0):
        rho, psi = M.cov_forward(CFG, u, v, w, 0.0)
        assert np.isclose(rho, np.hypot(u, v))
        assert np.isclose(psi, np.mod(np.arctan2(v, u), 2 * np.pi))


def test_forward_phi_pi_closed_form():
    s, t = M.line_point(CFG, 0.7, 0.4, 0.0, np.pi)
    a = CFG.alpha
    assert np.isclose(s, -0.7 * np.cos(2 * a)) and np.isclose(t, -0.4)


def test_forward_origin():
    assert M.cov_forward(CFG, 0.0, 0.0, 0.0, 1.0)[0] == 0.0


@pytest.mark.parametrize("alpha", ALPHAS)
def test_roundtrip(alpha):
    cfg = M.TiltConfig(alpha)
    u, v, w, phi, rho, psi = _admissible(cfg, 2000, 1)
    ph, ww = M.cov_inverse(cfg, u, v, rho, psi)
    r2, p2 = M.cov_forward(cfg, u, v, ww, ph)
    assert np.max(np.abs(r2 - rho)) < 1e-9
    assert np.max(np.abs(np.angle(np.exp(1j * (p2 - psi))))) < 1e-9
    assert np.all((ph > -np.pi) & (ph <= np.pi))


@pytest.mark.parametrize("alpha", ALPHAS)
def test_jacobian_matches_finite_differences(alpha):
    cfg = M.TiltConfig(alpha)
    u, v, w, phi, rho, psi = _admissible(cfg, 500, 2)
    j = np.abs(M.cov_jacobian(cfg, u, v, rho, psi))
    fd = M.cov_jacobian_fd(cfg, u, v, w, phi)
    assert np.max(np.abs(j - fd) / fd) < 1e-5


def test_jacobian_sign_and_small_rho():
    assert M.cov_jacobian(CFG, 0.1, 0.0, 1.0, 0.0) > 0
    assert abs(M.cov_jacobian(CFG, -1.0, 0.0, 1e-9, 0.0)) < 1e-8


def test_degenerate_line():
    with pytest.raises(SingularityError):
        M.cov_inverse(CFG, 0.5, 0.2, 1.0, np.arccos(0.5))
    with pytest.raises(SingularityError):
        M.cov_jacobian(CFG, 0.5, 0.2, 1.0, np.arccos(0.5) + 1e-9)
    # tan(phi/2) = 0 on the degenerate line
    assert M.inverse_angle(CFG, 0.5, 0.2, 1.0, np.arccos(0.5)) == pytest.approx(0.0, abs=1e-15)


def test_kernel_values():
    assert M.kernel_K(CFG, 2.0, 0.0, np.pi / 2) == pytest.approx(4 * np.sqrt(2) / 5, rel=1e-14)
    with pytest.raises(SingularityError):
        M.kernel_K(CFG, 1.0, 0.0, 0.0)
    with pytest.raises(DomainError):
        M.kernel_K(CFG, -1.0, 0.0, 0.0)
    small = [M.kernel_K(CFG, r, 0.3, 1.1) for r in (1e-2, 1e-3, 1e-4)]
    assert small[2] < small[1] < small[0] < 1e-3
    assert small[1] / small[2] == pytest.approx(100, rel=1e-2)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 20), st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_kernel_positive_and_symmetric(rho, om, ps):
    if abs(rho - 1) < 1e-3:
        return
    k = M.kernel_K(CFG, rho, om, ps)
    assert k >= 0 and np.isfinite(k)
    assert M.kernel_K(CFG, rho, -om, -ps) == pytest.approx(k, rel=1e-12, abs=1e-300)
    assert M.kernel_K(CFG, rho, om + np.pi, ps + np.pi) == pytest.approx(k, rel=1e-9, abs=1e-300)


@pytest.mark.parametrize("rho", [1e-3, 0.1, 0.5, 2.0, 10.0, 1e3])
def test_nystrom_converges(rho):
    a = M.operator_norm_K(CFG, rho, 64)
    b = M.operator_norm_K(CFG, rho, 128)
    assert abs(a - b) / b < 0.01


def test_norm_scaling_far_field():
    r1 = np.geomspace(1e-3, 1e-1, 5)
    r2 = np.geomspace(10, 1e3, 5)
    assert M.fit_slope(r1, M.norm_sweep(CFG, r1)) == pytest.approx(2.0, abs=0.15)
    assert M.fit_slope(r2, M.norm_sweep(CFG, r2)) == pytest.approx(-1.0, abs=0.15)


def test_norm_errors():
    with pytest.raises(SingularityError):
        M.operator_norm_K(CFG, 1.0)
    with pytest.raises(DomainError):
        M.operator_norm_K(CFG, 0.0)


def test_galerkin_refines_toward_nystrom_for_smooth_kernel():
    edges = np.linspace(0, 2 * np.pi, 129)
    g = np.linalg.norm(M.galerkin_matrix(CFG, 3.0, edges), 2)
    assert g == pytest.approx(M.operator_norm_K(CFG, 3.0, 128), rel=1e-3)


def test_schur_far_and_swapped():
    col, row = M.schur_integrals(CFG, 10.0, 0.3)
    col2, row2 = M.schur_integrals(CFG, 100.0, 0.3)
    assert col2 < col and row2 < row and max(col, row) < 1.0
    with pytest.raises(SingularityError):
        M.schur_integrals(CFG, 1.0, 0.3)


def test_schur_constant_near_one():
    cs = [max(M.schur_sup(CFG, 1 + d, n=9)) * np.sqrt(d) for d in (1e-3, 1e-2)]
    assert max(cs) / min(cs) < 1.15


@pytest.fixture(scope="module")
def small_table():
    return M.MellinTable(CFG, m=8, dx=0.25, n_tau=6)


def test_mellin_strip(small_table):
    with pytest.raises(DomainError):
        small_table.evaluate(1.2)
    with pytest.raises(DomainError):
        M.mellin_symbol(CFG, -2.0, table=small_table)
    sym = M.mellin_symbol(CFG, -0.5, table=small_table)
    assert np.all(np.isfinite(sym.matrix)) and sym.norm > 0


def test_mellin_linearity(small_table):
    p = complex(-0.3, 0.7)
    base = small_table.evaluate(p).matrix
    small_table.mats *= 3.0
    small_table.a_min *= 3.0
    small_table.a_max *= 3.0
    try:
        assert np.allclose(small_table.evaluate(p).matrix, 3.0 * base, rtol=1e-13)
    finally:
        small_table.mats /= 3.0
        small_table.a_min /= 3.0
        small_table.a_max /= 3.0


def test_contour_and_drift(small_table):
    assert M.contour_residual(small_table, (-1.5, 0.5, -1, 1), 32) < 1e-10
    assert M.contour_residual(small_table, (-0.5, -0.5, -1, 1)) == 0.0
    with pytest.raises(DomainError):
        M.contour_residual(small_table, (-2.0, 0.5, -1, 1))
    assert M.tail_drift(small_table, 0.95) > 10 * M.tail_drift(small_table, -0.5)


def test_eq_forms_zero_field():
    r, om = M.output_grid(2, 3)
    zero = M.SeparableField(((lambda y: 0 * y, lambda p: 0 * p),), (-2.0, 2.0))
    assert np.all(M.trace_direct_eq1(CFG, zero, r, om) == 0)
    assert np.all(M.trace_via_mellin_eq2(CFG, zero, r, om) == 0)


def test_eq2_support_check():
    bad = M.SeparableField(((lambda y: 1 + 0 * y, lambda p: 1 + 0 * p),), (-np.inf, 0.0))
    with pytest.raises(DomainError):
        M.trace_via_mellin_eq2(CFG, bad, [1.0], [0.5])


def test_eq1_equals_eq2_small():
    r, om = M.output_grid(3, 6)
    f = M.reference_fields()[1]
    a = M.trace_direct_eq1(CFG, f, r, om, 1)
    b = M.trace_via_mellin_eq2(CFG, f, r, om, 1)
    assert M.rel_l2(b, a) < 1e-3


def test_mellin_path_matches_convolution():
    r, om = M.output_grid(3, 4)
    f = M.reference_fields()[2]
    a = M.trace_via_mellin_eq2(CFG, f, r, om, 1)
    b = M.trace_via_mellin_eq2(CFG, f, r, om, 1, path="mellin")
    assert M.rel_l2(b, a) < 1e-6


def test_scale_equivariance():
    r, om = M.output_grid(3, 4)
    lam = 1.7
    f = M.annulus_field(0.0, 0.25, lambda p: 1 + np.cos(p))
    fl = M.annulus_field(np.log(lam), 0.25, lambda p: 1 + np.cos(p))
    a = M.trace_via_mellin_eq2(CFG, f, r, om)
    b = M.trace_via_mellin_eq2(CFG, fl, lam * r, om)
    assert M.rel_l2(b, a) < 1e-6


def test_half_turn_and_reflection_symmetry():
    r, om = M.output_grid(2, 4)
    f = M.annulus_field(0.0, 0.25, lambda p: 1 + np.cos(p) + 0.3 * np.sin(2 * p))
    f_turn = M.annulus_field(0.0, 0.25, lambda p: 1 + np.cos(p - np.pi) + 0.3 * np.sin(2 * (p - np.pi)))
    f_ref = M.annulus_field(0.0, 0.25, lambda p: 1 + np.cos(-p) + 0.3 * np.sin(-2 * p))
    g = M.trace_direct_eq1(CFG, f, r, om)
    assert M.rel_l2(M.trace_direct_eq1(CFG, f_turn, r, om + np.pi), g) < 1e-6
    assert M.rel_l2(M.trace_direct_eq1(CFG, f_ref, r, -om), g) < 1e-6
