import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erfcx

from gtrace import screw as S
from gtrace.errors import DomainError, SobolevIndexError


def gauss(z):
    return np.exp(-z ** 2)


def test_zero_input_gives_zero():
    sym = S.ScrewSymbol(1.0)
    assert np.all(S.symbol_apply(sym, lambda z: 0 * z, np.linspace(-3, 3, 7)) == 0)
    assert np.all(S.symbol_apply(sym, np.zeros(sym.grid.size)) == 0)


def test_gaussian_at_right_angle_matches_closed_form():
    # phi = pi/2, eta = 1: int exp(-z^2) / (z^2 + a^2) dz = pi erfcx(a) / a, a = <xi>
    xi = np.linspace(-4, 4, 9)
    a = np.sqrt(1 + xi ** 2)
    got = S.symbol_apply(S.ScrewSymbol(np.pi / 2), gauss, xi)
    np.testing.assert_allclose(got, np.pi * erfcx(a) / a, rtol=1e-10)


def test_even_input_gives_even_output():
    xi = np.linspace(0.1, 5, 11)
    sym = S.ScrewSymbol(np.pi / 2, 1.3)
    f = lambda z: np.cos(z) / (1 + z ** 2)
    np.testing.assert_allclose(S.symbol_apply(sym, f, xi), S.symbol_apply(sym, f, -xi), rtol=1e-12)


def test_doubled_resolution_changes_little():
    sym = S.ScrewSymbol(0.7, 2.0)
    f = lambda z: np.exp(-z ** 2 / 4) * np.cos(2 * z)
    xi = np.linspace(-6, 6, 13)
    a = S.symbol_apply(sym, f, xi, n_theta=64, panels=16)
    b = S.symbol_apply(sym, f, xi, n_theta=128, panels=32)
    assert np.max(np.abs(a - b)) <= 1e-6


def test_substitution_agrees_with_adaptive():
    sym = S.ScrewSymbol(2.2, 0.6)
    f = lambda z: np.exp(-z ** 2 / 2) * (1 + z)
    xi = np.linspace(-3, 3, 5)
    np.testing.assert_allclose(S.symbol_apply(sym, f, xi), S.symbol_apply(sym, f, xi, "quad"), rtol=1e-9)


def test_near_singular_warns():
    with pytest.warns(S.NearSingularWarning):
        S.symbol_apply(S.ScrewSymbol(1e-6), gauss, [0.5])


@pytest.mark.parametrize("lam,phi,eta", [(1.0, 1.0, 1.0), (2.0, np.pi / 3, 1.0), (0.5, 3 * np.pi / 4, 2.0)])
def test_twisted_homogeneity(lam, phi, eta):
    f = lambda z: np.exp(-z ** 2 / 4) * np.cos(z)
    r = S.homogeneity_residual(S.ScrewSymbol(phi, eta), lam, f, np.linspace(-5, 5, 9))
    assert r <= 1e-8


def test_homogeneity_rejects_nonpositive_scale():
    with pytest.raises(DomainError):
        S.homogeneity_residual(S.ScrewSymbol(1.0), 0.0, gauss, [0.0])


def test_sobolev_range_enforced():
    with pytest.raises(SobolevIndexError):
        S.ScrewSymbol(1.0, s=0.2)
    with pytest.raises(SobolevIndexError):
        S.majorant(-1.0)


def test_cell_matrix_finite_and_row_mass():
    sym = S.ScrewSymbol(1.1, 1.0)
    m = S.cell_matrix(sym)
    assert np.all(np.isfinite(m))
    # full-line integral of the Lorentzian is pi / sqrt(xi^2 + eta^2) up to truncation
    x = sym.grid.mids
    inner = np.abs(x) < 10
    np.testing.assert_allclose(m.sum(1)[inner], (np.pi / np.sqrt(x ** 2 + 1))[inner], rtol=1e-2)


def test_small_angle_norm_tends_to_pi():
    # A_phi -> (pi / <xi>) identity, weighted norm pi
    assert abs(S.weighted_norm(S.ScrewSymbol(1e-3)) - np.pi) < 1e-2


def test_majorant_monotone_and_bounds_row_integrals():
    vals = [S.majorant(s) for s in (-0.25, -0.5, -0.75, -0.95)]
    assert np.all(np.diff(vals) > 0) and np.all(np.isfinite(vals))
    for s in (-0.25, -0.5, -0.75):
        tab = S.schur_bounds(s, [1e-3, 0.1, 1.0], S.symmetric_log_grid(1e-2, 1e2, 9))
        assert np.all(tab.row_sup <= S.majorant(s) * (1 + 1e-9))


def test_schur_uniform_as_phi_decreases():
    tab = S.schur_bounds(-0.5, S.decade_phis(3), S.symmetric_log_grid(1e-3, 1e3, 13))
    assert np.all(np.isfinite(tab.sup))
    assert S.decade_variation(tab) <= 2.0


def test_continuity_scan_single_point_empty():
    assert S.continuity_scan(1.0, -0.5, [1.0]).size == 0


def test_continuity_halves_away_from_zero():
    r = S.halving_ratio_regular(1.0, -0.5, np.pi / 4, 3 * np.pi / 4)
    assert 0.4 < r < 0.6


def test_discontinuity_flagged_near_zero():
    r = S.halving_ratios_near_zero(1.0, -0.5, steps=4)
    assert r[-1] > 0.9


def test_fiber_zero_weights_zero_operator():
    assert np.all(S.fiber_trace(2, rule=([0.3, 1.0], [0.0, 0.0])).matrix == 0)


def test_fiber_rule_converged():
    a = S.fiber_trace(4).matrix
    b = S.fiber_trace(4, levels=16, q=16).matrix
    assert np.linalg.norm(a - b) <= 1e-6 * np.linalg.norm(b)


def test_fiber_norms_decay_like_inverse_frequency():
    scaled = [e * S.fiber_trace(e).weighted_norm() for e in (1, 2, 4, 8, 16)]
    assert np.all(np.isfinite(scaled))
    assert max(scaled[1:]) <= 1.1 * scaled[1]


def test_zero_fiber_unbounded_under_refinement():
    b0 = S.fiber_trace(0)
    assert not b0.meta["bounded"]
    fine = S.fiber_trace(0, grid=S.LineGrid(h0=1e-5))
    assert fine.weighted_norm() > 5 * b0.weighted_norm()


def test_line_grid_symmetric():
    g = S.LineGrid()
    np.testing.assert_allclose(g.mids, -g.mids[::-1])
    assert np.all(g.mids != 0) and g.edges[0] == -1e3


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, np.pi - 0.05), st.floats(0.2, 3.0))
def test_kernel_positive_and_symmetric_in_variables(phi, eta):
    sym = S.ScrewSymbol(phi, eta)
    x, z = np.array([-1.5, 0.3, 2.0]), np.array([0.7, -2.2, 1.1])
    k1, k2 = S.kernel(sym, x, z), S.kernel(sym, z, x)
    assert np.all(k1 > 0)
    # the denominator is symmetric in (xi, z) up to the eta term placement
    den1 = np.abs(np.sin(phi)) / k1 - np.sin(phi) ** 2 * (x ** 2 + eta ** 2)
    den2 = np.abs(np.sin(phi)) / k2 - np.sin(phi) ** 2 * (z ** 2 + eta ** 2)
    np.testing.assert_allclose(den1 + np.sin(phi) ** 2 * x ** 2, den2 + np.sin(phi) ** 2 * z ** 2, rtol=1e-9)
