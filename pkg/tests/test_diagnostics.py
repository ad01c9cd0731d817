import numpy as np
import pytest
from scipy import integrate

from gtrace import diagnostics as D
from gtrace import operator_core as oc
from gtrace.errors import DomainError, PreconditionError


@pytest.fixture(scope="module")
def example2_ops():
    spec, plane = oc.example2_setup()
    return [oc.assemble_trace(spec, plane, oc.FourierGrid(2, n)) for n in (8, 16)]


def test_identity_spectrum_flat():
    p = D.singular_spectrum(np.eye(12))
    np.testing.assert_allclose(p.values, 1.0)
    assert p.exponent == 0.0


def test_rank_one_spectrum():
    rng = np.random.default_rng(0)
    a = np.outer(rng.normal(size=9), rng.normal(size=7))
    p = D.singular_spectrum(a)
    assert p.values[1] <= 1e-12 * p.values[0]


def test_power_law_exponent_recovered():
    v = np.arange(1, 201, dtype=float) ** -1.5
    assert abs(D.singular_spectrum(np.diag(v)).exponent - 1.5) < 1e-9


def test_nonfinite_rejected():
    with pytest.raises(DomainError):
        D.singular_spectrum(np.array([[1.0, np.nan], [0.0, 1.0]]))


def test_weighting_applied_for_discrete_operators():
    g = oc.FourierGrid(1, 8)
    op = D.smoothing_operator(g)
    w = D.singular_spectrum(op, weighted=True).values
    raw = D.singular_spectrum(op, weighted=False).values
    np.testing.assert_allclose(np.sort(w), np.sort(g.weights(-1.0)), rtol=1e-12)
    np.testing.assert_allclose(np.sort(raw), np.sort(g.weights(-2.0)), rtol=1e-12)


def test_cutoff_matrix_of_one_is_identity():
    g = oc.FourierGrid(2, 6)
    np.testing.assert_allclose(D.cutoff_matrix(g, lambda p: np.ones(len(p))), np.eye(g.size), atol=1e-12)


def test_calibration_constants_reproduce():
    c = D.calibrate()
    for key in ("compact_ref", "identity_ref"):
        np.testing.assert_allclose(c[key], D.CALIBRATION[key], atol=1e-5)
    assert abs(c["threshold"] - D.CALIBRATION["threshold"]) < 1e-5


def test_example2_localized_at_origin(example2_ops):
    v = D.localization_test(example2_ops, D.radial_cutoff(0.6), [[0.0, 0.0]])
    assert v.verdict == "localized-on-Y"
    assert v.ratios[1] < v.ratios[0]


def test_identity_not_localized(example2_ops):
    ids = [D.identity_operator(o.source) for o in example2_ops]
    assert D.localization_test(ids, D.radial_cutoff(0.6), [[0.0, 0.0]]).verdict == "not-localized"


def test_verdict_scale_invariant(example2_ops):
    a = D.localization_test(example2_ops, D.radial_cutoff(0.6), [[0.0, 0.0]])
    b = D.localization_test([o.scaled(37.0) for o in example2_ops], D.radial_cutoff(0.6), [[0.0, 0.0]])
    assert a.verdict == b.verdict
    np.testing.assert_allclose(a.ratios, b.ratios, rtol=1e-10)


def test_cutoff_must_vanish_near_y(example2_ops):
    with pytest.raises(PreconditionError):
        D.localization_test(example2_ops, D.radial_cutoff(0.6), [[0.0, 0.0]], radius=1.0)


def test_levels_must_refine(example2_ops):
    with pytest.raises(DomainError):
        D.localization_test(example2_ops[::-1], D.radial_cutoff(0.6))


def test_line_offset_trace_compact():
    from gtrace.geometry import get_scenario
    sc = get_scenario("line-offset")
    spec = oc.laplacian_inverse_spec(sc.action)
    ops = [oc.assemble_trace(spec, sc.sub, oc.FourierGrid(1, n)) for n in (32, 64, 128)]
    v = D.localization_test(ops, lambda p: np.ones(len(p)))
    assert v.verdict == "localized-on-Y"


def test_averaged_log_kernel_matches_quadrature():
    x, y = np.array([0.7, 0.2]), np.array([-1.1, 0.4])
    f = lambda t: np.log(np.linalg.norm(x - np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]]) @ y))
    val = integrate.quad(f, 0, 2 * np.pi, limit=200)[0] / (2 * np.pi) / (2 * np.pi)
    assert abs(val - D.averaged_log_kernel(x, y)) < 1e-10


def test_invariant_circle_commutes():
    tr = D.circle_trace(radius=1.3)
    for h in (np.pi / 3, 0.7, 2.9):
        assert D.invariance_commutator(tr, h) <= 1e-8
    assert D.invariance_commutator(tr, 0.0) == 0.0


def test_off_center_circle_does_not_commute():
    tr = D.circle_trace(center=(0.5, 0.2))
    with pytest.raises(PreconditionError):
        D.invariance_commutator(tr, np.pi / 3)
    assert D.commutator_norm(tr.matrix, tr.modes, np.pi / 3) >= 1e-2
