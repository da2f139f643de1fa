"""Measurement models, linearization error, and mutual information."""

import numpy as np
import pytest
from scipy import special, stats

from atomimo.numerics import real_equivalent, to_real_stack
from atomimo.precoding import iq_digital_precoder, transmit_covariance
from atomimo.receiver import (DegenerateReferenceError, linearize,
                              log_bessel_i0, matched_real_noise,
                              measure_linearized, measure_magnitude,
                              mi_linearized, mi_nonlinear_mc, rice_log_density)

H_EXAMPLE = np.array([[2, 1j], [1j, 1]])


def test_linearize_worked_example():
    lc = linearize(H_EXAMPLE, [1.0, 1.0])
    np.testing.assert_array_equal(lc.h_tilde, H_EXAMPLE)
    np.testing.assert_array_equal(lc.h_bar, [[2, 0, 0, -1], [0, 1, -1, 0]])
    np.testing.assert_array_equal(lc.offset, [1.0, 1.0])


def test_linearize_rotates_rows():
    lc = linearize(H_EXAMPLE, [1j, 1j])
    np.testing.assert_allclose(lc.h_tilde, -1j * H_EXAMPLE, atol=1e-15)


def test_linearize_preserves_row_norms():
    rng = np.random.default_rng(0)
    h = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    r = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    lc = linearize(h, r)
    np.testing.assert_allclose(np.linalg.norm(lc.h_tilde, axis=1),
                               np.linalg.norm(h, axis=1), rtol=1e-12)


def test_linearize_zero_reference():
    with pytest.raises(DegenerateReferenceError):
        linearize(H_EXAMPLE, [1.0, 0.0])


def test_measure_magnitude_cases():
    r = np.array([1.0 + 1j, -2.0])
    np.testing.assert_allclose(
        measure_magnitude(H_EXAMPLE, [0, 0], r, [0, 0]), np.abs(r))
    assert measure_magnitude([[1.0]], [1.0], [1.0], [0.0]) == pytest.approx(2.0)
    rng = np.random.default_rng(1)
    x = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    y = measure_magnitude(H_EXAMPLE, x, r, w)
    assert np.all(y >= 0)


def test_measure_linearized_identity():
    lc = linearize(H_EXAMPLE, [1.0, 1.0])
    np.testing.assert_array_equal(measure_linearized(lc, [0, 0], [0.0, 0.0]), [0.0, 0.0])
    np.testing.assert_allclose(measure_linearized(lc, [1.0, 0.0], [0.0, 0.0]),
                               [2.0, 0.0], atol=1e-15)
    rng = np.random.default_rng(2)
    x = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    wb = rng.standard_normal(2)
    np.testing.assert_allclose(measure_linearized(lc, x, wb),
                               lc.h_bar @ to_real_stack(x) + wb, atol=1e-14)


def test_linearization_residual_shrinks_with_reference_gain():
    rng = np.random.default_rng(3)
    h = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    x = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, 3))
    residuals = []
    for rho in (10.0, 100.0, 1000.0):
        r = rho * phases
        lc = linearize(h, r)
        y = measure_magnitude(h, x, r, w)
        y_bar = measure_linearized(lc, x, matched_real_noise(r, w))
        residuals.append(np.abs(y - np.abs(r) - y_bar).max())
    assert residuals[0] > residuals[1] > residuals[2]
    slope = np.polyfit(np.log10([10.0, 100.0, 1000.0]), np.log10(residuals), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.3)


# ---------------------------------------------------------------------------
# closed-form mutual information
# ---------------------------------------------------------------------------

def test_mi_linearized_zero_channel():
    assert mi_linearized(np.zeros((2, 4)), np.eye(4), 1.0) == 0.0


def test_mi_linearized_identity_example():
    # 0.5 log2 det(I + (2 / noise) I): log2(3) for unit noise, 1 bit for noise 2
    assert mi_linearized(np.eye(2), np.eye(2), 1.0) == pytest.approx(np.log2(3.0), abs=1e-12)
    assert mi_linearized(np.eye(2), np.eye(2), 2.0) == pytest.approx(1.0, abs=1e-12)


def test_mi_linearized_matches_waterfill_sum():
    rng = np.random.default_rng(4)
    for _ in range(10):
        h_bar = rng.standard_normal((3, 8))
        power, noise = 2.0, 0.8
        pre = iq_digital_precoder(h_bar, power, noise, 3)
        mi = mi_linearized(h_bar, transmit_covariance(pre.f_bar), noise)
        assert mi == pytest.approx(pre.closed_form_rate(noise), abs=1e-9)


def test_mi_linearized_rejects_non_psd():
    with pytest.raises(ValueError, match="semidefinite"):
        mi_linearized(np.eye(2), np.diag([1.0, -0.5]), 1.0)


def test_global_reference_phase_invariance():
    # A common rotation of the local oscillator re-linearizes to a different
    # real channel, but an input rotated the same way gives identical mutual
    # information, and the optimized rate is unchanged.
    rng = np.random.default_rng(5)
    h = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    r = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    lc = linearize(h, r)
    power, noise = 1.5, 0.9
    pre = iq_digital_precoder(lc.h_bar, power, noise, 3)
    q = transmit_covariance(pre.f_bar)
    theta = 1.234
    lc2 = linearize(h, np.exp(1j * theta) * r)
    rot = real_equivalent(np.exp(1j * theta) * np.eye(2))
    assert mi_linearized(lc2.h_bar, rot @ q @ rot.T, noise) == pytest.approx(
        mi_linearized(lc.h_bar, q, noise), abs=1e-10)
    pre2 = iq_digital_precoder(lc2.h_bar, power, noise, 3)
    assert pre2.closed_form_rate(noise) == pytest.approx(
        pre.closed_form_rate(noise), abs=1e-9)


# ---------------------------------------------------------------------------
# Monte-Carlo estimator building blocks
# ---------------------------------------------------------------------------

def test_log_bessel_i0_against_scipy():
    z = np.concatenate([np.linspace(0.0, 20.0, 1001), np.logspace(1.4, 6.0, 1001)])
    exact = np.log(special.ive(0, z)) + z
    assert np.abs(log_bessel_i0(z) - exact).max() < 1e-6


def test_rice_log_density_against_scipy():
    rng = np.random.default_rng(6)
    for _ in range(20):
        noise = rng.uniform(0.2, 3.0)
        nu = rng.uniform(0.0, 5.0)
        y = rng.uniform(0.01, 6.0)
        scale = np.sqrt(noise / 2.0)
        want = stats.rice.logpdf(y, nu / scale, scale=scale)
        assert rice_log_density(y, nu, noise) == pytest.approx(want, abs=1e-6)


def test_mc_zero_channel_has_no_information():
    est = mi_nonlinear_mc(np.zeros((1, 1)), [2.0], 1.0, np.eye(2), 20_000, 21,
                          inner_samples=512)
    assert abs(est.value) <= max(3.0 * est.stderr, 5e-3)
    assert not est.low_sample_warning


def test_mc_low_sample_warning():
    est = mi_nonlinear_mc(np.ones((1, 1)), [5.0], 1.0, np.eye(2), 2_000, 22,
                          inner_samples=256)
    assert est.low_sample_warning


def test_mc_matches_linear_model_at_high_reference():
    rng = np.random.default_rng(7)
    h = rng.standard_normal((1, 1)) + 1j * rng.standard_normal((1, 1))
    r = 100.0 * np.exp(1j * rng.uniform(0, 2 * np.pi, 1))  # strong reference
    noise = 1.0
    power = 1.0 / abs(h[0, 0]) ** 2  # unit receive SNR
    q = power / 2 * np.eye(2)
    lc = linearize(h, r)
    lin = mi_linearized(lc.h_bar, q, noise)
    est = mi_nonlinear_mc(h, r, noise, q, 40_000, 23, inner_samples=4096)
    assert est.value == pytest.approx(lin, rel=0.05)


def test_mc_stderr_scales_with_samples():
    rng = np.random.default_rng(8)
    h = rng.standard_normal((1, 1)) + 1j * rng.standard_normal((1, 1))
    r = np.array([10.0 + 0j])
    q = 0.5 * np.eye(2)
    small = mi_nonlinear_mc(h, r, 1.0, q, 10_000, 24, inner_samples=1024)
    large = mi_nonlinear_mc(h, r, 1.0, q, 40_000, 24, inner_samples=1024)
    assert 1.0 <= small.stderr / large.stderr <= 4.0


def test_mc_rejects_bad_input():
    with pytest.raises(ValueError):
        mi_nonlinear_mc(np.eye(1), [1.0], 1.0, np.eye(2), 1000, 0, batches=1)
    with pytest.raises(ValueError):
        mi_nonlinear_mc(np.eye(1), [1.0], 0.0, np.eye(2), 1000, 0)
