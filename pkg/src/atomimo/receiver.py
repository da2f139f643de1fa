"""Receiver measurement models and mutual-information estimation.

The magnitude detector observes ``y = |H x + r + w|``.  When the
reference wave dominates the signal and noise, subtracting the offset
``|r|`` leaves (to first order) a linear real-part detector
``y_bar = Re(H_tilde x) + w_bar`` where ``H_tilde`` rotates each row of
``H`` by the corresponding reference phase and ``w_bar`` is real
Gaussian with half the complex noise variance.  This module provides
both models, the closed-form mutual information of the linearized one,
and a Monte-Carlo estimate of the exact nonlinear one used to check the
approximation quality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import _require_finite, realify_channel, to_real_stack

__all__ = [
    "DegenerateReferenceError",
    "LinearizedChannel",
    "MiEstimate",
    "linearize",
    "measure_magnitude",
    "measure_linearized",
    "matched_real_noise",
    "mi_linearized",
    "mi_nonlinear_mc",
    "rice_log_density",
    "log_bessel_i0",
]

LOG2 = np.log(2.0)

#: below this sample count the Monte-Carlo estimate is flagged as low quality
MIN_RECOMMENDED_SAMPLES = 10_000


class DegenerateReferenceError(ValueError):
    """The reference wave vanishes on some element; linearization is undefined."""


@dataclass(frozen=True)
class LinearizedChannel:
    """Phase-rotated channel, its real equivalent and the magnitude offset."""

    h_tilde: np.ndarray
    h_bar: np.ndarray
    offset: np.ndarray


def linearize(h, r) -> LinearizedChannel:
    """Rotate each channel row by its reference phase and realify.

    ``h_tilde[m, :] = exp(-j angle(r_m)) h[m, :]`` and
    ``h_bar = (Re h_tilde, -Im h_tilde)``.
    """
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    r = np.asarray(r, dtype=complex)
    _require_finite(h, "channel")
    _require_finite(r, "reference")
    offset = np.abs(r)
    if np.any(offset == 0.0):
        raise DegenerateReferenceError("reference vector has a zero entry")
    h_tilde = np.exp(-1j * np.angle(r))[:, None] * h
    return LinearizedChannel(h_tilde=h_tilde, h_bar=realify_channel(h_tilde), offset=offset)


def measure_magnitude(h, x, r, w) -> np.ndarray:
    """Exact nonlinear observation ``y = |H x + r + w|``."""
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    return np.abs(h @ np.asarray(x, dtype=complex) + np.asarray(r, dtype=complex)
                  + np.asarray(w, dtype=complex))


def measure_linearized(lc: LinearizedChannel, x, w_bar) -> np.ndarray:
    """Linearized observation ``y_bar = Re(H_tilde x) + w_bar = H_bar x_bar + w_bar``."""
    return lc.h_bar @ to_real_stack(np.asarray(x, dtype=complex)) + np.asarray(w_bar, dtype=float)


def matched_real_noise(r, w) -> np.ndarray:
    """Real noise ``Re(exp(-j angle(r)) w)`` paired with the complex draw ``w``.

    Using the same underlying complex sample in both measurement models
    makes their difference expose the linearization remainder alone.
    """
    return np.real(np.exp(-1j * np.angle(np.asarray(r, dtype=complex))) * np.asarray(w, dtype=complex))


# ---------------------------------------------------------------------------
# closed-form mutual information of the linearized model
# ---------------------------------------------------------------------------

def _check_covariance(q: np.ndarray) -> np.ndarray:
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if q.shape[0] != q.shape[1]:
        raise ValueError("covariance must be square")
    _require_finite(q, "covariance")
    if not np.allclose(q, q.T, atol=1e-10 * max(1.0, float(np.abs(q).max()))):
        raise ValueError("covariance must be symmetric")
    eig = np.linalg.eigvalsh((q + q.T) / 2.0)
    if eig.min() < -1e-10 * max(1.0, eig.max()):
        raise ValueError("covariance must be positive semidefinite")
    return q


def mi_linearized(h_bar, q_bar, noise_var: float) -> float:
    """Mutual information ``0.5 log2 det(I + (2/noise) Hb Qb Hb^T)`` in bits.

    The one-half discount and the doubled inverse noise reflect that the
    linearized observation, input and noise are all real valued with
    noise variance ``noise_var / 2``.
    """
    if noise_var <= 0:
        raise ValueError("noise variance must be positive")
    h_bar = np.atleast_2d(np.asarray(h_bar, dtype=float))
    q = _check_covariance(q_bar)
    gram = h_bar @ q @ h_bar.T
    m = np.eye(h_bar.shape[0]) + (2.0 / noise_var) * (gram + gram.T) / 2.0
    sign, logdet = np.linalg.slogdet(m)
    if sign <= 0:
        raise ValueError("covariance produced a non-positive-definite Gram matrix")
    return 0.5 * logdet / LOG2


# ---------------------------------------------------------------------------
# Monte-Carlo mutual information of the nonlinear model
# ---------------------------------------------------------------------------

# Polynomial fits for I0 (Abramowitz & Stegun 9.8.1 / 9.8.2, ~1e-7 accurate),
# kept in log form so large arguments never overflow.
_I0_SMALL = np.array([0.0045813, 0.0360768, 0.2659732, 1.2067492,
                      3.0899424, 3.5156229, 1.0])[::-1]
_I0_LARGE = np.array([0.00392377, -0.01647633, 0.02635537, -0.02057706,
                      0.00916281, -0.00157565, 0.00225319, 0.01328592,
                      0.39894228])[::-1]


def log_bessel_i0(z) -> np.ndarray:
    """``log I0(z)`` for ``z >= 0``, elementwise and overflow-free."""
    z = np.asarray(z, dtype=float)
    small = z < 3.75
    t = np.where(small, z / 3.75, 0.0)
    lo = np.log(np.polynomial.polynomial.polyval(t * t, _I0_SMALL))
    zs = np.where(small, 3.75, z)
    hi = zs - 0.5 * np.log(zs) + np.log(np.polynomial.polynomial.polyval(3.75 / zs, _I0_LARGE))
    return np.where(small, lo, hi)


def rice_log_density(y, nu, noise_var: float) -> np.ndarray:
    """Log density of ``|c + w|`` where ``|c| = nu`` and ``w ~ CN(0, noise_var)``.

    This is a Rician with per-quadrature variance ``noise_var / 2``.
    """
    y = np.asarray(y, dtype=float)
    nu = np.asarray(nu, dtype=float)
    return (np.log(2.0 * y / noise_var) - (y * y + nu * nu) / noise_var
            + log_bessel_i0(2.0 * y * nu / noise_var))


def _mixture_log_density_numpy(y, nu_in, sep_in, noise_var):
    log_mix = np.empty(y.shape[0])
    inner = nu_in.shape[0]
    chunk = max(1, int(2 ** 21 // inner))
    for start in range(0, y.shape[0], chunk):
        stop = min(y.shape[0], start + chunk)
        ll = np.broadcast_to(sep_in, (stop - start, inner)).copy()
        for m in range(y.shape[1]):
            ll += log_bessel_i0((2.0 / noise_var) * np.outer(y[start:stop, m], nu_in[:, m]))
        top = ll.max(axis=1)
        log_mix[start:stop] = top + np.log(np.exp(ll - top[:, None]).mean(axis=1))
    return log_mix


try:  # the jitted scan is ~10x faster; fall back to numpy without it
    import numba

    @numba.njit(cache=True, fastmath=False)
    def _mixture_log_density_jit(y, nu_in, sep_in, noise_var):  # pragma: no cover
        n, nr = y.shape
        inner = nu_in.shape[0]
        out = np.empty(n)
        for i in range(n):
            top = -np.inf
            acc = 0.0
            for j in range(inner):
                s = sep_in[j]
                for m in range(nr):
                    z = 2.0 * y[i, m] * nu_in[j, m] / noise_var
                    if z < 3.75:
                        t = (z / 3.75) ** 2
                        p = (((((0.0045813 * t + 0.0360768) * t + 0.2659732) * t
                               + 1.2067492) * t + 3.0899424) * t + 3.5156229) * t + 1.0
                        s += np.log(p)
                    else:
                        u = 3.75 / z
                        p = ((((((((0.00392377 * u - 0.01647633) * u + 0.02635537) * u
                                  - 0.02057706) * u + 0.00916281) * u - 0.00157565) * u
                               + 0.00225319) * u + 0.01328592) * u + 0.39894228)
                        s += z - 0.5 * np.log(z) + np.log(p)
                if s > top:
                    acc = acc * np.exp(top - s) + 1.0
                    top = s
                else:
                    acc += np.exp(s - top)
            out[i] = top + np.log(acc / inner)
        return out

    def _mixture_log_density(y, nu_in, sep_in, noise_var):
        return _mixture_log_density_jit(np.ascontiguousarray(y),
                                        np.ascontiguousarray(nu_in),
                                        np.ascontiguousarray(sep_in),
                                        float(noise_var))
except ImportError:  # pragma: no cover
    _mixture_log_density = _mixture_log_density_numpy


@dataclass(frozen=True)
class MiEstimate:
    """Monte-Carlo mutual-information estimate with batch-mean error bars."""

    value: float
    samples: int
    stderr: float
    low_sample_warning: bool


def _psd_factor(q: np.ndarray) -> np.ndarray:
    q = _check_covariance(q)
    eig, vec = np.linalg.eigh((q + q.T) / 2.0)
    return vec * np.sqrt(np.clip(eig, 0.0, None))


def mi_nonlinear_mc(h, r, noise_var: float, q_bar, samples: int, seed,
                    inner_samples: int = 4096, batches: int = 20) -> MiEstimate:
    """Estimate ``I(y; x)`` for ``y = |H x + r + w|`` with Gaussian input.

    The stacked real input is drawn from ``N(0, q_bar)``.  The estimator
    is the nested Monte-Carlo difference ``H(y) - H(y | x)``: the
    conditional term averages the exact log conditional density (a
    product of Rician magnitude densities across receive elements), and
    the marginal term scores each observation against a fresh
    ``inner_samples``-component mixture of conditionals.  Standard
    errors come from batch means over the per-sample contributions; the
    shared mixture adds a small common bias of order ``1/inner_samples``
    that the error bars do not see.
    """
    if noise_var <= 0:
        raise ValueError("noise variance must be positive")
    if samples < 1 or inner_samples < 1:
        raise ValueError("sample counts must be positive")
    if batches < 2:
        raise ValueError("at least two batches are needed for error bars")
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    r = np.asarray(r, dtype=complex)
    nr, nt = h.shape

    rng = np.random.default_rng(seed)
    factor = _psd_factor(q_bar)
    if factor.shape[0] != 2 * nt:
        raise ValueError("input covariance must be 2Nt x 2Nt")

    def draw_magnitudes(n: int) -> np.ndarray:
        xb = rng.standard_normal((n, 2 * nt)) @ factor.T
        x = xb[:, :nt] + 1j * xb[:, nt:]
        return np.abs(x @ h.T + r)

    nu_out = draw_magnitudes(samples)
    w = (rng.standard_normal((samples, nr)) + 1j * rng.standard_normal((samples, nr)))
    # |c + w| depends on c only through |c|: rotate the noise onto c's phase.
    y = np.abs(nu_out + np.sqrt(noise_var / 2.0) * w)

    # Conditional term: exact log density at the generating input.
    log_cond = rice_log_density(y, nu_out, noise_var).sum(axis=1)

    # Marginal term: mixture over an independent set of input draws.  The
    # parts of the Rician log density that do not involve nu factor out of
    # the mixture sum.
    nu_in = draw_magnitudes(inner_samples)
    sep_out = (np.log(2.0 * y / noise_var) - y * y / noise_var).sum(axis=1)
    sep_in = -(nu_in * nu_in).sum(axis=1) / noise_var

    log_mix = _mixture_log_density(y, nu_in, sep_in, noise_var) + sep_out

    per_sample = (log_cond - log_mix) / LOG2
    value = float(per_sample.mean())
    batch_means = np.array([b.mean() for b in np.array_split(per_sample, batches)])
    stderr = float(batch_means.std(ddof=1) / np.sqrt(batches))
    return MiEstimate(value=value, samples=int(samples), stderr=stderr,
                      low_sample_warning=samples < MIN_RECOMMENDED_SAMPLES)
