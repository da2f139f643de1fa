"""Fully digital precoding: IQ-aware design, classical baseline, rates.

The IQ-aware precoder drives the in-phase and quadrature symbol rails
through four independent real matrices, which lets the stacked real
precoder align with the right singular vectors of the real channel.  A
classical complex precoder is constrained to the block-coupled real
form ``[[F_I, -F_Q], [F_Q, F_I]]`` and is therefore suboptimal for a
real-part detector; it is implemented here as the comparison baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelConfig, generate_channel
from .numerics import (WaterFillResult, _require_finite, real_equivalent, svd,
                       water_fill)
from .receiver import linearize

__all__ = [
    "DigitalPrecoder",
    "ClassicalPrecoder",
    "iq_digital_precoder",
    "classical_precoder",
    "achievable_rate",
    "transmit_covariance",
    "iq_capacity",
    "classical_capacity",
    "inphase_capacity",
    "capacity_slopes",
    "dof_slope",
    "DOF_SCHEMES",
]

LOG2 = np.log(2.0)

#: capacity curves reported by the degrees-of-freedom experiment
DOF_SCHEMES = ("iq", "classical", "inphase")


def _numerical_rank(s: np.ndarray, shape: tuple[int, int]) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > max(shape) * np.finfo(float).eps * s[0]))


@dataclass(frozen=True)
class DigitalPrecoder:
    """IQ-aware precoder ``F_bar = V[:, :k] diag(sqrt(p))`` with its allocation.

    ``f_bar`` has one column per real substream (a complex stream uses
    two).  ``stream_gains`` holds the channel singular values of the
    selected streams.
    """

    f_bar: np.ndarray
    allocation: WaterFillResult
    stream_gains: np.ndarray

    @property
    def n_streams(self) -> int:
        return self.f_bar.shape[1]

    @property
    def blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """The four ``Nt x Ns`` IQ blocks (requires an even stream count)."""
        nt2, k = self.f_bar.shape
        if k % 2:
            raise ValueError("IQ blocks are only defined for an even stream count")
        nt, ns = nt2 // 2, k // 2
        f = self.f_bar
        return f[:nt, :ns], f[:nt, ns:], f[nt:, :ns], f[nt:, ns:]

    def closed_form_rate(self, noise_var: float) -> float:
        """Sum-rate ``sum_k 0.5 log2(1 + s_k^2 p_k / noise)`` of the allocation."""
        snr = self.stream_gains ** 2 * self.allocation.allocations / noise_var
        return float(np.sum(0.5 * np.log2(1.0 + snr)))


@dataclass(frozen=True)
class ClassicalPrecoder:
    """Complex precoder and its block-coupled real equivalent."""

    f: np.ndarray
    f_real: np.ndarray
    allocation: WaterFillResult
    stream_gains: np.ndarray


def iq_digital_precoder(h_bar, power: float, noise_var: float,
                        n_streams: int) -> DigitalPrecoder:
    """Capacity-achieving IQ-aware precoder for the real channel ``h_bar``.

    Selects the top ``n_streams`` right singular vectors (real
    substreams; a complex stream counts twice) and scales them by the
    water-filled powers, which total ``2 * power`` so that the transmit
    covariance ``0.5 F F^T`` meets the power budget exactly.
    """
    h_bar = np.atleast_2d(np.asarray(h_bar, dtype=float))
    if power <= 0 or noise_var <= 0:
        raise ValueError("power and noise variance must be positive")
    if n_streams < 1:
        raise ValueError("at least one stream is required")
    dec = svd(h_bar)
    rank = _numerical_rank(dec.singular_values, h_bar.shape)
    if n_streams > rank:
        raise ValueError(f"stream count {n_streams} exceeds channel rank {rank}")
    gains = dec.singular_values[:n_streams]
    alloc = water_fill(gains, 2.0 * power, noise_var)
    f_bar = dec.v[:, :n_streams] * np.sqrt(alloc.allocations)
    return DigitalPrecoder(f_bar=f_bar, allocation=alloc, stream_gains=gains)


def classical_precoder(h_tilde, power: float, noise_var: float,
                       n_streams: int) -> ClassicalPrecoder:
    """Complex SVD precoder with water-filling, as used for linear receivers.

    ``n_streams`` counts complex streams.  The real equivalent is
    block-coupled by construction.
    """
    h_tilde = np.atleast_2d(np.asarray(h_tilde, dtype=complex))
    if power <= 0 or noise_var <= 0:
        raise ValueError("power and noise variance must be positive")
    if n_streams < 1:
        raise ValueError("at least one stream is required")
    dec = svd(h_tilde)
    rank = _numerical_rank(dec.singular_values, h_tilde.shape)
    if n_streams > rank:
        raise ValueError(f"stream count {n_streams} exceeds channel rank {rank}")
    gains = dec.singular_values[:n_streams]
    alloc = water_fill(gains, power, noise_var)
    f = dec.v[:, :n_streams] * np.sqrt(alloc.allocations)
    return ClassicalPrecoder(f=f, f_real=real_equivalent(f),
                             allocation=alloc, stream_gains=gains)


def transmit_covariance(f_bar) -> np.ndarray:
    """Covariance ``0.5 F F^T`` of the precoded signal for unit-variance symbols."""
    f_bar = np.atleast_2d(np.asarray(f_bar, dtype=float))
    return 0.5 * f_bar @ f_bar.T


def achievable_rate(h_bar, q_bar, noise_var: float) -> float:
    """Rate ``0.5 log2 det(I + (2/noise) Hb Qb Hb^T)`` in bits/s/Hz.

    Evaluated through a Cholesky factorization; raises ``ValueError``
    for a non-positive-semidefinite covariance.
    """
    if noise_var <= 0:
        raise ValueError("noise variance must be positive")
    h_bar = np.atleast_2d(np.asarray(h_bar, dtype=float))
    q = np.atleast_2d(np.asarray(q_bar, dtype=float))
    _require_finite(q, "covariance")
    if not np.allclose(q, q.T, atol=1e-10 * max(1.0, float(np.abs(q).max()))):
        raise ValueError("covariance must be symmetric")
    if np.linalg.eigvalsh((q + q.T) / 2.0).min() < -1e-10 * max(1.0, float(np.abs(q).max())):
        raise ValueError("covariance must be positive semidefinite")
    gram = h_bar @ ((q + q.T) / 2.0) @ h_bar.T
    m = np.eye(h_bar.shape[0]) + (2.0 / noise_var) * (gram + gram.T) / 2.0
    chol = np.linalg.cholesky(m)
    return float(np.sum(np.log2(np.diag(chol))))


# ---------------------------------------------------------------------------
# capacity curves for the three receiver models
# ---------------------------------------------------------------------------

def _waterfill_capacity(gains: np.ndarray, total: float, noise_var: float,
                        bits_per_stream: float) -> float:
    alloc = water_fill(gains, total, noise_var)
    return float(np.sum(bits_per_stream * np.log2(
        1.0 + gains ** 2 * alloc.allocations / noise_var)))


def iq_capacity(h_bar, power: float, noise_var: float,
                n_streams: int | None = None) -> float:
    """Water-filled capacity of the real-part detector, in bits/s/Hz."""
    h_bar = np.atleast_2d(np.asarray(h_bar, dtype=float))
    dec = svd(h_bar)
    rank = _numerical_rank(dec.singular_values, h_bar.shape)
    if rank == 0:
        return 0.0
    k = rank if n_streams is None else min(n_streams, rank)
    return _waterfill_capacity(dec.singular_values[:k], 2.0 * power, noise_var, 0.5)


def classical_capacity(h, power: float, noise_var: float) -> float:
    """Water-filled capacity of the phase-known linear model ``y = Hx + w``."""
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    dec = svd(h)
    rank = _numerical_rank(dec.singular_values, h.shape)
    if rank == 0:
        return 0.0
    return _waterfill_capacity(dec.singular_values[:rank], power, noise_var, 1.0)


def inphase_capacity(h_tilde, power: float, noise_var: float) -> float:
    """Capacity when only the in-phase rail is driven (``x_Q = 0``).

    The real-part detector then sees the real channel ``Re(H_tilde)``.
    """
    hi = np.real(np.atleast_2d(np.asarray(h_tilde, dtype=complex)))
    dec = svd(hi)
    rank = _numerical_rank(dec.singular_values, hi.shape)
    if rank == 0:
        return 0.0
    return _waterfill_capacity(dec.singular_values[:rank], 2.0 * power, noise_var, 0.5)


# ---------------------------------------------------------------------------
# degrees-of-freedom slopes
# ---------------------------------------------------------------------------

def _validate_snr_grid(snr_grid_db) -> np.ndarray:
    grid = np.asarray(snr_grid_db, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("at least two SNR grid points are required")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("SNR grid must be strictly increasing")
    if grid[0] < 25.0:
        raise ValueError("slope estimation needs a high-SNR grid (>= 25 dB)")
    return grid


def capacity_slopes(h: np.ndarray, r: np.ndarray, noise_var: float,
                    snr_grid_db) -> dict[str, np.ndarray]:
    """Finite-difference capacity slopes in bits per octave of SNR.

    For every interior grid point the slope is the central difference of
    the water-filled capacity with respect to ``log2 SNR`` (``SNR = P /
    noise_var``); a two-point grid yields the single forward difference.
    Returns one slope array per scheme in :data:`DOF_SCHEMES`.
    """
    grid = _validate_snr_grid(snr_grid_db)
    lc = linearize(h, r)
    powers = noise_var * 10.0 ** (grid / 10.0)
    curves = {
        "iq": np.array([iq_capacity(lc.h_bar, p, noise_var) for p in powers]),
        "classical": np.array([classical_capacity(h, p, noise_var) for p in powers]),
        "inphase": np.array([inphase_capacity(lc.h_tilde, p, noise_var) for p in powers]),
    }
    log2_snr = grid / (10.0 * np.log10(2.0))
    slopes = {}
    for scheme, c in curves.items():
        if grid.size == 2:
            slopes[scheme] = np.array([(c[1] - c[0]) / (log2_snr[1] - log2_snr[0])])
        else:
            slopes[scheme] = (c[2:] - c[:-2]) / (log2_snr[2:] - log2_snr[:-2])
    return slopes


def dof_slope(cfg: ChannelConfig, snr_grid_db, trials: int, seed: int,
              scheme: str = "iq") -> float:
    """Monte-Carlo mean capacity slope for one receiver scheme.

    Each trial draws a fresh channel and reference (seeds ``seed + t``)
    and averages the central-difference slopes over the grid interior.
    """
    if scheme not in DOF_SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if trials < 1:
        raise ValueError("at least one trial is required")
    _validate_snr_grid(snr_grid_db)
    acc = 0.0
    for t in range(trials):
        real = generate_channel(cfg, seed + t)
        acc += float(np.mean(capacity_slopes(real.h, real.r, cfg.noise_var,
                                             snr_grid_db)[scheme]))
    return acc / trials
