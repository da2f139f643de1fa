"""Dense linear-algebra kernels shared by the precoding stack.

Everything here operates on plain numpy arrays.  Complex matrices are
mapped to their real equivalents with :func:`real_equivalent` and
:func:`realify_channel`; the remaining routines (SVD contract,
water-filling, orthogonal Procrustes, unit-modulus projection) are the
building blocks of the digital and hybrid precoder designs.

All functions are pure: they never mutate their inputs and hold no
state, so they are safe to call from any number of workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NumericFailure",
    "DegenerateChannelError",
    "SvdResult",
    "WaterFillResult",
    "real_equivalent",
    "realify_channel",
    "to_real_stack",
    "from_real_stack",
    "svd",
    "water_fill",
    "procrustes",
    "project_unit_modulus",
]


class NumericFailure(RuntimeError):
    """A numerical routine failed to produce a usable result."""


class DegenerateChannelError(NumericFailure):
    """Every channel gain is zero, so power allocation is undefined."""


def _require_finite(a: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must contain only finite entries")
    return a


# ---------------------------------------------------------------------------
# complex <-> real equivalences
# ---------------------------------------------------------------------------

def real_equivalent(m) -> np.ndarray:
    """Real ``2m x 2n`` equivalent ``[[M_I, -M_Q], [M_Q, M_I]]`` of a complex matrix.

    This is the matrix representation of complex multiplication acting on
    stacked (real, imaginary) coordinates, so it preserves products:
    ``real_equivalent(A @ B) == real_equivalent(A) @ real_equivalent(B)``.
    """
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    _require_finite(m, "matrix")
    return np.block([[m.real, -m.imag], [m.imag, m.real]])


def realify_channel(h_tilde) -> np.ndarray:
    """Real ``Nr x 2Nt`` channel ``(Re H, -Im H)`` seen by a real-part detector.

    Satisfies ``realify_channel(H) @ to_real_stack(x) == (H @ x).real`` for
    every complex vector ``x``.
    """
    h = np.atleast_2d(np.asarray(h_tilde, dtype=complex))
    _require_finite(h, "channel")
    return np.concatenate([h.real, -h.imag], axis=1)


def to_real_stack(z) -> np.ndarray:
    """Stack real parts over imaginary parts along the leading axis."""
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag], axis=0)


def from_real_stack(v) -> np.ndarray:
    """Inverse of :func:`to_real_stack`."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] % 2:
        raise ValueError("stacked array must have an even leading dimension")
    n = v.shape[0] // 2
    return v[:n] + 1j * v[n:]


# ---------------------------------------------------------------------------
# SVD contract
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``M = U diag(s) V^H`` with a deterministic sign convention.

    Singular values are descending.  The first entry of every right
    singular vector whose magnitude exceeds ``1e-8`` times the column
    maximum is made positive (real case) or rotated onto the positive
    real axis (complex case); the paired left vector absorbs the factor.
    """

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.singular_values) @ self.v.conj().T


def _normalize_vector_signs(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = u.copy()
    v = v.copy()
    for k in range(v.shape[1]):
        col = v[:, k]
        mags = np.abs(col)
        top = mags.max()
        if top == 0.0:
            continue
        lead = col[np.flatnonzero(mags > 1e-8 * top)[0]]
        phase = lead / abs(lead)
        if not np.isclose(phase, 1.0):
            v[:, k] = col * np.conj(phase)
            u[:, k] = u[:, k] * np.conj(phase)
    return u, v


def svd(m) -> SvdResult:
    """Thin singular value decomposition with the package sign convention.

    Works for real and complex matrices; the right singular vectors are
    returned as columns of ``v``.  Raises :class:`NumericFailure` if the
    underlying decomposition does not converge.
    """
    m = np.atleast_2d(np.asarray(m))
    if not np.iscomplexobj(m):
        m = m.astype(float)
    _require_finite(m, "matrix")
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"SVD did not converge: {exc}") from exc
    u, v = _normalize_vector_signs(u, vh.conj().T)
    return SvdResult(u=u, singular_values=s, v=v)


# ---------------------------------------------------------------------------
# water-filling
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WaterFillResult:
    """Power allocation ``p_k = max(mu - noise/s_k^2, 0)`` summing to the budget."""

    allocations: np.ndarray
    water_level: float

    @property
    def total(self) -> float:
        return float(self.allocations.sum())


def water_fill(singular_values, total: float, noise_var: float) -> WaterFillResult:
    """Exact water-filling over parallel channels with gains ``s_k``.

    Maximizes ``sum_k log(1 + s_k^2 p_k / noise_var)`` subject to
    ``sum_k p_k = total`` and ``p_k >= 0``.  The water level is found by
    the sorted-threshold method (scan candidate active sets), which is
    exact in finitely many steps, rather than by bisection.

    Parameters
    ----------
    singular_values : array_like
        Channel gains in descending order; zeros are allowed at the tail.
    total : float
        Total power budget (strictly positive).
    noise_var : float
        Per-stream noise variance (strictly positive).
    """
    s = np.asarray(singular_values, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("singular values must form a non-empty 1-D array")
    _require_finite(s, "singular values")
    if np.any(s < 0):
        raise ValueError("singular values must be non-negative")
    if np.any(np.diff(s) > 0):
        raise ValueError("singular values must be in descending order")
    if total <= 0:
        raise ValueError("total power must be positive")
    if noise_var <= 0:
        raise ValueError("noise variance must be positive")
    if not np.any(s > 0):
        raise DegenerateChannelError("all channel gains are zero")

    thresholds = np.full(s.shape, np.inf)
    positive = s > 0
    thresholds[positive] = noise_var / s[positive] ** 2

    # Candidate water levels for active sets {1..k}; the optimum is the
    # largest k whose level still clears its own threshold.
    k_max = int(positive.sum())
    levels = (total + np.cumsum(thresholds[:k_max])) / np.arange(1, k_max + 1)
    active = int(np.flatnonzero(levels > thresholds[:k_max])[-1]) + 1
    mu = float(levels[active - 1])

    allocations = np.maximum(mu - thresholds, 0.0)
    return WaterFillResult(allocations=allocations, water_level=mu)


# ---------------------------------------------------------------------------
# orthogonal Procrustes and unit-modulus projection
# ---------------------------------------------------------------------------

def procrustes(g) -> np.ndarray:
    """Orthogonal matrix maximizing ``trace(D @ G)`` over ``D^T D = I``.

    Computed from the SVD ``G = V1 S V2^T`` as ``D = V2 V1^T``; the
    attained objective equals the sum of the singular values of ``G``.
    """
    g = np.atleast_2d(np.asarray(g, dtype=float))
    if g.shape[0] != g.shape[1]:
        raise ValueError("Procrustes input must be square")
    _require_finite(g, "matrix")
    try:
        v1, _, v2h = np.linalg.svd(g)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"SVD did not converge: {exc}") from exc
    return v2h.T @ v1.T


def project_unit_modulus(z_i, z_q):
    """Closest point(s) on the unit circle to ``(z_i, z_q)``, entrywise.

    The degenerate origin maps to ``(1, 0)`` so the projection stays
    deterministic.  Scalar inputs yield scalar outputs; array inputs
    broadcast.
    """
    z_i = np.asarray(z_i, dtype=float)
    z_q = np.asarray(z_q, dtype=float)
    norm = np.hypot(z_i, z_q)
    zero = norm == 0.0
    safe = np.where(zero, 1.0, norm)
    a_i = np.where(zero, 1.0, z_i / safe)
    a_q = np.where(zero, 0.0, z_q / safe)
    if a_i.ndim == 0:
        return float(a_i), float(a_q)
    return a_i, a_q
