"""Hybrid precoding: analog phase-shifter network plus IQ-aware digital stage.

Both architectures approximate a target fully digital precoder
``F_bar`` (2Nt x 2Ns, real) by the product of the real equivalent of a
complex analog matrix ``A`` and a real digital matrix, minimizing the
Frobenius distance by alternating minimization:

* fully connected (FC): every entry of ``A`` is unit modulus.  The
  digital factor is restricted to a scaled column-orthogonal matrix,
  the problem is lifted with auxiliary columns to a square orthogonal
  digital factor, and the iteration alternates a unit-modulus
  projection for ``A``, an orthogonal Procrustes step for the digital
  factor, and an auxiliary-column refresh.  A final rescaling restores
  the exact power budget.
* sub-connected (SC): ``A`` is block diagonal with one phase shifter
  per antenna, which fixes ``A^H A = K I`` and decouples the updates:
  per-shifter phase alignment and a closed-form scaled least-squares
  digital stage that meets the power budget exactly.

Each run is single threaded and deterministic given its seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import (_require_finite, procrustes, project_unit_modulus,
                       real_equivalent)

__all__ = [
    "DegenerateAlignmentError",
    "HybridPrecoder",
    "AltMinTrace",
    "fc_analog_update",
    "fc_digital_update",
    "fc_aux_update",
    "fc_hybrid_precoder",
    "sc_analog_update",
    "sc_digital_update",
    "sc_hybrid_precoder",
]


class DegenerateAlignmentError(ValueError):
    """The analog and target precoders are orthogonal; the digital stage vanishes."""


@dataclass(frozen=True)
class HybridPrecoder:
    """Analog matrix, IQ-aware digital matrix and the network architecture."""

    analog: np.ndarray
    digital: np.ndarray
    architecture: str
    antennas_per_chain: int | None = None

    def effective_precoder(self) -> np.ndarray:
        """Stacked real precoder ``real_equivalent(A) @ D_bar`` (2Nt x 2Ns)."""
        return real_equivalent(self.analog) @ self.digital

    def transmit_covariance(self) -> np.ndarray:
        f = self.effective_precoder()
        return 0.5 * f @ f.T


@dataclass(frozen=True)
class AltMinTrace:
    """Objective values per iteration; nonincreasing up to roundoff."""

    objectives: np.ndarray
    iterations: int
    converged: bool


def _validate_target(f_bar) -> np.ndarray:
    f_bar = np.atleast_2d(np.asarray(f_bar, dtype=float))
    _require_finite(f_bar, "target precoder")
    if f_bar.shape[0] % 2:
        raise ValueError("target precoder must have 2Nt rows")
    return f_bar


# ---------------------------------------------------------------------------
# fully connected network
# ---------------------------------------------------------------------------

def fc_analog_update(f_tilde, d_tilde, gamma: float | None = None) -> np.ndarray:
    """Optimal unit-modulus analog matrix for fixed digital factors.

    The blocks of ``f_tilde @ d_tilde.T`` combine into in-phase and
    quadrature targets ``Z_I = Z11 + Z22`` and ``Z_Q = Z21 - Z12``; each
    analog coefficient is the unit-circle projection of its target
    entry.  The projection is scale invariant, so ``gamma`` does not
    affect the result; it is accepted to mirror the objective.
    """
    del gamma
    f_tilde = np.atleast_2d(np.asarray(f_tilde, dtype=float))
    d_tilde = np.atleast_2d(np.asarray(d_tilde, dtype=float))
    z = f_tilde @ d_tilde.T
    nt = z.shape[0] // 2
    n_rf = z.shape[1] // 2
    z11, z12 = z[:nt, :n_rf], z[:nt, n_rf:]
    z21, z22 = z[nt:, :n_rf], z[nt:, n_rf:]
    a_i, a_q = project_unit_modulus(z11 + z22, z21 - z12)
    return a_i + 1j * a_q


def fc_digital_update(f_tilde, a_bar) -> np.ndarray:
    """Orthogonal digital factor maximizing ``trace(D @ f_tilde.T @ a_bar)``."""
    f_tilde = np.atleast_2d(np.asarray(f_tilde, dtype=float))
    a_bar = np.atleast_2d(np.asarray(a_bar, dtype=float))
    return procrustes(f_tilde.T @ a_bar)


def fc_aux_update(a_bar, d_tilde, gamma: float, n_streams: int) -> np.ndarray:
    """Auxiliary columns ``gamma * a_bar @ d_tilde[:, n_streams:]``.

    They cancel the least-squares error of the lifted problem beyond the
    first ``n_streams`` target columns; empty when the digital factor is
    square with no surplus.
    """
    a_bar = np.atleast_2d(np.asarray(a_bar, dtype=float))
    d_tilde = np.atleast_2d(np.asarray(d_tilde, dtype=float))
    return gamma * a_bar @ d_tilde[:, n_streams:]


def _fc_altmin_once(f_bar: np.ndarray, n_rf: int, gamma: float, tol: float,
                    max_iter: int, rng: np.random.Generator):
    nt = f_bar.shape[0] // 2
    k = f_bar.shape[1]

    analog = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, (nt, n_rf)))
    a_bar = real_equivalent(analog)
    f_tilde = np.concatenate([f_bar, np.zeros((2 * nt, 2 * n_rf - k))], axis=1)
    # Seed the digital factor from the random phases so restarts differ;
    # the loop then follows the analog / digital / auxiliary cycle.
    d_tilde = fc_digital_update(f_tilde, a_bar)

    objectives = [float(np.linalg.norm(f_tilde @ d_tilde.T - gamma * a_bar) ** 2)]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        analog = fc_analog_update(f_tilde, d_tilde)
        a_bar = real_equivalent(analog)
        d_tilde = fc_digital_update(f_tilde, a_bar)
        f_tilde = np.concatenate(
            [f_bar, fc_aux_update(a_bar, d_tilde, gamma, k)], axis=1)
        # After the auxiliary refresh the lifted objective collapses to
        # the residual on the true target columns.
        obj = float(np.linalg.norm(f_bar - gamma * a_bar @ d_tilde[:, :k]) ** 2)
        objectives.append(obj)
        if objectives[-2] - obj <= tol * max(objectives[-2], 1e-300):
            converged = True
            break

    return analog, a_bar, d_tilde[:, :k], np.array(objectives), iterations, converged


def fc_hybrid_precoder(f_bar, n_rf: int, power: float, tol: float = 1e-6,
                       max_iter: int = 500, seed=None,
                       restarts: int = 1) -> tuple[HybridPrecoder, AltMinTrace]:
    """Alternating minimization for the fully connected network.

    ``f_bar`` is the target IQ-aware digital precoder (2Nt x 2Ns).  The
    digital factor is restricted to ``gamma`` times a column-orthogonal
    matrix with ``gamma = sqrt(2 power / (Nt k))`` for ``k`` streams,
    the value that meets the power budget under the near-orthogonality
    ``A_bar^T A_bar ~ Nt I`` of a large random phase matrix; ``gamma``
    is computed once and held fixed, and the returned digital matrix is
    rescaled so the transmit power equals ``power`` exactly.  With
    ``restarts > 1`` the best run (lowest final objective) is returned.
    """
    f_bar = _validate_target(f_bar)
    nt = f_bar.shape[0] // 2
    k = f_bar.shape[1]
    if n_rf < 1:
        raise ValueError("at least one RF chain is required")
    if k > 2 * n_rf:
        raise ValueError(f"{k} real streams need at least {-(-k // 2)} RF chains")
    if power <= 0:
        raise ValueError("power must be positive")
    if restarts < 1:
        raise ValueError("at least one restart is required")

    gamma = np.sqrt(2.0 * power / (nt * k))
    entropy = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    best = None
    for child in entropy.spawn(restarts):
        run = _fc_altmin_once(f_bar, n_rf, gamma, tol, max_iter,
                              np.random.default_rng(child))
        if best is None or run[3][-1] < best[3][-1]:
            best = run
    analog, a_bar, d_u, objectives, iterations, converged = best

    scale = np.sqrt(2.0 * power / float(np.trace(a_bar @ d_u @ d_u.T @ a_bar.T)))
    precoder = HybridPrecoder(analog=analog, digital=scale * d_u, architecture="fc")
    trace = AltMinTrace(objectives=objectives, iterations=iterations, converged=converged)
    return precoder, trace


# ---------------------------------------------------------------------------
# sub-connected network
# ---------------------------------------------------------------------------

def _block_diag_phases(phases: np.ndarray, n_rf: int) -> np.ndarray:
    """Block-diagonal analog matrix from one phase per antenna."""
    nt = phases.size
    k = nt // n_rf
    analog = np.zeros((nt, n_rf), dtype=complex)
    for n in range(n_rf):
        analog[n * k:(n + 1) * k, n] = np.exp(1j * phases[n * k:(n + 1) * k])
    return analog


def sc_analog_update(f_bar, d_bar, antennas_per_chain: int) -> np.ndarray:
    """Optimal block-diagonal unit-modulus analog matrix for fixed ``d_bar``.

    The blocks of ``f_bar @ d_bar.T`` combine into the complex target
    ``Y = (Y11 + Y22) + j (Y21 - Y12)``; the shifter feeding antenna
    ``k`` of chain ``n`` takes the phase of ``Y[(n-1)K + k, n]``.  A
    zero target entry gets phase zero.
    """
    f_bar = np.atleast_2d(np.asarray(f_bar, dtype=float))
    d_bar = np.atleast_2d(np.asarray(d_bar, dtype=float))
    y = f_bar @ d_bar.T
    nt = y.shape[0] // 2
    n_rf = y.shape[1] // 2
    y11, y12 = y[:nt, :n_rf], y[:nt, n_rf:]
    y21, y22 = y[nt:, :n_rf], y[nt:, n_rf:]
    yc = (y11 + y22) + 1j * (y21 - y12)
    k = antennas_per_chain
    phases = np.concatenate([np.angle(yc[n * k:(n + 1) * k, n]) for n in range(n_rf)])
    return _block_diag_phases(phases, n_rf)


def sc_digital_update(f_bar, a_bar, power: float,
                      antennas_per_chain: int) -> np.ndarray:
    """Closed-form digital stage ``sqrt(2P / (K ||A^T F||_F^2)) A^T F``.

    Because the block-diagonal analog matrix satisfies ``A_bar^T A_bar =
    K I``, this is the least-squares solution rescaled onto the power
    constraint ``(K/2) trace(D D^T) = P``, which it meets exactly.
    """
    f_bar = np.atleast_2d(np.asarray(f_bar, dtype=float))
    a_bar = np.atleast_2d(np.asarray(a_bar, dtype=float))
    g = a_bar.T @ f_bar
    energy = float(np.linalg.norm(g) ** 2)
    if energy == 0.0:
        raise DegenerateAlignmentError("analog precoder is orthogonal to the target")
    return np.sqrt(2.0 * power / (antennas_per_chain * energy)) * g


def sc_hybrid_precoder(f_bar, n_rf: int, power: float, tol: float = 1e-6,
                       max_iter: int = 100, seed=None) -> tuple[HybridPrecoder, AltMinTrace]:
    """Alternating minimization for the sub-connected network.

    Requires the antenna count to split evenly across RF chains.  The
    analog phases start uniform at random and the digital stage starts
    from its closed-form update, so every iterate is feasible and meets
    the power budget exactly.
    """
    f_bar = _validate_target(f_bar)
    nt = f_bar.shape[0] // 2
    k_streams = f_bar.shape[1]
    if n_rf < 1:
        raise ValueError("at least one RF chain is required")
    if nt % n_rf:
        raise ValueError(f"antenna count {nt} is not divisible by {n_rf} RF chains")
    if k_streams > 2 * n_rf:
        raise ValueError(f"{k_streams} real streams need at least {-(-k_streams // 2)} RF chains")
    if power <= 0:
        raise ValueError("power must be positive")
    k = nt // n_rf

    rng = np.random.default_rng(seed)
    analog = _block_diag_phases(rng.uniform(0.0, 2.0 * np.pi, nt), n_rf)
    a_bar = real_equivalent(analog)
    d_bar = sc_digital_update(f_bar, a_bar, power, k)

    objectives = [float(np.linalg.norm(f_bar - a_bar @ d_bar) ** 2)]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        analog = sc_analog_update(f_bar, d_bar, k)
        a_bar = real_equivalent(analog)
        d_bar = sc_digital_update(f_bar, a_bar, power, k)
        obj = float(np.linalg.norm(f_bar - a_bar @ d_bar) ** 2)
        objectives.append(obj)
        if objectives[-2] - obj <= tol * max(objectives[-2], 1e-300):
            converged = True
            break

    precoder = HybridPrecoder(analog=analog, digital=d_bar, architecture="sc",
                              antennas_per_chain=k)
    trace = AltMinTrace(objectives=np.array(objectives), iterations=iterations,
                        converged=converged)
    return precoder, trace
