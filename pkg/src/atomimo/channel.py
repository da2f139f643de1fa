"""Multi-path channel and local-oscillator reference generation.

Transmitter-to-receiver channels follow the standard Saleh-Valenzuela
multi-path model on uniform linear arrays: every path contributes a
complex gain times transmit/receive steering phasors.  The reference
wave radiated by the local oscillator reaches each receive element with
a common magnitude and an independent uniform phase.

Generation is pure given ``(config, seed)``: parallel trials should use
disjoint seeds (the experiment harness derives them as ``seed + trial``).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .numerics import _require_finite, real_equivalent

__all__ = [
    "ChannelConfig",
    "PathComponent",
    "ChannelRealization",
    "channel_matrix",
    "generate_channel",
    "generate_reference",
    "receive_snr",
    "rsnr",
    "power_for_receive_snr",
    "reference_gain_for_rsnr",
    "channel_to_json",
    "channel_from_json",
]

# Desk-scale defaults: 27.7 GHz carrier (10.83 mm wavelength), 10 mm
# element spacing, 10 propagation paths.
DEFAULT_WAVELENGTH = 0.01083
DEFAULT_SPACING = 0.010
DEFAULT_PATHS = 10


@dataclass(frozen=True)
class ChannelConfig:
    """Array geometry, propagation and power parameters for one link."""

    nt: int
    nr: int
    paths: int = DEFAULT_PATHS
    wavelength: float = DEFAULT_WAVELENGTH
    spacing: float = DEFAULT_SPACING
    reference_gain: float = 1.0
    noise_var: float = 1.0
    power: float = 1.0

    def __post_init__(self):
        for name in ("nt", "nr", "paths"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be at least 1")
        for name in ("wavelength", "spacing", "reference_gain", "noise_var", "power"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class PathComponent:
    gain: complex
    arrival_deg: float
    departure_deg: float


@dataclass(frozen=True)
class ChannelRealization:
    """Effective channel ``H``, reference vector ``r`` and the drawn paths."""

    config: ChannelConfig
    seed: int | None
    h: np.ndarray
    r: np.ndarray
    paths: tuple[PathComponent, ...]


def channel_matrix(nt: int, nr: int, spacing_over_wavelength: float,
                   paths: Sequence[PathComponent]) -> np.ndarray:
    """Sum of per-path outer products of ULA steering phasors.

    Entry ``(m, n)`` is ``sum_l gain_l exp(j 2 pi (d/lambda)
    (m sin aoa_l + n sin aod_l))`` with antennas indexed from zero.
    """
    m = np.arange(nr)[:, None]
    n = np.arange(nt)[None, :]
    h = np.zeros((nr, nt), dtype=complex)
    for p in paths:
        phase = 2.0 * np.pi * spacing_over_wavelength * (
            m * np.sin(np.radians(p.arrival_deg))
            + n * np.sin(np.radians(p.departure_deg))
        )
        h += p.gain * np.exp(1j * phase)
    return h


def _spawned_rngs(seed) -> tuple[np.random.Generator, np.random.Generator]:
    # Two fixed substreams: child 0 drives the propagation paths, child 1
    # the reference phases, so H and r stay independent but reproducible.
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    children = seed.spawn(2)
    return np.random.default_rng(children[0]), np.random.default_rng(children[1])


def generate_channel(cfg: ChannelConfig, seed) -> ChannelRealization:
    """Draw one channel realization (paths, ``H`` and reference ``r``).

    Path gains are unit-variance complex Gaussian; arrival and departure
    angles are uniform in (-90, 90) degrees.  Deterministic given
    ``(cfg, seed)``; the draw order is gains, arrivals, departures.
    """
    rng_paths, rng_ref = _spawned_rngs(seed)
    gains = (rng_paths.standard_normal(cfg.paths)
             + 1j * rng_paths.standard_normal(cfg.paths)) / np.sqrt(2.0)
    arrivals = rng_paths.uniform(-90.0, 90.0, cfg.paths)
    departures = rng_paths.uniform(-90.0, 90.0, cfg.paths)
    paths = tuple(
        PathComponent(gain=complex(g), arrival_deg=float(a), departure_deg=float(d))
        for g, a, d in zip(gains, arrivals, departures)
    )
    h = channel_matrix(cfg.nt, cfg.nr, cfg.spacing / cfg.wavelength, paths)
    r = cfg.reference_gain * np.exp(1j * rng_ref.uniform(0.0, 2.0 * np.pi, cfg.nr))
    echoed = int(seed) if isinstance(seed, (int, np.integer)) else None
    return ChannelRealization(config=cfg, seed=echoed, h=h, r=r, paths=paths)


def generate_reference(cfg: ChannelConfig, seed) -> np.ndarray:
    """Reference vector ``r_m = rho_R exp(j theta_m)``, ``theta_m ~ U(0, 2 pi)``.

    Uses the same substream as :func:`generate_channel`, so the returned
    vector equals ``generate_channel(cfg, seed).r``.
    """
    _, rng_ref = _spawned_rngs(seed)
    return cfg.reference_gain * np.exp(1j * rng_ref.uniform(0.0, 2.0 * np.pi, cfg.nr))


# ---------------------------------------------------------------------------
# SNR metrics and calibration
# ---------------------------------------------------------------------------

def _signal_power(h: np.ndarray, power: float, q) -> float:
    """Mean radiated signal power ``E ||H x||^2`` at the receiver.

    ``q`` may be a complex ``Nt x Nt`` covariance of ``x``, a real
    ``2Nt x 2Nt`` covariance of the stacked ``(x_I, x_Q)``, or ``None``
    for the uniform allocation ``(power / Nt) I``.
    """
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    _require_finite(h, "channel")
    nt = h.shape[1]
    if q is None:
        return power / nt * float(np.linalg.norm(h) ** 2)
    q = np.asarray(q)
    if q.shape == (nt, nt):
        return float(np.real(np.trace(h @ q @ h.conj().T)))
    if q.shape == (2 * nt, 2 * nt):
        hr = real_equivalent(h)
        return float(np.trace(hr @ q @ hr.T))
    raise ValueError(f"covariance shape {q.shape} matches neither ({nt},{nt}) nor ({2*nt},{2*nt})")


def receive_snr(h, power: float, noise_var: float, q=None) -> float:
    """Receive SNR ``E||Hx||^2 / E||n||^2`` in dB."""
    if noise_var <= 0:
        raise ValueError("noise variance must be positive")
    nr = np.atleast_2d(h).shape[0]
    return 10.0 * np.log10(_signal_power(h, power, q) / (nr * noise_var))


def rsnr(h, r, power: float, noise_var: float, q=None) -> float:
    """Reference-to-signal-and-noise ratio ``E||r||^2 / E||Hx + n||^2`` in dB."""
    if noise_var <= 0:
        raise ValueError("noise variance must be positive")
    r = np.asarray(r, dtype=complex)
    nr = np.atleast_2d(h).shape[0]
    denom = _signal_power(h, power, q) + nr * noise_var
    if denom <= 0:
        raise ValueError("signal-plus-noise power must be positive")
    return 10.0 * np.log10(float(np.linalg.norm(r) ** 2) / denom)


def power_for_receive_snr(h, noise_var: float, target_db: float) -> float:
    """Transmit power hitting ``target_db`` receive SNR under uniform allocation."""
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    energy = float(np.linalg.norm(h) ** 2)
    if energy == 0:
        raise ValueError("channel is identically zero")
    nr, nt = h.shape
    return 10.0 ** (target_db / 10.0) * nr * noise_var * nt / energy


def reference_gain_for_rsnr(h, power: float, noise_var: float, target_db: float,
                            q=None) -> float:
    """Per-element reference magnitude hitting ``target_db`` RSNR."""
    nr = np.atleast_2d(h).shape[0]
    denom = _signal_power(h, power, q) + nr * noise_var
    return float(np.sqrt(10.0 ** (target_db / 10.0) * denom / nr))


# ---------------------------------------------------------------------------
# JSON fixtures
# ---------------------------------------------------------------------------

def _complex_pairs(a: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(a).ravel()]


def channel_to_json(realization: ChannelRealization) -> str:
    """Serialize a realization (complex entries as ``[re, im]`` pairs)."""
    cfg = realization.config
    doc = {
        "nt": cfg.nt,
        "nr": cfg.nr,
        "seed": realization.seed,
        "config": asdict(cfg),
        "h": _complex_pairs(realization.h),
        "r": _complex_pairs(realization.r),
        "paths": [
            {
                "gain": [p.gain.real, p.gain.imag],
                "arrival_deg": p.arrival_deg,
                "departure_deg": p.departure_deg,
            }
            for p in realization.paths
        ],
    }
    return json.dumps(doc, indent=2)


def channel_from_json(text: str) -> ChannelRealization:
    """Inverse of :func:`channel_to_json`; floats round-trip exactly."""
    doc = json.loads(text)
    cfg = ChannelConfig(**doc["config"])
    h = np.array([complex(re, im) for re, im in doc["h"]]).reshape(doc["nr"], doc["nt"])
    r = np.array([complex(re, im) for re, im in doc["r"]])
    paths = tuple(
        PathComponent(gain=complex(p["gain"][0], p["gain"][1]),
                      arrival_deg=p["arrival_deg"], departure_deg=p["departure_deg"])
        for p in doc["paths"]
    )
    return ChannelRealization(config=cfg, seed=doc["seed"], h=h, r=r, paths=paths)
