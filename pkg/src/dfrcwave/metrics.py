"""Radar and communication quality metrics.

Conventions: the transmit array is an N-element uniform linear array with
half-wavelength spacing by default; steering vectors are
a_n(theta) = exp(j 2 pi (d/lambda) n sin theta), n = 0..N-1, theta the
azimuth in degrees. QPSK is Gray-coded with points (+-1 +-1j)/sqrt(2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import ncx2

__all__ = [
    "QPSK",
    "BeampatternCurve",
    "mui_energy",
    "covariance",
    "orthogonality_error",
    "steering_vector",
    "default_angle_grid",
    "beampattern",
    "constant_modulus_error",
    "demodulate",
    "ser",
    "detection_probability",
]

#: Gray-coded unit-power QPSK constellation.
QPSK = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j], dtype=np.complex128) / np.sqrt(2)


@dataclass(frozen=True)
class BeampatternCurve:
    """Transmit power (watts) radiated toward each azimuth angle (degrees)."""

    angles_deg: np.ndarray
    power_watts: np.ndarray


def mui_energy(H, X, S) -> float:
    """Total multi-user interference energy ||H X - S||_F^2."""
    H = np.asarray(H)
    X = np.asarray(X)
    S = np.asarray(S)
    if H.shape[1] != X.shape[0] or H.shape[0] != S.shape[0] or X.shape[1] != S.shape[1]:
        raise ValueError(
            f"inconsistent shapes: H {H.shape}, X {X.shape}, S {S.shape}"
        )
    r = H @ X - S
    return float(np.sum(r.real * r.real + r.imag * r.imag))


def covariance(X) -> np.ndarray:
    """Spatial covariance (1/L) X X^H of the transmitted frame."""
    X = np.asarray(X)
    return (X @ X.conj().T) / X.shape[1]


def orthogonality_error(X, total_power: float) -> float:
    """Frobenius distance of the covariance from the omni target (P_T/N) I."""
    X = np.asarray(X)
    n = X.shape[0]
    dev = covariance(X) - (total_power / n) * np.eye(n)
    return float(np.linalg.norm(dev))


def steering_vector(n_antennas: int, angle_deg, spacing_wavelengths: float = 0.5) -> np.ndarray:
    """ULA steering vector(s); for an array of angles, one column each."""
    angle = np.deg2rad(np.asarray(angle_deg, dtype=float))
    idx = np.arange(n_antennas)
    phase = 2.0 * np.pi * spacing_wavelengths * np.multiply.outer(idx, np.sin(angle))
    return np.exp(1j * phase)


def default_angle_grid() -> np.ndarray:
    """181-point azimuth grid over [-90, 90] degrees in 1-degree steps."""
    return np.linspace(-90.0, 90.0, 181)


def beampattern(R, angles_deg=None, spacing_wavelengths: float = 0.5) -> BeampatternCurve:
    """Evaluate P(theta) = a(theta)^H R a(theta) over an angle grid.

    Tiny negative values from rounding are clamped to zero.
    """
    R = np.asarray(R)
    if angles_deg is None:
        angles_deg = default_angle_grid()
    angles_deg = np.asarray(angles_deg, dtype=float)
    a = steering_vector(R.shape[0], angles_deg, spacing_wavelengths)
    power = np.real(np.einsum("ik,ij,jk->k", a.conj(), R, a))
    return BeampatternCurve(angles_deg=angles_deg, power_watts=np.maximum(power, 0.0))


def constant_modulus_error(X, total_power: float) -> float:
    """Worst-case deviation of entry magnitudes from sqrt(P_T/N)."""
    X = np.asarray(X)
    amp = np.sqrt(total_power / X.shape[0])
    return float(np.max(np.abs(np.abs(X) - amp)))


def demodulate(Y, constellation=QPSK) -> np.ndarray:
    """Minimum-distance decision per entry over the given constellation."""
    Y = np.asarray(Y)
    constellation = np.asarray(constellation)
    if constellation.size == 0:
        raise ValueError("constellation must be non-empty")
    d = np.abs(Y[..., None] - constellation)
    return constellation[np.argmin(d, axis=-1)]


def ser(decided, truth) -> float:
    """Fraction of entries where the decided symbol differs from the truth."""
    decided = np.asarray(decided)
    truth = np.asarray(truth)
    if decided.shape != truth.shape:
        raise ValueError(f"shape mismatch: {decided.shape} vs {truth.shape}")
    return float(np.mean(decided != truth))


def detection_probability(snr_linear, p_fa: float):
    """Detection probability of a coherent nonfluctuating point target.

    Pd = MarcumQ_1(sqrt(2 snr), sqrt(-2 ln p_fa)), computed through the
    noncentral chi-square survival function with 2 degrees of freedom. At
    zero SNR this equals p_fa exactly (the CFAR operating point).
    """
    if not 0.0 < p_fa < 1.0:
        raise ValueError(f"p_fa must be in (0, 1), got {p_fa}")
    snr = np.asarray(snr_linear, dtype=float)
    if np.any(snr < 0):
        raise ValueError("snr_linear must be >= 0")
    threshold = -2.0 * np.log(p_fa)
    pd = ncx2.sf(threshold, 2, 2.0 * snr)
    pd = np.where(snr == 0.0, p_fa, pd)
    if np.ndim(snr_linear) == 0:
        return float(pd)
    return pd
