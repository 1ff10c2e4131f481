"""Finite spectral model of the governing self-adjoint operator.

The operator acts diagonally on an orthonormal basis, with eigenvalue
``lam[k]**2`` at mode ``k`` (so ``lam[k]`` is the frequency of that mode).
All downstream objects are coordinate vectors in this basis, which turns
fractional powers, frequency splits, and weighted norms into elementwise
array operations.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NegativePowerOnKernel, NonpositiveCutoff


@dataclass(frozen=True)
class Spectrum:
    """Ordered finite list of nonnegative mode frequencies."""

    lam: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("spectrum must be a nonempty 1-d array")
        if not np.all(np.isfinite(lam)) or np.any(lam < 0):
            raise ValueError("frequencies must be finite and nonnegative")
        if np.any(np.diff(lam) < 0):
            raise ValueError("frequencies must be sorted nondecreasing")
        lam = lam.copy()
        lam.flags.writeable = False
        object.__setattr__(self, "lam", lam)
        lam2 = lam * lam
        lam2.flags.writeable = False
        object.__setattr__(self, "lam2", lam2)

    @property
    def n(self) -> int:
        return self.lam.size

    def power_weights(self, alpha: float) -> np.ndarray:
        """Eigenvalues of the alpha-th operator power: lam**(2*alpha) per mode.

        Kernel modes (lam == 0) get weight 0 for alpha > 0 and weight 1 for
        alpha == 0; for alpha < 0 the caller must keep the kernel masked.
        """
        lam = self.lam
        w = np.empty_like(lam)
        nz = lam > 0.0
        w[nz] = lam[nz] ** (2.0 * alpha)
        w[~nz] = 1.0 if alpha == 0.0 else 0.0
        return w

    def check_vector(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.n,):
            raise ValueError(f"vector length {z.shape} does not match spectrum length {self.n}")
        return z

    def to_json(self) -> str:
        return json.dumps(list(self.lam))

    @classmethod
    def from_json(cls, text: str) -> "Spectrum":
        values = json.loads(text)
        if not isinstance(values, list):
            raise ValueError("spectrum JSON must be an array of numbers")
        return cls(np.asarray(values, dtype=float))


def string_spectrum(n: int) -> Spectrum:
    """Integer frequencies lam_k = k, the vibrating-string layout."""
    return Spectrum(np.arange(1, n + 1, dtype=float))


def sqrt_spectrum(n: int) -> Spectrum:
    """Frequencies lam_k = sqrt(k)."""
    return Spectrum(np.sqrt(np.arange(1, n + 1, dtype=float)))


def lacunary_spectrum(n: int) -> Spectrum:
    """Geometric frequencies lam_k = 2**k."""
    return Spectrum(2.0 ** np.arange(1, n + 1, dtype=float))


@dataclass(frozen=True)
class FrequencySplit:
    """Decomposition of a coordinate vector at a frequency cutoff.

    ``low`` keeps modes with lam <= cutoff, ``high`` keeps lam > cutoff;
    both are full-length vectors padded with zeros, so low + high
    reconstructs the input exactly.
    """

    cutoff: float
    low: np.ndarray
    high: np.ndarray


def apply_power(spec: Spectrum, z: np.ndarray, alpha: float) -> np.ndarray:
    """Coordinates of A**alpha z, i.e. lam**(2*alpha) * z per mode."""
    z = spec.check_vector(z)
    if alpha < 0.0:
        kernel = spec.lam == 0.0
        if np.any(kernel & (z != 0.0)):
            raise NegativePowerOnKernel(
                "negative power undefined on kernel modes with nonzero coordinate"
            )
    return spec.power_weights(alpha) * z


def split(spec: Spectrum, z: np.ndarray, cutoff: float) -> FrequencySplit:
    """Split z into low (lam <= cutoff) and high (lam > cutoff) parts."""
    z = spec.check_vector(z)
    if not cutoff > 0.0:
        raise NonpositiveCutoff(f"cutoff must be positive, got {cutoff}")
    is_low = spec.lam <= cutoff
    low = np.where(is_low, z, 0.0)
    high = np.where(is_low, 0.0, z)
    return FrequencySplit(cutoff=float(cutoff), low=low, high=high)


def h_norm_sq(z: np.ndarray) -> float:
    """Plain squared norm of a coordinate vector (Parseval on the truncation)."""
    z = np.asarray(z, dtype=float)
    return float(z @ z)


def power_norm_sq(spec: Spectrum, z: np.ndarray, alpha: float) -> float:
    """Squared norm of A**alpha z: sum of lam**(4*alpha) * z**2."""
    z = spec.check_vector(z)
    w = spec.power_weights(alpha)
    return float(np.sum(w * w * z * z))


def gevrey_norm_sq(spec: Spectrum, z: np.ndarray, weight, alpha: float) -> float:
    """Weighted squared norm: sum of lam**(4*alpha) * exp(phi(lam)) * z**2."""
    if alpha < 0.0:
        raise ValueError("alpha must be nonnegative")
    z = spec.check_vector(z)
    w = spec.power_weights(alpha)
    return float(np.sum(w * w * np.exp(weight(spec.lam)) * z * z))
