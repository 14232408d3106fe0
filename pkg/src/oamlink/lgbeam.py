"""Laguerre-Gaussian vortex modes.

Amplitude, intensity and peak-ring evaluation for the modes used to weight
the transmitter ring.  All functions broadcast over numpy arrays of ``rho``
(and ``theta``/``z`` where accepted).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class LGMode:
    """Laguerre-Gaussian mode parameters.

    Attributes:
        charge: topological charge ``l`` (any sign).
        radial_index: radial index ``p >= 0``.
        waist: beam waist ``w0`` in meters.
        wavenumber: ``k = 2*pi/lambda`` in rad/m.
    """

    charge: int
    radial_index: int = 0
    waist: float = 1.0
    wavenumber: float = 2.0 * math.pi

    def __post_init__(self):
        if self.waist <= 0:
            raise ValueError(f"waist must be positive, got {self.waist}")
        if self.wavenumber <= 0:
            raise ValueError(f"wavenumber must be positive, got {self.wavenumber}")
        if self.radial_index < 0:
            raise ValueError(f"radial_index must be >= 0, got {self.radial_index}")

    @property
    def rayleigh_range(self) -> float:
        return self.wavenumber * self.waist**2 / 2.0

    def width(self, z):
        """Local beam width w(z)."""
        zr = self.rayleigh_range
        return self.waist * np.sqrt(1.0 + (np.asarray(z, dtype=float) / zr) ** 2)

    def gouy_phase(self, z):
        order = 2 * self.radial_index + abs(self.charge) + 1
        return order * np.arctan(np.asarray(z, dtype=float) / self.rayleigh_range)


def assoc_laguerre(p: int, alpha: float, x):
    """Generalized Laguerre polynomial L_p^alpha(x) by upward recurrence."""
    if p < 0:
        raise ValueError(f"p must be >= 0, got {p}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if p == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + alpha - x
    for n in range(2, p + 1):
        prev, cur = cur, ((2 * n - 1 + alpha - x) * cur - (n - 1 + alpha) * prev) / n
    return cur if cur.ndim else float(cur)


def _norm(p: int, m: int) -> float:
    # sqrt(2 p! / (pi (p+m)!)) through log-gamma so large m cannot overflow
    return math.sqrt(2.0 / math.pi * math.exp(math.lgamma(p + 1) - math.lgamma(p + m + 1)))


def lg_amplitude(mode: LGMode, rho, theta):
    """Source-plane amplitude u_{l,p}(rho, theta, 0) including exp(i l theta)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be non-negative")
    m = abs(mode.charge)
    w0 = mode.waist
    s = rho / w0
    radial = (
        _norm(mode.radial_index, m)
        / w0
        * (s * math.sqrt(2.0)) ** m
        * np.exp(-(s**2))
        * assoc_laguerre(mode.radial_index, m, 2.0 * s**2)
    )
    return radial * np.exp(1j * mode.charge * np.asarray(theta, dtype=float))


def lg_amplitude_full(mode: LGMode, rho, theta, z):
    """Paraxial amplitude at axial distance ``z`` with curvature and Gouy phases."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be non-negative")
    z = np.asarray(z, dtype=float)
    m = abs(mode.charge)
    wz = mode.width(z)
    zr = mode.rayleigh_range
    s = rho / wz
    radial = (
        _norm(mode.radial_index, m)
        / wz
        * (s * math.sqrt(2.0)) ** m
        * np.exp(-(s**2))
        * assoc_laguerre(mode.radial_index, m, 2.0 * s**2)
    )
    curvature = np.exp(-1j * mode.wavenumber * rho**2 * z / (2.0 * (zr**2 + z**2)))
    return (
        radial
        * np.exp(1j * mode.charge * np.asarray(theta, dtype=float))
        * curvature
        * np.exp(-1j * mode.gouy_phase(z))
    )


def lg_intensity(mode: LGMode, rho):
    """Intensity of the p = 0 mode at the source plane (independent of theta)."""
    if mode.radial_index != 0:
        raise ValueError("closed-form intensity is defined for radial_index 0 only; "
                         "use abs(lg_amplitude(...))**2")
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rho must be non-negative")
    m = abs(mode.charge)
    w0 = mode.waist
    u = 2.0 * rho**2 / w0**2
    lag = assoc_laguerre(0, m, u)
    return 2.0 / (math.pi * math.gamma(m + 1) * w0**2) * u**m * lag**2 * np.exp(-u)


def radius_residual(l: int, w0: float, radius: float) -> float:
    """Residual of the peak-ring condition (2/|l|)^|l| (R/w0)^(2|l|) e^(-2R^2/w0^2) - e^(-|l|)."""
    m = abs(l)
    r = radius / w0
    return (2.0 / m) ** m * r ** (2 * m) * math.exp(-2.0 * r * r) - math.exp(-m)


def max_intensity_radius(l: int, w0: float) -> float:
    """Radius of the bright ring of the p = 0 mode with charge ``l``.

    Golden-section search on log-intensity over (0, 2 w0 sqrt|l|], then Newton
    iterations on its derivative.
    """
    if l == 0:
        raise ValueError("charge 0 has no off-axis intensity maximum")
    if w0 <= 0:
        raise ValueError(f"w0 must be positive, got {w0}")
    m = abs(l)

    # log I up to a constant; the w0**2 scaling keeps it O(1)
    def log_i(r):
        return 2.0 * m * math.log(r / w0) - 2.0 * (r / w0) ** 2

    lo, hi = 0.0, 2.0 * w0 * math.sqrt(m)
    a = hi - _GOLDEN * (hi - lo)
    b = lo + _GOLDEN * (hi - lo)
    fa, fb = log_i(a), log_i(b)
    while hi - lo > 1e-10 * w0:
        if fa < fb:
            lo, a, fa = a, b, fb
            b = lo + _GOLDEN * (hi - lo)
            fb = log_i(b)
        else:
            hi, b, fb = b, a, fa
            a = hi - _GOLDEN * (hi - lo)
            fa = log_i(a)
    r = 0.5 * (lo + hi)

    for _ in range(8):
        g = 2.0 * m / r - 4.0 * r / w0**2
        h = -2.0 * m / r**2 - 4.0 / w0**2
        step = g / h
        r -= step
        if abs(step) <= 1e-15 * r:
            break
    return r


def peak_intensity(l: int, w0: float) -> float:
    """Intensity on the bright ring (on axis for l = 0)."""
    if w0 <= 0:
        raise ValueError(f"w0 must be positive, got {w0}")
    mode = LGMode(charge=l, waist=w0)
    rho = 0.0 if l == 0 else max_intensity_radius(l, w0)
    return float(lg_intensity(mode, rho))
