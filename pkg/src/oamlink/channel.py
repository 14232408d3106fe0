"""Free-field propagation and additive white Gaussian noise.

Each transmitter element is a monopole; receiver ``r`` picks up element ``s``
through the free-space Green's function ``exp(i k d) / (4 pi d)``.  The model is
narrowband: the complex gain multiplies the analytic signal sample by sample and
the common propagation delay is dropped.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .txarray import ComplexWaveform

SOUND_SPEED = 1500.0


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class TransferMatrix:
    gains: np.ndarray  # (n_rx, n_tx)
    geometry_hash: str

    @property
    def n_rx(self) -> int:
        return self.gains.shape[0]

    @property
    def n_tx(self) -> int:
        return self.gains.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    snr_db: Optional[float] = None
    seed: int = 0
    enabled: bool = True

    @property
    def active(self) -> bool:
        return self.enabled and self.snr_db is not None and math.isfinite(self.snr_db)


def _geometry_hash(tx, rx, k) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(tx, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(rx, dtype="<f8").tobytes())
    h.update(np.float64(k).astype("<f8").tobytes())
    return h.hexdigest()[:16]


def transfer_matrix(tx, rx, k: float) -> TransferMatrix:
    """Green's-function gains from every tx point (columns) to every rx point (rows)."""
    tx = np.atleast_2d(np.asarray(tx, dtype=float))
    rx = np.atleast_2d(np.asarray(rx, dtype=float))
    d = np.linalg.norm(rx[:, None, :] - tx[None, :, :], axis=-1)
    if np.any(d <= 0):
        raise ChannelError("a receiver coincides with a transmitter element")
    gains = np.exp(1j * k * d) / (4.0 * np.pi * d)
    return TransferMatrix(gains, _geometry_hash(tx, rx, k))


def _stack(waveforms: Sequence[ComplexWaveform]):
    if len(waveforms) == 0:
        raise ChannelError("no waveforms")
    first = waveforms[0]
    for w in waveforms[1:]:
        if len(w) != len(first) or w.sample_rate != first.sample_rate or w.t0 != first.t0:
            raise ChannelError("waveforms must share length, sample rate and start time")
    return np.vstack([w.samples for w in waveforms]), first.sample_rate, first.t0


def propagate(matrix: TransferMatrix, tx_waveforms: Sequence[ComplexWaveform]) -> list[ComplexWaveform]:
    """Apply the transfer matrix to the transmitter waveforms: p_r(t) = sum_s g_rs U_s(t)."""
    u, fs, t0 = _stack(tx_waveforms)
    if u.shape[0] != matrix.n_tx:
        raise ChannelError(f"{u.shape[0]} waveforms for a {matrix.n_tx}-element matrix")
    p = matrix.gains @ u
    return [ComplexWaveform(row, fs, t0) for row in p]


class NoiseSource:
    """Unit-variance circular complex Gaussian noise, one stream per receiver.

    Stream ``r`` is spawned from ``seed`` and consumed in time order, so the
    realization does not depend on how a frame is split into blocks.
    """

    def __init__(self, seed: int, n_streams: int):
        children = np.random.SeedSequence(seed).spawn(n_streams)
        self._rngs = [np.random.Generator(np.random.PCG64(c)) for c in children]

    def draw(self, n_samples: int) -> np.ndarray:
        out = np.empty((len(self._rngs), n_samples), dtype=complex)
        for r, rng in enumerate(self._rngs):
            # interleaved (re, im) pairs keep the stream independent of block size
            out[r] = rng.standard_normal(2 * n_samples).view(complex) * math.sqrt(0.5)
        return out


def noise_variance(signal_power: float, snr_db: float) -> float:
    return signal_power / 10.0 ** (snr_db / 10.0)


def signal_power(waveforms: Sequence[ComplexWaveform]) -> float:
    """Mean squared magnitude over all receivers and samples."""
    p, _, _ = _stack(waveforms)
    return float(np.mean(np.abs(p) ** 2))


def add_awgn(rx_waveforms: Sequence[ComplexWaveform], spec: NoiseSpec) -> list[ComplexWaveform]:
    """Add noise calibrated to ``spec.snr_db`` against the frame-averaged signal power."""
    if not spec.active:
        return list(rx_waveforms)
    p, fs, t0 = _stack(rx_waveforms)
    sigma = math.sqrt(noise_variance(float(np.mean(np.abs(p) ** 2)), spec.snr_db))
    noisy = p + sigma * NoiseSource(spec.seed, p.shape[0]).draw(p.shape[1])
    return [ComplexWaveform(row, fs, t0) for row in noisy]
