"""Transmitter ring, OOK baseband and multiplexed element excitations."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lgbeam import peak_intensity

PREAMBLE = (1, 0, 1, 0, 1, 1, 0, 0)


class TxError(ValueError):
    pass


@dataclass(frozen=True)
class RingArray:
    n: int
    radius: float
    element_angles: np.ndarray = field(repr=False)
    element_positions: np.ndarray = field(repr=False)


def ring_positions(n: int, radius: float) -> RingArray:
    """Place ``n`` elements uniformly on a circle in the z = 0 plane, element 0 on +x."""
    if n < 3:
        raise TxError(f"a ring needs at least 3 elements, got {n}")
    if radius <= 0:
        raise TxError(f"ring radius must be positive, got {radius}")
    angles = 2.0 * np.pi * np.arange(n) / n
    pos = np.column_stack([radius * np.cos(angles), radius * np.sin(angles), np.zeros(n)])
    return RingArray(n=n, radius=float(radius), element_angles=angles, element_positions=pos)


@dataclass(frozen=True)
class ChannelPlan:
    """Ordered OAM charges with their per-channel amplitude scale.

    ``symbol_periods`` is the number of carrier periods per OOK symbol.
    """

    charges: tuple
    amplitudes: tuple
    carrier_freq: float
    symbol_periods: int = 4

    def __post_init__(self):
        if len(self.charges) == 0:
            raise TxError("channel plan needs at least one charge")
        if len(set(self.charges)) != len(self.charges):
            raise TxError(f"charges must be distinct: {self.charges}")
        if any(int(l) == 0 for l in self.charges):
            raise TxError("charge 0 carries no vortex and is not a channel")
        if len(self.amplitudes) != len(self.charges):
            raise TxError("one amplitude per charge required")
        if any(not a > 0 for a in self.amplitudes):
            raise TxError(f"amplitudes must be positive: {self.amplitudes}")
        if not self.carrier_freq > 0:
            raise TxError("carrier_freq must be positive")
        if self.symbol_periods < 1:
            raise TxError("symbol_periods must be >= 1")

    @property
    def n_channels(self) -> int:
        return len(self.charges)

    @property
    def baud(self) -> float:
        return self.carrier_freq / self.symbol_periods

    def check_aliasing(self, n: int) -> None:
        """Raise if two charges are indistinguishable on an ``n``-element ring."""
        seen = {}
        for l in self.charges:
            r = l % n
            if r in seen:
                raise TxError(f"charges {seen[r]:+d} and {l:+d} alias on a {n}-element ring")
            seen[r] = l

    def subset(self, charges: Sequence[int]) -> "ChannelPlan":
        idx = [self.charges.index(l) for l in charges]
        return ChannelPlan(tuple(self.charges[i] for i in idx),
                           tuple(self.amplitudes[i] for i in idx),
                           self.carrier_freq, self.symbol_periods)


def make_plan(charges, waist, carrier_freq, symbol_periods=4, amplitude="per-charge"):
    """Build a plan whose amplitudes are the peak ring intensities at ``waist``.

    ``amplitude="uniform"`` scales every channel by the |l| = 1 peak instead.
    """
    charges = tuple(int(l) for l in charges)
    if amplitude == "per-charge":
        amps = tuple(peak_intensity(l, waist) for l in charges)
    elif amplitude == "uniform":
        amps = (peak_intensity(1, waist),) * len(charges)
    else:
        raise TxError(f"unknown amplitude mode {amplitude!r}")
    return ChannelPlan(charges, amps, float(carrier_freq), int(symbol_periods))


@dataclass
class ComplexWaveform:
    samples: np.ndarray
    sample_rate: float
    t0: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise TxError("a waveform needs a 1-D array of at least one sample")
        if not self.sample_rate > 0:
            raise TxError("sample_rate must be positive")

    def __len__(self):
        return self.samples.size

    def times(self) -> np.ndarray:
        return sample_times(self.samples.size, self.sample_rate, self.t0)


def sample_times(n: int, sample_rate: float, t0: float = 0.0) -> np.ndarray:
    n0 = t0 * sample_rate
    if abs(n0 - round(n0)) < 1e-6:
        # integer sample offset: same clock values as an unsplit frame
        return (round(n0) + np.arange(n)) / sample_rate
    return t0 + np.arange(n) / sample_rate


@dataclass
class BitMatrix:
    """Per-channel bit streams, ``bits[channel, symbol]``.

    ``erased`` lists channel indices the receiver could not calibrate.
    """

    bits: np.ndarray
    preamble_len: int = 0
    erased: tuple = ()

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2:
            raise TxError("bits must be a 2-D channels x symbols array")
        if np.any(self.bits > 1):
            raise TxError("bits must be 0 or 1")
        if self.preamble_len and self.preamble_len >= self.n_symbols:
            raise TxError("preamble must be shorter than the frame")
        if self.preamble_len:
            ref = np.asarray(PREAMBLE[: self.preamble_len], dtype=np.uint8)
            if not np.all(self.bits[:, : self.preamble_len] == ref):
                raise TxError("frame does not start with the fixed preamble")

    @property
    def n_channels(self) -> int:
        return self.bits.shape[0]

    @property
    def n_symbols(self) -> int:
        return self.bits.shape[1]

    @property
    def payload(self) -> np.ndarray:
        return self.bits[:, self.preamble_len:]


def frame_build(payload: BitMatrix) -> BitMatrix:
    """Prepend the calibration preamble to every channel row."""
    if payload.n_symbols < 1:
        raise TxError("payload must hold at least one symbol per channel")
    pre = np.tile(np.asarray(PREAMBLE, dtype=np.uint8), (payload.n_channels, 1))
    return BitMatrix(np.hstack([pre, payload.bits]), preamble_len=len(PREAMBLE))


def ook_baseband(bits, samples_per_symbol: int) -> np.ndarray:
    """Rectangular NRZ on-off keying: each bit held for ``samples_per_symbol`` samples."""
    bits = np.asarray(bits)
    if bits.size == 0:
        raise TxError("empty bit sequence")
    if samples_per_symbol < 1:
        raise TxError("samples_per_symbol must be >= 1")
    return np.repeat(bits.astype(float), samples_per_symbol, axis=-1)


def samples_per_symbol(plan: ChannelPlan, sample_rate: float) -> int:
    sps = sample_rate * plan.symbol_periods / plan.carrier_freq
    if abs(sps - round(sps)) > 1e-9 * sps:
        raise TxError(f"sample rate {sample_rate} Hz gives a non-integer "
                      f"{sps} samples per symbol")
    return int(round(sps))


def excitation_matrix(array: RingArray, plan: ChannelPlan) -> np.ndarray:
    """Complex element weights, shape (n_elements, n_channels): A_l exp(i l theta_i)."""
    l = np.asarray(plan.charges, dtype=float)
    amps = np.asarray(plan.amplitudes, dtype=float)
    return amps[None, :] * np.exp(1j * np.outer(array.element_angles, l))


def multiplex_excitations(array: RingArray, plan: ChannelPlan, payload: BitMatrix,
                          sample_rate: float, start_sample: int = 0) -> list[ComplexWaveform]:
    """Element drive signals sum_l S_l(t) A_l exp(i(w t + l theta_i)).

    ``payload`` rows follow ``plan.charges``.  ``start_sample`` offsets the carrier
    clock so a long frame can be synthesized block by block with identical samples.
    """
    if payload.n_channels != plan.n_channels:
        raise TxError(f"payload has {payload.n_channels} rows for "
                      f"{plan.n_channels} charges")
    plan.check_aliasing(array.n)
    if sample_rate < 4 * plan.carrier_freq:
        raise TxError(f"sample rate {sample_rate} Hz undersamples the "
                      f"{plan.carrier_freq} Hz carrier (need >= 4x)")
    sps = samples_per_symbol(plan, sample_rate)
    base = ook_baseband(payload.bits, sps)
    t = (start_sample + np.arange(base.shape[1])) / sample_rate
    carrier = np.exp(2j * np.pi * plan.carrier_freq * t)
    drive = (excitation_matrix(array, plan) @ base) * carrier[None, :]
    t0 = start_sample / sample_rate
    return [ComplexWaveform(row, sample_rate, t0) for row in drive]


def azimuthal_overlap(n: int, l1: int, l2: int) -> complex:
    """(1/n) sum_i exp(i (l1 - l2) theta_i) on an n-element ring."""
    theta = 2.0 * np.pi * np.arange(n) / n
    return complex(np.mean(np.exp(1j * (l1 - l2) * theta)))
