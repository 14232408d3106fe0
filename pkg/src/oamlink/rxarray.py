"""Receiver grids, inverse-spiral-phase demultiplexing and OOK decisions."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .channel import TransferMatrix
from .txarray import (PREAMBLE, BitMatrix, ChannelPlan, ComplexWaveform, RingArray,
                      excitation_matrix, sample_times)

# Coherent channel gain below this fraction of its incoherent bound is treated
# as numerically absent (e.g. every l != 0 on the beam axis).
RESOLVABLE_FLOOR = 1e-14


class RxError(ValueError):
    pass


class CalibrationError(RxError):
    pass


@dataclass(frozen=True)
class Layout:
    """Receiver grid descriptor; ``width``/``height`` in wavelengths."""

    rows: int
    cols: int
    width: float = 1.5
    height: float = 1.5
    coverage: str = "full"

    @property
    def name(self) -> str:
        return f"{self.coverage}-{self.rows}x{self.cols}@{self.width:g}x{self.height:g}"


LAYOUTS = {
    "full-8x8": Layout(8, 8),
    "full-4x4": Layout(4, 4),
    "half-4x2": Layout(4, 2, 1.5, 0.75, "half"),
    "half-4x4": Layout(4, 4, 1.5, 0.75, "half"),
    # finer half-coverage grids
    "half-8x4": Layout(8, 4, 1.5, 0.75, "half"),
    "half-16x4": Layout(16, 4, 1.5, 0.75, "half"),
    "axis-1x1": Layout(1, 1),
}

_LAYOUT_RE = re.compile(r"^(full|half)-(\d+)x(\d+)(?:@([0-9.]+)x([0-9.]+))?$")


def parse_layout(spec) -> Layout:
    """Resolve a named layout or ``full|half-RxC[@WxH]`` (area in wavelengths)."""
    if isinstance(spec, Layout):
        return spec
    if spec in LAYOUTS:
        return LAYOUTS[spec]
    m = _LAYOUT_RE.match(spec)
    if not m:
        raise RxError(f"unknown layout {spec!r}")
    coverage, rows, cols, w, h = m.groups()
    if w is None:
        w, h = 1.5, (0.75 if coverage == "half" else 1.5)
    return Layout(int(rows), int(cols), float(w), float(h), coverage)


@dataclass(frozen=True)
class ReceiverGrid:
    positions: np.ndarray = field(repr=False)  # (m, 3)
    layout: Layout
    standoff: float
    theta: np.ndarray = field(repr=False)
    rho: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.positions.shape[0]


def _axis(count, lo, hi):
    if count == 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, count)


def grid_positions(layout, standoff: float, wavelength: float) -> ReceiverGrid:
    """Uniform grid spanning the layout area edge to edge on the plane z = standoff.

    Full layouts are centered on the beam axis; half layouts cover 0 <= y <= height.
    """
    layout = parse_layout(layout)
    if layout.rows < 1 or layout.cols < 1:
        raise RxError("grid needs at least one row and one column")
    if not (layout.width > 0 and layout.height > 0):
        raise RxError("grid area must be positive")
    if standoff <= 0:
        raise RxError("standoff must be positive")
    w = layout.width * wavelength
    h = layout.height * wavelength
    xs = _axis(layout.cols, -w / 2, w / 2)
    if layout.coverage == "half":
        ys = _axis(layout.rows, 0.0, h)
    elif layout.coverage == "full":
        ys = _axis(layout.rows, -h / 2, h / 2)
    else:
        raise RxError(f"unknown coverage {layout.coverage!r}")
    gx, gy = np.meshgrid(xs, ys)
    x, y = gx.ravel(), gy.ravel()
    pos = np.column_stack([x, y, np.full(x.size, float(standoff))])
    return ReceiverGrid(pos, layout, float(standoff), np.arctan2(y, x), np.hypot(x, y))


def projection_matrix(grid: ReceiverGrid, charges: Sequence[int]) -> np.ndarray:
    """Inverse spiral phases exp(-i l_q theta_r), shape (n_charges, n_rx)."""
    return np.exp(-1j * np.outer(np.asarray(charges, dtype=float), grid.theta))


def _downconvert(series: np.ndarray, fs: float, t0: float, carrier_freq: float) -> np.ndarray:
    t = sample_times(series.shape[-1], fs, t0)
    return series * np.exp(-2j * np.pi * carrier_freq * t)


def demux_series(rx: np.ndarray, grid: ReceiverGrid, charges: Sequence[int],
                 carrier_freq: float, sample_rate: float, t0: float = 0.0) -> np.ndarray:
    """Array form of :func:`demux_channel` for several charges: (n_charges, n_samples)."""
    if rx.shape[0] != grid.size:
        raise RxError(f"{rx.shape[0]} receiver streams for a {grid.size}-point grid")
    return _downconvert(projection_matrix(grid, charges) @ rx, sample_rate, t0, carrier_freq)


def demux_channel(rx_waveforms: Sequence[ComplexWaveform], grid: ReceiverGrid, l_q: int,
                  carrier_freq: float) -> ComplexWaveform:
    """D_q(t) = sum_r p_r(t) exp(-i l_q theta_r) exp(-i w t)."""
    if len(rx_waveforms) != grid.size:
        raise RxError(f"{len(rx_waveforms)} receiver waveforms for a {grid.size}-point grid")
    first = rx_waveforms[0]
    for w in rx_waveforms:
        if w.sample_rate != first.sample_rate or len(w) != len(first) or w.t0 != first.t0:
            raise RxError("receiver waveforms must share sample rate, length and start time")
    rx = np.vstack([w.samples for w in rx_waveforms])
    d = demux_series(rx, grid, [l_q], carrier_freq, first.sample_rate, first.t0)[0]
    return ComplexWaveform(d, first.sample_rate, first.t0)


def coupling_matrix(matrix: TransferMatrix, array: RingArray, plan: ChannelPlan,
                    grid: ReceiverGrid) -> np.ndarray:
    """Projected channel response C[q, l]: demux output of charge q per unit S_l.

    The projection alone leaves residual coupling whenever l - q is a multiple of
    the grid's rotational symmetry order (4 for a square grid) or the azimuthal
    coverage is partial; this matrix lets the receiver remove it.
    """
    h = matrix.gains @ excitation_matrix(array, plan)
    return projection_matrix(grid, plan.charges) @ h


def resolvable_channels(matrix: TransferMatrix, array: RingArray, plan: ChannelPlan,
                        grid: ReceiverGrid) -> np.ndarray:
    """Boolean mask of channels with numerically nonzero field on the grid."""
    e = excitation_matrix(array, plan)
    coherent = np.abs(matrix.gains @ e).sum(axis=0)
    incoherent = (np.abs(matrix.gains) @ np.abs(e)).sum(axis=0)
    return coherent > RESOLVABLE_FLOOR * incoherent


def unmixing_matrix(coupling: np.ndarray, resolvable: Optional[np.ndarray] = None) -> np.ndarray:
    """Left inverse of the coupling matrix, zero rows for unresolvable channels.

    Columns are equilibrated before the pseudo-inverse so that channels whose
    field is orders of magnitude weaker than their neighbours stay recoverable.
    """
    n = coupling.shape[1]
    keep = np.ones(n, dtype=bool) if resolvable is None else np.asarray(resolvable, dtype=bool)
    out = np.zeros((n, coupling.shape[0]), dtype=complex)
    if keep.any():
        c = coupling[:, keep]
        scale = np.linalg.norm(c, axis=0)
        out[keep] = np.linalg.pinv(c / scale) / scale[:, None]
    return out


def cancel_crosstalk(series: np.ndarray, coupling: np.ndarray,
                     resolvable: Optional[np.ndarray] = None) -> np.ndarray:
    """Least-squares solution S of coupling @ S = series (per-channel baseband estimates)."""
    return unmixing_matrix(coupling, resolvable) @ series


def symbol_statistics(series: np.ndarray, samples_per_symbol: int, n_symbols: int) -> np.ndarray:
    """|mean over each symbol| of a downconverted series (last axis is time)."""
    need = n_symbols * samples_per_symbol
    if series.shape[-1] < need:
        raise RxError(f"series holds {series.shape[-1]} samples, need {need}")
    blocks = series[..., :need].reshape(series.shape[:-1] + (n_symbols, samples_per_symbol))
    return np.abs(blocks.mean(axis=-1))


def calibrate_threshold(stats, preamble_bits) -> float:
    """Midpoint between the mean 'on' and mean 'off' statistics of the preamble."""
    stats = np.asarray(stats, dtype=float)
    bits = np.asarray(preamble_bits).astype(bool)
    if bits.all() or not bits.any():
        raise CalibrationError("preamble needs both one- and zero-symbols")
    on, off = stats[bits].mean(), stats[~bits].mean()
    if not on > off:
        raise CalibrationError(f"preamble on-level {on:.3g} does not exceed off-level {off:.3g}")
    return 0.5 * (on + off)


@dataclass
class DecisionRecord:
    charge: int
    statistics: np.ndarray = field(repr=False)
    threshold: float
    bits: np.ndarray = field(repr=False)


def demodulate_ook(series, samples_per_symbol: int, n_symbols: int, threshold: float,
                   charge: int = 0):
    """Per-symbol |mean| statistic against ``threshold``; returns (bits, DecisionRecord)."""
    data = series.samples if isinstance(series, ComplexWaveform) else np.asarray(series)
    stats = symbol_statistics(data, samples_per_symbol, n_symbols)
    bits = (stats >= threshold).astype(np.uint8)
    return bits, DecisionRecord(charge, stats, float(threshold), bits)


@dataclass(frozen=True)
class Framing:
    samples_per_symbol: int
    n_symbols: int
    preamble: tuple = PREAMBLE


def decide_series(series: np.ndarray, charges: Sequence[int], framing: Framing):
    """Threshold every channel's baseband estimate; returns (payload BitMatrix, records).

    Channels that fail calibration are erased (zero bits, index listed in
    ``erased``) and get no record.
    """
    npre = len(framing.preamble)
    stats = symbol_statistics(series, framing.samples_per_symbol, framing.n_symbols)
    out = np.zeros((len(charges), framing.n_symbols - npre), dtype=np.uint8)
    erased, records = [], {}
    for q, l in enumerate(charges):
        try:
            thr = calibrate_threshold(stats[q, :npre], framing.preamble)
        except CalibrationError:
            erased.append(q)
            continue
        bits = (stats[q] >= thr).astype(np.uint8)
        records[q] = DecisionRecord(int(l), stats[q], thr, bits)
        out[q] = bits[npre:]
    return BitMatrix(out, erased=tuple(erased)), records


def baseband_estimates(rx: np.ndarray, grid: ReceiverGrid, plan: ChannelPlan, sample_rate: float,
                       t0: float = 0.0, coupling: Optional[np.ndarray] = None,
                       resolvable: Optional[np.ndarray] = None) -> np.ndarray:
    """Demultiplex all plan charges, then remove residual coupling when it is supplied."""
    d = demux_series(rx, grid, plan.charges, plan.carrier_freq, sample_rate, t0)
    if coupling is None:
        return d
    return cancel_crosstalk(d, coupling, resolvable)


def decide_frame(rx_waveforms: Sequence[ComplexWaveform], grid: ReceiverGrid, plan: ChannelPlan,
                 framing: Framing, coupling: Optional[np.ndarray] = None,
                 resolvable: Optional[np.ndarray] = None) -> BitMatrix:
    """Recover the payload of every plan charge from the receiver waveforms.

    Without ``coupling`` each channel is the plain inverse-spiral projection.
    """
    first = rx_waveforms[0]
    rx = np.vstack([w.samples for w in rx_waveforms])
    est = baseband_estimates(rx, grid, plan, first.sample_rate, first.t0, coupling, resolvable)
    if resolvable is not None:
        est[~np.asarray(resolvable, dtype=bool)] = 0.0
    payload, _ = decide_series(est, plan.charges, framing)
    return payload
