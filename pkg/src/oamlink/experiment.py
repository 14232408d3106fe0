"""End-to-end link runs, sweeps, field snapshots and the channel-count check."""
from __future__ import annotations

import dataclasses
import io
import logging
import math
import os
import time
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import channel, codec, rxarray, txarray
from .codec import GrayImage, LinkReport
from .txarray import BitMatrix

log = logging.getLogger(__name__)

DEFAULT_CHARGES = (1, 2, 3, 4, 5, 6, 7, 8)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LinkConfig:
    """Link parameters.  Lengths marked (wavelengths) are multiples of lambda."""

    carrier_freq: float = 10000.0
    sound_speed: float = channel.SOUND_SPEED
    n_elements: int = 20
    ring_radius: float = 1.0  # wavelengths
    standoff: float = 20.0  # wavelengths
    charges: tuple = DEFAULT_CHARGES
    symbol_periods: int = 4
    samples_per_period: int = 16
    layout: str = "full-8x8"
    snr_db: Optional[float] = None
    seed: int = 0
    image: str = "synthetic"
    amplitude: str = "per-charge"
    waist: Optional[float] = None  # wavelengths; None puts the l=1 ring on the elements
    crosstalk: str = "cancel"
    chunk_symbols: int = 1024
    bit_order: str = "msb"

    @property
    def wavelength(self) -> float:
        return self.sound_speed / self.carrier_freq

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def baud(self) -> float:
        return self.carrier_freq / self.symbol_periods

    @property
    def sample_rate(self) -> float:
        return self.carrier_freq * self.samples_per_period

    @property
    def samples_per_symbol(self) -> int:
        return self.symbol_periods * self.samples_per_period

    @property
    def waist_m(self) -> float:
        w = math.sqrt(2.0) * self.ring_radius if self.waist is None else self.waist
        return w * self.wavelength

    def replace(self, **kw) -> "LinkConfig":
        return dataclasses.replace(self, **kw)


# ---------------------------------------------------------------- config text

_FIELDS = {f.name: f for f in dataclasses.fields(LinkConfig)}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    if key == "charges":
        try:
            vals = tuple(int(v) for v in raw.replace(" ", "").split(",") if v)
        except ValueError:
            raise ConfigError(f"charges: cannot parse {raw!r}") from None
        if not vals:
            raise ConfigError("charges: empty list")
        return vals
    if key in ("snr_db", "waist"):
        if raw.lower() in ("", "none", "off"):
            return None
        return float(raw)
    default = _FIELDS[key].default
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment.  Stops at a ``[result]`` section."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line.lower() == "[config]":
                continue
            break
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, raw)
    return out


def make_config(path=None, **overrides) -> LinkConfig:
    values = {}
    if path is not None:
        with open(path) as f:
            values.update(parse_config_text(f.read()))
    for key, val in overrides.items():
        if val is None and key not in ("snr_db", "waist"):
            continue
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _parse_value(key, val) if isinstance(val, str) else val
    if "charges" in values:
        values["charges"] = tuple(int(v) for v in values["charges"])
    return LinkConfig(**values)


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.9g}"
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def format_config(cfg: LinkConfig) -> str:
    return "".join(f"{f} = {_fmt(getattr(cfg, f))}\n" for f in _FIELDS)


# ---------------------------------------------------------------- link model


class Link:
    """Geometry, channel plan and receiver operators derived from a config."""

    def __init__(self, cfg: LinkConfig):
        if cfg.crosstalk not in ("cancel", "projection"):
            raise ConfigError(f"crosstalk must be 'cancel' or 'projection', got {cfg.crosstalk!r}")
        if cfg.bit_order not in ("msb", "lsb"):
            raise ConfigError(f"bit_order must be 'msb' or 'lsb', got {cfg.bit_order!r}")
        if cfg.chunk_symbols < 1:
            raise ConfigError("chunk_symbols must be >= 1")
        self.cfg = cfg
        lam = cfg.wavelength
        self.ring = txarray.ring_positions(cfg.n_elements, cfg.ring_radius * lam)
        self.plan = txarray.make_plan(cfg.charges, cfg.waist_m, cfg.carrier_freq,
                                      cfg.symbol_periods, cfg.amplitude)
        self.plan.check_aliasing(cfg.n_elements)
        self.grid = rxarray.grid_positions(cfg.layout, cfg.standoff * lam, lam)
        self.matrix = channel.transfer_matrix(self.ring.element_positions, self.grid.positions,
                                              cfg.wavenumber)
        self.sps = txarray.samples_per_symbol(self.plan, cfg.sample_rate)
        self.resolvable = rxarray.resolvable_channels(self.matrix, self.ring, self.plan, self.grid)
        if cfg.crosstalk == "cancel":
            self.coupling = rxarray.coupling_matrix(self.matrix, self.ring, self.plan, self.grid)
            self.unmix = rxarray.unmixing_matrix(self.coupling, self.resolvable)
        else:
            self.coupling = None
            self.unmix = np.diag(self.resolvable.astype(complex))

    def _blocks(self, n_symbols: int):
        step = self.cfg.chunk_symbols
        for s0 in range(0, n_symbols, step):
            yield s0, min(s0 + step, n_symbols)

    def received_blocks(self, frame: BitMatrix):
        """Yield (start_sample, noiseless rx array) per symbol block."""
        for s0, s1 in self._blocks(frame.n_symbols):
            block = BitMatrix(frame.bits[:, s0:s1])
            start = s0 * self.sps
            tx = txarray.multiplex_excitations(self.ring, self.plan, block,
                                               self.cfg.sample_rate, start)
            rx = channel.propagate(self.matrix, tx)
            yield start, np.vstack([w.samples for w in rx])

    def _project(self, rx: np.ndarray, start: int) -> np.ndarray:
        fs = self.cfg.sample_rate
        return rxarray.demux_series(rx, self.grid, self.plan.charges,
                                    self.cfg.carrier_freq, fs, start / fs)

    def clean_projection(self, frame: BitMatrix):
        """Demultiplexed noiseless series (n_charges, n_samples) and rx signal power."""
        parts, power, count = [], 0.0, 0
        for start, rx in self.received_blocks(frame):
            power += float(np.sum(rx.real**2 + rx.imag**2))
            count += rx.size
            parts.append(self._project(rx, start))
        return np.hstack(parts), power / count

    def noise_projection(self, seed: int, n_symbols: int) -> np.ndarray:
        """Demultiplexed unit-variance receiver noise for ``seed``.

        Projection is linear, so demux(rx + sigma n) = demux(rx) + sigma demux(n);
        the receiver noise itself is drawn exactly as :func:`channel.add_awgn` draws it.
        """
        src = channel.NoiseSource(seed, self.grid.size)
        parts = []
        for s0, s1 in self._blocks(n_symbols):
            start = s0 * self.sps
            parts.append(self._project(src.draw((s1 - s0) * self.sps), start))
        return np.hstack(parts)

    def decide(self, projected: np.ndarray, n_symbols: int):
        est = self.unmix @ projected
        framing = rxarray.Framing(self.sps, n_symbols)
        return rxarray.decide_series(est, self.plan.charges, framing)


def _frame_for(cfg: LinkConfig, img: GrayImage) -> tuple[BitMatrix, BitMatrix]:
    if len(cfg.charges) != 8:
        raise ConfigError(f"image transport needs 8 charges, got {len(cfg.charges)}")
    payload = codec.image_to_bits(img, 8, cfg.bit_order == "msb")
    return payload, txarray.frame_build(payload)


def contrast(records: dict, sent: BitMatrix, q: int) -> float:
    """(on - off) / (on + off) of the mean payload statistics of channel ``q``.

    Scale free, so estimates that noise has inflated by the unmixing do not
    dominate; 1 is perfect separation, about 0 is none.  Erased channels give 0.
    """
    rec = records.get(q)
    bits = sent.payload[q].astype(bool)
    if rec is None or bits.all() or not bits.any():
        return 0.0
    stats = rec.statistics[len(txarray.PREAMBLE):]
    on, off = stats[bits].mean(), stats[~bits].mean()
    return float((on - off) / (on + off)) if on + off > 0 else 0.0


@dataclass
class _Trial:
    report: LinkReport
    received: BitMatrix
    records: dict


class Simulation:
    """One config and one payload; noiseless projection cached across noise trials."""

    def __init__(self, cfg: LinkConfig, img: Optional[GrayImage] = None):
        self.cfg = cfg
        self.link = Link(cfg)
        self.image = codec.load_image(cfg.image) if img is None else img
        self.payload, self.frame = _frame_for(cfg, self.image)
        self.clean, self.signal_power = self.link.clean_projection(self.frame)

    def noise(self, seed: int) -> np.ndarray:
        return self.link.noise_projection(seed, self.frame.n_symbols)

    def trial(self, snr_db: Optional[float], seed: int,
              noise: Optional[np.ndarray] = None) -> _Trial:
        """Decide one noisy frame; pass ``noise`` to reuse a seed's projection."""
        spec = channel.NoiseSpec(snr_db, seed)
        proj = self.clean
        if spec.active:
            if noise is None:
                noise = self.noise(seed)
            sigma = math.sqrt(channel.noise_variance(self.signal_power, spec.snr_db))
            proj = self.clean + sigma * noise
        received, records = self.link.decide(proj, self.frame.n_symbols)
        rep = codec.ber(self.payload, received)
        rep.snr_db = snr_db if spec.active else None
        rep.geometry = rxarray.parse_layout(self.cfg.layout).name
        return _Trial(rep, received, records)

    def received_image(self, received: BitMatrix) -> GrayImage:
        return codec.bits_to_image(received, self.image.width, self.image.height,
                                   self.cfg.bit_order == "msb")


# ---------------------------------------------------------------- reports / csv


def format_report(cfg: LinkConfig, rep: LinkReport, extra: Optional[dict] = None) -> str:
    lines = ["[config]", format_config(cfg).rstrip("\n"), "", "[result]"]
    fields = {
        "spectral_efficiency_bits_per_symbol": rep.spectral_efficiency,
        "baud": cfg.baud,
        "bit_rate": cfg.baud * rep.spectral_efficiency,
        "wavelength": cfg.wavelength,
        "geometry": rep.geometry,
        "snr_db": rep.snr_db,
        "aggregate_ber": rep.aggregate_ber,
        "bit_errors": rep.bit_errors,
        "total_bits": rep.total_bits,
        "pixel_errors": rep.pixel_errors,
        "per_channel_ber": rep.per_channel_ber,
        "erased_channels": ",".join(f"{cfg.charges[q]:+d}" for q in rep.erased_channels) or "none",
    }
    fields.update(extra or {})
    lines += [f"{k} = {_fmt(v)}" for k, v in fields.items()]
    return "\n".join(lines) + "\n"


def _write_text(path, text: str) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(text)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(float(v)) if isinstance(v, (float, np.floating)) else _fmt(v)
                           for v in row) + "\n")
    _write_text(path, buf.getvalue())


# ---------------------------------------------------------------- operations


def run_link(cfg: LinkConfig, out_dir=None, img: Optional[GrayImage] = None):
    """Transmit the configured image once; returns (LinkReport, received GrayImage).

    With ``out_dir`` writes ``received.pgm`` and ``report.txt``.  The report file
    omits wall-clock runtime so identical configs give identical bytes.
    """
    t_start = time.perf_counter()
    sim = Simulation(cfg, img)
    trial = sim.trial(cfg.snr_db, cfg.seed)
    received = sim.received_image(trial.received)
    rep = trial.report
    rep.runtime = time.perf_counter() - t_start
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        codec.write_pgm(received, os.path.join(out_dir, "received.pgm"))
        extra = {"image_identical": received == sim.image}
        _write_text(os.path.join(out_dir, "report.txt"), format_report(cfg, rep, extra))
    log.info("run_link: BER %.3g in %.2f s", rep.aggregate_ber, rep.runtime)
    return rep, received


def sweep_snr(cfg: LinkConfig, snr_list: Sequence[float], seeds: int, out_path=None):
    """BER for every (snr, seed) pair; seeds are ``cfg.seed + j`` for j < ``seeds``.

    Returns the rows written to the CSV (header in ``rows[0]``).
    """
    if not snr_list:
        raise ConfigError("need at least one SNR point")
    if seeds < 1:
        raise ConfigError("need at least one seed")
    sim = Simulation(cfg)
    header = (["snr_db", "seed"] + [f"ber_l{l:+d}" for l in cfg.charges]
              + ["aggregate_ber", "mean_aggregate_ber"])
    table = {}
    for j in range(seeds):
        seed = cfg.seed + j
        noise = None
        if any(channel.NoiseSpec(snr, seed).active for snr in snr_list):
            noise = sim.noise(seed)
        for i, snr in enumerate(snr_list):
            rep = sim.trial(snr, seed, noise).report
            table[i, j] = [float(snr), seed] + rep.per_channel_ber + [rep.aggregate_ber]
    rows = []
    for i in range(len(snr_list)):
        block = [table[i, j] for j in range(seeds)]
        mean = float(np.mean([r[-1] for r in block]))
        rows += [r + [mean] for r in block]
    if out_path is not None:
        write_csv(out_path, header, rows)
    return [header] + rows


def sweep_geometry(cfg: LinkConfig, layouts: Sequence[str], out_path=None):
    """Compare receiver layouts: noiseless BER and, if ``cfg.snr_db`` is set, noisy BER.

    The per-charge ``contrast`` columns come from the noisy run when there is
    one, otherwise from the noiseless run; ``separation`` is their mean.
    """
    if not layouts:
        raise ConfigError("need at least one layout")
    for name in layouts:
        rxarray.parse_layout(name)
    noisy_on = cfg.snr_db is not None and math.isfinite(cfg.snr_db)
    header = (["layout", "n_receivers", "ber_noiseless", "ber_noisy", "separation"]
              + [f"contrast_l{l:+d}" for l in cfg.charges] + ["erased"])
    rows = []
    for name in layouts:
        sim = Simulation(cfg.replace(layout=name))
        clean = sim.trial(None, cfg.seed)
        noisy = sim.trial(cfg.snr_db, cfg.seed) if noisy_on else None
        ref = noisy or clean
        c = [contrast(ref.records, sim.payload, q) for q in range(len(cfg.charges))]
        erased = clean.report.erased_channels
        rows.append([name, sim.link.grid.size, clean.report.aggregate_ber,
                     noisy.report.aggregate_ber if noisy else None, float(np.mean(c))] + c
                    + [" ".join(f"{cfg.charges[q]:+d}" for q in erased) or "none"])
    if out_path is not None:
        write_csv(out_path, header, rows)
    return [header] + rows


def snapshot_field(cfg: LinkConfig, charges: Sequence[int], nx: int = 64, ny: int = 64,
                   extent: float = 16.0, z: Optional[float] = None, time_instant: float = 0.0,
                   out_prefix=None) -> np.ndarray:
    """Complex pressure over a square plane for the given charges all keyed on.

    The plane spans ``extent`` wavelengths per side at ``z`` wavelengths (default
    the receiver standoff).  Sample (ny // 2, nx // 2) sits on the beam axis.
    Writes ``<prefix>.csv`` (x, y, magnitude, phase, pressure; magnitude and
    pressure normalized to the plane maximum) and ``<prefix>.pgm``.
    """
    charges = tuple(int(l) for l in charges)
    if not charges:
        raise ConfigError("snapshot needs at least one charge")
    lam = cfg.wavelength
    z_m = (cfg.standoff if z is None else z) * lam
    ring = txarray.ring_positions(cfg.n_elements, cfg.ring_radius * lam)
    plan = txarray.make_plan(charges, cfg.waist_m, cfg.carrier_freq, cfg.symbol_periods,
                             cfg.amplitude)
    plan.check_aliasing(cfg.n_elements)
    dx = extent * lam / nx
    dy = extent * lam / ny
    xs = (np.arange(nx) - nx // 2) * dx
    ys = (np.arange(ny) - ny // 2) * dy
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, z_m)])
    tm = channel.transfer_matrix(ring.element_positions, pts, cfg.wavenumber)
    drive = txarray.excitation_matrix(ring, plan).sum(axis=1)
    drive = drive * np.exp(2j * np.pi * cfg.carrier_freq * time_instant)
    field = (tm.gains @ drive).reshape(ny, nx)
    if out_prefix is not None:
        mag = np.abs(field)
        peak = mag.max()
        norm = mag / peak if peak > 0 else mag
        rows = zip(gx.ravel(), gy.ravel(), norm.ravel(), np.angle(field).ravel(),
                   (field.real / peak if peak > 0 else field.real).ravel())
        write_csv(f"{out_prefix}.csv", ["x", "y", "magnitude", "phase", "pressure"], rows)
        codec.write_pgm(GrayImage(nx, ny, np.rint(norm * 255).astype(np.uint8)),
                        f"{out_prefix}.pgm")
    return field


def pixel_charges(pixel: int, charges: Sequence[int], msb_first: bool = True) -> tuple:
    """Charges keyed on while one 8-bit pixel is on the air."""
    bits = [(pixel >> (7 - k)) & 1 for k in range(8)]
    if not msb_first:
        bits = bits[::-1]
    return tuple(l for b, l in zip(bits, charges) if b)


@dataclass(frozen=True)
class LimitVerdict:
    charge: int
    accepted: bool
    reason: str


def check_channel_limit(n_elements: int, charges: Sequence[int]) -> list[LimitVerdict]:
    """Judge each charge against 0 < l <= n and against aliasing with earlier ones."""
    if n_elements < 3:
        raise ConfigError("n_elements must be >= 3")
    out, taken = [], {}
    for l in charges:
        l = int(l)
        if l <= 0:
            out.append(LimitVerdict(l, False, f"outside 0 < l <= {n_elements}"))
        elif l % n_elements in taken:
            out.append(LimitVerdict(l, False, f"aliases {taken[l % n_elements]:+d}"))
        elif l > n_elements:
            out.append(LimitVerdict(l, False, f"outside 0 < l <= {n_elements}"))
        else:
            taken[l % n_elements] = l
            out.append(LimitVerdict(l, True, "ok"))
    return out
