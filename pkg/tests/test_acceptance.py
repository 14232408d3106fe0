"""Acceptance gate: one test per criterion, each recorded for the terminal summary."""
import math
import os
import time

import numpy as np
import pytest
from scipy import integrate

from oamlink import codec
from oamlink.experiment import (LinkConfig, check_channel_limit, run_link, snapshot_field,
                                sweep_geometry, sweep_snr)
from oamlink.lgbeam import LGMode, lg_intensity, max_intensity_radius, radius_residual
from oamlink.txarray import azimuthal_overlap

from .conftest import record_criterion

# mean aggregate BER at 20 dB over seeds 0..19 on the default config, first run: 0.367474365
BER_BASELINE_20DB = 0.3675
SNR_POINTS = [0.0, 5.0, 10.0, 15.0, 20.0, 30.0]


def gate(number, title, passed, detail=""):
    record_criterion(number, title, bool(passed), detail)
    assert passed, f"criterion {number} ({title}) failed: {detail}"


def test_01_radius_analytics():
    t0 = time.perf_counter()
    worst_rel, worst_res = 0.0, 0.0
    for w0 in (0.1, 1.0, 10.0):
        for l in [s * m for m in range(1, 9) for s in (1, -1)]:
            r = max_intensity_radius(l, w0)
            worst_rel = max(worst_rel, abs(r / (w0 * math.sqrt(abs(l) / 2)) - 1))
            worst_res = max(worst_res, abs(radius_residual(l, w0, r)))
    dt = time.perf_counter() - t0
    gate(1, "radius analytics", worst_rel < 1e-9 and worst_res < 1e-12 and dt < 1.0,
         f"rel={worst_rel:.1e} residual={worst_res:.1e} t={dt:.3f}s")


def test_02_mode_normalization():
    t0 = time.perf_counter()
    worst = 0.0
    for l in range(1, 9):
        mode = LGMode(l, waist=1.0)
        val, _ = integrate.quad(lambda r: float(lg_intensity(mode, r)) * r, 0, 12.0,
                                epsabs=1e-13, epsrel=1e-12, limit=200)
        worst = max(worst, abs(2 * math.pi * val - 1))
    dt = time.perf_counter() - t0
    gate(2, "mode normalization", worst < 1e-6 and dt < 5.0, f"max|P-1|={worst:.1e} t={dt:.3f}s")


def test_03_discrete_orthogonality():
    ok, worst_off = True, 0.0
    for l in range(-20, 21):
        for lp in range(-20, 21):
            v = azimuthal_overlap(20, l, lp)
            if (l - lp) % 20 == 0:
                ok &= abs(v - 1) < 1e-12
            else:
                worst_off = max(worst_off, abs(v))
    gate(3, "discrete orthogonality", ok and worst_off < 1e-10, f"max off-diagonal={worst_off:.1e}")


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    t0 = time.perf_counter()
    rep, img = run_link(LinkConfig(), out)
    return rep, img, out, time.perf_counter() - t0


def test_04_noiseless_end_to_end(default_run):
    rep, img, out, dt = default_run
    sent = codec.encode_pgm(codec.synthetic_image(64))
    identical = (out / "received.pgm").read_bytes() == sent
    gate(4, "noiseless end-to-end 64x64", rep.aggregate_ber == 0 and identical and dt < 60,
         f"BER={rep.aggregate_ber} identical_pgm={identical} t={dt:.1f}s")


def test_05_spectral_efficiency(default_run):
    rep, _, out, _ = default_run
    text = (out / "report.txt").read_text()
    stated = "spectral_efficiency_bits_per_symbol = 8\n" in text
    gate(5, "spectral efficiency", stated and rep.spectral_efficiency == 8,
         f"{rep.spectral_efficiency} bits/symbol")


def test_06_geometry_study():
    rows = sweep_geometry(LinkConfig(), ["full-4x4", "half-4x2", "half-4x4"])[1:]
    bers = {r[0]: r[2] for r in rows}
    gate(6, "geometry study noiseless", all(b == 0 for b in bers.values()),
         " ".join(f"{k}:{v:g}" for k, v in bers.items()))


def test_07_noise_behavior():
    seeds = 20
    rows = sweep_snr(LinkConfig(), SNR_POINTS, seeds)[1:]
    means = [rows[i * seeds][-1] for i in range(len(SNR_POINTS))]
    at20 = means[SNR_POINTS.index(20.0)]
    monotone = all(b <= a for a, b in zip(means, means[1:]))
    gate(7, "noise behavior", at20 < BER_BASELINE_20DB and monotone,
         f"mean BER@20dB={at20:.6f} (< {BER_BASELINE_20DB}) means="
         + ",".join(f"{m:.4f}" for m in means))


def test_08_null_core():
    cfg = LinkConfig()
    worst = 0.0
    for l in range(1, 9):
        mag = np.abs(snapshot_field(cfg, [l], 64, 64))
        worst = max(worst, mag[32, 32] / mag.max())
    gate(8, "null-core field check", worst < 0.01, f"max centre/peak={worst:.1e}")


def test_09_channel_limit():
    base = all(v.accepted for v in check_channel_limit(20, range(1, 9)))
    aliased = all(not check_channel_limit(20, [l, l + 20])[1].accepted for l in range(1, 21))
    zero = not check_channel_limit(20, [0])[0].accepted
    gate(9, "channel-limit checks", base and aliased and zero,
         f"accept+1..+8={base} reject(l,l+20)={aliased} reject0={zero}")


def test_10_determinism(tmp_path):
    cfg = LinkConfig(snr_db=10.0, seed=4)
    names = []
    for tag in ("a", "b"):
        d = tmp_path / tag
        run_link(cfg, d)
        snapshot_field(cfg, [1, 3], 32, 32, out_prefix=d / "field")
        sweep_snr(cfg.replace(image="synthetic:16"), [0.0, 20.0], 2, d / "snr.csv")
        sweep_geometry(cfg.replace(image="synthetic:16"), ["full-4x4", "half-4x2"], d / "geo.csv")
        names = sorted(p.name for p in d.iterdir())
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
               for n in names)
    gate(10, "determinism", same and len(names) == 6, f"{len(names)} files byte-identical={same}")


@pytest.mark.slow
@pytest.mark.skipif(not os.environ.get("OAMLINK_SLOW"), reason="set OAMLINK_SLOW=1")
def test_full_size_image_noiseless():
    rep, img = run_link(LinkConfig(image="synthetic:256"))
    assert rep.aggregate_ber == 0
    assert img == codec.synthetic_image(256)
