"""Command-line entry point: ``oamlink <subcommand> [--config FILE] [--key value ...]``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

from . import experiment
from .experiment import LinkConfig

log = logging.getLogger("oamlink")


def _config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    for f in dataclasses.fields(LinkConfig):
        parser.add_argument(f"--{f.name}", dest=f"cfg_{f.name}", default=None,
                            metavar=f.name.upper(), help=f"override {f.name}")


def _load(args) -> LinkConfig:
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    return experiment.make_config(args.config, **overrides)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_run(args) -> int:
    cfg = _load(args)
    rep, _ = experiment.run_link(cfg, args.out)
    print(f"aggregate_ber={rep.aggregate_ber:.9g} pixel_errors={rep.pixel_errors} "
          f"spectral_efficiency={rep.spectral_efficiency} bits/symbol "
          f"runtime={rep.runtime:.2f}s -> {args.out}")
    return 0


def cmd_snapshot(args) -> int:
    cfg = _load(args)
    if args.pixel is not None:
        charges = experiment.pixel_charges(args.pixel, cfg.charges, cfg.bit_order == "msb")
    elif args.on_charges:
        charges = [int(v) for v in args.on_charges.split(",") if v.strip()]
    else:
        charges = list(cfg.charges)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    experiment.snapshot_field(cfg, charges, args.nx, args.ny, args.extent, args.z,
                              args.time, args.out)
    print(f"wrote {args.out}.csv and {args.out}.pgm")
    return 0


def cmd_sweep_snr(args) -> int:
    cfg = _load(args)
    experiment.sweep_snr(cfg, _floats(args.snr_list), args.seeds, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_sweep_geometry(args) -> int:
    cfg = _load(args)
    layouts = [v.strip() for v in args.layouts.split(",") if v.strip()]
    experiment.sweep_geometry(cfg, layouts, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_check_limit(args) -> int:
    cfg = _load(args)
    verdicts = experiment.check_channel_limit(cfg.n_elements, cfg.charges)
    for v in verdicts:
        print(f"{v.charge:+d}\t{'accept' if v.accepted else 'reject'}\t{v.reason}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oamlink", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", help="transmit one image end to end")
    _config_flags(s)
    s.add_argument("--out", default="out", help="output directory")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("snapshot", help="export the pressure field over a plane")
    _config_flags(s)
    s.add_argument("--on-charges", default=None,
                   help="comma list of charges to key on (default: all configured)")
    s.add_argument("--pixel", type=int, default=None, help="key on the charges of this pixel value")
    s.add_argument("--nx", type=int, default=64)
    s.add_argument("--ny", type=int, default=64)
    s.add_argument("--extent", type=float, default=16.0, help="plane side in wavelengths")
    s.add_argument("--z", type=float, default=None, help="plane distance in wavelengths")
    s.add_argument("--time", type=float, default=0.0, help="time instant in seconds")
    s.add_argument("--out", default="out/field", help="output prefix")
    s.set_defaults(func=cmd_snapshot)

    s = sub.add_parser("sweep-snr", help="BER table over SNR points and noise seeds")
    _config_flags(s)
    s.add_argument("--snr-list", default="0,5,10,15,20,30", help="comma list, 'inf' = noiseless")
    s.add_argument("--seeds", type=int, default=20)
    s.add_argument("--out", default="out/sweep_snr.csv")
    s.set_defaults(func=cmd_sweep_snr)

    s = sub.add_parser("sweep-geometry", help="compare receiver layouts")
    _config_flags(s)
    s.add_argument("--layouts", default="full-8x8,full-4x4,half-4x2,half-4x4")
    s.add_argument("--out", default="out/sweep_geometry.csv")
    s.set_defaults(func=cmd_sweep_geometry)

    s = sub.add_parser("check-limit", help="judge charges against the ring's channel limit")
    _config_flags(s)
    s.set_defaults(func=cmd_check_limit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"{type(exc).__module__}.{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
