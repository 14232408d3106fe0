"""Simulator of an OAM-multiplexed underwater acoustic link."""

from .codec import GrayImage, LinkReport, ber, bits_to_image, image_to_bits, read_pgm, write_pgm
from .experiment import LinkConfig, check_channel_limit, run_link, snapshot_field, sweep_geometry, sweep_snr
from .lgbeam import LGMode, lg_amplitude, lg_amplitude_full, lg_intensity, max_intensity_radius, peak_intensity

__version__ = "0.1.0"
