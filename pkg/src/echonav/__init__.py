"""Ultrasound echo simulation, denoising, localization and navigation."""

from .backend import active_backend
from .core import (
    ContainerError,
    NoiseRef,
    SensorRig,
    as_echo_image,
    decode_image,
    doppler_shift,
    encode_image,
    index_to_path,
    psnr_db,
    range_to_index,
)

__all__ = [
    "ContainerError",
    "NoiseRef",
    "SensorRig",
    "active_backend",
    "as_echo_image",
    "decode_image",
    "doppler_shift",
    "encode_image",
    "index_to_path",
    "psnr_db",
    "range_to_index",
]

__version__ = "0.1.0"
