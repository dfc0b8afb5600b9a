"""Foundational types and conversions for the ultrasound pipeline.

Conventions used throughout the package:

* An echo image is an (M, N) array of non-negative amplitudes.  Row 0 is
  the oldest measurement cycle, row M-1 the newest; columns index range
  samples.
* Amplitudes are dimensionless arbitrary units.  Response kernels are
  normalized so their envelope peaks at 1.0, which plays the role of the
  sensor's full-scale reading.
* "Path" means round-trip path length (twice the range for the
  transmitting sensor).
"""

import math
import struct
from dataclasses import dataclass

import numpy as np

SPEED_OF_SOUND = 343.0  # m/s in air at 20 C


class ContainerError(ValueError):
    """Raised when an SRNG/SRNM byte stream cannot be parsed."""


@dataclass(frozen=True)
class SensorRig:
    """Geometry and timing of the sensor array.

    The defaults give N=512 samples spanning a 1.66 m sensing range.
    The sampling rate is chosen so that 512 samples cover exactly that
    window; the vertical baseline is optional and only needed for 3-D
    localization.
    """

    sampling_rate: float = 52_900.0       # Hz
    speed_of_sound: float = SPEED_OF_SOUND
    n_samples: int = 512                  # range samples per measurement cycle
    history: int = 32                     # stacked cycles per echo image
    baseline_h: float = 0.08              # m, horizontal sensor separation
    baseline_v: float | None = None       # m, vertical separation (3-D only)
    fov_azimuth: float = 140.0            # deg, full width
    fov_elevation: float = 57.0           # deg, full width

    def __post_init__(self):
        if self.sampling_rate <= 0 or self.speed_of_sound <= 0:
            raise ValueError("sampling_rate and speed_of_sound must be positive")
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if self.history < 1:
            raise ValueError("history must be >= 1")
        if self.baseline_h <= 0:
            raise ValueError("baseline_h must be positive")
        if self.baseline_v is not None and self.baseline_v <= 0:
            raise ValueError("baseline_v must be positive when set")
        if not math.isfinite(self.max_range) or self.max_range <= 0:
            raise ValueError("max_range must be finite and positive")

    @property
    def max_range(self) -> float:
        """One-way range covered by the listening window, N*c/(2f)."""
        return self.n_samples * self.speed_of_sound / (2.0 * self.sampling_rate)

    @property
    def range_bin(self) -> float:
        """Range covered by one sample, c/(2f)."""
        return self.speed_of_sound / (2.0 * self.sampling_rate)

    @property
    def path_bin(self) -> float:
        """Round-trip path covered by one sample, c/f."""
        return self.speed_of_sound / self.sampling_rate

    def with_3d(self, baseline_v: float = 0.08) -> "SensorRig":
        from dataclasses import replace

        return replace(self, baseline_v=baseline_v)


def as_echo_image(data, rig: SensorRig | None = None) -> np.ndarray:
    """Validate an echo image: 2-D, finite, non-negative, optional shape check."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"echo image must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("echo image contains non-finite values")
    if np.any(arr < 0):
        raise ValueError("echo image contains negative amplitudes")
    if rig is not None and arr.shape != (rig.history, rig.n_samples):
        raise ValueError(
            f"echo image shape {arr.shape} does not match rig "
            f"({rig.history}, {rig.n_samples})"
        )
    return arr


@dataclass
class NoiseRef:
    """A receive-only noise recording (vector or echo-image shaped)."""

    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.size == 0:
            raise ValueError("noise recording is empty")

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.square(self.samples))))


def range_to_index(d: float, rig: SensorRig) -> int | None:
    """Range sample index floor(2*d*f/c), or None once past the window."""
    if d < 0:
        raise ValueError(f"range must be non-negative, got {d}")
    j = math.floor(2.0 * d * rig.sampling_rate / rig.speed_of_sound)
    return j if j < rig.n_samples else None


def index_to_path(j: int, rig: SensorRig) -> float:
    """Round-trip path length j*c/f for a sample index."""
    if not 0 <= j < rig.n_samples:
        raise ValueError(f"sample index {j} outside [0, {rig.n_samples})")
    return j * rig.speed_of_sound / rig.sampling_rate


def doppler_shift(v: float, f: float, c_s: float = SPEED_OF_SOUND) -> float:
    """Observed frequency for closing speed v (positive = approaching).

    f_o = f * (c + v) / (c - v); valid for |v| < c.
    """
    if abs(v) >= c_s:
        raise ValueError(f"|v| must be below the speed of sound ({c_s} m/s)")
    return f * (c_s + v) / (c_s - v)


def psnr_db(echo, noise: NoiseRef) -> float:
    """Peak echo amplitude over noise RMS, in dB: 20*log10(peak/rms)."""
    arr = as_echo_image(echo)
    rms = noise.rms
    if rms <= 0:
        raise ValueError("noise RMS must be positive")
    peak = float(arr.max())
    if peak == 0.0:
        return float("-inf")
    return 20.0 * math.log10(peak / rms)


# ---------------------------------------------------------------------------
# SRNG container: little-endian, 16-byte header then float32 row-major data.
#   magic "SRNG" | version u16=1 | dtype u8=0 (f32) | flags u8=0
#   rows u32 | cols u32

_SRNG_MAGIC = b"SRNG"
_SRNG_HEADER = struct.Struct("<4sHBBII")
SRNG_HEADER_SIZE = _SRNG_HEADER.size  # 16


def encode_image(image) -> bytes:
    arr = np.ascontiguousarray(np.asarray(image, dtype=np.float32))
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {arr.shape}")
    rows, cols = arr.shape
    header = _SRNG_HEADER.pack(_SRNG_MAGIC, 1, 0, 0, rows, cols)
    return header + arr.tobytes(order="C")


def decode_image_at(blob: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Decode one container starting at ``offset``; returns (image, end offset)."""
    if len(blob) < offset + SRNG_HEADER_SIZE:
        raise ContainerError(
            f"truncated header at offset {offset}: need {SRNG_HEADER_SIZE} bytes"
        )
    magic, version, dtype, flags, rows, cols = _SRNG_HEADER.unpack_from(blob, offset)
    if magic != _SRNG_MAGIC:
        raise ContainerError(f"bad magic {magic!r} at offset {offset}")
    if version != 1:
        raise ContainerError(f"unsupported version {version} at offset {offset + 4}")
    if dtype != 0:
        raise ContainerError(f"unsupported dtype code {dtype} at offset {offset + 6}")
    if flags != 0:
        raise ContainerError(f"unsupported flags {flags} at offset {offset + 7}")
    start = offset + SRNG_HEADER_SIZE
    end = start + rows * cols * 4
    if len(blob) < end:
        raise ContainerError(
            f"truncated payload at offset {len(blob)}: need {end} bytes total"
        )
    data = np.frombuffer(blob, dtype="<f4", count=rows * cols, offset=start)
    return data.reshape(rows, cols).copy(), end


def decode_image(blob: bytes) -> np.ndarray:
    """Decode a single-container byte string (trailing bytes are an error)."""
    arr, end = decode_image_at(blob, 0)
    if end != len(blob):
        raise ContainerError(f"{len(blob) - end} trailing bytes after offset {end}")
    return arr


def write_image(path, image) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_image(image))


def read_image(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_image(fh.read())
