"""Synthetic echo-image generation.

The pipeline renders ideal impulse images from obstacle range tracks,
convolves them row-by-row with an echo response kernel, injects noise
(propeller recording or synthetic, plus a multiplicative/additive
speckle model) and takes the per-row analytic-signal envelope.  Ground
truth is the leading edge of the noiseless kernel envelope.
"""

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .core import ContainerError, SensorRig, NoiseRef, decode_image_at, encode_image

# Hover operating point: a normalized pole echo recorded at 1 m has
# envelope peak 1.0; hover-thrust propeller noise is calibrated so the
# peak-to-RMS ratio against that echo is -4.9 dB.
HOVER_THRUST_KG = 0.46
HOVER_PSNR_DB = -4.9
REFERENCE_ECHO_PEAK = 1.0


def hover_noise_rms() -> float:
    """Propeller-noise RMS at hover implied by the -4.9 dB operating point."""
    return REFERENCE_ECHO_PEAK * 10.0 ** (-HOVER_PSNR_DB / 20.0)


@dataclass(frozen=True)
class ObstacleTrack:
    """Range trajectory d(t) = a + b*cos(omega*t + phi), t in history steps."""

    a: float            # m, mean range
    b: float            # m, oscillation amplitude
    omega: float        # rad per history step
    phi: float          # rad

    def __post_init__(self):
        if self.b < 0:
            raise ValueError("oscillation amplitude b must be >= 0")
        if self.a - self.b < 0:
            raise ValueError("track dips below zero range (a - b < 0)")


@dataclass(frozen=True)
class ArcGeometry:
    """Arc-trajectory geometry: arc radius rho, arc-to-obstacle distance ell,
    arc angle theta (radians).  ell is collinear with rho."""

    rho: float
    ell: float
    theta: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("arc radius must be positive")
        if self.ell < 0:
            raise ValueError("arc-to-obstacle distance must be >= 0")


def arc_range(geom: ArcGeometry) -> tuple[float, float]:
    """Sensor-to-obstacle distance for an arc pose: (exact, small-angle approx).

    Exact: d = sqrt(rho^2 + (rho+ell)^2 - 2 rho (rho+ell) cos theta).
    The approximation expands d about theta = 0 and keeps the first-order
    term in (1 - cos theta):  d ~ ell + rho (rho+ell) (1 - cos theta) / ell.
    """
    rho, ell, theta = geom.rho, geom.ell, geom.theta
    s = rho + ell
    exact = math.sqrt(max(rho * rho + s * s - 2.0 * s * rho * math.cos(theta), 0.0))
    if ell == 0.0:
        return exact, exact
    approx = ell + rho * s * (1.0 - math.cos(theta)) / ell
    return exact, approx


def sample_track(track: ObstacleTrack, m: int) -> np.ndarray:
    t = np.arange(m, dtype=np.float64)
    return track.a + track.b * np.cos(track.omega * t + track.phi)


def render_impulse(tracks, rig: SensorRig) -> np.ndarray:
    """Ideal impulse image: unit spikes at the range indices of each track.

    Coincident spikes add; ranges beyond the listening window are dropped.
    """
    if not tracks:
        raise ValueError("need at least one obstacle track")
    m, n = rig.history, rig.n_samples
    h = np.zeros((m, n), dtype=np.float64)
    rows = np.arange(m)
    for track in tracks:
        d = sample_track(track, m)
        idx = np.floor(2.0 * d * rig.sampling_rate / rig.speed_of_sound).astype(np.int64)
        keep = idx < n
        np.add.at(h, (rows[keep], idx[keep]), 1.0)
    return h


@dataclass(frozen=True)
class ResponseKernel:
    """Echo response of a point reflector (recorded or synthetic)."""

    samples: np.ndarray
    source_label: str = ""

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("kernel must be a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("kernel contains non-finite values")
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.size


def convolve_response(h, kernel: ResponseKernel) -> np.ndarray:
    """Row-wise linear convolution truncated to N samples.

    The kernel's first sample is anchored at the impulse index, so a spike
    at column j produces the kernel starting at column j (echo onset).
    """
    h = np.asarray(h, dtype=np.float64)
    r = kernel.samples
    if r.size == 0:
        raise ValueError("empty response kernel")
    n = h.shape[1]
    if r.size > n:
        raise ValueError(f"kernel length {r.size} exceeds row length {n}")
    out = np.empty_like(h)
    for i in range(h.shape[0]):
        out[i] = np.convolve(h[i], r)[:n]
    return out


def envelope(x) -> np.ndarray:
    """Per-row magnitude of the analytic signal (discrete Hilbert transform)."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    rows = np.atleast_2d(x)
    if not np.all(np.isfinite(rows)):
        raise ValueError("envelope input contains non-finite values")
    n = rows.shape[-1]
    spec = np.fft.fft(rows, axis=-1)
    gain = np.zeros(n)
    if n % 2 == 0:
        gain[0] = gain[n // 2] = 1.0
        gain[1 : n // 2] = 2.0
    else:
        gain[0] = 1.0
        gain[1 : (n + 1) // 2] = 2.0
    env = np.abs(np.fft.ifft(spec * gain, axis=-1))
    return env[0] if squeeze else env


def leading_edge(gp, tau: float, axis: str = "range") -> np.ndarray:
    """Binary mask of threshold rising edges.

    Marks positions where the value is below tau and the next sample along
    ``axis`` is at or above it.  "range" scans within each history row
    (default; edges mark echo onset in range); "history" compares
    consecutive rows at fixed range, kept for comparison.
    """
    if tau <= 0:
        raise ValueError("threshold tau must be positive")
    gp = np.asarray(gp, dtype=np.float64)
    below = gp < tau
    at_or_above = ~below
    mask = np.zeros_like(gp)
    if axis == "range":
        mask[:, :-1] = below[:, :-1] & at_or_above[:, 1:]
    elif axis == "history":
        mask[:-1, :] = below[:-1, :] & at_or_above[1:, :]
    else:
        raise ValueError(f"axis must be 'range' or 'history', got {axis!r}")
    return mask


# ---------------------------------------------------------------------------
# Noise

@dataclass(frozen=True)
class SyntheticPropellerSpec:
    """Stand-in for a recorded flight-noise file.

    RMS follows a monotone quadratic in thrust anchored at the hover
    operating point; the spectrum is broadband Gaussian plus blade-pass
    harmonics.
    """

    thrust_kg: float = HOVER_THRUST_KG
    blade_pass_hz: float = 1000.0
    harmonic_count: int = 4
    broadband_gain: float = 0.9  # fraction of total RMS in the broadband part

    def __post_init__(self):
        if self.thrust_kg < 0:
            raise ValueError("thrust must be >= 0")
        if self.harmonic_count < 0:
            raise ValueError("harmonic_count must be >= 0")
        if not 0.0 <= self.broadband_gain <= 1.0:
            raise ValueError("broadband_gain must be in [0, 1]")

    def rms(self) -> float:
        return hover_noise_rms() * (self.thrust_kg / HOVER_THRUST_KG) ** 2


@dataclass
class NoiseSpec:
    """Noise configuration for sample synthesis.

    ``alpha`` selects the noise route per sample: 1 = propeller noise,
    0 = speckle (multiplicative + additive).  None draws 0/1 equiprobably.
    ``scale`` is a PSNR target in dB; when set, the propeller noise and the
    additive sigma are jointly scaled so peak(clean envelope)/noise RMS
    hits the target.  When None, natural levels are used.
    """

    sigma_m: float = 0.1
    sigma_a: float = 0.02
    propeller_source: "SyntheticPropellerSpec | NoiseRef" = field(
        default_factory=SyntheticPropellerSpec
    )
    scale: float | None = None
    alpha: int | None = None

    def __post_init__(self):
        if self.sigma_m < 0 or self.sigma_a < 0:
            raise ValueError("noise sigmas must be >= 0")
        if self.alpha not in (None, 0, 1):
            raise ValueError("alpha must be None, 0 or 1")


def propeller_noise(source, shape, seed, sampling_rate=52_900.0, tile=True) -> np.ndarray:
    """Propeller-noise matrix of the given (rows, cols) shape.

    Recorded mode: a seeded wrap-around crop of the recording (tiled when
    shorter than needed).  Synthetic mode: broadband Gaussian plus
    blade-pass harmonics with random per-row phases, scaled to the
    thrust-dependent RMS.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    rows, cols = shape
    if isinstance(source, NoiseRef):
        flat = source.samples.ravel()
        if flat.size < cols and not tile:
            raise ValueError(
                f"recording has {flat.size} samples, shorter than one row "
                f"({cols}) and tiling is disabled"
            )
        start = int(rng.integers(0, flat.size))
        idx = (start + np.arange(rows * cols)) % flat.size
        return flat[idx].reshape(rows, cols).astype(np.float64)
    if isinstance(source, SyntheticPropellerSpec):
        total = source.rms()
        if total == 0.0:
            return np.zeros(shape)
        g = source.broadband_gain
        out = rng.normal(0.0, 1.0, shape) * (g * total)
        k = source.harmonic_count
        if k > 0 and g < 1.0:
            amp = math.sqrt(2.0 * (1.0 - g * g) / k) * total
            t = np.arange(cols)
            for hrm in range(1, k + 1):
                fnorm = hrm * source.blade_pass_hz / sampling_rate
                phases = rng.uniform(0.0, 2.0 * math.pi, rows)
                out += amp * np.cos(2.0 * math.pi * fnorm * t[None, :] + phases[:, None])
        return out
    raise TypeError(f"unsupported propeller source {type(source).__name__}")


def _rms(x) -> float:
    return float(np.sqrt(np.mean(np.square(x))))


def synthesize_sample(tracks, kernel: ResponseKernel, noise: NoiseSpec,
                      rig: SensorRig, seed) -> tuple[np.ndarray, np.ndarray]:
    """One (E, G) training pair; bit-deterministic for a fixed seed.

    E = envelope(alpha*(H*R + n_prop) + (1-alpha)*((1+n_m)(H*R) + n_a)),
    G = leading edge of H convolved with the kernel envelope.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    h = render_impulse(tracks, rig)
    signal = convolve_response(h, kernel)

    kernel_env = envelope(kernel.samples)
    g_prime = convolve_response(h, ResponseKernel(kernel_env, kernel.source_label))
    tau = 0.1 * float(kernel_env.max())
    g = leading_edge(g_prime, tau)

    alpha = noise.alpha
    if alpha is None:
        alpha = int(rng.integers(0, 2))

    clean_peak = float(envelope(signal).max())
    if noise.scale is not None:
        ref = clean_peak if clean_peak > 0 else REFERENCE_ECHO_PEAK
        target_rms = ref * 10.0 ** (-noise.scale / 20.0)
    else:
        target_rms = None

    if alpha == 1:
        prop = propeller_noise(noise.propeller_source, signal.shape, rng,
                               sampling_rate=rig.sampling_rate)
        if target_rms is not None:
            raw = _rms(prop)
            prop = prop * (target_rms / raw) if raw > 0 else prop
        pre = signal + prop
    else:
        eta_m = rng.normal(0.0, noise.sigma_m, signal.shape) if noise.sigma_m > 0 else 0.0
        sigma_a = noise.sigma_a if target_rms is None else target_rms
        eta_a = rng.normal(0.0, sigma_a, signal.shape) if sigma_a > 0 else 0.0
        pre = (1.0 + eta_m) * signal + eta_a

    return envelope(pre), g


# ---------------------------------------------------------------------------
# Synthetic response kernels (pole / box / tunnel)

_CARRIERS = {"pole": 0.17, "box": 0.12, "tunnel": 0.15}


def _burst(amps, fnorm, phase=0.7):
    n = np.arange(len(amps))
    return np.asarray(amps) * np.cos(2.0 * math.pi * fnorm * n + phase)


def synthetic_kernel(label: str) -> ResponseKernel:
    """One of three canonical kernels, envelope-normalized to peak 1.

    pole: narrow high peak; box: broad lobe; tunnel: ringing with two
    internal bounces.  All have a fast attack so the leading edge lands
    within one sample of the impulse index.
    """
    if label == "pole":
        amps = [0.40, 1.00, 0.85, 0.55, 0.30, 0.15, 0.07, 0.03]
    elif label == "box":
        amps = [0.35, 0.80, 0.97, 1.00, 0.98, 0.92, 0.82, 0.68,
                0.52, 0.38, 0.26, 0.17, 0.10, 0.06, 0.03, 0.015]
    elif label == "tunnel":
        main = [0.38, 0.95, 1.00, 0.80, 0.55, 0.34, 0.20, 0.11, 0.06, 0.03]
        amps = np.zeros(44)
        amps[:10] = main
        amps[16:26] = np.asarray(main) * 0.45
        amps[32:42] = np.asarray(main) * 0.20
    else:
        raise ValueError(f"unknown kernel label {label!r}")
    raw = _burst(np.asarray(amps, dtype=np.float64), _CARRIERS[label])
    raw = raw / float(envelope(raw).max())
    return ResponseKernel(raw, label)


KERNEL_LABELS = ("pole", "box", "tunnel")


def default_kernel_set() -> list[ResponseKernel]:
    return [synthetic_kernel(lbl) for lbl in KERNEL_LABELS]


def load_kernel_file(path, label: str = "recorded") -> ResponseKernel:
    """Recorded echo response from an SRNG container (single row)."""
    from .core import read_image

    arr = read_image(path)
    if arr.shape[0] != 1:
        raise ValueError(f"kernel recording must have one row, got {arr.shape}")
    return ResponseKernel(arr[0].astype(np.float64), label)


def load_noise_file(path) -> NoiseRef:
    """Receive-only noise recording from an SRNG container (1 or M rows)."""
    from .core import read_image

    return NoiseRef(read_image(path).astype(np.float64))


# ---------------------------------------------------------------------------
# Dataset generation and the .srngset container stream

@dataclass(frozen=True)
class TrackSampler:
    """Uniform sampling bounds for obstacle tracks and per-sample counts.

    max_rate caps the radial speed b*omega (m per history step) so tracks
    stay consistent with robot motion at a couple of m/s and 16 Hz cycles.
    """

    a_range: tuple[float, float] = (0.2, 1.6)
    b_range: tuple[float, float] = (0.0, 0.3)
    omega_range: tuple[float, float] = (0.05, 0.6)
    count_range: tuple[int, int] = (1, 4)
    max_rate: float = 0.10

    def draw(self, rng: np.random.Generator) -> list[ObstacleTrack]:
        count = int(rng.integers(self.count_range[0], self.count_range[1] + 1))
        tracks = []
        for _ in range(count):
            a = rng.uniform(*self.a_range)
            # cap b at a so the track never dips below zero range
            b = rng.uniform(self.b_range[0], min(self.b_range[1], a))
            w_hi = self.omega_range[1]
            if b > 0:
                w_hi = min(w_hi, self.max_rate / b)
            omega = rng.uniform(self.omega_range[0], max(w_hi, self.omega_range[0]))
            phi = rng.uniform(0.0, 2.0 * math.pi)
            tracks.append(ObstacleTrack(a, b, omega, phi))
        return tracks


def sample_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent per-sample stream; any worker layout yields the same data."""
    return np.random.default_rng(np.random.SeedSequence((int(master_seed), int(index))))


def draw_sample_plan(rng: np.random.Generator, sampler: TrackSampler,
                     n_kernels: int, psnr_range):
    """Per-sample draws: tracks, kernel choice (equiprobable), PSNR level."""
    tracks = sampler.draw(rng)
    kernel_idx = int(rng.integers(0, n_kernels))
    level = float(rng.uniform(*psnr_range))
    return tracks, kernel_idx, level


def generate_pair(master_seed: int, index: int, rig: SensorRig,
                  sampler: TrackSampler, kernels, psnr_range=(-6.0, 12.0),
                  noise: NoiseSpec | None = None):
    """Draw tracks, a kernel and a PSNR level, then synthesize one pair."""
    rng = sample_rng(master_seed, index)
    tracks, kernel_idx, level = draw_sample_plan(rng, sampler, len(kernels), psnr_range)
    spec = noise if noise is not None else NoiseSpec()
    spec = NoiseSpec(sigma_m=spec.sigma_m, sigma_a=spec.sigma_a,
                     propeller_source=spec.propeller_source,
                     scale=level, alpha=spec.alpha)
    return synthesize_sample(tracks, kernels[kernel_idx], spec, rig, rng)


_COUNT = struct.Struct("<I")


def write_dataset(path, pairs) -> int:
    """Write (E, G) pairs as a u32-count-prefixed stream of SRNG containers."""
    count = 0
    with open(path, "wb") as fh:
        fh.write(_COUNT.pack(0))
        for e, g in pairs:
            fh.write(encode_image(e))
            fh.write(encode_image(g))
            count += 1
        fh.seek(0)
        fh.write(_COUNT.pack(count))
    return count


def generate_dataset(path, n_pairs: int, rig: SensorRig, master_seed: int,
                     sampler: TrackSampler | None = None, kernels=None,
                     psnr_range=(-6.0, 12.0)) -> int:
    sampler = sampler or TrackSampler()
    kernels = kernels or default_kernel_set()

    def pairs():
        for i in range(n_pairs):
            e, g = generate_pair(master_seed, i, rig, sampler, kernels, psnr_range)
            yield e.astype(np.float32), g.astype(np.float32)

    return write_dataset(path, pairs())


class DatasetReader:
    """Random access into an .srngset file without loading it whole."""

    def __init__(self, path):
        self.path = path
        with open(path, "rb") as fh:
            head = fh.read(_COUNT.size)
            if len(head) < _COUNT.size:
                raise ContainerError("dataset file shorter than its count prefix")
            (self.count,) = _COUNT.unpack(head)
        self._blob = np.memmap(path, dtype=np.uint8, mode="r")
        # Probe the first container to fix the record stride.
        if self.count:
            raw = bytes(self._blob[4:20])
            magic, _, _, _, rows, cols = struct.unpack("<4sHBBII", raw)
            if magic != b"SRNG":
                raise ContainerError("bad magic in first dataset record")
            self.shape = (rows, cols)
            self.record = 2 * (16 + rows * cols * 4)
            expected = 4 + self.count * self.record
            if self._blob.size < expected:
                raise ContainerError(
                    f"dataset truncated: {self._blob.size} bytes, need {expected}"
                )
        else:
            self.shape = (0, 0)
            self.record = 0

    def __len__(self):
        return self.count

    def pair(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        if not 0 <= i < self.count:
            raise IndexError(i)
        base = 4 + i * self.record
        blob = bytes(self._blob[base : base + self.record])
        e, off = decode_image_at(blob, 0)
        g, _ = decode_image_at(blob, off)
        return e, g
