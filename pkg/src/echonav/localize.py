"""Obstacle localization from denoised echo images.

The transmitting sensor L and receivers R (horizontal baseline b_H) and D
(vertical baseline b_V) yield per-sensor path-length sets.  All-pairs
candidates within the baseline disparity bound produce angle estimates
which are median-fused per reference path.

Frame conventions: x forward, y right, z up.  L sits at y = -b_H/2,
R at +b_H/2, and the third sensor D is mounted a baseline b_V above L,
so positive azimuth means "obstacle to the right" and positive elevation
"obstacle above".
"""

from dataclasses import dataclass, field

import numpy as np

from .core import SensorRig, as_echo_image, index_to_path


@dataclass(frozen=True)
class PathSet:
    """Sorted round-trip path lengths (m) detected by one sensor."""

    sensor_id: str
    paths: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.paths, dtype=np.float64).ravel()
        if np.any(arr < 0):
            raise ValueError("path lengths must be non-negative")
        object.__setattr__(self, "paths", np.sort(arr))

    def __len__(self):
        return self.paths.size


@dataclass(frozen=True)
class Detection:
    r: float                # m, range (reference-sensor path / 2)
    phi: float              # rad, azimuth (+ right)
    theta: float            # rad, elevation (+ up); 0 in 2-D mode
    support: int            # number of candidate matches fused

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("detection range must be positive")


@dataclass
class DetectionBuffer:
    entries: list = field(default_factory=list)

    def __post_init__(self):
        self.entries = sorted(self.entries, key=lambda d: d.r)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def closest(self) -> Detection | None:
        return self.entries[0] if self.entries else None


def detect_paths(g_hat, tau_c: float, rig: SensorRig, sensor_id: str) -> PathSet:
    """Threshold the newest history row and convert indices to path lengths."""
    if not 0.0 < tau_c <= 1.0:
        raise ValueError("tau_c must be in (0, 1]")
    img = as_echo_image(g_hat)
    newest = img[-1]
    idx = np.nonzero(newest > tau_c)[0]
    paths = np.array([index_to_path(int(j), rig) for j in idx])
    return PathSet(sensor_id, paths)


def _median_low_magnitude(values: np.ndarray) -> float:
    """Median; for even counts, the middle element of smaller magnitude
    (conservative steering)."""
    s = np.sort(values)
    n = s.size
    if n % 2 == 1:
        return float(s[n // 2])
    lo, hi = s[n // 2 - 1], s[n // 2]
    return float(lo if abs(lo) <= abs(hi) else hi)


def bilaterate(pl: PathSet, pr: PathSet, rig: SensorRig) -> DetectionBuffer:
    """2-D localization: for every reference path, fuse the azimuths of all
    matches within the horizontal baseline; theta stays 0."""
    b_h = rig.baseline_h
    entries = []
    for p_l in pl.paths:
        if p_l <= 0:
            continue  # the zero bin is the transmit blank, not an echo
        dp = p_l - pr.paths
        valid = dp[np.abs(dp) <= b_h]
        if valid.size == 0:
            continue
        phi = _median_low_magnitude(np.arcsin(valid / b_h))
        entries.append(Detection(r=float(p_l) / 2.0, phi=phi, theta=0.0,
                                 support=int(valid.size)))
    return DetectionBuffer(entries)


def trilaterate(pl: PathSet, pr: PathSet, pd: PathSet, rig: SensorRig) -> DetectionBuffer:
    """3-D localization; requires both baselines.  Azimuth and elevation
    candidates are median-fused independently per reference path."""
    if rig.baseline_v is None:
        raise ValueError("rig has no vertical baseline; use with_3d()")
    b_h, b_v = rig.baseline_h, rig.baseline_v
    entries = []
    for p_l in pl.paths:
        if p_l <= 0:
            continue
        dp_h = p_l - pr.paths
        dp_v = p_l - pd.paths
        valid_h = dp_h[np.abs(dp_h) <= b_h]
        valid_v = dp_v[np.abs(dp_v) <= b_v]
        if valid_h.size == 0 or valid_v.size == 0:
            continue
        phi = _median_low_magnitude(np.arcsin(valid_h / b_h))
        theta = _median_low_magnitude(np.arcsin(valid_v / b_v))
        entries.append(Detection(r=float(p_l) / 2.0, phi=phi, theta=theta,
                                 support=int(valid_h.size * valid_v.size)))
    return DetectionBuffer(entries)


def sensor_offsets(rig: SensorRig) -> dict:
    """Sensor positions in the robot frame (x fwd, y right, z up)."""
    off = {
        "L": np.array([0.0, -rig.baseline_h / 2.0, 0.0]),
        "R": np.array([0.0, +rig.baseline_h / 2.0, 0.0]),
    }
    if rig.baseline_v is not None:
        off["D"] = off["L"] + np.array([0.0, 0.0, rig.baseline_v])
    return off


def detections_to_csv(buffer: DetectionBuffer) -> str:
    lines = ["r,phi_deg,theta_deg,support"]
    for d in buffer:
        lines.append(f"{d.r:.6f},{np.degrees(d.phi):.4f},"
                     f"{np.degrees(d.theta):.4f},{d.support}")
    return "\n".join(lines) + "\n"
