"""Benchmark harness: the denoiser-vs-classical sweep and episode campaigns.

The sweep generates single point-obstacle motion per trial as a stereo
image pair with exact left/right path geometry, injects propeller noise
at the target PSNR, runs each method on both images and reports SSIM and
MSE against the method's ideal output (clean envelope for the classical
filters, the edge-map truth for the net), the bilaterated obstacle
position RMSE, and the per-inference wall time.  Per-method runtimes are
intended to be averaged over the whole sweep (>= 100 calls at default
trial counts); rows carry the individual measurements.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from .classical import gaussian_blur, savgol_rows, sobel_edges, tdlms, tv_l1
from .core import SensorRig
from .metrics import mse, position_rmse, ssim
from .nn import denoise, normalize_input
from .synth import (
    ObstacleTrack,
    ResponseKernel,
    SyntheticPropellerSpec,
    convolve_response,
    envelope,
    leading_edge,
    propeller_noise,
    sample_rng,
    synthetic_kernel,
)

CSV_HEADER = "method,psnr_db,trial,position_rmse_m,ssim,mse,runtime_ms"

CLASSICAL_METHODS = ("tdlms", "gaussian", "tvl1", "tvl1_sg")


@dataclass
class MetricsRow:
    method: str
    psnr_db: float
    trial: int
    position_rmse_m: float
    ssim: float
    mse: float
    runtime_ms: float

    def to_csv(self) -> str:
        return (f"{self.method},{self.psnr_db:g},{self.trial},"
                f"{self.position_rmse_m:.6f},{self.ssim:.6f},"
                f"{self.mse:.8f},{self.runtime_ms:.3f}")


def make_methods(net=None, tau_c: float = 0.5, sobel_tau: float = 0.15) -> dict:
    """name -> callable(E) -> (denoised, binary edges).

    Classical methods see [0, 1] peak-normalized input and extract edges
    with a Sobel pass; the net thresholds its own output at tau_c.
    """
    def _norm(e):
        peak = e.max()
        return e / peak if peak > 0 else e

    methods = {
        "tdlms": lambda e: _with_sobel(tdlms(_norm(e)), sobel_tau),
        "gaussian": lambda e: _with_sobel(gaussian_blur(_norm(e)), sobel_tau),
        "tvl1": lambda e: _with_sobel(tv_l1(_norm(e)), sobel_tau),
        "tvl1_sg": lambda e: _with_sobel(savgol_rows(tv_l1(_norm(e))), sobel_tau),
    }
    if net is not None:
        def _net(e):
            out = denoise(net, e)
            return out, (out > tau_c).astype(np.float64)

        methods["net"] = _net
    return methods


def _with_sobel(denoised, sobel_tau):
    return denoised, sobel_edges(denoised, sobel_tau)


def make_sweep_sample(master_seed: int, level_db: float, trial: int,
                      rig: SensorRig, kernel: ResponseKernel | None = None):
    """Stereo (E_L, E_R) pair plus per-sensor truth for one sweep trial.

    One point obstacle at a fixed random azimuth follows a range track;
    left/right impulse indices come from the exact two-circle geometry.
    Propeller noise is scaled to the PSNR target.
    """
    kernel = kernel or synthetic_kernel("pole")
    level_key = 0 if math.isinf(level_db) else int(round((level_db + 100.0) * 10))
    rng = sample_rng(master_seed, (level_key << 20) + trial)
    # gentle motion: the comparison targets noise response, so the ridge
    # moves at most a few bins per cycle
    a = rng.uniform(0.35, 1.3)
    b = rng.uniform(0.02, 0.05)
    track = ObstacleTrack(a, b, rng.uniform(0.05, 0.15), rng.uniform(0, 2 * math.pi))
    phi = rng.uniform(-0.7, 0.7)

    m, n = rig.history, rig.n_samples
    t = np.arange(m)
    d = track.a + track.b * np.cos(track.omega * t + track.phi)
    ox, oy = d * math.cos(phi), d * math.sin(phi)
    half_b = rig.baseline_h / 2.0
    r_l = np.hypot(ox, oy + half_b)
    r_r = np.hypot(ox, oy - half_b)
    paths = {"L": 2 * r_l, "R": r_l + r_r}

    kern_env = envelope(kernel.samples)
    tau = 0.1 * float(kern_env.max())
    sample = {}
    for sid in ("L", "R"):
        h = np.zeros((m, n))
        idx = np.floor(paths[sid] * rig.sampling_rate / rig.speed_of_sound).astype(int)
        keep = idx < n
        h[t[keep], idx[keep]] = 1.0
        signal = convolve_response(h, kernel)
        clean = envelope(signal)
        g = leading_edge(convolve_response(h, ResponseKernel(kern_env)), tau)
        if math.isinf(level_db):  # noiseless reference level
            noise = np.zeros((m, n))
        else:
            peak = float(clean.max())
            noise = propeller_noise(SyntheticPropellerSpec(), (m, n), rng,
                                    sampling_rate=rig.sampling_rate)
            raw = float(np.sqrt(np.mean(noise**2)))
            target = (peak if peak > 0 else 1.0) * 10.0 ** (-level_db / 20.0)
            if raw > 0:
                noise *= target / raw
        sample[sid] = {
            "E": envelope(signal + noise),
            "clean": clean,
            "G": g,
        }
    sample["truth_xy"] = (ox, oy)
    return sample


def psnr_sweep(methods: dict, levels, trials: int, rig: SensorRig,
               seed: int = 0, timing: bool = True) -> list[MetricsRow]:
    """Run every method over every (level, trial) sample; rows are sorted
    by (method, level, trial).  timing=False zeroes the runtime column so
    CSV output is byte-reproducible."""
    out = []
    for level in levels:
        if not math.isinf(level) and not -10.0 <= level <= 20.0:
            raise ValueError(f"PSNR level {level} outside [-10, 20] dB")
    for name in sorted(methods):
        fn = methods[name]
        for level in levels:
            for trial in range(trials):
                sample = make_sweep_sample(seed, level, trial, rig)
                t0 = time.perf_counter()
                den_l, edges_l = fn(sample["L"]["E"])
                den_r, edges_r = fn(sample["R"]["E"])
                elapsed_ms = (time.perf_counter() - t0) * 500.0  # per call
                ideal_key = "G" if name == "net" else "clean"
                ref = sample["L"][ideal_key]
                peak = ref.max()
                ref_n = ref / peak if peak > 0 else ref
                den_peak = den_l.max()
                den_n = den_l / den_peak if den_peak > 0 else den_l
                row = MetricsRow(
                    method=name,
                    psnr_db=float(level),
                    trial=trial,
                    position_rmse_m=position_rmse(
                        (edges_l, edges_r), (sample["L"]["G"], sample["R"]["G"]),
                        rig),
                    ssim=ssim(den_n, ref_n),
                    mse=mse(den_n, ref_n),
                    runtime_ms=elapsed_ms if timing else 0.0,
                )
                out.append(row)
    return out


def rows_to_csv(rows) -> str:
    return CSV_HEADER + "\n" + "\n".join(r.to_csv() for r in rows) + "\n"


def mean_by_method_level(rows, field: str) -> dict:
    acc = {}
    for r in rows:
        acc.setdefault((r.method, r.psnr_db), []).append(getattr(r, field))
    return {k: float(np.mean(v)) for k, v in acc.items()}


def runtime_summary(rows) -> dict:
    """Mean per-inference runtime per method over all calls in the sweep."""
    acc = {}
    for r in rows:
        acc.setdefault(r.method, []).append(r.runtime_ms)
    return {k: float(np.mean(v)) for k, v in acc.items()}
