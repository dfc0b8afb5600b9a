"""Flat key-value configuration.

Every tunable default lives in DEFAULTS; a config file overrides entries
with `key = value` lines (# comments allowed).  Values are coerced to the
type of the default.  Unknown keys are configuration errors.
"""

from .core import SensorRig
from .navigate import BatDeckParams, NavGains
from .sim import EpisodeConfig
from .synth import NoiseSpec, SyntheticPropellerSpec, TrackSampler


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "seed": 0,
    # sensor rig
    "rig.sampling_rate": 52_900.0,
    "rig.speed_of_sound": 343.0,
    "rig.n_samples": 512,
    "rig.history": 32,
    "rig.baseline_h": 0.08,
    "rig.baseline_v": 0.08,
    "rig.fov_azimuth": 140.0,
    "rig.fov_elevation": 57.0,
    # synthetic data generation
    "synth.pairs": 4000,
    "synth.a_min": 0.2,
    "synth.a_max": 1.6,
    "synth.b_min": 0.0,
    "synth.b_max": 0.3,
    "synth.omega_min": 0.05,
    "synth.omega_max": 0.6,
    "synth.count_min": 1,
    "synth.count_max": 4,
    "synth.psnr_min": -6.0,
    "synth.psnr_max": 12.0,
    # noise model
    "noise.sigma_m": 0.1,
    "noise.sigma_a": 0.02,
    "noise.thrust_kg": 0.46,
    "noise.blade_pass_hz": 1000.0,
    "noise.harmonics": 4,
    "noise.broadband_gain": 0.9,
    # denoiser training (desk scale; --full-scale swaps the paper recipe)
    "train.learning_rate": 1e-3,
    "train.batch_size": 32,
    "train.epochs": 20,
    "train.width": 4,
    "train.val_fraction": 0.1,
    "train.full_learning_rate": 2e-4,
    "train.full_batch_size": 128,
    "train.full_epochs": 100,
    "train.full_width": 16,
    "train.full_pairs": 40_000,
    # classical baselines
    "classical.tdlms_kernel": 9,
    "classical.tdlms_mu": 2e-3,
    "classical.gaussian_size": 5,
    "classical.gaussian_sigma": 1.0,
    "classical.tv_lambda": 1.0,
    "classical.tv_iters": 200,
    "classical.tv_tol": 1e-4,
    "classical.savgol_window": 11,
    "classical.savgol_order": 7,
    "classical.sobel_tau": 0.15,
    # localization
    "localize.tau_c": 0.5,
    # navigation
    "nav.v_d": 1.0,
    "nav.k_x": 0.5,
    "nav.k_y": 0.6,
    "nav.k_z": 0.6,
    "nav.delta": 0.05,
    "nav.delta_max": 0.8,
    "nav.floor_v_x": True,
    # batdeck baseline
    "batdeck.d_stop": 0.5,
    "batdeck.d_free": 1.5,
    "batdeck.yaw_rate": 0.9,
    "batdeck.turn_period": 10.0,
    # simulator
    "sim.dt": 1.0 / 16.0,
    "sim.tau_v": 0.15,
    "sim.max_steps": 480,
    "sim.robot_radius": 0.08,
    "sim.altitude": 1.0,
    # beam model
    "beam.falloff_gamma": 1.0,
    "beam.shape_p": 2.0,
    # benchmark
    "bench.levels": [-5.0, 0.0],
    "bench.trials": 50,
}


def _coerce(key, raw, default):
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, list):
        return [float(v) for v in raw.split(",") if v.strip()]
    return raw


def load_config(path=None) -> dict:
    cfg = dict(DEFAULTS)
    if path is None:
        return cfg
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in cfg:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                cfg[key] = _coerce(key, value, DEFAULTS[key])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return cfg


def rig_from(cfg: dict, three_d: bool = False) -> SensorRig:
    return SensorRig(
        sampling_rate=cfg["rig.sampling_rate"],
        speed_of_sound=cfg["rig.speed_of_sound"],
        n_samples=cfg["rig.n_samples"],
        history=cfg["rig.history"],
        baseline_h=cfg["rig.baseline_h"],
        baseline_v=cfg["rig.baseline_v"] if three_d else None,
        fov_azimuth=cfg["rig.fov_azimuth"],
        fov_elevation=cfg["rig.fov_elevation"],
    )


def sampler_from(cfg: dict) -> TrackSampler:
    return TrackSampler(
        a_range=(cfg["synth.a_min"], cfg["synth.a_max"]),
        b_range=(cfg["synth.b_min"], cfg["synth.b_max"]),
        omega_range=(cfg["synth.omega_min"], cfg["synth.omega_max"]),
        count_range=(cfg["synth.count_min"], cfg["synth.count_max"]),
    )


def noise_from(cfg: dict, scale=None) -> NoiseSpec:
    prop = SyntheticPropellerSpec(
        thrust_kg=cfg["noise.thrust_kg"],
        blade_pass_hz=cfg["noise.blade_pass_hz"],
        harmonic_count=cfg["noise.harmonics"],
        broadband_gain=cfg["noise.broadband_gain"],
    )
    return NoiseSpec(sigma_m=cfg["noise.sigma_m"], sigma_a=cfg["noise.sigma_a"],
                     propeller_source=prop, scale=scale)


def gains_from(cfg: dict, v_d=None, two_d: bool = True) -> NavGains:
    return NavGains(
        v_d=v_d if v_d is not None else cfg["nav.v_d"],
        k_x=cfg["nav.k_x"],
        k_y=cfg["nav.k_y"],
        k_z=0.0 if two_d else cfg["nav.k_z"],
        delta=cfg["nav.delta"],
        delta_max=cfg["nav.delta_max"],
        floor_v_x=cfg["nav.floor_v_x"],
    )


def batdeck_from(cfg: dict, v_d=None) -> BatDeckParams:
    return BatDeckParams(
        v_d=v_d if v_d is not None else cfg["nav.v_d"],
        d_stop=cfg["batdeck.d_stop"],
        d_free=cfg["batdeck.d_free"],
        yaw_rate=cfg["batdeck.yaw_rate"],
        turn_period=cfg["batdeck.turn_period"],
        dt=cfg["sim.dt"],
    )


def episode_from(cfg: dict, three_d: bool = False) -> EpisodeConfig:
    return EpisodeConfig(
        dt=cfg["sim.dt"],
        tau_v=cfg["sim.tau_v"],
        max_steps=cfg["sim.max_steps"],
        robot_radius=cfg["sim.robot_radius"],
        tau_c=cfg["localize.tau_c"],
        three_d=three_d,
        altitude=cfg["sim.altitude"],
    )
