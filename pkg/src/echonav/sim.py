"""Closed-loop world simulator.

Frame: x forward (toward the goal face), y right, z up; headings rotate
about z.  The echo forward model reuses the synthesis primitives with
true geometric path lengths: for every obstacle the nearest surface
point to the transmitter reflects a kernel stamp, attenuated by the beam
pattern (angular taper plus a radial falloff anchored so the amplitude
drops 17 dB from 0.5 m to 2.0 m) and, for boxes, a cos^2 incidence term
that makes edges and corners deflect the beam away.

Echo amplitudes are referenced to the 1 m recording convention: a pole
at 1 m on boresight reproduces the unit kernel peak, so the hover-noise
calibration carries over unchanged.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import SensorRig, NoiseRef
from .localize import bilaterate, detect_paths, sensor_offsets, trilaterate
from .navigate import (
    BatDeckParams,
    NavGains,
    NavState,
    batdeck_step,
    command_log_row,
    potential_step,
)
from .synth import (
    NoiseSpec,
    ResponseKernel,
    SyntheticPropellerSpec,
    envelope,
    propeller_noise,
    synthetic_kernel,
)

ARENA = (0.0, 11.0, -2.25, 2.25, 0.0, 3.65)  # default flying-space bounds
ROBOT_RADIUS = 0.08                            # half the 0.16 m wheelbase
FLIGHT_ALTITUDE = 1.0


# ---------------------------------------------------------------------------
# Primitives

@dataclass(frozen=True)
class Cylinder:
    """Vertical cylinder from z0 to z1."""

    cx: float
    cy: float
    z0: float
    z1: float
    radius: float
    reflectivity: float = 0.5
    kernel_label: str = "pole"

    def __post_init__(self):
        if self.radius <= 0 or self.z1 <= self.z0 or self.reflectivity <= 0:
            raise ValueError("invalid cylinder")

    def distance(self, p) -> float:
        dr = math.hypot(p[0] - self.cx, p[1] - self.cy) - self.radius
        dz = max(self.z0 - p[2], p[2] - self.z1)
        if dr <= 0 and dz <= 0:
            return max(dr, dz)
        return math.hypot(max(dr, 0.0), max(dz, 0.0))

    def closest_point(self, p):
        dx, dy = p[0] - self.cx, p[1] - self.cy
        rad = math.hypot(dx, dy)
        if rad < 1e-12:
            dx, dy, rad = 1.0, 0.0, 1.0
        scale = self.radius / rad
        z = min(max(p[2], self.z0), self.z1)
        return np.array([self.cx + dx * scale, self.cy + dy * scale, z])

    def echo_gain(self, p) -> float:
        return self.reflectivity


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by center and full extents."""

    cx: float
    cy: float
    cz: float
    ex: float
    ey: float
    ez: float
    reflectivity: float = 1.0
    kernel_label: str = "box"

    def __post_init__(self):
        if min(self.ex, self.ey, self.ez) <= 0 or self.reflectivity <= 0:
            raise ValueError("invalid box")

    @property
    def center(self):
        return np.array([self.cx, self.cy, self.cz])

    @property
    def half(self):
        return np.array([self.ex, self.ey, self.ez]) / 2.0

    def distance(self, p) -> float:
        q = np.abs(np.asarray(p) - self.center) - self.half
        outside = np.linalg.norm(np.maximum(q, 0.0))
        inside = min(max(q[0], max(q[1], q[2])), 0.0)
        return float(outside + inside)

    def closest_point(self, p):
        lo = self.center - self.half
        hi = self.center + self.half
        return np.minimum(np.maximum(np.asarray(p, dtype=float), lo), hi)

    def echo_gain(self, p) -> float:
        """Reflectivity tapered by cos^2 of the specular incidence angle.

        Facing a flat face the nearest-point direction is the face normal
        (gain 1); in edge/corner regions the return weakens, mimicking the
        beam being deflected away.
        """
        cp = self.closest_point(p)
        v = np.asarray(p, dtype=float) - cp
        n = np.linalg.norm(v)
        if n < 1e-12:
            return self.reflectivity
        cos_inc = float(np.abs(v).max() / n)
        return self.reflectivity * cos_inc * cos_inc


@dataclass(frozen=True)
class PointReflector:
    x: float
    y: float
    z: float
    reflectivity: float = 0.5
    kernel_label: str = "pole"
    RADIUS = 0.005

    @property
    def pos(self):
        return np.array([self.x, self.y, self.z])

    def distance(self, p) -> float:
        return float(np.linalg.norm(np.asarray(p) - self.pos)) - self.RADIUS

    def closest_point(self, p):
        return self.pos

    def echo_gain(self, p) -> float:
        return self.reflectivity


@dataclass
class WorldModel:
    obstacles: list
    bounds: tuple = ARENA
    start: np.ndarray | None = None

    def __post_init__(self):
        if self.start is not None:
            self.start = np.asarray(self.start, dtype=float)

    def min_distance(self, p) -> float:
        if not self.obstacles:
            return math.inf
        return min(ob.distance(p) for ob in self.obstacles)


@dataclass
class RobotState:
    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    heading: float = 0.0  # yaw, fixed for the potential policy

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)


def step_dynamics(state: RobotState, cmd, dt: float, tau_v: float = 0.15,
                  yaw_rate: float = 0.0) -> RobotState:
    """First-order velocity tracking plus Euler position integration.

    tau_v <= 0 snaps the velocity to the command instantly.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    cmd = np.asarray(cmd, dtype=float)
    if tau_v <= 0:
        v = cmd.copy()
    else:
        v = state.velocity + (cmd - state.velocity) * (1.0 - math.exp(-dt / tau_v))
    return RobotState(position=state.position + v * dt, velocity=v,
                      heading=state.heading + yaw_rate * dt)


# ---------------------------------------------------------------------------
# Beam model

@dataclass(frozen=True)
class BeamModel:
    fov_az: float = 140.0        # deg, full width
    fov_el: float = 57.0
    falloff_gamma: float = 1.0   # power-law exponent of the radial falloff
    absorption_beta: float | None = None  # 1/m; None -> fit to the 17 dB anchor
    shape_p: float = 2.0         # angular taper cos^p exponent
    near_ref: float = 0.5        # m, distance where the public gain is 1

    ANCHOR_DB = 17.0             # amplitude drop from 0.5 m to 2.0 m

    def beta(self) -> float:
        if self.absorption_beta is not None:
            return self.absorption_beta
        # 20*log10(radial(0.5)/radial(2.0)) = ANCHOR_DB, solved for beta
        ratio_pow = self.falloff_gamma * math.log10(4.0)
        return (self.ANCHOR_DB / 20.0 - ratio_pow) / (1.5 * math.log10(math.e))

    def radial(self, d: float) -> float:
        d = max(d, 1e-6)
        return d ** (-self.falloff_gamma) * math.exp(-self.beta() * d)

    def angular(self, az_deg: float, el_deg: float) -> float:
        if abs(az_deg) > self.fov_az / 2 or abs(el_deg) > self.fov_el / 2:
            return 0.0
        ta = math.cos(az_deg / self.fov_az * math.pi) ** self.shape_p
        te = math.cos(el_deg / self.fov_el * math.pi) ** self.shape_p
        return ta * te

    def amplitude(self, d: float, az_deg: float = 0.0, el_deg: float = 0.0) -> float:
        """Beam-pattern gain in [0, 1], unity at (near_ref, boresight)."""
        g = self.angular(az_deg, el_deg) * self.radial(d) / self.radial(self.near_ref)
        return min(g, 1.0)

    def gain_rel_1m(self, d: float, az_deg: float = 0.0, el_deg: float = 0.0) -> float:
        """Gain relative to a boresight 1 m recording (can exceed 1 close in)."""
        return self.angular(az_deg, el_deg) * self.radial(d) / self.radial(1.0)


# ---------------------------------------------------------------------------
# Measurement

_KERNELS = {lbl: synthetic_kernel(lbl) for lbl in ("pole", "box", "tunnel")}


def _heading_frame(v, heading):
    c, s = math.cos(heading), math.sin(heading)
    return np.array([c * v[0] + s * v[1], -s * v[0] + c * v[1], v[2]])


def measure_rows(world: WorldModel, state: RobotState, rig: SensorRig,
                 noise: NoiseSpec | None, rng, beam: BeamModel | None = None,
                 kernels=None) -> dict:
    """One measurement cycle: the newest pre-envelope row per sensor.

    Returns {sensor_id: length-N signal row}.  Noise (when configured) is
    drawn per sensor in L, R, D order from the supplied generator.
    """
    beam = beam or BeamModel(fov_az=rig.fov_azimuth, fov_el=rig.fov_elevation)
    kernels = kernels or _KERNELS
    offsets = sensor_offsets(rig)
    c, s = math.cos(state.heading), math.sin(state.heading)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    sensor_pos = {k: state.position + rot @ v for k, v in offsets.items()}
    tx = sensor_pos["L"]

    n = rig.n_samples
    spikes = {k: {} for k in sensor_pos}
    for ob in world.obstacles:
        p = ob.closest_point(tx)
        rel = _heading_frame(p - state.position, state.heading)
        dist = float(np.linalg.norm(rel))
        if dist < 1e-9:
            continue
        az = math.degrees(math.atan2(rel[1], rel[0]))
        el = math.degrees(math.asin(max(min(rel[2] / dist, 1.0), -1.0)))
        gain = beam.gain_rel_1m(dist, az, el) * ob.echo_gain(tx)
        if gain <= 0.0:
            continue
        d_tx = float(np.linalg.norm(p - tx))
        for sid, spos in sensor_pos.items():
            path = d_tx + float(np.linalg.norm(p - spos))
            idx = math.floor(path * rig.sampling_rate / rig.speed_of_sound)
            if idx < n:
                row = spikes[sid].setdefault(ob.kernel_label, np.zeros(n))
                row[idx] += gain

    rows = {}
    for sid in ("L", "R", "D"):
        if sid not in sensor_pos:
            continue
        signal = np.zeros(n)
        for label, spike_row in spikes[sid].items():
            kern = kernels[label].samples
            signal += np.convolve(spike_row, kern)[:n]
        if noise is not None:
            signal = _inject_noise(signal, noise, rig, rng)
        rows[sid] = signal
    return rows


def _inject_noise(signal, noise: NoiseSpec, rig: SensorRig, rng):
    """Per-row noise composition; PSNR targets anchor to the unit 1 m echo."""
    alpha = noise.alpha
    if alpha is None:
        alpha = int(rng.integers(0, 2))
    if noise.scale is not None:
        target_rms = 10.0 ** (-noise.scale / 20.0)
    else:
        target_rms = None
    shape = (1, signal.size)
    if alpha == 1:
        prop = propeller_noise(noise.propeller_source, shape, rng,
                               sampling_rate=rig.sampling_rate)[0]
        if target_rms is not None:
            raw = float(np.sqrt(np.mean(prop**2)))
            if raw > 0:
                prop *= target_rms / raw
        return signal + prop
    eta_m = rng.normal(0.0, noise.sigma_m, signal.shape) if noise.sigma_m > 0 else 0.0
    sigma_a = noise.sigma_a if target_rms is None else target_rms
    eta_a = rng.normal(0.0, sigma_a, signal.shape) if sigma_a > 0 else 0.0
    return (1.0 + eta_m) * signal + eta_a


def passthrough_denoiser(image) -> np.ndarray:
    """Peak-normalized identity; stands in for the net in noiseless runs."""
    arr = np.asarray(image, dtype=np.float64)
    peak = arr.max()
    return arr / peak if peak > 0 else arr


# ---------------------------------------------------------------------------
# Episodes

@dataclass(frozen=True)
class EpisodeConfig:
    dt: float = 1.0 / 16.0
    tau_v: float = 0.15
    max_steps: int = 480          # 30 s at 16 Hz
    robot_radius: float = ROBOT_RADIUS
    tau_c: float = 0.5
    three_d: bool = False
    altitude: float = FLIGHT_ALTITUDE


@dataclass
class EpisodeResult:
    success: bool
    reason: str                   # goal | collision | out_of_bounds | timeout
    steps: int
    trajectory: np.ndarray
    min_clearance: float
    log_rows: list
    command_rows: list = field(default_factory=list)


def run_episode(world: WorldModel, rig: SensorRig, seed: int,
                policy: str = "potential", gains: NavGains | None = None,
                batdeck: BatDeckParams | None = None,
                noise: NoiseSpec | None = None, denoiser=None,
                cfg: EpisodeConfig = EpisodeConfig()) -> EpisodeResult:
    """Closed loop at the perception rate: measure, denoise, localize,
    navigate, step.  Commands apply with a one-step latency.  Episodes are
    bit-reproducible for a fixed (world, seed, config)."""
    gains = gains or NavGains()
    batdeck = batdeck or BatDeckParams()
    denoiser = denoiser or passthrough_denoiser
    if policy not in ("potential", "batdeck"):
        raise ValueError(f"unknown policy {policy!r}")
    if cfg.three_d and rig.baseline_v is None:
        raise ValueError("3-D episodes need a rig with a vertical baseline")

    start = world.start if world.start is not None else np.array(
        [world.bounds[0] + 0.5, 0.0, cfg.altitude])
    state = RobotState(position=start.copy())
    nav_state = NavState.seeded(seed)
    sensors = ("L", "R", "D") if cfg.three_d else ("L", "R")
    m, n = rig.history, rig.n_samples
    images = {sid: np.zeros((m, n)) for sid in sensors}

    prev_cmd = np.zeros(3)
    prev_yaw_rate = 0.0
    xmin, xmax, ymin, ymax, zmin, zmax = world.bounds
    min_clear = math.inf
    traj = [state.position.copy()]
    log_rows = []
    command_rows = []
    reason = "timeout"
    success = False

    for step in range(cfg.max_steps):
        state = step_dynamics(state, prev_cmd, cfg.dt, cfg.tau_v, prev_yaw_rate)
        traj.append(state.position.copy())
        clearance = world.min_distance(state.position) - cfg.robot_radius
        min_clear = min(min_clear, clearance)
        log_rows.append(
            f"{step},{state.position[0]:.5f},{state.position[1]:.5f},"
            f"{state.position[2]:.5f},{state.velocity[0]:.5f},"
            f"{state.velocity[1]:.5f},{state.velocity[2]:.5f},{clearance:.5f}")
        if clearance <= 0.0:
            reason = "collision"
            break
        x, y, z = state.position
        if x >= xmax:
            success, reason = True, "goal"
            break
        if not (xmin <= x and ymin <= y <= ymax and zmin <= z <= zmax):
            reason = "out_of_bounds"
            break

        rng = np.random.default_rng(np.random.SeedSequence((seed, step)))
        rows = measure_rows(world, state, rig, noise, rng)
        for sid in sensors:
            images[sid] = np.vstack([images[sid][1:], envelope(rows[sid])[None, :]])

        if policy == "potential":
            g_hats = {sid: denoiser(images[sid]) for sid in sensors}
            sets = {sid: detect_paths(g_hats[sid], cfg.tau_c, rig, sid)
                    for sid in sensors}
            if cfg.three_d:
                buf = trilaterate(sets["L"], sets["R"], sets["D"], rig)
            else:
                buf = bilaterate(sets["L"], sets["R"], rig)
            prev_cmd = np.array(potential_step(buf, nav_state, gains))
            prev_yaw_rate = 0.0
            command_rows.append(command_log_row(step * cfg.dt, prev_cmd,
                                                buf.closest()))
        else:
            g_hat = denoiser(images["L"])
            ps = detect_paths(g_hat, cfg.tau_c, rig, "L")
            positive = ps.paths[ps.paths > 0]
            nearest = float(positive[0]) / 2.0 if positive.size else None
            v_body, yaw = batdeck_step(nearest, nav_state, batdeck)
            c, s = math.cos(state.heading), math.sin(state.heading)
            prev_cmd = np.array([v_body * c, v_body * s, 0.0])
            prev_yaw_rate = yaw
            command_rows.append(command_log_row(step * cfg.dt,
                                                (v_body, 0.0, 0.0), None))
    else:
        step = cfg.max_steps - 1

    return EpisodeResult(success=success, reason=reason, steps=step + 1,
                         trajectory=np.array(traj), min_clearance=min_clear,
                         log_rows=log_rows, command_rows=command_rows)


EPISODE_LOG_HEADER = "step,x,y,z,vx,vy,vz,min_clearance"


# ---------------------------------------------------------------------------
# Ray casting and traversability

def _ray_box(origin, direction, box: Box):
    lo = box.center - box.half
    hi = box.center + box.half
    t0, t1 = 0.0, math.inf
    for a in range(3):
        if abs(direction[a]) < 1e-12:
            if not lo[a] <= origin[a] <= hi[a]:
                return None
            continue
        ta = (lo[a] - origin[a]) / direction[a]
        tb = (hi[a] - origin[a]) / direction[a]
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return None
    return t0 if t0 > 1e-9 else (t1 if t1 > 1e-9 else None)


def _ray_cylinder(origin, direction, cyl: Cylinder):
    ox, oy = origin[0] - cyl.cx, origin[1] - cyl.cy
    dx, dy = direction[0], direction[1]
    a = dx * dx + dy * dy
    hits = []
    if a > 1e-12:
        b = 2 * (ox * dx + oy * dy)
        c = ox * ox + oy * oy - cyl.radius**2
        disc = b * b - 4 * a * c
        if disc >= 0:
            sq = math.sqrt(disc)
            for t in ((-b - sq) / (2 * a), (-b + sq) / (2 * a)):
                if t > 1e-9:
                    z = origin[2] + direction[2] * t
                    if cyl.z0 <= z <= cyl.z1:
                        hits.append(t)
    if abs(direction[2]) > 1e-12:  # end caps
        for zc in (cyl.z0, cyl.z1):
            t = (zc - origin[2]) / direction[2]
            if t > 1e-9:
                x = origin[0] + direction[0] * t - cyl.cx
                y = origin[1] + direction[1] * t - cyl.cy
                if math.hypot(x, y) <= cyl.radius:
                    hits.append(t)
    return min(hits) if hits else None


def _ray_point(origin, direction, pt: PointReflector):
    oc = np.asarray(origin) - pt.pos
    b = 2 * float(np.dot(oc, direction))
    c = float(np.dot(oc, oc)) - pt.RADIUS**2
    disc = b * b - 4 * c
    if disc < 0:
        return None
    t = (-b - math.sqrt(disc)) / 2
    return t if t > 1e-9 else None


def _ray_bounds_exit(origin, direction, bounds):
    xmin, xmax, ymin, ymax, zmin, zmax = bounds
    t_exit = math.inf
    for a, (lo, hi) in enumerate(((xmin, xmax), (ymin, ymax), (zmin, zmax))):
        if abs(direction[a]) < 1e-12:
            continue
        for plane in (lo, hi):
            t = (plane - origin[a]) / direction[a]
            if t > 1e-9:
                t_exit = min(t_exit, t)
    return t_exit


def ray_distance(world: WorldModel, origin, direction) -> float:
    """Distance along a unit ray to the first obstacle, capped at the
    arena boundary."""
    direction = np.asarray(direction, dtype=float)
    best = _ray_bounds_exit(origin, direction, world.bounds)
    for ob in world.obstacles:
        if isinstance(ob, Box):
            t = _ray_box(origin, direction, ob)
        elif isinstance(ob, Cylinder):
            t = _ray_cylinder(origin, direction, ob)
        else:
            t = _ray_point(origin, direction, ob)
        if t is not None:
            best = min(best, t)
    return float(best)


SECTOR_COUNT = 7
SECTOR_WIDTH_DEG = 20.0


def traversability(world: WorldModel, samples: int = 1100, seed: int = 0,
                   altitude: float = FLIGHT_ALTITUDE) -> float:
    """Mean obstacle-free ray distance over random poses and the seven
    20-degree heading sectors (heading fixed forward)."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x7A)))
    xmin, xmax, ymin, ymax, *_ = world.bounds
    angles = np.deg2rad((np.arange(SECTOR_COUNT) - SECTOR_COUNT // 2)
                        * SECTOR_WIDTH_DEG)
    total = 0.0
    count = 0
    for _ in range(samples):
        pos = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax), altitude])
        for ang in angles:
            d = ray_distance(world, pos, np.array([math.cos(ang), math.sin(ang), 0.0]))
            total += d
            count += 1
    return total / count


# ---------------------------------------------------------------------------
# Course generation

# obstacle dimension ranges (m): length x height x thickness
_COURSE_DIMS = {
    "sparse": ((0.25, 0.69), (1.21, 1.70), (0.19, 0.25)),
    "composite": ((0.25, 0.46), (1.21, 1.38), (0.19, 0.45)),
    "thin_poles": ((0.015, 0.06), (1.52, 1.83), (0.015, 0.06)),
    "walls": ((1.00, 1.60), (1.25, 1.50), (2e-5, 2e-5)),
}
_COURSE_COUNT = {"sparse": 3, "composite": 6, "thin_poles": 7, "walls": 4}


def _spawn_obstacle(kind, rng, x, y) -> object:
    length, height, thick = (rng.uniform(*r) for r in _COURSE_DIMS[kind])
    if kind == "thin_poles":
        return Cylinder(cx=x, cy=y, z0=0.0, z1=height, radius=length / 2,
                        reflectivity=0.5, kernel_label="pole")
    if kind == "composite" and rng.integers(0, 2):
        return Cylinder(cx=x, cy=y, z0=0.0, z1=height, radius=length / 2,
                        reflectivity=0.7, kernel_label="tunnel")
    refl = 0.8 if kind == "walls" else 1.0
    return Box(cx=x, cy=y, cz=height / 2, ex=thick, ey=length, ez=height,
               reflectivity=refl, kernel_label="box")


def gen_course(kind: str, seed: int, bounds=ARENA,
               altitude: float = FLIGHT_ALTITUDE) -> WorldModel:
    """Randomized obstacle course; the start pose is chosen so a straight
    flight along +x would collide."""
    if kind not in _COURSE_DIMS:
        raise ValueError(f"unknown course kind {kind!r}")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC0)))
    xmin, xmax, ymin, ymax, *_ = bounds
    gap = {"sparse": 1.1, "composite": 0.6, "thin_poles": 0.45, "walls": 0.9}[kind]
    obstacles = []
    guard = 0
    while len(obstacles) < _COURSE_COUNT[kind] and guard < 4000:
        guard += 1
        x = rng.uniform(xmin + 2.5, xmax - 2.0)
        y = rng.uniform(ymin + 0.45, ymax - 0.45)
        ob = _spawn_obstacle(kind, rng, x, y)
        if any(other.distance(np.array([x, y, altitude])) < gap for other in obstacles):
            continue
        obstacles.append(ob)
    world = WorldModel(obstacles=obstacles, bounds=bounds)

    # start pose: random lateral position whose straight path hits something
    for _ in range(500):
        y0 = rng.uniform(ymin + 0.4, ymax - 0.4)
        start = np.array([xmin + 0.5, y0, altitude])
        hit = ray_distance(world, start, np.array([1.0, 0.0, 0.0]))
        if hit < (xmax - xmin) - 1.2 and world.min_distance(start) > 0.4:
            world.start = start
            return world
    # fall back: drop a blocking obstacle straight ahead of a random start
    y0 = rng.uniform(ymin + 0.4, ymax - 0.4)
    world.obstacles.append(_spawn_obstacle(kind, rng, (xmin + xmax) / 2, y0))
    world.start = np.array([xmin + 0.5, y0, altitude])
    return world


# ---------------------------------------------------------------------------
# World file format (plain text, one primitive per line)

def save_world(path, world: WorldModel) -> None:
    lines = ["# echonav world 1"]
    lines.append("bounds " + " ".join(repr(float(v)) for v in world.bounds))
    if world.start is not None:
        lines.append("start " + " ".join(repr(float(v)) for v in world.start))
    for ob in world.obstacles:
        if isinstance(ob, Cylinder):
            lines.append(f"cylinder {ob.cx!r} {ob.cy!r} {ob.z0!r} {ob.z1!r} "
                         f"{ob.radius!r} {ob.reflectivity!r} {ob.kernel_label}")
        elif isinstance(ob, Box):
            lines.append(f"box {ob.cx!r} {ob.cy!r} {ob.cz!r} {ob.ex!r} {ob.ey!r} "
                         f"{ob.ez!r} {ob.reflectivity!r} {ob.kernel_label}")
        elif isinstance(ob, PointReflector):
            lines.append(f"point {ob.x!r} {ob.y!r} {ob.z!r} "
                         f"{ob.reflectivity!r} {ob.kernel_label}")
        else:
            raise TypeError(f"unsupported obstacle {type(ob).__name__}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_world(path) -> WorldModel:
    bounds = ARENA
    start = None
    obstacles = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            kind, args = parts[0], parts[1:]
            try:
                if kind == "bounds":
                    bounds = tuple(float(v) for v in args[:6])
                elif kind == "start":
                    start = np.array([float(v) for v in args[:3]])
                elif kind == "cylinder":
                    obstacles.append(Cylinder(*(float(v) for v in args[:6]),
                                              kernel_label=args[6]))
                elif kind == "box":
                    obstacles.append(Box(*(float(v) for v in args[:7]),
                                         kernel_label=args[7]))
                elif kind == "point":
                    obstacles.append(PointReflector(*(float(v) for v in args[:4]),
                                                    kernel_label=args[4]))
                else:
                    raise ValueError(f"unknown primitive {kind!r}")
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return WorldModel(obstacles=obstacles, bounds=bounds, start=start)
