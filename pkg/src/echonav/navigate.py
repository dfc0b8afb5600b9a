"""Reactive navigation policies.

The primary policy is a potential-field velocity controller: forward
speed is reduced by an inverse-cube repulsion from the closest obstacle
and a lateral/vertical dodge runs along a hysteresis-stabilized unit
vector pointing away from it.  A BatDeck-style single-sensor baseline
(linear speed ramp plus timed random yaw alternation) is included for
comparison.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .localize import DetectionBuffer


@dataclass(frozen=True)
class NavGains:
    v_d: float = 1.0          # m/s desired forward speed
    k_x: float = 0.5          # forward repulsive gain
    k_y: float = 0.6          # lateral repulsive gain
    k_z: float = 0.6          # vertical repulsive gain (0 for 2-D runs)
    delta: float = 0.05       # m, hysteresis threshold
    delta_max: float = 0.8    # m, lateral engagement distance
    floor_v_x: bool = True    # clamp commanded V_x at zero (no reversal)

    def __post_init__(self):
        if self.v_d <= 0:
            raise ValueError("v_d must be positive")
        if min(self.k_x, self.k_y, self.k_z) < 0:
            raise ValueError("gains must be >= 0")
        if not 0 < self.delta <= self.delta_max:
            raise ValueError("need 0 < delta <= delta_max")


@dataclass
class NavState:
    """Mutable controller state owned by one stepper at a time.

    u_avoid is the persisted unit dodge direction in the (y, z) plane;
    before any off-axis obstacle is seen it points to +y (dodge right).
    The remaining fields serve the BatDeck baseline.
    """

    u_avoid: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0]))
    turn_sign: int = 1
    turn_timer: float = 0.0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    @classmethod
    def seeded(cls, seed: int) -> "NavState":
        state = cls(rng=np.random.default_rng(np.random.SeedSequence((seed, 0xA0))))
        state.turn_sign = 1 if state.rng.integers(0, 2) else -1
        return state


def potential_step(buffer: DetectionBuffer, state: NavState,
                   gains: NavGains) -> tuple[float, float, float]:
    """One control step; mutates state.u_avoid and returns (V_x, V_y, V_z).

    The closest detection drives everything.  The dodge direction updates
    only while the obstacle is clearly off-axis (|yz| > delta); lateral
    commands engage only within delta_max (strict).
    """
    det = buffer.closest()
    if det is None:
        return (gains.v_d, 0.0, 0.0)
    r, phi, theta = det.r, det.phi, det.theta
    x = r * math.cos(theta) * math.cos(phi)
    y = r * math.cos(theta) * math.sin(phi)
    z = r * math.sin(theta)
    v_x = gains.v_d - gains.k_x * x / r**3
    if gains.floor_v_x:
        v_x = max(v_x, 0.0)
    yz = math.hypot(y, z)
    if yz > gains.delta:
        state.u_avoid = np.array([-y, -z]) / yz
    if yz < gains.delta_max:
        v_y = gains.k_y * state.u_avoid[0]
        v_z = gains.k_z * state.u_avoid[1]
    else:
        v_y = v_z = 0.0
    return (v_x, v_y, v_z)


@dataclass(frozen=True)
class BatDeckParams:
    v_d: float = 1.0
    d_stop: float = 0.5       # m, full stop distance
    d_free: float = 1.5       # m, full speed distance
    yaw_rate: float = 0.9     # rad/s applied while an obstacle is in view
    turn_period: float = 10.0  # s between random turn-direction draws
    dt: float = 1.0 / 16.0

    def __post_init__(self):
        if self.d_stop >= self.d_free:
            raise ValueError("d_stop must be below d_free")
        if self.dt <= 0 or self.turn_period <= 0:
            raise ValueError("dt and turn_period must be positive")


def batdeck_step(nearest_range, state: NavState,
                 params: BatDeckParams) -> tuple[float, float]:
    """Single-sensor baseline: (V_x, yaw_rate).

    Forward speed ramps linearly from v_d at d_free to zero at d_stop;
    yaw is applied whenever an obstacle is in view, with the turn
    direction re-randomized every turn_period seconds.
    """
    state.turn_timer += params.dt
    if state.turn_timer >= params.turn_period:
        state.turn_timer = 0.0
        state.turn_sign = 1 if state.rng.integers(0, 2) else -1
    if nearest_range is None:
        return (params.v_d, 0.0)
    frac = (nearest_range - params.d_stop) / (params.d_free - params.d_stop)
    v_x = params.v_d * min(max(frac, 0.0), 1.0)
    return (v_x, state.turn_sign * params.yaw_rate)


def command_log_header() -> str:
    return "t,vx,vy,vz,r,phi,theta"


def command_log_row(t, cmd, det) -> str:
    r = det.r if det else float("nan")
    phi = det.phi if det else float("nan")
    theta = det.theta if det else float("nan")
    return (f"{t:.4f},{cmd[0]:.6f},{cmd[1]:.6f},{cmd[2]:.6f},"
            f"{r:.6f},{phi:.6f},{theta:.6f}")
