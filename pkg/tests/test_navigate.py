import math

import numpy as np
import pytest

from echonav.localize import Detection, DetectionBuffer
from echonav.navigate import (
    BatDeckParams,
    NavGains,
    NavState,
    batdeck_step,
    potential_step,
)

G = NavGains()


def buf(*entries):
    return DetectionBuffer([Detection(r, phi, theta, 1) for r, phi, theta in entries])


class TestPotentialStep:
    def test_empty_buffer_cruises(self):
        state = NavState()
        u0 = state.u_avoid.copy()
        cmd = potential_step(DetectionBuffer([]), state, G)
        assert cmd == (G.v_d, 0.0, 0.0)
        assert np.array_equal(state.u_avoid, u0)

    def test_dead_ahead_formula(self):
        state = NavState()
        cmd = potential_step(buf((1.0, 0.0, 0.0)), state, G)
        assert cmd[0] == pytest.approx(1.0 - 0.5 * 1.0 / 1.0)
        # hysteresis branch: |yz| = 0 < delta, direction held from init (+y)
        assert cmd[1] == pytest.approx(G.k_y * 1.0)
        assert cmd[2] == pytest.approx(0.0)
        assert np.array_equal(state.u_avoid, [1.0, 0.0])

    def test_engagement_boundary_strict(self):
        r = 1.0
        phi = math.asin(G.delta_max / r)  # |yz| == delta_max exactly
        cmd = potential_step(buf((r, phi, 0.0)), NavState(), G)
        assert cmd[1] == 0.0
        assert cmd[2] == 0.0

    def test_update_then_engage_order(self):
        # obstacle off-axis beyond delta but inside delta_max: the dodge
        # direction refreshes first, then the lateral command uses it
        state = NavState()
        r, phi = 1.0, math.asin(0.3)
        cmd = potential_step(buf((r, phi, 0.0)), state, G)
        assert state.u_avoid[0] == pytest.approx(-1.0)
        assert cmd[1] == pytest.approx(-G.k_y)

    def test_permutation_invariance(self):
        entries = [(1.4, 0.2, 0.0), (0.9, -0.4, 0.1), (1.1, 0.0, 0.0)]
        cmds = []
        for order in ([0, 1, 2], [2, 0, 1], [1, 2, 0]):
            state = NavState()
            cmds.append(potential_step(buf(*[entries[i] for i in order]), state, G))
        assert cmds[0] == cmds[1] == cmds[2]

    def test_vx_monotone_in_range_dead_ahead(self):
        prev = math.inf
        for r in (1.6, 1.2, 1.0, 0.8, 0.6):
            cmd = potential_step(buf((r, 0.0, 0.0)), NavState(), G)
            assert cmd[0] <= prev
            prev = cmd[0]
        assert prev == 0.0  # floored at zero close in

    def test_floor_switch(self):
        gains = NavGains(floor_v_x=False)
        cmd = potential_step(buf((0.4, 0.0, 0.0)), NavState(), gains)
        assert cmd[0] < 0.0

    def test_vx_never_exceeds_vd(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            b = buf((rng.uniform(0.1, 1.6), rng.uniform(-1.2, 1.2),
                     rng.uniform(-0.5, 0.5)))
            cmd = potential_step(b, NavState(), G)
            assert cmd[0] <= G.v_d + 1e-12

    def test_hysteresis_state_stability(self):
        state = NavState()
        state.u_avoid = np.array([0.0, 1.0])
        for phi in np.linspace(-0.04, 0.04, 25):
            potential_step(buf((1.0, math.asin(abs(phi)) * np.sign(phi), 0.0)),
                           state, G)
            assert np.array_equal(state.u_avoid, [0.0, 1.0])

    def test_lateral_authority_bound(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            b = buf((rng.uniform(0.2, 1.5), rng.uniform(-1.0, 1.0),
                     rng.uniform(-0.4, 0.4)))
            _, vy, vz = potential_step(b, NavState(), G)
            assert math.hypot(vy, vz) <= math.hypot(G.k_y, G.k_z) + 1e-12

    def test_gain_validation(self):
        with pytest.raises(ValueError):
            NavGains(v_d=0.0)
        with pytest.raises(ValueError):
            NavGains(delta=0.0)
        with pytest.raises(ValueError):
            NavGains(delta=0.9, delta_max=0.8)


class TestBatDeck:
    P = BatDeckParams()

    def test_no_obstacle_cruises(self):
        cmd = batdeck_step(None, NavState.seeded(0), self.P)
        assert cmd == (self.P.v_d, 0.0)

    def test_stop_distance(self):
        v, _ = batdeck_step(self.P.d_stop, NavState.seeded(0), self.P)
        assert v == 0.0

    def test_midpoint_half_speed(self):
        mid = (self.P.d_stop + self.P.d_free) / 2
        v, _ = batdeck_step(mid, NavState.seeded(0), self.P)
        assert v == pytest.approx(self.P.v_d / 2)

    def test_yaw_applied_when_in_view(self):
        state = NavState.seeded(1)
        _, yaw = batdeck_step(1.0, state, self.P)
        assert abs(yaw) == pytest.approx(self.P.yaw_rate)

    def test_turn_sign_rerandomized_on_schedule(self):
        state = NavState.seeded(3)
        signs = []
        steps_per_period = int(self.P.turn_period / self.P.dt)
        for _ in range(4 * steps_per_period):
            batdeck_step(1.0, state, self.P)
            signs.append(state.turn_sign)
        changes = [i for i in range(1, len(signs)) if signs[i] != signs[i - 1]]
        assert all((i + 1) % steps_per_period == 0 for i in changes)

    def test_deterministic_given_seed(self):
        seqs = []
        for _ in range(2):
            state = NavState.seeded(7)
            seq = []
            for k in range(400):
                seq.append(batdeck_step(1.0 if k % 3 else None, state, self.P))
            seqs.append(seq)
        assert seqs[0] == seqs[1]

    def test_config_error(self):
        with pytest.raises(ValueError):
            BatDeckParams(d_stop=1.5, d_free=1.0)
