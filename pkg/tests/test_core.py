import math

import numpy as np
import pytest

from echonav.core import (
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

RIG = SensorRig()


class TestSensorRig:
    def test_default_max_range_near_1p66_m(self):
        assert RIG.max_range == pytest.approx(1.66, rel=0.01)

    def test_invariant_violations(self):
        with pytest.raises(ValueError):
            SensorRig(sampling_rate=0)
        with pytest.raises(ValueError):
            SensorRig(n_samples=1)
        with pytest.raises(ValueError):
            SensorRig(history=0)
        with pytest.raises(ValueError):
            SensorRig(baseline_h=0)
        with pytest.raises(ValueError):
            SensorRig(baseline_v=-0.1)

    def test_with_3d(self):
        rig = RIG.with_3d(0.06)
        assert rig.baseline_v == 0.06
        assert rig.baseline_h == RIG.baseline_h


class TestRangeIndexConversions:
    def test_zero_range(self):
        assert range_to_index(0.0, RIG) == 0

    def test_boundary_is_out_of_range(self):
        assert range_to_index(RIG.max_range, RIG) is None

    def test_one_meter(self):
        # oracle: direct evaluation of floor(2 d f / c)
        expect = math.floor(2.0 * 1.0 * RIG.sampling_rate / RIG.speed_of_sound)
        assert expect == 308
        assert range_to_index(1.0, RIG) == expect
        # cross-check: index 308 maps to <= 1.0 m, 309 to > 1.0 m
        assert 308 * RIG.speed_of_sound / (2 * RIG.sampling_rate) <= 1.0
        assert 309 * RIG.speed_of_sound / (2 * RIG.sampling_rate) > 1.0

    def test_negative_range_rejected(self):
        with pytest.raises(ValueError):
            range_to_index(-0.01, RIG)

    def test_index_to_path_endpoints(self):
        assert index_to_path(0, RIG) == 0.0
        expect = 308 * RIG.speed_of_sound / RIG.sampling_rate
        assert index_to_path(308, RIG) == pytest.approx(expect)
        with pytest.raises(ValueError):
            index_to_path(-1, RIG)
        with pytest.raises(ValueError):
            index_to_path(RIG.n_samples, RIG)

    def test_round_trip_property(self):
        # index_to_path(range_to_index(d))/2 in (d - c/2f, d] for random d
        rng = np.random.default_rng(7)
        bin_w = RIG.range_bin
        for d in rng.uniform(0.0, RIG.max_range * 0.999, 10_000):
            j = range_to_index(float(d), RIG)
            back = index_to_path(j, RIG) / 2.0
            assert back <= d + 1e-12
            assert back > d - bin_w - 1e-12

    def test_monotonicity(self):
        ds = np.linspace(0, RIG.max_range * 0.99, 500)
        idx = [range_to_index(float(d), RIG) for d in ds]
        assert all(b >= a for a, b in zip(idx, idx[1:]))
        paths = [index_to_path(j, RIG) for j in range(RIG.n_samples)]
        assert all(b > a for a, b in zip(paths, paths[1:]))


class TestDoppler:
    def test_zero_velocity_identity(self):
        for f in (1.0, 53_000.0, 1e6):
            assert doppler_shift(0.0, f) == f

    def test_paper_operating_point(self):
        # 6.3 m/s closing speed at 53 kHz: shift ~ 1983 Hz
        shift = doppler_shift(6.3, 53_000.0, 343.0) - 53_000.0
        assert shift == pytest.approx(1983.0, abs=1.0)

    def test_receding_asymmetry(self):
        # oracle: direct evaluation of f*(c+v)/(c-v) - f at v = -6.3
        f, c = 53_000.0, 343.0
        expect = f * (c - 6.3) / (c + 6.3) - f
        assert expect == pytest.approx(-1911.82, abs=0.01)
        shift = doppler_shift(-6.3, f, c) - f
        assert shift == pytest.approx(expect)
        assert abs(shift) < abs(doppler_shift(6.3, f, c) - f)

    def test_model_breakdown(self):
        with pytest.raises(ValueError):
            doppler_shift(343.0, 53_000.0, 343.0)
        with pytest.raises(ValueError):
            doppler_shift(-400.0, 53_000.0, 343.0)


class TestPsnr:
    def test_peak_equals_rms(self):
        echo = np.full((2, 4), 0.5)
        noise = NoiseRef(np.full(100, 0.5))
        assert psnr_db(echo, noise) == pytest.approx(0.0)

    def test_log_identity(self):
        noise = NoiseRef(np.full(100, 0.1))
        echo = np.zeros((2, 4))
        echo[0, 0] = 1.0
        assert psnr_db(echo, noise) == pytest.approx(20.0)

    def test_all_zero_echo(self):
        assert psnr_db(np.zeros((2, 4)), NoiseRef(np.ones(8))) == float("-inf")

    def test_zero_rms_rejected(self):
        with pytest.raises(ValueError):
            psnr_db(np.ones((2, 2)), NoiseRef(np.zeros(8)))

    def test_scale_invariance_property(self):
        rng = np.random.default_rng(11)
        echo = rng.uniform(0, 1, (8, 16))
        noise = rng.normal(0, 0.3, 256)
        base = psnr_db(echo, NoiseRef(noise))
        for c in (0.01, 3.7, 1e4):
            assert psnr_db(echo * c, NoiseRef(noise * c)) == pytest.approx(base)

    def test_noise_rms_tracks_mutation(self):
        ref = NoiseRef(np.ones(16))
        assert ref.rms == pytest.approx(1.0)
        ref.samples = ref.samples * 2.0
        assert ref.rms == pytest.approx(2.0)


class TestEchoImageValidation:
    def test_shape_mismatch_is_hard_error(self):
        with pytest.raises(ValueError):
            as_echo_image(np.zeros((4, 4)), RIG)

    def test_negative_amplitudes_rejected(self):
        with pytest.raises(ValueError):
            as_echo_image(np.array([[0.0, -1.0]]))


class TestContainer:
    def test_known_size(self):
        blob = encode_image(np.zeros((32, 512), dtype=np.float32))
        assert len(blob) == 16 + 32 * 512 * 4

    def test_round_trip_property(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            rows = int(rng.integers(1, 40))
            cols = int(rng.integers(1, 600))
            img = rng.uniform(0, 1, (rows, cols)).astype(np.float32)
            blob = encode_image(img)
            back = decode_image(blob)
            assert back.dtype == np.float32
            assert np.array_equal(back, img)
            assert encode_image(back) == blob  # bit-exact both ways

    def test_bad_magic(self):
        blob = b"XXXX" + encode_image(np.zeros((2, 2)))[4:]
        with pytest.raises(ContainerError, match="offset 0"):
            decode_image(blob)

    def test_truncated_payload(self):
        blob = encode_image(np.zeros((4, 4)))
        with pytest.raises(ContainerError, match="truncated"):
            decode_image(blob[:-3])

    def test_dtype_mismatch(self):
        blob = bytearray(encode_image(np.zeros((2, 2))))
        blob[6] = 9
        with pytest.raises(ContainerError, match="dtype"):
            decode_image(bytes(blob))

    def test_trailing_bytes_rejected(self):
        blob = encode_image(np.zeros((2, 2))) + b"\x00"
        with pytest.raises(ContainerError, match="trailing"):
            decode_image(blob)
