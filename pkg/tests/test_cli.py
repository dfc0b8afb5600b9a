import numpy as np
import pytest

from echonav.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from echonav.config import ConfigError, DEFAULTS, load_config
from echonav.core import SensorRig, read_image, write_image
from echonav.synth import NoiseSpec, ObstacleTrack, synthesize_sample, synthetic_kernel

SMALL_CFG = """
# small rig for fast CLI tests
rig.n_samples = 128
rig.history = 16
synth.pairs = 6
synth.psnr_min = 3
synth.psnr_max = 12
train.epochs = 1
train.width = 4
bench.trials = 2
sim.max_steps = 60
"""


@pytest.fixture()
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_CFG)
    return str(path)


class TestConfig:
    def test_defaults_load(self):
        cfg = load_config(None)
        assert cfg == DEFAULTS

    def test_override_and_types(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("rig.n_samples = 256\nnav.v_d = 1.5\nnav.floor_v_x = false\n"
                     "bench.levels = -5, 0, 5\n")
        cfg = load_config(p)
        assert cfg["rig.n_samples"] == 256
        assert cfg["nav.v_d"] == 1.5
        assert cfg["nav.floor_v_x"] is False
        assert cfg["bench.levels"] == [-5.0, 0.0, 5.0]

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("does.not.exist = 1\n")
        with pytest.raises(ConfigError):
            load_config(p)

    def test_bad_value(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("rig.n_samples = many\n")
        with pytest.raises(ConfigError):
            load_config(p)


class TestCliFlow:
    def test_course_then_simulate(self, tmp_path, small_cfg):
        out = tmp_path / "course"
        rc = main(["--seed", "3", "--out", str(out), "course", "--kind", "sparse"])
        assert rc == EXIT_OK
        world_file = out / "world.txt"
        assert world_file.exists()

        sim_out = tmp_path / "sim"
        rc = main(["--seed", "3", "--config", small_cfg, "--out", str(sim_out),
                   "simulate", "--world", str(world_file), "--episodes", "2"])
        assert rc == EXIT_OK
        assert (sim_out / "summary.csv").exists()
        assert (sim_out / "episode_000.csv").exists()
        header = (sim_out / "episode_000.csv").read_text().splitlines()[0]
        assert header == "step,x,y,z,vx,vy,vz,min_clearance"

    def test_gen_train_denoise_localize(self, tmp_path, small_cfg):
        data_dir = tmp_path / "data"
        rc = main(["--seed", "1", "--config", small_cfg, "--out", str(data_dir),
                   "gen"])
        assert rc == EXIT_OK
        assert (data_dir / "index.srngset").exists()

        model_dir = tmp_path / "model"
        rc = main(["--seed", "1", "--config", small_cfg, "--out", str(model_dir),
                   "train", "--data", str(data_dir)])
        assert rc == EXIT_OK
        model = model_dir / "model.srnm"
        assert model.exists()
        assert model.with_suffix(".loss.csv").exists()

        rig = SensorRig(n_samples=128, history=16)
        e, _ = synthesize_sample([ObstacleTrack(0.5, 0.05, 0.2, 0.1)],
                                 synthetic_kernel("pole"),
                                 NoiseSpec(scale=9.0), rig, 7)
        img = tmp_path / "echo.srng"
        write_image(img, e)

        den = tmp_path / "denoised.srng"
        rc = main(["--config", small_cfg, "denoise", "--input", str(img),
                   "--output", str(den), "--method", "net",
                   "--model", str(model)])
        assert rc == EXIT_OK
        out = read_image(den)
        assert out.shape == (16, 128)
        assert np.all((out >= 0) & (out <= 1))

        rc = main(["--config", small_cfg, "denoise", "--input", str(img),
                   "--output", str(den), "--method", "gaussian"])
        assert rc == EXIT_OK

        loc_csv = tmp_path / "det.csv"
        rc = main(["--config", small_cfg, "localize", "--left", str(img),
                   "--right", str(img), "--tau-c", "0.5",
                   "--csv", str(loc_csv)])
        assert rc == EXIT_OK
        assert loc_csv.read_text().startswith("r,phi_deg,theta_deg,support")

    def test_bench_deterministic_csv(self, tmp_path, small_cfg):
        csv1 = tmp_path / "b1.csv"
        csv2 = tmp_path / "b2.csv"
        base = ["--seed", "5", "--config", small_cfg, "--out", str(tmp_path)]
        rc = main(base + ["bench", "--levels", "0", "--trials", "2",
                          "--csv", str(csv1), "--no-timing"])
        assert rc == EXIT_OK
        rc = main(base + ["bench", "--levels", "0", "--trials", "2",
                          "--csv", str(csv2), "--no-timing"])
        assert rc == EXIT_OK
        assert csv1.read_bytes() == csv2.read_bytes()
        assert csv1.read_text().splitlines()[0] == (
            "method,psnr_db,trial,position_rmse_m,ssim,mse,runtime_ms")


class TestExitCodes:
    def test_unknown_flag_is_config_error(self):
        assert main(["--bogus", "course"]) == EXIT_CONFIG

    def test_bad_config_key_is_config_error(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("nope = 1\n")
        assert main(["--config", str(p), "course"]) == EXIT_CONFIG

    def test_missing_file_is_runtime_error(self, tmp_path):
        assert main(["train", "--data", str(tmp_path / "missing.srngset")]) \
            == EXIT_RUNTIME

    def test_gate_without_model_is_config_error(self, tmp_path):
        assert main(["--out", str(tmp_path), "bench", "--levels", "0",
                     "--trials", "1", "--gate"]) == EXIT_CONFIG

    def test_bad_noise_spec(self, tmp_path):
        assert main(["--out", str(tmp_path), "simulate", "--episodes", "1",
                     "--noise", "loud"]) == EXIT_CONFIG
