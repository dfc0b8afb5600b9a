"""Command-line interface.

Subcommands: gen, train, denoise, localize, simulate, bench, course.
Exit codes: 0 success, 1 configuration error, 2 runtime failure,
3 benchmark gate failure (for CI).
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError
from .core import read_image, write_image
from .localize import detect_paths, detections_to_csv, bilaterate, trilaterate
from .modelio import read_model, write_model
from .synth import DatasetReader, generate_dataset

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_GATE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="echonav", description=__doc__)
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--config", type=str, default=None, help="key=value config file")
    p.add_argument("--out", type=str, default=None, help="output directory")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a training dataset")
    g.add_argument("--pairs", type=int, default=None)
    g.add_argument("--full-scale", action="store_true")

    t = sub.add_parser("train", help="train the denoiser")
    t.add_argument("--data", required=True, help=".srngset file or its directory")
    t.add_argument("--model-out", default=None, help="model path (default out/model.srnm)")
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--batch", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--width", type=int, default=None)
    t.add_argument("--full-scale", action="store_true")

    d = sub.add_parser("denoise", help="denoise one echo image")
    d.add_argument("--input", required=True, help="SRNG image")
    d.add_argument("--output", required=True, help="SRNG result")
    d.add_argument("--method", default="net",
                   choices=["net", "tdlms", "gaussian", "tvl1", "tvl1_sg"])
    d.add_argument("--model", default=None, help="SRNM model (net method)")

    l = sub.add_parser("localize", help="detect and localize from echo images")
    l.add_argument("--left", required=True)
    l.add_argument("--right", required=True)
    l.add_argument("--down", default=None)
    l.add_argument("--model", default=None, help="denoise inputs first")
    l.add_argument("--tau-c", type=float, default=None)
    l.add_argument("--csv", default=None, help="output CSV (default stdout)")

    s = sub.add_parser("simulate", help="run closed-loop episodes")
    s.add_argument("--course", default="sparse",
                   choices=["sparse", "composite", "thin_poles", "walls"])
    s.add_argument("--world", default=None, help="world file instead of --course")
    s.add_argument("--episodes", type=int, default=20)
    s.add_argument("--policy", default="potential", choices=["potential", "batdeck"])
    s.add_argument("--speed", type=float, default=None)
    s.add_argument("--noise", default="none",
                   help="'none', 'hover' or 'psnr:<db>'")
    s.add_argument("--model", default=None, help="use the net as the denoiser")
    s.add_argument("--three-d", action="store_true")

    b = sub.add_parser("bench", help="denoising method comparison sweep")
    b.add_argument("--levels", default=None, help="comma-separated PSNR dB list")
    b.add_argument("--trials", type=int, default=None)
    b.add_argument("--model", default=None, help="SRNM model for the net row")
    b.add_argument("--csv", default=None, help="output CSV (default out/bench.csv)")
    b.add_argument("--no-timing", action="store_true",
                   help="zero the runtime column for byte-reproducible CSVs")
    b.add_argument("--gate", action="store_true",
                   help="exit 3 unless the net beats gaussian and tvl1")

    c = sub.add_parser("course", help="generate an obstacle-course world file")
    c.add_argument("--kind", default="sparse",
                   choices=["sparse", "composite", "thin_poles", "walls"])
    c.add_argument("--world-out", default=None, help="default out/world.txt")
    return p


def _outdir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dataset_path(data: str) -> str:
    p = Path(data)
    if p.is_dir():
        p = p / "index.srngset"
    return str(p)


def _cmd_gen(args, cfg, seed):
    from .config import rig_from, sampler_from

    pairs = args.pairs or (cfg["train.full_pairs"] if args.full_scale
                           else cfg["synth.pairs"])
    out = _outdir(args) / "index.srngset"
    generate_dataset(out, pairs, rig_from(cfg), seed, sampler_from(cfg),
                     psnr_range=(cfg["synth.psnr_min"], cfg["synth.psnr_max"]))
    print(f"wrote {pairs} pairs to {out}")
    return EXIT_OK


def _cmd_train(args, cfg, seed):
    from .training import TrainConfig, train

    if args.full_scale:
        lr, batch = cfg["train.full_learning_rate"], cfg["train.full_batch_size"]
        epochs, width = cfg["train.full_epochs"], cfg["train.full_width"]
    else:
        lr, batch = cfg["train.learning_rate"], cfg["train.batch_size"]
        epochs, width = cfg["train.epochs"], cfg["train.width"]
    tc = TrainConfig(
        dataset=_dataset_path(args.data),
        learning_rate=args.lr or lr,
        batch_size=args.batch or batch,
        epochs=args.epochs or epochs,
        width=args.width or width,
        seed=seed,
        val_fraction=cfg["train.val_fraction"],
    )
    net, hist = train(tc, progress=lambda e, h: print(
        f"epoch {e}: train {h['train_loss'][-1]:.6f}"
        + (f" val {h['val_mse'][-1]:.6f}" if h["val_mse"] else ""), flush=True))
    model_path = Path(args.model_out) if args.model_out else _outdir(args) / "model.srnm"
    write_model(model_path, net, {"learning_rate": tc.learning_rate,
                                  "batch_size": tc.batch_size, "epochs": tc.epochs})
    hist_path = model_path.with_suffix(".loss.csv")
    with open(hist_path, "w") as fh:
        fh.write("epoch,train_loss,val_mse\n")
        for i, tl in enumerate(hist["train_loss"]):
            vm = hist["val_mse"][i] if i < len(hist["val_mse"]) else float("nan")
            fh.write(f"{i},{tl:.8f},{vm:.8f}\n")
    if hist["zeros_mse"]:
        ratio = hist["zeros_mse"] / hist["val_mse"][-1]
        print(f"held-out MSE {hist['val_mse'][-1]:.6f} "
              f"(all-zeros baseline {hist['zeros_mse']:.6f}, {ratio:.1f}x better)")
    print(f"wrote {model_path} ({net.param_count():,} parameters)")
    return EXIT_OK


def _denoiser_from_model(path):
    from .nn import denoise

    net, _ = read_model(path)
    return lambda img: denoise(net, img), net


def _cmd_denoise(args, cfg, seed):
    img = read_image(args.input)
    if args.method == "net":
        if not args.model:
            raise ConfigError("--method net needs --model")
        fn, _ = _denoiser_from_model(args.model)
        out = fn(img)
    else:
        from .classical import gaussian_blur, savgol_rows, tdlms, tv_l1

        peak = img.max()
        x = img / peak if peak > 0 else img
        if args.method == "tdlms":
            out = tdlms(x, cfg["classical.tdlms_kernel"], cfg["classical.tdlms_mu"])
        elif args.method == "gaussian":
            out = gaussian_blur(x, cfg["classical.gaussian_size"],
                                cfg["classical.gaussian_sigma"])
        elif args.method == "tvl1":
            out = tv_l1(x, cfg["classical.tv_lambda"], cfg["classical.tv_iters"],
                        cfg["classical.tv_tol"])
        else:
            out = savgol_rows(tv_l1(x, cfg["classical.tv_lambda"],
                                    cfg["classical.tv_iters"],
                                    cfg["classical.tv_tol"]),
                              cfg["classical.savgol_window"],
                              cfg["classical.savgol_order"])
        out = np.maximum(out, 0.0)
    write_image(args.output, out)
    print(f"wrote {args.output}")
    return EXIT_OK


def _cmd_localize(args, cfg, seed):
    from .config import rig_from

    tau_c = args.tau_c if args.tau_c is not None else cfg["localize.tau_c"]
    three_d = args.down is not None
    rig = rig_from(cfg, three_d=three_d)
    images = {"L": read_image(args.left), "R": read_image(args.right)}
    if three_d:
        images["D"] = read_image(args.down)
    if args.model:
        fn, _ = _denoiser_from_model(args.model)
        images = {k: fn(v) for k, v in images.items()}
    sets = {k: detect_paths(v, tau_c, rig, k) for k, v in images.items()}
    if three_d:
        buffer = trilaterate(sets["L"], sets["R"], sets["D"], rig)
    else:
        buffer = bilaterate(sets["L"], sets["R"], rig)
    text = detections_to_csv(buffer)
    if args.csv:
        Path(args.csv).write_text(text)
        print(f"wrote {args.csv}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _parse_noise(cfg, spec: str):
    if spec == "none":
        return None
    if spec == "hover":
        return cfgmod.noise_from(cfg)
    if spec.startswith("psnr:"):
        return cfgmod.noise_from(cfg, scale=float(spec.split(":", 1)[1]))
    raise ConfigError(f"bad --noise value {spec!r}")


def _cmd_simulate(args, cfg, seed):
    from .config import batdeck_from, episode_from, gains_from, rig_from
    from .navigate import command_log_header
    from .sim import EPISODE_LOG_HEADER, gen_course, load_world, run_episode

    rig = rig_from(cfg, three_d=args.three_d)
    noise = _parse_noise(cfg, args.noise)
    denoiser = None
    if args.model:
        denoiser, _ = _denoiser_from_model(args.model)
    gains = gains_from(cfg, v_d=args.speed, two_d=not args.three_d)
    batdeck = batdeck_from(cfg, v_d=args.speed)
    ep_cfg = episode_from(cfg, three_d=args.three_d)
    out = _outdir(args)

    successes = 0
    summary = ["episode,seed,success,reason,steps,min_clearance"]
    for k in range(args.episodes):
        ep_seed = seed + k
        world = (load_world(args.world) if args.world
                 else gen_course(args.course, ep_seed))
        res = run_episode(world, rig, seed=ep_seed, policy=args.policy,
                          gains=gains, batdeck=batdeck, noise=noise,
                          denoiser=denoiser, cfg=ep_cfg)
        successes += int(res.success)
        summary.append(f"{k},{ep_seed},{int(res.success)},{res.reason},"
                       f"{res.steps},{res.min_clearance:.5f}")
        log = out / f"episode_{k:03d}.csv"
        log.write_text(EPISODE_LOG_HEADER + "\n" + "\n".join(res.log_rows) + "\n")
        cmd_log = out / f"commands_{k:03d}.csv"
        cmd_log.write_text(command_log_header() + "\n"
                           + "\n".join(res.command_rows) + "\n")
    (out / "summary.csv").write_text("\n".join(summary) + "\n")
    print(f"{successes}/{args.episodes} successes ({args.policy}, "
          f"course={args.world or args.course})")
    return EXIT_OK


def _cmd_bench(args, cfg, seed):
    from .bench import (make_methods, mean_by_method_level, psnr_sweep,
                        rows_to_csv, runtime_summary)
    from .config import rig_from

    levels = ([float(v) for v in args.levels.split(",")] if args.levels
              else cfg["bench.levels"])
    trials = args.trials or cfg["bench.trials"]
    net = None
    if args.model:
        _, net = _denoiser_from_model(args.model)
    methods = make_methods(net=net, tau_c=cfg["localize.tau_c"],
                           sobel_tau=cfg["classical.sobel_tau"])
    rows = psnr_sweep(methods, levels, trials, rig_from(cfg), seed=seed,
                      timing=not args.no_timing)
    csv_path = Path(args.csv) if args.csv else _outdir(args) / "bench.csv"
    csv_path.write_text(rows_to_csv(rows))
    print(f"wrote {csv_path}")
    if not args.no_timing:
        for method, ms in sorted(runtime_summary(rows).items()):
            print(f"runtime {method}: {ms:.2f} ms/inference")
    if args.gate:
        if net is None:
            raise ConfigError("--gate needs --model")
        means = mean_by_method_level(rows, "position_rmse_m")
        for level in levels:
            for rival in ("gaussian", "tvl1"):
                if means[("net", level)] >= means[(rival, level)]:
                    print(f"GATE FAIL at {level} dB: net {means[('net', level)]:.4f}"
                          f" >= {rival} {means[(rival, level)]:.4f}")
                    return EXIT_GATE
        print("GATE PASS")
    return EXIT_OK


def _cmd_course(args, cfg, seed):
    from .sim import gen_course, save_world

    world = gen_course(args.kind, seed)
    path = Path(args.world_out) if args.world_out else _outdir(args) / "world.txt"
    save_world(path, world)
    print(f"wrote {path} ({len(world.obstacles)} obstacles)")
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "denoise": _cmd_denoise,
    "localize": _cmd_localize,
    "simulate": _cmd_simulate,
    "bench": _cmd_bench,
    "course": _cmd_course,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = cfgmod.load_config(args.config)
        seed = args.seed if args.seed is not None else cfg["seed"]
        return _COMMANDS[args.command](args, cfg, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
