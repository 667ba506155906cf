"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data or file-format error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .autodiff import NumericalError, ShapeError, no_grad
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .data import (
    DEFAULT_N,
    DEFAULT_T,
    TensorFileError,
    WaveParams,
    generate_waves,
    load_frames,
    normalize,
    sample_batch,
    split_frames,
    window,
    write_tensor_file,
)
from .discriminator import activation_concentration, critic_forward, extract_activation_map, stack_sequence
from .evaluation import evaluate, format_psnr, predict_windows, write_reports
from .generative import GenerativeModel, GeneratorSpec, as_frames, count_params, count_params_by_scale
from .gradsuite import run_suite
from .training import TrainConfig, Trainer, write_metrics

log = logging.getLogger("neurovid")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
CHANNEL_PRESETS = {"64": (64, 64), "128": (128, 128)}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_channels(text: str) -> tuple:
    if text in CHANNEL_PRESETS:
        return CHANNEL_PRESETS[text]
    try:
        widths = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"channels must be 64, 128, N or N1,N2; got {text!r}") from None
    if len(widths) == 1:
        widths = widths * 2
    if len(widths) != 2 or min(widths) < 1:
        raise argparse.ArgumentTypeError(f"channels must be two positive widths, got {text!r}")
    return widths


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected on or off, got {text!r}")
    return text == "on"


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="neurovid", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="file of key=value lines; command-line flags take precedence")
        return p

    p = command("gen-data", "write a synthetic traveling-wave recording")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=2000)
    p.add_argument("--height", type=int, default=18)
    p.add_argument("--width", type=int, default=20)
    p.add_argument("--kind", choices=("plane", "spiral", "pulse"), default="plane")
    p.add_argument("--speed", type=float, default=0.5)
    p.add_argument("--direction", type=float, default=0.6)
    p.add_argument("--wavelength", type=float, default=8.0)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)

    p = command("train", "train a generator (optionally with the critic)")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=("benchmark", "mrlstm", "mrlayer"), default="benchmark")
    p.add_argument("--channels", type=parse_channels, default=(64, 64))
    p.add_argument("--adv", type=_on_off, default=False)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--clip", type=float, default=1e-3)
    p.add_argument("--lambda-adv", type=float, default=0.1)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--stride", type=int, default=1, help="window stride over the training split")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--metrics-csv")
    p.add_argument("--resume", action="store_true", help="continue from --out-checkpoint if it exists")

    for name, help_text in (("predict", "write predicted futures for each test window"),
                            ("eval", "per-horizon PSNR report with persistence baseline"),
                            ("inspect-critic", "export critic activation maps")):
        p = command(name, help_text)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--split", choices=("test", "all"), default="test")
        p.add_argument("--batch", type=int, default=8)
        if name == "eval":
            p.add_argument("--report", required=True)
            p.add_argument("--peak", type=float, help="PSNR peak (default: max |value| over the test data)")
        else:
            p.add_argument("--out", required=True)
        if name == "inspect-critic":
            p.add_argument("--window", type=int, default=0)
            p.add_argument("--critic", default=None, help="critic key (default: the full-rate critic)")

    p = command("count-params", "print the exact parameter count")
    p.add_argument("--model", choices=("benchmark", "mrlstm", "mrlayer"), default="benchmark")
    p.add_argument("--channels", type=parse_channels, default=(64, 64))
    p.add_argument("--height", type=int, default=18)
    p.add_argument("--width", type=int, default=20)
    p.add_argument("--by-scale", action="store_true")

    p = command("grad-check", "finite-difference check of every op")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--critic-seeds", type=int, default=2)
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list, args: argparse.Namespace) -> argparse.Namespace:
    """Re-parse with defaults from ``--config``; explicit flags still win."""
    if not getattr(args, "config", None):
        return args
    try:
        lines = Path(args.config).read_text().splitlines()
    except OSError as exc:
        raise TensorFileError(f"cannot read config file {args.config}: {exc}") from None
    extra = []
    for number, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{args.config}:{number}: expected key=value, got {line!r}")
        key = key.strip().replace("_", "-")
        value = value.strip()
        flag = f"--{key}"
        if flag in argv or any(a.startswith(flag + "=") for a in argv):
            continue
        if key == "config":
            raise UsageError("config files cannot include other config files")
        if key == "resume" or key == "by-scale":
            if value.lower() in ("1", "true", "yes", "on"):
                extra.append(flag)
            continue
        extra += [flag, value]
    return parser.parse_args(argv + extra)


def _model_name(kind: str) -> str:
    return {"multi_res_lstm": "mrlstm", "multi_res_layers": "mrlayer"}.get(kind, kind)


def _log_config(args: argparse.Namespace) -> None:
    for key, value in sorted(vars(args).items()):
        log.info("config %s=%s", key, value)


def _test_windows(path, trainer: Trainer, split: str) -> np.ndarray:
    spec = trainer.model.spec
    frames = load_frames(path, (spec.height, spec.width))
    if trainer.scale is not None:
        frames = trainer.scale.apply(frames)
    if split == "test":
        frames = split_frames(frames)[1]
    if len(frames) < spec.t + spec.n:
        raise TensorFileError(f"{path}: {len(frames)} {split} frames, need at least {spec.t + spec.n}")
    return window(frames, spec.t, spec.n, stride=spec.t + spec.n).astype(np.float32)


def cmd_gen_data(args) -> int:
    params = WaveParams(kind=args.kind, height=args.height, width=args.width, speed=args.speed,
                        direction=args.direction, wavelength=args.wavelength, amplitude=args.amplitude,
                        noise=args.noise, seed=args.seed)
    frames = generate_waves(params, args.frames)
    write_tensor_file(args.out, frames)
    print(f"wrote {frames.shape[0]} frames of {frames.shape[1]}x{frames.shape[2]} to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    out = Path(args.out_checkpoint)
    if args.resume and out.exists():
        trainer = load_checkpoint(out)
        spec = trainer.model.spec
        log.info("resuming %s at iteration %d", out, trainer.iteration)
        frames = load_frames(args.data, (spec.height, spec.width))
        frames = trainer.scale.apply(frames)
    else:
        frames = load_frames(args.data)
        frames, scale = normalize(frames)
        spec = GeneratorSpec(args.model, args.channels, frames.shape[1], frames.shape[2], t=DEFAULT_T, n=DEFAULT_N)
        config = TrainConfig(lambda_adv=args.lambda_adv, learning_rate=args.lr, total_iterations=args.iters,
                             clip_norm=args.clip, adversarial=args.adv, batch_size=args.batch, seed=args.seed)
        trainer = Trainer(GenerativeModel(spec, args.seed), config, scale=scale)
    train_frames = split_frames(frames)[0]
    windows = window(train_frames, spec.t, spec.n, args.stride).astype(np.float32)
    cfg = trainer.config
    started = time.time()

    def progress(row):
        if (row["iteration"] + 1) % 100 == 0:
            log.info("iteration %d  l_rec=%.4f  l_pred=%.4f  (%.1fs)", row["iteration"] + 1, row["l_rec"],
                     row["l_pred"], time.time() - started)

    rows = trainer.run(lambda k: sample_batch(windows, cfg.batch_size, cfg.seed, k), progress=progress)
    save_checkpoint(out, trainer)
    if args.metrics_csv:
        write_metrics(args.metrics_csv, rows)
    print(f"trained {_model_name(spec.kind)} for {trainer.iteration} iterations "
          f"({time.time() - started:.1f}s); checkpoint {out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    trainer = load_checkpoint(args.checkpoint)
    windows = _test_windows(args.data, trainer, args.split)
    pred = predict_windows(trainer.model, windows, trainer.model.spec.t, args.batch)
    if trainer.scale is not None:
        pred = trainer.scale.invert(pred)
    # [N, n, H, W] for a single-channel model
    write_tensor_file(args.out, pred[:, 0] if pred.shape[1] == 1 else pred)
    print(f"wrote predictions for {len(windows)} windows to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    trainer = load_checkpoint(args.checkpoint)
    windows = _test_windows(args.data, trainer, args.split)
    report, baseline = evaluate(trainer.model, windows, trainer.model.spec.t, args.peak, args.batch)
    paths = write_reports(args.report, report, baseline)
    print("horizon  model      persistence")
    for h, (m, b) in enumerate(zip(report.horizon_psnr, baseline.horizon_psnr), start=1):
        print(f"{h:7d}  {format_psnr(m):>9}  {format_psnr(b):>9}")
    print(f"aggregate {format_psnr(report.aggregate)}  persistence {format_psnr(baseline.aggregate)}")
    print("reports: " + ", ".join(str(p) for p in paths))
    return EXIT_OK


def cmd_inspect_critic(args) -> int:
    trainer = load_checkpoint(args.checkpoint)
    if not trainer.critics:
        raise CheckpointError(f"{args.checkpoint} was trained without a critic")
    key = args.critic or ("scale0" if "scale0" in trainer.critics else "model")
    if key not in trainer.critics:
        raise UsageError(f"unknown critic {key!r}; checkpoint has {sorted(trainer.critics)}")
    if key == "scale1":
        raise UsageError("activation export is defined on the full-rate critic")
    critic = trainer.critics[key]
    windows = _test_windows(args.data, trainer, args.split)
    if not 0 <= args.window < len(windows):
        raise UsageError(f"--window must be in [0, {len(windows)})")
    t = trainer.model.spec.t
    sample = windows[args.window:args.window + 1]
    past = as_frames(sample[:, :, :t])
    with no_grad():
        pred = trainer.model(past).predictions
        mode = "eval" if all(s.updates for s in critic.stats.values()) else "train"
        forward = critic_forward(critic, stack_sequence(past, pred), mode=mode, update_stats=False)
    fmap = extract_activation_map(forward, layer=-2, time_length=sample.shape[2])
    write_tensor_file(args.out, fmap)
    past_mag, future_mag = activation_concentration(fmap, t)
    print(f"activation map {fmap.shape} -> {args.out}")
    print(f"mean |activation| past={past_mag:.6f} future={future_mag:.6f}")
    return EXIT_OK


def cmd_count_params(args) -> int:
    spec = GeneratorSpec(args.model, args.channels, args.height, args.width)
    if args.by_scale:
        for name, value in count_params_by_scale(spec).items():
            print(f"{name} {value}")
    print(count_params(spec))
    return EXIT_OK


def cmd_grad_check(args) -> int:
    worst = run_suite(range(args.seeds), range(args.critic_seeds))
    failed = False
    for name, err in worst.items():
        ok = err < 1e-4
        failed |= not ok
        print(f"{name:20s} max_rel_error={err:.3e} {'PASS' if ok else 'FAIL'}")
    return EXIT_NUMERIC if failed else EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "inspect-critic": cmd_inspect_critic,
    "count-params": cmd_count_params,
    "grad-check": cmd_grad_check,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        args = _apply_config_file(parser, argv, args)
        logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                            format="%(levelname)s %(message)s", stream=sys.stderr)
        _log_config(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"neurovid: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"neurovid: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (TensorFileError, CheckpointError, ShapeError, FileNotFoundError, ValueError, KeyError) as exc:
        print(f"neurovid: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
