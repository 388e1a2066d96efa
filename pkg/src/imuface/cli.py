"""Command-line entry point: ``imuface <subcommand> ...``.

Errors are reported as one JSON line on stderr and mapped to distinct exit
codes (see ``EXIT_CODES``)."""

from __future__ import annotations

import argparse
import csv
import errno
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import metrics
from .autodiff.checkpoint import CheckpointError
from .calib import CalibrationProfile, calibrate_sequence, mag_calibrate
from .config import ConfigError, PipelineConfig, load_config
from .diffusion import (
    Denoiser,
    condition_stats,
    load_model,
    make_windows,
    save_model,
    train,
    windowed_inference,
)
from .facesim import (
    NoiseConfig,
    default_rig,
    evaluate_mesh,
    generate_synthetic_weights,
    load_rig,
    load_weights,
    random_head_motion,
    save_weights,
    simulate_sequence,
)
from .sequence import ImuSequence, read_jsonl, write_jsonl
from .stream import PacketError, bind_socket, ingest, replay

log = logging.getLogger("imuface")

EXIT_OK = 0
EXIT_GENERIC = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_INVALID = 4
EXIT_PORT_IN_USE = 5
EXIT_RUNTIME = 6

EXIT_CODES = {
    EXIT_OK: "ok",
    EXIT_GENERIC: "error",
    EXIT_USAGE: "usage",
    EXIT_MISSING_FILE: "missing_file",
    EXIT_INVALID: "invalid_input",
    EXIT_PORT_IN_USE: "port_in_use",
    EXIT_RUNTIME: "runtime",
}

ENV_PORT = "IMUFACE_PORT"
ENV_SEED = "IMUFACE_SEED"


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, f"{self.prog}: {message}")


def _fail(code: int, message: str) -> int:
    line = {"error": EXIT_CODES[code], "exit_code": code, "message": " ".join(str(message).split())}
    print(json.dumps(line), file=sys.stderr)
    return code


# ---------------------------------------------------------------- helpers


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if os.environ.get(ENV_SEED):
        cfg.seed = _env_int(ENV_SEED)
    if os.environ.get(ENV_PORT):
        cfg.stream.port = _env_int(ENV_PORT)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.paper_literal:
        cfg.paper_literal()
    return cfg.validate()


def _env_int(name: str) -> int:
    try:
        return int(os.environ[name])
    except ValueError:
        raise ConfigError(f"environment variable {name} must be an integer, got {os.environ[name]!r}") from None


def _rig(cfg: PipelineConfig, override: str | None = None):
    path = override or cfg.sim.rig
    return load_rig(path) if path else default_rig()


def _need(path: str | Path) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"file not found: {p}")
    return p


def _read_seq(path, cfg: PipelineConfig) -> ImuSequence:
    return read_jsonl(_need(path), fps=cfg.sim.fps)


def _read_mag_csv(path: Path) -> np.ndarray:
    rows = []
    with path.open() as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not "".join(row).strip():
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if i == 0:
                    continue  # header
                raise ValueError(f"{path}:{i + 1}: non-numeric magnetometer sample") from None
    arr = np.array(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{path}: expected 3 columns (mx, my, mz), got shape {arr.shape}")
    return arr


def _parse_pairs(items, what: str) -> dict[int, float]:
    out = {}
    for item in items or []:
        try:
            k, v = item.split("=", 1)
            out[int(k)] = float(v)
        except ValueError:
            raise CliError(EXIT_USAGE, f"--{what} expects SENSOR=VALUE, got {item!r}") from None
    return out


def _parse_ids(text: str) -> list[int]:
    ids: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            ids.extend(range(int(lo), int(hi) + 1))
        elif part:
            ids.append(int(part))
    return ids


# ------------------------------------------------------------ subcommands


def cmd_mag_calibrate(args, cfg) -> int:
    cal = mag_calibrate(_read_mag_csv(_need(args.input)), outlier_k=args.outlier_k)
    Path(args.output).write_text(json.dumps(cal.to_dict(), indent=2) + "\n")
    return EXIT_OK


def cmd_simulate(args, cfg) -> int:
    rig = _rig(cfg, args.rig)
    if len(rig.anchors) != cfg.sim.sensors:
        raise ConfigError(f"rig has {len(rig.anchors)} sensors but config expects {cfg.sim.sensors}")
    frames = args.frames or cfg.sim.frames
    seed = cfg.seed
    W = generate_synthetic_weights(rig.m, frames, seed=seed, style=args.style or cfg.sim.style, fps=cfg.sim.fps)
    head = random_head_motion(frames, seed=seed + 1, max_deg=cfg.sim.head_motion_deg, fps=cfg.sim.fps) if cfg.sim.head_motion_deg > 0 else None
    tap = args.tap_frame if args.tap_frame is not None else cfg.sim.tap_frame
    noise = NoiseConfig(cfg.sim.acc_noise_std, cfg.sim.ori_noise_deg, seed + 2)
    raw, profile = simulate_sequence(
        rig, W, head, n=cfg.sim.smoothing_n, noise=noise, denominator=cfg.sim.denominator,
        orientation=cfg.sim.orientation, fps=cfg.sim.fps, tap_frame=tap,
    )
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(raw, out / f"{args.name}.raw.jsonl")
    save_weights(W, out / f"{args.name}.weights.csv", rig.blendshape_names)
    profile.save(out / f"{args.name}.profile.json")
    if args.calibrated:
        write_jsonl(calibrate_sequence(profile, raw, cfg.sim.acc_head_comp), out / f"{args.name}.calib.jsonl")
    return EXIT_OK


def cmd_replay(args, cfg) -> int:
    raw = _read_seq(args.input, cfg)
    st = cfg.stream
    if args.jitter_us is not None:
        st.jitter_us = args.jitter_us
    if args.drop_pct is not None:
        st.drop_pct = args.drop_pct
    st.offsets_us.update(_parse_pairs(args.offset, "offset"))
    st.drifts_ppm.update(_parse_pairs(args.drift, "drift"))
    port = args.port or st.port
    n = replay(raw, (args.host or st.host, port), st.faults(cfg.seed), realtime=args.realtime or st.realtime, speed=args.speed)
    print(json.dumps({"datagrams": n, "port": port}))
    return EXIT_OK


def cmd_ingest(args, cfg) -> int:
    expected = _parse_ids(args.expected) if args.expected else list(_rig(cfg).sensor_ids)
    port = args.port or cfg.stream.port
    sock = bind_socket(args.host or cfg.stream.host, port)
    try:
        res = ingest(
            sock, expected, duration=args.duration or cfg.stream.duration,
            idle_timeout=args.idle_timeout or cfg.stream.idle_timeout, fps=cfg.sim.fps,
        )
    finally:
        sock.close()
    write_jsonl(res.sequence, args.output)
    report = {
        "frames": res.sequence.n_frames,
        "tap_index": res.tap_index,
        "clock": res.clock.to_dict(),
        "decode_errors": dict(res.decode_errors),
        "provenance": {
            name: int(np.sum(res.frames.sequence.flags == i)) for i, name in enumerate(("measured", "interpolated", "held"))
        },
        "warnings": res.warnings,
    }
    text = json.dumps(report, indent=2) + "\n"
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_calibrate(args, cfg) -> int:
    raw = _read_seq(args.input, cfg)
    profile = CalibrationProfile.load(_need(args.profile))
    write_jsonl(calibrate_sequence(profile, raw, args.acc_head_comp or cfg.sim.acc_head_comp), args.output)
    return EXIT_OK


def _load_dataset(root: Path, cfg: PipelineConfig):
    """(name, condition, weights, exclude ids) per sequence in a dataset dir."""
    names = sorted(p.name[: -len(".raw.jsonl")] for p in root.glob("*.raw.jsonl"))
    if not names:
        raise ValueError(f"{root}: no <name>.raw.jsonl sequences")
    items = []
    for name in names:
        W = load_weights(_need(root / f"{name}.weights.csv"))
        profile = CalibrationProfile.load(_need(root / f"{name}.profile.json"))
        calib_path = root / f"{name}.calib.jsonl"
        if calib_path.exists():
            seq = read_jsonl(calib_path, cfg.sim.fps)
        else:
            seq = calibrate_sequence(profile, read_jsonl(root / f"{name}.raw.jsonl", cfg.sim.fps), cfg.sim.acc_head_comp)
        exclude = (seq.sensor_ids[profile.aux_index],)
        C = seq.condition_matrix(exclude=exclude)
        if len(C) != len(W):
            raise ValueError(f"{name}: {len(C)} IMU frames but {len(W)} weight frames")
        items.append((name, C, W, exclude))
    return items


def cmd_train(args, cfg) -> int:
    items = _load_dataset(_need(args.dataset), cfg)
    dc, tc = cfg.denoiser, cfg.train
    if args.epochs is not None:
        tc.epochs = args.epochs
    tc.seed = cfg.seed
    C0, W0 = items[0][1], items[0][2]
    if C0.shape[1] != dc.cond_width or W0.shape[1] != dc.m:
        raise ConfigError(f"dataset has condition width {C0.shape[1]} and m={W0.shape[1]}; config expects {dc.cond_width} and {dc.m}")
    n_eval = int(round(len(items) * args.eval_fraction)) if len(items) > 1 else 0
    train_items, eval_items = items[: len(items) - n_eval], items[len(items) - n_eval :]
    stride = tc.stride or max(1, dc.window // 2)
    tw = [make_windows(C, W, dc.window, stride) for _, C, W, _ in train_items]
    Ct, Wt = np.concatenate([c for c, _ in tw]), np.concatenate([w for _, w in tw])
    eval_data = None
    if eval_items:
        ew = [make_windows(C, W, dc.window, dc.window) for _, C, W, _ in eval_items]
        eval_data = (np.concatenate([c for c, _ in ew]), np.concatenate([w for _, w in ew]))

    model = Denoiser.init(dc, seed=cfg.seed)
    model.cond_mean, model.cond_std = condition_stats([C for _, C, _, _ in train_items])
    schedule = tc.schedule()
    hist = train(model, schedule, Ct, Wt, tc, eval_data, on_epoch=lambda e, tr, ev: log.info("epoch %d train %.5f eval %s", e, tr, ev))
    extra = {"exclude_sensors": list(items[0][3]), "train": {k: getattr(tc, k) for k in ("epochs", "batch_size", "lr", "seed")}, "overlap": cfg.overlap}
    save_model(args.output, model, schedule, extra)
    hist.write_csv(args.loss_csv or Path(args.output).with_suffix(".loss.csv"))
    return EXIT_OK


def cmd_infer(args, cfg) -> int:
    model, schedule, extra = load_model(_need(args.checkpoint))
    seq = _read_seq(args.input, cfg)
    C = seq.condition_matrix(exclude=tuple(extra.get("exclude_sensors", (0,))))
    if C.shape[1] != model.config.cond_width:
        raise ValueError(f"sequence condition width {C.shape[1]} does not match checkpoint {model.config.cond_width}")
    overlap = args.overlap if args.overlap is not None else extra.get("overlap", cfg.overlap)
    W = windowed_inference(schedule, model, C, overlap=overlap, seed=cfg.seed)
    save_weights(W, args.output)
    return EXIT_OK


def cmd_eval(args, cfg) -> int:
    rig = _rig(cfg, args.rig)
    pred, gt = load_weights(_need(args.pred)), load_weights(_need(args.gt))
    if pred.shape != gt.shape or pred.shape[1] != rig.m:
        raise ValueError(f"pred {pred.shape} and gt {gt.shape} must match and have {rig.m} channels")
    report = metrics.EvalReport.compute(
        evaluate_mesh(rig, pred), evaluate_mesh(rig, gt), rig.landmark_indices, pred, gt, pooling=args.pooling
    )
    prefix = Path(args.output)
    report.write_csv(prefix.with_suffix(".csv"))
    report.write_json(prefix.with_suffix(".json"))
    print(json.dumps(report.summary()))
    return EXIT_OK


def cmd_placement_report(args, cfg) -> int:
    seq = _read_seq(args.input, cfg)
    rig = _rig(cfg, args.rig)
    names = {a.sensor_id: (a.zone, a.name) for a in rig.anchors}
    rows = [(sid, *names.get(sid, ("?", "?")), v) for sid, v in metrics.placement_table(seq, exclude=(args.aux,))]
    lines = ["sensor,zone,name,variation_x1e-3"] + [f"{s},{z},{n},{v:.6f}" for s, z, n, v in rows]
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="imuface", description="IMU-driven facial tracking pipeline.")
    p.add_argument("--config", help="pipeline config (TOML or JSON)")
    p.add_argument("--seed", type=int, help=f"global seed (env {ENV_SEED})")
    p.add_argument("--paper-literal", action="store_true", help="literal acceleration denominator and orientation matrix")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("mag-calibrate", help="magnetometer CSV -> offset/scale JSON")
    s.add_argument("input", help="CSV of mx,my,mz rows (optional header)")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--outlier-k", type=float, default=4.0)
    s.set_defaults(func=cmd_mag_calibrate)

    s = sub.add_parser("simulate", help="synthetic raw IMU sequence, weights and profile")
    s.add_argument("-o", "--outdir", required=True)
    s.add_argument("--name", default="seq")
    s.add_argument("--frames", type=int)
    s.add_argument("--style", choices=("expression", "speech", "neutral"))
    s.add_argument("--tap-frame", type=int)
    s.add_argument("--rig")
    s.add_argument("--calibrated", action="store_true", help="also write <name>.calib.jsonl")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("replay", help="stream a raw sequence over UDP")
    s.add_argument("input")
    s.add_argument("--host")
    s.add_argument("--port", type=int, help=f"default 47500 (env {ENV_PORT})")
    s.add_argument("--jitter-us", type=float)
    s.add_argument("--drop-pct", type=float)
    s.add_argument("--offset", action="append", metavar="SENSOR=US")
    s.add_argument("--drift", action="append", metavar="SENSOR=PPM")
    s.add_argument("--realtime", action="store_true")
    s.add_argument("--speed", type=float, default=1.0)
    s.set_defaults(func=cmd_replay)

    s = sub.add_parser("ingest", help="receive UDP packets into a raw sequence")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--host")
    s.add_argument("--port", type=int, help=f"default 47500 (env {ENV_PORT})")
    s.add_argument("--expected", help="sensor ids, e.g. 0-11 or 0,1,5")
    s.add_argument("--duration", type=float, help="maximum seconds to listen")
    s.add_argument("--idle-timeout", type=float, help="stop after this many silent seconds")
    s.add_argument("--report", help="write the clock/tap report here instead of stdout")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("calibrate", help="raw sequence + profile -> calibrated sequence")
    s.add_argument("input")
    s.add_argument("profile")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--acc-head-comp", choices=("literal", "inverse"))
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("train", help="train the denoiser on a dataset directory")
    s.add_argument("dataset")
    s.add_argument("-o", "--output", required=True, help="checkpoint path")
    s.add_argument("--loss-csv")
    s.add_argument("--epochs", type=int)
    s.add_argument("--eval-fraction", type=float, default=0.2)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("infer", help="windowed inference on a calibrated sequence")
    s.add_argument("checkpoint")
    s.add_argument("input")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--overlap", type=int)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("eval", help="PVE / PVE_LMK / MSE report")
    s.add_argument("pred")
    s.add_argument("gt")
    s.add_argument("-o", "--output", required=True, help="output prefix (.csv and .json)")
    s.add_argument("--rig")
    s.add_argument("--pooling", choices=("frame", "vertex"), default="frame")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("placement-report", help="per-sensor acceleration-magnitude variance")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.add_argument("--rig")
    s.add_argument("--aux", type=int, default=0)
    s.set_defaults(func=cmd_placement_report)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except CliError as exc:
        return _fail(exc.code, exc)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, _config(args))
    except CliError as exc:
        return _fail(exc.code, exc)
    except FileNotFoundError as exc:
        return _fail(EXIT_MISSING_FILE, exc)
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            return _fail(EXIT_PORT_IN_USE, exc)
        return _fail(EXIT_GENERIC, exc)
    except (ConfigError, CheckpointError, PacketError, ValueError) as exc:
        return _fail(EXIT_INVALID, exc)
    except LookupError as exc:
        return _fail(EXIT_RUNTIME, exc.args[0] if exc.args else exc)
    except Exception as exc:  # noqa: BLE001
        return _fail(EXIT_GENERIC, f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
