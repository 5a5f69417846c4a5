"""ledcovert command line.

Exit codes: 0 success, 1 usage or input error, 2 decode failure beyond the
allowed bit error rate.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .bits import bits_to_bytes, read_bits_text, write_bits_text
from .channel import (
    CameraConfig,
    capture_camera,
    read_frames,
    read_waveform_any,
    render_waveform,
    write_frames,
    write_waveform,
    write_waveform_binary,
)
from .errors import HardwareLimitError, LedCovertError, SyncNotFoundError
from .framing import PAYLOAD_BITS, build_frame, payload_chunks
from .harness import (
    REPRODUCE_TARGETS,
    SWEEP_VARIABLES,
    ExperimentConfig,
    load_config,
    plan,
    reproduce,
    run_roundtrip,
    sweep,
    write_reproduction,
    write_roundtrip,
    write_sweep,
    with_idle,
)
from .modulation import Scheme, read_timeline, write_timeline
from .receiver import compute_ber, decode_stream, demod_camera, receive_sensor
from .transmitter import PROFILES, emit_trace, frame_timeline, write_trace

EXIT_OK, EXIT_USAGE, EXIT_DECODE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _schemes() -> list[str]:
    return [s.value for s in Scheme]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--profile", choices=sorted(PROFILES), help="router profile")
    common.add_argument("--scheme", choices=_schemes(), help="modulation scheme")
    common.add_argument("--rate", type=float, help="bit rate in bit/s (default: fastest the profile allows)")
    common.add_argument("--levels", type=int, help="amplitude levels for ask_levels")
    common.add_argument("--seed", type=int, help="top-level random seed")
    common.add_argument("--config", type=Path, help="experiment config file")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")

    channel = argparse.ArgumentParser(add_help=False)
    channel.add_argument("--noise", type=float, help="Gaussian noise sigma, mV")
    channel.add_argument("--sample-rate", type=float, help="sensor sample rate, S/s")
    channel.add_argument("--flicker", type=float, help="ambient flicker amplitude, mV")
    channel.add_argument("--fps", type=float, help="camera frame rate (selects the camera receiver)")
    channel.add_argument("--frames-per-bit", type=int, help="camera frames per bit")

    p = _Parser(prog="ledcovert", description="Router LED optical covert channel simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("transmit", parents=[common, channel], help="payload -> frames -> timeline and sysfs trace")
    src = t.add_mutually_exclusive_group()
    src.add_argument("--hex", help="payload as hex, a multiple of 32 bytes")
    src.add_argument("--payload-file", type=Path, help="raw payload bytes, a multiple of 32 bytes")
    src.add_argument("--bits-file", type=Path, help="payload as 0/1 text, a multiple of 256 bits")
    t.add_argument("--frames", type=int, default=1, help="random payload frames when no payload is given")
    t.add_argument("--no-limits", action="store_true", help="write the timeline even if it breaks hardware limits")

    r = sub.add_parser("render", parents=[common, channel], help="timeline -> photodiode waveform")
    r.add_argument("timeline", type=Path)
    r.add_argument("--binary", action="store_true", help="write packed float32 instead of text")

    c = sub.add_parser("capture", parents=[common, channel], help="timeline -> camera frame states")
    c.add_argument("timeline", type=Path)
    c.add_argument("--shutter", type=float, default=0.5, help="exposure as a fraction of the frame period")
    c.add_argument("--phase", type=float, default=0.0, help="first exposure start, us (negative: random)")

    d = sub.add_parser("demod", parents=[common, channel], help="waveform or frames -> bits and decode report")
    d.add_argument("input", type=Path, help="waveform (.txt or float32) or frame CSV (.csv)")
    d.add_argument("--gap-frames", type=int, default=0, help="dark camera frames after each symbol")
    d.add_argument("--sent", type=Path, help="transmitted framed bits (0/1 text) for a BER figure")
    d.add_argument("--max-ber", type=float, default=0.05, help="BER above which the exit code is 2")

    rt = sub.add_parser("roundtrip", parents=[common, channel], help="full pipeline over seeded trials")
    rt.add_argument("--trials", type=int)
    rt.add_argument("--frames", type=int, help="frames per trial")
    rt.add_argument("--name", help="experiment name (output subdirectory)")
    rt.add_argument("--no-limits", action="store_true", help="run even if the timeline breaks hardware limits")
    rt.add_argument("--max-ber", type=float, default=0.05, help="mean BER above which the exit code is 2")

    sw = sub.add_parser("sweep", parents=[common, channel], help="roundtrip over a list of values")
    sw.add_argument("--var", required=True, choices=SWEEP_VARIABLES)
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--trials", type=int)
    sw.add_argument("--frames", type=int, help="frames per trial")
    sw.add_argument("--name", help="experiment name (output subdirectory)")

    rp = sub.add_parser("reproduce", parents=[common], help="canned figure and table experiments")
    rp.add_argument("target", choices=REPRODUCE_TARGETS)
    rp.add_argument("--trials", type=int, default=100, help="trials for the BER figures")
    return p


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    kw = {}
    if args.scheme:
        kw["scheme"] = Scheme.parse(args.scheme)
    if args.profile:
        kw["profile"] = args.profile
    if args.rate is not None:
        kw["rate_bps"] = args.rate
        kw["params"] = None
    if args.levels is not None:
        kw["n_levels"] = args.levels
    if args.seed is not None:
        kw["seed"] = args.seed
    for attr in ("trials", "frames", "name"):
        value = getattr(args, attr, None)
        if value is not None:
            kw[attr] = value
    if getattr(args, "no_limits", False):
        kw["enforce_limits"] = False
    ch = {}
    for attr, key in (("noise", "noise_sigma_mv"), ("sample_rate", "sample_rate"), ("flicker", "flicker_amp_mv")):
        value = getattr(args, attr, None)
        if value is not None:
            ch[key] = value
    if ch:
        kw["channel"] = replace(cfg.channel, **ch)
    if getattr(args, "fps", None) is not None:
        kw["camera"] = replace(cfg.camera or CameraConfig(), fps=args.fps)
    if getattr(args, "frames_per_bit", None) is not None:
        kw["frames_per_bit"] = args.frames_per_bit
    return replace(cfg, **kw)


def _payloads(args, rng: np.random.Generator) -> list[np.ndarray]:
    if args.hex:
        return payload_chunks(bytes.fromhex(args.hex.removeprefix("0x")))
    if args.payload_file:
        return payload_chunks(args.payload_file.read_bytes())
    if args.bits_file:
        bits = read_bits_text(args.bits_file)
        if bits.size % PAYLOAD_BITS:
            raise LedCovertError(f"payload bits must be a multiple of {PAYLOAD_BITS}, got {bits.size}")
        return payload_chunks(bits_to_bytes(bits))
    return [rng.integers(0, 2, PAYLOAD_BITS, dtype=np.uint8) for _ in range(args.frames)]


def cmd_transmit(args) -> int:
    cfg = _config(args)
    profile = cfg.router
    frames = [build_frame(p) for p in _payloads(args, np.random.default_rng(cfg.seed))]
    enforce = not args.no_limits
    params, _ = plan(cfg)
    timelines = [frame_timeline(f, cfg.scheme, profile, n_levels=cfg.resolved_levels(), params=params,
                                enforce_limits=enforce) for f in frames]
    tl = with_idle(timelines, cfg.scheme, params)
    args.out.mkdir(parents=True, exist_ok=True)
    write_timeline(args.out / "timeline.csv", tl)
    write_bits_text(args.out / "frame_bits.txt", np.concatenate(frames))
    trace = emit_trace(tl, profile, check=enforce)
    write_trace(args.out / "trace.csv", trace)
    print(f"frames={len(frames)} events={len(tl.events)} duration_us={tl.total_duration:g} writes={len(trace)}")
    return EXIT_OK


def cmd_render(args) -> int:
    cfg = _config(args)
    tl = read_timeline(args.timeline)
    wf = render_waveform(tl, cfg.router, replace(cfg.channel, rng_seed=cfg.seed))
    args.out.mkdir(parents=True, exist_ok=True)
    if args.binary:
        path = args.out / "waveform.f32"
        write_waveform_binary(path, wf)
    else:
        path = args.out / "waveform.txt"
        write_waveform(path, wf)
    print(f"samples={len(wf)} sample_rate_hz={wf.sample_rate:g} path={path}")
    return EXIT_OK


def cmd_capture(args) -> int:
    cfg = _config(args)
    tl = read_timeline(args.timeline)
    cam = replace(cfg.camera or CameraConfig(), shutter_fraction=args.shutter, rng_seed=cfg.seed,
                  phase_us=None if args.phase < 0 else args.phase)
    fs = capture_camera(tl, cfg.router, cam)
    args.out.mkdir(parents=True, exist_ok=True)
    write_frames(args.out / "frames.csv", fs)
    print(f"frames={fs.n_frames} leds={fs.n_leds} fps={fs.fps:g}")
    return EXIT_OK


def cmd_demod(args) -> int:
    cfg = _config(args)
    if args.input.suffix == ".csv":
        fs = read_frames(args.input)
        subset = [0] if cfg.scheme.single_led else None
        bits = demod_camera(fs, cfg.frames_per_bit, led_subset=subset, gap_frames=args.gap_frames)
        if cfg.scheme is Scheme.MANCHESTER:
            bits = bits[1::2]
    else:
        wf = read_waveform_any(args.input, getattr(args, "sample_rate", None))
        capture = receive_sensor(wf, cfg.scheme, cfg.resolved_levels() or 2)
        if not capture.calibrations:
            raise SyncNotFoundError("no preamble found in the waveform")
        bits = capture.bits
    report = decode_stream(bits)
    args.out.mkdir(parents=True, exist_ok=True)
    write_bits_text(args.out / "bits.txt", bits)
    text = report.to_text()
    failed = report.frames_ok == 0
    if args.sent:
        ber = compute_ber(read_bits_text(args.sent), bits)
        text += ber.to_text()
        failed = ber.ber > args.max_ber
    (args.out / "report.txt").write_text(text)
    sys.stdout.write(text)
    return EXIT_DECODE if failed else EXIT_OK


def cmd_roundtrip(args) -> int:
    cfg = _config(args)
    result = run_roundtrip(cfg, keep_artifacts=True)
    out = write_roundtrip(result, args.out)
    sys.stdout.write(result.summary())
    print(f"output={out}")
    return EXIT_DECODE if result.mean_ber > args.max_ber else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise LedCovertError(f"--values must be comma-separated numbers, got {args.values!r}") from None
    if cfg.name == "roundtrip":
        cfg = replace(cfg, name=f"sweep_{args.var}")
    result = sweep(cfg, args.var, values)
    out = write_sweep(cfg, result, args.out)
    sys.stdout.write(result.to_csv())
    print(f"output={out}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    rep = reproduce(args.target, seed=args.seed or 0, trials=args.trials)
    out = write_reproduction(rep, args.out)
    sys.stdout.write(rep.summary_text())
    print(f"output={out}")
    return EXIT_OK


COMMANDS = {
    "transmit": cmd_transmit,
    "render": cmd_render,
    "capture": cmd_capture,
    "demod": cmd_demod,
    "roundtrip": cmd_roundtrip,
    "sweep": cmd_sweep,
    "reproduce": cmd_reproduce,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except HardwareLimitError as exc:
        print(f"error: hardware limits exceeded\n{exc}", file=sys.stderr)
        return EXIT_USAGE
    except SyncNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DECODE
    except (LedCovertError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
