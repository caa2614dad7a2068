"""Command-line surface.

Subcommands: ``analyze`` (spatial parameters of a file), ``loss`` (objective
between a reference and an estimate), ``synth`` (scene dataset synthesis),
``eval`` (batch metrics over a manifest), ``bridge`` (one-shot binary
loss/gradient service on stdin/stdout).

Exit codes: 0 success, 1 I/O failure, 2 validation failure, 3 batch-level
failure (every row errored).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import bridge as bridge_mod
from .config import LossSetup
from .dataset import load_manifest, write_dataset
from .evaluate import batch_evaluate, oracle_wiener_enhance, write_report_csv, write_report_json
from .losses import loss_gradient, total_loss
from .signal import StereoSignal, StftConfig, stft
from .spatial import BandPartition, image_params, opd
from .wav import MonoInputError, WavFormatError, read_stereo

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_BATCH = 3

REQUIRED_RATE = 48000


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _read_input(path, upmix: bool) -> StereoSignal:
    sig = read_stereo(path, upmix=upmix)
    if sig.sample_rate != REQUIRED_RATE:
        raise ValueError(f"{path}: expected {REQUIRED_RATE} Hz input, got {sig.sample_rate}")
    return sig


def cmd_analyze(args) -> int:
    try:
        sig = _read_input(args.input, args.upmix)
        ref = _read_input(args.ref, args.upmix) if args.ref else None
    except MonoInputError as exc:
        return _fail(EXIT_VALIDATION, str(exc))
    except ValueError as exc:
        return _fail(EXIT_VALIDATION, str(exc))
    except (WavFormatError, OSError) as exc:
        return _fail(EXIT_IO, str(exc))

    cfg = StftConfig(window_len=args.window, hop=args.hop)
    if cfg.fft_bins % args.bands != 0:
        return _fail(EXIT_VALIDATION, f"{cfg.fft_bins} bins not divisible into {args.bands} bands")
    partition = BandPartition(cfg.fft_bins, cfg.fft_bins // args.bands)

    spec = stft(sig, cfg)
    params = image_params(spec, partition)
    out = {
        "frames": spec.frames,
        "bands": partition.band_count,
        "bins_per_band": partition.bins_per_band,
        "iid_db": params.iid_db.tolist(),
        "ipd_rad": params.ipd_rad.tolist(),
        "ic": params.ic.tolist(),
    }
    if ref is not None:
        if len(ref) != len(sig):
            return _fail(EXIT_VALIDATION, "reference length differs from input")
        out["opd_rad"] = opd(stft(ref, cfg), spec, partition).opd_rad.tolist()

    text = json.dumps(out)
    if args.json:
        Path(args.json).write_text(text + "\n")
    else:
        print(text)
    if args.csv:
        _write_params_csv(args.csv, params, out.get("opd_rad"))
    return EXIT_OK


def _write_params_csv(path, params, opd_list) -> None:
    """Frame-major CSV: one row per frame, one column per (metric, band)."""
    t, b = params.iid_db.shape
    header = ["frame"]
    for name in ("iid_db", "ipd_rad", "ic"):
        header += [f"{name}_b{i}" for i in range(b)]
    if opd_list is not None:
        for c in (0, 1):
            header += [f"opd_rad_ch{c}_b{i}" for i in range(b)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for frame in range(t):
            row = [frame]
            row += list(params.iid_db[frame])
            row += list(params.ipd_rad[frame])
            row += list(params.ic[frame])
            if opd_list is not None:
                arr = np.asarray(opd_list)
                for c in (0, 1):
                    row += list(arr[frame, :, c])
            writer.writerow(row)


def _load_setup(path) -> LossSetup:
    if path is None:
        return LossSetup()
    return LossSetup.from_dict(json.loads(Path(path).read_text()))


def cmd_loss(args) -> int:
    try:
        setup = _load_setup(args.config)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        return _fail(EXIT_VALIDATION, f"bad config: {exc}")
    try:
        ref = _read_input(args.reference, upmix=False)
        est = _read_input(args.estimate, upmix=False)
    except (MonoInputError, ValueError) as exc:
        return _fail(EXIT_VALIDATION, str(exc))
    except (WavFormatError, OSError) as exc:
        return _fail(EXIT_IO, str(exc))

    if abs(len(ref) - len(est)) > setup.stft.hop:
        return _fail(
            EXIT_VALIDATION,
            f"length mismatch beyond one hop: {len(ref)} vs {len(est)}",
        )
    n = min(len(ref), len(est))
    ref = StereoSignal(ref.samples[:n], ref.sample_rate)
    est = StereoSignal(est.samples[:n], est.sample_rate)

    breakdown = total_loss(ref, est, setup.stft, setup.partition, setup.genlog, setup.weights)
    out = {"breakdown": breakdown.as_dict(), "config": setup.to_dict()}

    if args.gradient_out or args.grad_check:
        result = loss_gradient(ref, est, setup.stft, setup.partition, setup.genlog, setup.weights)
        if args.gradient_out:
            result.grad.astype("<f8").tofile(args.gradient_out)
            out["gradient_file"] = str(args.gradient_out)
            out["gradient_singular"] = result.singular
        if args.grad_check:
            out["grad_check"] = _grad_check(ref, est, setup, result.grad)

    text = json.dumps(out)
    if args.json:
        Path(args.json).write_text(text + "\n")
    else:
        print(text)
    return EXIT_OK


def _grad_check(ref, est, setup, grad, probes: int = 12, seed: int = 0) -> dict:
    """Central finite differences on a few random coordinates of a short segment."""
    n = min(len(ref), 4 * setup.stft.window_len)
    ref = StereoSignal(ref.samples[:n], ref.sample_rate)
    est_s = np.array(est.samples[:n])
    result = loss_gradient(ref, StereoSignal(est_s), setup.stft, setup.partition,
                           setup.genlog, setup.weights)
    rng = np.random.default_rng(seed)
    step = 1e-4 * max(float(np.sqrt((est_s**2).mean())), 1e-6)
    worst = 0.0
    scale = max(float(np.abs(result.grad).max()), 1e-300)
    for _ in range(probes):
        k = int(rng.integers(n))
        c = int(rng.integers(2))
        for sign in (1.0, -1.0):
            bumped = est_s.copy()
            bumped[k, c] += sign * step
            val = total_loss(ref, StereoSignal(bumped), setup.stft, setup.partition,
                             setup.genlog, setup.weights).total
            if sign > 0:
                up = val
            else:
                down = val
        fd = (up - down) / (2 * step)
        worst = max(worst, abs(fd - result.grad[k, c]) / scale)
    return {"max_rel_error": worst, "probes": probes, "singular": result.singular}


def cmd_synth(args) -> int:
    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".writable"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        return _fail(EXIT_IO, f"output directory not writable: {exc}")

    buckets = None
    if args.snr_buckets:
        try:
            buckets = tuple(float(v) for v in args.snr_buckets.split(","))
        except ValueError:
            return _fail(EXIT_VALIDATION, f"bad --snr-buckets {args.snr_buckets!r}")
    manifest = write_dataset(out_dir, args.scenes, args.seed, buckets, args.duration,
                             write_rirs=args.rirs)
    print(json.dumps({"manifest": str(manifest), "scenes": args.scenes}))
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        items = load_manifest(args.manifest)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(EXIT_IO, f"cannot read manifest: {exc}")
    base = Path(args.manifest).parent
    cfg = StftConfig(window_len=args.window, hop=args.hop)
    partition = BandPartition(cfg.fft_bins, cfg.fft_bins // args.bands)

    def load(item, tag):
        return read_stereo(base / item["paths"][tag])

    methods = {"noisy": lambda item: (load(item, "clean"), load(item, "mix"))}
    if args.oracle:
        methods["oracle"] = lambda item: (
            load(item, "clean"),
            oracle_wiener_enhance(load(item, "mix"), load(item, "noise"), cfg),
        )
    if args.est:
        est_dir = Path(args.est)
        methods["est"] = lambda item: (
            load(item, "clean"),
            read_stereo(est_dir / f"{item['item']}.wav"),
        )

    rows, aggregates = batch_evaluate(items, methods, cfg, partition)
    out_json = args.report_json or (Path(args.out) / "report.json" if args.out else None)
    out_csv = args.report_csv or (Path(args.out) / "report.csv" if args.out else None)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
    if out_json:
        write_report_json(out_json, rows, aggregates)
    if out_csv:
        write_report_csv(out_csv, rows)
    if not out_json and not out_csv:
        print(json.dumps({"rows": [r.as_dict() for r in rows], "aggregates": aggregates}))

    if rows and all(r.error is not None for r in rows):
        return _fail(EXIT_BATCH, "every evaluation row failed")
    return EXIT_OK


def cmd_bridge(_args) -> int:
    payload = sys.stdin.buffer.read()
    sys.stdout.buffer.write(bridge_mod.serve_request(payload))
    sys.stdout.buffer.flush()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stereoloss")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="extract IID/IPD/IC (and OPD vs a reference)")
    p.add_argument("input")
    p.add_argument("--ref", default=None, help="reference WAV for OPD")
    p.add_argument("--bands", type=int, default=32)
    p.add_argument("--window", type=int, default=2048)
    p.add_argument("--hop", type=int, default=480)
    p.add_argument("--json", default=None, help="write JSON here instead of stdout")
    p.add_argument("--csv", default=None)
    p.add_argument("--upmix", action="store_true", help="duplicate mono input to stereo")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("loss", help="stereo-aware loss between reference and estimate")
    p.add_argument("reference")
    p.add_argument("estimate")
    p.add_argument("--config", default=None, help="loss configuration JSON")
    p.add_argument("--json", default=None)
    p.add_argument("--gradient-out", default=None, help="raw float64 gradient dump")
    p.add_argument("--grad-check", action="store_true",
                   help="finite-difference audit on a cropped segment")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("synth", help="synthesize a scene dataset with a manifest")
    p.add_argument("--scenes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--duration", type=float, default=1.2)
    p.add_argument("--snr-buckets", default=None,
                   help="comma-separated SNRs cycled per scene, e.g. 0,5,10,15,20")
    p.add_argument("--rirs", action="store_true", help="also write the scene RIRs as WAV")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="batch metrics over a synthesized manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--est", default=None, help="directory of estimate WAVs named <item>.wav")
    p.add_argument("--oracle", action="store_true", help="include the known-noise Wiener enhancer")
    p.add_argument("--out", default=None, help="directory for report.json/report.csv")
    p.add_argument("--report-json", default=None)
    p.add_argument("--report-csv", default=None)
    p.add_argument("--bands", type=int, default=32)
    p.add_argument("--window", type=int, default=2048)
    p.add_argument("--hop", type=int, default=480)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bridge", help="serve one binary loss/gradient request on stdin")
    p.set_defaults(func=cmd_bridge)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
