"""Command-line front end.

Subcommands: generate (synthesize a scenario to a raw IQ trace), run (full
benchmark to series/report CSVs), separate (per-bin mask plus the energy-drop
diagnostics behind the separation), estimate (one block-level estimate),
ops (operation-count sweep), convert (raw float32 IQ <-> CSV).

Exit codes: 0 success, 2 usage or configuration error, 3 degenerate data,
1 internal error.  The NOISEBENCH_THREADS environment variable caps worker
threads for multi-seed runs; unset means one worker per CPU.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench
from .errors import (
    DegenerateSpectrumError,
    EmptyNoiseGroupError,
    InsufficientSamplesError,
    TraceFormatError,
    ZeroPowerError,
)
from .scenario import (
    ScenarioConfig,
    build_scenario,
    load_iq_trace,
    scenario_config_from_dict,
    time_series_of,
    write_iq_trace,
)
from .separation import RofParams, rof_separate
from .spectral import ComplexSeries, PowerSpectrum, averaged_periodogram, block_from_frames, frame_signal

_DATA_ERRORS = (
    DegenerateSpectrumError, ZeroPowerError, TraceFormatError,
    InsufficientSamplesError, EmptyNoiseGroupError,
)

USAGE_ERROR, DATA_ERROR, INTERNAL_ERROR = 2, 3, 1

_CONFIG_KEYS_HELP = (
    "config keys: name, n_bins, n_frames, sample_rate_hz, reference_noise_power_mw, "
    "subband_count, noise.kind (white-gaussian|surrogate-industrial|trace-file), "
    "noise.seed, noise.path, noise.params.{impulse_rate, impulse_amplitude_factor, "
    "spectral_tilt_db_per_decade}, signals[].{subband_index, occupancy_fraction, "
    "amplitude_mv | target_snr_db, frame_start, frame_end}, "
    "snr_schedule[].{frame_start, frame_end, target_snr_db}"
)


def _max_workers() -> int | None:
    raw = os.environ.get("NOISEBENCH_THREADS")
    if raw is None:
        return os.cpu_count()
    workers = int(raw)
    if workers < 1:
        raise ValueError("NOISEBENCH_THREADS must be a positive integer")
    return workers


def _apply_override(data: dict, spec: str) -> None:
    if "=" not in spec:
        raise ValueError(f"override {spec!r} is not of the form key=value")
    keypath, raw = spec.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = data
    parts = keypath.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ValueError(f"override path {keypath!r} crosses a non-mapping entry")
    node[parts[-1]] = value


def _load_config(path: str, overrides: list[str]) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    for spec in overrides or []:
        _apply_override(data, spec)
    return scenario_config_from_dict(data)


def _parse_method(text: str) -> bench.MethodSpec:
    name, _, separation = text.partition(":")
    name = name.strip().upper()
    separation = separation.strip().lower()
    if not separation:
        separation = "ideal" if name in ("ML", "MVU") else "none"
    return bench.MethodSpec(estimator=name, separation=separation)


_DEFAULT_METHODS = [
    "ML:ideal", "ML:fisher", "ML:rof", "MVU:ideal", "MVU:fisher", "MVU:rof",
    "AIC", "CBE", "MMSE",
]


def cmd_generate(args) -> int:
    config = _load_config(args.config, args.override)
    block, truth = build_scenario(config)
    series = time_series_of(block, config.sample_rate_hz)
    write_iq_trace(args.out, series)
    finite = truth.true_snr_db[np.isfinite(truth.true_snr_db)]
    print(f"wrote {len(series)} samples ({8 * len(series)} bytes) to {args.out}")
    print(f"reference noise power: {config.reference_noise_power_mw:.9g} mW")
    print(f"frames with signal: {int(np.isfinite(truth.true_snr_db).sum())}/{truth.n_frames}")
    if finite.size:
        print(f"true SNR range: {finite.min():.9g} .. {finite.max():.9g} dB")
    print(f"signal bins marked: {int(truth.signal_bin_mask.sum())}")
    return 0


def cmd_run(args) -> int:
    config = _load_config(args.config, args.override)
    methods = [_parse_method(m) for m in (args.method or _DEFAULT_METHODS)]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [config.noise.seed]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    series, reports = bench.run_benchmark(
        config, methods, seeds, max_workers=_max_workers(), timing=args.timing
    )
    bench.write_series_csv(out / "series.csv", series)
    bench.write_report_csv(out / "report.csv", reports)
    print(f"wrote {out / 'series.csv'} and {out / 'report.csv'}")
    return 0


def _input_spectrum(args) -> PowerSpectrum:
    if args.power_csv:
        power = np.loadtxt(args.power_csv, delimiter=",", ndmin=1)
        return PowerSpectrum(power=power)
    series = load_iq_trace(args.input)
    frames = frame_signal(series, args.n_bins, args.frames)
    block = block_from_frames(frames)
    return averaged_periodogram(block)


def cmd_separate(args) -> int:
    spectrum = _input_spectrum(args)
    params = RofParams(lambda1_pct=args.lambda1, lambda2_fraction=args.lambda2)
    mask = rof_separate(spectrum, params)
    n = spectrum.n_bins
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("record,index,power,smoothed,is_signal,energy_drop_pct\n")
        smoothed = mask.aux["smoothed"]
        for i in range(n):
            fh.write("bin,%d,%.9g,%.9g,%d,\n"
                     % (i, spectrum.power[i], smoothed[i], int(mask.is_signal[i])))
        for j, d in enumerate(mask.aux["d_curve"]):
            fh.write("energy_drop,%d,,,,%.9g\n" % (j + 2, d))
    runs = mask.aux["runs"]
    print(f"K = {mask.aux['K']}; {len(runs)} signal band(s): {runs}")
    print(f"wrote {args.out}")
    return 0


def cmd_estimate(args) -> int:
    config = _load_config(args.config, args.override)
    method = _parse_method(args.method)
    series = bench.run_scenario(
        config, [method], [config.noise.seed], max_workers=1
    )[0]
    print("method,separation,frame_index,noise_power_est_mw,snr_est_db")
    i = len(series) - 1
    print("%s,%s,%d,%.9g,%.9g" % (
        series.method, series.separation, series.frame_index[i],
        series.noise_power_est_mw[i], series.snr_est_db[i],
    ))
    return 0


def cmd_ops(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    if not sizes:
        raise ValueError("need at least one size")
    if min(sizes) < 16:
        raise ValueError("sizes must be >= 16")
    methods = [_parse_method(m) for m in (args.method or ["ML:rof", "ML:fisher", "AIC", "CBE", "MMSE"])]
    lines = ["method,separation,size,ops_add,ops_mul,ops_cmp,ops_transcendental,ops_total"]
    for method in methods:
        for size in sizes:
            counts = bench.count_ops(method, size).counts
            lines.append("%s,%s,%d,%d,%d,%d,%d,%d" % (
                method.estimator, method.separation, size, counts.adds, counts.muls,
                counts.cmps, counts.transcendental, counts.total(),
            ))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_convert(args) -> int:
    if args.to == "csv":
        series = load_iq_trace(args.input)
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            for s in series.samples:
                fh.write("%.9g,%.9g\n" % (s.real, s.imag))
    else:
        pairs = np.loadtxt(args.input, delimiter=",", ndmin=2)
        if pairs.shape[1] != 2:
            raise TraceFormatError(f"{args.input}: expected two columns (I, Q)")
        series = ComplexSeries(samples=pairs[:, 0] + 1j * pairs[:, 1], sample_rate_hz=10e6)
        write_iq_trace(args.out, series)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisebench",
        description="Noise-power/SNR estimation benchmark toolkit.",
        epilog=_CONFIG_KEYS_HELP,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        p.add_argument("--config", required=True, help="scenario config JSON file")
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="override a config key (dotted path), repeatable")

    p = sub.add_parser("generate", help="synthesize a scenario into a raw float32 IQ trace")
    add_config_args(p)
    p.add_argument("--out", required=True, help="output trace path")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="run the benchmark and write series/report CSVs")
    add_config_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--method", action="append", metavar="EST[:SEP]",
                   help="method to run, e.g. MVU:rof or AIC; repeatable "
                        "(default: the full comparison matrix)")
    p.add_argument("--seeds", help="comma-separated seed list (default: config seed)")
    p.add_argument("--timing", action="store_true",
                   help="measure wall time per method (makes report.csv non-reproducible)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("separate", help="run ROF separation and dump its diagnostics")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="raw float32 IQ trace")
    src.add_argument("--power-csv", help="text file with one power value per line")
    p.add_argument("--n-bins", type=int, default=512, help="FFT size for trace input")
    p.add_argument("--frames", type=int, default=1,
                   help="frames to average before separation (trace input)")
    p.add_argument("--lambda1", type=float, default=5.0,
                   help="bandwidth-walk stop threshold, %% of the peak energy drop")
    p.add_argument("--lambda2", type=float, default=0.05,
                   help="minimum signal-band width as a fraction of the bins")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_separate)

    p = sub.add_parser("estimate", help="single block-level estimate for one method")
    add_config_args(p)
    p.add_argument("--method", required=True, metavar="EST[:SEP]")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("ops", help="operation-count sweep over block sizes")
    p.add_argument("--sizes", required=True, help="comma-separated sizes, each >= 16")
    p.add_argument("--method", action="append", metavar="EST[:SEP]",
                   help="methods to count (default: ML:rof ML:fisher AIC CBE MMSE)")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.set_defaults(func=cmd_ops)

    p = sub.add_parser("convert", help="convert raw float32 IQ traces to/from CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--to", choices=("csv", "raw"), default="csv")
    p.set_defaults(func=cmd_convert)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
