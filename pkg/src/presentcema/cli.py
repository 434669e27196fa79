"""Command-line front end: simulate, import, trim, attack and plot-data export.

Exit codes: 0 success, 2 usage or validation error, 3 I/O or data-integrity error.
"""

import argparse
import secrets
import sys
from pathlib import Path

import numpy as np

from . import attack, spectral
from .cipher import parse_hex, parse_key
from .simulate import TARGET_KEY, SimConfig, gen_plaintexts_paper_sweep, simulate_noise_only, simulate_trace_set
from .traceio import TraceIOError, import_oscilloscope_csv, read_trace_set, trim, write_trace_set

EXIT_USAGE = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


def _int_list(text):
    try:
        return [int(x, 0) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _key(text):
    try:
        return parse_key(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _band(text):
    lo, sep, hi = text.partition(":")
    try:
        if not sep:
            raise ValueError
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"band must look like LO:HI in Hz, got {text!r}") from None


def _extrema_kwargs(args):
    if args.prominence is not None and not args.prominence > 0:
        raise UsageError("--prominence must be positive")
    if args.max_extrema < 0:
        raise UsageError("--max-extrema must be >= 0")
    return {
        "prominence": args.prominence,
        "max_extrema": args.max_extrema or None,
        "repetition_min": args.repetition_min,
    }


def _add_extrema_flags(parser):
    parser.add_argument("--prominence", type=float, help="extrema prominence threshold (default: 3x MAD)")
    parser.add_argument("--max-extrema", type=int, default=16,
                        help="most prominent peaks/troughs listed per byte, 0 for all (default: %(default)s)")
    parser.add_argument("--repetition-min", type=int, default=3,
                        help="repeat count that flags a guess (default: %(default)s)")


def _load(path):
    return read_trace_set(path)


def _out_dir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# --- subcommands ------------------------------------------------------------

def cmd_simulate(args):
    seed = args.seed
    if seed is None:
        seed = secrets.randbits(63)
    cfg = SimConfig(
        key=args.key,
        num_traces=args.traces,
        samples_per_trace=args.samples,
        schedule=args.schedule,
        leak_offsets=tuple(args.offsets) if args.offsets else None,
        gain=args.gain,
        noise_sigma=args.sigma,
        averaging=args.averaging,
        seed=seed,
        plaintext_mode=args.plaintexts,
        plaintext_seed=args.plaintext_seed,
        sample_rate_hz=args.sample_rate,
    )
    ts = simulate_noise_only(cfg) if args.noise_only else simulate_trace_set(cfg)
    write_trace_set(ts, args.out)
    kind = "noise-only" if args.noise_only else "encryption"
    print(f"wrote {args.out}: {ts.num_traces} x {ts.num_samples} {kind} traces, seed={seed}")
    return 0


def _write_attack_outputs(report, args, stem):
    out_json = args.out_json or f"{stem}.json"
    out_text = args.out_text or f"{stem}.txt"
    attack.write_report(report, out_json, out_text)
    return out_json, out_text


def cmd_attack(args):
    ts = _load(args.input)
    if args.method == "cema":
        report = attack.run_cema(
            ts,
            byte_indices=args.bytes,
            model=args.model,
            reference=args.reference,
            window=args.window,
            workers=args.workers,
            keep_surfaces=bool(args.surface_dir),
            **_extrema_kwargs(args),
        )
        out_json, out_text = _write_attack_outputs(report, args, "cema_report")
        if args.surface_dir:
            d = _out_dir(args.surface_dir)
            for j, r in report.bytes.items():
                attack.write_surface_csv(r.surface, d / f"surface_byte{j}.csv", full=args.full_surface)
        sys.stdout.write(report.text_table())
        print(f"rank-1 subkey bytes: {attack.format_subkey(report.recovered_subkey())}")
        if args.true_key is not None:
            print(f"true-key ranks: {attack.key_rank(report, args.true_key)}")
    else:
        if args.bit is None:
            raise UsageError("dema needs --bit")
        report = attack.run_dema(ts, args.byte, args.bit, window=args.window)
        out_json, out_text = _write_attack_outputs(report, args, "dema_report")
        sys.stdout.write(report.text_table())
    print(f"report: {out_json}, {out_text}")
    return 0


def cmd_noise_control(args):
    ts = _load(args.input)
    report = attack.run_noise_control(ts, byte_indices=args.bytes, window=args.window,
                                      **_extrema_kwargs(args))
    out_json = args.out_json or "noise_control.json"
    out_text = args.out_text or "noise_control.txt"
    attack.write_report(report, out_json, out_text)
    sys.stdout.write(report.text_table())
    return 0


def _pick_trace(ts, index):
    if not 0 <= index < ts.num_traces:
        raise UsageError(f"trace index {index} outside 0..{ts.num_traces - 1}")
    return ts.samples[index]


def cmd_sema(args):
    ts = _load(args.input)
    d = _out_dir(args.out_dir)
    spectral.write_time_series_csv(_pick_trace(ts, args.trace_index), ts.sample_rate_hz, d / "time_series.csv")
    counts, edges = spectral.histogram(ts, args.bins)
    spectral.write_histogram_csv(counts, edges, d / "histogram.csv")
    written = ["time_series.csv", "histogram.csv"]
    if args.compare:
        other = _load(args.compare)
        counts, edges = spectral.histogram(other, args.bins)
        spectral.write_histogram_csv(counts, edges, d / "histogram_compare.csv")
        written.append("histogram_compare.csv")
    print(f"wrote {', '.join(written)} to {d}")
    return 0


def cmd_sfema(args):
    ts = _load(args.input)
    rate = ts.sample_rate_hz or 1.0
    d = _out_dir(args.out_dir)
    trace = _pick_trace(ts, args.trace_index)
    sp = spectral.magnitude_spectrum(trace, rate)
    for lo, hi in args.band or ():
        if not 0 <= lo < hi <= rate / 2:
            raise UsageError(f"band {lo}:{hi} must lie within 0..{rate / 2} Hz (Nyquist)")
    spectral.write_spectrum_csv(sp, d / "spectrum.csv")
    window_len = min(args.window_len, trace.size)
    sg = spectral.spectrogram(trace, window_len, args.hop, rate, window=args.window)
    spectral.write_spectrogram_csv(sg, d / "spectrogram.csv")
    written = ["spectrum.csv", "spectrogram.csv"]
    if args.compare:
        other = _load(args.compare)
        bands = args.band or [(0.0, rate / 2)]
        rows = spectral.band_energy_comparison(ts, other, bands)
        spectral.write_band_energy_csv(rows, d / "band_energy.csv")
        written.append("band_energy.csv")
    print(f"wrote {', '.join(written)} to {d}")
    return 0


def _read_plaintext_file(path, count):
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        blocks = [parse_hex(ln, 8).to_bytes(8, "big") for ln in lines]
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    if len(blocks) != count:
        raise UsageError(f"{path}: {len(blocks)} plaintexts for {count} CSV files")
    return np.frombuffer(b"".join(blocks), dtype=np.uint8).reshape(-1, 8)


def cmd_import(args):
    if args.plaintext_file:
        pts = _read_plaintext_file(args.plaintext_file, len(args.csv))
    else:
        if len(args.csv) > 256:
            raise UsageError("the plaintext sweep covers at most 256 traces; pass --plaintext-file")
        pts = gen_plaintexts_paper_sweep(len(args.csv))
    if args.shifts is not None and len(args.shifts) != len(args.csv):
        raise UsageError("--shifts needs one value per CSV file")
    ts = import_oscilloscope_csv(args.csv, pts, shifts=args.shifts)
    write_trace_set(ts, args.out)
    print(f"wrote {args.out}: {ts.num_traces} x {ts.num_samples} imported traces, "
          f"sample rate {ts.sample_rate_hz} Hz")
    return 0


def cmd_trim(args):
    ts = _load(args.input)
    if not 0 <= args.start < args.end <= ts.num_samples:
        raise UsageError(f"window [{args.start}, {args.end}) outside 0..{ts.num_samples}")
    out = trim(ts, args.start, args.end)
    write_trace_set(out, args.out)
    print(f"wrote {args.out}: {out.num_traces} x {out.num_samples} (offset {args.start})")
    return 0


def cmd_info(args):
    ts = _load(args.input)
    print(f"traces:      {ts.num_traces}")
    print(f"samples:     {ts.num_samples}")
    print(f"source:      {ts.source}")
    print(f"sample rate: {ts.sample_rate_hz}")
    if ts.num_traces:
        print(f"range:       {float(ts.samples.min()):.6g} .. {float(ts.samples.max()):.6g} V")
        print(f"first pt:    {bytes(ts.plaintexts[0]).hex().upper()}")
    for k, v in sorted(ts.metadata.items()):
        if k == "sim_config":
            print("sim config:")
            for line in str(v).splitlines():
                print(f"  {line}")
        else:
            print(f"{k}: {v}")
    return 0


# --- parser -----------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="present-cema", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    s = sub.add_parser("simulate", help="generate a synthetic trace set")
    s.add_argument("--out", required=True, help="manifest path (payload written beside it as .f32)")
    s.add_argument("--key", type=_key, default=TARGET_KEY,
                   help="80-bit key as 20 hex digits (default: AC DE FB 21 F9 23 43 75 C0 E6)")
    s.add_argument("--traces", type=int, default=256, help="number of traces (default: %(default)s)")
    s.add_argument("--samples", type=int, default=8800, help="samples per trace (default: %(default)s)")
    s.add_argument("--schedule", choices=("serial", "parallel"), default="serial",
                   help="one leak sample per byte, or one sample summing all bytes")
    s.add_argument("--offsets", type=_int_list, help="comma-separated leak sample indices")
    s.add_argument("--gain", type=float, default=1e-3, help="volts per Hamming-weight unit (default: %(default)s)")
    s.add_argument("--sigma", type=float, default=2e-3, help="noise std per capture in volts (default: %(default)s)")
    s.add_argument("--averaging", type=int, default=5, help="captures averaged per trace (default: %(default)s)")
    s.add_argument("--seed", type=int, help="noise seed (random and printed if omitted)")
    s.add_argument("--plaintexts", choices=("sweep", "random"), default="sweep",
                   help="00..00-FF..FF sweep or uniform random blocks")
    s.add_argument("--plaintext-seed", type=int, default=0, help="seed for random plaintexts")
    s.add_argument("--sample-rate", type=float, default=2.5e9, help="samples per second (default: %(default)s)")
    s.add_argument("--noise-only", action="store_true", help="zero leakage gain (non-encryption control set)")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("attack", help="run a CEMA or DEMA attack on a trace set")
    a.add_argument("method", choices=("cema", "dema"))
    a.add_argument("input", help="trace-set manifest")
    a.add_argument("--bytes", type=_int_list, default=list(range(8)), help="CEMA byte indices, e.g. 0,3")
    a.add_argument("--byte", type=int, default=0, help="DEMA byte index (default: %(default)s)")
    a.add_argument("--bit", type=int, help="DEMA selection bit of the S-box output (0..7)")
    a.add_argument("--model", choices=("hw", "hd"), default="hw", help="leakage model (default: %(default)s)")
    a.add_argument("--reference", type=lambda t: int(t, 0), default=0, help="HD reference state")
    a.add_argument("--window", choices=("segments", "full"), default="segments",
                   help="per-byte search window (default: %(default)s)")
    a.add_argument("--workers", type=int, default=1, help="parallel byte attacks (default: %(default)s)")
    a.add_argument("--true-key", type=_key, help="known key, to print true-byte ranks")
    a.add_argument("--out-json", help="JSON report path")
    a.add_argument("--out-text", help="text table path")
    a.add_argument("--surface-dir", help="dump per-byte correlation surface CSVs here")
    a.add_argument("--full-surface", action="store_true", help="include all 256 key rows in surface CSVs")
    _add_extrema_flags(a)
    a.set_defaults(func=cmd_attack)

    n = sub.add_parser("noise-control", help="CEMA on non-encryption traces to expose false positives")
    n.add_argument("input")
    n.add_argument("--bytes", type=_int_list, default=list(range(8)), help="byte indices")
    n.add_argument("--window", choices=("segments", "full"), default="segments")
    n.add_argument("--out-json", help="JSON report path")
    n.add_argument("--out-text", help="text table path")
    _add_extrema_flags(n)
    n.set_defaults(func=cmd_noise_control)

    m = sub.add_parser("sema", help="time series and histogram plot data")
    m.add_argument("input")
    m.add_argument("--out-dir", required=True)
    m.add_argument("--trace-index", type=int, default=0, help="trace for the time series")
    m.add_argument("--bins", type=int, default=64, help="histogram bins (default: %(default)s)")
    m.add_argument("--compare", help="second trace set (e.g. non-encryption) for a histogram")
    m.set_defaults(func=cmd_sema)

    f = sub.add_parser("sfema", help="spectrum, spectrogram and band-energy plot data")
    f.add_argument("input")
    f.add_argument("--out-dir", required=True)
    f.add_argument("--trace-index", type=int, default=0)
    f.add_argument("--window-len", type=int, default=256, help="spectrogram frame length")
    f.add_argument("--hop", type=int, default=128, help="spectrogram hop length")
    f.add_argument("--window", default="hann", help="spectrogram window function (default: %(default)s)")
    f.add_argument("--compare", help="second trace set for band-energy comparison")
    f.add_argument("--band", type=_band, action="append", help="band LO:HI in Hz, repeatable")
    f.set_defaults(func=cmd_sfema)

    i = sub.add_parser("import", help="convert oscilloscope CSV exports to a trace set")
    i.add_argument("csv", nargs="+", help="one (time_s, voltage_v) CSV per trace")
    i.add_argument("--out", required=True)
    i.add_argument("--plaintext-file", help="16 hex digits per line, one per CSV (default: sweep)")
    i.add_argument("--shifts", type=_int_list, help="per-trace integer alignment shifts")
    i.set_defaults(func=cmd_import)

    t = sub.add_parser("trim", help="keep a sample window of every trace")
    t.add_argument("input")
    t.add_argument("--start", type=int, required=True)
    t.add_argument("--end", type=int, required=True)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_trim)

    o = sub.add_parser("info", help="summarise a trace set")
    o.add_argument("input")
    o.set_defaults(func=cmd_info)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TraceIOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
