"""Trace sets: in-memory container, on-disk format, CSV import and trimming.

On disk a trace set is a JSON manifest plus a sidecar payload of raw
little-endian float32 samples, trace-major. The manifest names the payload
file relative to its own directory.
"""

import copy
import csv
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
PAYLOAD_DTYPE = np.dtype("<f4")
REQUIRED_KEYS = ("version", "num_traces", "num_samples", "plaintexts", "sample_rate_hz", "source")


class TraceIOError(Exception):
    """Base class for trace-set persistence failures."""


class ManifestError(TraceIOError):
    pass


class DimensionMismatchError(TraceIOError):
    pass


class VersionError(TraceIOError):
    pass


class CSVImportError(TraceIOError):
    pass


@dataclass
class TraceSet:
    samples: np.ndarray  # (T, S) float32 volts
    plaintexts: np.ndarray  # (T, 8) uint8
    ciphertexts: np.ndarray | None = None
    sample_rate_hz: float | None = None
    source: str = "simulated"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float32)
        if self.samples.ndim != 2:
            raise ValueError("samples must be a (traces, samples) matrix")
        self.plaintexts = np.asarray(self.plaintexts, dtype=np.uint8).reshape(-1, 8)
        if self.plaintexts.shape[0] != self.samples.shape[0]:
            raise ValueError(
                f"{self.plaintexts.shape[0]} plaintexts for {self.samples.shape[0]} traces"
            )
        if self.ciphertexts is not None:
            self.ciphertexts = np.asarray(self.ciphertexts, dtype=np.uint8).reshape(-1, 8)
            if self.ciphertexts.shape[0] != self.samples.shape[0]:
                raise ValueError("ciphertext count does not match trace count")
        if self.source not in ("simulated", "imported"):
            raise ValueError(f"unknown source {self.source!r}")

    @property
    def num_traces(self):
        return self.samples.shape[0]

    @property
    def num_samples(self):
        return self.samples.shape[1]

    def __eq__(self, other):
        if not isinstance(other, TraceSet):
            return NotImplemented
        cts_equal = (self.ciphertexts is None and other.ciphertexts is None) or (
            self.ciphertexts is not None
            and other.ciphertexts is not None
            and np.array_equal(self.ciphertexts, other.ciphertexts)
        )
        return (
            self.samples.shape == other.samples.shape
            and self.samples.tobytes() == other.samples.tobytes()
            and np.array_equal(self.plaintexts, other.plaintexts)
            and cts_equal
            and self.sample_rate_hz == other.sample_rate_hz
            and self.source == other.source
            and self.metadata == other.metadata
        )


def _hex_rows(rows):
    return [bytes(r).hex().upper() for r in rows]


def _parse_hex_rows(items, what):
    try:
        rows = [bytes.fromhex(s) for s in items]
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"bad {what} hex: {exc}") from None
    if any(len(r) != 8 for r in rows):
        raise ManifestError(f"{what} entries must be 8 bytes")
    return np.frombuffer(b"".join(rows), dtype=np.uint8).reshape(-1, 8)


def payload_path_for(manifest_path):
    return Path(manifest_path).with_suffix(".f32")


def _atomic_write(path, data):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trace_set(ts, path):
    """Write ``ts`` as ``path`` (JSON manifest) and a ``.f32`` payload beside it."""
    path = Path(path)
    payload = payload_path_for(path)
    manifest = {
        "version": FORMAT_VERSION,
        "num_traces": ts.num_traces,
        "num_samples": ts.num_samples,
        "plaintexts": _hex_rows(ts.plaintexts),
        "sample_rate_hz": ts.sample_rate_hz,
        "source": ts.source,
        "payload": payload.name,
        "dtype": "float32-le",
        "metadata": ts.metadata,
    }
    if ts.ciphertexts is not None:
        manifest["ciphertexts"] = _hex_rows(ts.ciphertexts)
    try:
        _atomic_write(payload, ts.samples.astype(PAYLOAD_DTYPE, copy=False).tobytes())
        _atomic_write(path, (json.dumps(manifest, indent=1, sort_keys=True) + "\n").encode())
    except OSError as exc:
        raise TraceIOError(f"cannot write trace set to {path}: {exc}") from exc


def read_trace_set(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise TraceIOError(f"cannot read manifest {path}: {exc}") from exc
    try:
        manifest = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: manifest is not valid JSON ({exc})") from None
    if not isinstance(manifest, dict):
        raise ManifestError(f"{path}: manifest must be a JSON object")
    missing = [k for k in REQUIRED_KEYS if k not in manifest]
    if missing:
        raise ManifestError(f"{path}: manifest lacks {', '.join(missing)}")
    if manifest["version"] != FORMAT_VERSION:
        raise VersionError(f"{path}: unsupported format version {manifest['version']!r}")

    num_traces, num_samples = manifest["num_traces"], manifest["num_samples"]
    if not (isinstance(num_traces, int) and isinstance(num_samples, int)) or min(num_traces, num_samples) < 0:
        raise ManifestError(f"{path}: bad dimensions {num_traces!r} x {num_samples!r}")
    plaintexts = _parse_hex_rows(manifest["plaintexts"], "plaintext")
    if plaintexts.shape[0] != num_traces:
        raise DimensionMismatchError(
            f"{path}: {plaintexts.shape[0]} plaintexts for {num_traces} traces"
        )
    ciphertexts = None
    if manifest.get("ciphertexts") is not None:
        ciphertexts = _parse_hex_rows(manifest["ciphertexts"], "ciphertext")
        if ciphertexts.shape[0] != num_traces:
            raise DimensionMismatchError(f"{path}: ciphertext count mismatch")

    payload = path.parent / manifest.get("payload", payload_path_for(path).name)
    try:
        raw = payload.read_bytes()
    except OSError as exc:
        raise TraceIOError(f"cannot read payload {payload}: {exc}") from exc
    expected = num_traces * num_samples * PAYLOAD_DTYPE.itemsize
    if len(raw) != expected:
        raise DimensionMismatchError(
            f"{payload}: {len(raw)} bytes, expected {expected} "
            f"for {num_traces} x {num_samples} float32"
        )
    samples = np.frombuffer(raw, dtype=PAYLOAD_DTYPE).reshape(num_traces, num_samples)
    try:
        return TraceSet(
            samples.astype(np.float32),
            plaintexts,
            ciphertexts,
            manifest["sample_rate_hz"],
            manifest["source"],
            manifest.get("metadata") or {},
        )
    except ValueError as exc:
        raise ManifestError(f"{path}: {exc}") from None


def _read_csv_trace(path):
    times, volts = [], []
    try:
        with open(path, newline="", encoding="utf-8") as f:
            for lineno, row in enumerate(csv.reader(f), start=1):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) < 2:
                    raise CSVImportError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
                try:
                    t, v = float(row[0]), float(row[1])
                except ValueError:
                    if lineno == 1 and not times:
                        continue  # header
                    raise CSVImportError(f"{path}:{lineno}: non-numeric cell in {row!r}") from None
                times.append(t)
                volts.append(v)
    except OSError as exc:
        raise TraceIOError(f"cannot read {path}: {exc}") from exc
    return np.array(times), np.array(volts)


def import_oscilloscope_csv(paths, plaintexts, shifts=None):
    """Build a TraceSet from one (time_seconds, voltage_volts) CSV per trace.

    The sample rate is inferred from the median time step of the first file.
    ``shifts`` optionally moves trace i left by ``shifts[i]`` samples (edge
    padded); no automatic alignment is attempted.
    """
    paths = list(paths)
    pts = np.asarray(plaintexts, dtype=np.uint8).reshape(-1, 8)
    if pts.shape[0] != len(paths):
        raise CSVImportError(f"{pts.shape[0]} plaintexts for {len(paths)} CSV files")
    if shifts is not None and len(shifts) != len(paths):
        raise CSVImportError("one shift per trace required")

    rows = []
    sample_rate = None
    for i, p in enumerate(paths):
        times, volts = _read_csv_trace(p)
        if rows and volts.size != rows[0].size:
            raise CSVImportError(f"{p}: {volts.size} samples, expected {rows[0].size}")
        if sample_rate is None and times.size >= 2:
            step = float(np.median(np.diff(times)))
            if step <= 0:
                raise CSVImportError(f"{p}: time column is not increasing")
            sample_rate = 1.0 / step
        if shifts is not None and shifts[i]:
            volts = _shift(volts, int(shifts[i]))
        rows.append(volts)

    samples = np.vstack(rows) if rows else np.zeros((0, 0))
    meta = {"source_files": [str(Path(p).name) for p in paths]}
    if shifts is not None:
        meta["shifts"] = [int(s) for s in shifts]
    return TraceSet(samples, pts, None, sample_rate, "imported", meta)


def _shift(v, n):
    if n > 0:
        return np.concatenate([v[n:], np.full(min(n, v.size), v[-1])])[: v.size]
    n = -n
    return np.concatenate([np.full(min(n, v.size), v[0]), v[:-n] if n < v.size else v[:0]])


def trim(ts, start, end):
    """Keep samples ``[start, end)`` of every trace."""
    if not (0 <= start < end <= ts.num_samples):
        raise ValueError(f"window [{start}, {end}) outside 0..{ts.num_samples}")
    meta = copy.deepcopy(ts.metadata)
    meta["trim_offset"] = int(meta.get("trim_offset", 0)) + int(start)
    return TraceSet(
        ts.samples[:, start:end].copy(),
        ts.plaintexts.copy(),
        None if ts.ciphertexts is None else ts.ciphertexts.copy(),
        ts.sample_rate_hz,
        ts.source,
        meta,
    )
