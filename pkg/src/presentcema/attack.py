"""CEMA / DEMA orchestration, false-positive control and key-rank evaluation.

Key candidates for byte j are scored inside a sample window. The default
``"segments"`` window splits the trace into 8 equal parts and searches part j
for byte j, which matches firmware that substitutes the state bytes one after
another. Use ``window="full"`` to search every sample.
"""

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cipher import SBOX_BYTE, parse_key, round1_subkey_bytes
from .leakage import build_hypotheses
from .stats import (
    correlation_surface,
    find_extrema,
    max_rho_per_sample,
    repetition_check,
)

_SBOX_BYTE = np.array(SBOX_BYTE, dtype=np.uint8)
_KEYS = np.arange(256)


def byte_windows(num_samples, byte_indices, window="segments"):
    """Resolve a window spec into ``{byte: (start, end)}``."""
    if isinstance(window, dict):
        out = {}
        for j in byte_indices:
            lo, hi = window[j]
            if not 0 <= lo < hi <= num_samples:
                raise ValueError(f"window for byte {j} outside 0..{num_samples}")
            out[j] = (int(lo), int(hi))
        return out
    if window == "full" or (window == "segments" and num_samples < 8):
        return {j: (0, num_samples) for j in byte_indices}
    if window == "segments":
        return {j: (j * num_samples // 8, (j + 1) * num_samples // 8) for j in byte_indices}
    raise ValueError(f"unknown window spec {window!r}")


def _rank_order(scores):
    # descending score, smallest key first among equals
    return np.lexsort((_KEYS, -scores))


@dataclass
class ByteResult:
    byte_index: int
    window: tuple
    ranking: np.ndarray  # key guesses by signed max rho, best first
    scores: np.ndarray  # signed max rho per key guess inside the window
    best_samples: np.ndarray  # sample index achieving each key's score
    abs_ranking: np.ndarray
    abs_scores: np.ndarray
    abs_best_samples: np.ndarray
    extrema: object
    peak_repetition: object
    trough_repetition: object
    warnings: list = field(default_factory=list)
    surface: object = None

    @property
    def best_key(self):
        return int(self.ranking[0])

    def to_dict(self):
        return {
            "byte_index": self.byte_index,
            "window": list(self.window),
            "ranking": [int(k) for k in self.ranking],
            "scores": [float(s) for s in self.scores],
            "best_samples": [int(s) for s in self.best_samples],
            "abs_ranking": [int(k) for k in self.abs_ranking],
            "abs_scores": [float(s) for s in self.abs_scores],
            "abs_best_samples": [int(s) for s in self.abs_best_samples],
            "extrema": {
                "threshold": self.extrema.threshold,
                "peaks": [[e.sample, e.value, e.key] for e in self.extrema.peaks],
                "troughs": [[e.sample, e.value, e.key] for e in self.extrema.troughs],
            },
            "peak_repetition": _repetition_dict(self.peak_repetition),
            "trough_repetition": _repetition_dict(self.trough_repetition),
            "warnings": list(self.warnings),
        }


def _repetition_dict(rep):
    return {
        "counts": {f"{k:02X}": c for k, c in rep.counts.items()},
        "flagged": [f"{k:02X}" for k in rep.flagged],
        "min_count": rep.min_count,
    }


@dataclass
class AttackReport:
    bytes: dict  # byte_index -> ByteResult, in byte order
    num_traces: int
    num_samples: int
    config: dict
    elapsed_seconds: float = 0.0
    warnings: list = field(default_factory=list)

    def recovered_subkey(self):
        return [self.bytes[j].best_key for j in sorted(self.bytes)]

    def to_dict(self, include_timing=False):
        d = {
            "num_traces": self.num_traces,
            "num_samples": self.num_samples,
            "config": self.config,
            "warnings": list(self.warnings),
            "bytes": [self.bytes[j].to_dict() for j in sorted(self.bytes)],
        }
        if include_timing:
            d["elapsed_seconds"] = self.elapsed_seconds
        return d

    def to_json(self, include_timing=False):
        return json.dumps(self.to_dict(include_timing), indent=1, sort_keys=True) + "\n"

    def text_table(self):
        lines = ["Key guess for CEMA", ""]
        lines.append(f"traces={self.num_traces} samples={self.num_samples}")
        lines.append("")
        lines.append(f"{'Byte':<5}{'Rank-1':<8}{'rho':>8}  {'Sample':>7}   |rho| rank-1")
        for j in sorted(self.bytes):
            r = self.bytes[j]
            k = r.best_key
            lines.append(
                f"{j:<5}{k:02X}{'':<6}{r.scores[k]:8.4f}  {int(r.best_samples[k]):7d}   "
                f"{int(r.abs_ranking[0]):02X}"
            )
        lines.append("")
        lines.append(f"{'Byte':<5}{'Type':<9}{'No.':<5}Key Byte Guesses")
        for j in sorted(self.bytes):
            ex = self.bytes[j].extrema
            for kind, items in (("Peaks", ex.peaks), ("Troughs", ex.troughs)):
                guesses = " ".join(f"{e.key:02X}" for e in items) or "-"
                lines.append(f"{j:<5}{kind:<9}{len(items):<5}{guesses}")
        if self.warnings:
            lines.append("")
            lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines) + "\n"


def _attack_byte(ts, j, window, model, reference, prominence, repetition_min, keep_surface,
                 max_extrema=None):
    warnings = []
    hyp = build_hypotheses(ts.plaintexts, j, model=model, reference=reference)
    surface = correlation_surface(ts, hyp)
    lo, hi = window
    sub = surface.rho[:, lo:hi]
    best_rel = np.argmax(sub, axis=1)
    scores = sub[_KEYS, best_rel]
    abs_sub = np.abs(sub)
    abs_rel = np.argmax(abs_sub, axis=1)
    abs_scores = abs_sub[_KEYS, abs_rel]
    if np.all(surface.sample_mask[lo:hi]):
        warnings.append(f"byte {j}: every sample in window [{lo}, {hi}) is constant")
    if np.any(surface.key_mask):
        warnings.append(f"byte {j}: {int(surface.key_mask.sum())} hypothesis rows are constant")

    maxima = max_rho_per_sample(surface)
    extrema = find_extrema(maxima.rho, prominence=prominence, keys=maxima.key, max_count=max_extrema)
    return ByteResult(
        byte_index=j,
        window=(lo, hi),
        ranking=_rank_order(scores),
        scores=scores,
        best_samples=best_rel + lo,
        abs_ranking=_rank_order(abs_scores),
        abs_scores=abs_scores,
        abs_best_samples=abs_rel + lo,
        extrema=extrema,
        peak_repetition=repetition_check(extrema.peak_keys(), repetition_min),
        trough_repetition=repetition_check(extrema.trough_keys(), repetition_min),
        warnings=warnings,
        surface=surface if keep_surface else None,
    )


def run_cema(
    ts,
    byte_indices=range(8),
    model="hw",
    reference=0,
    window="segments",
    prominence=None,
    repetition_min=3,
    workers=1,
    keep_surfaces=False,
    max_extrema=16,
):
    """Correlation attack on the round-1 S-box output for each requested byte."""
    byte_indices = sorted(set(int(j) for j in byte_indices))
    if any(not 0 <= j < 8 for j in byte_indices):
        raise ValueError("byte indices must be in 0..7")
    if ts.num_traces < 2:
        raise ValueError(f"need at least 2 traces, got {ts.num_traces}")
    if repetition_min < 1:
        raise ValueError("repetition_min must be at least 1")
    if ts.num_samples < 1:
        raise ValueError("trace set has no samples")
    windows = byte_windows(ts.num_samples, byte_indices, window)
    start = time.perf_counter()

    def work(j):
        return _attack_byte(
            ts, j, windows[j], model, reference, prominence, repetition_min, keep_surfaces,
            max_extrema,
        )

    if workers > 1 and len(byte_indices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, byte_indices))
    else:
        results = [work(j) for j in byte_indices]

    warnings = []
    if ts.num_samples and np.all(np.ptp(ts.samples, axis=0) == 0):
        warnings.append("all sample columns are constant; surface fully masked")
    for r in results:
        warnings.extend(r.warnings)
    config = {
        "attack": "cema",
        "byte_indices": byte_indices,
        "model": model,
        "reference": reference if model == "hd" else 0,
        "window": window if isinstance(window, str) else {str(k): list(v) for k, v in windows.items()},
        "prominence": prominence,
        "repetition_min": repetition_min,
        "max_extrema": max_extrema,
    }
    return AttackReport(
        {r.byte_index: r for r in results},
        ts.num_traces,
        ts.num_samples,
        config,
        time.perf_counter() - start,
        warnings,
    )


@dataclass
class DemaReport:
    byte_index: int
    bit_index: int
    window: tuple
    scores: np.ndarray  # peak |differential| inside the window, per key guess
    best_samples: np.ndarray
    ranking: np.ndarray
    empty_group: np.ndarray  # guesses whose split left a group empty (scored 0)
    differentials: np.ndarray | None = None

    @property
    def best_key(self):
        return int(self.ranking[0])

    def to_dict(self):
        return {
            "attack": "dema",
            "byte_index": self.byte_index,
            "bit_index": self.bit_index,
            "window": list(self.window),
            "ranking": [int(k) for k in self.ranking],
            "scores": [float(s) for s in self.scores],
            "best_samples": [int(s) for s in self.best_samples],
            "empty_group": [int(k) for k in np.flatnonzero(self.empty_group)],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def text_table(self, top=16):
        lines = [f"DEMA byte {self.byte_index} bit {self.bit_index} window {list(self.window)}", ""]
        lines.append(f"{'Rank':<6}{'Key':<6}{'max|diff|':>12}{'Sample':>8}")
        for i, k in enumerate(self.ranking[:top], start=1):
            lines.append(f"{i:<6}{int(k):02X}{'':<4}{self.scores[k]:12.6g}{int(self.best_samples[k]):8d}")
        return "\n".join(lines) + "\n"


def run_dema(ts, byte_index, bit_index, window="segments", keep_differentials=False):
    """Difference-of-means attack splitting traces on one bit of the S-box output."""
    if not 0 <= bit_index < 8:
        raise ValueError(f"bit_index must be in 0..7, got {bit_index}")
    if not 0 <= byte_index < 8:
        raise ValueError(f"byte_index must be in 0..7, got {byte_index}")
    if ts.num_traces < 2:
        raise ValueError(f"need at least 2 traces, got {ts.num_traces}")
    lo, hi = byte_windows(ts.num_samples, [byte_index], window)[byte_index]

    pts = ts.plaintexts[:, byte_index]
    groups = ((_SBOX_BYTE[pts[None, :] ^ _KEYS[:, None].astype(np.uint8)] >> bit_index) & 1).astype(np.float64)
    n1 = groups.sum(axis=1)
    n0 = groups.shape[1] - n1
    empty = (n1 == 0) | (n0 == 0)
    data = ts.samples.astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean1 = (groups @ data) / n1[:, None]
        mean0 = ((1.0 - groups) @ data) / n0[:, None]
    diff = mean1 - mean0
    diff[empty] = 0.0
    window_abs = np.abs(diff[:, lo:hi])
    rel = np.argmax(window_abs, axis=1)
    scores = window_abs[_KEYS, rel]
    return DemaReport(
        byte_index,
        bit_index,
        (lo, hi),
        scores,
        rel + lo,
        _rank_order(scores),
        empty,
        diff if keep_differentials else None,
    )


@dataclass
class NoiseControlReport:
    cema: AttackReport | None
    peak_repetition: dict  # byte -> RepetitionReport
    trough_repetition: dict
    verdict: str

    def rank1(self):
        if self.cema is None:
            return {}
        return {j: r.best_key for j, r in self.cema.bytes.items()}

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "peak_repetition": {str(j): _repetition_dict(r) for j, r in self.peak_repetition.items()},
            "trough_repetition": {str(j): _repetition_dict(r) for j, r in self.trough_repetition.items()},
            "cema": None if self.cema is None else self.cema.to_dict(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def text_table(self):
        lines = ["False positive appearance check", "", f"verdict: {self.verdict}", ""]
        lines.append(f"{'Byte':<5}{'Type':<9}{'Flagged repeats'}")
        for j in sorted(self.peak_repetition):
            for kind, rep in (("Peaks", self.peak_repetition[j]), ("Troughs", self.trough_repetition[j])):
                flagged = " ".join(f"{k:02X}x{rep.counts[k]}" for k in rep.flagged) or "-"
                lines.append(f"{j:<5}{kind:<9}{flagged}")
        return "\n".join(lines) + "\n"


CLEAN = "clean"
SUSPECTED = "systematic-artifact suspected"


def run_noise_control(ts_noise, **cema_kwargs):
    """Run CEMA on non-encryption traces and look for repeated guesses."""
    if ts_noise.num_traces == 0:
        return NoiseControlReport(None, {}, {}, CLEAN)
    report = run_cema(ts_noise, **cema_kwargs)
    peaks = {j: r.peak_repetition for j, r in report.bytes.items()}
    troughs = {j: r.trough_repetition for j, r in report.bytes.items()}
    flagged = any(r.suspicious for r in peaks.values()) or any(r.suspicious for r in troughs.values())
    return NoiseControlReport(report, peaks, troughs, SUSPECTED if flagged else CLEAN)


def key_rank(report, true_key, magnitude=False):
    """1-based rank of the true round-1 subkey byte for each attacked byte."""
    if isinstance(true_key, str):
        true_key = parse_key(true_key)
    subkey = round1_subkey_bytes(true_key)
    if isinstance(report, DemaReport):
        k = subkey[report.byte_index]
        return {report.byte_index: int(np.flatnonzero(report.ranking == k)[0]) + 1}
    ranks = {}
    for j, r in report.bytes.items():
        order = r.abs_ranking if magnitude else r.ranking
        ranks[j] = int(np.flatnonzero(order == subkey[j])[0]) + 1
    return ranks


def write_report(report, json_path, text_path=None):
    Path(json_path).write_text(report.to_json())
    if text_path is not None:
        Path(text_path).write_text(report.text_table())


def write_surface_csv(surface, path, full=False):
    """Per-sample max/min rho with argmax/argmin keys; ``full`` adds all 256 rows."""
    rho = surface.rho
    maxima = max_rho_per_sample(surface)
    amin = np.argmin(rho, axis=0) if rho.shape[1] else np.zeros(0, int)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        header = ["sample", "max_rho", "argmax_key", "min_rho", "argmin_key", "masked"]
        if full:
            header += [f"k{k:02X}" for k in range(rho.shape[0])]
        w.writerow(header)
        for s in range(rho.shape[1]):
            row = [
                s,
                repr(float(maxima.rho[s])),
                int(maxima.key[s]),
                repr(float(rho[amin[s], s])),
                int(amin[s]),
                int(bool(surface.sample_mask[s])),
            ]
            if full:
                row += [repr(float(v)) for v in rho[:, s]]
            w.writerow(row)


def format_subkey(bytes_):
    return " ".join(f"{b:02X}" for b in bytes_)
