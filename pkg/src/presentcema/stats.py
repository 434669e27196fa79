"""Pearson correlation, difference of means, extrema and repetition checks.

Moments are population (divide-by-N) moments. Anywhere a variance is zero the
correlation is reported as 0 and flagged in a mask instead of raising.
"""

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

# Fixed column block size: every column is always computed inside the same
# block layout, so results do not depend on the number of workers.
COLUMN_BLOCK = 1024


def _as_samples(traces):
    samples = getattr(traces, "samples", traces)
    return np.asarray(samples)


def pearson(x, y):
    """Pearson coefficient of two equal-length vectors, ``None`` if undefined."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("pearson expects 1-D vectors")
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError("need at least 2 observations")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return None
    xc = x - x.mean()
    yc = y - y.mean()
    cov = np.mean(xc * yc)
    r = cov / np.sqrt(np.mean(xc * xc) * np.mean(yc * yc))
    # rounding can push |r| a few ulp past 1
    return float(np.clip(r, -1.0, 1.0))


@dataclass(frozen=True)
class CorrelationSurface:
    rho: np.ndarray  # (num_keys, S)
    byte_index: int
    sample_mask: np.ndarray  # (S,) True where the trace column is constant
    key_mask: np.ndarray  # (num_keys,) True where the hypothesis row is constant

    @property
    def zero_variance_mask(self):
        return self.key_mask[:, None] | self.sample_mask[None, :]

    @property
    def num_samples(self):
        return self.rho.shape[1]


def _surface_block(hc, hvar, block):
    xc = block - block.mean(axis=0)
    xvar = np.mean(xc * xc, axis=0)
    cov = (hc @ xc) / block.shape[0]
    denom = np.sqrt(hvar[:, None] * xvar[None, :])
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = cov / denom
    return rho


def correlation_surface(traces, hyp, workers=1):
    """Correlate every hypothesis row with every trace column.

    ``traces`` is a TraceSet or a (T, S) array; ``hyp`` a HypothesisMatrix.
    """
    samples = _as_samples(traces)
    values = np.asarray(hyp.values, dtype=np.float64)
    if samples.ndim != 2:
        raise ValueError("trace samples must be a (T, S) matrix")
    if samples.shape[0] != values.shape[1]:
        raise ValueError(
            f"{samples.shape[0]} traces but hypotheses cover {values.shape[1]}"
        )
    if samples.shape[0] < 2:
        raise ValueError("need at least 2 traces")

    num_samples = samples.shape[1]
    key_mask = np.ptp(values, axis=1) == 0
    sample_mask = np.ptp(samples, axis=0) == 0 if num_samples else np.zeros(0, bool)
    hc = values - values.mean(axis=1, keepdims=True)
    hvar = np.mean(hc * hc, axis=1)

    starts = range(0, num_samples, COLUMN_BLOCK)

    def work(start):
        block = samples[:, start:start + COLUMN_BLOCK].astype(np.float64)
        return _surface_block(hc, hvar, block)

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(work, starts))
    else:
        blocks = [work(s) for s in starts]
    rho = np.concatenate(blocks, axis=1) if blocks else np.zeros((values.shape[0], 0))
    np.clip(rho, -1.0, 1.0, out=rho)
    rho[key_mask, :] = 0.0
    rho[:, sample_mask] = 0.0
    return CorrelationSurface(rho, hyp.byte_index, sample_mask, key_mask)


@dataclass(frozen=True)
class SampleMaxima:
    """Per-sample best correlation and the key guess that produced it."""

    rho: np.ndarray
    key: np.ndarray
    masked: np.ndarray

    def rows(self):
        return [(s, float(r), int(k)) for s, (r, k) in enumerate(zip(self.rho, self.key))]


def max_rho_per_sample(surface, magnitude=False):
    """Column-wise maximum of rho (or of |rho|); ties go to the smallest key."""
    rho = np.abs(surface.rho) if magnitude else surface.rho
    if rho.shape[1] == 0:
        empty = np.zeros(0)
        return SampleMaxima(empty, empty.astype(np.int64), empty.astype(bool))
    key = np.argmax(rho, axis=0)
    best = rho[key, np.arange(rho.shape[1])]
    masked = surface.sample_mask | np.all(surface.key_mask)
    return SampleMaxima(best, key, masked)


def group_difference(samples, groups):
    """Mean of the traces where ``groups`` is true minus mean of the rest."""
    samples = _as_samples(samples)
    groups = np.asarray(groups, dtype=bool)
    n1 = int(groups.sum())
    n0 = groups.size - n1
    if n1 == 0 or n0 == 0:
        raise ValueError(f"empty group: {n1} traces in group 1, {n0} in group 0")
    data = samples.astype(np.float64)
    return data[groups].mean(axis=0) - data[~groups].mean(axis=0)


def difference_of_means(traces, selector, key_guess):
    """Differential trace for one key guess.

    ``selector(plaintext_block, key_guess)`` returns the bit (0 or 1) used to
    split the traces; ``traces`` must carry plaintexts.
    """
    bits = [int(selector(pt, key_guess)) for pt in np.asarray(traces.plaintexts)]
    if any(b not in (0, 1) for b in bits):
        raise ValueError("selector must return 0 or 1")
    return group_difference(traces.samples, np.array(bits, dtype=bool))


@dataclass(frozen=True)
class Extremum:
    sample: int
    value: float
    key: int | None = None


@dataclass
class ExtremaReport:
    peaks: list = field(default_factory=list)
    troughs: list = field(default_factory=list)
    threshold: float = 0.0

    def peak_keys(self):
        return [e.key for e in self.peaks]

    def trough_keys(self):
        return [e.key for e in self.troughs]


def default_prominence(series):
    """3x the median absolute deviation, or 3x the std when the MAD vanishes."""
    series = np.asarray(series, dtype=np.float64)
    if series.size == 0:
        return 0.0
    mad = float(np.median(np.abs(series - np.median(series))))
    if mad > 0:
        return 3.0 * mad
    return 3.0 * float(np.std(series))


def find_extrema(series, prominence=None, keys=None, max_count=None):
    """Local maxima and minima whose prominence and magnitude reach the threshold.

    ``keys`` optionally labels each sample (e.g. the per-sample argmax key).
    ``max_count`` keeps only the most prominent extrema of each kind.
    Returns an empty report if no positive threshold can be established.
    """
    if max_count is not None and max_count < 1:
        raise ValueError("max_count must be at least 1")
    series = np.asarray(series, dtype=np.float64)
    if prominence is None:
        prominence = default_prominence(series)
        if prominence <= 0:
            return ExtremaReport(threshold=0.0)
    elif not prominence > 0:
        raise ValueError("prominence must be positive")

    def collect(signal):
        idx, props = find_peaks(signal, prominence=prominence)
        keep = np.abs(series[idx]) >= prominence
        idx, prom = idx[keep], props["prominences"][keep]
        if max_count is not None and idx.size > max_count:
            top = np.lexsort((idx, -prom))[:max_count]
            idx = np.sort(idx[top])
        return [
            Extremum(int(i), float(series[i]), None if keys is None else int(keys[i]))
            for i in idx
        ]

    return ExtremaReport(collect(series), collect(-series), float(prominence))


@dataclass(frozen=True)
class RepetitionReport:
    counts: dict
    flagged: list
    min_count: int

    @property
    def suspicious(self):
        return bool(self.flagged)


def repetition_check(guesses, min_count=3):
    """Count repeated key guesses; values seen ``min_count`` times or more are flagged."""
    counts = Counter(g for g in guesses if g is not None)
    flagged = sorted(v for v, c in counts.items() if c >= min_count)
    return RepetitionReport(dict(sorted(counts.items())), flagged, min_count)
