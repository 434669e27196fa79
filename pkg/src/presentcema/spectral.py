"""Time/frequency-domain views of trace sets: spectra, spectrograms, histograms.

Whole-trace spectra use a rectangular window; spectrograms default to a
periodic Hann window. Energies are scaled so that the full-band energy of a
spectrum equals the sum of squared samples of its trace.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window


@dataclass(frozen=True)
class Spectrum:
    frequencies: np.ndarray  # Hz, one-sided
    amplitudes: np.ndarray  # |DFT|
    num_points: int  # length of the transformed signal
    sample_rate: float
    window: str = "boxcar"
    source: object = None

    def bin_weights(self):
        """Per-bin factor turning |X_k|^2 into its share of the signal energy."""
        w = np.full(self.amplitudes.size, 2.0)
        w[0] = 1.0
        if self.num_points % 2 == 0 and w.size > 1:
            w[-1] = 1.0
        return w / self.num_points

    def energy(self):
        return float(np.sum(self.bin_weights() * self.amplitudes**2))

    def db(self, floor=1e-12):
        return 20.0 * np.log10(np.maximum(self.amplitudes, floor))


def magnitude_spectrum(trace, sample_rate, source=None):
    x = np.asarray(trace, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a 1-D trace with at least 2 samples")
    if not sample_rate > 0:
        raise ValueError("sample_rate must be positive")
    amps = np.abs(np.fft.rfft(x))
    freqs = np.fft.rfftfreq(x.size, d=1.0 / sample_rate)
    return Spectrum(freqs, amps, x.size, float(sample_rate), "boxcar", source)


def band_energy(sp, f_lo, f_hi):
    """Signal energy in bins with ``f_lo <= f < f_hi`` (Nyquist included when ``f_hi`` reaches it)."""
    nyquist = sp.sample_rate / 2
    if not (0 <= f_lo < f_hi <= nyquist):
        raise ValueError(f"band [{f_lo}, {f_hi}] must satisfy 0 <= lo < hi <= {nyquist}")
    f = sp.frequencies
    sel = (f >= f_lo) & ((f < f_hi) | (f_hi >= nyquist))
    return float(np.sum(sp.bin_weights()[sel] * sp.amplitudes[sel] ** 2))


@dataclass(frozen=True)
class Spectrogram:
    magnitudes: np.ndarray  # (time bins, frequency bins)
    times: np.ndarray  # start time of each frame, seconds
    frequencies: np.ndarray
    window_len: int
    hop_len: int
    window: str


def spectrogram(trace, window_len, hop_len, sample_rate, window="hann"):
    """Short-time magnitude spectra of frames ``[j*hop, j*hop + window_len)``."""
    x = np.asarray(trace, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("need a 1-D trace")
    if not 1 <= window_len <= x.size:
        raise ValueError(f"window_len must be in 1..{x.size}")
    if hop_len < 1:
        raise ValueError("hop_len must be >= 1")
    taper = get_window(window, window_len, fftbins=True)
    frames = np.lib.stride_tricks.sliding_window_view(x, window_len)[::hop_len]
    mags = np.abs(np.fft.rfft(frames * taper, axis=1))
    times = np.arange(frames.shape[0]) * hop_len / sample_rate
    freqs = np.fft.rfftfreq(window_len, d=1.0 / sample_rate)
    return Spectrogram(mags, times, freqs, window_len, hop_len, str(window))


def histogram(ts, num_bins):
    """Equal-width bin counts over every sample of the set; returns ``(counts, edges)``."""
    if num_bins < 1:
        raise ValueError("num_bins must be >= 1")
    data = np.asarray(getattr(ts, "samples", ts), dtype=np.float64).ravel()
    if data.size == 0:
        return np.zeros(num_bins, dtype=np.int64), np.linspace(0.0, 1.0, num_bins + 1)
    counts, edges = np.histogram(data, bins=num_bins, range=(data.min(), data.max()))
    return counts, edges


def mean_spectrum(ts):
    """Average magnitude spectrum over the traces of a set."""
    if ts.num_traces == 0:
        raise ValueError("empty trace set")
    rate = ts.sample_rate_hz or 1.0
    amps = np.abs(np.fft.rfft(ts.samples.astype(np.float64), axis=1)).mean(axis=0)
    freqs = np.fft.rfftfreq(ts.num_samples, d=1.0 / rate)
    return Spectrum(freqs, amps, ts.num_samples, float(rate), "boxcar", "mean")


def mean_band_energy(ts, f_lo, f_hi):
    rate = ts.sample_rate_hz or 1.0
    if ts.num_traces == 0:
        raise ValueError("empty trace set")
    return float(np.mean([band_energy(magnitude_spectrum(row, rate), f_lo, f_hi) for row in ts.samples]))


def band_energy_comparison(ts_a, ts_b, bands):
    """Rows of ``(f_lo, f_hi, energy_a, energy_b, ratio_a_over_b)`` per band."""
    rows = []
    for f_lo, f_hi in bands:
        ea = mean_band_energy(ts_a, f_lo, f_hi)
        eb = mean_band_energy(ts_b, f_lo, f_hi)
        rows.append((f_lo, f_hi, ea, eb, ea / eb if eb > 0 else float("inf")))
    return rows


# --- plot-data writers ------------------------------------------------------

def write_spectrum_csv(sp, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["frequency_hz", "amplitude", "amplitude_db"])
        for fr, a, d in zip(sp.frequencies, sp.amplitudes, sp.db()):
            w.writerow([repr(float(fr)), repr(float(a)), repr(float(d))])


def write_spectrogram_csv(sg, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time_bin", "freq_bin", "time_s", "frequency_hz", "magnitude", "magnitude_db"])
        for i, t in enumerate(sg.times):
            for k, fr in enumerate(sg.frequencies):
                m = float(sg.magnitudes[i, k])
                w.writerow([i, k, repr(float(t)), repr(float(fr)), repr(m),
                            repr(float(20 * np.log10(max(m, 1e-12))))])


def write_histogram_csv(counts, edges, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])


def write_time_series_csv(trace, sample_rate, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time_s", "voltage_v"])
        rate = sample_rate or 1.0
        for i, v in enumerate(np.asarray(trace, dtype=np.float64)):
            w.writerow([repr(i / rate), repr(float(v))])


def write_band_energy_csv(rows, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["f_lo_hz", "f_hi_hz", "energy_a", "energy_b", "ratio"])
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
