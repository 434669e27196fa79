"""Time and frequency views: histogram, spectrum, spectrogram, band energy."""
import sys
import tempfile
from pathlib import Path

import numpy as np

from presentcema.simulate import SimConfig, simulate_noise_only, simulate_trace_set
from presentcema.spectral import (
    band_energy_comparison,
    histogram,
    magnitude_spectrum,
    spectrogram,
    write_histogram_csv,
    write_spectrogram_csv,
    write_spectrum_csv,
)

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="sfema_"))
out.mkdir(parents=True, exist_ok=True)

enc = simulate_trace_set(SimConfig(seed=1))
idle = simulate_noise_only(SimConfig(seed=2))

counts, edges = histogram(enc, 64)
print("amplitude range %.4f .. %.4f V, modal bin at %.4f V"
      % (edges[0], edges[-1], edges[np.argmax(counts)]))
write_histogram_csv(counts, edges, out / "histogram.csv")

sp = magnitude_spectrum(enc.samples[0], enc.sample_rate_hz)
print(f"{sp.frequencies.size} bins up to {sp.frequencies[-1] / 1e9:.2f} GHz, "
      f"energy {sp.energy():.3e} V^2 (sum of squares {np.sum(enc.samples[0].astype(float)**2):.3e})")
write_spectrum_csv(sp, out / "spectrum.csv")

sg = spectrogram(enc.samples[0], 512, 256, enc.sample_rate_hz)
print("spectrogram", sg.magnitudes.shape, "(frames x bins)")
write_spectrogram_csv(sg, out / "spectrogram.csv")

# The simulated leakage is a few isolated samples, so the encryption set
# carries a little more broadband energy than the idle set.
bands = [(0, 75e6), (75e6, 200e6), (200e6, 1.25e9)]
for lo, hi, ea, eb, ratio in band_energy_comparison(enc, idle, bands):
    print(f"{lo / 1e6:>6.0f}-{hi / 1e6:<6.0f} MHz  enc {ea:.3e}  idle {eb:.3e}  ratio {ratio:.3f}")
print("csv written to", out)
