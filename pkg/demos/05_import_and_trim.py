"""From oscilloscope CSV exports to a trimmed, saved trace set."""
import sys
import tempfile
from pathlib import Path

import numpy as np

from presentcema.traceio import import_oscilloscope_csv, read_trace_set, trim, write_trace_set

work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="import_"))
work.mkdir(parents=True, exist_ok=True)

# Fake three scope captures: 2.5 GS/s, 16000 points, with a trigger jitter.
rng = np.random.default_rng(0)
rate = 2.5e9
files = []
for i, jitter in enumerate((0, 3, -2)):
    t = np.arange(16000) / rate
    v = 1e-3 * rng.normal(size=t.size)
    v[8000 + jitter] += 0.02
    path = work / f"scope_{i}.csv"
    np.savetxt(path, np.column_stack([t, v]), delimiter=",", header="time_s,volts", comments="")
    files.append(path)

pts = np.zeros((3, 8), np.uint8)
pts[:, :] = np.arange(3)[:, None] * 0x11
ts = import_oscilloscope_csv(files, pts, shifts=[0, 3, -2])  # move each trace left by its jitter
print(f"imported {ts.num_traces} x {ts.num_samples} at {ts.sample_rate_hz / 1e9:.2f} GS/s")
print("spike positions after alignment:", np.argmax(ts.samples, axis=1))

# Keep the cipher window only.
cut = trim(ts, 3600, 12400)
print("trimmed to", cut.num_samples, "samples, offset", cut.metadata["trim_offset"])

manifest = work / "scope_set.json"
write_trace_set(cut, manifest)
back = read_trace_set(manifest)
print("round trip identical:", back == cut)
