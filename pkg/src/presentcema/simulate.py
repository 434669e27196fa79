"""Synthetic EM traces with Hamming-weight leakage of the round-1 S-box output.

Each stored trace is the average of ``averaging`` independent noisy captures,
as an oscilloscope in average mode would produce. Trace ``t`` draws its noise
from its own child of ``SeedSequence(seed)``, so a trace's noise never depends
on how many traces are generated alongside it or in which order.
"""

from dataclasses import asdict, dataclass, fields

import numpy as np

from .cipher import SBOX_BYTE, encrypt, format_hex, parse_key, bytes_to_int, int_to_bytes64, MASK80
from .leakage import HW_TABLE
from .traceio import TraceSet

_SBOX_BYTE = np.array(SBOX_BYTE, dtype=np.uint8)

TARGET_KEY = 0xACDEFB21F9234375C0E6
SCHEDULES = ("serial", "parallel")
PLAINTEXT_MODES = ("sweep", "random")


def default_leak_offsets(samples_per_trace, schedule="serial"):
    """Serial: centre of each of 8 equal segments. Parallel: the middle sample."""
    if schedule == "parallel":
        return (samples_per_trace // 2,)
    return tuple((2 * j + 1) * samples_per_trace // 16 for j in range(8))


@dataclass(frozen=True)
class SimConfig:
    key: int = TARGET_KEY
    num_traces: int = 256
    samples_per_trace: int = 8800
    schedule: str = "serial"
    leak_offsets: tuple | None = None
    gain: float = 1e-3
    noise_sigma: float = 2e-3
    averaging: int = 5
    seed: int = 0
    plaintext_mode: str = "sweep"
    plaintext_seed: int = 0
    sample_rate_hz: float = 2.5e9
    with_ciphertexts: bool = True

    def __post_init__(self):
        if not 0 <= self.key <= MASK80:
            raise ValueError("key must be an 80-bit value")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")
        if self.plaintext_mode not in PLAINTEXT_MODES:
            raise ValueError(f"plaintext_mode must be one of {PLAINTEXT_MODES}")
        if self.num_traces < 0 or self.samples_per_trace < 1:
            raise ValueError("need num_traces >= 0 and samples_per_trace >= 1")
        if self.plaintext_mode == "sweep" and self.num_traces > 256:
            raise ValueError("the plaintext sweep has at most 256 blocks")
        if self.averaging < 1:
            raise ValueError("averaging count must be >= 1")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be >= 0")
        if not np.isfinite(self.gain):
            raise ValueError("gain must be finite")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned value")
        offsets = self.offsets
        if any(not 0 <= o < self.samples_per_trace for o in offsets):
            raise ValueError(f"leak offsets {offsets} outside [0, {self.samples_per_trace})")
        if self.schedule == "serial" and len(set(offsets)) != 8:
            raise ValueError("serial schedule needs exactly 8 distinct leak offsets")
        if self.schedule == "parallel" and len(offsets) != 1:
            raise ValueError("parallel schedule takes a single leak offset")

    @property
    def offsets(self):
        if self.leak_offsets is None:
            return default_leak_offsets(self.samples_per_trace, self.schedule)
        return tuple(int(o) for o in self.leak_offsets)

    def to_text(self):
        """Plain ``name=value`` lines; the key is written as 20 hex digits."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "key":
                value = format_hex(value, 10)
            elif f.name == "leak_offsets":
                value = ",".join(str(o) for o in self.offsets)
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        kinds = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            name, _, raw = line.partition("=")
            name = name.strip()
            raw = raw.strip()
            if name not in kinds:
                raise ValueError(f"unknown SimConfig field {name!r}")
            if name == "key":
                kwargs[name] = parse_key(raw)
            elif name == "leak_offsets":
                kwargs[name] = tuple(int(x) for x in raw.split(",") if x)
            elif name in ("schedule", "plaintext_mode"):
                kwargs[name] = raw
            elif name == "with_ciphertexts":
                kwargs[name] = raw == "True"
            elif name in ("gain", "noise_sigma", "sample_rate_hz"):
                kwargs[name] = float(raw)
            else:
                kwargs[name] = int(raw)
        return cls(**kwargs)

    def to_dict(self):
        d = asdict(self)
        d["key"] = format_hex(self.key, 10)
        d["leak_offsets"] = list(self.offsets)
        return d


def gen_plaintexts_paper_sweep(n=256):
    """Block i repeats byte value i in all 8 positions."""
    if not 0 <= n <= 256:
        raise ValueError(f"the sweep has at most 256 blocks, asked for {n}")
    return np.repeat(np.arange(n, dtype=np.uint8)[:, None], 8, axis=1)


def gen_plaintexts_random(n, seed=0):
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x9E3779B9]))
    return rng.integers(0, 256, size=(n, 8), dtype=np.uint8)


def _plaintexts(cfg):
    if cfg.plaintext_mode == "sweep":
        return gen_plaintexts_paper_sweep(cfg.num_traces)
    return gen_plaintexts_random(cfg.num_traces, cfg.plaintext_seed)


def leakage_values(plaintexts, key):
    """(T, 8) Hamming weights of the round-1 S-box output bytes."""
    subkey = np.array(int_to_bytes64(key >> 16), dtype=np.uint8)
    return HW_TABLE[_SBOX_BYTE[np.asarray(plaintexts, dtype=np.uint8) ^ subkey[None, :]]]


def _noise(cfg):
    out = np.zeros((cfg.num_traces, cfg.samples_per_trace))
    if cfg.noise_sigma == 0 or cfg.num_traces == 0:
        return out
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.num_traces)
    for t, child in enumerate(children):
        rng = np.random.default_rng(child)
        draws = rng.standard_normal((cfg.averaging, cfg.samples_per_trace))
        out[t] = draws.mean(axis=0)
    return out * cfg.noise_sigma


def _build(cfg, gain):
    pts = _plaintexts(cfg)
    samples = _noise(cfg)
    if gain != 0 and cfg.num_traces:
        hw = leakage_values(pts, cfg.key).astype(np.float64)
        if cfg.schedule == "serial":
            for j, offset in enumerate(cfg.offsets):
                samples[:, offset] += gain * hw[:, j]
        else:
            samples[:, cfg.offsets[0]] += gain * hw.sum(axis=1)
    cts = None
    if cfg.with_ciphertexts:
        cts = np.array(
            [int_to_bytes64(encrypt(bytes_to_int(p), cfg.key)) for p in pts], dtype=np.uint8
        ).reshape(-1, 8)
    meta = {
        "sim_config": cfg.to_text(),
        "leak_offsets": list(cfg.offsets),
        "averaging_count": cfg.averaging,
        "prng": "numpy PCG64, SeedSequence(seed).spawn(num_traces)",
        "effective_gain": gain,
    }
    return TraceSet(samples, pts, cts, cfg.sample_rate_hz, "simulated", meta)


def simulate_trace_set(cfg):
    return _build(cfg, cfg.gain)


def simulate_noise_only(cfg):
    """Same acquisition as ``simulate_trace_set`` but with zero leakage gain."""
    return _build(cfg, 0.0)
