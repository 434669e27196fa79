"""Hamming-weight / Hamming-distance leakage models and hypothesis matrices."""

from dataclasses import dataclass

import numpy as np

from .cipher import SBOX_BYTE

HW_TABLE = np.array([bin(v).count("1") for v in range(256)], dtype=np.uint8)
_SBOX_BYTE = np.array(SBOX_BYTE, dtype=np.uint8)
_KEYS = np.arange(256, dtype=np.uint8)


def hamming_weight(v):
    if not 0 <= v <= 0xFF:
        raise ValueError(f"expected an 8-bit value, got {v}")
    return int(HW_TABLE[v])


def hamming_distance(u, v):
    return hamming_weight(u ^ v)


@dataclass(frozen=True)
class LeakModelParams:
    """Linear leakage ``W = gain * HW(D ^ reference) + noise``."""

    gain: float = 1e-3
    noise_sigma: float = 0.0
    reference: int = 0

    def __post_init__(self):
        if not np.isfinite(self.gain):
            raise ValueError("gain must be finite")
        if not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0 <= self.reference <= 0xFF:
            raise ValueError("reference state must be an 8-bit value")


@dataclass(frozen=True)
class HypothesisMatrix:
    values: np.ndarray  # (256, T) uint8, row = key guess
    byte_index: int
    model: str = "hw"

    @property
    def num_traces(self):
        return self.values.shape[1]


def build_hypotheses(plaintexts, byte_index, model="hw", reference=0):
    """Predicted leakage of the round-1 S-box output for every key guess.

    ``plaintexts`` is a (T, 8) byte array (or a list of 8-byte blocks).
    ``model`` is ``"hw"`` or ``"hd"``; the HD model compares against
    ``reference``.
    """
    pts = np.asarray(plaintexts, dtype=np.uint8)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("need a non-empty (T, 8) plaintext array")
    if pts.shape[1] != 8:
        raise ValueError(f"plaintext blocks must be 8 bytes, got {pts.shape[1]}")
    if not 0 <= byte_index < 8:
        raise ValueError(f"byte_index must be in 0..7, got {byte_index}")
    if model not in ("hw", "hd"):
        raise ValueError(f"unknown leakage model {model!r}")
    if model == "hw":
        reference = 0
    elif not 0 <= reference <= 0xFF:
        raise ValueError("reference state must be an 8-bit value")

    column = pts[:, byte_index]
    intermediates = _SBOX_BYTE[column[None, :] ^ _KEYS[:, None]]
    values = HW_TABLE[intermediates ^ np.uint8(reference)]
    values.setflags(write=False)
    return HypothesisMatrix(values, byte_index, model)
