"""Correlation EM analysis toolkit for the PRESENT-80 block cipher."""

from .attack import key_rank, run_cema, run_dema, run_noise_control
from .cipher import encrypt, key_schedule_80, round1_sbox_output_byte
from .simulate import TARGET_KEY, SimConfig, simulate_noise_only, simulate_trace_set
from .traceio import TraceSet, read_trace_set, write_trace_set

__version__ = "0.1.0"
