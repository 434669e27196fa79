import numpy as np
import pytest

from presentcema.simulate import TARGET_KEY, SimConfig, simulate_trace_set


@pytest.fixture(scope="session")
def noiseless_full_set():
    """256 x 8800 traces, 00..FF plaintext sweep, serial leakage, sigma=0, gain 1."""
    return simulate_trace_set(SimConfig(key=TARGET_KEY, gain=1.0, noise_sigma=0.0))


@pytest.fixture(scope="session")
def small_noiseless_set():
    return simulate_trace_set(
        SimConfig(key=TARGET_KEY, gain=1.0, noise_sigma=0.0, samples_per_trace=400)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = []


@pytest.fixture
def verdict():
    """Record one pass/fail line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
