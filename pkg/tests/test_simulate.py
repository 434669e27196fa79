import numpy as np
import pytest

from presentcema.cipher import SBOX_BYTE, bytes_to_int, encrypt, int_to_bytes64
from presentcema.leakage import build_hypotheses
from presentcema.simulate import (
    TARGET_KEY,
    SimConfig,
    default_leak_offsets,
    gen_plaintexts_paper_sweep,
    simulate_noise_only,
    simulate_trace_set,
)
from presentcema.stats import correlation_surface

from oracles import popcount_loop


def test_sweep_blocks():
    pts = gen_plaintexts_paper_sweep(256)
    assert bytes(pts[0]) == bytes(8)
    assert bytes(pts[255]) == b"\xff" * 8
    assert bytes(pts[0xAC]) == b"\xac" * 8
    with pytest.raises(ValueError):
        gen_plaintexts_paper_sweep(257)


def test_default_dimensions_follow_acquisition():
    cfg = SimConfig()
    assert (cfg.num_traces, cfg.samples_per_trace, cfg.averaging) == (256, 8800, 5)
    assert cfg.gain == 1e-3
    assert len(set(cfg.offsets)) == 8


def test_noiseless_serial_values():
    cfg = SimConfig(gain=1.0, noise_sigma=0.0, samples_per_trace=160, key=0x0123456789ABCDEF1357,
                    plaintext_mode="random", num_traces=30)
    ts = simulate_trace_set(cfg)
    subkey = int_to_bytes64(cfg.key >> 16)
    mask = np.ones(160, bool)
    for j, off in enumerate(cfg.offsets):
        mask[off] = False
        for t in range(30):
            expected = popcount_loop(SBOX_BYTE[int(ts.plaintexts[t, j]) ^ subkey[j]])
            assert ts.samples[t, off] == expected
    assert np.all(ts.samples[:, mask] == 0)


def test_noiseless_parallel_equal_key_bytes():
    k = 0x3C
    key = int.from_bytes(bytes([k] * 10), "big")
    cfg = SimConfig(key=key, gain=1.0, noise_sigma=0.0, schedule="parallel", samples_per_trace=64)
    ts = simulate_trace_set(cfg)
    off = cfg.offsets[0]
    for i in range(256):
        assert ts.samples[i, off] == 8 * popcount_loop(SBOX_BYTE[i ^ k])


def test_ciphertexts_attached():
    ts = simulate_trace_set(SimConfig(num_traces=5, samples_per_trace=16))
    for p, c in zip(ts.plaintexts, ts.ciphertexts):
        assert bytes_to_int(c) == encrypt(bytes_to_int(p), TARGET_KEY)


@pytest.mark.parametrize("m", [1, 5, 25])
def test_averaging_law(m):
    sigma = 0.7
    cfg = SimConfig(num_traces=10_000, samples_per_trace=12, noise_sigma=sigma, averaging=m, gain=0.0,
                    plaintext_mode="random", seed=m, with_ciphertexts=False)
    var = simulate_trace_set(cfg).samples.astype(np.float64).var(axis=0)
    assert np.all(np.abs(var / (sigma**2 / m) - 1) < 0.10)


def test_noise_only():
    cfg = SimConfig(noise_sigma=0.0, samples_per_trace=32, num_traces=20)
    ts = simulate_noise_only(cfg)
    assert np.all(ts.samples == 0)
    assert np.array_equal(ts.plaintexts, gen_plaintexts_paper_sweep(20))

    sigma = 1.0
    cfg = SimConfig(num_traces=10_000, samples_per_trace=8, noise_sigma=sigma, averaging=1,
                    plaintext_mode="random", seed=11, with_ciphertexts=False)
    mean = simulate_noise_only(cfg).samples.astype(np.float64).mean(axis=0)
    assert np.all(np.abs(mean) < 3 * sigma / np.sqrt(10_000))


def test_noise_only_cema_null_level():
    # max |rho| of a pure-noise surface over one column per seed
    below = 0
    for seed in range(20):
        ts = simulate_noise_only(SimConfig(samples_per_trace=16, noise_sigma=1.0, seed=seed,
                                           with_ciphertexts=False))
        rho = correlation_surface(ts, build_hypotheses(ts.plaintexts, 0)).rho
        below += np.max(np.abs(rho)) < 5 / np.sqrt(256)
    assert below >= 19


def test_determinism_and_seed_independence_of_structure():
    cfg = SimConfig(samples_per_trace=200, seed=42, plaintext_mode="random", plaintext_seed=3)
    a, b = simulate_trace_set(cfg), simulate_trace_set(cfg)
    assert a == b
    c = simulate_trace_set(SimConfig(samples_per_trace=200, seed=43, plaintext_mode="random", plaintext_seed=3))
    assert np.array_equal(a.plaintexts, c.plaintexts)
    assert a.metadata["leak_offsets"] == c.metadata["leak_offsets"]
    assert not np.array_equal(a.samples, c.samples)


def test_per_trace_noise_independent_of_trace_count():
    small = simulate_trace_set(SimConfig(num_traces=10, samples_per_trace=50, seed=5))
    big = simulate_trace_set(SimConfig(num_traces=40, samples_per_trace=50, seed=5))
    assert np.array_equal(small.samples, big.samples[:10])


def test_serial_separability(small_noiseless_set):
    ts = small_noiseless_set
    offsets = ts.metadata["leak_offsets"]
    row_key = int_to_bytes64(TARGET_KEY >> 16)
    for j in range(8):
        rho = correlation_surface(ts, build_hypotheses(ts.plaintexts, j)).rho[row_key[j]]
        assert np.argmax(rho) == offsets[j]
        assert rho[offsets[j]] == pytest.approx(1.0, abs=1e-9)
        nonzero = set(np.flatnonzero(np.abs(rho) > 1e-12).tolist())
        assert nonzero <= set(offsets)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(leak_offsets=(0, 1, 2, 3, 4, 5, 6, 100), samples_per_trace=50),
        dict(leak_offsets=(1, 1, 2, 3, 4, 5, 6, 7)),
        dict(averaging=0),
        dict(noise_sigma=-1.0),
        dict(num_traces=300),
        dict(schedule="zigzag"),
        dict(schedule="parallel", leak_offsets=(1, 2)),
    ],
)
def test_invalid_configs(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)


def test_config_text_round_trip():
    cfg = SimConfig(seed=2**63 + 5, noise_sigma=0.25, schedule="parallel", leak_offsets=(17,),
                    plaintext_mode="random", with_ciphertexts=False)
    text = cfg.to_text()
    assert "key=ACDEFB21F9234375C0E6" in text
    assert SimConfig.from_text(text) == SimConfig(**{**cfg.__dict__, "leak_offsets": (17,)})


def test_default_offsets_are_segment_centres():
    assert default_leak_offsets(8800) == (550, 1650, 2750, 3850, 4950, 6050, 7150, 8250)
    assert default_leak_offsets(8800, "parallel") == (4400,)
