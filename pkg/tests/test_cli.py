import json

import numpy as np
import pytest

from presentcema.cli import build_parser, main
from presentcema.traceio import TraceSet, read_trace_set, write_trace_set


def run(argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:
        return exc.code


@pytest.fixture
def noiseless(tmp_path):
    path = tmp_path / "noiseless.json"
    assert run(["simulate", "--out", path, "--sigma", "0", "--gain", "1", "--schedule", "serial",
                "--samples", 800, "--seed", 1]) == 0
    return path


def test_simulate_default_dimensions(tmp_path, capsys):
    path = tmp_path / "d.json"
    assert run(["simulate", "--out", path, "--key", "ACDEFB21F9234375C0E6", "--seed", 7]) == 0
    ts = read_trace_set(path)
    assert (ts.num_traces, ts.num_samples) == (256, 8800)
    out = capsys.readouterr().out
    assert "256 x 8800" in out and "seed=7" in out


def test_simulate_prints_generated_seed(tmp_path, capsys):
    assert run(["simulate", "--out", tmp_path / "s.json", "--samples", 16, "--traces", 4]) == 0
    assert "seed=" in capsys.readouterr().out


def test_bad_key_is_usage_error(tmp_path):
    assert run(["simulate", "--out", tmp_path / "x.json", "--key", "ACDEFB21F9234375C0E"]) == 2


def test_invalid_config_is_usage_error(tmp_path):
    assert run(["simulate", "--out", tmp_path / "x.json", "--averaging", 0]) == 2


def test_unknown_flag_rejected(tmp_path):
    assert run(["simulate", "--out", tmp_path / "x.json", "--bogus"]) == 2
    assert run([]) == 2


def test_attack_cema_noiseless(noiseless, tmp_path, capsys):
    out_json = tmp_path / "r.json"
    assert run(["attack", "cema", noiseless, "--out-json", out_json, "--out-text", tmp_path / "r.txt",
                "--true-key", "ACDEFB21F9234375C0E6"]) == 0
    out = capsys.readouterr().out
    assert "rank-1 subkey bytes: AC DE FB 21 F9 23 43 75" in out
    data = json.loads(out_json.read_text())
    assert [b["ranking"][0] for b in data["bytes"]] == [0xAC, 0xDE, 0xFB, 0x21, 0xF9, 0x23, 0x43, 0x75]


def test_attack_byte_subset(noiseless, tmp_path):
    out_json = tmp_path / "r.json"
    assert run(["attack", "cema", noiseless, "--bytes", "0,3", "--out-json", out_json,
                "--out-text", tmp_path / "r.txt"]) == 0
    data = json.loads(out_json.read_text())
    assert [b["byte_index"] for b in data["bytes"]] == [0, 3]


def test_attack_dema(noiseless, tmp_path):
    out_json = tmp_path / "d.json"
    assert run(["attack", "dema", noiseless, "--bit", 0, "--out-json", out_json,
                "--out-text", tmp_path / "d.txt"]) == 0
    data = json.loads(out_json.read_text())
    assert data["attack"] == "dema" and len(data["ranking"]) == 256
    assert run(["attack", "dema", noiseless, "--out-json", out_json]) == 2
    assert run(["attack", "dema", noiseless, "--bit", 9, "--out-json", out_json]) == 2


def test_attack_surface_dump(noiseless, tmp_path):
    d = tmp_path / "surf"
    assert run(["attack", "cema", noiseless, "--bytes", "2", "--surface-dir", d,
                "--out-json", tmp_path / "r.json", "--out-text", tmp_path / "r.txt"]) == 0
    assert (d / "surface_byte2.csv").exists()


def test_attack_corrupt_input(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run(["attack", "cema", bad, "--out-json", tmp_path / "r.json"]) == 3
    assert run(["attack", "cema", tmp_path / "missing.json"]) == 3


def test_noise_control(tmp_path):
    path = tmp_path / "n.json"
    assert run(["simulate", "--out", path, "--noise-only", "--samples", 400, "--seed", 3]) == 0
    out_json = tmp_path / "nc.json"
    assert run(["noise-control", path, "--out-json", out_json, "--out-text", tmp_path / "nc.txt"]) == 0
    data = json.loads(out_json.read_text())
    assert data["verdict"] in ("clean", "systematic-artifact suspected")


def test_sema_outputs(tmp_path):
    path = tmp_path / "n.json"
    run(["simulate", "--out", path, "--noise-only", "--samples", 400, "--seed", 3])
    d = tmp_path / "sema"
    assert run(["sema", path, "--out-dir", d, "--bins", 31, "--compare", path]) == 0
    rows = (d / "histogram.csv").read_text().splitlines()
    counts = [int(r.split(",")[2]) for r in rows[1:]]
    assert sum(counts) == 256 * 400
    mode = int(np.argmax(counts))
    assert 10 <= mode <= 20
    assert (d / "time_series.csv").exists() and (d / "histogram_compare.csv").exists()


def test_sfema_constant_trace_and_bands(tmp_path):
    const = TraceSet(np.full((2, 64), 0.2), np.zeros((2, 8)), sample_rate_hz=1000.0)
    write_trace_set(const, tmp_path / "c.json")
    d = tmp_path / "sf"
    assert run(["sfema", tmp_path / "c.json", "--out-dir", d, "--window-len", 32, "--hop", 16,
                "--compare", tmp_path / "c.json", "--band", "0:100", "--band", "100:500"]) == 0
    rows = [r.split(",") for r in (d / "spectrum.csv").read_text().splitlines()[1:]]
    amps = [float(r[1]) for r in rows]
    assert amps[0] == pytest.approx(64 * 0.2, rel=1e-6)
    assert max(amps[1:]) < 1e-6
    bands = (d / "band_energy.csv").read_text().splitlines()
    assert len(bands) == 1 + 2
    assert (d / "spectrogram.csv").exists()
    assert run(["sfema", tmp_path / "c.json", "--out-dir", d, "--band", "0:900"]) == 2


def test_import_and_trim(tmp_path):
    files = []
    for i in range(2):
        p = tmp_path / f"t{i}.csv"
        p.write_text("time_seconds,voltage_volts\n" + "".join(f"{j * 4e-10!r},{0.001 * (i + j)!r}\n" for j in range(3)))
        files.append(p)
    out = tmp_path / "imp.json"
    assert run(["import", *files, "--out", out]) == 0
    ts = read_trace_set(out)
    assert ts.samples.shape == (2, 3) and ts.source == "imported"

    pts = tmp_path / "pts.txt"
    pts.write_text("0011223344556677\n8899AABBCCDDEEFF\n")
    assert run(["import", *files, "--out", out, "--plaintext-file", pts]) == 0
    assert bytes(read_trace_set(out).plaintexts[1]).hex() == "8899aabbccddeeff"
    assert run(["import", files[0], "--out", out, "--plaintext-file", pts]) == 2

    big = tmp_path / "big.json"
    write_trace_set(TraceSet(np.zeros((3, 16000)), np.zeros((3, 8))), big)
    cut = tmp_path / "cut.json"
    assert run(["trim", big, "--start", 3600, "--end", 12400, "--out", cut]) == 0
    assert read_trace_set(cut).num_samples == 8800
    assert run(["trim", big, "--start", 500, "--end", 500, "--out", cut]) == 2


def test_import_bad_csv_is_io_error(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("0,1\n1,x\n")
    assert run(["import", p, "--out", tmp_path / "o.json"]) == 3


def test_info(noiseless, capsys):
    assert run(["info", noiseless]) == 0
    out = capsys.readouterr().out
    assert "traces:      256" in out and "sim config:" in out


def test_commands_idempotent(tmp_path):
    outputs = []
    for n in range(2):
        d = tmp_path / f"run{n}"
        d.mkdir()
        run(["simulate", "--out", d / "s.json", "--samples", 300, "--seed", 5])
        run(["attack", "cema", d / "s.json", "--out-json", d / "r.json", "--out-text", d / "r.txt"])
        outputs.append([(d / f).read_bytes() for f in ("s.json", "s.f32", "r.json", "r.txt")])
    assert outputs[0] == outputs[1]


def test_help_documents_every_flag():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    assert set(sub.choices) == {"simulate", "attack", "noise-control", "sema", "sfema", "import", "trim", "info"}
    for name, p in sub.choices.items():
        text = p.format_help()
        for action in p._actions:
            for opt in action.option_strings:
                assert opt in text, (name, opt)


def test_extrema_flags(noiseless, tmp_path):
    out_json = tmp_path / "r.json"
    assert run(["attack", "cema", noiseless, "--max-extrema", 2, "--prominence", 0.05,
                "--out-json", out_json, "--out-text", tmp_path / "r.txt"]) == 0
    data = json.loads(out_json.read_text())
    assert data["config"]["max_extrema"] == 2
    assert all(len(b["extrema"]["peaks"]) <= 2 for b in data["bytes"])
    assert run(["attack", "cema", noiseless, "--prominence", "-1", "--out-json", out_json]) == 2
    assert run(["noise-control", noiseless, "--repetition-min", 0, "--out-json", out_json]) == 2
