import json
import subprocess
import sys

import pytest

from dfsq import checks
from dfsq.cli import EXIT_CHECKS, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from dfsq.config import ConfigError, from_mapping, load, shipped


def write(tmp_path, **cfg):
    base = {"source": {"kind": "uniform"}, "function": {"name": "square"},
            "regime": "fixed", "rates": [6], "samples": 8192, "grid_size": 256}
    base.update(cfg)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(base))
    return str(path)


def test_shipped_configs_validate():
    for name in ("example1_square.json", "max_sweep.json", "max_n4_fixed.json"):
        cfg = load(shipped(name))
        assert cfg.rates


def test_schema_errors():
    with pytest.raises(ConfigError) as e:
        from_mapping({"source": {"kind": "uniform"}, "function": {"name": "nope"},
                      "regime": "fixed", "rates": [4]})
    assert "function/name" in str(e.value)
    with pytest.raises(ConfigError):
        from_mapping({"source": {"kind": "power"}, "function": {"name": "square"},
                      "regime": "fixed", "rates": [4]})
    with pytest.raises(ConfigError):
        from_mapping({"source": {"kind": "uniform"}, "function": {"name": "max"},
                      "regime": "fixed", "rates": [4]})
    with pytest.raises(ConfigError):
        from_mapping({"source": {"kind": "uniform"}, "function": {"name": "square"},
                      "regime": "fixed", "rates": [4], "colour": "red"})


def test_design_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["design", "--config", write(tmp_path, rates=[2]), "--out", str(out)]) == EXIT_OK
    cb = (out / "codebook_1.csv").read_text().splitlines()
    assert cb[0] == "cell_index,left,right,codeword" and len(cb) == 5
    assert (out / "design.csv").read_text().startswith("variable,regime,R,constant")


def test_simulate_byte_identical_across_threads(tmp_path):
    cfg = write(tmp_path, function={"name": "max", "n": 2}, regime="variable")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--out", str(a), "--threads", "1"]) == EXIT_OK
    assert main(["simulate", "--config", cfg, "--out", str(b), "--threads", "4"]) == EXIT_OK
    for name in ("distortion.csv", "rate.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_sweep(tmp_path):
    cfg = write(tmp_path, function={"name": "max", "n_values": [1, 2]}, rates=[4, 5],
                simulate_sweep=False)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "s")]) == EXIT_OK
    lines = (tmp_path / "s" / "sweep.csv").read_text().splitlines()
    assert len(lines) == 5
    # n = 1 max is the identity: normalized distortion is exactly 1
    assert float(lines[1].split(",")[8]) == pytest.approx(1.0, abs=1e-12)


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"source": {"kind": "uniform"}, "function": {"name": "sinc"}, '
                   '"regime": "fixed", "rates": [4]}')
    assert main(["design", "--config", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["design", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert main(["design", "--config", str(broken), "--out", str(tmp_path)]) == EXIT_CONFIG
    clip = write(tmp_path, function={"name": "min_clip"}, regime="variable")
    assert main(["design", "--config", clip, "--out", str(tmp_path / "c")]) == EXIT_NUMERIC


def test_verify_passes(tmp_path, capsys):
    cfg = write(tmp_path, regime="variable")
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "v")]) == EXIT_OK
    assert "checks passed" in capsys.readouterr().out


def test_verify_reports_failure(tmp_path, monkeypatch):
    bad = checks.Check("always fails", 1, 1)
    monkeypatch.setattr(checks, "property_suites", lambda seed=0: [bad])
    cfg = write(tmp_path)
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "v")]) == EXIT_CHECKS


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "dfsq", "design", "--config", write(tmp_path),
                        "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
