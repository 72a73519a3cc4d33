import json
import re
import subprocess
import sys

import numpy as np
import pytest

from amlab.cli import ConfigError, canonicalize, digest_of, main
from amlab.plotting import PlotError, emit_plot
from amlab.reports import canonical_json


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_dip_marks_minimum(tmp_path):
    assert main(["dip", "--out", str(tmp_path), "--plot"]) == 0
    out = json.loads((tmp_path / "dip.json").read_text())
    assert out["argmin_index"] == 27652 and out["first_exceed_index"] == 830973
    svg = (tmp_path / "plot.svg").read_text()
    marker = re.search(r'class="min-marker"[^>]*data-min-x="([^"]+)"', svg)
    assert marker and float(marker.group(1)) == out["argmin_index"]
    assert out["config_digest"] in svg


def test_chain_runs_are_byte_identical(tmp_path):
    args = ["am-run", "--n", "3000", "--replicas", "2", "--seed", "9", "--plot"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a, b = _files(tmp_path / "a"), _files(tmp_path / "b")
    assert set(a) == {"config.json", "am_run.json", "trace_0.csv", "trace_1.csv", "plot.svg"}
    for name in a:
        if name != "config.json":
            assert a[name] == b[name], name
    cfg_a = json.loads(a["config.json"])
    cfg_b = json.loads(b["config.json"])
    assert cfg_a["config_digest"] == cfg_b["config_digest"]
    # rerunning from the emitted config reproduces the results
    assert main(["am-run", "--config", str(tmp_path / "a" / "config.json"),
                 "--out", str(tmp_path / "c")]) == 0
    c = _files(tmp_path / "c")
    assert c["am_run.json"] == a["am_run.json"] and c["trace_1.csv"] == a["trace_1.csv"]


def test_digest_in_every_output(tmp_path):
    assert main(["expectation", "--n", "500", "--out", str(tmp_path), "--plot"]) == 0
    digest = json.loads((tmp_path / "config.json").read_text())["config_digest"]
    for name, raw in _files(tmp_path).items():
        assert digest.encode() in raw, name
    assert (tmp_path / "expectation.csv").read_text().startswith(f"# config_digest={digest}")


def test_check_schedule_threshold_failure(tmp_path):
    assert main(["check-schedule", "--schedule", "power:1,0.4", "--out", str(tmp_path)]) == 2
    assert main(["check-schedule", "--out", str(tmp_path / "ok")]) == 0


def test_invalid_config_names_field(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"subcommand": "am-run", "n_steps": "many"}))
    assert main(["am-run", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "config.n_steps" in capsys.readouterr().err
    assert main(["gn", "--set", "seeds.n_replicas=0", "--out", str(tmp_path)]) == 1
    assert "config.seeds.n_replicas" in capsys.readouterr().err


def test_collapse_exit_code_and_dump(tmp_path):
    code = main(["arw-run", "--dim", "2", "--n", "200000", "--theta", "0.5",
                 "--set", "factorization=\"refactor\"", "--out", str(tmp_path)])
    assert code == 3
    dump = json.loads((tmp_path / "collapse_0.json").read_text())
    assert dump["n"] > 1 and "config_digest" in dump


def test_canonicalize_is_idempotent():
    for sub in ("am-run", "dip", "coupling-test", "eigen-floor", "check-schedule"):
        c = canonicalize({"subcommand": sub, "seeds": [3, 4]})
        assert canonicalize(json.loads(canonical_json(c))) == c
    with pytest.raises(ConfigError):
        canonicalize({"subcommand": "dip", "bogus": 1})


def test_digest_ignores_output_dir():
    a = canonicalize({"subcommand": "dip", "output_dir": "x"})
    b = canonicalize({"subcommand": "dip", "output_dir": "y"})
    c = canonicalize({"subcommand": "dip", "theta": 0.02})
    assert digest_of(a) == digest_of(b) != digest_of(c)


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "amlab", "growth-check", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr


# plots

def test_plot_rejects_bad_input(tmp_path):
    with pytest.raises(PlotError):
        emit_plot({}, tmp_path / "p.svg")
    with pytest.raises(PlotError):
        emit_plot({"s": ([1, 2], [0.0, 1.0])}, tmp_path / "p.svg", log_y=True)


def test_plot_overlays_series(tmp_path):
    x = np.arange(1, 101)
    emit_plot({"a": (x, (x - 40.0) ** 2 + 1), "b": (x, np.sqrt(x))}, tmp_path / "p.svg",
              log_x=True, description="config_digest=abc")
    svg = (tmp_path / "p.svg").read_text()
    assert svg.count('class="series"') == 2
    assert 'data-min-x="40"' in svg and "config_digest=abc" in svg
