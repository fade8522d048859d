"""Scenario configuration and the ``qgc`` command line."""
import json
import shutil
import subprocess
import sys

import pytest

from qgc.cli import list_scenarios, main
from qgc.config import ConfigError, KINDS, load_config

MIN_SCENARIOS = 5


def _write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    assert len(out.strip().splitlines()) >= MIN_SCENARIOS
    assert main(["list", "--json"]) == 0
    cat = json.loads(capsys.readouterr().out)
    assert len(cat) >= MIN_SCENARIOS
    assert {e["kind"] for e in cat} == set(KINDS)


@pytest.mark.parametrize("entry", list_scenarios(), ids=lambda e: e["name"])
def test_bundled_entries_parse(entry, tmp_path):
    cfg = load_config(entry["path"], out_dir=tmp_path)
    assert cfg.kind == entry["kind"] and cfg.N >= 2


def test_config_from_mapping(tmp_path):
    cfg = load_config({"name": "m", "kind": "perturbation_scan", "graph": {"preset": "tadpole"},
                       "basis": {"family": "tadpole", "N": 5}, "B": {"preset": "tadpole"},
                       "params": {"scan_points": 3}}, out_dir=tmp_path)
    assert cfg.params["scan_points"] == 3 and cfg.params["u0_values"] == [0.4, 0.2, 0.1, 0.05]


@pytest.mark.parametrize("text, match", [
    ("", "empty"),
    ('name = "x"\nkind = "nope"\n', "kind"),
    ('kind = "lie_audit"\n[graph]\npreset = "tadpole"\n[basis]\nfamily = "tadpole"\nN = 4\n'
     '[B]\npreset = "tadpole"\n[params]\nbogus = 1\n', "bogus"),
    ('kind = "lie_audit"\n[graph]\npreset = "tadpole"\n[basis]\nfamily = "tadpole"\nN = 4\n'
     '[B]\npreset = "tadpole"\n[params]\nrank_tol = -1.0\n', "rank_tol"),
    ('kind = "lie_audit"\n[graph.edges.a]\nlength = 0\nfrom = "p"\nto = "q"\n'
     '[basis]\nfamily = "tadpole"\nN = 4\n[B]\npreset = "tadpole"\n', "nonpositive"),
])
def test_config_errors(tmp_path, text, match):
    with pytest.raises(ConfigError, match=match):
        load_config(_write(tmp_path, text), out_dir=tmp_path / "out")


@pytest.mark.parametrize("text", ["", 'kind = "lie_audit"\n[params]\nbogus = 1\n'])
def test_config_error_exit_code(tmp_path, text, capsys):
    assert main(["run", str(_write(tmp_path, text))]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["run", "no_such_scenario_or_file"]) == 2
    capsys.readouterr()


def test_run_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "tadpole_inline_audit", "--out", str(a)]) == 0
    assert capsys.readouterr().out.rstrip().endswith("PASS")
    assert main(["run", "tadpole_inline_audit", "--out", str(b), "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["passed"] is True
    files = sorted(p.name for p in a.iterdir())
    assert "summary.json" in files and "resonances.csv" in files and "gap_margins.svg" in files
    for name in files:
        if name.endswith((".csv", ".svg")):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_json_summary(tmp_path, capsys):
    assert main(["run", "tadpole_perturbation", "--out", str(tmp_path), "--json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["passed"] is True
    assert summary["checks"] and all(c["pass"] for c in summary["checks"])


def test_audit_command(tmp_path, capsys):
    assert main(["audit", "tadpole_moment", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "assumption_I.2_resonances" in out
    assert (tmp_path / "audit" / "summary.json").exists()


def test_seed_override(tmp_path, capsys):
    assert main(["run", "tadpole_lie", "--out", str(tmp_path / "s1"), "--seed", "3"]) == 0
    assert main(["run", "tadpole_lie", "--out", str(tmp_path / "s2"), "--seed", "3"]) == 0
    capsys.readouterr()
    assert (tmp_path / "s1" / "rotations.csv").read_bytes() == \
        (tmp_path / "s2" / "rotations.csv").read_bytes()


@pytest.mark.skipif(shutil.which("qgc") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["qgc", "list", "--json"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and json.loads(proc.stdout)
    proc = subprocess.run([sys.executable, "-m", "qgc.cli", "list"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 0
