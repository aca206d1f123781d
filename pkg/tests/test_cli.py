import csv
import io
import json
import subprocess
import sys

import pytest

from abl_lab import cli
from abl_lab.config import ConfigError, ScenarioConfig, bundled_scenarios, canonical_json, digest, load

BUNDLED = ["cotenable-pass.json", "rare-postselect.json", "spin-45.json", "threebox.json"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_bundled_scenarios_present():
    assert bundled_scenarios() == BUNDLED


@pytest.mark.parametrize("name", BUNDLED)
def test_round_trip(name):
    cfg = load(name)
    again = ScenarioConfig.from_json(cfg.to_json())
    assert canonical_json(again.to_dict()) == canonical_json(cfg.to_dict())
    assert again.digest == cfg.digest


def test_digest_is_canonical():
    assert digest({"b": 1, "a": [1, 2]}) == digest({"a": [1, 2], "b": 1})
    assert len(digest({})) == 16
    # BLAKE2b-64 of '{}' is stable across platforms
    import hashlib
    assert digest({}) == hashlib.blake2b(b"{}", digest_size=8).hexdigest()


def test_config_errors_are_line_anchored():
    text = '{\n  "dim": 2,\n  "pre": {"bloch": {"theta": 0}},\n  "post": {"bloch": {"theta": 90}},\n' \
           '  "observables": [{"name": "c", "spin": {"theta": 45}}],\n  "sequence": ["nope"]\n}\n'
    with pytest.raises(ConfigError) as e:
        ScenarioConfig.from_json(text, "x.json")
    assert e.value.line == 6
    assert "x.json:6" in str(e.value)
    with pytest.raises(ConfigError) as e:
        ScenarioConfig.from_json('{"dim": 2,\n "pre": }', "y.json")
    assert e.value.line == 2


@pytest.mark.parametrize("patch", [
    {"dim": 1}, {"dim": True}, {"trials": "many"}, {"seed": -3}, {"extra": 1},
    {"pre": {"amplitudes": [[1, 0], [1, 0]]}},
    {"observables": [{"name": "c"}]},
    {"observables": [{"name": "c", "basis": [5]}]},
    {"final": "missing"},
])
def test_config_validation(patch):
    raw = json.loads(load("spin-45").to_json())
    raw.update(patch)
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(raw)


def test_explicit_projectors_and_normalize():
    raw = {
        "dim": 2,
        "pre": {"amplitudes": [[3, 0], [0, 4]], "normalize": True},
        "post": {"amplitudes": [1, 0]},
        "observables": [{"name": "m", "projectors": [
            {"label": "a", "eigenvalue": 2, "matrix": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]},
            {"label": "b", "eigenvalue": -2, "matrix": [[[0, 0], [0, 0]], [[0, 0], [1, 0]]]}]}],
    }
    cfg = ScenarioConfig.from_dict(raw)
    assert cfg.ctx.pre.amplitudes[1] == pytest.approx(0.8j)
    assert cfg.observables["m"].outcome("b").eigenvalue == -2
    assert cfg.final.labels == ("yes", "no")


def test_abl_spin45(capsys):
    code, out, _ = run(capsys, "abl", "--config", "spin-45.json")
    assert code == 0
    assert "0.971405" in out and "0.028595" in out
    code, out, _ = run(capsys, "abl", "--config", "spin-45.json", "--json")
    d = json.loads(out)
    assert d["observables"]["c"]["abl"]["up"] == pytest.approx(0.9714045207910317, abs=1e-12)
    assert d["manifest"]["config_digest"] == load("spin-45").digest


def test_abl_threebox(capsys):
    code, out, _ = run(capsys, "abl", "--config", "threebox.json", "--json")
    assert code == 0
    d = json.loads(out)["observables"]
    assert d["box1"]["abl"]["yes"] == pytest.approx(1.0, abs=1e-12)
    assert d["box2"]["abl"]["yes"] == pytest.approx(1.0, abs=1e-12)


def test_malformed_json_exit_2(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"dim": 2,')
    code, _, err = run(capsys, "abl", "--config", str(p))
    assert code == 2
    assert "bad.json:1" in err


def test_missing_config_exit_2(capsys):
    assert run(capsys, "abl")[0] == 2
    assert run(capsys, "abl", "--config", "nowhere.json")[0] == 2


def test_unreachable_exit_3(capsys, tmp_path):
    p = tmp_path / "zero.json"
    p.write_text(json.dumps({"dim": 2, "pre": {"bloch": {"theta": 0}}, "post": {"bloch": {"theta": 180}},
                             "observables": [{"name": "z", "spin": {"theta": 0}}], "sequence": ["z"]}))
    code, _, err = run(capsys, "abl", "--config", str(p))
    assert code == 3
    assert "post-selection unreachable given this measurement" in err
    assert run(capsys, "sequence", "--config", str(p))[0] == 3


def test_sequence(capsys):
    code, out, _ = run(capsys, "sequence", "--config", "spin-45", "--json")
    assert code == 0
    assert json.loads(out)["distribution"]["up"] == pytest.approx(0.9714045207910317)


def test_simulate_fixture(capsys, tmp_path):
    out_path = tmp_path / "rep.json"
    code, out, _ = run(capsys, "simulate", "--config", "spin-45.json", "--seed", "42", "--out", str(out_path))
    assert code == 0
    rep = json.loads(out_path.read_text())
    # frozen after the first verified run (kernel checked bit-exact against the Python reference)
    assert rep == {
        "trials": 1000000, "seed": 42, "chunk_size": 65536,
        "subensemble_counts": {"up": 750248, "down": 249752},
        "joint_counts": {"up→up": 728832, "up→down": 124809, "down→up": 21416, "down→down": 124943},
    }
    manifest = json.loads(out_path.with_suffix(".manifest.json").read_text())
    assert manifest["seed"] == 42 and manifest["command"] == "simulate"
    assert "WARN" not in out


def test_simulate_trials_zero_exit_2(capsys):
    assert run(capsys, "simulate", "--config", "spin-45.json", "--trials", "0")[0] == 2


def test_simulate_rare_postselection_flags(capsys):
    code, out, _ = run(capsys, "simulate", "--config", "rare-postselect.json")
    assert code == 0
    assert "low-count" in out


def test_seed_precedence(capsys, monkeypatch):
    monkeypatch.setenv("ABL_LAB_SEED", "5")
    _, out, _ = run(capsys, "simulate", "--config", "spin-45", "--trials", "10", "--json")
    assert json.loads(out)["report"]["seed"] == 42
    _, out, _ = run(capsys, "simulate", "--config", "spin-45", "--trials", "10", "--seed", "9", "--json")
    assert json.loads(out)["report"]["seed"] == 9
    raw = json.loads(load("spin-45").to_json())
    del raw["seed"]
    cfg = ScenarioConfig.from_dict(raw)
    assert cli._resolve_seed(cli.build_parser().parse_args(["simulate"]), cfg) == 5
    monkeypatch.delenv("ABL_LAB_SEED")
    assert cli._resolve_seed(cli.build_parser().parse_args(["simulate"]), cfg) == 0


def test_warn_on_large_z(capsys, monkeypatch):
    from abl_lab import simulate
    real = cli.frequency_vs_abl

    def skewed(report, ctx, seq):
        return [simulate.ComparisonRow(r.outcomes, r.count, r.subensemble, r.frequency, r.abl, r.stderr, 9.0, r.flag)
                for r in real(report, ctx, seq)]

    monkeypatch.setattr(cli, "frequency_vs_abl", skewed)
    code, out, _ = run(capsys, "simulate", "--config", "spin-45", "--trials", "100")
    assert code == 0
    assert "WARN" in out


def _scan_rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_scan_steps_2(capsys):
    code, out, err = run(capsys, "scan", "--steps", "2")
    assert code == 0
    rows = _scan_rows(out)
    assert rows[0] == cli.SCAN_HEADER
    assert len(rows) == 5
    assert max(abs(float(r[4])) for r in rows[1:]) < 1e-12
    assert err.startswith("# cells=4")


def test_scan_steps_16(capsys, tmp_path):
    p = tmp_path / "scan.csv"
    code, out, _ = run(capsys, "scan", "--steps", "16", "--out", str(p))
    assert code == 0
    rows = _scan_rows(p.read_text())
    assert len(rows) == 1 + 256
    assert out.startswith("# cells=256")
    # formatting: 12 significant digits for angles
    assert rows[1 + 16 * 8 + 4][:2] == [f"{3.141592653589793 / 2:.12g}", f"{3.141592653589793 / 4:.12g}"]


def test_scan_steps_64(capsys):
    code, _, err = run(capsys, "scan", "--steps", "64")
    assert code == 0
    assert "max|discrepancy|=0.25" in err
    assert "theta_b=0.785398163397 theta_c=1.57079632679" in err


def test_scan_bad_steps(capsys):
    assert run(capsys, "scan", "--steps", "1")[0] == 2
    assert run(capsys, "scan", "--steps", "32", "--full-sphere")[0] == 2


def test_worlds(capsys):
    code, out, _ = run(capsys, "worlds", "--config", "spin-45.json")
    assert code == 0
    assert "0.728553" in out and "0.021447" in out and "unity" in out
    code, out, _ = run(capsys, "worlds", "--config", "spin-45.json", "--json")
    ws = json.loads(out)["world_sets"][0]
    assert [w["fixed_outcome_conditional"] for w in ws["worlds"]] == [1.0, 1.0]


def test_cotenable(capsys):
    code, out, _ = run(capsys, "cotenable", "--config", "cotenable-pass.json")
    assert code == 0 and "z: cotenability holds" in out
    code, out, _ = run(capsys, "cotenable", "--config", "spin-45.json", "--json")
    v = json.loads(out)["verdicts"]["c"]
    assert v["holds"] is False and v["witness"] is not None


def test_threebox(capsys):
    code, out, _ = run(capsys, "threebox", "--json")
    assert code == 0
    boxes = json.loads(out)["boxes"]
    assert boxes[0]["abl"]["yes"] == pytest.approx(1.0) and boxes[1]["abl"]["yes"] == pytest.approx(1.0)


def test_console_script():
    r = subprocess.run([sys.executable, "-m", "abl_lab.cli", "threebox"], capture_output=True, text=True)
    assert r.returncode == 0
    assert "box1" in r.stdout
