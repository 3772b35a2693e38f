import json

import jsonschema
import numpy as np
import pytest

from bergbal.config import COMMANDS, ConfigError, parse_config
from bergbal.report import (
    ReportWriteError, _plain, build_report, load_report, load_schema,
    validate_report, write_report,
)

FS = {"type": "fubini-study"}
BUMP = {"type": "gaussian-bump", "amplitude": 0.1, "width": 1.0, "center": 0.0}

MINIMAL = {
    "balance": {"command": "balance", "potential": FS, "levels": [4]},
    "tbalance": {"command": "tbalance", "potential": BUMP, "levels": [8]},
    "newton": {"command": "newton", "potential": BUMP, "levels": [8],
               "mode": "quasi"},
    "family": {"command": "family", "potential": BUMP, "levels": [5, 10]},
    "expand": {"command": "expand", "potential": BUMP, "levels": [10, 20, 40]},
    "beta": {"command": "beta", "potential": BUMP, "levels": [10, 20]},
    "fourier": {"command": "fourier",
                "sample": {"cos": [1.0, 1.0], "sin": [0.0, 0.3]},
                "profiles": [0.15, 0.3], "m_max": 10},
    "probe": {"command": "probe", "seeds": [BUMP, FS], "levels": [8]},
}


def test_minimal_configs_parse():
    for command in COMMANDS:
        cfg = parse_config(MINIMAL[command])
        assert cfg.command == command
        assert cfg.warnings == []


def test_yaml_text_and_echo():
    cfg = parse_config("""
command: newton
potential: {type: fubini-study}
levels: [6]
mode: quasi
solver: {tolerance: 1.0e-10, damping: 0.5}
""")
    assert cfg.solver.tolerance == 1e-10
    assert cfg.solver.damping == 0.5
    echo = cfg.echo()
    assert echo["mode"] == "quasi"
    assert echo["solver"]["recentering"] == "moment-center"
    assert "m_max" not in echo        # fourier-only field


def test_malformed_yaml():
    with pytest.raises(ConfigError, match="not well-formed"):
        parse_config("command: [unclosed")


def test_top_level_must_be_mapping():
    with pytest.raises(ConfigError, match="top level"):
        parse_config("- just\n- a list\n")


def test_unknown_command():
    with pytest.raises(ConfigError, match="command: expected one of"):
        parse_config({"command": "solve"})


def test_unknown_key_warning_vs_strict():
    doc = dict(MINIMAL["balance"], typo=True)
    cfg = parse_config(doc)
    assert any("unknown key" in w for w in cfg.warnings)
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(doc, strict=True)


def test_errors_are_collected_with_paths():
    doc = {
        "command": "newton",
        "potential": {"type": "gaussian-bump", "width": -1.0},
        "levels": [4, "eight", 500],
        "solver": {"damping": 2.0},
        "mode": "bisect",
    }
    with pytest.raises(ConfigError) as exc:
        parse_config(doc)
    text = "\n".join(exc.value.errors)
    assert "potential.amplitude" in text
    assert "potential.width: must be positive" in text
    assert "levels[1]" in text
    assert "levels[2]" in text
    assert "solver: damping" in text
    assert "mode:" in text
    assert len(exc.value.errors) >= 6


def test_potential_validation():
    with pytest.raises(ConfigError, match="unexpected keys for fubini-study"):
        parse_config({"command": "balance", "levels": [4],
                      "potential": {"type": "fubini-study", "width": 1}})
    with pytest.raises(ConfigError, match="unknown potential type"):
        parse_config({"command": "balance", "levels": [4],
                      "potential": {"type": "round"}})
    with pytest.raises(ConfigError, match="potential.type: required"):
        parse_config({"command": "balance", "levels": [4], "potential": {}})
    with pytest.raises(ConfigError, match="tabulated"):
        parse_config({"command": "balance", "levels": [4],
                      "potential": {"type": "tabulated", "t": [0.0, 1.0]}})


def test_level_requirements():
    with pytest.raises(ConfigError, match="at least 3 levels"):
        parse_config({"command": "expand", "potential": FS, "levels": [5, 10]})
    with pytest.raises(ConfigError, match="strictly increasing"):
        parse_config({"command": "family", "potential": FS, "levels": [10, 5]})
    with pytest.raises(ConfigError, match="levels: required"):
        parse_config({"command": "balance", "potential": FS})


def test_fourier_validation():
    with pytest.raises(ConfigError, match="sample: required"):
        parse_config({"command": "fourier", "profiles": [0.1, 0.2]})
    with pytest.raises(ConfigError, match="profiles: expected a list"):
        parse_config({"command": "fourier", "profiles": [0.1],
                      "sample": {"cos": [1.0]}})
    with pytest.raises(ConfigError, match="m_max"):
        parse_config({"command": "fourier", "profiles": [0.1, 0.2],
                      "sample": {"cos": [1.0]}, "m_max": -3})


def test_probe_validation():
    with pytest.raises(ConfigError, match="at least two potential"):
        parse_config({"command": "probe", "seeds": [BUMP], "levels": [8]})
    with pytest.raises(ConfigError, match="seeds\\[1\\]"):
        parse_config({"command": "probe", "levels": [8],
                      "seeds": [BUMP, {"type": "blob"}]})


def test_quadrature_and_output_validation():
    with pytest.raises(ConfigError, match="quadrature.shape: unknown"):
        parse_config(dict(MINIMAL["balance"], quadrature={"shape": 1}))
    with pytest.raises(ConfigError, match="output.tables: expected true"):
        parse_config(dict(MINIMAL["balance"], output={"tables": "yes"}))
    cfg = parse_config(dict(MINIMAL["balance"],
                            quadrature={"window": 24, "grid": 768},
                            output={"directory": "/tmp/x", "tables": False}))
    assert cfg.quadrature == {"window": 24, "grid": 768}
    assert cfg.output["tables"] is False


def test_weight_fields():
    cfg = parse_config(dict(MINIMAL["tbalance"], freeze_weight=0))
    assert cfg.freeze_weight == 0.0
    with pytest.raises(ConfigError, match="freeze_weight"):
        parse_config(dict(MINIMAL["tbalance"], freeze_weight="none"))
    with pytest.raises(ConfigError, match="weight: expected a number"):
        parse_config(dict(MINIMAL["balance"], weight="heavy"))


def test_plain_conversion():
    out = _plain({"a": np.float64(1.5), "b": np.arange(3), "c": 1 + 2j,
                  "d": np.bool_(True), "e": [np.int32(7)]})
    assert out == {"a": 1.5, "b": [0, 1, 2], "c": {"re": 1.0, "im": 2.0},
                   "d": True, "e": [7]}
    assert json.dumps(out)


def test_build_and_validate():
    rep = build_report({"command": "balance"})
    assert rep["report_version"] == 1
    assert rep["config"] == {"command": "balance"}
    assert "numpy" in rep["versions"]
    validate_report(rep)


def test_schema_rejections():
    schema = load_schema()
    rep = build_report({"command": "balance"})
    bad = dict(rep, verdicts={"ok": "yes"})
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, schema)
    bad = dict(rep, error={"type": "X"})   # message missing
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, schema)
    bad = dict(rep)
    del bad["conventions"]
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, schema)
    bad = dict(rep, tables=[{"name": "bad name!", "columns": {}}])
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(bad, schema)


def test_write_and_load_round_trip(tmp_path):
    rep = build_report({"command": "balance"})
    rep["outputs"] = {"levels": {"4": {"converged": True,
                                       "final_residual": 1.25e-13}}}
    rep["verdicts"] = {"m4_converged": True}
    rep["tables"] = [{"name": "history_m4",
                      "columns": {"iteration": [0, 1],
                                  "residual": [0.25, 1.0 / 3.0]}}]
    paths = write_report(rep, str(tmp_path))
    assert [p.split("/")[-1] for p in paths] == ["report.json", "history_m4.csv"]
    loaded = load_report(paths[0])
    assert loaded["outputs"]["levels"]["4"]["final_residual"] == 1.25e-13
    assert loaded["tables"][0]["columns"]["residual"][1] == 1.0 / 3.0
    csv = open(paths[1]).read().splitlines()
    assert csv[0] == "iteration,residual"
    assert csv[2].startswith("1,0.33333333333333331")


def test_write_rejects_invalid(tmp_path):
    rep = build_report({"command": "balance"})
    rep["verdicts"] = {"ok": "yes"}
    with pytest.raises(jsonschema.ValidationError):
        write_report(rep, str(tmp_path))


def test_write_error(tmp_path):
    blocker = tmp_path / "blocked"
    blocker.write_text("a file, not a directory")
    rep = build_report({"command": "balance"})
    with pytest.raises(ReportWriteError, match="cannot write"):
        write_report(rep, str(blocker))
