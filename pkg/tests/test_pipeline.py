import json

import numpy as np
import pandas as pd
import pytest

from jacobi_anosov.config_model import OutputConfig, RunConfig
from jacobi_anosov.errors import DataError
from jacobi_anosov.pipeline.main_functions import ensure_directories
from jacobi_anosov.pipeline.reporting import write_csv, write_json
from jacobi_anosov.pipeline.staging import COMMANDS, run_pipeline
from jacobi_anosov.schema_utils import ensure_columns, load_schema, to_builtin, validate_payload


def test_ensure_directories_creates_nested(tmp_path):
    target = tmp_path / "a" / "b" / "c"
    ensure_directories([target, target])
    assert target.is_dir()


def test_ensure_columns_selects_in_order():
    df = pd.DataFrame({"b": [1], "a": [2], "extra": [3]})
    assert list(ensure_columns(df, ["a", "b"]).columns) == ["a", "b"]
    with pytest.raises(DataError) as info:
        ensure_columns(df, ["a", "missing"])
    assert "missing" in info.value.message


def test_to_builtin():
    payload = to_builtin({"x": np.float64(1.5), "n": np.int64(3), "flag": np.bool_(True), "inf": float("inf"), "arr": np.array([1.0, np.nan])})
    assert payload == {"x": 1.5, "n": 3, "flag": True, "inf": None, "arr": [1.0, None]}
    assert type(payload["n"]) is int
    json.dumps(payload, allow_nan=False)


def test_validate_payload_rejects_bad_reports():
    schema = load_schema("bound_report.schema.json")
    assert schema["type"] == "object"
    with pytest.raises(DataError):
        validate_payload({"schema_version": "1.0"}, "bound_report.schema.json")


def test_writers(tmp_path):
    path = write_csv(pd.DataFrame({"phi": [1.0, 0.5], "s": [0.0, 1.0]}), tmp_path / "phi.csv")
    assert path.read_text(encoding="utf-8") == "s,phi\n0,1\n1,0.5\n"

    written = write_json(RunConfig().to_dict(), tmp_path / "config_used.json")
    assert json.loads(written.read_text(encoding="utf-8"))["seed"] == 1


def test_commands_are_unique():
    names = [name for name, _ in COMMANDS]
    assert len(names) == len(set(names))
    assert "check-anosov" in names


def test_unknown_command(tmp_path):
    config = RunConfig(output=OutputConfig(out_dir=str(tmp_path)))
    with pytest.raises(KeyError):
        run_pipeline("frobnicate", {"config": config})


def test_pipeline_context(tmp_path):
    config = RunConfig(window=[-2.0, 2.0], output=OutputConfig(out_dir=str(tmp_path), formats=["json"]))
    context = run_pipeline("stable", {"config": config})
    assert context["command"] == "stable"
    assert context["exit_code"] == 0
    assert {p.name for p in context["written"]} == {"stable_data.json"}
    assert context["stable"].gap > 0
