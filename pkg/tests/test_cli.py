import json
import subprocess
import sys

import pytest

from anon_games.cli import EXIT_IO, EXIT_OK, EXIT_PRECONDITION, main
from anon_games.config import (SCENARIOS, ConfigError, bundled_config_names, build_game, load_config,
                               parse_config, read_json)


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj), encoding="utf-8")
    return str(p)


def test_list(capsys):
    assert main(["list"]) == EXIT_OK
    out = capsys.readouterr().out
    assert len(SCENARIOS) == 5
    for name in SCENARIOS:
        assert name in out


@pytest.mark.parametrize("name", bundled_config_names())
def test_validate_bundled(name, capsys):
    assert main(["validate", name]) == EXIT_OK
    assert capsys.readouterr().out.startswith("ok:")


def test_malformed_json(tmp_path, capsys):
    path = write(tmp_path, '{"game": "pigou",\n "experiment": }')
    assert main(["validate", path]) == EXIT_IO
    err = capsys.readouterr().err
    assert "line 2" in err and "column" in err
    with pytest.raises(ConfigError):
        read_json(path)


def test_missing_config(capsys):
    assert main(["validate", "no_such_config"]) == EXIT_IO


@pytest.mark.parametrize("patch,needle", [
    ({"params": {"n_grid": [100, 10]}}, "n_grid"),
    ({"params": {"n_grid": [0, 10]}}, "n_grid"),
    ({"params": {"budget": 0}}, "budget"),
    ({"params": {"epsilon": -1}}, "epsilon"),
    ({"seed": -3}, "seed"),
    ({"experiment": "guess"}, "experiment"),
    ({"game": "atlantis"}, "unknown scenario"),
    ({"game": {"network": "missing.json"}}, "does not exist"),
    ({"game": {"entry": "auction"}}, "variant"),
    ({"lambda0": [0.5, 0.6]}, "lambda0"),
])
def test_invariant_failures_are_named(tmp_path, capsys, patch, needle):
    cfg = {"game": "entry-standard", "q": 0.5, "experiment": "lln",
           "params": {"n_grid": [10, 100], "budget": 10}}
    for k, v in patch.items():
        if k == "params":
            cfg["params"].update(v)
        else:
            cfg[k] = v
    if "lambda0" in patch:
        del cfg["q"]
    assert main(["validate", write(tmp_path, cfg)]) == EXIT_IO
    assert needle in capsys.readouterr().err


def test_event_validation():
    base = {"game": "pigou", "experiment": "rate-function",
            "params": {"event": {"kind": "banana", "threshold": 1}}}
    with pytest.raises(ConfigError):
        parse_config(base)
    base["params"]["event"] = {"kind": "element_load", "element": "e1", "relation": ">=", "threshold": 0.5}
    assert parse_config(base).experiment == "rate-function"


def test_inline_game():
    g = build_game({"inline": {"num_types": 1, "num_actions": 2, "base": [[1.0, 0.0]],
                               "interaction": [[[[0, 0]], [[0, 2.0]]]]}})
    assert g.costs([[0.5, 0.5]]).tolist() == [[1.0, 1.0]]
    with pytest.raises(ConfigError):
        build_game({"inline": {"num_types": 1, "num_actions": 2, "base": [[1.0]]}})
    with pytest.raises(ConfigError):
        build_game({})


def test_lambda0_sources():
    assert load_config("entry_decay").lambda0.tolist() == pytest.approx([1 / 3, 2 / 3])
    assert load_config("grid3x3_poa_tail").lambda0.tolist() == [0.85, 0.15]


def test_run_pigou_poa(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", "pigou_poa", "--output", str(out)]) == EXIT_OK
    result = json.loads((out / "result.json").read_text())
    assert result["experiment"] == "poa"
    assert result["result"]["poa"] == pytest.approx(4 / 3, abs=1e-6)
    assert [f["poa"] for f in result["result"]["finite"]] == [4 / 3, 4 / 3]
    assert (out / "poa.csv").read_text().splitlines()[0].count(",") >= 1


def test_run_writes_tables_and_plots(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "entry_decay", "--output", str(out)]) == EXIT_OK
    csvs = list(out.glob("*.csv")) + list((out / "plotdata").glob("*.csv"))
    assert csvs
    for p in csvs:
        text = p.read_bytes()
        assert b"\r\n" not in text
        assert len(text.decode("utf-8").splitlines()) >= 2


def test_precondition_exit_code(tmp_path, capsys):
    cfg = {"game": "entry-participation", "q": 0.5, "experiment": "decay-slope",
           "params": {"event": {"kind": "action_share", "action": 1, "relation": "<=", "threshold": 0.5},
                      "n_grid": [10]}}
    assert main(["run", write(tmp_path, cfg), "--output", str(tmp_path / "x")]) == EXIT_PRECONDITION
    assert "precondition" in capsys.readouterr().err
    free = {"game": {"inline": {"num_types": 1, "num_actions": 2, "base": [[0.0, 0.0]]}},
            "lambda0": [1.0], "experiment": "poa", "params": {}}
    assert main(["run", write(tmp_path, free, "free.json"), "--output", str(tmp_path / "y")]) \
        == EXIT_PRECONDITION


def test_repeat_runs_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "pigou_nash_set", "--output", str(a)])
    main(["run", "pigou_nash_set", "--output", str(b)])
    assert (a / "result.json").read_bytes() == (b / "result.json").read_bytes()


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "anon_games.cli", "--version"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and "anon-games" in proc.stdout
