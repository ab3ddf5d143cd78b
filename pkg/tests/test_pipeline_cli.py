import json
import shutil

import pytest

from cubeverse.cli import main, parse_size
from cubeverse.fixtures import data_path, write_all
from cubeverse.pipeline import ConfigError, run_pipeline


def write_config(tmp_path, analyses, **extra):
    cfg = {
        "inputs": {"records": "package:records.tsv"},
        "events": ["3", "4", "5", "6", "7", "3b", "4b", "5b"],
        "analyses": analyses,
        "seeds": {"changepoint": 7},
        "alpha": 0.05,
        "output_dir": "out",
    }
    cfg.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def files(root):
    return sorted(str(p.relative_to(root)) for p in root.rglob("*") if p.is_file())


def test_shells_only(tmp_path):
    path = write_config(tmp_path, [{"task": "shells", "n": 3, "max_depth": 3}])
    manifest = run_pipeline(path)
    assert manifest["ok"]
    assert files(tmp_path / "out") == ["fig2/shells_n3.csv", "manifest.json"]


def test_failing_task_reported_and_others_run(tmp_path):
    path = write_config(tmp_path, [{"task": "shells", "n": 9}, {"task": "network"}])
    manifest = run_pipeline(path)
    assert not manifest["ok"]
    status = {t["task"]: t["status"] for t in manifest["tasks"]}
    assert status == {"shells": "error", "network": "ok"}
    assert "fig7/graph.dot" in manifest["files"]


def test_unknown_task_rejected(tmp_path):
    with pytest.raises(ConfigError):
        run_pipeline(write_config(tmp_path, ["plot"]))


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError):
        run_pipeline(write_config(tmp_path, ["fit"], colour="red"))


def test_series_input(tmp_path):
    write_all(tmp_path)
    path = write_config(tmp_path, ["fit", "collapse"], inputs={"series": "sighted.csv"}, events=None)
    manifest = run_pipeline(path)
    assert manifest["ok"]
    fits = json.loads((tmp_path / "out/fig3/fits.json").read_text())
    assert set(fits) == {"3", "4", "5", "6", "7"}


def test_cli_run_exit_codes(tmp_path):
    good = write_config(tmp_path, [{"task": "walk", "p_f": [0.75], "trials": 500}])
    assert main(["run", str(good)]) == 0
    bad = write_config(tmp_path, [{"task": "shells", "n": 9}])
    assert main(["run", str(bad)]) == 1


def test_cli_commands(tmp_path, capsys):
    assert main(["cube", "--moves", "R U R' U'"]) == 0
    assert capsys.readouterr().out.strip() == "UULUUFUUFRRUBRRURRFFDFFUFFFDDRDDDDDDBLLLLLLLLBRRBBBBBB"

    assert main(["shells", "--n", "3", "--depth", "2", "-o", str(tmp_path / "s.csv")]) == 0
    assert (tmp_path / "s.csv").read_text().splitlines()[2].startswith("1,18,19,")

    assert main(["walk", "--pf", "1", "--r0", "7", "--trials", "50", "-o", str(tmp_path / "w.json")]) == 0
    assert json.loads((tmp_path / "w.json").read_text())["mean_steps"] == 7

    series = tmp_path / "bf.csv"
    assert main(["extract", "--records", str(data_path("records.tsv")), "--events", "3b", "4b",
                 "-o", str(series)]) == 0
    assert main(["fit", "--input", str(series), "--family", "progress_eq2", "--head-years", "8",
                 "-o", str(tmp_path / "fit.json")]) == 0
    assert main(["learning-curve", "--from", str(tmp_path / "fit.json"), "--horizon", "12",
                 "-o", str(tmp_path / "lc.json")]) == 0
    lc = json.loads((tmp_path / "lc.json").read_text())
    assert set(lc) == {"3b", "4b"} and len(lc["3b"]["samples"]) == 12

    d = tmp_path / "series"
    d.mkdir()
    shutil.copy(data_path("sighted.csv"), d / "sighted.csv")
    assert main(["collapse", "--input", str(d), "-o", str(tmp_path / "c.csv")]) == 0
    assert main(["fit", "--input", str(d), "-o", str(tmp_path / "all.json")]) == 0
    report = json.loads((tmp_path / "all.json").read_text())
    assert set(report["3"]["fits"]) == {"exponential", "linear", "power", "progress_eq2"}

    (tmp_path / "r.csv").write_text("T,residual\n" + "".join(f"{t},{(-1) ** t * t}\n" for t in range(1, 13)))
    assert main(["changepoint", "--input", str(tmp_path / "r.csv"), "--perms", "199",
                 "-o", str(tmp_path / "cp.json")]) == 0
    assert "split_T" in json.loads((tmp_path / "cp.json").read_text())

    capsys.readouterr()
    assert main(["network", "--records", str(data_path("records.tsv")), "--emit", str(tmp_path / "g.dot")]) == 0
    assert json.loads(capsys.readouterr().out)["communities"] == [["3", "4", "5", "6", "7"], ["3b", "4b", "5b"]]


def test_cli_reports_errors(tmp_path, capsys):
    assert main(["cube", "--moves", "Q"]) == 2
    assert "error" in capsys.readouterr().err


def test_parse_size():
    assert parse_size("8GiB") == 8 << 30
    assert parse_size("512MB") == 512 * 10**6
