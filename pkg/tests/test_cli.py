import csv
import json

import pytest

from conftest import DATA
from gridrisk.cli import main

TOY = str(DATA / "toy_outages.csv")
TOY_CFG = str(DATA / "toy_config.txt")
YEAR_S = 365.25 * 86400


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_toy(capsys, tmp_path):
    code, out, _ = run(capsys, "validate", "--outages", TOY, "--out-dir", str(tmp_path))
    assert code == 0
    rep = json.loads((tmp_path / "validate.json").read_text())
    assert rep["schema"] == 1
    assert (rep["total_rows"], rep["scheduled_removed"], rep["short_removed"], rep["unscheduled"]) == (6, 1, 1, 4)
    assert rep["per_station"] == {"TOY": 4}
    assert "unscheduled       4" in out


def test_events_toy(capsys, tmp_path):
    assert run(capsys, "events", "--outages", TOY, "--out-dir", str(tmp_path))[0] == 0
    with open(tmp_path / "events.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["start"], r["end"], r["n_outages"], float(r["area_cust_hours"])) for r in rows] == [
        ("2020-03-01T00:00:00Z", "2020-03-01T03:00:00Z", "2", 30.0),
        ("2020-03-01T05:00:00Z", "2020-03-01T06:00:00Z", "1", 100.0),
        ("2020-03-01T10:00:00Z", "2020-03-01T10:30:00Z", "1", 1.0),
    ]


def test_events_to_stdout(capsys):
    code, out, _ = run(capsys, "events", "--outages", TOY)
    assert code == 0 and out.splitlines()[0] == "event_id,start,end,n_outages,area_cust_hours"


def test_metrics_toy_hand_values(capsys, tmp_path):
    code, out, _ = run(capsys, "--config", TOY_CFG, "metrics", "--outages", TOY, "--out-dir", str(tmp_path))
    assert code == 0
    doc = json.loads((tmp_path / "metrics.json").read_text())
    m = doc["metrics"]
    years = 10.5 * 3600 / YEAR_S
    assert m["n_events"] == 3
    assert m["c_large"] == pytest.approx(11106.0, rel=1e-15)
    assert m["p_large"] == 1 / 3
    assert m["r_event"] == 3 / years
    assert m["f_large"] == m["p_large"] * m["r_event"]
    assert m["alpha"] is None and doc["tail_fit"] is None
    with open(tmp_path / "exceedance.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["cost_usd", "exceedance_prob"]
    assert [float(p) for _, p in rows[1:]] == [2 / 3, 1 / 3]
    assert (tmp_path / "exceedance.gp").exists() and (tmp_path / "c_large.csv").exists()
    assert "p_large" in out


def test_metrics_output_is_byte_identical(capsys, tmp_path):
    for d in ("a", "b"):
        assert run(capsys, "--config", TOY_CFG, "metrics", "--outages", TOY, "--out-dir", str(tmp_path / d))[0] == 0
    for name in ("metrics.json", "exceedance.csv", "tail_fit.csv", "c_large.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_flags_after_subcommand(capsys, tmp_path):
    assert run(capsys, "metrics", "--config", TOY_CFG, "--outages", TOY, "--out-dir", str(tmp_path))[0] == 0
    assert json.loads((tmp_path / "metrics.json").read_text())["metrics"]["p_large"] == 1 / 3


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--preset", "paper-scale", "--seed", "2024", "--out-dir", str(d)]) == 0
    return d


def _inputs(d):
    return ["--outages", str(d / "outages.csv"), "--weather", str(d / "weather.csv"),
            "--stations", str(d / "stations.csv")]


def test_synth_pipeline_metrics(capsys, synth_dir, tmp_path):
    code, _, err = run(capsys, "metrics", *_inputs(synth_dir), "--out-dir", str(tmp_path))
    assert code == 0
    doc = json.loads((tmp_path / "metrics.json").read_text())
    assert abs(doc["inputs"]["n_outages"] / 12700 - 1) <= 0.15
    assert 0.6 <= doc["metrics"]["alpha"] <= 1.0
    assert doc["metrics"]["mean_is_finite"] is False
    assert "infinite mean" in err
    assert "infinite mean" in doc["warnings"][0]


def test_synth_validate_station_filter(capsys, synth_dir):
    code, out, _ = run(capsys, "validate", *_inputs(synth_dir), "--station", "AREA1")
    assert code == 0 and "station AREA1" in out
    code, _, err = run(capsys, "validate", *_inputs(synth_dir), "--station", "NOPE")
    assert code == 2 and "no events" in err


def test_rerun_restore_table(capsys, synth_dir, tmp_path):
    code, out, _ = run(capsys, "rerun", "restore", *_inputs(synth_dir), "--speedup", "0.1", "--out-dir", str(tmp_path))
    assert code == 0
    doc = json.loads((tmp_path / "rerun_restore.json").read_text())
    assert [r["metric"] for r in doc["table"]] == ["alpha", "p_large", "f_large"]
    assert "r_event" not in out
    assert doc["info"]["clamped_outages"] > 0


def test_rerun_harden_cli(capsys, synth_dir, tmp_path):
    per = tmp_path / "samples.csv"
    args = ["rerun", "harden", *_inputs(synth_dir), "--samples", "5", "--seed", "9", "--per-sample", str(per)]
    code, out, _ = run(capsys, *args, "--out-dir", str(tmp_path / "a"))
    assert code == 0 and "% diff." in out
    assert run(capsys, *args, "--out-dir", str(tmp_path / "b"))[0] == 0
    a = (tmp_path / "a" / "rerun_harden.json").read_bytes()
    assert a == (tmp_path / "b" / "rerun_harden.json").read_bytes()
    doc = json.loads(a)
    assert [r["metric"] for r in doc["table"]] == ["alpha", "p_large", "r_event", "f_large"]
    assert all("after_sd" in r for r in doc["table"])
    with open(per, newline="") as fh:
        assert len(list(csv.DictReader(fh))) == 5


def test_usage_errors_exit_1(capsys, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["metrics", "--bogus"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1
    assert run(capsys, "metrics", "--outages", str(tmp_path / "missing.csv"))[0] == 1
    assert run(capsys, "metrics")[0] == 1
    bad_cfg = tmp_path / "c.txt"
    bad_cfg.write_text("nonsense = 3\n")
    assert run(capsys, "--config", str(bad_cfg), "metrics", "--outages", TOY)[0] == 1


def test_data_quality_exit_2(capsys, tmp_path):
    p = tmp_path / "o.csv"
    p.write_text("id,start,restore,customers,cause,scheduled,station\n"
                 "a,2020-01-01T00:00:00Z,2020-01-01T01:00:00Z,3,x,0,S\n"
                 "b,garbage,2020-01-01T01:00:00Z,3,x,0,S\n")
    code, _, err = run(capsys, "metrics", "--outages", str(p))
    assert code == 2 and "rejected" in err
    q = tmp_path / "empty.csv"
    q.write_text("id,start,restore,customers,cause,scheduled,station\n"
                 "a,2020-01-01T00:00:00Z,2020-01-01T01:00:00Z,3,x,1,S\n")
    code, _, err = run(capsys, "metrics", "--outages", str(q))
    assert code == 2 and "no events" in err


def test_stdout_is_json_without_out_dir(capsys):
    code, out, err = run(capsys, "--config", TOY_CFG, "metrics", "--outages", TOY)
    assert code == 0
    assert json.loads(out)["metrics"]["n_events"] == 3
    assert "p_large" in err
