import csv
import json

import pytest
from click.testing import CliRunner

from farecheck.cli import main


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


@pytest.fixture(scope="module")
def city(tmp_path_factory):
    out = tmp_path_factory.mktemp("city")
    res = run("synth", "--seed", 3, "--stations", 8, "--routes", 3, "--days", 60, "--out", out)
    assert res.exit_code == 0, res.output
    return out


@pytest.fixture(scope="module")
def model(city, tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "m.json"
    res = run("train", "--network", city / "network.json", "--ridership", city / "ridership.csv",
              "--pretrain-epochs", 30, "--gan-epochs", 3, "--n-real", 30, "--out", path)
    assert res.exit_code == 0, res.output
    return path


def test_synth_writes_three_identical_files(city, tmp_path):
    res = run("synth", "--seed", 3, "--stations", 8, "--routes", 3, "--days", 60, "--out", tmp_path)
    assert res.exit_code == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["network.json", "ridership.csv", "sightings.csv"]
    for name in names:
        assert (tmp_path / name).read_bytes() == (city / name).read_bytes()


@pytest.mark.parametrize("args", [["--stations", 2], ["--routes", 0], ["--days", 0], ["--bogus", 1]])
def test_synth_usage_errors(tmp_path, args):
    res = run("synth", "--out", tmp_path, *args)
    assert res.exit_code == 2


def test_synth_spec_error_is_domain_error(tmp_path):
    res = run("synth", "--days", 3, "--out", tmp_path)
    assert res.exit_code == 1
    assert "SpecInvalid" in res.output


def test_analyze_outputs(city, tmp_path):
    res = run("analyze", "--network", city / "network.json", "--sightings", city / "sightings.csv",
              "--out", tmp_path)
    assert res.exit_code == 0, res.output
    report = json.loads((tmp_path / "analysis.json").read_text())
    for key in ("station_share", "presence_prob", "heatmap", "inside_rate", "predictability", "zone_share"):
        assert key in report
    assert set(report["predictability"]) >= {"order", "accuracy", "entropy_bits"}
    with open(tmp_path / "heatmap.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 9 and len(rows[0]) == 25
    with open(tmp_path / "station_share.csv") as fh:
        shares = [float(r["share"]) for r in csv.DictReader(fh)]
    assert sum(shares) == pytest.approx(1.0)
    assert (tmp_path / "zone_share.csv").exists()


def test_train_budget_too_small(city, tmp_path):
    res = run("train", "--network", city / "network.json", "--ridership", city / "ridership.csv",
              "--budget", 5, "--out", tmp_path / "m.json")
    assert res.exit_code == 1
    assert "BudgetTooSmall" in res.output
    assert not (tmp_path / "m.json").exists()


def test_missing_input_is_usage_error(tmp_path):
    res = run("analyze", "--network", tmp_path / "nope.json", "--sightings", tmp_path / "nope.csv")
    assert res.exit_code == 2


def test_malformed_input_is_domain_error(city, tmp_path):
    bad = tmp_path / "network.json"
    bad.write_text("{\"stations\": [], \"routes\": []}")
    res = run("analyze", "--network", bad, "--sightings", city / "sightings.csv", "--out", tmp_path)
    assert res.exit_code == 1
    assert "ParseError" in res.output


def test_generate_is_byte_identical(model, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (a, b):
        res = run("generate", "--model", model, "--n", 50, "--budget", 240, "--seed", 1, "--out", out)
        assert res.exit_code == 0, res.output
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 50 * 7


def test_generate_rejects_bad_model(tmp_path):
    m = tmp_path / "m.json"
    m.write_text("{}")
    res = run("generate", "--model", m, "--out", tmp_path / "t.jsonl")
    assert res.exit_code == 1 and "ParseError" in res.output


def test_evaluate_and_simulate(city, model, tmp_path):
    traces = tmp_path / "t.jsonl"
    assert run("generate", "--model", model, "--n", 4, "--periods", 10, "--out", traces).exit_code == 0
    report = tmp_path / "eval.json"
    res = run("evaluate", "--network", city / "network.json", "--ridership", city / "ridership.csv",
              "--sightings", city / "sightings.csv", "--traces", traces, "--out", report)
    assert res.exit_code == 0, res.output
    doc = json.loads(report.read_text())
    assert set(doc["ks"]) == {"d_stat", "n", "m", "significant_at_05"}
    for key in ("dispersion_rmse", "payoff_delta", "predictability_delta", "shares_before", "shares_after",
                "ks_ridership"):
        assert doc[key] is not None

    sim = tmp_path / "sim.json"
    res = run("simulate", "--network", city / "network.json", "--sightings", city / "sightings.csv",
              "--origin", "S01", "--dest", "S05", "--hour", 17, "--out", sim)
    assert res.exit_code == 0, res.output
    doc = json.loads(sim.read_text())
    assert doc["decision"] in ("Purchase", "Evade")
    assert doc["path"][0] == "S01" and doc["path"][-1] == "S05"
    assert len(doc["forecast"]["next"]) == 3

    res = run("simulate", "--network", city / "network.json", "--sightings", city / "sightings.csv",
              "--traces", traces, "--origin", "S01", "--dest", "S99", "--out", sim)
    assert res.exit_code == 1 and "UnknownStation" in res.output


def test_evaluate_single_period_is_domain_error(city, model, tmp_path):
    traces = tmp_path / "t.jsonl"
    assert run("generate", "--model", model, "--n", 4, "--periods", 1, "--out", traces).exit_code == 0
    res = run("evaluate", "--network", city / "network.json", "--ridership", city / "ridership.csv",
              "--sightings", city / "sightings.csv", "--traces", traces, "--out", tmp_path / "e.json")
    assert res.exit_code == 1
    assert "NeedTwoPeriods" in res.output


def test_inputs_are_not_modified(city, model, tmp_path):
    before = {p.name: p.read_bytes() for p in city.iterdir()}
    model_bytes = model.read_bytes()
    run("generate", "--model", model, "--out", tmp_path / "t.jsonl")
    run("analyze", "--network", city / "network.json", "--sightings", city / "sightings.csv", "--out", tmp_path)
    assert {p.name: p.read_bytes() for p in city.iterdir()} == before
    assert model.read_bytes() == model_bytes


@pytest.mark.slow
def test_full_pipeline_on_defaults(tmp_path):
    data = tmp_path / "data"
    assert run("synth", "--out", data).exit_code == 0
    assert run("analyze", "--network", data / "network.json", "--sightings", data / "sightings.csv",
               "--out", tmp_path / "analysis").exit_code == 0
    res = run("train", "--network", data / "network.json", "--ridership", data / "ridership.csv",
              "--out", tmp_path / "model.json")
    assert res.exit_code == 0, res.output
    assert run("generate", "--model", tmp_path / "model.json", "--out", tmp_path / "traces.jsonl").exit_code == 0
    res = run("evaluate", "--network", data / "network.json", "--ridership", data / "ridership.csv",
              "--sightings", data / "sightings.csv", "--traces", tmp_path / "traces.jsonl",
              "--out", tmp_path / "evaluation.json")
    assert res.exit_code == 0, res.output
    doc = json.loads((tmp_path / "evaluation.json").read_text())
    for key in ("ks", "dispersion_rmse", "payoff_delta", "predictability_delta", "shares_before"):
        assert doc[key] is not None
    assert doc["dispersion_rmse"] > 0
