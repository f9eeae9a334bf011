import json

import pytest

from qarb.cli import main
from qarb.data import load_csv


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("QARB_SEED", raising=False)
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


def read(path):
    with open(path) as fh:
        return json.load(fh)


def test_synth_twice_identical(workdir):
    for name in ("a.csv", "b.csv"):
        assert run("synth", "--kind", "planted", "--T", 1000, "--beta", 2, "--seed", 1, "--out", name) == 0
    assert (workdir / "a.csv").read_bytes() == (workdir / "b.csv").read_bytes()
    assert load_csv(workdir / "a.csv").T == 1000


def test_synth_meta_echoes_seed(workdir):
    assert run("synth", "--kind", "kappa", "--J", 3, "--seed", 5, "--out", "k.csv", "--meta", "m.json") == 0
    meta = read("m.json")
    assert meta["seed"] == 5 and meta["config"]["seed"] == 5 and meta["metadata"]["kappa"] == 8.0


def test_pipeline_end_to_end(workdir, capsys):
    assert run("synth", "--kind", "planted", "--T", 500, "--beta", 1, 1, "--seed", 7, "--out", "p.csv") == 0
    assert run("ingest", "--panel", "p.csv", "--pool-d", 3, "--pool-out", "pool.json", "--out", "i.json") == 0
    assert read("i.json")["pool"]["size"] == 1
    assert run("preselect", "--panel", "p.csv", "--pool", "pool.json", "--kappa0", 16, "--oracle",
               "--out", "pre.json") == 0
    assert run("cointegrate", "--panel", "p.csv", "--stocks", "0,1,2", "--out", "c.json") == 0
    assert read("c.json")["result"]["flag"] is True
    capsys.readouterr()
    assert run("screen-fixed", "--pool", "pool.json", "--panel", "p.csv", "--kappa0", 16, "--seed", 7,
               "--out", "rep.json") == 0
    rep = read("rep.json")
    assert rep["seed"] == 7 and rep["config"]["kappa0"] == 16.0 and rep["schema_version"] == 1
    assert rep["survivors"][0]["portfolio"] == "0-1-2@0:500"
    assert "0-1-2@0:500" in capsys.readouterr().err
    assert run("screen-progressive", "--pool", "pool.json", "--panel", "p.csv", "--k", 1, "--out", "prog.json") == 0
    assert read("prog.json")["rounds"] == 0


def test_screen_deterministic_across_threads(workdir):
    run("synth", "--kind", "walk", "--J", 6, "--seed", 2, "--out", "w.csv")
    run("ingest", "--panel", "w.csv", "--pool-d", 3, "--pool-out", "pool.json")
    for name, threads in (("a.json", 1), ("b.json", 1), ("c.json", 2)):
        assert run("screen-fixed", "--pool", "pool.json", "--panel", "w.csv", "--kappa0", 8, "--seed", 3,
                   "--threads", threads, "--out", name) == 0
    assert (workdir / "a.json").read_bytes() == (workdir / "b.json").read_bytes() == (workdir / "c.json").read_bytes()


def test_env_seed_and_flag_precedence(workdir, monkeypatch):
    run("synth", "--kind", "walk", "--out", "w.csv")
    monkeypatch.setenv("QARB_SEED", "11")
    assert run("cointegrate", "--panel", "w.csv", "--stocks", "0,1", "--out", "env.json") == 0
    assert read("env.json")["seed"] == 11
    assert run("cointegrate", "--panel", "w.csv", "--stocks", "0,1", "--seed", 4, "--out", "flag.json") == 0
    assert read("flag.json")["seed"] == 4
    monkeypatch.setenv("QARB_SEED", "eleven")
    assert run("cointegrate", "--panel", "w.csv", "--stocks", "0,1", "--out", "bad.json") == 2


def test_stdout_when_no_out(workdir, capsys):
    run("synth", "--kind", "walk", "--out", "w.csv")
    capsys.readouterr()
    assert run("ingest", "--panel", "w.csv") == 0
    assert json.loads(capsys.readouterr().out)["J"] == 2


@pytest.mark.parametrize("argv", [
    ["synth", "--kind", "walk", "--out", "x.csv", "--bogus"],
    ["frobnicate"],
    ["screen-fixed", "--pool", "missing.json", "--panel", "missing.csv", "--kappa0", 16],
    ["synth", "--kind", "walk", "--T", 10, "--out", "x.csv"],
    ["preselect", "--panel", "w.csv", "--kappa0", 8],
    ["cointegrate", "--panel", "w.csv", "--stocks", "a,b"],
])
def test_validation_errors_exit_2(workdir, argv):
    run("synth", "--kind", "walk", "--out", "w.csv")
    assert run(*argv) == 2


def test_runtime_error_exit_1(workdir):
    run("synth", "--kind", "walk", "--out", "w.csv")
    (workdir / "dir.json").mkdir()
    assert run("ingest", "--panel", "w.csv", "--out", "dir.json") == 1


def test_exit_codes_stable(workdir):
    codes = {run("synth", "--kind", "walk", "--T", 10, "--out", "x.csv") for _ in range(3)}
    assert codes == {2}


@pytest.mark.slow
def test_calibrate_df_trend_500(workdir):
    assert run("calibrate-df", "--n", 500, "--trials", 100_000, "--trend", "--out", "cv.json") == 0
    table = read("cv.json")
    assert table["values"]["ct"]["500"][1] == pytest.approx(-3.41, abs=0.05)
    assert "c" not in table["values"]


def test_scaling_small(workdir):
    assert run("scaling", "--kappa0", 4, 8, "--trials", 10, "--seed", 1, "--out", "s.json") == 0
    rep = read("s.json")
    assert rep["seed"] == 1 and rep["config"]["trials"] == 10 and len(rep["T_avg"]) == 2
