from pathlib import Path

import pytest

from cropfuse.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main
from cropfuse.experiment import LIMITATION

CONFIG = """\
[experiment]
scenario = ["total", "corn"]
predictor = ["lag", "evi_series", "evi_vod_series"]
model = ["rlr", "krr"]
months = [6, 8, 10]

[cv]
repetitions = 3
seed = 4

[inputs]
survey = "survey.csv"
counties = "counties.geojson"

[inputs.2015]
pixels = "2015/pixels.csv"
seasons = "2015/seasons.csv"
"""


def csv_bytes(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*.csv"))}


@pytest.fixture(scope="module")
def bench_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("bench")
    assert main(["synth", "--out", str(d), "--n-counties", "30", "--seed", "2"]) == EXIT_OK
    (d / "small.toml").write_text(CONFIG)
    return d


def run(*argv) -> int:
    return main([str(a) for a in argv])


class TestSynth:
    def test_files(self, bench_dir):
        for name in ("counties.geojson", "survey.csv", "2015/pixels.csv", "2015/seasons.csv", "2015/truth.csv", "experiment.toml"):
            assert (bench_dir / name).is_file(), name

    def test_written_config_loads(self, bench_dir, tmp_path):
        assert run("ingest", "--config", bench_dir / "experiment.toml", "--out", tmp_path) == EXIT_OK

    def test_repeatable(self, tmp_path):
        for d in ("a", "b"):
            assert run("synth", "--out", tmp_path / d, "--n-counties", "20", "--years", "2015", "2016") == EXIT_OK
        assert csv_bytes(tmp_path / "a") == csv_bytes(tmp_path / "b")
        assert (tmp_path / "a" / "counties.geojson").read_bytes() == (tmp_path / "b" / "counties.geojson").read_bytes()

    def test_bad_yield_fn(self, tmp_path):
        with pytest.raises(SystemExit):
            run("synth", "--out", tmp_path, "--yield-fn", "cubic")


@pytest.mark.parametrize("command", ["ingest", "preprocess", "metrics", "estimate", "forecast"])
def test_byte_identical_outputs(bench_dir, tmp_path, command):
    cfg = bench_dir / "small.toml"
    outs = {}
    for name, jobs in (("a", 1), ("b", 1), ("c", 3)):
        assert run(command, "--config", cfg, "--out", tmp_path / name, "--jobs", jobs) == EXIT_OK
        outs[name] = csv_bytes(tmp_path / name)
    assert outs["a"], f"{command} wrote no CSV"
    assert outs["a"] == outs["b"] == outs["c"]


class TestOutputs:
    def test_ingest(self, bench_dir, tmp_path):
        run("ingest", "--config", bench_dir / "small.toml", "--out", tmp_path)
        assert (tmp_path / "2015" / "records.csv").is_file() and (tmp_path / "2015" / "assignment.csv").is_file()

    def test_estimate_prints_limitation(self, bench_dir, tmp_path, capsys):
        assert run("estimate", "--config", bench_dir / "small.toml", "--out", tmp_path) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith(LIMITATION)
        assert "RMSE(x100)" in out
        assert (tmp_path / "total_evi_vod_series_krr" / "counties.csv").is_file()
        assert (tmp_path / "comparison.csv").read_text().count("\n") == 1 + 12

    def test_report_reproducible(self, bench_dir, tmp_path):
        run("estimate", "--config", bench_dir / "small.toml", "--out", tmp_path / "est")
        for d in ("r1", "r2"):
            assert run("report", tmp_path / "est", "--out", tmp_path / d) == EXIT_OK
        assert csv_bytes(tmp_path / "r1") == csv_bytes(tmp_path / "r2")
        assert (tmp_path / "r1" / "report.txt").read_text().startswith(LIMITATION)

    def test_seed_override_changes_results(self, bench_dir, tmp_path):
        cfg = bench_dir / "small.toml"
        run("estimate", "--config", cfg, "--out", tmp_path / "a")
        run("estimate", "--config", cfg, "--out", tmp_path / "b", "--seed", "99")
        assert csv_bytes(tmp_path / "a") != csv_bytes(tmp_path / "b")


class TestExitCodes:
    def test_missing_config_flag(self, tmp_path):
        assert run("estimate", "--out", tmp_path) == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path):
        assert run("estimate", "--config", tmp_path / "none.toml", "--out", tmp_path) == EXIT_CONFIG

    def test_bad_config_value(self, tmp_path):
        (tmp_path / "c.toml").write_text('[experiment]\nmodel = "svm"\n')
        assert run("estimate", "--config", tmp_path / "c.toml", "--out", tmp_path) == EXIT_CONFIG

    def test_bad_jobs(self, bench_dir, tmp_path):
        assert run("metrics", "--config", bench_dir / "small.toml", "--out", tmp_path, "--jobs", "0") == EXIT_CONFIG

    def test_missing_input_file(self, tmp_path):
        (tmp_path / "c.toml").write_text(
            '[inputs.2015]\npixels = "p.csv"\nsurvey = "s.csv"\ncounties = "c.geojson"\n'
        )
        assert run("ingest", "--config", tmp_path / "c.toml", "--out", tmp_path / "o") == EXIT_DATA

    def test_report_without_runs(self, tmp_path):
        (tmp_path / "empty").mkdir()
        assert run("report", tmp_path / "empty", "--out", tmp_path / "o") == EXIT_DATA
