"""Command-line entry point: ``cropfuse <command> [options]``.

Exit codes: 0 on success, 2 for unusable or missing input data, 3 for an
invalid configuration.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import experiment as ex
from . import io
from .errors import ConfigError, DataError
from .ingest import assign_pixels_to_counties
from .pipeline import build_records
from .synth import YIELD_FUNCTIONS, generate_benchmark

log = logging.getLogger("cropfuse")

EXIT_OK = 0
EXIT_DATA = 2
EXIT_CONFIG = 3


def _config(args) -> ex.ExperimentConfig:
    if args.config is None:
        if args.command in ("synth", "report"):
            config = ex.ExperimentConfig()
        else:
            raise ConfigError(f"{args.command} needs --config")
    else:
        config = ex.load_config(args.config)
    cv = config.cv
    if args.seed is not None:
        cv = replace(cv, seed=args.seed)
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        cv = replace(cv, jobs=args.jobs)
    return replace(config, cv=cv)


def _years(config: ex.ExperimentConfig):
    years = config.run_years
    if not years:
        raise ConfigError("no [inputs.<year>] tables in the config")
    for y in years:
        if y not in config.inputs:
            raise ConfigError(f"no inputs configured for {y}")
    return years


def _table(config):
    return io.read_unit_table(config.units) if config.units is not None else None


# -- commands -----------------------------------------------------------------


def cmd_synth(args, config: ex.ExperimentConfig, out: Path) -> None:
    s = config.synth
    if args.n_counties is not None:
        s = replace(s, n_counties=args.n_counties)
    if args.yield_fn is not None:
        s = replace(s, yield_fn=args.yield_fn)
    if args.years:
        s = replace(s, years=tuple(args.years))
    s = ex.SynthSettings(**vars(s))
    seed = config.cv.seed
    survey, lines = [], []
    for year in s.years:
        b = generate_benchmark(
            s.n_counties, s.yield_fn, seed, year, s.pixels_per_county,
            s.yield_noise, s.vod_noise, s.evi_noise, s.gap_prob,
        )
        if year == s.years[0]:
            io.write_counties(out / "counties.geojson", b.geometries)
        survey.extend(b.survey)
        ydir = out / str(year)
        io.write_pixels(ydir / "pixels.csv", b.pixels)
        io.write_seasons(ydir / "seasons.csv", b.seasons)
        io.write_csv(
            ydir / "truth.csv",
            ("county_id", "year", "true_lag", "true_yield", "corn", "soybean", "wheat", "evi_condition", "vod_condition"),
            (
                (c.county_id, c.year, c.true_lag, c.true_yield, c.crop_mix["corn"], c.crop_mix["soybean"],
                 c.crop_mix["wheat"], c.evi_condition, c.vod_condition)
                for c in b.counties
            ),
        )
        lines.append(f"{year}: {len(b.counties)} counties, {len(b.pixels)} pixel series")
    io.write_survey(out / "survey.csv", survey)
    (out / "experiment.toml").write_text(_synth_config(s, seed))
    header = f"synthetic benchmark: yield_fn={s.yield_fn} seed={seed}"
    (out / "summary.txt").write_text("\n".join([header, *lines]) + "\n")
    print(header)


def _synth_config(s: ex.SynthSettings, seed: int) -> str:
    years = ", ".join(map(str, s.years))
    out = [
        "[experiment]",
        'scenario = ["total"]',
        'predictor = ["lag", "evi_series", "vod_series", "evi_vod_series"]',
        'model = ["rlr", "krr"]',
        f"years = [{years}]",
        "",
        "[cv]",
        f"seed = {seed}",
        "",
        "[inputs]",
        'survey = "survey.csv"',
        'counties = "counties.geojson"',
    ]
    for y in s.years:
        out += ["", f"[inputs.{y}]", f'pixels = "{y}/pixels.csv"', f'seasons = "{y}/seasons.csv"']
    return "\n".join(out) + "\n"


def cmd_ingest(args, config, out: Path) -> None:
    table = _table(config)
    for year in _years(config):
        inp = config.inputs[year]
        pixels = io.read_pixels(inp.pixels)
        geoms = io.read_counties(inp.counties)
        survey = {k: v for k, v in io.read_survey(inp.survey).items() if k[1] == year}
        records = build_records(survey, table)
        assignment = assign_pixels_to_counties(pixels, geoms)
        ydir = out / str(year)

        def record_rows():
            for (cid, yr), rec in sorted(records.items()):
                yield (cid, yr, "total", rec.weighted_yield, sum(rec.areas.values()), 1.0)
                for crop in sorted(rec.proportions):
                    yield (cid, yr, crop, rec.crop_yields[crop], rec.areas[crop], rec.proportions[crop])

        io.write_csv(
            ydir / "records.csv",
            ("county_id", "year", "crop", "yield_kg_m2", "area_planted_acres", "proportion"),
            record_rows(),
        )
        io.write_csv(
            ydir / "assignment.csv",
            ("pixel_id", "county_id"),
            sorted((pid, cid) for cid, ids in assignment.items() for pid in ids),
        )
        assigned = sum(len(v) for v in assignment.values())
        ids = {p.pixel_id for p in pixels}
        text = (
            f"{year}: {len(records)} county records, {len(geoms)} counties, "
            f"{assigned} of {len(ids)} pixels assigned"
        )
        (ydir / "summary.txt").write_text(text + "\n")
        print(text)


def cmd_preprocess(args, config, out: Path) -> None:
    table = _table(config)
    for year in _years(config):
        data = ex.load_year(config.inputs[year], table, config.preprocess)
        ydir = out / str(year)
        io.write_screening(ydir / "screening.csv", sorted(data.reports, key=lambda r: r.pixel_id))

        def series_rows():
            for c in sorted(data.counties, key=lambda c: c.county_id):
                for sensor, s in (("EVI", c.evi), ("VOD", c.vod)):
                    for d, v in zip(s.doy, s.values):
                        yield (c.county_id, sensor, int(d), float(v))

        io.write_csv(ydir / "county_series.csv", ("county_id", "sensor", "doy", "value"), series_rows())
        dropped = {}
        for r in data.reports:
            if r.dropped:
                dropped[r.reason] = dropped.get(r.reason, 0) + 1
        text = (
            f"{year}: {len(data.counties)} counties with usable series; "
            f"{len(data.reports)} microwave pixels screened, dropped: "
            + (", ".join(f"{k}={v}" for k, v in sorted(dropped.items())) or "none")
        )
        (ydir / "summary.txt").write_text(text + "\n")
        print(text)


def cmd_metrics(args, config, out: Path) -> None:
    table = _table(config)
    for year in _years(config):
        data = ex.load_year(config.inputs[year], table, config.preprocess)
        rows = ex.county_metrics(data.counties, data.seasons, config.lag_range)
        ydir = out / str(year)
        io.write_csv(ydir / "metrics.csv", ("county_id", "sensor", "metric_name", "value"), rows)
        text = f"{year}: metrics for {len(data.counties)} counties"
        (ydir / "summary.txt").write_text(text + "\n")
        print(text)


def cmd_estimate(args, config, out: Path) -> None:
    started = ex.utc_now()
    data = ex.load_inputs(config)
    reports, skipped = [], []
    for scenario, predictor, model in config.cells():
        try:
            report = ex.run_estimate(config, data, scenario, predictor, model)
        except DataError as err:
            log.warning("skipping %s/%s/%s: %s", scenario, predictor, model, err)
            skipped.append(f"{scenario}/{predictor}/{model}: {err}")
            continue
        ex.write_run(report, out / report.name)
        reports.append(report)
    if not reports:
        raise DataError("no experiment cell could be evaluated")
    io.write_csv(out / "comparison.csv", ex.STATS_COLUMNS, [ex.stats_row(r) for r in reports])
    text = ex.report_text(reports, started)
    if skipped:
        text += "\nskipped cells:\n" + "\n".join(f"  {s}" for s in skipped) + "\n"
    (out / "summary.txt").write_text(text)
    print(ex.LIMITATION)
    print(ex.format_comparison(reports), end="")


def cmd_forecast(args, config, out: Path) -> None:
    started = ex.utc_now()
    data = ex.load_inputs(config)
    points = ex.run_forecast(config, data)
    ex.write_forecast(points, out / "forecast.csv")
    text = ex.forecast_text(points, started)
    (out / "summary.txt").write_text(text)
    print(text, end="")


def cmd_report(args, config, out: Path) -> None:
    runs = ex.find_runs(args.runs)
    if not runs:
        raise DataError("no run directories (with stats.csv) found")
    reports = [ex.read_run(d) for d in runs]
    io.write_csv(out / "comparison.csv", ex.STATS_COLUMNS, [ex.stats_row(r) for r in reports])
    io.write_csv(
        out / "residuals.csv",
        ("run", *ex.RESIDUAL_COLUMNS),
        ((r.name, *row) for r in reports for row in ex.residual_table(r.counties)),
    )
    text = ex.report_text(reports, ex.utc_now())
    (out / "report.txt").write_text(text)
    print(text, end="")


COMMANDS = {
    "ingest": (cmd_ingest, "read surveys and geometry, convert units, assign pixels to counties"),
    "preprocess": (cmd_preprocess, "run the microwave quality chain and average to county series"),
    "metrics": (cmd_metrics, "per-county seasonal metrics, PC1 scores and the cross-sensor lag"),
    "estimate": (cmd_estimate, "repeated hold-out evaluation of every configured experiment cell"),
    "forecast": (cmd_forecast, "re-run the cells on series truncated at each month end"),
    "report": (cmd_report, "comparison and residual tables from existing run directories"),
    "synth": (cmd_synth, "write a synthetic benchmark in the input file formats"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment TOML file")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    common.add_argument("--jobs", type=int, help="worker threads for the repetitions")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="cropfuse", description="Optical/microwave crop yield estimation.")
    sub = parser.add_subparsers(dest="command", required=True)
    parsers = {}
    for name, (_, help_text) in COMMANDS.items():
        parsers[name] = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    parsers["report"].add_argument("runs", nargs="+", type=Path, help="run directories or parents of them")
    p = parsers["synth"]
    p.add_argument("--n-counties", type=int, help="counties per year (default 200)")
    p.add_argument("--yield-fn", choices=YIELD_FUNCTIONS, help="how yield depends on the simulated curves")
    p.add_argument("--years", type=int, nargs="+", help="years to simulate (default 2015)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handler, _ = COMMANDS[args.command]
    try:
        config = _config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        handler(args, config, args.out)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
