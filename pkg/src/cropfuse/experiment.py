"""Experiment configuration, estimation and forecast runners, report tables.

A run is one (scenario, predictor, model) cell evaluated with repeated
70/30 hold-out. Runs are written as a directory holding ``stats.csv``,
``counties.csv`` and a human-readable ``summary.txt``; only the summary
carries wall-clock timestamps, so the CSV files are reproducible byte for
byte.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import io
from .errors import ConfigError, DataError
from .ingest import FeatureSet, UnitTable, pool_years
from .metrics import (
    BATTERY_FIELDS,
    DEFAULT_LAG_RANGE,
    evi_vod_lag,
    fit_pc1,
    metric_battery,
    project_pc1,
)
from .pipeline import (
    PREDICTORS,
    SCENARIOS,
    CountyData,
    PreprocessConfig,
    aggregate_counties,
    build_feature_set,
    build_records,
    month_end_doy,
    season_for,
)
from .preprocess import ScreeningReport
from .regress import MODEL_KINDS, CvConfig, EvalStats, run_cv_experiment
from .synth import YIELD_FUNCTIONS

log = logging.getLogger(__name__)

MONTHS = tuple(range(4, 11))
MIN_ROWS = 10
LIMITATION = (
    "NOTE: no accuracy is asserted against published values for these inputs; "
    "differences in how the input data were reconstructed dominate any comparison."
)

STATS_COLUMNS = (
    "scenario", "predictor", "model", "years", "window_end_month", "seed",
    "n_counties", "n_features", "me", "me_std", "rmse", "rmse_std", "r2", "r2_std",
    "n_repetitions",
)
COUNTY_COLUMNS = (
    "county_id", "year", "survey_yield", "predicted_yield", "residual",
    "relative_error_pct", "held_out", "status",
)
FORECAST_COLUMNS = (
    "scenario", "predictor", "model", "month", "end_doy", "n_counties", "n_features",
    "me", "me_std", "rmse", "rmse_std", "r2", "r2_std", "status",
)


# -- configuration ------------------------------------------------------------


@dataclass
class YearInputs:
    year: int
    pixels: Path
    survey: Path
    counties: Path
    seasons: Path | None = None


@dataclass
class SynthSettings:
    n_counties: int = 200
    yield_fn: str = "series_functional"
    years: tuple[int, ...] = (2015,)
    pixels_per_county: int = 3
    yield_noise: float = 0.05
    vod_noise: float = 0.03
    evi_noise: float = 0.01
    gap_prob: float = 0.05

    def __post_init__(self):
        self.years = tuple(int(y) for y in self.years)
        if self.yield_fn not in YIELD_FUNCTIONS:
            raise ConfigError(f"unknown yield function {self.yield_fn!r}; expected one of {YIELD_FUNCTIONS}")
        if self.n_counties < 20:
            raise ConfigError("synthetic benchmark needs at least 20 counties")
        if not self.years:
            raise ConfigError("synth needs at least one year")


@dataclass
class ExperimentConfig:
    scenarios: tuple[str, ...] = ("total",)
    predictors: tuple[str, ...] = ("evi_vod_series",)
    models: tuple[str, ...] = ("krr",)
    window_end_month: int = 10
    months: tuple[int, ...] = MONTHS
    years: tuple[int, ...] | None = None
    lag_range: tuple[int, int] = DEFAULT_LAG_RANGE
    cv: CvConfig = field(default_factory=CvConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    inputs: dict[int, YearInputs] = field(default_factory=dict)
    units: Path | None = None
    synth: SynthSettings = field(default_factory=SynthSettings)

    def __post_init__(self):
        self.scenarios = _choices(self.scenarios, SCENARIOS, "scenario")
        self.predictors = _choices(self.predictors, PREDICTORS, "predictor")
        self.models = _choices(self.models, MODEL_KINDS, "model")
        self.months = tuple(int(m) for m in self.months)
        for m in (self.window_end_month, *self.months):
            if not MONTHS[0] <= m <= MONTHS[-1]:
                raise ConfigError(f"month {m} outside the April-October window (4..10)")
        lo, hi = (int(v) for v in self.lag_range)
        if lo > hi:
            raise ConfigError(f"empty lag range [{lo}, {hi}]")
        self.lag_range = (lo, hi)
        if self.years is not None:
            self.years = tuple(sorted({int(y) for y in self.years}))

    @property
    def run_years(self) -> tuple[int, ...]:
        return self.years if self.years is not None else tuple(sorted(self.inputs))

    def cells(self) -> list[tuple[str, str, str]]:
        return list(itertools.product(self.scenarios, self.predictors, self.models))

    def echo(self) -> list[tuple[str, object]]:
        """Flat key/value view for report headers."""
        cv = self.cv
        return [
            ("scenarios", ",".join(self.scenarios)),
            ("predictors", ",".join(self.predictors)),
            ("models", ",".join(self.models)),
            ("years", ",".join(map(str, self.run_years))),
            ("window_end_month", self.window_end_month),
            ("lag_range", f"{self.lag_range[0]}..{self.lag_range[1]}"),
            ("train_fraction", cv.train_fraction),
            ("repetitions", cv.repetitions),
            ("inner_folds", cv.inner_folds),
            ("lambdas", ",".join(f"{v:g}" for v in cv.lambdas)),
            ("sigmas", ",".join(f"{v:g}" for v in cv.sigmas) if cv.sigmas else
             "median distance x " + ",".join(f"{v:g}" for v in cv.sigma_factors)),
            ("seed", cv.seed),
            ("ma_window", self.preprocess.window),
            ("ar_p_max", self.preprocess.p_max),
            ("min_gap_days", self.preprocess.min_gap_days),
        ]


def _choices(value, allowed, what) -> tuple[str, ...]:
    values = (value,) if isinstance(value, str) else tuple(value)
    if not values:
        raise ConfigError(f"at least one {what} is required")
    for v in values:
        if v not in allowed:
            raise ConfigError(f"unknown {what} {v!r}; expected one of {', '.join(allowed)}")
    return values


def _section(doc: Mapping, name: str, known: Iterable[str]) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, Mapping):
        raise ConfigError(f"[{name}] must be a table")
    unknown = sorted(set(sec) - set(known))
    if unknown:
        raise ConfigError(f"[{name}]: unknown keys {unknown}")
    return dict(sec)


def _path(base: Path, value) -> Path:
    if not isinstance(value, str):
        raise ConfigError(f"expected a path string, got {value!r}")
    p = Path(value)
    return p if p.is_absolute() else base / p


def config_from_dict(doc: Mapping, base_dir: Path | str = ".") -> ExperimentConfig:
    """Build a config from parsed TOML; relative paths resolve against ``base_dir``."""
    base = Path(base_dir)
    unknown = sorted(set(doc) - {"experiment", "cv", "preprocess", "inputs", "synth"})
    if unknown:
        raise ConfigError(f"unknown config sections {unknown}")
    exp = _section(
        doc,
        "experiment",
        ("scenario", "predictor", "model", "window_end_month", "months", "years", "lag_min", "lag_max"),
    )
    cv = _section(
        doc,
        "cv",
        ("train_fraction", "repetitions", "inner_folds", "lambdas", "sigma_factors", "sigmas", "seed"),
    )
    pre = _section(doc, "preprocess", ("window", "p_max", "min_gap_days"))
    synth = _section(doc, "synth", tuple(SynthSettings.__dataclass_fields__))

    raw_inputs = doc.get("inputs", {})
    if not isinstance(raw_inputs, Mapping):
        raise ConfigError("[inputs] must be a table")
    shared = {k: v for k, v in raw_inputs.items() if not isinstance(v, Mapping)}
    bad = sorted(set(shared) - {"survey", "counties", "units", "pixels", "seasons"})
    if bad:
        raise ConfigError(f"[inputs]: unknown keys {bad}")
    inputs = {}
    for key, sec in raw_inputs.items():
        if not isinstance(sec, Mapping):
            continue
        try:
            year = int(key)
        except ValueError:
            raise ConfigError(f"[inputs.{key}]: sub-tables must be named by year") from None
        merged = {**shared, **sec}
        extra = sorted(set(merged) - {"survey", "counties", "units", "pixels", "seasons"})
        if extra:
            raise ConfigError(f"[inputs.{key}]: unknown keys {extra}")
        for need in ("pixels", "survey", "counties"):
            if need not in merged:
                raise ConfigError(f"[inputs.{key}]: missing {need!r}")
        inputs[year] = YearInputs(
            year,
            _path(base, merged["pixels"]),
            _path(base, merged["survey"]),
            _path(base, merged["counties"]),
            _path(base, merged["seasons"]) if "seasons" in merged else None,
        )

    try:
        kwargs = {}
        for src, dst in (("scenario", "scenarios"), ("predictor", "predictors"), ("model", "models")):
            if src in exp:
                kwargs[dst] = exp[src]
        for key in ("window_end_month", "months", "years"):
            if key in exp:
                kwargs[key] = exp[key]
        if "lag_min" in exp or "lag_max" in exp:
            kwargs["lag_range"] = (exp.get("lag_min", DEFAULT_LAG_RANGE[0]), exp.get("lag_max", DEFAULT_LAG_RANGE[1]))
        config = ExperimentConfig(
            cv=CvConfig(**cv),
            preprocess=PreprocessConfig(**pre),
            inputs=inputs,
            units=_path(base, shared["units"]) if "units" in shared else None,
            synth=SynthSettings(**synth),
            **kwargs,
        )
    except (TypeError, ValueError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(f"invalid config value: {err}") from err
    if config.years is not None:
        missing = [y for y in config.years if y not in config.inputs]
        if missing and config.inputs:
            raise ConfigError(f"years {missing} have no [inputs.<year>] table")
    return config


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return config_from_dict(io.load_toml(path), path.parent)


# -- inputs -------------------------------------------------------------------


@dataclass
class YearData:
    year: int
    counties: list[CountyData]
    records: dict
    seasons: dict | None
    reports: list[ScreeningReport]
    assignment: dict[str, list[str]]


def load_year(inputs: YearInputs, table: UnitTable | None = None, preprocess: PreprocessConfig | None = None) -> YearData:
    """Read one year's files and run the preprocessing chain."""
    pixels = io.read_pixels(inputs.pixels)
    geometries = io.read_counties(inputs.counties)
    survey = {k: v for k, v in io.read_survey(inputs.survey).items() if k[1] == inputs.year}
    if not survey:
        raise DataError(f"{inputs.survey}: no survey rows for {inputs.year}")
    seasons = io.read_seasons(inputs.seasons) if inputs.seasons is not None else None
    counties, reports, assignment = aggregate_counties(pixels, geometries, inputs.year, preprocess)
    records = build_records(survey, table)
    return YearData(inputs.year, counties, records, seasons, reports, assignment)


def load_inputs(config: ExperimentConfig) -> dict[int, YearData]:
    years = config.run_years
    if not years:
        raise ConfigError("no input years configured")
    table = io.read_unit_table(config.units) if config.units is not None else None
    out = {}
    for year in years:
        if year not in config.inputs:
            raise ConfigError(f"no inputs configured for {year}")
        out[year] = load_year(config.inputs[year], table, config.preprocess)
    return out


def window_end_doy(years: Iterable[int], month: int) -> int:
    """Last day of ``month``; pooled years share the earliest such day so series lengths agree."""
    return min(month_end_doy(y, month) for y in years)


def feature_set(
    data: Mapping[int, YearData],
    scenario: str,
    predictor: str,
    lag_range: tuple[int, int] = DEFAULT_LAG_RANGE,
    month: int | None = None,
) -> FeatureSet:
    """Per-year predictor rows, pooled across years."""
    end = None if month is None else window_end_doy(data, month)
    sets = [
        build_feature_set(d.counties, d.records, scenario, predictor, d.seasons, lag_range, end)
        for _, d in sorted(data.items())
    ]
    nonempty = [s for s in sets if len(s.county_ids)]
    if not nonempty:
        return sets[0]
    return pool_years(nonempty)


# -- runs ---------------------------------------------------------------------


@dataclass
class CountyRow:
    county_id: str
    year: int
    survey_yield: float
    predicted_yield: float
    residual: float
    relative_error_pct: float
    held_out: int
    status: str


@dataclass
class RunReport:
    scenario: str
    predictor: str
    model: str
    years: tuple[int, ...]
    window_end_month: int
    seed: int
    n_counties: int
    n_features: int
    stats: EvalStats
    counties: list[CountyRow]
    config_echo: list[tuple[str, object]] = field(default_factory=list)
    started: str = ""
    finished: str = ""

    @property
    def name(self) -> str:
        return f"{self.scenario}_{self.predictor}_{self.model}"


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def county_rows(fs: FeatureSet, predicted: np.ndarray, held_out: np.ndarray) -> list[CountyRow]:
    """Per-county residual table from out-of-sample mean predictions.

    ``residual`` is survey minus predicted; the relative error is
    ``100 |pred - survey| / survey`` and is NaN (status ``zero_yield``) when
    the survey yield is not positive. Counties never drawn into a test split
    have status ``not_held_out``.
    """
    rows = []
    for cid, year, y, yhat, count in zip(fs.county_ids, fs.years, fs.y, predicted, held_out):
        y, yhat = float(y), float(yhat)
        if count == 0:
            rows.append(CountyRow(cid, int(year), y, np.nan, np.nan, np.nan, 0, "not_held_out"))
            continue
        if y > 0:
            rel, status = 100.0 * abs(yhat - y) / y, "ok"
        else:
            rel, status = np.nan, "zero_yield"
        rows.append(CountyRow(cid, int(year), y, yhat, y - yhat, rel, int(count), status))
    return rows


def run_estimate(
    config: ExperimentConfig,
    data: Mapping[int, YearData],
    scenario: str,
    predictor: str,
    model: str,
    month: int | None = None,
) -> RunReport:
    """Evaluate one cell on series truncated at the end of ``month``."""
    started = utc_now()
    month = config.window_end_month if month is None else month
    fs = feature_set(data, scenario, predictor, config.lag_range, month)
    n = len(fs.county_ids)
    if n < MIN_ROWS:
        raise DataError(f"{scenario}/{predictor}: only {n} counties with a label and a computable predictor")
    result = run_cv_experiment(fs.X, fs.y, model, config.cv)
    predicted, held = result.out_of_sample()
    return RunReport(
        scenario,
        predictor,
        model,
        tuple(sorted(data)),
        month,
        config.cv.seed,
        n,
        fs.X.shape[1],
        result.stats,
        county_rows(fs, predicted, held),
        config.echo(),
        started,
        utc_now(),
    )


@dataclass
class ForecastPoint:
    scenario: str
    predictor: str
    model: str
    month: int
    end_doy: int
    n_counties: int
    n_features: int
    stats: EvalStats | None
    status: str


def run_forecast(config: ExperimentConfig, data: Mapping[int, YearData]) -> list[ForecastPoint]:
    """Re-run every cell with series truncated at each configured month end.

    Points that cannot be evaluated (too few counties with a computable
    predictor, e.g. a lag with no 30-day overlap in a short window) are
    returned with ``stats=None`` and a status message instead of failing.
    """
    out = []
    for scenario, predictor, model in config.cells():
        for month in config.months:
            end = window_end_doy(data, month)
            fs = feature_set(data, scenario, predictor, config.lag_range, month)
            n = len(fs.county_ids)
            t = fs.X.shape[1] if fs.X.ndim == 2 else 0
            if n < MIN_ROWS:
                out.append(ForecastPoint(scenario, predictor, model, month, end, n, t, None, "insufficient_counties"))
                continue
            try:
                stats = run_cv_experiment(fs.X, fs.y, model, config.cv).stats
            except DataError as err:
                log.info("forecast %s/%s/%s month %d: %s", scenario, predictor, model, month, err)
                out.append(ForecastPoint(scenario, predictor, model, month, end, n, t, None, "failed"))
                continue
            out.append(ForecastPoint(scenario, predictor, model, month, end, n, t, stats, "ok"))
    return out


# -- per-county metrics -------------------------------------------------------


def county_metrics(
    counties: Sequence[CountyData],
    seasons: Mapping | None = None,
    lag_range: tuple[int, int] = DEFAULT_LAG_RANGE,
) -> list[tuple[str, str, str, float]]:
    """Long-format metric rows ``(county_id, sensor, metric_name, value)``.

    Each sensor gets the six-metric battery plus its PC1 score (fitted over
    the counties given); the cross-sensor lag is reported under sensor
    ``EVI_VOD``. Uncomputable values are NaN.
    """
    counties = sorted(counties, key=lambda c: c.county_id)
    rows = []
    for sensor in ("EVI", "VOD"):
        batteries = np.full((len(counties), len(BATTERY_FIELDS)), np.nan)
        for k, c in enumerate(counties):
            series = c.evi if sensor == "EVI" else c.vod
            try:
                window = season_for(c, seasons)
                batteries[k] = metric_battery(series, window).as_array()
            except DataError as err:
                log.info("county %s %s metrics unavailable: %s", c.county_id, sensor, err)
        pc1 = np.full(len(counties), np.nan)
        ok = np.all(np.isfinite(batteries), axis=1)
        if ok.sum() >= batteries.shape[1]:
            try:
                pc1[ok] = project_pc1(batteries[ok], fit_pc1(batteries[ok]))
            except DataError as err:
                log.info("%s PC1 unavailable: %s", sensor, err)
        for k, c in enumerate(counties):
            for name, value in zip(BATTERY_FIELDS, batteries[k]):
                rows.append((c.county_id, sensor, name, float(value)))
            rows.append((c.county_id, sensor, "pc1", float(pc1[k])))
    for c in counties:
        try:
            lag = evi_vod_lag(c.evi, c.vod, lag_range)
            values = (float(lag.lag_days), lag.peak_correlation)
        except DataError:
            values = (np.nan, np.nan)
        rows.append((c.county_id, "EVI_VOD", "lag_days", values[0]))
        rows.append((c.county_id, "EVI_VOD", "peak_correlation", values[1]))
    return rows


# -- run artifacts ------------------------------------------------------------


def stats_row(r: RunReport) -> tuple:
    s = r.stats
    return (
        r.scenario, r.predictor, r.model, "+".join(map(str, r.years)), r.window_end_month, r.seed,
        r.n_counties, r.n_features, s.me, s.me_std, s.rmse, s.rmse_std, s.r2, s.r2_std, s.n_repetitions,
    )


def write_run(report: RunReport, directory) -> Path:
    d = Path(directory)
    io.write_csv(d / "stats.csv", STATS_COLUMNS, [stats_row(report)])
    io.write_csv(
        d / "counties.csv",
        COUNTY_COLUMNS,
        (
            (c.county_id, c.year, c.survey_yield, c.predicted_yield, c.residual, c.relative_error_pct, c.held_out, c.status)
            for c in report.counties
        ),
    )
    (d / "summary.txt").write_text(run_summary(report))
    return d


def read_run(directory) -> RunReport:
    d = Path(directory)
    rows = io.read_csv(d / "stats.csv", STATS_COLUMNS)
    if len(rows) != 1:
        raise DataError(f"{d / 'stats.csv'}: expected one row, got {len(rows)}")
    r = rows[0]
    f = lambda k: float(r[k])  # noqa: E731
    stats = EvalStats(f("me"), f("rmse"), f("r2"), f("me_std"), f("rmse_std"), f("r2_std"), int(r["n_repetitions"]))
    counties = [
        CountyRow(
            c["county_id"], int(c["year"]), float(c["survey_yield"]), float(c["predicted_yield"]),
            float(c["residual"]), float(c["relative_error_pct"]), int(c["held_out"]), c["status"],
        )
        for c in io.read_csv(d / "counties.csv", COUNTY_COLUMNS)
    ]
    years = tuple(int(y) for y in r["years"].split("+") if y)
    return RunReport(
        r["scenario"], r["predictor"], r["model"], years, int(r["window_end_month"]), int(r["seed"]),
        int(r["n_counties"]), int(r["n_features"]), stats, counties,
    )


def find_runs(paths: Iterable) -> list[Path]:
    """Run directories (those holding a ``stats.csv``) under the given paths, sorted."""
    found = set()
    for p in map(Path, paths):
        if not p.exists():
            raise FileNotFoundError(f"run path not found: {p}")
        if (p / "stats.csv").is_file():
            found.add(p)
        found.update(s.parent for s in p.rglob("stats.csv"))
    return sorted(found)


def write_forecast(points: Sequence[ForecastPoint], path) -> Path:
    def rows():
        for p in points:
            s = p.stats
            vals = (s.me, s.me_std, s.rmse, s.rmse_std, s.r2, s.r2_std) if s else (np.nan,) * 6
            yield (p.scenario, p.predictor, p.model, p.month, p.end_doy, p.n_counties, p.n_features, *vals, p.status)

    return io.write_csv(path, FORECAST_COLUMNS, rows())


# -- tables -------------------------------------------------------------------


def percentile(values, q: float) -> float:
    """Linear-interpolation percentile (NaNs ignored)."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return float("nan")
    return float(np.percentile(v, q))


def comparison_rows(reports: Sequence[RunReport]) -> list[tuple]:
    """One row per run: RMSE scaled by 100, R^2 as mean and std."""
    rows = []
    for r in reports:
        s = r.stats
        rows.append((
            r.scenario, r.predictor, r.model, "+".join(map(str, r.years)), r.n_counties, r.n_features,
            s.me * 100, s.rmse * 100, s.rmse_std * 100, s.r2, s.r2_std,
        ))
    return rows


def format_comparison(reports: Sequence[RunReport]) -> str:
    header = ("scenario", "predictor", "model", "years", "N", "T", "ME(x100)", "RMSE(x100)", "R2")
    body = [
        (sc, pr, mo, yr, str(n), str(t), f"{me:.2f}", f"{rm:.2f} ± {rs:.2f}", f"{r2:.2f} ± {r2s:.2f}")
        for sc, pr, mo, yr, n, t, me, rm, rs, r2, r2s in comparison_rows(reports)
    ]
    return _text_table(header, body)


def residual_table(rows: Sequence[CountyRow], n_bins: int = 4) -> list[tuple]:
    """Residual spread by survey-yield quantile bin, plus an ``all`` row.

    Each row: ``(bin, lo, hi, n, p25, median, p75, mean_relative_error_pct)``
    over counties with an out-of-sample prediction. Bins are closed on the
    left; the last one also includes its upper edge.
    """
    ok = [r for r in rows if r.status == "ok"]
    y = np.array([r.survey_yield for r in ok])
    res = np.array([r.residual for r in ok])
    rel = np.array([r.relative_error_pct for r in ok])
    out = []
    if y.size:
        edges = np.quantile(y, np.linspace(0, 1, n_bins + 1))
        for b in range(n_bins):
            lo, hi = edges[b], edges[b + 1]
            sel = (y >= lo) & ((y < hi) if b < n_bins - 1 else (y <= hi))
            out.append(_residual_row(f"q{b + 1}", lo, hi, res[sel], rel[sel]))
        out.append(_residual_row("all", y.min(), y.max(), res, rel))
    return out


def _residual_row(name, lo, hi, res, rel):
    mean_rel = float(np.mean(rel)) if rel.size else float("nan")
    return (
        name, float(lo), float(hi), int(res.size),
        percentile(res, 25), percentile(res, 50), percentile(res, 75), mean_rel,
    )


RESIDUAL_COLUMNS = ("bin", "survey_lo", "survey_hi", "n", "residual_p25", "residual_median", "residual_p75", "mean_relative_error_pct")


def format_residuals(table: Sequence[tuple]) -> str:
    header = ("bin", "survey yield", "n", "p25(x100)", "median(x100)", "p75(x100)", "rel.err %")
    body = [
        (b, f"{lo:.3f}-{hi:.3f}", str(n), f"{p25 * 100:.2f}", f"{p50 * 100:.2f}", f"{p75 * 100:.2f}", f"{rel:.1f}")
        for b, lo, hi, n, p25, p50, p75, rel in table
    ]
    return _text_table(header, body)


def _text_table(header, body) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *body)]
    line = lambda row: "  ".join(str(x).ljust(w) for x, w in zip(row, widths)).rstrip()  # noqa: E731
    return "\n".join([line(header), line(["-" * w for w in widths]), *map(line, body)]) + "\n"


def run_summary(report: RunReport) -> str:
    s = report.stats
    out = [LIMITATION, ""]
    out.append(f"run: {report.name}  years: {'+'.join(map(str, report.years))}  window ends month {report.window_end_month}")
    out.append(f"started: {report.started}  finished: {report.finished}")
    if report.config_echo:
        out.append("")
        out.extend(f"  {k} = {v}" for k, v in report.config_echo)
    out.append("")
    out.append(format_comparison([report]))
    out.append(
        f"ME {s.me:.4f} ± {s.me_std:.4f}  RMSE {s.rmse:.4f} ± {s.rmse_std:.4f}  "
        f"R2 {s.r2:.4f} ± {s.r2_std:.4f}  over {s.n_repetitions} repetitions (kg m-2)"
    )
    out.append("")
    out.append("residual (survey - predicted) by survey-yield quartile:")
    out.append(format_residuals(residual_table(report.counties)))
    counts = {}
    for c in report.counties:
        counts[c.status] = counts.get(c.status, 0) + 1
    out.append("county status: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    within = [c.relative_error_pct for c in report.counties if c.status == "ok"]
    if within:
        share = 100.0 * np.mean(np.asarray(within) < 20.0)
        out.append(f"counties with relative error below 20%: {share:.1f}%")
    return "\n".join(out) + "\n"


def report_text(reports: Sequence[RunReport], started: str | None = None) -> str:
    out = [LIMITATION, ""]
    if started:
        out.append(f"generated: {started}")
        out.append("")
    out.append("comparison (RMSE in kg m-2 x 100; mean ± std over repetitions):")
    out.append(format_comparison(reports))
    for r in reports:
        out.append(f"residuals for {r.name} ({'+'.join(map(str, r.years))}):")
        out.append(format_residuals(residual_table(r.counties)))
    return "\n".join(out)


def forecast_text(points: Sequence[ForecastPoint], started: str | None = None) -> str:
    out = [LIMITATION, ""]
    if started:
        out.append(f"generated: {started}")
        out.append("")
    header = ("scenario", "predictor", "model", "month", "end_doy", "N", "T", "RMSE(x100)", "R2", "status")
    body = []
    for p in points:
        if p.stats is None:
            rm = r2 = "-"
        else:
            rm = f"{p.stats.rmse * 100:.2f} ± {p.stats.rmse_std * 100:.2f}"
            r2 = f"{p.stats.r2:.2f} ± {p.stats.r2_std:.2f}"
        body.append((p.scenario, p.predictor, p.model, str(p.month), str(p.end_doy), str(p.n_counties), str(p.n_features), rm, r2, p.status))
    out.append(_text_table(header, body))
    return "\n".join(out)
