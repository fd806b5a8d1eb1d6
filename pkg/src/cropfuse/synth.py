"""Synthetic phenology, pixel grids and yields with known ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .ingest import (
    KG_PER_LB,
    M2_PER_ACRE,
    DEFAULT_BUSHEL_WEIGHTS,
    CountyGeometry,
    PixelSeries,
    Series,
)
from .metrics import SeasonWindow

# April 1 - October 30 daily, and the 13 16-day composites starting in April
DAILY_DOY = np.arange(91, 304)
COMPOSITE_DOY = np.arange(97, 290, 16)

LAG_RANGE = (6, 79)
YIELD_FUNCTIONS = ("linear_in_lag", "nonlinear_in_lag", "series_functional")
CROPS = ("corn", "soybean", "wheat")


@dataclass(frozen=True)
class PhenoParams:
    amplitude: float = 0.4
    base: float = 0.1
    sos_doy: float = 140.0
    eos_doy: float = 250.0
    growth_rate: float = 0.1
    senescence_rate: float = 0.1
    vod_lag: float = 21.0
    noise_std: float = 0.0
    gap_prob: float = 0.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        if not self.sos_doy < self.eos_doy:
            raise ValueError("sos must precede eos")
        if not (self.growth_rate > 0 and self.senescence_rate > 0):
            raise ValueError("rates must be positive")
        if not 0 <= self.gap_prob < 1:
            raise ValueError("gap_prob must be in [0, 1)")


def double_logistic(doy, params: PhenoParams):
    doy = np.asarray(doy, dtype=float)
    rise = 1.0 / (1.0 + np.exp(-params.growth_rate * (doy - params.sos_doy)))
    fall = 1.0 / (1.0 + np.exp(-params.senescence_rate * (doy - params.eos_doy)))
    out = params.base + params.amplitude * (rise - fall)
    return np.maximum(out, params.base - 1e-9)


@dataclass
class SensorPair:
    evi: Series
    vod: Series
    vod_quality: np.ndarray


def generate_pair(
    params: PhenoParams,
    rng: np.random.Generator | int | None = None,
    vod_params: PhenoParams | None = None,
    evi_noise_std: float = 0.0,
    evi_doy=COMPOSITE_DOY,
    vod_doy=DAILY_DOY,
) -> SensorPair:
    """Sample an optical composite series and a lagged daily microwave series.

    The microwave curve uses ``vod_params`` (default: ``params``) shifted
    later by ``params.vod_lag`` days, with Gaussian noise of
    ``params.noise_std`` and Bernoulli(``params.gap_prob``) missing samples.
    """
    rng = np.random.default_rng(rng)
    vod_params = vod_params or params
    evi_doy = np.asarray(evi_doy)
    vod_doy = np.asarray(vod_doy)
    evi = double_logistic(evi_doy, params)
    if evi_noise_std > 0:
        evi = evi + rng.normal(0.0, evi_noise_std, evi.size)
    vod = double_logistic(vod_doy - params.vod_lag, vod_params)
    noise = rng.normal(0.0, 1.0, vod.size)
    if params.noise_std > 0:
        vod = vod + params.noise_std * noise
    gaps = rng.random(vod.size) < params.gap_prob
    quality = ~gaps
    vod = np.where(quality, vod, np.nan)
    return SensorPair(Series(evi_doy, evi), Series(vod_doy, vod), quality)


# -- county benchmark ---------------------------------------------------------

# per-crop phenology: (sos, eos, microwave lag in days, logistic rate)
CROP_PHENOLOGY = {
    "corn": (125.0, 240.0, 12.0, 0.14),
    "soybean": (155.0, 265.0, 38.0, 0.07),
    "wheat": (100.0, 190.0, 72.0, 0.10),
}
# median survey yields, kg m^-2
CROP_BASE_YIELD = {"corn": 1.13, "soybean": 0.37, "wheat": 0.41}
REGIONAL_SEASON = (105, 285)


@dataclass
class SynthCounty:
    county_id: str
    year: int
    crop_mix: dict[str, float]
    true_lag: int
    true_yield: float
    crop_yields: dict[str, float]
    evi_condition: float
    vod_condition: float
    evi_params: PhenoParams
    vod_params: PhenoParams


@dataclass
class SynthBenchmark:
    year: int
    yield_fn: str
    counties: list[SynthCounty]
    geometries: list[CountyGeometry]
    pixels: list[PixelSeries]
    survey: list[dict]
    seasons: list[SeasonWindow] = field(default_factory=list)


def _crop_mix(rng: np.random.Generator, wheat_absent_prob: float) -> np.ndarray:
    if rng.random() < wheat_absent_prob:
        corn, soy = rng.dirichlet([2.0, 2.0])
        return np.array([corn, soy, 0.0])
    return rng.dirichlet([1.5, 1.5, 1.0])


def _crop_yields(yield_fn: str, lag: int, mix, evi_cond: float, vod_cond: float) -> dict:
    if yield_fn == "linear_in_lag":
        y = 1.2 - 0.01 * lag
        return {c: y for c in CROPS}
    if yield_fn == "nonlinear_in_lag":
        y = 0.35 + 0.9 * np.exp(-(lag - LAG_RANGE[0]) / 15.0)
        return {c: float(y) for c in CROPS}
    if yield_fn == "series_functional":
        condition = 1.0 + 0.10 * evi_cond + 0.10 * vod_cond
        return {c: CROP_BASE_YIELD[c] * condition for c in CROPS}
    raise ValueError(f"unknown yield function {yield_fn!r}")


def _square(lon0, lat0, size):
    ring = np.array(
        [[lon0, lat0], [lon0 + size, lat0], [lon0 + size, lat0 + size], [lon0, lat0 + size], [lon0, lat0]]
    )
    return [[ring]]


def generate_benchmark(
    n_counties: int = 200,
    yield_fn: str = "series_functional",
    seed: int = 0,
    year: int = 2015,
    pixels_per_county: int = 3,
    yield_noise: float = 0.05,
    vod_noise: float = 0.03,
    evi_noise: float = 0.01,
    gap_prob: float = 0.05,
    wheat_absent_prob: float = 0.45,
) -> SynthBenchmark:
    """Simulate county survey data and the pixel series behind it.

    Each county gets a crop mix; its phenology dates and microwave lag are
    mix-weighted crop values plus jitter, and greenness/water-content
    amplitudes carry independent condition anomalies. ``yield_fn`` picks how
    yield depends on these:

    - ``linear_in_lag``: yield falls linearly with the lag;
    - ``nonlinear_in_lag``: exponential decay in the lag;
    - ``series_functional``: crop yields scale with both condition
      anomalies, and the total follows the crop mix, so only the full
      curves carry all the information.

    Every county draws from its own child of ``SeedSequence([seed, year])``,
    so a county's data does not depend on how many others are generated.
    Counties are 0.5 degree squares on a grid; one extra non-cropland pixel
    is placed in every fifth county.
    """
    if n_counties < 20:
        raise ValueError("n_counties must be at least 20")
    if yield_fn not in YIELD_FUNCTIONS:
        raise ValueError(f"unknown yield function {yield_fn!r}")
    children = np.random.SeedSequence([seed, year]).spawn(n_counties)
    ncol = int(np.ceil(np.sqrt(n_counties)))
    size = 0.5
    counties, geoms, pixels, survey, seasons = [], [], [], [], []
    bushel = {"corn": 56.0, "soybean": 60.0, "wheat": 60.0}

    for i in range(n_counties):
        rng = np.random.default_rng(children[i])
        cid = f"{19000 + i:05d}"
        lon0 = -100.0 + size * (i % ncol)
        lat0 = 38.0 + size * (i // ncol)
        geoms.append(CountyGeometry(cid, _square(lon0, lat0, size)))

        mix = _crop_mix(rng, wheat_absent_prob)
        pheno = np.array([CROP_PHENOLOGY[c] for c in CROPS])
        sos, eos, lag_mean, rate = mix @ pheno
        sos += rng.normal(0.0, 1.5)
        eos += rng.normal(0.0, 1.5)
        lag = int(np.clip(round(lag_mean + rng.uniform(-4.0, 4.0)), *LAG_RANGE))
        evi_cond, vod_cond = np.clip(rng.normal(0.0, 1.0, 2), -2.5, 2.5)

        evi_params = PhenoParams(
            amplitude=0.40 * (1.0 + 0.15 * evi_cond),
            base=0.12,
            sos_doy=sos,
            eos_doy=eos,
            growth_rate=rate,
            senescence_rate=rate,
            vod_lag=lag,
            noise_std=vod_noise,
            gap_prob=gap_prob,
        )
        vod_params = replace(evi_params, amplitude=0.45 * (1.0 + 0.20 * vod_cond), base=0.15)

        crop_y = _crop_yields(yield_fn, lag, mix, evi_cond, vod_cond)
        noisy = {
            c: max(crop_y[c] + rng.normal(0.0, yield_noise * np.mean(list(crop_y.values()))), 0.01)
            for c in CROPS
        }
        total_area = rng.uniform(150_000, 400_000)
        areas = {c: float(total_area * m) for c, m in zip(CROPS, mix)}
        planted = [c for c in CROPS if areas[c] > 0]
        true_yield = sum(noisy[c] * areas[c] for c in planted) / sum(areas[c] for c in planted)

        for c in planted:
            lb_per_acre = noisy[c] * M2_PER_ACRE / KG_PER_LB
            survey.append(
                dict(
                    county_id=cid,
                    year=year,
                    crop=c,
                    yield_value=lb_per_acre / bushel[c],
                    yield_unit="bu_acre",
                    area_planted_acres=areas[c],
                )
            )

        for k in range(pixels_per_county):
            lon = lon0 + size * rng.uniform(0.05, 0.95)
            lat = lat0 + size * rng.uniform(0.05, 0.95)
            pair = generate_pair(evi_params, rng, vod_params, evi_noise_std=evi_noise)
            pid = f"{cid}_{k}"
            pixels.append(
                PixelSeries(pid, lon, lat, pair.evi.doy, pair.evi.values, np.ones(pair.evi.doy.size, bool), True, "EVI")
            )
            pixels.append(
                PixelSeries(pid, lon, lat, pair.vod.doy, pair.vod.values, pair.vod_quality, True, "VOD")
            )
        if i % 5 == 0:
            # a grassland pixel the cropland mask must exclude
            lon = lon0 + size * rng.uniform(0.05, 0.95)
            lat = lat0 + size * rng.uniform(0.05, 0.95)
            pair = generate_pair(replace(evi_params, amplitude=0.2), rng)
            pid = f"{cid}_nc"
            pixels.append(PixelSeries(pid, lon, lat, pair.evi.doy, pair.evi.values, np.ones(pair.evi.doy.size, bool), False, "EVI"))
            pixels.append(PixelSeries(pid, lon, lat, pair.vod.doy, pair.vod.values, pair.vod_quality, False, "VOD"))

        seasons.append(SeasonWindow(cid, *REGIONAL_SEASON))
        counties.append(
            SynthCounty(
                cid,
                year,
                dict(zip(CROPS, mix.tolist())),
                lag,
                float(true_yield),
                {c: noisy[c] for c in planted},
                float(evi_cond),
                float(vod_cond),
                evi_params,
                vod_params,
            )
        )
    return SynthBenchmark(year, yield_fn, counties, geoms, pixels, survey, seasons)
