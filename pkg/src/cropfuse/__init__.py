"""Fusion of optical and microwave vegetation series for county crop yield estimation."""

from .errors import ConfigError, CropfuseError, DataError
from .ingest import (
    CountyGeometry,
    CountyRecord,
    FeatureSet,
    FeatureVector,
    PixelSeries,
    Series,
    UnitTable,
    assign_pixels_to_counties,
    convert_yield,
    county_mean_series,
    pool_years,
    stack_features,
    weighted_county_yield,
)
from .metrics import (
    LagResult,
    MetricBattery,
    Pc1Projection,
    SeasonWindow,
    evi_vod_lag,
    fit_pc1,
    metric_battery,
    metric_max,
    metric_small_integral,
    project_pc1,
)
from .preprocess import (
    ArModel,
    ScreeningReport,
    fit_ar,
    gapfill,
    moving_average,
    screen_dynamic_range,
    screen_frozen,
    select_ar_order,
)
from .regress import (
    CvConfig,
    EvalStats,
    KrrModel,
    RlrModel,
    evaluate,
    fit_krr,
    fit_rlr,
    predict,
    rbf_kernel,
    run_cv_experiment,
    select_hyperparams,
)

__version__ = "0.1.0"
