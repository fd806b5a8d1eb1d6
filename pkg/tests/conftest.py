import sys
from collections import defaultdict
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cropfuse.ingest import CropReport  # noqa: E402
from cropfuse.pipeline import aggregate_counties, build_records  # noqa: E402
from cropfuse.synth import generate_benchmark  # noqa: E402


def survey_map(rows):
    out = defaultdict(list)
    for r in rows:
        out[(r["county_id"], r["year"])].append(
            CropReport(r["crop"], r["yield_value"], r["yield_unit"], r["area_planted_acres"])
        )
    return dict(out)


def prepared(bench):
    counties, reports, assignment = aggregate_counties(bench.pixels, bench.geometries, bench.year)
    records = build_records(survey_map(bench.survey))
    seasons = {s.county_id: s for s in bench.seasons}
    return counties, records, seasons


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_bench():
    return generate_benchmark(n_counties=40, yield_fn="series_functional", seed=7)


@pytest.fixture(scope="session")
def small_prepared(small_bench):
    return prepared(small_bench)
