"""
Tests for corruption generation, metrics, the median baseline and the
benchmark driver.
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from ahe.errors import InvalidInputError
from ahe.services.bench import (
    SYNTHETIC_KINDS,
    CorruptionPattern,
    CorruptionSpec,
    corrupt,
    median_filter,
    metrics,
    run_benchmark,
    synthetic_image,
)
from ahe.services.grid import CorruptionMask, PeriodicImage, check_consistent, ingest


def test_line_corruption_hits_target_fraction() -> None:
    truth = synthetic_image("rings", 64, seed=0)
    f, mask = corrupt(truth, CorruptionSpec(target_fraction=0.37, line_width=3, rng_seed=1))
    assert 0.35 <= mask.bad_fraction <= 0.39
    check_consistent(f, mask)
    assert np.array_equal(f.values[mask.good], truth.values[mask.good])


def test_random_pixel_corruption_is_exact() -> None:
    truth = synthetic_image("checker", 32, seed=0)
    spec = CorruptionSpec(pattern=CorruptionPattern.RANDOM_PIXELS, target_fraction=0.5, rng_seed=3)
    _, mask = corrupt(truth, spec)
    assert mask.bad_count == 512


def test_zero_fraction_leaves_image_alone() -> None:
    truth = synthetic_image("stripes", 16, seed=2)
    f, mask = corrupt(truth, CorruptionSpec(target_fraction=0.0))
    assert f is truth
    assert mask.bad_count == 0


def test_corruption_is_seeded() -> None:
    truth = synthetic_image("disks", 32, seed=4)
    spec = CorruptionSpec(target_fraction=0.6, line_width=2, rng_seed=9)
    _, m1 = corrupt(truth, spec)
    _, m2 = corrupt(truth, spec)
    _, m3 = corrupt(truth, spec.model_copy(update={"rng_seed": 10}))
    assert np.array_equal(m1.good, m2.good)
    assert not np.array_equal(m1.good, m3.good)


def test_spec_validation() -> None:
    with pytest.raises(ValidationError):
        CorruptionSpec(target_fraction=1.0)
    with pytest.raises(ValidationError):
        CorruptionSpec(line_width=0)


def test_metrics_examples() -> None:
    truth = PeriodicImage(np.full((8, 8), 0.5))
    mask = CorruptionMask.all_good(8)
    same = metrics(truth, truth, mask)
    assert same.mse == 0 and math.isinf(same.psnr_all) and math.isinf(same.psnr_bad)

    off = metrics(PeriodicImage(np.full((8, 8), 0.6)), truth, mask)
    assert off.mse == pytest.approx(0.01)
    assert off.psnr_all == pytest.approx(20.0)


def test_metrics_match_double_loop() -> None:
    rng = np.random.default_rng(5)
    a, b = PeriodicImage(rng.uniform(size=(8, 8))), PeriodicImage(rng.uniform(size=(8, 8)))
    good = rng.uniform(size=(8, 8)) > 0.5
    mask = CorruptionMask(good)
    total, bad_total, bad = 0.0, 0.0, 0
    for k in range(8):
        for l in range(8):
            e = (a[k, l] - b[k, l]) ** 2
            total += e
            if not good[k, l]:
                bad_total += e
                bad += 1
    report = metrics(a, b, mask)
    assert report.mse == pytest.approx(total / 64, abs=1e-12)
    assert report.mse_bad == pytest.approx(bad_total / bad, abs=1e-12)
    assert metrics(b, a, mask).mse == report.mse


def test_metrics_records() -> None:
    report = metrics(PeriodicImage(np.full((2, 2), 0.6)), PeriodicImage(np.full((2, 2), 0.5)),
                     CorruptionMask.all_good(2), method="average", seconds=1.5)
    records = report.as_records()
    assert [r.split("=")[0] for r in records] == ["method", "mse", "psnr_all", "psnr_bad", "seconds"]
    assert records[0] == "method=average"
    assert records[3] == "psnr_bad=inf"


def _median_case(values: dict) -> tuple:
    img = np.zeros((4, 4))
    good = np.zeros((4, 4), dtype=bool)
    for at, v in values.items():
        img[at] = v
        good[at] = True
    return ingest(img, CorruptionMask(good))


def test_median_of_three() -> None:
    f, mask = _median_case({(0, 0): 0.2, (0, 1): 0.9, (0, 2): 0.4})
    assert median_filter(f, mask)[1, 1] == 0.4


def test_median_even_count_takes_lower_middle() -> None:
    f, mask = _median_case({(0, 0): 0.2, (0, 1): 0.4})
    assert median_filter(f, mask)[1, 0] == 0.2


def test_median_of_constant_with_holes() -> None:
    rng = np.random.default_rng(6)
    good = rng.uniform(size=(12, 12)) > 0.6
    f, mask = ingest(np.full((12, 12), 0.35), CorruptionMask(good))
    out = median_filter(f, mask)
    assert np.all(out.values == 0.35)


@pytest.mark.parametrize("kind", SYNTHETIC_KINDS)
def test_synthetic_images(kind: str) -> None:
    img = synthetic_image(kind, 32, seed=1)
    assert img.size == 32
    assert img.values.min() >= 0.1 and img.values.max() <= 0.9
    assert np.array_equal(img.values, synthetic_image(kind, 32, seed=1).values)


def test_synthetic_image_rejects_unknown_kind() -> None:
    with pytest.raises(InvalidInputError):
        synthetic_image("spirals", 32)


def test_benchmark_table_structure() -> None:
    truth = synthetic_image("stripes", 24, seed=0)
    table = run_benchmark(truth, CorruptionSpec(target_fraction=0.5, rng_seed=2), ["average", "median"])
    assert list(table.columns) == ["method", "mse", "psnr_all", "psnr_bad", "seconds"]
    assert list(table["method"]) == ["average", "median"]
    assert np.all(np.isfinite(table["psnr_bad"]))
    assert np.all(table["seconds"] >= 0)


def test_benchmark_with_ahe_at_high_corruption() -> None:
    truth = synthetic_image("gradient", 24, seed=0)
    spec = CorruptionSpec(target_fraction=0.85, rng_seed=4)
    table = run_benchmark(truth, spec, ["average", "median", "ahe"], {"layers": 6, "substeps": 4})
    assert len(table) == 3
    assert np.all(np.isfinite(table["psnr_bad"]))


def test_benchmark_without_corruption_reports_infinity() -> None:
    truth = synthetic_image("checker", 16, seed=0)
    table = run_benchmark(truth, CorruptionSpec(target_fraction=0.0), ["average", "median", "ahe"])
    assert np.all(np.isinf(table["psnr_all"]))
    assert np.all(np.isinf(table["psnr_bad"]))


def test_benchmark_rejects_unknown_method() -> None:
    with pytest.raises(InvalidInputError):
        run_benchmark(synthetic_image("rings", 16), CorruptionSpec(), ["magic"])


@pytest.mark.slow
def test_ahe_beats_every_other_method_on_the_heavy_suite() -> None:
    methods = ["average", "median", "varcoef-dr", "ahe"]
    scores = {method: [] for method in methods}
    for seed, kind in enumerate(SYNTHETIC_KINDS):
        truth = synthetic_image(kind, 128, seed=seed)
        table = run_benchmark(truth, CorruptionSpec(target_fraction=0.85, rng_seed=seed), methods)
        for row in table.itertuples():
            scores[row.method].append(row.psnr_bad)
        assert table.set_index("method").loc["ahe", "seconds"] < 60

    medians = {method: float(np.median(values)) for method, values in scores.items()}
    for method in ("average", "median", "varcoef-dr"):
        assert medians["ahe"] > medians[method], medians
