from __future__ import annotations

import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError

from services.dataset import (
    CsvSchema,
    CustomerRecord,
    DatasetError,
    SplitSpec,
    UpliftDataset,
    group_shares,
    load_csv,
    load_score_columns,
    partition,
    repeat_seed,
    summarize,
    summary_from_counts,
    write_csv,
)
from tests.helpers import make_dataset


def truncated_percent(rate: float) -> float:
    return math.floor(rate * 10000) / 100


def test_published_campaign_rates_match_printed_values():
    summary = summary_from_counts(2_210_190, 162_570, 0.0, 741_123, 53_340, 0.0)

    assert truncated_percent(summary.treatment.conversion_rate) == 7.35
    assert truncated_percent(summary.control.conversion_rate) == 7.19
    assert round(100 * summary.conversion_uplift, 2) == 0.16


def test_published_holdout_rates_match_printed_values():
    summary = summary_from_counts(111_729, 17_890, 0.0, 37_570, 5_745, 0.0)

    assert truncated_percent(summary.treatment.conversion_rate) == 16.01
    assert truncated_percent(summary.control.conversion_rate) == 15.29
    assert round(100 * summary.conversion_uplift, 2) == 0.72


def test_summarize_counts_groups_and_revenue():
    data = make_dataset(np.zeros(5), [1, 1, 0, 0, 0], [10.0, 0.0, 4.0, 0.0, 2.0])

    summary = summarize(data)

    assert summary.sessions == 5
    assert summary.treatment.purchasers == 1
    assert summary.control.purchasers == 2
    assert summary.revenue_total == pytest.approx(16.0)
    assert summary.treatment_share == pytest.approx(0.4)
    assert summary.revenue_uplift == pytest.approx(5.0 - 2.0)


def test_summary_rejects_empty_group():
    with pytest.raises(DatasetError, match="empty"):
        summary_from_counts(0, 0, 0.0, 10, 1, 5.0)


@pytest.mark.parametrize(
    ("treatment", "conversion", "revenue", "message"),
    [
        ([1, 0, 2], [0, 0, 0], [0.0, 0.0, 0.0], "Treatment"),
        ([1, 0, 1], [0, 0.5, 0], [0.0, 0.0, 0.0], "Conversion"),
        ([1, 0, 1], [0, 0, 0], [0.0, 3.0, 0.0], "without conversion"),
        ([1, 0, 1], [1, 0, 0], [-1.0, 0.0, 0.0], "non-negative"),
        ([1, 1, 1], [0, 0, 0], [0.0, 0.0, 0.0], "Control group empty"),
        ([0, 0, 0], [0, 0, 0], [0.0, 0.0, 0.0], "Treatment group empty"),
    ],
)
def test_dataset_validation(treatment, conversion, revenue, message):
    with pytest.raises(DatasetError, match=message):
        UpliftDataset(
            covariates=np.zeros((3, 1)),
            treatment=np.asarray(treatment),
            conversion=np.asarray(conversion),
            revenue=np.asarray(revenue),
            feature_names=("x1",),
        )


def test_dataset_is_read_only():
    data = make_dataset(np.arange(4.0), [1, 0, 1, 0], [1.0, 0.0, 0.0, 2.0])

    with pytest.raises(ValueError):
        data.revenue[0] = 5.0


def test_from_records_and_record_access():
    records = [
        CustomerRecord(covariates=(1.0, 2.0), treatment=1, conversion=1, revenue=3.5),
        CustomerRecord(covariates=(0.0, -1.0), treatment=0, conversion=0, revenue=0.0),
    ]

    data = UpliftDataset.from_records(records, ("age", "visits"))

    assert data.n == 2
    assert data.p == 2
    assert list(data) == records


def test_subset_and_concat_keep_source_ids():
    data = make_dataset(np.arange(6.0), [1, 0, 1, 0, 1, 0], np.zeros(6))

    left = data.subset([0, 1, 2])
    right = data.subset([5, 4, 3])
    joined = left.concat(right)

    assert joined.ids.tolist() == [0, 1, 2, 5, 4, 3]
    assert joined.covariates[:, 0].tolist() == [0.0, 1.0, 2.0, 5.0, 4.0, 3.0]


def test_split_spec_fractions_must_sum_to_one():
    with pytest.raises(ValidationError):
        SplitSpec(train_frac=0.5, valid_frac=0.3, test_frac=0.3)


def test_partition_sizes_and_disjointness():
    rng = np.random.default_rng(3)
    data = make_dataset(rng.normal(size=1001), rng.integers(0, 2, 1001), np.zeros(1001))

    train, valid, test = partition(data, SplitSpec(seed=11))

    assert (valid.n, test.n) == (300, 300)
    assert train.n == 401
    ids = np.concatenate([train.ids, valid.ids, test.ids])
    assert np.array_equal(np.sort(ids), np.arange(1001))


def test_partition_is_deterministic_per_seed():
    rng = np.random.default_rng(4)
    data = make_dataset(rng.normal(size=200), rng.integers(0, 2, 200), np.zeros(200))

    first = partition(data, SplitSpec(seed=1))
    second = partition(data, SplitSpec(seed=1))
    other = partition(data, SplitSpec(seed=2))

    assert all(np.array_equal(a.ids, b.ids) for a, b in zip(first, second))
    assert not np.array_equal(first[0].ids, other[0].ids)


def test_partition_rejects_split_without_both_groups():
    data = make_dataset(np.arange(4.0), [1, 0, 0, 0], np.zeros(4))

    with pytest.raises(DatasetError, match="re-seed"):
        partition(data, SplitSpec(train_frac=0.5, valid_frac=0.25, test_frac=0.25))


@given(st.integers(min_value=10, max_value=400), st.integers(min_value=0, max_value=2**31 - 1))
def test_partition_covers_every_record(n, seed):
    treatment = np.arange(n) % 2
    data = make_dataset(np.arange(float(n)), treatment, np.zeros(n))
    try:
        parts = partition(data, SplitSpec(seed=seed))
    except DatasetError:
        return
    assert sum(part.n for part in parts) == n


def test_load_csv_reads_schema_and_skips_text_columns(tmp_path, caplog):
    path = tmp_path / "sessions.csv"
    pd.DataFrame(
        {
            "visits": [1, 2, 3, 4],
            "channel": ["web", "app", "web", "app"],
            "treatment": [1, 0, 1, 0],
            "conversion": [1, 0, 0, 1],
            "revenue": [12.5, 0.0, 0.0, 3.0],
            "true_uplift": [0.1, 0.2, 0.3, 0.4],
        }
    ).to_csv(path, index=False)

    data = load_csv(path)

    assert data.feature_names == ("visits",)
    assert data.revenue.tolist() == [12.5, 0.0, 0.0, 3.0]
    assert "channel" in caplog.text


def test_load_csv_reports_row_number(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,treatment,conversion,revenue\n1,1,1,2.0\n2,0,0,5.0\n", encoding="utf-8")

    with pytest.raises(DatasetError, match="Row 2"):
        load_csv(path)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DatasetError, match="not found"):
        load_csv(tmp_path / "absent.csv")


def test_load_csv_with_renamed_columns(tmp_path):
    path = tmp_path / "renamed.csv"
    path.write_text("f,coupon,bought,spend\n0.5,1,1,9.0\n1.5,0,0,0.0\n", encoding="utf-8")

    data = load_csv(path, CsvSchema(treatment="coupon", conversion="bought", revenue="spend"))

    assert data.treatment.tolist() == [1, 0]
    assert data.feature_names == ("f",)


def test_write_csv_then_load_preserves_columns(tmp_path):
    data = make_dataset([[0.25, 1.0], [0.5, 2.0], [0.75, 3.0]], [1, 0, 1], [1.5, 0.0, 0.0])

    path = write_csv(data, tmp_path / "out" / "data.csv", extra_columns={"z_rw": np.ones(3)})
    loaded = load_csv(path)

    assert loaded.feature_names == data.feature_names
    assert np.array_equal(loaded.covariates, data.covariates)


def test_score_columns_are_not_covariates(tmp_path):
    path = tmp_path / "scored.csv"
    path.write_text(
        "x1,treatment,conversion,revenue,score,runner_up\n0.5,1,1,4.0,0.9,2\n1.5,0,0,0.0,0.1,3\n", encoding="utf-8"
    )

    data, scores = load_score_columns(path, ["score", "runner_up"])

    assert data.feature_names == ("x1",)
    assert scores["score"].tolist() == [0.9, 0.1]
    assert scores["runner_up"].tolist() == [2.0, 3.0]
    with pytest.raises(DatasetError, match="missing_column"):
        load_score_columns(path, ["missing_column"])


@pytest.mark.parametrize(
    ("treatment", "q_t", "q_c"),
    [
        ([1, 1, 1, 0], 0.75, 0.25),
        ([1] * 6 + [0] * 4, 0.6, 0.4),
    ],
)
def test_group_shares(treatment, q_t, q_c):
    shares = group_shares(make_dataset(np.zeros(len(treatment)), treatment, np.zeros(len(treatment))))

    assert (shares.q_t, shares.q_c) == pytest.approx((q_t, q_c))
    assert shares.q_t + shares.q_c == pytest.approx(1.0)


def test_unset_split_seed_behaves_as_zero():
    data = make_dataset(np.arange(60.0), [0, 1] * 30, np.zeros(60))

    unset = partition(data, SplitSpec())
    zero = partition(data, SplitSpec(seed=0))

    assert all(np.array_equal(a.ids, b.ids) for a, b in zip(unset, zero, strict=True))


def test_repeat_seeds_are_stable_and_distinct():
    seeds = [repeat_seed(7, repeat) for repeat in range(10)]

    assert seeds[0] == 7
    assert len(set(seeds)) == 10
    assert seeds == [repeat_seed(7, repeat) for repeat in range(10)]
    with pytest.raises(DatasetError):
        repeat_seed(7, -1)
