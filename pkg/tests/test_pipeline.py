from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from schemas.config import EvaluationOptions, RunConfig
from services.dataset import SplitSpec, load_csv, partition, write_csv
from services.pipeline import UpliftRunner, evaluate_scores
from services.profit import CostModel
from services.reporting import ReportStore
from services.synthgen import generate


@pytest.fixture
def data_csv(tmp_path, effect_spec) -> Path:
    return write_csv(generate(effect_spec.model_copy(update={"n": 600})), tmp_path / "data.csv")


def _config(data: Path, **updates) -> RunConfig:
    return RunConfig.model_validate(
        {
            "data": {"input": str(data)},
            "strategies": [{"kind": "ITM", "regressors": [{"id": "ols"}]}],
            "evaluation": {"bins": 5},
            **updates,
        }
    )


def _train_ids(config: RunConfig, out: Path, seed: int) -> np.ndarray:
    train, _, _ = UpliftRunner(config, out, seed=seed).load()
    return train.ids


def test_run_seed_drives_the_split(tmp_path, data_csv):
    config = _config(data_csv)

    first = _train_ids(config, tmp_path / "a", seed=1)
    second = _train_ids(config, tmp_path / "b", seed=2)

    assert not np.array_equal(first, second)
    assert np.array_equal(first, _train_ids(config, tmp_path / "c", seed=1))


def test_explicit_split_seed_overrides_run_seed(tmp_path, data_csv):
    config = _config(data_csv, split={"seed": 5})
    expected, _, _ = partition(load_csv(data_csv), SplitSpec(seed=5))

    assert np.array_equal(_train_ids(config, tmp_path / "a", seed=1), expected.ids)
    assert np.array_equal(_train_ids(config, tmp_path / "b", seed=2), expected.ids)


def test_repeats_rerun_on_fresh_partitions(tmp_path, data_csv):
    out = tmp_path / "out"

    report = UpliftRunner(_config(data_csv, repeats=3), out, seed=4).run()

    assert report.repeats == 3
    assert report.runs[0].split_seed == 4
    assert len({run.split_seed for run in report.runs}) == 3
    values = [run.strategies[0].qini_coefficient for run in report.runs]
    aggregate = report.strategies[0]
    assert aggregate.name == "ITM_one_stage"
    assert aggregate.qini_coefficients == values
    assert aggregate.qini_mean == pytest.approx(np.mean(values))
    assert aggregate.qini_se == pytest.approx(np.std(values, ddof=1) / np.sqrt(3))
    for repeat in range(3):
        assert (out / f"repeat_{repeat}" / "ITM_one_stage" / "qini.json").exists()
    assert len(json.loads((out / "summary.json").read_text(encoding="utf-8"))["runs"]) == 3


def test_single_repeat_keeps_flat_layout(tmp_path, data_csv):
    out = tmp_path / "out"

    report = UpliftRunner(_config(data_csv), out, seed=4).run()

    assert report.strategies[0].qini_se is None
    assert report.strategies[0].qini_mean == report.runs[0].strategies[0].qini_coefficient
    assert (out / "ITM_one_stage" / "model.json").exists()
    assert not (out / "repeat_0").exists()


def test_repeats_need_a_single_input():
    with pytest.raises(ValidationError, match="Repeated partitions"):
        RunConfig.model_validate(
            {
                "data": {"train": "a.csv", "valid": "b.csv", "test": "c.csv"},
                "strategies": [{"kind": "ITM", "regressors": [{"id": "ols"}]}],
                "repeats": 2,
            }
        )


def test_conversion_evaluation_writes_no_profit(tmp_path, qini_fixture):
    scores, data = qini_fixture
    store = ReportStore(tmp_path)
    options = EvaluationOptions(bins=2, metric="qini_conversion")

    qini, profit = evaluate_scores(store, "conv", scores, data, options=options)

    assert qini.outcome == "conversion"
    assert profit is None
    assert not (tmp_path / "profit.csv").exists()


def test_benchmark_ranking_adds_relative_gain(tmp_path, qini_fixture):
    scores, data = qini_fixture
    store = ReportStore(tmp_path)

    _, profit = evaluate_scores(
        store, "model", scores, data, options=EvaluationOptions(bins=2), costs=CostModel(), benchmark=-scores
    )

    frame = pd.read_csv(tmp_path / "profit.csv")
    assert frame["profit"].tolist() == pytest.approx([28.0, 16.0])
    assert frame["benchmark_profit"].tolist() == pytest.approx([-12.0, 16.0])
    assert frame["relative_gain"].tolist() == pytest.approx([40.0 / 12.0, 0.0])
    assert profit is not None
