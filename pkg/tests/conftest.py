from __future__ import annotations

import os

import hypothesis
import numpy as np
import pytest

from services.dataset import UpliftDataset
from services.synthgen import GeneratorSpec, generate
from tests.helpers import make_dataset

np.seterr(all="warn")

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def qini_fixture() -> tuple[np.ndarray, UpliftDataset]:
    """Eight records; scores put {T:10, T:6, C:2, C:0} in the top bin and {T:0, T:2, C:3, C:5} below."""
    treatment = [1, 1, 0, 0, 1, 1, 0, 0]
    revenue = [10.0, 6.0, 2.0, 0.0, 0.0, 2.0, 3.0, 5.0]
    scores = np.array([8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0])
    return scores, make_dataset(np.arange(8.0), treatment, revenue)


@pytest.fixture
def effect_spec() -> GeneratorSpec:
    return GeneratorSpec(
        n=4000,
        p=5,
        a0=-2.0,
        a=[0.8, 0.0, 0.0, 0.0, 0.0],
        b0=0.5,
        b=[0.8, 0.0, 0.0, 0.0, 0.0],
        c=[0.3, 0.3, 0.3, 0.3, 0.3],
        d0=0.2,
        d=[0.3, 0.3, 0.3, 0.3, 0.3],
        seed=7,
    )


@pytest.fixture
def small_data(effect_spec: GeneratorSpec) -> UpliftDataset:
    return generate(effect_spec.model_copy(update={"n": 1500}))
