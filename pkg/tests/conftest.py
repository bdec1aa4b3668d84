"""Shared fixtures: small deterministic corpora reused across test modules."""

import numpy as np
import pytest
from hypothesis import settings

from phoneboost import ingest, pipeline

# sandbox runners can be slow; property tests should not fail on timing
settings.register_profile("suite", deadline=None)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def default_spec() -> ingest.SynthSpec:
    return ingest.default_synth_spec(seed=11)


@pytest.fixture(scope="session")
def small_corpus(default_spec):
    """4 classes x 16 clips; enough for separable pair training."""
    return ingest.generate_corpus(default_spec, 16)


@pytest.fixture(scope="session")
def two_class_spec() -> ingest.SynthSpec:
    base = ingest.default_synth_spec(seed=7)
    return ingest.SynthSpec(
        classes={"aa": base.classes["aa"], "iy": base.classes["iy"]},
        sample_rate=base.sample_rate, seed=7, context=base.context)


@pytest.fixture(scope="session")
def two_class_corpus(two_class_spec):
    return ingest.generate_corpus(two_class_spec, 24)


@pytest.fixture(scope="session")
def small_featurizer(small_corpus) -> pipeline.Featurizer:
    """Default warp/haar pipeline with statistics from small_corpus."""
    config = pipeline.PipelineConfig(rounds=8)
    return pipeline.Featurizer(config).with_stats(small_corpus)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20260819)
