import numpy as np
import pytest

from tzhash.models.params import ParamStore
from tzhash.models.vocabulary import ClassVocabulary
from tzhash.schemas.config import SynthSpec, TrainConfig
from tzhash.services import synthdata
from tzhash.services.fine_miner import SoftLabelTable


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_spec() -> SynthSpec:
    return SynthSpec(
        n_seen=3,
        n_novel=2,
        d_in=4,
        word_dim=6,
        sigma_between=3.0,
        sigma_within=0.5,
        n_source=24,
        n_unlabeled=32,
        n_queries=8,
        seed=7,
    )


@pytest.fixture
def tiny_dataset(tiny_spec):
    return synthdata.generate(tiny_spec)


@pytest.fixture
def tiny_config() -> TrainConfig:
    return TrainConfig(
        source_batch=6,
        unlabeled_batch=8,
        groups=4,
        code_bits=6,
        backbone_widths=[5, 4],
        lr=0.05,
        epochs=2,
        seed=3,
    )


@pytest.fixture
def table(tiny_dataset) -> SoftLabelTable:
    return SoftLabelTable(tiny_dataset.vocab)


@pytest.fixture
def tiny_batches(tiny_dataset, tiny_config):
    """First source and unlabeled batch of the tiny dataset."""
    src = tiny_dataset.source.take(np.arange(tiny_config.source_batch))
    unl = tiny_dataset.unlabeled.take(np.arange(tiny_config.unlabeled_batch))
    return src, unl


@pytest.fixture
def small_vocab() -> ClassVocabulary:
    return ClassVocabulary(
        names=["cat", "dog", "wolf", "lion"],
        vectors=np.array([
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.6, 0.8, 0.0],
            [0.2, 0.0, 0.98],
        ]),
        novel_mask=np.array([False, False, True, True]),
    )


@pytest.fixture
def identity_backbone() -> ParamStore:
    """One 2→2 identity layer with zero bias."""
    params = ParamStore()
    params.add("backbone.0.W", np.eye(2))
    params.add("backbone.0.b", np.zeros(2))
    return params

