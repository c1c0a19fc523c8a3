"""
Pytest configuration and shared fixtures.

Provides tiny model dimensions, seeded parameters, small synthetic
datasets and a fast training configuration, so unit tests stay in the
millisecond range and integration tests in seconds.
"""

from pathlib import Path

import numpy as np
import pytest

from src.data.io import write_dataset_dir
from src.data.synthetic import SyntheticConfig, generate_synthetic_bundle, generate_synthetic_corpus
from src.model.params import DecoderParams, ModelDims, ReconstructorParams, Variant
from src.training.config import TrainingConfig
from src.utils.run_context import clear_run_id

FIXTURES_DIR = Path(__file__).parent / "fixtures"
HAND_CORPUS_DIR = FIXTURES_DIR / "hand_corpus"
SCORED_CORPUS_DIR = FIXTURES_DIR / "scored_corpus"

# Synthetic data used by the trainer tests: 8 videos, 6 frame slots
SMALL_SYNTH = SyntheticConfig(videos=8, concepts=3, dim=10, frames=8, noise=0.1, frame_budget=6)


def pytest_collection_modifyitems(config, items):
    """Mark tests by directory so `-m unit` / `-m integration` / `-m contract` select them."""
    for item in items:
        parts = Path(str(item.fspath)).parts
        for marker in ("unit", "integration", "contract"):
            if marker in parts:
                item.add_marker(getattr(pytest.mark, marker))


@pytest.fixture(autouse=True)
def clean_run_id():
    """Ensure no run ID leaks between tests."""
    clear_run_id()
    yield
    clear_run_id()


@pytest.fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_dims():
    """Desk-profile sized model dimensions."""
    return ModelDims(vocab_size=20, embed_size=8, hidden_size=16, feature_dim=10, attention_size=8, frame_budget=6)


@pytest.fixture
def small_dims():
    """Smaller dimensions for oracle comparisons."""
    return ModelDims(vocab_size=7, embed_size=3, hidden_size=4, feature_dim=3, attention_size=2, frame_budget=5)


@pytest.fixture
def decoder_params(tiny_dims):
    """Seeded decoder parameters, scaled up so outputs are far from uniform."""
    params = DecoderParams.init(tiny_dims, seed=3, scale=0.5)
    return params


@pytest.fixture
def global_params(tiny_dims):
    return ReconstructorParams.init(Variant.GLOBAL, tiny_dims, seed=3, scale=0.3)


@pytest.fixture
def local_params(tiny_dims):
    return ReconstructorParams.init(Variant.LOCAL, tiny_dims, seed=3, scale=0.3)


@pytest.fixture
def small_bundle():
    """Eight-video synthetic bundle; validation and test reuse the training videos."""
    return generate_synthetic_bundle(seed=7, config=SMALL_SYNTH)


@pytest.fixture
def small_model_dims(small_bundle):
    """Model dimensions fitting small_bundle."""
    return ModelDims(
        vocab_size=small_bundle.vocabulary.size,
        embed_size=8,
        hidden_size=16,
        feature_dim=small_bundle.feature_dim,
        attention_size=8,
        frame_budget=SMALL_SYNTH.frame_budget
    )


@pytest.fixture
def fast_config():
    """Training configuration for a few quick epochs with greedy validation."""
    return TrainingConfig(batch_size=4, max_epochs=3, patience=20, beam_size=1, seed=0)


@pytest.fixture
def dataset_dir(tmp_path):
    """Synthetic dataset directory matching the desk profile (feature_dim 10)."""
    config = SyntheticConfig(videos=8, concepts=3, dim=10, frames=8, noise=0.1, frame_budget=6)
    corpus = generate_synthetic_corpus(7, config)
    out = tmp_path / "data"
    write_dataset_dir(out, corpus.raw_features, corpus.sentences, corpus.splits,
                      metadata={"seed": 7, "synthetic": config.to_dict()})
    return out


@pytest.fixture
def hand_corpus_dir():
    """Directory of the 10-entry hand corpus."""
    return HAND_CORPUS_DIR


@pytest.fixture
def scored_corpus_dir():
    """Three-video corpus with precomputed metric values in expected.json."""
    return SCORED_CORPUS_DIR
