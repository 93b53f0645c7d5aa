"""
Shared fixtures: tiny codecs, classifiers and corpora that keep the suite fast
"""

import os
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

os.environ.setdefault("ADVSTR_PROGRESS", "false")

from src.config import AutoencoderConfig, ClassifierConfig, reset_settings  # noqa: E402
from src.data.corpus import CorpusSpec, generate  # noqa: E402
from src.data.dataset import Bag  # noqa: E402
from src.models.autoencoder import StringAutoencoder  # noqa: E402
from src.models.classifier import build_classifier  # noqa: E402

SAMPLE_PATHS = [
    "C:\\Windows\\System32\\kernel32.dll",
    "C:\\Program Files\\Adobe\\reader.exe",
    "C:\\Users\\alice\\AppData\\Local\\Temp\\x7Qa.exe",
    "C:\\Windows\\Fonts\\arial.ttf",
    "C:\\Users\\bob\\Desktop\\notes.txt",
    "C:\\ProgramData\\svc\\upd.scr",
]


@pytest.fixture(autouse=True)
def _fresh_settings():
    reset_settings()
    yield
    reset_settings()


def tiny_codec_config(**overrides) -> AutoencoderConfig:
    values = dict(embedding_size=6, hidden_size=8, conv_channels=8, kernel_width=5, max_length=64,
                  epochs=1, batch_size=8, validation_fraction=0.0, seed=3)
    values.update(overrides)
    return AutoencoderConfig(**values)


def tiny_classifier_config(**overrides) -> ClassifierConfig:
    values = dict(heads=2, hidden_size=6, head_hidden=10, epochs=2, batch_size=4, seed=5)
    values.update(overrides)
    return ClassifierConfig(**values)


@pytest.fixture
def codec() -> StringAutoencoder:
    return StringAutoencoder(tiny_codec_config())


@pytest.fixture
def classifier(codec):
    return build_classifier(tiny_classifier_config(), codec.latent_size)


@pytest.fixture
def small_corpus():
    spec = CorpusSpec(seed=11, bag_count=24, bag_size_min=2, bag_size_max=4, timestamp_max=1000,
                      drift_timestamp=800)
    return generate(spec).bags


@pytest.fixture
def sample_bags():
    return [Bag(label=i % 2, timestamp=i, paths=SAMPLE_PATHS[i % 3:i % 3 + 2 + i % 2]) for i in range(6)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
