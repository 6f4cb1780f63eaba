import numpy as np
import pytest

from sanskrit_asr.data import gen_synthetic_corpus


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Small deterministic corpus shared by tests that only need plumbing."""
    root = tmp_path_factory.mktemp("corpus")
    return gen_synthetic_corpus(seed=7, n_utterances=12, out_dir=root)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
