import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sepkit.corpus import Corpus
from sepkit.fixture import make_fixture_corpus


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory) -> Corpus:
    root = tmp_path_factory.mktemp("corpus")
    return make_fixture_corpus(root, seed=2002, duration_s=200.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
