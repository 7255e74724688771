import numpy as np
import pytest

from rwenas.config import RweConfig, ScaleConfig
from rwenas.dataio import synth_blobs
from rwenas.genome import Genome, SearchSpaceSpec

# Every node reads (cell input 0, previous node or input 1) through a 3x3 separable conv.
MICRO_TEXT = 'micro:' + ','.join(['0,1,1,1', '0,2,2,3', '1,5,3,6', '0,4,4,7'] * 2)
MACRO_TEXT = 'macro:' + ','.join(['1'] * 15 + ['0'] * 15 + ['1', '0'] * 7 + ['1'])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def micro_spec():
    return SearchSpaceSpec.micro()


@pytest.fixture
def compat_spec():
    return SearchSpaceSpec.micro(compat_mode=True)


@pytest.fixture
def macro_spec():
    return SearchSpaceSpec.macro()


@pytest.fixture
def micro_genome():
    return Genome.from_string(MICRO_TEXT)


@pytest.fixture
def macro_genome():
    return Genome.from_string(MACRO_TEXT)


@pytest.fixture
def tiny_scale():
    """Small enough for the numpy forward pass to run in a unit test."""
    return ScaleConfig(init_channels=4, layers=3, resolution=8, num_classes=4, phase_channels=[4, 8, 16])


@pytest.fixture(scope='session')
def tiny_data():
    return synth_blobs(classes=4, n=240, resolution=8, seed=3)


@pytest.fixture
def tiny_rwe():
    return RweConfig(epochs=20, batch_size=64, folds=2, norm_batch=64, loader_batch=32)
