import numpy as np
import pytest

from gexnet.cli import builtin_components
from gexnet.descriptors import build_feature_table
from gexnet.model import ArchitectureConfig, init_parameters


@pytest.fixture
def tiny_arch():
    return ArchitectureConfig(descriptor_dim=8, hidden=16)


@pytest.fixture
def tiny_params(tiny_arch):
    return init_parameters(tiny_arch, seed=42)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_table():
    """Six simple components featurized at dimension 32."""
    return build_feature_table(builtin_components(6), dim=32)
