"""Shared builders for the test suite."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ticnn.arch import build_toy_variant
from ticnn.nn import Network, init_parameters
from ticnn.ops import PoolSpec


def make_toy_net(
    variant="final",
    channels=(4,),
    pool=None,
    input_size=12,
    num_classes=3,
    pad_mode="circular",
    seed=0,
):
    """Small network + freshly initialized parameters, pool-free by default."""
    spec = build_toy_variant(
        variant,
        channels=channels,
        pool=pool,
        input_size=input_size,
        num_classes=num_classes,
        pad_mode=pad_mode,
    )
    return spec, Network(spec), init_parameters(spec, seed=seed)


@pytest.fixture
def pooled_toy():
    """Two-stage net with 2x2 pooling, the default experiment shape."""
    return make_toy_net(channels=(4, 6), pool=PoolSpec(2), input_size=12, num_classes=4)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
