import numpy as np
import pytest
import torch

from apgnet import BackboneConfig, ErfConfig, ModelConfig
from apgnet.fixtures import generate_fixtures

SMALL_CHANNELS = (8, 16, 24, 32)


def small_model_config(out_channels: int = 16, use_mpd: bool = True,
                       use_apg: bool = True) -> ModelConfig:
    return ModelConfig(
        backbone=BackboneConfig(channels=SMALL_CHANNELS),
        erf=ErfConfig(out_channels=out_channels, dilations=(1, 3)),
        use_mpd=use_mpd,
        use_apg=use_apg,
    )


@pytest.fixture(scope="session")
def fixture_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("fixture_data")
    generate_fixtures(root, count=4, seed=7, size=64, test_count=2)
    return root


@pytest.fixture(autouse=True)
def _seed_everything():
    torch.manual_seed(0)
    np.random.seed(0)
