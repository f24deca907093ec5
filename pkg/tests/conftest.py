"""
测试公共夹具
"""

import numpy as np
import pytest

from src.config import scenario_from_data
from src.models import ChannelRealization, PowerConfig, RadioConfig
from src.simulator.channel import cscg


def small_scenario_data(num_pairs: int = 2, rows: int = 2, cols: int = 2, **sections) -> dict:
    """小规模场景（scenario 节点）"""
    data = {
        "seed": 7,
        "geometry": {"ris_rows": rows, "ris_cols": cols},
        "radio": {"num_pairs": num_pairs, "max_groups": num_pairs},
        "protocol": {"num_frames": 3},
        "mtl": {"hidden_sizes": [16], "epochs": 5, "batch_size": 16},
    }
    for name, values in sections.items():
        data.setdefault(name, {}).update(values)
    return data


def random_realization(
    rng: np.random.Generator,
    num_pairs: int,
    num_elements: int,
    direct_scale: float = 1e-6,
    reflect_scale: float = 1e-4
) -> ChannelRealization:
    """随机复高斯信道（不依赖几何）"""
    return ChannelRealization(
        direct=direct_scale * cscg(rng, num_pairs),
        uav_to_ris=reflect_scale * cscg(rng, num_pairs * num_elements).reshape(num_pairs, num_elements),
        ris_to_user=reflect_scale * cscg(rng, num_pairs * num_elements).reshape(num_pairs, num_elements),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def small_loaded():
    """K=2、N=4 的场景"""
    return scenario_from_data(small_scenario_data())


@pytest.fixture
def radio_k2_n4():
    return RadioConfig(num_pairs=2, num_elements=4, max_groups=2)


@pytest.fixture
def power():
    return PowerConfig()
