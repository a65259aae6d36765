"""
tests/conftest.py
Fixtures partagées : deck, configurations de campagne, rendu de gouttes
"""

import copy
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT))

from core.formulation import load_deck
from core.render import RenderParams, render_droplet
from core.utils import load_config, read_json

CONFIGS = ROOT / "configs"


@pytest.fixture(scope="session")
def settings():
    return load_config(ROOT / "config.yaml")


@pytest.fixture
def deck():
    # StageMap mutable : un deck neuf par test
    return load_deck(CONFIGS / "deck.json")


@pytest.fixture(scope="session")
def _ethanol_config():
    return read_json(CONFIGS / "ethanol_campaign.json")


@pytest.fixture(scope="session")
def _surfactant_config():
    return read_json(CONFIGS / "surfactant_campaign.json")


@pytest.fixture
def ethanol_config(_ethanol_config):
    return copy.deepcopy(_ethanol_config)


@pytest.fixture
def surfactant_config(_surfactant_config):
    return copy.deepcopy(_surfactant_config)


@pytest.fixture
def sweep_config():
    return read_json(CONFIGS / "sds99_sweep.json")


@pytest.fixture
def render_drop():
    """Fabrique : render_drop(theta, seed=0, **RenderParams) -> image 8 bits"""
    def _render(theta, seed=0, **changes):
        params = RenderParams().replace(**changes)
        return render_droplet(theta, params, np.random.default_rng(seed))
    return _render


@pytest.fixture
def run_dir(tmp_path):
    return tmp_path / "run"
