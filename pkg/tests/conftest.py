import sys
from pathlib import Path

import pytest

import etformation as et
from etformation.engine import with_horizon

sys.path.insert(0, str(Path(__file__).resolve().parent))

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="session")
def single_config():
    return et.load_scenario(SCENARIO_DIR / "scenario_single.cfg")


@pytest.fixture(scope="session")
def double_config():
    return et.load_scenario(SCENARIO_DIR / "scenario_double.cfg")


@pytest.fixture(scope="session")
def triangle_spec(single_config):
    return single_config.formation


@pytest.fixture(scope="session")
def single_run(single_config):
    return et.run(single_config)


@pytest.fixture(scope="session")
def double_run(double_config):
    return et.run(double_config)


@pytest.fixture(scope="session")
def double_run_t20(double_config):
    return et.run(with_horizon(double_config, 20.0))
