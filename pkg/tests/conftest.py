import numpy as np
import pytest

from evcoord.central import solve_centralized
from evcoord.scenario import compile_config, compile_problem, compile_topology, load_scenario

from pathlib import Path

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="session")
def small3_model():
    return load_scenario(SCENARIO_DIR / "small3.json")


@pytest.fixture(scope="session")
def small3_problem(small3_model):
    return compile_problem(small3_model)


@pytest.fixture(scope="session")
def small3_topology(small3_model):
    return compile_topology(small3_model)


@pytest.fixture(scope="session")
def small3_config(small3_model):
    return compile_config(small3_model)


@pytest.fixture(scope="session")
def small3_central(small3_problem):
    return solve_centralized(small3_problem, tol=1e-6)


@pytest.fixture(scope="session")
def fleet100_model():
    return load_scenario(SCENARIO_DIR / "fleet100.json")


@pytest.fixture(scope="session")
def fleet100_problem(fleet100_model):
    return compile_problem(fleet100_model)


@pytest.fixture(scope="session")
def fleet100_central(fleet100_problem):
    return solve_centralized(fleet100_problem, tol=1e-6)


def make_rng(seed=0):
    return np.random.default_rng(seed)
