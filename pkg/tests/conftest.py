import numpy as np
import pytest

from shellkoop.orbits import ShellConfig
from shellkoop.topology import LinkBudget
from shellkoop.traffic import TrafficConfig, generate_dataset

DESK_SHELL = ShellConfig(550.0, 53.0, 8, 12, phasing=1)
# 12 nodes; high enough that the sparse ring stays within line of sight
TOY_SHELL = ShellConfig(3000.0, 53.0, 3, 4, phasing=1)


@pytest.fixture(scope="session")
def desk_shell():
    return DESK_SHELL


@pytest.fixture(scope="session")
def toy_shell():
    return TOY_SHELL


@pytest.fixture(scope="session")
def budget():
    return LinkBudget()


@pytest.fixture(scope="session")
def toy_dataset(toy_shell, budget):
    """Small deterministic dataset for fast model tests."""
    cfg = TrafficConfig(seed=7)
    return generate_dataset(toy_shell, cfg, budget, 40, 0.8)


@pytest.fixture(scope="session")
def desk_dataset(desk_shell, budget):
    """The default desk-scale dataset (600 steps, 80/20 split)."""
    cfg = TrafficConfig(seed=0)
    return generate_dataset(desk_shell, cfg, budget, 600, 0.8)
