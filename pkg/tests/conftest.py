import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from radialhelm import Branch, Bus, NetworkCase
from radialhelm.cli import load_case

TWO_BUS_Z = 0.01 + 0.01j
TWO_BUS_S = 1 + 0.5j


def make_two_bus(load=TWO_BUS_S, z=TWO_BUS_Z, v0=1.0 + 0j, **bus_kwargs):
    return NetworkCase(
        name="twobus", base_power=1.0, base_voltage=1.0, slack_id=0,
        slack_v0=v0,
        buses=[Bus(id=0), Bus(id=1, load_P=load, **bus_kwargs)],
        branches=[Branch(from_node=0, to_node=1, series_impedance=z)],
    )


def make_path_case(impedances, loads=None, v0=1.0 + 0j):
    """Chain 0-1-2-... with given branch impedances."""
    n = len(impedances)
    loads = loads or [0j] * n
    buses = [Bus(id=0)] + [Bus(id=k + 1, load_P=loads[k]) for k in range(n)]
    branches = [Branch(from_node=k, to_node=k + 1, series_impedance=impedances[k])
                for k in range(n)]
    return NetworkCase(name="path", base_power=1.0, base_voltage=1.0,
                       slack_id=0, slack_v0=v0, buses=buses, branches=branches)


@pytest.fixture(scope="session")
def bundled():
    """Bundled cases parsed once per session, keyed by name."""
    names = ("case18", "case33", "case69", "case141", "feeder123zip")
    return {name: load_case(name)[0] for name in names}


@pytest.fixture(scope="session")
def radial_names():
    return ("case18", "case33", "case69", "case141", "feeder123zip")


def load_with_scenario(name, scenario):
    return load_case(name, scenario_path=scenario)[0]
