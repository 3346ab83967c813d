import sys

import pytest

from prisample.model import Feature, node
from prisample.sampler import assign_priorities, build_master
from prisample.synth import SynthConfig, generate


@pytest.fixture
def abc_records():
    # fo doubles as the weight: a=4, b=2, c=1
    return [node("a", 4, 10, 1), node("b", 2, 20, 2), node("c", 1, 30, 3)]


@pytest.fixture
def abc_master(abc_records):
    """Hand-checkable master: draws (0.5, 0.4, 0.25) give priorities (8, 5, 4)."""
    spec = Feature("fo")
    entries = assign_priorities(abc_records, spec, seed=0, draws=[0.5, 0.4, 0.25])
    return build_master(entries, spec, seed=0, records=abc_records)


@pytest.fixture(scope="session")
def default_population():
    """Default synthetic population: 10^5 nodes and 10^5 links."""
    return generate(SynthConfig(n_nodes=100_000, n_links=100_000, seed=0))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
