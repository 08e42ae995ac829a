import pytest

from iclink.harness import REFERENCE_PAYLOAD, build_channel, default_scenario_path, load_scenario
from iclink.magnetics import CoilGeometry, CoilPlacement, build_network

REF_BITS = tuple(int(c) for c in REFERENCE_PAYLOAD)


@pytest.fixture(scope="session")
def ref_geometry():
    return CoilGeometry()


@pytest.fixture(scope="session")
def pair_network(ref_geometry):
    """Default stacked TX/RX pair: reference coils 106 um apart."""
    g = ref_geometry
    return build_network([(g, CoilPlacement()), (g, CoilPlacement(0, 0, 106))])


@pytest.fixture(scope="session")
def default_scenario():
    return load_scenario(default_scenario_path())


@pytest.fixture(scope="session")
def default_network(default_scenario):
    return build_channel(default_scenario)


@pytest.fixture(scope="session")
def pair_scenario():
    return load_scenario({"channel": {"array": {"channels": 1}}, "codes": ["nrz", "biphase", "ternary"]})


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion and fail the test if needed."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} :: {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
