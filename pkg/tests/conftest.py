import numpy as np
import pytest

from fedrem import default_scenario
from fedrem.interference import AccessPoint, TrafficModel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def scenario():
    return default_scenario()


def single_ap_scenario(distance=20.0, tx_power_dbm=20.0, always_on=False, n_locations=1):
    """One AP on channel 0 at ``distance`` m from the first location."""
    # a vanishing idle rate with a huge burst keeps the AP busy for the whole capture
    traffic = {"idle_rate_lambda": 1e6, "busy_duration": 1e9} if always_on else {}
    return default_scenario(
        route={"length_m": 30.0 * n_locations, "n_locations": n_locations},
        access_points=[{"position": [15.0, distance], "channel_index": 0, "tx_power_dbm": tx_power_dbm, **traffic}],
    )


@pytest.fixture
def quiet_scenario():
    """All access points removed: captures are thermal noise only."""
    return default_scenario(access_points=[], route={"length_m": 90.0, "n_locations": 3})


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(number, name, passed, detail)``."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(number, name, passed, detail=""):
        lines.append((number, f"criterion {number} {'PASS' if passed else 'FAIL'}: {name} | {detail}"))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
