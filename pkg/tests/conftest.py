from pathlib import Path

import pytest

from tflnbsa.coupler import DEFAULT_TABLE_GAPS, cached_delta_n_table
from tflnbsa.geometry import CoupledPair, DeviceSpec, GridSpec, MaterialStack, RibWaveguide, SBendProfile

ACCEPTANCE_LINES: dict = {}


def record(criterion: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion:<3} {'PASS' if ok else 'FAIL'}  {detail}"


def _order(key: str):
    digits = "".join(c for c in key if c.isdigit())
    return int(digits), key


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance")
    for k in sorted(ACCEPTANCE_LINES, key=_order):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def device():
    return DeviceSpec(MaterialStack(), CoupledPair(RibWaveguide(), 40.0), SBendProfile(end_gap_nm=40.0))


@pytest.fixture(scope="session")
def dn_table(request):
    """Supermode-splitting table from the full-size solver.

    Persisted in the pytest cache directory; the file carries a key of every
    input, so a change to the geometry or solver forces a rebuild.
    """
    path = Path(request.config.cache.mkdir("tflnbsa")) / "delta_n_table.json"
    return cached_delta_n_table(path, RibWaveguide(), MaterialStack(), DEFAULT_TABLE_GAPS, GridSpec())
