import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

SMALL_SCENARIO = {"devices": 60, "baseline_days": 6, "seed": 17, "night_rate_per_h": 1.5,
                  "day_cadence_s": 1800}


@pytest.fixture(scope="session")
def small_world(tmp_path_factory):
    """A small generated scenario shared by the CLI and synth tests."""
    from evacuscope.synth import ScenarioConfig, generate
    out = tmp_path_factory.mktemp("world")
    generate(ScenarioConfig.from_dict(dict(SMALL_SCENARIO)), out)
    return out


_CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    status = "PASS" if rep.passed else "FAIL"
    _CRITERIA[mark.args[0]] = (status, detail or rep.longreprtext.splitlines()[-1] if rep.failed else detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {detail}")
