import re
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dualqgan.harness import Seeds, TrainingConfig, train  # noqa: E402

SEEDS = range(5)

_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")
_outcomes: dict[int, tuple[str, str, str]] = {}


@pytest.fixture(scope="session")
def trained_runs():
    """Default noiseless exact training for five fixed seeds, timed together."""
    start = time.perf_counter()
    dataset = TrainingConfig().make_dataset()
    runs = {s: train(TrainingConfig(seeds=Seeds(init=s)), dataset) for s in SEEDS}
    return runs, dataset, time.perf_counter() - start


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m or "test_acceptance.py" not in report.nodeid:
        return
    n = int(m.group(1))
    detail = dict(report.user_properties).get("detail", "")
    if report.when == "call" or report.failed or report.skipped:
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        if n not in _outcomes or _outcomes[n][0] == "PASS":
            _outcomes[n] = (status, m.group(2), detail)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        status, name, detail = _outcomes[n]
        line = f"criterion {n} {name}: {status}"
        terminalreporter.write_line(f"{line}  ({detail})" if detail else line)
