import numpy as np
import pytest

from frpdispatch import lp_core
from frpdispatch.market_model import (FrpRequirement, GeneratorSpec, LoadSpec, SystemSpec,
                                      VerUnit, WindowInput)

ACCEPTANCE_LINES = []


@pytest.fixture(params=lp_core.available_backends())
def backend(request):
    previous = lp_core.get_backend()
    lp_core.set_backend(request.param)
    yield request.param
    lp_core.set_backend(previous)


@pytest.fixture
def spec():
    return SystemSpec(
        generators=(GeneratorSpec("G1", 20, 0, 100, 15, 15, 0.214),
                    GeneratorSpec("G2", 50, 0, 500, 50, 50, 0.428)),
        loads=(LoadSpec("D", 200),),
        ver_units=(VerUnit("V1", "wind"), VerUnit("V2", "solar")),
        interval_hours=1 / 12,
        window_length=2,
    )


def first_window(fru, frd, initial=(60.0, 0.0), ver=(40.0, 40.0), load=(100.0, 85.0)):
    return WindowInput(0, (0, 1), [list(load)], list(ver),
                       [FrpRequirement(0, 0), FrpRequirement(fru, frd)], initial)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
