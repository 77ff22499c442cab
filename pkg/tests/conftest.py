import pytest

from corrspiral.modes import ModeWindow
from corrspiral.objects import Disk, Square, Strip
from corrspiral.pipeline import entangled_spectrum

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def default_objects():
    return {"strip": Strip(0.9), "square": Square(1.0), "disk": Disk(0.5)}


@pytest.fixture(scope="session")
def runs(default_objects):
    """Entangled runs at the waist for the default objects on the default window."""
    return {k: entangled_spectrum(o, ModeWindow()) for k, o in default_objects.items()}
