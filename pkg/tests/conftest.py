import pathlib
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def scheduler_bytes() -> bytes:
    return (FIXTURES / "scheduler.html").read_bytes()


@pytest.fixture(scope="session")
def scheduler_path() -> pathlib.Path:
    return FIXTURES / "scheduler.html"
