from pathlib import Path

import pytest
from hypothesis import settings

from cyclone_bands.evaluation import train_models
from cyclone_bands.synthetic import synthetic_storms
from cyclone_bands.tracks import split_train_test

DATA = Path(__file__).parent / "data"

# timings vary a lot on shared runners
settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def fixture_path():
    return DATA / "hurdat2_fixture.txt"


@pytest.fixture(scope="session")
def corpus():
    """1008 synthetic storms split 702/306, the same shape as the Atlantic setup."""
    return split_train_test(synthetic_storms(1008, seed=2024), 702, seed=0)


@pytest.fixture(scope="session")
def models(corpus):
    return train_models(corpus.train)


@pytest.fixture(scope="session")
def small_models():
    return train_models(synthetic_storms(120, seed=7))


_ACCEPTANCE = []


@pytest.fixture
def record_criterion():
    """Log a one-line verdict for an acceptance criterion."""
    def record(number, title, passed, detail=""):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title}" + (f" ({detail})" if detail else "")
        _ACCEPTANCE.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
