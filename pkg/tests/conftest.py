from pathlib import Path

import numpy as np
import pytest

from elbreak import TimeSeries

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name: str) -> TimeSeries:
    values = np.loadtxt(FIXTURES / name, skiprows=1)
    return TimeSeries(values)


@pytest.fixture(scope="session")
def change_series() -> TimeSeries:
    """Pinned AR(1) draw with a 0.1 -> 0.5 coefficient change after t=100."""
    return load_fixture("ar1_change_n250_k100.csv")


@pytest.fixture(scope="session")
def nochange_series() -> TimeSeries:
    """Pinned stationary AR(1) draw with coefficient 0.3, no change."""
    return load_fixture("ar1_nochange_n300.csv")


@pytest.fixture()
def change_csv_path() -> str:
    return str(FIXTURES / "ar1_change_n250_k100.csv")


@pytest.fixture()
def nochange_csv_path() -> str:
    return str(FIXTURES / "ar1_nochange_n300.csv")
