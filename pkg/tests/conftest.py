import pathlib

import pytest

import lawkit

FIXTURES = pathlib.Path(lawkit.__file__).resolve().parent / "fixtures"


def _dataset(stem):
    units = FIXTURES / f"{stem}.units"
    return lawkit.load_dataset(FIXTURES / f"{stem}.csv",
                               units if units.exists() else None)


@pytest.fixture(scope="session")
def solar():
    return _dataset("solar")


@pytest.fixture(scope="session")
def exoplanet():
    return _dataset("exoplanet")


@pytest.fixture(scope="session")
def binary():
    return _dataset("binary_stars")


@pytest.fixture(scope="session")
def dilation():
    return _dataset("time_dilation")


@pytest.fixture(scope="session")
def langmuir_ix():
    return _dataset("langmuir_table9")


@pytest.fixture(scope="session")
def langmuir_sun():
    return _dataset("langmuir_sun")


@pytest.fixture(scope="session")
def kepler_system():
    return lawkit.parse_axiom_file(FIXTURES / "kepler.axioms")


@pytest.fixture(scope="session")
def relativity_system():
    return lawkit.parse_axiom_file(FIXTURES / "relativity.axioms")


@pytest.fixture(scope="session")
def newtonian_system():
    return lawkit.parse_axiom_file(FIXTURES / "relativity_newtonian.axioms")


@pytest.fixture(scope="session")
def langmuir1_system():
    return lawkit.parse_axiom_file(FIXTURES / "langmuir1.axioms")


@pytest.fixture(scope="session")
def langmuir2_system():
    return lawkit.parse_axiom_file(FIXTURES / "langmuir2.axioms")
