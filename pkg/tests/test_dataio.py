import pathlib

import numpy as np
import pytest

import lawkit
from lawkit.dataio import DataError, add_extra_point, load_dataset

FIXTURES = pathlib.Path(lawkit.__file__).resolve().parent / "fixtures"


def test_solar_dataset_shape(solar):
    assert solar.variables == ("m1", "m2", "d")
    assert solar.target == "p"
    assert solar.m == 8 and solar.n == 3


def test_solar_normalization_divisors(solar):
    np.testing.assert_allclose(solar.x_divisors,
                               [1.9885e30, 5.972e24, 1.496e11])
    assert solar.y_divisor == 8.64e7


def test_normalization_round_trip(solar, dilation):
    for data in (solar, dilation):
        np.testing.assert_allclose(data.raw_X() / data.x_divisors, data.X,
                                   rtol=1e-12)
        np.testing.assert_allclose(data.raw_y() / data.y_divisor, data.y,
                                   rtol=1e-12)


def test_solar_units_vectors(solar):
    assert solar.var_units == ((1, 0, 0), (1, 0, 0), (0, 1, 0))
    assert solar.target_unit == (0, 0, 1)
    assert solar.constants_have_units is False


def test_dilation_units(dilation):
    assert dilation.variables == ("v",)
    assert dilation.var_units == ((0, 1, -1),)
    assert dilation.target_unit == (0, 0, 0)
    assert dilation.y_divisor == 1e-15


def test_dataset_without_units_file(langmuir_ix):
    assert langmuir_ix.variables == ("p",)
    assert langmuir_ix.var_units is None
    np.testing.assert_array_equal(langmuir_ix.x_divisors, [1.0])
    assert langmuir_ix.y_divisor == 1.0


def test_bounding_box(solar):
    box = solar.bounding_box()
    assert len(box) == 3
    np.testing.assert_allclose(box[2], (0.387, 30.0475))
    for lo, hi in box:
        assert lo <= hi


def test_add_extra_point(solar):
    bigger = add_extra_point(solar, 1e-3)
    assert bigger.m == solar.m + 1
    np.testing.assert_allclose(bigger.X[-1], [1e-3, 1e-3, 1e-3])
    assert bigger.y[-1] == 1e-3
    # original untouched
    assert solar.m == 8
    # normalization and units carry over
    np.testing.assert_array_equal(bigger.x_divisors, solar.x_divisors)
    assert bigger.var_units == solar.var_units


def test_load_missing_file_raises_oserror(tmp_path):
    with pytest.raises(OSError):
        load_dataset(tmp_path / "absent.csv")


def test_load_non_numeric_cell(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,y\n1.0,2.0\noops,3.0\n")
    with pytest.raises(DataError):
        load_dataset(p)


def test_load_too_few_columns(tmp_path):
    p = tmp_path / "narrow.csv"
    p.write_text("y\n1.0\n2.0\n")
    with pytest.raises(DataError):
        load_dataset(p)


def test_ragged_rows(tmp_path):
    p = tmp_path / "ragged.csv"
    p.write_text("x,y\n1.0,2.0\n3.0\n")
    with pytest.raises(DataError):
        load_dataset(p)


def test_units_file_with_unknown_column(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x,y\n1.0,2.0\n")
    u = tmp_path / "d.units"
    u.write_text("z: mass\ntarget: 1\n")
    with pytest.raises(DataError):
        load_dataset(p, u)


def test_fixture_files_all_load():
    for stem in ("solar", "exoplanet", "binary_stars", "time_dilation"):
        data = load_dataset(FIXTURES / f"{stem}.csv",
                            FIXTURES / f"{stem}.units")
        assert data.m >= 4
    for stem in ("langmuir_table9", "langmuir_sun"):
        data = load_dataset(FIXTURES / f"{stem}.csv")
        assert data.m >= 10
