import pytest

from lawkit.dims import (
    DEFAULT_BASIS,
    dim_feasible,
    leaf_unit,
    parse_unit_spec,
    vector_from_spec,
)
from lawkit.expr import Div, GenTree, Leaf, Sum, Unary


def test_parse_unit_spec():
    assert parse_unit_spec("length time^-1") == {"length": 1, "time": -1}
    assert parse_unit_spec("mass") == {"mass": 1}
    assert parse_unit_spec("1") == {}
    assert parse_unit_spec("") == {}
    assert parse_unit_spec("mass mass") == {"mass": 2}
    with pytest.raises(ValueError):
        parse_unit_spec("mass^x")


def test_vector_from_spec():
    v = vector_from_spec({"length": 1, "time": -1}, DEFAULT_BASIS)
    assert v == (0, 1, -1)
    assert vector_from_spec({}, DEFAULT_BASIS) == (0, 0, 0)
    with pytest.raises(ValueError):
        vector_from_spec({"charge": 1}, DEFAULT_BASIS)


def test_leaf_unit_arithmetic():
    units = ((1, 0, 0), (0, 1, 0))  # mass, length
    assert leaf_unit((2, -1), units) == (2, -1, 0)
    assert leaf_unit((0, 0), units) == (0, 0, 0)
    assert leaf_unit((1, 0), units, const_unit=(0, 0, 1)) == (1, 0, 1)
    with pytest.raises(ValueError):
        leaf_unit((1,), units)


def test_single_leaf_feasibility():
    g = GenTree(Leaf())
    length = (0, 1, 0)
    # x carries length: x^1 hits the target
    v = dim_feasible(g, length, [(0, 1, 0)])
    assert v.feasible and v.leaf_units == (length,)
    # x carries mass: no integer power of mass gives length
    v = dim_feasible(g, length, [(1, 0, 0)])
    assert not v.feasible


def test_sqrt_halves_the_unit():
    g = GenTree(Unary("sqrt", Sum(((1, Leaf()), (1, Leaf())))))
    # leaves over a time^2 variable can sum to time^2; sqrt gives time
    v = dim_feasible(g, (0, 0, 1), [(0, 0, 2)])
    assert v.feasible
    # mass is unreachable from a time-carrying variable
    v = dim_feasible(g, (1, 0, 0), [(0, 0, 1)])
    assert not v.feasible


def test_sum_requires_matching_units():
    g = GenTree(Sum(((1, Leaf()), (1, Leaf()))))
    v = dim_feasible(g, (0, 1, 0), [(0, 1, 0)])
    assert v.feasible
    assert v.leaf_units == ((0, 1, 0), (0, 1, 0))


def test_division_subtracts_units():
    g = GenTree(Div(Leaf(), Leaf()))
    # length / time from variables (length, time)
    v = dim_feasible(g, (0, 1, -1), [(0, 1, 0), (0, 0, 1)])
    assert v.feasible


def test_unitful_constants_make_everything_feasible():
    g = GenTree(Leaf())
    v = dim_feasible(g, (3, -2, 5), [(1, 0, 0)], constants_have_units=True)
    assert v.feasible and v.leaf_units is None


def test_power_bound_limits_reachability():
    g = GenTree(Leaf())
    # length^3 needs a cube; allowed at bound 3, not at bound 2
    assert dim_feasible(g, (0, 3, 0), [(0, 1, 0)], power_bound=3).feasible
    assert not dim_feasible(g, (0, 3, 0), [(0, 1, 0)], power_bound=2).feasible


def test_solar_orbit_units_are_infeasible_without_constants(solar):
    # period has unit time; no power combination of masses and a length
    # reaches it, which is why those fits run with unitless normalization
    g = GenTree(Unary("sqrt", Sum(((1, Leaf()), (1, Leaf())))))
    target = vector_from_spec(parse_unit_spec("time"), solar.basis)
    v = dim_feasible(g, target, solar.var_units)
    assert not v.feasible
