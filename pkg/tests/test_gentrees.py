import pytest

from lawkit.expr import depth, leaf_slots, serialize
from lawkit.gentrees import (
    OperatorSet,
    contains_pruned_pattern,
    enumerate_gentrees,
)

FULL = OperatorSet.parse("+,-,*,/,sqrt")
NO_SQRT = OperatorSet.parse("+,-,*,/")


def test_counts_without_sqrt():
    # cumulative counts, single leaf included
    for d, want in ((0, 1), (1, 2), (2, 6), (3, 31)):
        assert len(enumerate_gentrees(NO_SQRT, d)) == want


def test_counts_with_sqrt():
    for d, want in ((0, 1), (1, 2), (2, 7), (3, 60)):
        assert len(enumerate_gentrees(FULL, d)) == want


@pytest.mark.slow
def test_count_depth_four_without_sqrt():
    assert len(enumerate_gentrees(NO_SQRT, 4)) == 1153


def test_serializations_are_unique():
    trees = enumerate_gentrees(FULL, 3)
    texts = [serialize(g) for g in trees]
    assert len(set(texts)) == len(texts)


def test_depth_bound_is_respected():
    for g in enumerate_gentrees(FULL, 3):
        assert depth(g) <= 3
        assert leaf_slots(g) >= 1


def test_no_enumerated_tree_contains_a_pruned_pattern():
    for ops in (FULL, NO_SQRT):
        for g in enumerate_gentrees(ops, 3):
            assert not contains_pruned_pattern(g), serialize(g)


def test_enumeration_is_deterministic():
    a = [serialize(g) for g in enumerate_gentrees(FULL, 3)]
    b = [serialize(g) for g in enumerate_gentrees(FULL, 3)]
    assert a == b


def test_smaller_depth_is_a_prefix_class():
    shallow = {serialize(g) for g in enumerate_gentrees(FULL, 2)}
    deep = {serialize(g) for g in enumerate_gentrees(FULL, 3)}
    assert shallow < deep


def test_operator_set_parsing():
    ops = OperatorSet.parse(" +, * , sqrt ")
    assert ops.binary == frozenset({"+", "*"})
    assert ops.unary == frozenset({"sqrt"})
    with pytest.raises(ValueError):
        OperatorSet.parse("+,%")
    with pytest.raises(ValueError):
        OperatorSet.parse("")


def test_unary_only_sets_still_enumerate():
    ops = OperatorSet.parse("sqrt")
    trees = enumerate_gentrees(ops, 2)
    assert [serialize(g) for g in trees[:1]] == ["L1"]
