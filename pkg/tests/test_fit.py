import itertools
import math

import numpy as np
import pytest

from lawkit.dataio import Dataset
from lawkit.expr import Div, GenTree, Leaf, Sum, Unary, serialize
from lawkit.fit import (
    SearchConfig,
    fit_gentree,
    inner_fit_constants,
    validate_result,
)

SQRT_LEAF = GenTree(Unary("sqrt", Leaf()))
RATIONAL = GenTree(Div(Leaf(), Sum(((1, Leaf()), (1, Leaf())))))


def _toy_dataset(xs, ys):
    xs = np.asarray(xs, dtype=float).reshape(-1, 1)
    ys = np.asarray(ys, dtype=float)
    return Dataset(variables=("x",), target="y", X=xs, y=ys,
                   x_divisors=np.ones(1), y_divisor=1.0)


def test_searchconfig_validation():
    with pytest.raises(ValueError):
        SearchConfig(depth=-1)
    with pytest.raises(ValueError):
        SearchConfig(const_bound=0.0)
    with pytest.raises(ValueError):
        SearchConfig(tolerance=-1e-3)
    cfg = SearchConfig()
    assert cfg.depth == 3 and cfg.max_constants == 1


def test_sqrt_leaf_fit_on_solar(solar):
    """The orbital dataset is fit by sqrt(h * d^3) almost exactly."""
    cfg = SearchConfig(depth=1, max_constants=1, power_bound=3,
                       power_budget=6, time_slice_s=30.0)
    res = fit_gentree(SQRT_LEAF, solar, cfg)
    assert res.formula is not None
    assert abs(res.sse - 0.0023561401) < 1e-6
    h = res.formula([1.0, 1.0, 1.0]) ** 2
    assert abs(h - 0.13188165) < 1e-6
    assert validate_result(res, cfg)


def test_rational_fit_on_isotherm(langmuir_ix):
    """p/(c1*p + c2) against the measured isotherm."""
    cfg = SearchConfig(depth=2, max_constants=2, power_bound=2,
                       power_budget=6, time_slice_s=60.0)
    res = fit_gentree(RATIONAL, langmuir_ix, cfg)
    assert res.formula is not None
    assert abs(res.sse - 66.7478) < 1e-2
    assert validate_result(res, cfg)


def test_inner_fit_matches_direct_least_squares(langmuir_ix):
    powers = ((1,), (1,), (0,))
    z = (0, 1, 1)
    h, sse = inner_fit_constants(RATIONAL, powers, z, langmuir_ix)
    assert h[0] == 1.0
    assert abs(h[1] - 0.00926842) < 1e-6
    assert abs(h[2] - 0.07587672) < 1e-6
    assert abs(sse - 66.7478) < 1e-2


def test_inner_fit_shape_mismatch(langmuir_ix):
    with pytest.raises(ValueError):
        inner_fit_constants(RATIONAL, ((1,), (1,)), (0, 1), langmuir_ix)


def test_fit_is_deterministic(solar):
    cfg = SearchConfig(depth=1, max_constants=1, power_bound=2,
                       power_budget=6, time_slice_s=30.0)
    tree = GenTree(Sum(((1, Leaf()), (1, Leaf()))))
    a = fit_gentree(tree, solar, cfg)
    b = fit_gentree(tree, solar, cfg)
    assert serialize(a.formula) == serialize(b.formula)
    assert a.sse == b.sse


def test_constant_bound_is_respected():
    # data demanding h ~ 1e4 must clamp at the configured bound
    xs = np.linspace(1.0, 2.0, 6)
    data = _toy_dataset(xs, 1e4 * xs)
    cfg = SearchConfig(depth=0, max_constants=1, power_bound=1,
                       power_budget=1, const_bound=100.0)
    res = fit_gentree(GenTree(Leaf()), data, cfg)
    assert res.formula is not None
    assert validate_result(res, cfg)
    assert abs(res.formula([1.0])) <= 100.0 * (1 + 1e-9)


def _brute_force_oracle(tree, data, cfg, grid=2001):
    """Exhaustive lattice sweep with a dense constant grid plus refinement.

    Only for tiny single-variable instances; mirrors what the search is
    supposed to optimize, independently of its pruning and incumbents.
    """
    from lawkit.expr import bind, eval_masked, leaf_slots, LMonomial

    m = leaf_slots(tree)
    cap = min(cfg.power_bound, cfg.power_budget)  # single variable
    lattice = list(itertools.product(range(-cap, cap + 1), repeat=m))
    best = math.inf
    consts = np.concatenate([
        -np.logspace(math.log10(cfg.const_bound), -4, grid // 2),
        [0.0],
        np.logspace(-4, math.log10(cfg.const_bound), grid // 2),
    ])
    slots = list(range(m)) + [None] if cfg.max_constants else [None]
    for powers in lattice:
        for z_slot in slots:
            for c in (consts if z_slot is not None else [None]):
                monos = []
                for i in range(m):
                    if i == z_slot:
                        monos.append(LMonomial(float(c), (powers[i],)))
                    else:
                        monos.append(LMonomial(1.0, (powers[i],), fixed=True))
                f = bind(tree, monos, data.variables)
                vals, ok = eval_masked(f, data.X)
                if not ok.all():
                    continue
                sse = float(np.sum((vals - data.y) ** 2))
                if sse < best:
                    best = sse
    return best


@pytest.mark.parametrize("seed", [3, 11])
def test_fit_matches_brute_force_oracle(seed):
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.5, 4.0, size=7)
    h = rng.uniform(0.2, 5.0)
    a = rng.integers(-2, 3)
    ys = h * xs ** a + rng.normal(0.0, 0.05, size=7)
    data = _toy_dataset(xs, ys)
    cfg = SearchConfig(depth=1, max_constants=1, power_bound=2,
                       power_budget=2, time_slice_s=30.0)
    tree = GenTree(Sum(((1, Leaf()), (1, Leaf()))))
    res = fit_gentree(tree, data, cfg)
    oracle = _brute_force_oracle(tree, data, cfg)
    assert res.sse <= oracle * (1 + 1e-6) + 1e-12
