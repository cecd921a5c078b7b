import numpy as np
import pytest

from lawkit.dataio import Dataset
from lawkit.expr import complexity, serialize
from lawkit.fit import SearchConfig
from lawkit.gentrees import OperatorSet
from lawkit.search import pareto_of_run, run_search

OPS = OperatorSet.parse("+,-,*,/")


def _small_cfg(**kw):
    base = dict(depth=1, max_constants=1, power_bound=2, power_budget=2,
                time_slice_s=10.0, budget_s=120.0)
    base.update(kw)
    return SearchConfig(**base)


def test_run_search_sorted_and_statused(langmuir_ix):
    results = run_search(langmuir_ix, _small_cfg(), OPS)
    assert results
    sses = [r.sse for r in results]
    assert sses == sorted(sses)
    for r in results:
        assert r.formula is not None
        assert np.isfinite(r.sse)
        assert r.status in ("optimal-within-enumeration", "time-limited",
                            "aborted-by-incumbent")


def test_run_search_is_deterministic(langmuir_ix):
    runs = [run_search(langmuir_ix, _small_cfg(), OPS) for _ in range(2)]
    a = [(serialize(r.formula), r.sse) for r in runs[0]]
    b = [(serialize(r.formula), r.sse) for r in runs[1]]
    assert a == b


def test_pareto_front_properties(langmuir_ix):
    results = run_search(langmuir_ix, _small_cfg(depth=2), OPS)
    front = pareto_of_run(results)
    assert front
    comps = [p.complexity for p in front]
    scores = [p.score for p in front]
    assert comps == sorted(comps)
    assert all(a > b for a, b in zip(scores, scores[1:]))
    best = min(r.sse for r in results)
    assert scores[-1] == best
    # every front point is realized by some result
    realized = {(complexity(r.formula), r.sse) for r in results}
    for p in front:
        assert (p.complexity, p.score) in realized


def test_budget_must_be_positive(langmuir_ix):
    with pytest.raises(ValueError):
        run_search(langmuir_ix, _small_cfg(budget_s=0.0), OPS)


def test_empty_dataset_is_rejected():
    empty = Dataset(variables=("x",), target="y",
                    X=np.empty((0, 1)), y=np.empty(0),
                    x_divisors=np.ones(1), y_divisor=1.0)
    with pytest.raises(ValueError):
        run_search(empty, _small_cfg(), OPS)


def test_tiny_budget_still_returns_something(langmuir_ix):
    cfg = _small_cfg(budget_s=0.25, time_slice_s=0.05)
    results = run_search(langmuir_ix, cfg, OPS)
    # whatever survived must still be well-formed and sorted
    sses = [r.sse for r in results]
    assert sses == sorted(sses)
