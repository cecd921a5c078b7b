"""Search driver: round-robin time slicing over the enumerated gentrees.

Trees are visited in (complexity, serialization) order and each gets a time
slice in turn, so cheap trees finish early and expensive sweeps make steady
progress.  When any tree reaches the sse tolerance, every pending tree of
strictly greater depth is cancelled; the wall-clock budget caps the whole run.
"""

from __future__ import annotations

import time
from collections import deque

from .expr import complexity, depth, serialize
from .fit import FitResult, FitTask, SearchConfig, validate_result
from .gentrees import OperatorSet, enumerate_gentrees
from .select import ParetoPoint

__all__ = ["run_search", "pareto_of_run"]

_DEFAULT_OPS = "+,-,*,/,sqrt"


def run_search(data, cfg: SearchConfig, ops=None) -> list:
    """Fit every gentree up to cfg.depth against the dataset.

    Returns one FitResult per tree that produced a finite incumbent, sorted
    by (sse, complexity, serialization).  Results from trees whose sweep was
    still running when the budget ran out carry status "time-limited";
    results from trees cancelled by the depth rule carry
    "aborted-by-incumbent".
    """
    if ops is None:
        ops = OperatorSet.parse(_DEFAULT_OPS)
    if data.m < 1:
        raise ValueError("dataset must contain at least one point")
    if cfg.budget_s <= 0:
        raise ValueError("time budget must be positive")

    trees = enumerate_gentrees(ops, cfg.depth)
    pending = deque(FitTask(g, data, cfg) for g in trees)
    finished = []
    t0 = time.monotonic()
    cancel_above = None

    while pending:
        remaining = cfg.budget_s - (time.monotonic() - t0)
        if remaining <= 0:
            break
        task = pending.popleft()
        task.run(min(cfg.time_slice_s, remaining))
        if task.done:
            finished.append(task)
        else:
            pending.append(task)
        if task.best is not None and task.best[0] < cfg.tolerance:
            d = depth(task.tree)
            if cancel_above is None or d < cancel_above:
                cancel_above = d
                kept = deque()
                for t in pending:
                    if depth(t.tree) > cancel_above:
                        t.cancelled = True
                        finished.append(t)
                    else:
                        kept.append(t)
                pending = kept

    finished.extend(pending)  # budget exhausted mid-sweep
    results = []
    for t in finished:
        r = t.result()
        if r.formula is None:
            continue
        if not validate_result(r, cfg):
            raise AssertionError(
                f"fit produced an out-of-bounds assignment for {serialize(t.tree)}")
        results.append(r)
    results.sort(key=lambda r: (r.sse, complexity(r.formula),
                                serialize(r.formula)))
    return results


def pareto_of_run(results) -> list:
    """Nondominated (complexity, sse) points of a run, ascending complexity.

    Among results of equal complexity only the best sse survives; a point is
    kept only if it strictly improves on every simpler one.
    """
    by_comp = {}
    for r in results:
        c = complexity(r.formula)
        cur = by_comp.get(c)
        if cur is None or (r.sse, serialize(r.formula)) < (cur.sse,
                                                           serialize(cur.formula)):
            by_comp[c] = r
    front = []
    best = float("inf")
    for c in sorted(by_comp):
        r = by_comp[c]
        if r.sse < best:
            front.append(ParetoPoint(float(c), float(r.sse), payload=r.formula))
            best = r.sse
    return front
