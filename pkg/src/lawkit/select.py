"""Model selection on a Pareto front: knee-point detection.

Implements the difference-curve knee finder for fronts of (complexity,
score) points with score decreasing as complexity grows.  The front is
min-max normalized, the difference curve d_i = (1 - y_i) - x_i is scanned
for local maxima, and the first maximum whose curve later falls below the
sensitivity threshold is the knee; if no threshold fires, the global
maximum of the curve wins.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["ParetoPoint", "knee_point"]


@dataclass(frozen=True)
class ParetoPoint:
    complexity: float
    score: float
    payload: object = None


def _coerce(front):
    pts = []
    for p in front:
        if isinstance(p, ParetoPoint):
            pts.append((float(p.complexity), float(p.score)))
        else:
            x, y = p[0], p[1]
            pts.append((float(x), float(y)))
    return pts


def knee_point(front, sensitivity: float = 1.0) -> int:
    """Index of the knee of a sorted Pareto front.

    The front must be sorted by complexity ascending with strictly
    decreasing scores and no duplicate complexities; anything else raises
    ValueError.  Fronts with fewer than three points have no curvature, so
    the lowest-score index is returned.  A perfectly straight front returns
    index 0.
    """
    pts = _coerce(front)
    if not pts:
        raise ValueError("empty Pareto front")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    for a, b in zip(xs, xs[1:]):
        if b <= a:
            raise ValueError("front must be sorted by complexity, no duplicates")
    for a, b in zip(ys, ys[1:]):
        if b >= a:
            raise ValueError("front scores must be strictly decreasing")
    n = len(pts)
    if n < 3:
        return n - 1  # strictly decreasing, so the last point scores lowest

    x_rng = xs[-1] - xs[0]
    y_rng = ys[0] - ys[-1]
    xn = [(x - xs[0]) / x_rng for x in xs]
    yn = [(y - ys[-1]) / y_rng for y in ys]
    d = [(1.0 - yv) - xv for xv, yv in zip(xn, yn)]

    if max(d) - min(d) < 1e-12:
        return 0

    mean_dx = (xn[-1] - xn[0]) / (n - 1)
    maxima = [i for i in range(1, n - 1) if d[i] > d[i - 1] and d[i] >= d[i + 1]]
    for j, i in enumerate(maxima):
        stop = maxima[j + 1] if j + 1 < len(maxima) else n
        threshold = d[i] - sensitivity * mean_dx
        for k in range(i + 1, stop):
            if d[k] < threshold:
                return i
    return max(range(n), key=lambda i: (d[i], -i))
