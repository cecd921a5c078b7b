"""Dimensional feasibility of gentrees.

Units are integer exponent tuples over an ordered dimension basis
(mass, length, time by default; the dataset's unit file can extend it).
Feasibility is decided by bounded enumeration of per-leaf power vectors,
propagating achievable unit sets bottom-up through the tree, exactly in
integer arithmetic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import product

from .expr import Div, GenTree, Leaf, Prod, Sum, Unary

__all__ = [
    "DEFAULT_BASIS", "WILD", "DimVerdict",
    "parse_unit_spec", "vector_from_spec", "leaf_unit",
    "dim_feasible", "assignment_unit_ok",
]

DEFAULT_BASIS = ("mass", "length", "time")


class _Wild:
    """Unit of a quantity whose constant can soak up any dimension."""

    def __repr__(self):
        return "WILD"


WILD = _Wild()

_UNIT_TOKEN = re.compile(r"([A-Za-z_]\w*)(?:\^(-?\d+))?$")


def parse_unit_spec(text: str) -> dict:
    """'length time^-1' -> {'length': 1, 'time': -1}; '1' is dimensionless."""
    text = text.strip()
    if text in ("1", ""):
        return {}
    spec = {}
    for token in text.split():
        m = _UNIT_TOKEN.match(token)
        if m is None:
            raise ValueError(f"bad unit token {token!r}")
        name, exp = m.group(1), int(m.group(2) or 1)
        spec[name] = spec.get(name, 0) + exp
    return spec


def vector_from_spec(spec: dict, basis) -> tuple:
    unknown = set(spec) - set(basis)
    if unknown:
        raise ValueError(f"dimensions {sorted(unknown)} not in basis {basis}")
    return tuple(spec.get(b, 0) for b in basis)


def _zero(nb):
    return (0,) * nb


def _add(u, v):
    return tuple(a + b for a, b in zip(u, v))


def _sub(u, v):
    return tuple(a - b for a, b in zip(u, v))


def _halve(u):
    if any(c % 2 for c in u):
        return None
    return tuple(c // 2 for c in u)


def leaf_unit(powers, var_units, const_unit=None) -> tuple:
    """Componentwise sum of powers times variable units, plus the constant's
    unit when one is given."""
    if len(powers) != len(var_units):
        raise ValueError("powers length must match variable count")
    nb = len(var_units[0]) if var_units else (len(const_unit) if const_unit else 0)
    out = _zero(nb)
    for a, u in zip(powers, var_units):
        if a:
            out = _add(out, tuple(a * c for c in u))
    if const_unit is not None:
        out = _add(out, const_unit)
    return out


@dataclass(frozen=True)
class DimVerdict:
    feasible: bool
    # required unit per leaf, left-to-right; None when constants carry
    # units (no per-leaf constraint survives) or when infeasible
    leaf_units: tuple = None


def _leaf_reachable(var_units, nb, power_bound, power_budget):
    out = set()
    n = len(var_units)
    for powers in product(range(-power_bound, power_bound + 1), repeat=n):
        if sum(abs(a) for a in powers) > power_budget:
            continue
        out.add(leaf_unit(powers, var_units, _zero(nb)))
    return out


def _minkowski(A, B, sign):
    return {(_add(a, b) if sign > 0 else _sub(a, b)) for a in A for b in B}


def dim_feasible(g, target, var_units, constants_have_units=False,
                 power_bound=2, power_budget=6) -> DimVerdict:
    """Decide whether some in-bounds power assignment gives the tree the
    target unit, and if so return one witness set of per-leaf units."""
    if constants_have_units:
        # a free constant per leaf can absorb any unit mismatch
        return DimVerdict(True, None)
    target = tuple(target)
    nb = len(target)
    var_units = tuple(tuple(u) for u in var_units)
    leafset = _leaf_reachable(var_units, nb, power_bound, power_budget)
    root = g.root if isinstance(g, GenTree) else getattr(g, "root", g)

    def reach(node):
        if isinstance(node, Leaf):
            return leafset
        if isinstance(node, Sum):
            sets = [reach(c) for _, c in node.terms]
            out = sets[0]
            for s in sets[1:]:
                out = out & s
            return out
        if isinstance(node, Prod):
            sets = [reach(c) for c in node.factors]
            out = sets[0]
            for s in sets[1:]:
                out = _minkowski(out, s, +1)
            return out
        if isinstance(node, Div):
            return _minkowski(reach(node.num), reach(node.den), -1)
        if isinstance(node, Unary):
            if node.op == "sqrt":
                inner = reach(node.arg)
                return {h for h in (_halve(u) for u in inner) if h is not None}
            if node.op in ("exp", "log"):
                zero = _zero(nb)
                return {zero} if zero in reach(node.arg) else set()
            return reach(node.arg)  # abs passes units through
        raise TypeError(f"not a tree node: {node!r}")

    if target not in reach(root):
        return DimVerdict(False, None)

    leaves = []

    def witness(node, req):
        if isinstance(node, Leaf):
            leaves.append(req)
            return
        if isinstance(node, Sum):
            for _, c in node.terms:
                witness(c, req)
            return
        if isinstance(node, Prod):
            rest = list(node.factors)
            remaining = req
            for i, c in enumerate(rest[:-1]):
                tail_sets = [reach(x) for x in rest[i + 1:]]
                for u in sorted(reach(c)):
                    need = _sub(remaining, u)
                    if _splittable(need, tail_sets):
                        witness(c, u)
                        remaining = need
                        break
            witness(rest[-1], remaining)
            return
        if isinstance(node, Div):
            den_set = reach(node.den)
            for u in sorted(reach(node.num)):
                if _sub(u, req) in den_set:
                    witness(node.num, u)
                    witness(node.den, _sub(u, req))
                    return
        if isinstance(node, Unary):
            if node.op == "sqrt":
                witness(node.arg, tuple(2 * c for c in req))
            elif node.op in ("exp", "log"):
                witness(node.arg, _zero(nb))
            else:
                witness(node.arg, req)
            return

    def _splittable(need, sets):
        if not sets:
            return need == _zero(nb)
        if len(sets) == 1:
            return need in sets[0]
        return any(_splittable(_sub(need, u), sets[1:]) for u in sets[0])

    witness(root, target)
    return DimVerdict(True, tuple(leaves))


def assignment_unit_ok(g, leaf_powers, z, var_units, target,
                       constants_have_units=False) -> bool:
    """Exact unit check of one concrete power assignment.

    Free constants (z true) carry arbitrary units when the dataset says
    constants have units; fixed-one leaves never do.
    """
    if constants_have_units and all(z):
        return True
    target = tuple(target)
    nb = len(target)
    var_units = tuple(tuple(u) for u in var_units)
    it = iter(zip(leaf_powers, z))

    def unit(node):
        if isinstance(node, Leaf):
            powers, active = next(it)
            if active and constants_have_units:
                return WILD
            return leaf_unit(powers, var_units, _zero(nb))
        if isinstance(node, Sum):
            shared = WILD
            for _, c in node.terms:
                u = unit(c)
                if u is None:
                    return None
                if u is WILD:
                    continue
                if shared is WILD:
                    shared = u
                elif u != shared:
                    return None
            return shared
        if isinstance(node, Prod):
            out = _zero(nb)
            for c in node.factors:
                u = unit(c)
                if u is None:
                    return None
                if u is WILD or out is WILD:
                    out = WILD
                else:
                    out = _add(out, u)
            return out
        if isinstance(node, Div):
            un, ud = unit(node.num), unit(node.den)
            if un is None or ud is None:
                return None
            if un is WILD or ud is WILD:
                return WILD
            return _sub(un, ud)
        if isinstance(node, Unary):
            u = unit(node.arg)
            if u is None:
                return None
            if node.op == "sqrt":
                return WILD if u is WILD else _halve(u)
            if node.op in ("exp", "log"):
                if u is WILD or u == _zero(nb):
                    return _zero(nb)
                return None
            return u
        raise TypeError(f"not a tree node: {node!r}")

    root = g.root if isinstance(g, GenTree) else getattr(g, "root", g)
    u = unit(root)
    return u is WILD or u == target
