"""Gentree enumeration with redundancy pruning.

Trees are built internally as canonical nested tuples (fast to hash and
compare), then materialized into expr nodes.  A candidate div or prod node
is dropped when fully merging its numerator/denominator factor multisets
(leaf absorption, sum-by-sum width products, sqrt arg merges across the
fraction bar, denominator-sqrt rationalization) yields another tree of the
same or smaller depth: the merged form is already in the pool.

exp and log nodes are opaque: they join sums, quotients, products, and
sqrt arguments freely, and no merge is attempted through them.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement

from .expr import Div, GenTree, Leaf, Prod, Sum, Unary, complexity, serialize

__all__ = ["OperatorSet", "enumerate_gentrees", "contains_pruned_pattern"]

_LEAF = ("L",)
_UNARY_TAGS = ("sqrt", "exp", "log")

_BINARY_ALIASES = {"+": "+", "-": "-", "*": "*", "x": "*", "/": "/"}
_UNARY_ALIASES = {"sqrt": "sqrt", "exp": "exp", "log": "log"}


@dataclass(frozen=True)
class OperatorSet:
    binary: frozenset
    unary: frozenset

    def __post_init__(self):
        bad = self.binary - {"+", "-", "*", "/"}
        if bad:
            raise ValueError(f"unknown binary operators: {sorted(bad)}")
        bad = self.unary - {"sqrt", "exp", "log"}
        if bad:
            raise ValueError(f"unknown unary operators: {sorted(bad)}")
        if not self.binary and not self.unary:
            raise ValueError("operator set is empty")

    @classmethod
    def parse(cls, text: str) -> "OperatorSet":
        """Build from CLI text such as "+,-,*,/,sqrt"."""
        binary, unary = set(), set()
        for raw in text.split(","):
            tok = raw.strip().lower()
            if not tok:
                continue
            if tok in _BINARY_ALIASES:
                binary.add(_BINARY_ALIASES[tok])
            elif tok in _UNARY_ALIASES:
                unary.add(_UNARY_ALIASES[tok])
            else:
                raise ValueError(f"unknown operator {raw.strip()!r}")
        return cls(frozenset(binary), frozenset(unary))


# ---------------------------------------------------------------------------
# canonical tuple calculus

_memo_depth = {}
_memo_width = {}
_memo_prunable = {}


def _depth(t):
    r = _memo_depth.get(t)
    if r is not None:
        return r
    tag = t[0]
    if tag == "L":
        r = 0
    elif tag == "sum":
        s = sum(1 << _depth(c) for _, c in t[1])
        r = (s - 1).bit_length()
    elif tag == "prod":
        s = sum(1 << _depth(c) for c in t[1])
        r = (s - 1).bit_length()
    elif tag == "div":
        r = 1 + max(_depth(t[1]), _depth(t[2]))
    else:
        r = 1 + _depth(t[1])
    _memo_depth[t] = r
    return r


def _width(t):
    r = _memo_width.get(t, "?")
    if r != "?":
        return r
    tag = t[0]
    if tag == "L":
        r = 1
    elif tag == "sum":
        ws = [_width(c) for _, c in t[1]]
        r = None if any(w is None for w in ws) else sum(ws)
    else:
        r = None
    _memo_width[t] = r
    return r


def _is_pure(t):
    return _width(t) is not None


def _kraft(w):
    return (w - 1).bit_length()


def _contains_opaque(t):
    tag = t[0]
    if tag in ("exp", "log"):
        return True
    if tag == "L":
        return False
    if tag == "sum":
        return any(_contains_opaque(c) for _, c in t[1])
    if tag == "prod":
        return any(_contains_opaque(c) for c in t[1])
    if tag == "div":
        return _contains_opaque(t[1]) or _contains_opaque(t[2])
    return _contains_opaque(t[1])


def _is_abs(t):
    """True when the subtree can absorb an overall sign into a leaf constant,
    making the negated variant redundant."""
    tag = t[0]
    if tag == "L":
        return True
    if tag == "sum":
        flipped = tuple(sorted((s if _is_abs(c) else -s, c) for s, c in t[1]))
        return flipped == t[1]
    if tag == "div":
        return _is_abs(t[1]) or _is_abs(t[2])
    if tag == "prod":
        return any(_is_abs(c) for c in t[1])
    return False  # sqrt, exp, log


def _merged_sum_weight(a, b):
    """Kraft weight of the distributed product of two {leaf, sum} trees, or
    None when some term of the distribution has no representable form."""
    if _is_pure(a) and _is_pure(b):
        return _width(a) * _width(b)
    if a[0] != "sum":
        a, b = b, a
    if a[0] != "sum":
        return None
    total = 0
    for _s, c in a[1]:
        k = c[0]
        if k == "L":
            w = _width(b) if _is_pure(b) else _merged_sum_weight(_LEAF, b)
        elif k == "div":
            nw = _merged_sum_weight(c[1], b)
            if nw is None:
                return None
            w = 1 << (1 + max(_kraft(nw), _depth(c[2])))
        elif k == "sqrt":
            w = 1 << _kraft((1 << (1 + _depth(c[1]))) + (1 << _depth(b)))
        elif k == "prod":
            best = None
            parts = list(c[1])
            for i, p in enumerate(parts):
                if p[0] in ("L", "sum"):
                    mw = _merged_sum_weight(p, b)
                    if mw is None:
                        continue
                    rest = parts[:i] + parts[i + 1:]
                    ww = (1 << _kraft(mw)) + sum(1 << _depth(q) for q in rest)
                    dd = _kraft(ww)
                    best = dd if best is None else min(best, dd)
            if best is None:
                return None
            w = 1 << best
        elif k == "sum":
            mw = _merged_sum_weight(c, b)
            if mw is None:
                return None
            w = 1 << _kraft(mw)
        else:
            return None
        if w is None:
            return None
        total += w
    return total


class _Unmergeable(Exception):
    pass


def _add_factor(t, nums, dens, inv=False):
    """Flatten t into multiplicative factors, splitting div and prod."""
    tag = t[0]
    if tag == "div":
        _add_factor(t[1], nums, dens, inv)
        _add_factor(t[2], nums, dens, not inv)
    elif tag == "prod":
        for f in t[1]:
            _add_factor(f, nums, dens, inv)
    else:
        (dens if inv else nums).append(t)


def _canon(nums, dens):
    """Merged canonical form of prod(nums)/prod(dens).

    Returns (depth, merged_anything, kind).  Raises _Unmergeable when a
    required merge has no representable gentree.
    """
    nums = list(nums)
    dens = list(dens)
    merged = False

    num_qs = [t for t in nums if t[0] == "sqrt"]
    den_qs = [t for t in dens if t[0] == "sqrt"]
    nums = [t for t in nums if t[0] != "sqrt"]
    dens = [t for t in dens if t[0] != "sqrt"]

    sqrt_depth = None
    if num_qs and den_qs:
        # quotient-merge every sqrt argument into a single sqrt
        a_nums, a_dens = [], []
        for q in num_qs:
            _add_factor(q[1], a_nums, a_dens)
        for q in den_qs:
            _add_factor(q[1], a_nums, a_dens, inv=True)
        ad, _m, ak = _canon(a_nums, a_dens)
        if ak == "prod":
            raise _Unmergeable
        sqrt_depth = 1 + ad
        merged = True
    elif den_qs:
        # rationalize: x / sqrt(a) = x * sqrt(a) / a
        for q in den_qs:
            a = q[1]
            if a[0] == "sqrt":
                raise _Unmergeable
            _add_factor(a, dens, nums)
        num_qs = den_qs
        merged = True
    if sqrt_depth is None and num_qs:
        if len(num_qs) == 1:
            sqrt_depth = _depth(num_qs[0])
        else:
            a_nums, a_dens = [], []
            for q in num_qs:
                _add_factor(q[1], a_nums, a_dens)
            ad, _m, ak = _canon(a_nums, a_dens)
            if ak == "prod":
                raise _Unmergeable
            sqrt_depth = 1 + ad
            merged = True

    # Leaves: leaf*leaf is a leaf, and a single leaf absorbs into a sum
    # (scaling its terms), a sqrt argument, or an opposite-side leaf.
    num_leaves = sum(1 for t in nums if t[0] == "L")
    den_leaves = sum(1 for t in dens if t[0] == "L")
    num_absorber = sqrt_depth is not None or any(t[0] == "sum" for t in nums)
    den_absorber = any(t[0] == "sum" for t in dens)
    if den_leaves:
        if num_absorber or den_absorber or num_leaves:
            merged = True
            dens = [t for t in dens if t[0] != "L"]
        else:
            raise _Unmergeable  # bare reciprocal of a leaf
    if num_leaves:
        nums_rest = [t for t in nums if t[0] != "L"]
        if num_absorber:
            merged = True
            nums = nums_rest
        else:
            if num_leaves > 1:
                merged = True
            nums = nums_rest + [_LEAF]

    def merge_sums(fs):
        nonlocal merged
        sums = [t for t in fs if t[0] == "sum"]
        rest = [t for t in fs if t[0] != "sum"]
        if len(sums) <= 1:
            return fs
        merged = True
        cur = sums[0]
        cur_w = None
        for nxt in sums[1:]:
            if cur_w is None:
                w = _merged_sum_weight(cur, nxt)
            else:
                if not _is_pure(nxt):
                    raise _Unmergeable
                w = cur_w * _width(nxt)
            if w is None:
                raise _Unmergeable
            cur_w = w
            cur = None
        return rest + [("Smerged", cur_w)]

    nums = merge_sums(nums)
    dens = merge_sums(dens)

    def part_depth(t):
        if t[0] == "Smerged":
            return _kraft(t[1])
        return _depth(t)

    num_parts = [part_depth(t) for t in nums]
    if sqrt_depth is not None:
        num_parts.append(sqrt_depth)
    den_parts = [part_depth(t) for t in dens]

    if not num_parts:
        raise _Unmergeable
    nd = (num_parts[0] if len(num_parts) == 1
          else _kraft(sum(1 << p for p in num_parts)))
    if den_parts:
        dd = (den_parts[0] if len(den_parts) == 1
              else _kraft(sum(1 << p for p in den_parts)))
        total = 1 + max(nd, dd)
        kind = "div"
    else:
        total = nd
        if len(num_parts) > 1:
            kind = "prod"
        elif sqrt_depth is not None:
            kind = "sqrt"
        else:
            t = nums[0]
            kind = "sum" if t[0] == "Smerged" else t[0]
    return total, merged, kind


def _prunable(t):
    r = _memo_prunable.get(t)
    if r is not None:
        return r
    if _contains_opaque(t):
        # no merge calculus through exp/log; keep the tree
        r = False
    else:
        nums, dens = [], []
        _add_factor(t, nums, dens)
        try:
            d, merged, _k = _canon(nums, dens)
            r = merged and d <= _depth(t)
        except _Unmergeable:
            r = False
    _memo_prunable[t] = r
    return r


# ---------------------------------------------------------------------------
# pool construction


def _signed_variants(c, minus_on):
    if _is_abs(c) or not minus_on:
        return [(1, c)]
    return [(1, c), (-1, c)]


def _gen_sums(below, lo, hi, plus_on, minus_on):
    cands = []
    for t in below:
        if t[0] in ("L", "div", "sqrt", "prod", "exp", "log"):
            cands.append(t)
        elif t[0] == "sum" and not _is_pure(t):
            cands.append(t)
    alts = []
    for t in sorted(set(cands)):
        alts.extend(_signed_variants(t, minus_on))
    alts.sort()
    out = set()

    def rec(i, rem, acc):
        if len(acc) >= 2 and (hi - rem) > lo:
            npos = sum(1 for s, _ in acc if s == 1)
            nneg = len(acc) - npos
            if npos >= 1 and (npos < 2 or plus_on) and (nneg == 0 or minus_on):
                out.add(("sum", tuple(acc)))
        for j in range(i, len(alts)):
            sc = alts[j]
            w = 1 << _depth(sc[1])
            if w > rem:
                continue
            acc.append(sc)
            rec(j, rem - w, acc)
            acc.pop()

    rec(0, hi, [])
    return out


def _enumerate_tuples(maxd, ops: OperatorSet):
    plus_on = "+" in ops.binary
    minus_on = "-" in ops.binary
    div_on = "/" in ops.binary
    prod_on = "*" in ops.binary
    sqrt_on = "sqrt" in ops.unary
    opaque_on = [tag for tag in ("exp", "log") if tag in ops.unary]

    pools = {0: [_LEAF]}
    for d in range(1, maxd + 1):
        new = set()
        below = [t for k in range(d) for t in pools[k]]
        lo, hi = 1 << (d - 1), 1 << d

        if plus_on or minus_on:
            new |= _gen_sums(below, lo, hi, plus_on, minus_on)

        if div_on:
            nums = [t for t in below
                    if t[0] in ("L", "sum", "sqrt", "prod", "exp", "log")]
            dens = [t for t in below
                    if t[0] in ("sum", "sqrt", "prod", "exp", "log")]
            for num in nums:
                for den in dens:
                    if 1 + max(_depth(num), _depth(den)) != d:
                        continue
                    cand = ("div", num, den)
                    if not _prunable(cand):
                        new.add(cand)

        if prod_on:
            qs = sorted(t for t in below if t[0] == "sqrt")
            sums_ = sorted(t for t in below if t[0] == "sum")
            dvs = sorted(t for t in below if t[0] == "div")
            els = sorted(t for t in below if t[0] in ("exp", "log"))
            pairs = []
            pairs += list(combinations_with_replacement(qs, 2))
            pairs += [(q, s) for q in qs for s in sums_]
            pairs += list(combinations_with_replacement(dvs, 2))
            if els:
                pairs += list(combinations_with_replacement(els, 2))
                others = [_LEAF] + qs + sums_ + dvs
                pairs += [(e, o) for e in els for o in others]
            for a, b in pairs:
                ms = tuple(sorted((a, b)))
                w = (1 << _depth(a)) + (1 << _depth(b))
                if not (lo < w <= hi):
                    continue
                cand = ("prod", ms)
                if not _prunable(cand):
                    new.add(cand)

        if sqrt_on:
            # sqrt of a bare L-monomial is pruned; sqrt of a sum is allowed
            for a in below:
                if a[0] not in ("sum", "div", "sqrt", "exp", "log"):
                    continue
                if 1 + _depth(a) != d:
                    continue
                new.add(("sqrt", a))

        for tag in opaque_on:
            for a in below:
                if 1 + _depth(a) == d:
                    new.add((tag, a))

        pools[d] = sorted(new)
    return pools


def _to_node(t):
    tag = t[0]
    if tag == "L":
        return Leaf(None)
    if tag == "sum":
        terms = sorted(t[1], key=lambda sc: (-sc[0], sc[1]))
        return Sum(tuple((s, _to_node(c)) for s, c in terms))
    if tag == "div":
        return Div(_to_node(t[1]), _to_node(t[2]))
    if tag == "prod":
        return Prod(tuple(_to_node(c) for c in t[1]))
    return Unary(tag, _to_node(t[1]))


def enumerate_gentrees(ops: OperatorSet, depth: int):
    """All pruned gentrees of depth <= depth, sorted by nondecreasing
    complexity with ties broken by canonical serialization."""
    if not isinstance(ops, OperatorSet):
        raise TypeError("ops must be an OperatorSet")
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth > 5:
        raise ValueError("enumeration beyond depth 5 is not tractable")
    pools = _enumerate_tuples(depth, ops)
    trees = [GenTree(_to_node(t)) for d in range(depth + 1) for t in pools[d]]
    trees.sort(key=lambda g: (complexity(g), serialize(g)))
    return trees


# ---------------------------------------------------------------------------
# literal pattern scan


def _is_leaf_sum(node):
    return isinstance(node, Sum) and all(isinstance(c, Leaf) for _, c in node.terms)


def contains_pruned_pattern(g):
    """First pruned pattern matched anywhere in the tree, or None.

    Checks, in order, R1 (leaf times/over leaf), R2a (leaf times leaf-sum),
    R2b (leaf-sum times leaf-sum), R3 (leaf-sum over leaf), and sqrtL.
    """
    root = g.root if isinstance(g, (GenTree,)) else getattr(g, "root", g)
    stack = [root]
    while stack:
        node = stack.pop(0)
        if isinstance(node, Prod):
            leaves = sum(1 for c in node.factors if isinstance(c, Leaf))
            leaf_sums = sum(1 for c in node.factors if _is_leaf_sum(c))
            if leaves >= 2:
                return "R1"
            if leaves >= 1 and leaf_sums >= 1:
                return "R2a"
            if leaf_sums >= 2:
                return "R2b"
            stack.extend(node.factors)
        elif isinstance(node, Div):
            if isinstance(node.num, Leaf) and isinstance(node.den, Leaf):
                return "R1"
            if _is_leaf_sum(node.num) and isinstance(node.den, Leaf):
                return "R3"
            stack.extend([node.num, node.den])
        elif isinstance(node, Unary):
            if node.op == "sqrt" and isinstance(node.arg, Leaf):
                return "sqrtL"
            stack.append(node.arg)
        elif isinstance(node, Sum):
            stack.extend(c for _, c in node.terms)
    return None
