"""Expression core: L-monomials, gentree nodes, parsing, evaluation.

A formula is a rooted tree whose internal nodes carry arithmetic operators
and whose leaves are L-monomials (a constant times integer powers of the
input variables).  A gentree is the same tree with unbound leaf slots; the
fitter binds every slot to a concrete monomial to obtain a formula.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

__all__ = [
    "LMonomial", "Leaf", "Sum", "Prod", "Div", "Unary",
    "GenTree", "Formula", "DomainError", "ParseError",
    "parse", "evaluate", "serialize", "complexity", "depth",
    "bind", "leaf_slots",
]

UNARY_OPS = ("sqrt", "exp", "log", "abs")


class DomainError(ArithmeticError):
    """Evaluation hit a point outside an operator's domain.

    Carries the serialized text of the offending subexpression so reports
    can point at the exact node.
    """

    def __init__(self, reason: str, node_text: str):
        super().__init__(f"{reason} in '{node_text}'")
        self.reason = reason
        self.node_text = node_text


class ParseError(ValueError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


@dataclass(frozen=True)
class LMonomial:
    """h * x1^a1 * ... * xn^an.

    ``fixed`` marks the constant as pinned to exactly 1 (the monomial does
    not consume one of the k free constants).
    """

    coeff: float
    powers: tuple
    fixed: bool = False

    def __post_init__(self):
        if self.fixed and self.coeff != 1.0:
            raise ValueError("fixed-one monomial must have coeff exactly 1")
        if any(p != int(p) for p in self.powers):
            raise ValueError("monomial powers must be integers")


@dataclass(frozen=True)
class Leaf:
    """Leaf slot; ``mono`` is None while the slot is unbound."""

    mono: Optional[LMonomial] = None


@dataclass(frozen=True)
class Sum:
    terms: tuple  # of (sign, node) with sign in {+1, -1}


@dataclass(frozen=True)
class Prod:
    factors: tuple


@dataclass(frozen=True)
class Div:
    num: object
    den: object


@dataclass(frozen=True)
class Unary:
    op: str
    arg: object

    def __post_init__(self):
        if self.op not in UNARY_OPS:
            raise ValueError(f"unknown unary operator {self.op!r}")


Node = Union[Leaf, Sum, Prod, Div, Unary]


@dataclass(frozen=True)
class GenTree:
    """Operator skeleton with (possibly) unbound leaf slots."""

    root: object


@dataclass(frozen=True)
class Formula:
    """A gentree with every leaf bound, tied to an ordered variable list."""

    root: object
    variables: tuple

    def __call__(self, x):
        return evaluate(self, x)


def _root_of(obj):
    if isinstance(obj, (GenTree, Formula)):
        return obj.root
    return obj


# ---------------------------------------------------------------------------
# structural measures


def depth(obj) -> int:
    """Tree depth with multiway sums/products measured by their best binary
    realization (Kraft weight), so flattening never changes the depth."""
    return _depth(_root_of(obj))


def _depth(node) -> int:
    if isinstance(node, Leaf):
        return 0
    if isinstance(node, Sum):
        w = sum(1 << _depth(c) for _, c in node.terms)
        return (w - 1).bit_length()
    if isinstance(node, Prod):
        w = sum(1 << _depth(c) for c in node.factors)
        return (w - 1).bit_length()
    if isinstance(node, Div):
        return 1 + max(_depth(node.num), _depth(node.den))
    if isinstance(node, Unary):
        return 1 + _depth(node.arg)
    raise TypeError(f"not a tree node: {node!r}")


def complexity(obj) -> int:
    """Internal-node count plus per-leaf cost.

    A bound leaf costs 1 + (number of nonzero exponents) + (1 if its
    constant is free); an unbound slot costs the minimum, 1.
    """
    return _complexity(_root_of(obj))


def _complexity(node) -> int:
    if isinstance(node, Leaf):
        if node.mono is None:
            return 1
        nz = sum(1 for p in node.mono.powers if p != 0)
        return 1 + nz + (0 if node.mono.fixed else 1)
    if isinstance(node, Sum):
        internal = len(node.terms) - 1
        if all(s < 0 for s, _ in node.terms):
            internal += 1  # a standalone negation costs a node
        return internal + sum(_complexity(c) for _, c in node.terms)
    if isinstance(node, Prod):
        return len(node.factors) - 1 + sum(_complexity(c) for c in node.factors)
    if isinstance(node, Div):
        return 1 + _complexity(node.num) + _complexity(node.den)
    if isinstance(node, Unary):
        return 1 + _complexity(node.arg)
    raise TypeError(f"not a tree node: {node!r}")


def leaf_slots(obj) -> int:
    """Number of leaves, bound or not, in left-to-right order."""
    return sum(1 for _ in _iter_leaves(_root_of(obj)))


def _iter_leaves(node):
    if isinstance(node, Leaf):
        yield node
    elif isinstance(node, Sum):
        for _, c in node.terms:
            yield from _iter_leaves(c)
    elif isinstance(node, Prod):
        for c in node.factors:
            yield from _iter_leaves(c)
    elif isinstance(node, Div):
        yield from _iter_leaves(node.num)
        yield from _iter_leaves(node.den)
    elif isinstance(node, Unary):
        yield from _iter_leaves(node.arg)
    else:
        raise TypeError(f"not a tree node: {node!r}")


def bind(tree, monomials, variables) -> Formula:
    """Bind the leaf slots of a gentree, left to right, producing a Formula."""
    monos = list(monomials)
    if leaf_slots(tree) != len(monos):
        raise ValueError("monomial count does not match leaf slots")
    it = iter(monos)

    def rec(node):
        if isinstance(node, Leaf):
            return Leaf(next(it))
        if isinstance(node, Sum):
            return Sum(tuple((s, rec(c)) for s, c in node.terms))
        if isinstance(node, Prod):
            return Prod(tuple(rec(c) for c in node.factors))
        if isinstance(node, Div):
            return Div(rec(node.num), rec(node.den))
        if isinstance(node, Unary):
            return Unary(node.op, rec(node.arg))
        raise TypeError(f"not a tree node: {node!r}")

    return Formula(rec(_root_of(tree)), tuple(variables))


# ---------------------------------------------------------------------------
# evaluation


def evaluate(f: Formula, x):
    """Evaluate a formula at one point (length-n sequence) or a stack of
    points (m, n array).  Raises DomainError on division by zero, sqrt of a
    negative, or log of a non-positive value at any supplied point."""
    X = np.asarray(x)
    if not np.issubdtype(X.dtype, np.floating):
        X = X.astype(float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != len(f.variables):
        raise ValueError(
            f"expected points with {len(f.variables)} coordinates, got shape {X.shape}"
        )
    out, bad = _eval_node(f.root, X, f.variables, raise_on_bad=True)
    return float(out[0]) if single else out


def eval_masked(f: Formula, x):
    """Like evaluate() but returns (values, valid_mask) instead of raising.

    Invalid entries hold NaN.  Used by grid sweeps that must survive
    partially out-of-domain boxes.
    """
    X = np.asarray(x)
    if not np.issubdtype(X.dtype, np.floating):
        X = X.astype(float)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    out, bad = _eval_node(f.root, X, f.variables, raise_on_bad=False)
    valid = ~bad & np.isfinite(out)
    out = np.where(valid, out, np.nan)
    if single:
        return float(out[0]), bool(valid[0])
    return out, valid


def _eval_node(node, X, names, raise_on_bad):
    """Returns (values, bad_mask).  bad_mask flags domain violations."""
    if isinstance(node, Leaf):
        mono = node.mono
        if mono is None:
            raise ValueError("cannot evaluate an unbound leaf slot")
        out = np.full(X.shape[0], mono.coeff, dtype=X.dtype)
        bad = np.zeros(X.shape[0], dtype=bool)
        with np.errstate(all="ignore"):
            for j, a in enumerate(mono.powers):
                if a == 0:
                    continue
                col = X[:, j]
                if a < 0:
                    zero = col == 0.0
                    if zero.any():
                        if raise_on_bad:
                            raise DomainError("division by zero", _ser(node, names))
                        bad |= zero
                out = out * col ** int(a)
        return out, bad
    if isinstance(node, Sum):
        acc = None
        bad = None
        for sign, child in node.terms:
            v, b = _eval_node(child, X, names, raise_on_bad)
            v = v if sign > 0 else -v
            acc = v if acc is None else acc + v
            bad = b if bad is None else bad | b
        return acc, bad
    if isinstance(node, Prod):
        acc = None
        bad = None
        with np.errstate(all="ignore"):
            for child in node.factors:
                v, b = _eval_node(child, X, names, raise_on_bad)
                acc = v if acc is None else acc * v
                bad = b if bad is None else bad | b
        return acc, bad
    if isinstance(node, Div):
        num, bn = _eval_node(node.num, X, names, raise_on_bad)
        den, bd = _eval_node(node.den, X, names, raise_on_bad)
        zero = den == 0.0
        if zero.any():
            if raise_on_bad:
                raise DomainError("division by zero", _ser(node, names))
        with np.errstate(all="ignore"):
            out = num / den
        return out, bn | bd | zero
    if isinstance(node, Unary):
        v, b = _eval_node(node.arg, X, names, raise_on_bad)
        with np.errstate(all="ignore"):
            if node.op == "sqrt":
                neg = v < 0
                if neg.any() and raise_on_bad:
                    raise DomainError("square root of a negative", _ser(node, names))
                return np.sqrt(np.where(neg, 0, v)), b | neg
            if node.op == "exp":
                return np.exp(v), b
            if node.op == "log":
                npos = ~(v > 0)
                if npos.any() and raise_on_bad:
                    raise DomainError("log of a non-positive", _ser(node, names))
                return np.log(np.where(npos, 1, v)), b | npos
            if node.op == "abs":
                return np.abs(v), b
    raise TypeError(f"not a tree node: {node!r}")


# ---------------------------------------------------------------------------
# serialization

_ATOM_RE = re.compile(r"[A-Za-z_]\w*(\^-?\d+)?$|[0-9.]+([eE][+-]?\d+)?$")


def _fmt_num(v: float) -> str:
    return repr(float(v))


def serialize(obj) -> str:
    """Canonical infix text.  Formulas re-parse to an evaluation-identical
    tree; gentree skeletons render unbound slots as L1, L2, ... and are not
    meant to be re-parsed."""
    node = _root_of(obj)
    names = obj.variables if isinstance(obj, Formula) else None
    return _ser(node, names)


def _ser(node, names):
    counter = [0]
    return _ser_rec(node, names, counter)


def _leaf_text(mono, names):
    parts = []
    for j, a in enumerate(mono.powers):
        if a == 0:
            continue
        name = names[j] if names else f"x{j + 1}"
        parts.append(name if a == 1 else f"{name}^{int(a)}")
    if mono.fixed:
        return "*".join(parts) if parts else "1"
    return "*".join([_fmt_num(mono.coeff)] + parts)


def _ser_rec(node, names, counter):
    if isinstance(node, Leaf):
        if node.mono is None:
            counter[0] += 1
            return f"L{counter[0]}"
        return _leaf_text(node.mono, names)
    if isinstance(node, Sum):
        out = []
        for i, (sign, child) in enumerate(node.terms):
            text = _ser_rec(child, names, counter)
            if isinstance(child, Sum):
                text = f"({text})"
            if text.startswith("-"):
                sign, text = -sign, text[1:]
            if i == 0:
                out.append(text if sign > 0 else f"-{text}")
            else:
                out.append(f"+{text}" if sign > 0 else f"-{text}")
        return "".join(out)
    if isinstance(node, Prod):
        parts = []
        for child in node.factors:
            text = _ser_rec(child, names, counter)
            if isinstance(child, (Sum, Div)):
                text = f"({text})"
            parts.append(text)
        return "*".join(parts)
    if isinstance(node, Div):
        num = _ser_rec(node.num, names, counter)
        if isinstance(node.num, Sum):
            num = f"({num})"
        den = _ser_rec(node.den, names, counter)
        if not _ATOM_RE.match(den):
            den = f"({den})"
        return f"{num}/{den}"
    if isinstance(node, Unary):
        return f"{node.op}({_ser_rec(node.arg, names, counter)})"
    raise TypeError(f"not a tree node: {node!r}")


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_]\w*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        if m.group("num") is not None:
            tokens.append(("num", float(m.group("num")), m.start()))
        elif m.group("id") is not None:
            tokens.append(("id", m.group("id"), m.start()))
        else:
            tokens.append(("op", m.group("op"), m.start()))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text, variables):
        self.text = text
        self.variables = tuple(variables)
        self.index = {name: i for i, name in enumerate(self.variables)}
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op):
        kind, val, at = self.take()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", at)

    def parse(self):
        node = self.expr()
        kind, val, at = self.peek()
        if kind != "end":
            raise ParseError(f"trailing input {val!r}", at)
        return Formula(node, self.variables)

    def expr(self):
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.term()
                node = _add(node, 1 if val == "+" else -1, rhs)
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                rhs = self.factor()
                node = _mul(node, rhs) if val == "*" else _div(node, rhs)
            else:
                return node

    def factor(self):
        node = self.base()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            node = _power(node, self.signed_number(), len(self.variables))
        return node

    def signed_number(self):
        sign = 1.0
        kind, val, at = self.peek()
        if kind == "op" and val == "-":
            self.take()
            sign = -1.0
        kind, val, at = self.take()
        if kind != "num":
            raise ParseError("expected a numeric exponent", at)
        return sign * val

    def base(self):
        kind, val, at = self.take()
        if kind == "op" and val == "-":
            return _negate(self.base())
        if kind == "num":
            return Leaf(LMonomial(val, (0,) * len(self.variables)))
        if kind == "id":
            k2, v2, _ = self.peek()
            if val in UNARY_OPS and k2 == "op" and v2 == "(":
                self.take()
                arg = self.expr()
                self.expect_op(")")
                return Unary(val, arg)
            if val not in self.index:
                raise ParseError(f"unknown variable {val!r}", at)
            powers = tuple(
                1 if j == self.index[val] else 0 for j in range(len(self.variables))
            )
            return Leaf(LMonomial(1.0, powers, fixed=True))
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError("expected a value", at)


def _is_bound_leaf(node):
    return isinstance(node, Leaf) and node.mono is not None


def _negate(node):
    if _is_bound_leaf(node) and not node.mono.fixed:
        return Leaf(LMonomial(-node.mono.coeff, node.mono.powers))
    if isinstance(node, Sum):
        return Sum(tuple((-s, c) for s, c in node.terms))
    return Sum(((-1, node),))


def _add(a, sign, b):
    terms = list(a.terms) if isinstance(a, Sum) else [(1, a)]
    if isinstance(b, Sum):
        terms.extend((sign * s, c) for s, c in b.terms)
    else:
        terms.append((sign, b))
    return Sum(tuple(terms))


def _mul(a, b):
    if _is_bound_leaf(a) and _is_bound_leaf(b):
        ma, mb = a.mono, b.mono
        powers = tuple(x + y for x, y in zip(ma.powers, mb.powers))
        if ma.fixed and mb.fixed:
            return Leaf(LMonomial(1.0, powers, fixed=True))
        return Leaf(LMonomial(ma.coeff * mb.coeff, powers))
    factors = list(a.factors) if isinstance(a, Prod) else [a]
    factors.extend(b.factors if isinstance(b, Prod) else [b])
    return Prod(tuple(factors))


def _div(a, b):
    if _is_bound_leaf(a) and _is_bound_leaf(b) and b.mono.coeff != 0.0:
        ma, mb = a.mono, b.mono
        powers = tuple(x - y for x, y in zip(ma.powers, mb.powers))
        if ma.fixed and mb.fixed:
            return Leaf(LMonomial(1.0, powers, fixed=True))
        return Leaf(LMonomial(ma.coeff / mb.coeff, powers))
    return Div(a, b)


def _power(node, e, nvars):
    twice = e * 2.0
    if twice != int(twice):
        raise ParseError(f"exponent {e} is not an integer or half-integer", 0)
    k2 = int(twice)
    if k2 % 2 == 0:
        return _int_power(node, k2 // 2, nvars)
    return Unary("sqrt", _int_power(node, k2, nvars))


def _int_power(node, k, nvars):
    if _is_bound_leaf(node):
        mono = node.mono
        if mono.coeff == 0.0 and k < 0:
            raise ParseError("zero raised to a negative power", 0)
        powers = tuple(p * k for p in mono.powers)
        if mono.fixed:
            return Leaf(LMonomial(1.0, powers, fixed=True))
        return Leaf(LMonomial(mono.coeff ** k, powers))
    if k == 0:
        return Leaf(LMonomial(1.0, (0,) * nvars, fixed=True))
    body = node if abs(k) == 1 else Prod((node,) * abs(k))
    if k > 0:
        return body
    return Div(Leaf(LMonomial(1.0, (0,) * nvars, fixed=True)), body)


def parse(text: str, variables) -> Formula:
    """Parse an infix expression over the given ordered variable names."""
    return _Parser(text, variables).parse()
