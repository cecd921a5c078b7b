"""Per-gentree fitting: least squares over integer leaf powers, constant
activations, and real constants.

The discrete lattice (power vectors and activation patterns) is enumerated
exhaustively per tree, in ascending total power norm so that simple
assignments are visited first.  The continuous inner problem in the active
constants h is solved exactly when the model is affine in h, and by damped
Gauss-Newton with deterministic multistart otherwise; each batch's best
candidates get a higher-precision polish pass before they may take the
incumbent.  Anything that evaluates outside an operator's domain at a data
point is scored +inf and skipped.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .expr import (
    Div, Formula, GenTree, Leaf, LMonomial, Prod, Sum, Unary,
    bind, complexity, evaluate, leaf_slots,
)

__all__ = [
    "SearchConfig", "PowerAssignment", "FitResult", "FitTask",
    "fit_gentree", "inner_fit_constants", "validate_result",
]

STATUS_OPTIMAL = "optimal-within-enumeration"
STATUS_TIME = "time-limited"
STATUS_INFEASIBLE = "infeasible-dimensional"
STATUS_ABORTED = "aborted-by-incumbent"

_CHUNK = 4096
_POLISH_PER_BATCH = 64


@dataclass(frozen=True)
class SearchConfig:
    depth: int = 3
    max_constants: int = 1
    power_bound: int = 2
    power_budget: int = 6
    const_bound: float = 100.0
    tolerance: float = 1e-4
    time_slice_s: float = 10.0
    budget_s: float = 1200.0
    seed: int = 0
    dimensional: bool = False

    def __post_init__(self):
        if self.depth < 0 or self.max_constants < 0:
            raise ValueError("depth and max_constants must be nonnegative")
        if self.power_bound < 0 or self.power_budget < 0:
            raise ValueError("power bounds must be nonnegative")
        if self.const_bound <= 0:
            raise ValueError("const_bound must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class PowerAssignment:
    powers: tuple  # per leaf, flattened (m * n)
    z: tuple       # activation flag per leaf
    h: tuple       # constant per leaf (1.0 where inactive)


@dataclass
class FitResult:
    formula: Formula
    sse: float
    status: str
    elapsed: float
    evaluated_assignments: int
    tree: GenTree = None
    assignment: PowerAssignment = None

    @property
    def complexity(self):
        return complexity(self.formula if self.formula is not None else self.tree)


# ---------------------------------------------------------------------------
# lattice and activation patterns


def _lattice(n, bound, budget):
    """All per-leaf power vectors, sorted by (total |power|, lex)."""
    vecs = [p for p in product(range(-bound, bound + 1), repeat=n)
            if sum(abs(a) for a in p) <= budget]
    vecs.sort(key=lambda p: (sum(abs(a) for a in p), p))
    return np.array(vecs, dtype=np.int64).reshape(len(vecs), n)


def _z_patterns(m, k):
    pats = []
    for bits in product((0, 1), repeat=m):
        if sum(bits) <= k:
            pats.append(bits)
    pats.sort(key=lambda b: (sum(b), b))
    return pats


def _compositions(total, slots, avail):
    """Tuples (t1..tslots) over avail summing to total, lex ascending."""
    if slots == 1:
        if total in avail:
            yield (total,)
        return
    for t in avail:
        if t > total:
            break
        for rest in _compositions(total - t, slots - 1, avail):
            yield (t,) + rest


# ---------------------------------------------------------------------------
# structural evaluation on batched leaf values


def _eval_struct(node, leafvals, ctx):
    """Evaluate the tree on (B, mpts) leaf value arrays; NaN marks domain
    violations and propagates."""
    if isinstance(node, Leaf):
        i = ctx[0]
        ctx[0] += 1
        return leafvals[i]
    if isinstance(node, Sum):
        acc = None
        for sign, child in node.terms:
            v = _eval_struct(child, leafvals, ctx)
            v = v if sign > 0 else -v
            acc = v if acc is None else acc + v
        return acc
    if isinstance(node, Prod):
        acc = None
        for child in node.factors:
            v = _eval_struct(child, leafvals, ctx)
            acc = v if acc is None else acc * v
        return acc
    if isinstance(node, Div):
        num = _eval_struct(node.num, leafvals, ctx)
        den = _eval_struct(node.den, leafvals, ctx)
        return np.where(den == 0.0, np.nan, num) / np.where(den == 0.0, 1.0, den)
    if isinstance(node, Unary):
        v = _eval_struct(node.arg, leafvals, ctx)
        if node.op == "sqrt":
            return np.where(v < 0, np.nan, np.sqrt(np.abs(v)))
        if node.op == "exp":
            return np.exp(v)
        if node.op == "log":
            return np.where(v <= 0, np.nan, np.log(np.where(v <= 0, 1.0, v)))
        return np.abs(v)
    raise TypeError(f"not a tree node: {node!r}")


def _contains_active(node, active, ctx):
    if isinstance(node, Leaf):
        i = ctx[0]
        ctx[0] += 1
        return i in active
    if isinstance(node, Sum):
        return any(_contains_active(c, active, ctx) for _, c in node.terms)
    if isinstance(node, Prod):
        return any(_contains_active(c, active, ctx) for c in node.factors)
    if isinstance(node, Div):
        a = _contains_active(node.num, active, ctx)
        b = _contains_active(node.den, active, ctx)
        return a or b
    return _contains_active(node.arg, active, ctx)


def _affine_in_active(node, active, ctx):
    """True when the expression is affine in the active constants: active
    leaves reach the root only through sums and through products/quotients
    whose other operands are constant in h."""
    if isinstance(node, Leaf):
        ctx[0] += 1
        return True
    if isinstance(node, Sum):
        return all(_affine_in_active(c, active, ctx) for _, c in node.terms)
    if isinstance(node, Prod):
        ok = True
        seen_active = 0
        for c in node.factors:
            mark = ctx[0]
            has = _contains_active(c, active, [mark])
            if has:
                seen_active += 1
                sub = [mark]
                ok = ok and _affine_in_active(c, active, sub)
            ctx[0] = mark + _count_leaves(c)
        return ok and seen_active <= 1
    if isinstance(node, Div):
        mark = ctx[0]
        ok = _affine_in_active(node.num, active, ctx)
        den_start = ctx[0]
        den_has = _contains_active(node.den, active, [den_start])
        ctx[0] = den_start + _count_leaves(node.den)
        return ok and not den_has
    if isinstance(node, Unary):
        mark = ctx[0]
        has = _contains_active(node.arg, active, [mark])
        ctx[0] = mark + _count_leaves(node.arg)
        return not has
    raise TypeError(f"not a tree node: {node!r}")


def _count_leaves(node):
    return leaf_slots(GenTree(node))


def _sqrt_of_affine(root, active):
    return (isinstance(root, Unary) and root.op == "sqrt"
            and _affine_in_active(root.arg, active, [0]))


# ---------------------------------------------------------------------------
# batched inner solvers


def _sse_of(resid):
    s = np.sum(resid * resid, axis=-1)
    return np.where(np.isfinite(s), s, np.inf)


def _leaf_arrays(V_batch, h, z_idx):
    """Per-leaf (B, mpts) arrays: fixed leaves as-is, active scaled by h."""
    out = [V_batch[:, i, :] for i in range(V_batch.shape[1])]
    for col, i in enumerate(z_idx):
        out[i] = h[:, col][:, None] * out[i]
    return out


def _f_of_h(root, V_batch, h, z_idx):
    with np.errstate(all="ignore"):
        return _eval_struct(root, _leaf_arrays(V_batch, h, z_idx), [0])


def _solve_normal(G, c):
    """Batched solve of small SPD-ish systems with min-norm fallback."""
    B, k = c.shape
    if k == 1:
        g = G[:, 0, 0]
        return np.where(g > 0, c[:, 0] / np.where(g > 0, g, 1.0), 0.0)[:, None]
    if k == 2:
        a, b, d = G[:, 0, 0], G[:, 0, 1], G[:, 1, 1]
        det = a * d - b * b
        scale = np.maximum(a * d, b * b)
        ok = det > 1e-12 * np.maximum(scale, 1e-300)
        h1 = np.where(ok, (d * c[:, 0] - b * c[:, 1]) / np.where(ok, det, 1.0), 0.0)
        h2 = np.where(ok, (a * c[:, 1] - b * c[:, 0]) / np.where(ok, det, 1.0), 0.0)
        out = np.stack([h1, h2], axis=1)
        if not ok.all():
            for i in np.flatnonzero(~ok):
                sol, *_ = np.linalg.lstsq(G[i], c[i], rcond=None)
                out[i] = sol
        return out
    out = np.zeros_like(c)
    for i in range(B):
        try:
            out[i] = np.linalg.solve(G[i], c[i])
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(G[i], c[i], rcond=None)
            out[i] = sol
    return out


def _linear_fit(root, V_batch, z_idx, y, omega, target=None):
    """Exact least squares when f is affine in h.  Optionally fits the sqrt
    argument against y^2 (used to seed the sqrt-of-affine start)."""
    B = V_batch.shape[0]
    nact = len(z_idx)
    yy = y if target is None else target
    h0 = np.zeros((B, nact))
    A = _f_of_h(root, V_batch, h0, z_idx)
    cols = []
    for j in range(nact):
        e = np.zeros((B, nact))
        e[:, j] = 1.0
        cols.append(_f_of_h(root, V_batch, e, z_idx) - A)
    Bmat = np.stack(cols, axis=1)  # (B, nact, mpts)
    r0 = yy[None, :] - A
    G = np.einsum("bim,bjm->bij", Bmat, Bmat)
    c = np.einsum("bim,bm->bi", Bmat, r0)
    bad = ~np.isfinite(G).all(axis=(1, 2)) | ~np.isfinite(c).all(axis=1)
    G = np.where(bad[:, None, None], np.eye(nact)[None], G)
    c = np.where(bad[:, None], 0.0, c)
    h = _solve_normal(G, c)
    h = np.clip(h, -omega, omega)
    resid = A + np.einsum("bim,bi->bm", Bmat, h) - yy[None, :]
    sse = np.where(bad, np.inf, _sse_of(resid))
    if nact == 2:
        # a clipped coordinate may admit a better partner: repair each
        at_edge = (np.abs(h) >= omega - 1e-12)
        if at_edge.any():
            for fix in (0, 1):
                other = 1 - fix
                r_fix = r0 - Bmat[:, fix, :] * h[:, fix][:, None]
                g = np.einsum("bm,bm->b", Bmat[:, other, :], Bmat[:, other, :])
                hv = np.where(g > 0, np.einsum(
                    "bm,bm->b", Bmat[:, other, :], r_fix) / np.where(g > 0, g, 1), 0.0)
                hv = np.clip(hv, -omega, omega)
                h2 = h.copy()
                h2[:, other] = hv
                resid2 = A + np.einsum("bim,bi->bm", Bmat, h2) - yy[None, :]
                sse2 = np.where(bad, np.inf, _sse_of(resid2))
                better = sse2 < sse
                h = np.where(better[:, None], h2, h)
                sse = np.where(better, sse2, sse)
    return h, sse


def _gn_fit(root, V_batch, z_idx, y, starts, iters, omega):
    """Batched damped Gauss-Newton; returns per-assignment best (h, sse)."""
    B, S = V_batch.shape[0], starts.shape[1]
    nact = len(z_idx)
    Vrep = np.repeat(V_batch, S, axis=0)
    h = starts.reshape(B * S, nact).astype(float)
    h = np.clip(h, -omega, omega)
    lam = np.full(B * S, 1e-3)

    def objective(hh):
        r = _f_of_h(root, Vrep, hh, z_idx) - y[None, :]
        return r, _sse_of(r)

    r, sse = objective(h)
    for _ in range(iters):
        J = np.empty((B * S, nact, y.size))
        for j in range(nact):
            eps = 1e-7 * (1.0 + np.abs(h[:, j]))
            hp = h.copy()
            hp[:, j] = hp[:, j] + eps
            rp, _ = objective(hp)
            J[:, j, :] = (rp - r) / eps[:, None]
        J = np.nan_to_num(J, nan=0.0, posinf=0.0, neginf=0.0)
        G = np.einsum("bim,bjm->bij", J, J)
        G = G + lam[:, None, None] * np.eye(nact)[None]
        c = -np.einsum("bim,bm->bi", J, np.nan_to_num(r, nan=0.0,
                                                      posinf=0.0, neginf=0.0))
        step = _solve_normal(G, c)
        trial = np.clip(h + step, -omega, omega)
        rt, sset = objective(trial)
        better = sset < sse
        h = np.where(better[:, None], trial, h)
        r = np.where(better[:, None], rt, r)
        sse = np.where(better, sset, sse)
        lam = np.where(better, np.maximum(lam / 3.0, 1e-12),
                       np.minimum(lam * 8.0, 1e12))
    h = h.reshape(B, S, nact)
    sse = sse.reshape(B, S)
    pick = np.argmin(sse, axis=1)
    rows = np.arange(B)
    return h[rows, pick], sse[rows, pick]


def _scaled_start(root, V_batch, z_idx, y):
    f1 = _f_of_h(root, V_batch, np.ones((V_batch.shape[0], len(z_idx))), z_idx)
    num = np.sum(np.abs(y))
    den = np.nansum(np.abs(np.where(np.isfinite(f1), f1, np.nan)), axis=1)
    s = np.where(den > 0, num / np.where(den > 0, den, 1.0), 1.0)
    return np.clip(np.nan_to_num(s, nan=1.0, posinf=1.0, neginf=1.0), 1e-6, 1e6)


# ---------------------------------------------------------------------------
# the resumable per-tree task


class FitTask:
    """Exhaustive sweep over one gentree's discrete assignments, resumable
    in time slices.  Keeps the running incumbent and its tie-break key."""

    def __init__(self, tree: GenTree, data, cfg: SearchConfig, units=None):
        if data.m < 1:
            raise ValueError("dataset must contain at least one point")
        self.tree = tree
        self.data = data
        self.cfg = cfg
        self.root = tree.root
        self.nleaves = leaf_slots(tree)
        self.y = np.asarray(data.y, dtype=float)
        self.X = np.asarray(data.X, dtype=float)
        self.P = _lattice(data.n, cfg.power_bound, cfg.power_budget)
        with np.errstate(all="ignore"):
            V = np.ones((self.P.shape[0], data.m))
            for j in range(data.n):
                col = self.X[:, j][None, :]
                pw = self.P[:, j][:, None]
                contrib = np.where(pw == 0, 1.0, col ** pw)
                contrib = np.where((col == 0.0) & (pw < 0), np.nan, contrib)
                V = V * contrib
        self.V = V  # (R, mpts) lattice leaf values
        self.norms = np.abs(self.P).sum(axis=1)
        self.groups = {int(t): np.flatnonzero(self.norms == t)
                       for t in np.unique(self.norms)}
        self.z_list = _z_patterns(self.nleaves, cfg.max_constants)

        units_src = units if units is not None else getattr(data, "var_units", None)
        self.unit_matrix = None
        self.target_unit = None
        if cfg.dimensional and not data.constants_have_units:
            if units_src is None or data.target_unit is None:
                raise ValueError("dimensional filtering requires a unit file")
            self.unit_matrix = np.array([list(u) for u in units_src], dtype=np.int64)
            self.target_unit = np.array(list(data.target_unit), dtype=np.int64)
            self.leaf_units = self.P @ self.unit_matrix  # (R, nb)

        self.best = None  # (sse, complexity, powers_flat, z, h)
        self.evaluated = 0
        self.elapsed = 0.0
        self.cancelled = False
        self._gen = self._assignments()
        self._done = False
        self._any_unit_ok = self.unit_matrix is None

    # -- discrete schedule

    def _assignments(self):
        avail = sorted(self.groups)
        m = self.nleaves
        maxtot = avail[-1] * m
        for z in self.z_list:
            z_idx = tuple(i for i, b in enumerate(z) if b)
            for total in range(0, maxtot + 1):
                for comp in _compositions(total, m, avail):
                    blocks = [self.groups[t] for t in comp]
                    sizes = [len(b) for b in blocks]
                    count = int(np.prod(sizes))
                    for lo in range(0, count, _CHUNK):
                        hi = min(lo + _CHUNK, count)
                        g = np.arange(lo, hi)
                        idx = np.empty((hi - lo, m), dtype=np.int64)
                        rem = g
                        for j in range(m - 1, -1, -1):
                            rem, digit = np.divmod(rem, sizes[j])
                            idx[:, j] = blocks[j][digit]
                        yield z, z_idx, idx

    # -- unit filter

    def _units_ok(self, idx):
        if self.unit_matrix is None:
            return np.ones(idx.shape[0], dtype=bool)
        lu = self.leaf_units[idx]  # (B, m, nb)
        ok = np.ones(idx.shape[0], dtype=bool)
        ctx = [0]

        def walk(node):
            if isinstance(node, Leaf):
                i = ctx[0]
                ctx[0] += 1
                return lu[:, i, :], np.ones(idx.shape[0], dtype=bool)
            if isinstance(node, Sum):
                u0, v0 = walk(node.terms[0][1])
                for _, c in node.terms[1:]:
                    u, v = walk(c)
                    v0 = v0 & v & (u == u0).all(axis=1)
                return u0, v0
            if isinstance(node, Prod):
                u0, v0 = walk(node.factors[0])
                for c in node.factors[1:]:
                    u, v = walk(c)
                    u0 = u0 + u
                    v0 = v0 & v
                return u0, v0
            if isinstance(node, Div):
                un, vn = walk(node.num)
                ud, vd = walk(node.den)
                return un - ud, vn & vd
            if isinstance(node, Unary):
                u, v = walk(node.arg)
                if node.op == "sqrt":
                    even = (u % 2 == 0).all(axis=1)
                    return u // 2, v & even
                if node.op in ("exp", "log"):
                    zero = (u == 0).all(axis=1)
                    return np.zeros_like(u), v & zero
                return u, v
            raise TypeError(f"not a tree node: {node!r}")

        u, valid = walk(self.root)
        ok = valid & (u == self.target_unit[None, :]).all(axis=1)
        return ok

    # -- incumbent bookkeeping

    def _consider(self, idx_rows, z, z_idx, h_rows, sse_rows):
        finite = np.isfinite(sse_rows)
        if not finite.any():
            return
        sse_rows = np.where(finite, sse_rows, np.inf)
        best_sse = sse_rows.min()
        if self.best is not None and best_sse > self.best[0]:
            return
        cand_rows = np.flatnonzero(sse_rows <= best_sse)
        for r in cand_rows:
            powers = tuple(int(v) for v in self.P[idx_rows[r]].ravel())
            hvec = [1.0] * self.nleaves
            for col, i in enumerate(z_idx):
                hvec[i] = float(h_rows[r, col])
            key = (float(sse_rows[r]), self._assignment_complexity(idx_rows[r], z),
                   powers)
            if self.best is None or key < (self.best[0], self.best[1], self.best[2]):
                self.best = (key[0], key[1], key[2], z, tuple(hvec))

    def _assignment_complexity(self, lattice_rows, z):
        leafcost = 0
        for i, row in enumerate(lattice_rows):
            nz = int(np.count_nonzero(self.P[row]))
            leafcost += 1 + nz + (1 if z[i] else 0)
        return self._internal_nodes + leafcost

    # -- batch driver

    def run(self, slice_s, stop_flag=None):
        """Process batches for up to slice_s seconds; returns the status."""
        if self._done:
            return self.status
        t0 = time.monotonic()
        if not hasattr(self, "_internal_nodes"):
            self._internal_nodes = complexity(self.tree) - self.nleaves
        omega = self.cfg.const_bound
        while True:
            if stop_flag is not None and stop_flag():
                self.cancelled = True
                break
            if time.monotonic() - t0 > slice_s:
                break
            try:
                z, z_idx, idx = next(self._gen)
            except StopIteration:
                self._done = True
                break
            keep = self._units_ok(idx)
            if not keep.all():
                idx = idx[keep]
            self.evaluated += idx.shape[0]
            if idx.shape[0] == 0:
                continue
            self._any_unit_ok = True
            Vb = self.V[idx]  # (B, m, mpts)
            nact = len(z_idx)
            if nact == 0:
                with np.errstate(all="ignore"):
                    f = _eval_struct(self.root, [Vb[:, i, :] for i in
                                                 range(self.nleaves)], [0])
                    sse = _sse_of(f - self.y[None, :])
                self._consider(idx, z, z_idx, np.zeros((idx.shape[0], 0)), sse)
                continue
            if _affine_in_active(self.root, set(z_idx), [0]):
                h, sse = _linear_fit(self.root, Vb, z_idx, self.y, omega)
                self._consider(idx, z, z_idx, h, sse)
                continue
            # quick screen, then polish the batch's best few
            s = _scaled_start(self.root, Vb, z_idx, self.y)
            quick = np.stack([np.tile(s[:, None], (1, nact)),
                              np.ones((idx.shape[0], nact))], axis=1)
            if _sqrt_of_affine(self.root, set(z_idx)):
                hlin, _ = _linear_fit(self.root.arg, Vb, z_idx, self.y, omega,
                                      target=self.y * self.y)
                quick = np.concatenate([hlin[:, None, :], quick], axis=1)
            h, sse = _gn_fit(self.root, Vb, z_idx, self.y, quick, 8, omega)
            order = np.argsort(sse, kind="stable")
            top = order[:_POLISH_PER_BATCH]
            top = top[np.isfinite(sse[top])]
            if top.size:
                hp, ssep = self._polish(Vb[top], z_idx, h[top])
                improved = ssep < sse[top]
                h[top] = np.where(improved[:, None], hp, h[top])
                sse[top] = np.where(improved, ssep, sse[top])
                self._consider(idx[top], z, z_idx, h[top], sse[top])
        self.elapsed += time.monotonic() - t0
        return self.status

    def _polish(self, Vb, z_idx, h_warm):
        B = Vb.shape[0]
        nact = len(z_idx)
        omega = self.cfg.const_bound
        s = _scaled_start(self.root, Vb, z_idx, self.y)
        base = [h_warm,
                np.ones((B, nact)), -np.ones((B, nact)),
                np.full((B, nact), omega / 10), np.full((B, nact), -omega / 10),
                np.tile(s[:, None], (1, nact)), -np.tile(s[:, None], (1, nact)),
                np.tile((10 * s)[:, None], (1, nact))]
        if _sqrt_of_affine(self.root, set(z_idx)):
            hlin, _ = _linear_fit(self.root.arg, Vb, z_idx, self.y, omega,
                                  target=self.y * self.y)
            base.insert(0, hlin)
        starts = np.stack(base, axis=1)
        return _gn_fit(self.root, Vb, z_idx, self.y, starts, 30, omega)

    # -- results

    @property
    def done(self):
        return self._done

    @property
    def status(self):
        if self.cancelled:
            return STATUS_ABORTED
        if not self._any_unit_ok and self._done:
            return STATUS_INFEASIBLE
        return STATUS_OPTIMAL if self._done else STATUS_TIME

    def result(self) -> FitResult:
        if self.best is None:
            return FitResult(None, np.inf, self.status, self.elapsed,
                             self.evaluated, tree=self.tree)
        sse, comp, powers, z, h = self.best
        n = self.data.n
        monos = []
        for i in range(self.nleaves):
            pw = powers[i * n:(i + 1) * n]
            if z[i]:
                monos.append(LMonomial(h[i], pw))
            else:
                monos.append(LMonomial(1.0, pw, fixed=True))
        formula = bind(self.tree, monos, self.data.variables)
        resid = evaluate(formula, self.X) - self.y
        true_sse = float(np.sum(resid * resid))
        assignment = PowerAssignment(powers, z, h)
        return FitResult(formula, true_sse, self.status, self.elapsed,
                         self.evaluated, tree=self.tree, assignment=assignment)


# ---------------------------------------------------------------------------
# public entry points


def fit_gentree(g: GenTree, data, cfg: SearchConfig, units=None) -> FitResult:
    """Fit one gentree, honoring cfg.time_slice_s as the per-call budget."""
    task = FitTask(g, data, cfg, units=units)
    task.run(cfg.time_slice_s)
    return task.result()


def inner_fit_constants(g, powers, z, data, cfg: SearchConfig = None):
    """Solve the continuous problem for one fixed assignment.

    powers: per-leaf integer vectors (flattened or nested); z: activation
    flags.  Returns (h tuple, sse).
    """
    cfg = cfg or SearchConfig()
    arr = np.asarray(powers, dtype=np.int64).reshape(-1, data.n)
    tree = g if isinstance(g, GenTree) else GenTree(g.root)
    m = leaf_slots(tree)
    if arr.shape[0] != m or len(z) != m:
        raise ValueError("assignment shape does not match the tree")
    X = np.asarray(data.X, dtype=float)
    y = np.asarray(data.y, dtype=float)
    with np.errstate(all="ignore"):
        V = np.ones((1, m, data.m))
        for i in range(m):
            for j in range(data.n):
                a = int(arr[i, j])
                if a == 0:
                    continue
                col = X[:, j]
                vals = col ** a
                if a < 0:
                    vals = np.where(col == 0.0, np.nan, vals)
                V[0, i, :] *= vals
    z_idx = tuple(i for i, b in enumerate(z) if b)
    root = tree.root
    omega = cfg.const_bound
    if not z_idx:
        with np.errstate(all="ignore"):
            f = _eval_struct(root, [V[:, i, :] for i in range(m)], [0])
        sse = float(_sse_of(f - y[None, :])[0])
        return tuple(1.0 for _ in range(m)), sse
    if _affine_in_active(root, set(z_idx), [0]):
        h, sse = _linear_fit(root, V, z_idx, y, omega)
    else:
        s = _scaled_start(root, V, z_idx, y)
        nact = len(z_idx)
        base = [np.ones((1, nact)), -np.ones((1, nact)),
                np.full((1, nact), omega / 10), np.full((1, nact), -omega / 10),
                np.tile(s[:, None], (1, nact)), -np.tile(s[:, None], (1, nact)),
                np.tile((10 * s)[:, None], (1, nact)),
                np.tile((s / 10)[:, None], (1, nact))]
        if _sqrt_of_affine(root, set(z_idx)):
            hlin, _ = _linear_fit(root.arg, V, z_idx, y, omega, target=y * y)
            base.insert(0, hlin)
        starts = np.stack(base, axis=1)
        h, sse = _gn_fit(root, V, z_idx, y, starts, 40, omega)
    hvec = [1.0] * m
    for col, i in enumerate(z_idx):
        hvec[i] = float(h[0, col])
    return tuple(hvec), float(sse[0])


def validate_result(result: FitResult, cfg: SearchConfig) -> bool:
    """Post-hoc check that a result respects the configured bounds."""
    if result.assignment is None:
        return True
    a = result.assignment
    n = len(a.powers) // max(len(a.z), 1)
    for i, zi in enumerate(a.z):
        leaf = a.powers[i * n:(i + 1) * n]
        if any(abs(p) > cfg.power_bound for p in leaf):
            return False
        if sum(abs(p) for p in leaf) > cfg.power_budget:
            return False
        if zi and abs(a.h[i]) > cfg.const_bound + 1e-12:
            return False
        if not zi and a.h[i] != 1.0:
            return False
    if sum(a.z) > cfg.max_constants:
        return False
    return True
