"""Audits against an axiom system: reference solutions, error metrics,
generalization and dependence checks, counterexamples, template matching,
and the adsorption sanity constraints.

An axiom file describes a square system of equations over measured, latent,
and target variables in raw units.  The solver triangularizes what it can by
forward substitution and finishes the rest with a damped Newton iteration in
extended precision; extended precision matters because some targets (the
relative frequency shift, for one) are tiny differences of large
intermediates, and double arithmetic loses them entirely.  numpy's LAPACK
bindings refuse long doubles, so the small batched LU solve is hand-rolled.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .dataio import DataError
from .expr import Formula, eval_masked, parse

__all__ = [
    "AxiomError", "NoConvergence", "AxiomVariable", "AxiomSystem",
    "parse_axiom_file", "solve_axioms", "reference_values",
    "pointwise_errors", "numerical_errors", "NumericalErrors",
    "generalization_error", "verify_domain", "DomainVerdict",
    "dependence_analysis", "counterexample_search", "CounterExample",
    "template_match", "TemplateMatch", "thermo_check", "ThermoReport",
    "audit_candidate", "AuditReport",
]


class AxiomError(ValueError):
    """Malformed axiom file or a system the solver cannot set up."""


class NoConvergence(RuntimeError):
    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


@dataclass(frozen=True)
class AxiomVariable:
    name: str
    role: str            # measured | latent | target
    positive: bool = False
    nonnegative: bool = False


@dataclass(frozen=True)
class AxiomSystem:
    name: str
    constants: tuple     # ((name, value), ...)
    variables: tuple     # AxiomVariable entries
    equations: tuple     # ((lhs_text, rhs_text), ...)

    @property
    def measured(self):
        return tuple(v.name for v in self.variables if v.role == "measured")

    @property
    def target(self):
        for v in self.variables:
            if v.role == "target":
                return v.name
        raise AxiomError(f"system {self.name!r} declares no target variable")


def parse_axiom_file(path) -> AxiomSystem:
    name = None
    constants = []
    variables = []
    equations = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            head, _, rest = line.partition(" ")
            rest = rest.strip()
            try:
                if head == "system":
                    if name is not None:
                        raise AxiomError("duplicate system line")
                    if not rest:
                        raise AxiomError("system line needs a name")
                    name = rest
                elif head == "const":
                    ident, _, value = rest.partition("=")
                    ident = ident.strip()
                    if not ident.isidentifier() or not value.strip():
                        raise AxiomError("expected: const name = value")
                    if ident in seen:
                        raise AxiomError(f"duplicate symbol {ident!r}")
                    seen.add(ident)
                    constants.append((ident, float(value)))
                elif head == "var":
                    toks = rest.split()
                    if not toks or not toks[0].isidentifier():
                        raise AxiomError("expected: var name [>0|>=0] [role]")
                    ident = toks[0]
                    if ident in seen:
                        raise AxiomError(f"duplicate symbol {ident!r}")
                    seen.add(ident)
                    positive = nonneg = False
                    role = "latent"
                    i = 1
                    if i < len(toks) and toks[i] in (">", ">="):
                        # tolerate a space before the 0
                        if i + 1 >= len(toks) or toks[i + 1] != "0":
                            raise AxiomError("only > 0 / >= 0 bounds are supported")
                        positive = toks[i] == ">"
                        nonneg = not positive
                        i += 2
                    elif i < len(toks) and toks[i] in (">0", ">=0"):
                        positive = toks[i] == ">0"
                        nonneg = not positive
                        i += 1
                    if i < len(toks):
                        role = toks[i]
                        i += 1
                    if role not in ("measured", "latent", "target"):
                        raise AxiomError(f"unknown role {role!r}")
                    if i != len(toks):
                        raise AxiomError("trailing tokens on var line")
                    variables.append(AxiomVariable(ident, role, positive, nonneg))
                elif head == "eq":
                    lhs, sep, rhs = rest.partition("=")
                    if not sep or not lhs.strip() or not rhs.strip():
                        raise AxiomError("expected: eq expr = expr")
                    equations.append((lhs.strip(), rhs.strip()))
                else:
                    raise AxiomError(f"unknown directive {head!r}")
            except AxiomError as exc:
                raise AxiomError(f"{path}:{lineno}: {exc}") from None
            except ValueError as exc:
                raise AxiomError(f"{path}:{lineno}: {exc}") from None
    if name is None:
        raise AxiomError(f"{path}: missing system line")
    if not equations:
        raise AxiomError(f"{path}: no equations")
    system = AxiomSystem(name, tuple(constants), tuple(variables),
                         tuple(equations))
    system.target  # validates presence
    if sum(1 for v in variables if v.role == "target") > 1:
        raise AxiomError(f"{path}: more than one target variable")
    return system


# ---------------------------------------------------------------------------
# solving


def _lu_solve(A, b):
    """Batched LU with partial pivoting for small dense systems; works in
    whatever float dtype the inputs carry.  Singular systems get NaN."""
    A = A.copy()
    b = b.copy()
    B, n, _ = A.shape
    rows = np.arange(B)
    singular = np.zeros(B, dtype=bool)
    for k in range(n):
        piv = np.argmax(np.abs(A[:, k:, k]), axis=1) + k
        tmp = A[rows, k, :].copy()
        A[rows, k, :] = A[rows, piv, :]
        A[rows, piv, :] = tmp
        tb = b[rows, k].copy()
        b[rows, k] = b[rows, piv]
        b[rows, piv] = tb
        pivot = A[:, k, k]
        bad = np.abs(pivot) < np.finfo(A.dtype).tiny * 1e4
        singular |= bad
        safe = np.where(bad, 1.0, pivot)
        if k + 1 < n:
            factor = A[:, k + 1:, k] / safe[:, None]
            A[:, k + 1:, k:] -= factor[:, :, None] * A[:, None, k, k:]
            b[:, k + 1:] -= factor * b[:, k, None]
    x = np.zeros_like(b)
    for k in range(n - 1, -1, -1):
        acc = b[:, k]
        if k + 1 < n:
            acc = acc - np.sum(A[:, k, k + 1:] * x[:, k + 1:], axis=1)
        x[:, k] = acc / np.where(singular, 1.0, A[:, k, k])
    x[singular] = np.nan
    return x


class _Solver:
    """Presolved axiom system bound to a symbol table."""

    def __init__(self, system: AxiomSystem):
        self.system = system
        self.symbols = tuple(n for n, _ in system.constants) + tuple(
            v.name for v in system.variables)
        self.index = {n: i for i, n in enumerate(self.symbols)}
        if len(self.index) != len(self.symbols):
            raise AxiomError("constant and variable names collide")
        self.parsed = []
        for lhs, rhs in system.equations:
            try:
                self.parsed.append((parse(lhs, self.symbols),
                                    parse(rhs, self.symbols)))
            except ValueError as exc:
                raise AxiomError(f"bad equation {lhs!r} = {rhs!r}: {exc}") from None

        known = {n for n, _ in system.constants}
        known |= {v.name for v in system.variables if v.role == "measured"}
        unknown = [v.name for v in system.variables if v.role != "measured"]

        # forward substitution: peel equations of the shape bare = resolved
        self.assignments = []   # (name, formula) in evaluation order
        remaining = list(range(len(self.parsed)))
        texts = list(system.equations)
        changed = True
        while changed:
            changed = False
            for qi in list(remaining):
                lhs_t, rhs_t = texts[qi]
                for bare, expr_t, expr_f in ((lhs_t, rhs_t, self.parsed[qi][1]),
                                             (rhs_t, lhs_t, self.parsed[qi][0])):
                    bare = bare.strip()
                    if (bare in self.index and bare not in known
                            and bare in unknown
                            and self._resolved(expr_f, known)):
                        self.assignments.append((bare, expr_f))
                        known.add(bare)
                        remaining.remove(qi)
                        changed = True
                        break
        # backward elimination: an unknown bare on one side of an equation
        # and absent everywhere else is not worth a Newton column; it gets
        # computed by exact substitution after the core is solved.  This
        # also keeps difference-chain targets (y = df / f0 after df = f -
        # f0) from contaminating the core iteration with absolute scales.
        def eq_names(qi):
            lf, rf = self.parsed[qi]
            return ({self.symbols[i] for i in _vars_used(lf)}
                    | {self.symbols[i] for i in _vars_used(rf)})

        self.post = []  # assignments evaluated in reverse order after Newton
        eliminated = set()
        changed = True
        while changed:
            changed = False
            for qi in list(remaining):
                lhs_t, rhs_t = texts[qi]
                lf, rf = self.parsed[qi]
                for bare, other in ((lhs_t.strip(), rf), (rhs_t.strip(), lf)):
                    if (bare not in self.index or bare in known
                            or bare not in unknown or bare in eliminated):
                        continue
                    if bare in {self.symbols[i] for i in _vars_used(other)}:
                        continue
                    if any(bare in eq_names(qj) for qj in remaining if qj != qi):
                        continue
                    self.post.append((bare, other))
                    eliminated.add(bare)
                    remaining.remove(qi)
                    changed = True
                    break

        self.rump = [qi for qi in remaining
                     if not (self._resolved(self.parsed[qi][0], known)
                             and self._resolved(self.parsed[qi][1], known))]
        self.consistency = [qi for qi in remaining if qi not in self.rump]
        self.free = [n for n in unknown if n not in known and n not in eliminated]
        if len(self.rump) != len(self.free):
            raise AxiomError(
                f"system {system.name!r} is not square after presolve: "
                f"{len(self.rump)} equations for {len(self.free)} unknowns")
        flags = {v.name: v for v in system.variables}
        self.log_param = [flags[n].positive for n in self.free]
        self.positive = {v.name: v.positive for v in system.variables}

    def _resolved(self, formula: Formula, known) -> bool:
        used = _vars_used(formula)
        return all(self.symbols[i] in known or self.symbols[i] in
                   dict(self.system.constants) for i in used)

    # -- numeric solve

    def solve(self, inputs, dtype=np.longdouble, tol=1e-12, max_iter=60,
              strict=True):
        sysm = self.system
        names = self.symbols
        m = None
        for v in sysm.measured:
            if v not in inputs:
                raise AxiomError(f"missing measured input {v!r}")
            arr = np.atleast_1d(np.asarray(inputs[v]))
            m = arr.size if m is None else m
            if arr.size != m:
                raise AxiomError("measured inputs must share one length")
        if m is None:
            m = 1
        table = np.zeros((m, len(names)), dtype=dtype)
        for n, val in sysm.constants:
            table[:, self.index[n]] = dtype(val)
        for v in sysm.measured:
            table[:, self.index[v]] = np.asarray(inputs[v]).astype(dtype)

        for n, f in self.assignments:
            vals, ok = eval_masked(f, table)
            table[:, self.index[n]] = np.where(ok, vals, np.nan)

        best_res = np.zeros(m, dtype=float)
        if self.free:
            free_idx = np.array([self.index[n] for n in self.free])
            solved, best_res = self._newton(table, free_idx, tol, max_iter)
            if not solved.all():
                worst = float(np.max(best_res[~solved]))
                if strict:
                    raise NoConvergence(
                        f"axiom solve did not reach {tol:g} on "
                        f"{int((~solved).sum())} of {m} points "
                        f"(worst residual {worst:.3g})", best_residual=worst)
                table[~solved, :] = np.nan

        for n, f in reversed(self.post):
            vals, ok = eval_masked(f, table)
            table[:, self.index[n]] = np.where(ok, vals, np.nan)

        return {v.name: np.asarray(table[:, self.index[v.name]], dtype=dtype)
                for v in sysm.variables} | {
                    n: np.asarray(table[:, self.index[n]], dtype=dtype)
                    for n, _ in sysm.constants}

    def _side(self, f, table):
        vals, ok = eval_masked(f, table)
        return np.where(ok, vals, np.nan)

    def _residuals(self, table, frozen=None):
        """Per-equation residuals: log(lhs/rhs) whenever both sides share a
        sign (these systems are mostly multiplicative, and the log form
        keeps Jacobian entries O(1) across thirty decades of magnitude),
        otherwise a scale-normalized difference.  The form and scale chosen
        at a base point can be frozen so finite differencing and line
        searches see a consistent objective."""
        tiny = float(np.finfo(table.dtype).tiny) * 1e8
        parts = []
        fresh = []
        for t, qi in enumerate(self.rump):
            lf, rf = self.parsed[qi]
            lv = self._side(lf, table)
            rv = self._side(rf, table)
            if frozen is None:
                logmode = ((np.sign(lv) == np.sign(rv))
                           & (np.abs(lv) > tiny) & (np.abs(rv) > tiny))
                scale = np.maximum(np.maximum(np.abs(lv), np.abs(rv)), 1.0)
            else:
                logmode, scale = frozen[t]
            fresh.append((logmode, scale))
            diff = (lv - rv) / scale
            la = np.log(np.where(logmode, np.abs(lv), 1.0))
            ra = np.log(np.where(logmode, np.abs(rv), 1.0))
            parts.append(np.where(logmode, la - ra, diff))
        return np.stack(parts, axis=1), fresh

    def residual_report(self, table, eqs=None):
        """Max relative residual per point over the given equations (all of
        them by default)."""
        if eqs is None:
            eqs = range(len(self.parsed))
        worst = np.zeros(table.shape[0], dtype=float)
        for qi in eqs:
            lf, rf = self.parsed[qi]
            lv = self._side(lf, table)
            rv = self._side(rf, table)
            scale = np.maximum(np.maximum(np.abs(lv), np.abs(rv)), 1.0)
            rel = np.abs((lv - rv) / scale).astype(float)
            worst = np.maximum(worst, np.where(np.isfinite(rel), rel, np.inf))
        return worst

    def _warm(self, sub, free_idx):
        """Gauss-Seidel sweeps: wherever an equation has a bare unknown on
        one side, pull its value from the other side's current estimate.
        Puts triangular chains (frequency from period, and so on) right on
        the mark before Newton ever linearizes anything."""
        free_names = {self.symbols[i]: i for i in free_idx}
        with np.errstate(all="ignore"):
            for _ in range(3):
                for qi in self.rump:
                    lt, rt = self.system.equations[qi]
                    for bare, f in ((lt.strip(), self.parsed[qi][1]),
                                    (rt.strip(), self.parsed[qi][0])):
                        col = free_names.get(bare)
                        if col is None:
                            continue
                        vals, ok = eval_masked(f, sub)
                        good = ok & np.isfinite(vals)
                        if self.positive.get(bare, False):
                            good &= vals > 0
                        sub[good, col] = vals[good]
                        break

    def _starts(self, table, free_idx):
        m = table.shape[0]
        meas = [self.index[v] for v in self.system.measured]
        if meas:
            scale = np.max(np.abs(table[:, meas]), axis=1)
            scale = np.maximum(scale, 1.0)
        else:
            scale = np.ones(m, dtype=table.dtype)
        ones = np.ones((m, len(free_idx)), dtype=table.dtype)
        yield ones
        yield ones * scale[:, None]
        yield ones / scale[:, None]
        yield ones * np.sqrt(scale)[:, None]
        yield ones * table.dtype.type(1e-3)

    def _newton(self, table, free_idx, tol, max_iter):
        dtype = table.dtype
        m = table.shape[0]
        nf = len(free_idx)
        log_mask = np.array(self.log_param, dtype=bool)
        solved = np.zeros(m, dtype=bool)
        best = np.full(m, np.inf)

        for start in self._starts(table, free_idx):
            todo = ~solved
            if not todo.any():
                break
            sub = table[todo].copy()
            sub[:, free_idx] = start[todo]
            self._warm(sub, free_idx)
            x0 = sub[:, free_idx]
            u = np.where(log_mask[None, :],
                         np.log(np.abs(x0) + np.finfo(dtype).tiny),
                         x0).astype(dtype)

            def decode(uv):
                x = uv.copy()
                x[:, log_mask] = np.exp(np.clip(uv[:, log_mask], -700, 700))
                return x

            def put(sub_t, uv):
                sub_t[:, free_idx] = decode(uv)

            floor = max(4.0 * float(np.finfo(dtype).eps), tol * 1e-4)
            with np.errstate(all="ignore"):
                put(sub, u)
                # active set: points drop out as they converge, so a few
                # stragglers never make the whole batch re-evaluate
                act = np.arange(sub.shape[0])
                for _ in range(max_iter):
                    suba = sub[act]
                    r, forms = self._residuals(suba)
                    norm = np.max(np.abs(np.nan_to_num(r, nan=np.inf)), axis=1)
                    keep = norm > floor
                    if not keep.all():
                        act = act[keep]
                        if act.size == 0:
                            break
                        suba = suba[keep]
                        r = r[keep]
                        norm = norm[keep]
                        forms = [(lm[keep], sc[keep]) for lm, sc in forms]
                    ua = u[act]
                    J = np.empty((act.size, r.shape[1], nf), dtype=dtype)
                    for j in range(nf):
                        # generous secant step: equation scales can dwarf a
                        # variable's own magnitude, and a too-small step
                        # rounds the difference quotient to an exact zero
                        h = dtype.type(1e-4) * (1 + np.abs(ua[:, j]))
                        up = ua.copy()
                        up[:, j] = up[:, j] + h
                        st = suba.copy()
                        put(st, up)
                        rp, _ = self._residuals(st, forms)
                        J[:, :, j] = (rp - r) / h[:, None]
                    J = np.nan_to_num(J, nan=0.0, posinf=0.0, neginf=0.0)
                    step = _lu_solve(J, -np.nan_to_num(r, nan=0.0, posinf=0.0,
                                                       neginf=0.0))
                    step = np.clip(np.nan_to_num(step, nan=0.0), -1e3, 1e3)
                    alpha = np.ones(act.size, dtype=dtype)
                    improved = np.zeros(act.size, dtype=bool)
                    unew = ua.copy()
                    for _ in range(25):
                        out = np.flatnonzero(~improved)
                        trial = ua[out] + alpha[out, None] * step[out]
                        st = suba[out]
                        put(st, trial)
                        rt, _ = self._residuals(
                            st, [(lm[out], sc[out]) for lm, sc in forms])
                        nt = np.max(np.abs(np.nan_to_num(rt, nan=np.inf)),
                                    axis=1)
                        gain = nt < norm[out]
                        unew[out[gain]] = trial[gain]
                        improved[out[gain]] = True
                        if improved.all():
                            break
                        alpha = np.where(improved, alpha, alpha / 2)
                    if not improved.any():
                        break
                    u[act] = unew
                    sua = sub[act]
                    put(sua, unew)
                    sub[act] = sua
                live = self.rump + self.consistency
                final = self.residual_report(sub, live)
                # one more sweep: bare-sided equations become exact
                # assignments, clearing the last few ulps that the log
                # parameterization cannot express
                polished = sub.copy()
                self._warm(polished, free_idx)
                final2 = self.residual_report(polished, live)
                better = final2 < final
                sub[better] = polished[better]
                final = np.where(better, final2, final)
            idx = np.flatnonzero(todo)
            ok = final <= tol
            table[idx[ok]] = sub[ok]
            solved[idx[ok]] = True
            better = final < best[idx]
            best[idx] = np.where(better, final, best[idx])
        return solved, best


_solver_cache = {}


def _solver_for(system: AxiomSystem) -> _Solver:
    s = _solver_cache.get(id(system))
    if s is None or s.system is not system:
        s = _Solver(system)
        _solver_cache[id(system)] = s
    return s


def _vars_used(formula: Formula):
    used = set()

    def walk(node):
        from .expr import Div, Leaf, Prod, Sum, Unary
        if isinstance(node, Leaf):
            for i, a in enumerate(node.mono.powers):
                if a != 0:
                    used.add(i)
        elif isinstance(node, Sum):
            for _, c in node.terms:
                walk(c)
        elif isinstance(node, Prod):
            for c in node.factors:
                walk(c)
        elif isinstance(node, Div):
            walk(node.num)
            walk(node.den)
        else:
            walk(node.arg)

    walk(formula.root)
    return used


def solve_axioms(system: AxiomSystem, inputs, dtype=np.longdouble,
                 tol=1e-12, max_iter=60, strict=True):
    """Solve the system at the given measured inputs (raw units).

    Returns a dict mapping every symbol to its value array.  Points that do
    not reach the residual tolerance raise NoConvergence unless strict is
    False, in which case they come back as NaN.
    """
    return _solver_for(system).solve(inputs, dtype=dtype, tol=tol,
                                     max_iter=max_iter, strict=strict)


def reference_values(system: AxiomSystem, data, dtype=np.longdouble):
    """Axiom-implied target values in the dataset's normalized units."""
    raw = data.raw_X()
    inputs = {}
    for name in system.measured:
        if name not in data.variables:
            raise AxiomError(f"dataset lacks measured variable {name!r}")
        inputs[name] = raw[:, data.variables.index(name)]
    sol = solve_axioms(system, inputs, dtype=dtype)
    return np.asarray(sol[system.target], dtype=float) / data.y_divisor


# ---------------------------------------------------------------------------
# error metrics


@dataclass(frozen=True)
class NumericalErrors:
    eps2_abs: float
    epsinf_abs: float
    eps2_rel: float        # NaN when the reference crosses zero
    epsinf_rel: float
    pointwise_abs: np.ndarray = field(repr=False, default=None)
    pointwise_rel: np.ndarray = field(repr=False, default=None)


def pointwise_errors(values, reference, relative=True):
    values = np.asarray(values, dtype=float)
    reference = np.asarray(reference, dtype=float)
    err = np.abs(values - reference)
    if not relative:
        return err
    if np.any(reference == 0.0):
        raise DataError("relative error is undefined on a zero reference value")
    return err / np.abs(reference)


def numerical_errors(formula, data, reference=None) -> NumericalErrors:
    """Aggregate error cells of a candidate against the dataset targets, or
    against an explicit reference vector (for reasoning-error audits)."""
    ref = np.asarray(data.y if reference is None else reference, dtype=float)
    vals, ok = eval_masked(formula, data.X)
    vals = np.where(ok, vals, np.inf)
    pa = np.abs(vals - ref)
    e2a = float(np.sqrt(np.sum(pa * pa)))
    einfa = float(np.max(pa))
    if np.any(ref == 0.0):
        pr = None
        e2r = einfr = float("nan")
    else:
        pr = pa / np.abs(ref)
        e2r = float(np.sqrt(np.sum(pr * pr)))
        einfr = float(np.max(pr))
    return NumericalErrors(e2a, einfa, e2r, einfr, pa, pr)


# ---------------------------------------------------------------------------
# box sweeps (generalization, domain verification, dependence)


def _box_of(data, override=None):
    box = list(data.bounding_box())
    if override:
        if isinstance(override, dict):
            for name, rng in override.items():
                if name not in data.variables:
                    raise DataError(f"unknown variable {name!r} in box")
                box[data.variables.index(name)] = (float(rng[0]), float(rng[1]))
        else:
            box = [(float(lo), float(hi)) for lo, hi in override]
    return box


_fb_cache = {}


def _deviation_fn(formula, data, system, relative, dtype):
    solver = _solver_for(system)
    divisors = np.asarray(data.x_divisors, dtype=float)
    cols = {name: data.variables.index(name) for name in system.measured}

    def err(pts):
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        vals, ok = eval_masked(formula, pts)
        raw = pts * divisors[None, :]
        # several candidates get audited against the same grid; the axiom
        # solve dominates the cost, so memoize it on the raw input bytes
        key = (id(solver), np.dtype(dtype).name, data.y_divisor,
               hashlib.sha1(np.ascontiguousarray(raw).tobytes()).hexdigest())
        fb = _fb_cache.get(key)
        if fb is None:
            inputs = {name: raw[:, j].astype(dtype)
                      for name, j in cols.items()}
            sol = solver.solve(inputs, dtype=dtype, strict=False)
            fb = np.asarray(sol[system.target], dtype=float) / data.y_divisor
            if pts.shape[0] > 1024:
                if len(_fb_cache) >= 8:
                    _fb_cache.pop(next(iter(_fb_cache)))
                _fb_cache[key] = fb
        dev = np.abs(vals - fb)
        if relative:
            with np.errstate(all="ignore"):
                dev = dev / np.abs(fb)
        bad = ~ok | ~np.isfinite(fb) | (relative & (fb == 0.0))
        return np.where(bad, np.inf, dev)

    return err


def _grid(box, n_grid):
    axes = []
    for lo, hi in box:
        if lo == hi:
            axes.append(np.array([lo], dtype=float))
        else:
            axes.append(np.linspace(lo, hi, n_grid))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _sup_deviation(formula, data, system, box, relative, n_grid, dtype,
                   refine):
    err = _deviation_fn(formula, data, system, relative, dtype)
    pts = _grid(box, n_grid)
    vals = err(pts)
    sup = float(np.max(vals))
    where = pts[int(np.argmax(vals))]
    if not np.isfinite(sup):
        return sup, where
    if refine:
        order = np.argsort(vals)[::-1][:5]
        for idx in order:
            res = minimize(lambda x: -float(min(err(x[None, :])[0], 1e300)),
                           pts[idx], bounds=box, method="L-BFGS-B")
            cand = -float(res.fun)
            if cand > sup and np.isfinite(cand):
                sup = cand
                where = res.x
    return sup, where


def generalization_error(formula, data, system, box=None, n_grid=96,
                         dtype=np.float64, refine=True) -> float:
    """Sup of the relative deviation from the axiom solution over the data
    bounding box (or an override).  Double precision is the default; pass
    np.longdouble when the target cancels large intermediates."""
    sup, _ = _sup_deviation(formula, data, system, _box_of(data, box),
                            relative=True, n_grid=n_grid, dtype=dtype,
                            refine=refine)
    return sup


@dataclass(frozen=True)
class DomainVerdict:
    passed: bool
    sup: float
    at: tuple


def verify_domain(formula, data, system, box, tol=1.0, relative=False,
                  n_grid=2049, dtype=np.longdouble) -> DomainVerdict:
    """Check that the candidate stays within tol of the axiom solution over
    an explicit box (absolute deviation by default)."""
    sup, where = _sup_deviation(formula, data, system, _box_of(data, box),
                                relative=relative, n_grid=n_grid, dtype=dtype,
                                refine=False)
    return DomainVerdict(bool(sup <= tol), sup, tuple(float(v) for v in where))


def dependence_analysis(formula, data, system, factor=10.0, n_grid=96,
                        dtype=np.float64) -> dict:
    """Flag each variable as "correct" or "missing" by comparing the
    deviation sup on the data box against the sup when that variable's range
    is stretched by the factor in both directions."""
    base_box = _box_of(data)
    base, _ = _sup_deviation(formula, data, system, base_box, relative=True,
                             n_grid=n_grid, dtype=dtype, refine=True)
    gate = max(2.0 * base, 0.01)
    flags = {}
    for j, name in enumerate(data.variables):
        ext = list(base_box)
        lo, hi = ext[j]
        ext[j] = (lo / factor, hi * factor)
        sup, _ = _sup_deviation(formula, data, system, ext, relative=True,
                                n_grid=n_grid, dtype=dtype, refine=True)
        flags[name] = "missing" if sup > gate else "correct"
    return flags


@dataclass(frozen=True)
class CounterExample:
    point: dict
    deviation: float


def counterexample_search(formula, data, system, box=None, tol=0.05,
                          n_points=256, relative=True,
                          dtype=np.float64):
    """Look for a point where the candidate strays beyond tol from the axiom
    solution: a low-discrepancy scan first, then a local ascent from the
    worst scanned point.  Returns the first witness found, or None."""
    bx = _box_of(data, box)
    err = _deviation_fn(formula, data, system, relative, dtype)
    sampler = qmc.Halton(d=len(bx), scramble=False)
    unit = sampler.random(n_points)
    lo = np.array([b[0] for b in bx])
    hi = np.array([b[1] for b in bx])
    pts = lo + unit * (hi - lo)
    vals = err(pts)
    finite = np.where(np.isfinite(vals), vals, -np.inf)
    over = np.flatnonzero(vals > tol)
    if over.size:
        i = int(over[0])
        point = dict(zip(data.variables, (float(v) for v in pts[i])))
        return CounterExample(point, float(vals[i]))
    i = int(np.argmax(finite))
    res = minimize(lambda x: -float(min(err(x[None, :])[0], 1e300)),
                   pts[i], bounds=bx, method="L-BFGS-B")
    dev = -float(res.fun)
    if np.isfinite(dev) and dev > tol:
        point = dict(zip(data.variables, (float(v) for v in res.x)))
        return CounterExample(point, dev)
    return None


# ---------------------------------------------------------------------------
# template matching (single-variable isotherm shapes)


@dataclass(frozen=True)
class TemplateMatch:
    template: str
    consistent: bool
    params: dict
    residual: float


def _as_fn(model, variables=("p",)):
    if isinstance(model, Formula):
        def fn(x):
            vals, ok = eval_masked(model, np.asarray(x, dtype=float)[:, None])
            return np.where(ok, vals, np.nan)
        return fn
    if callable(model):
        return model
    raise TypeError("model must be a Formula or a callable")


_TEMPLATE_GRID = None


def _template_grid():
    global _TEMPLATE_GRID
    if _TEMPLATE_GRID is None:
        _TEMPLATE_GRID = np.logspace(-2, 3, 501)
    return _TEMPLATE_GRID


def template_match(model, template="one-site", grid=None) -> TemplateMatch:
    """Decide whether a single-variable model is algebraically an adsorption
    isotherm of the requested family, by exact linear regression of the
    implied identity on a log-spaced grid."""
    fn = _as_fn(model)
    p = _template_grid() if grid is None else np.asarray(grid, dtype=float)
    with np.errstate(all="ignore"):
        q = np.asarray(fn(p), dtype=float)
    if not np.all(np.isfinite(q)):
        return TemplateMatch(template, False, {}, float("inf"))

    if template == "one-site":
        A = np.stack([p, p * q], axis=-1)
        coef, *_ = np.linalg.lstsq(A, q, rcond=None)
        c1, c2 = coef
        K = -float(c2)
        S0 = float(c1 / -c2) if c2 != 0 else float("inf")
        with np.errstate(all="ignore"):
            fit = S0 * K * p / (1 + K * p)
            resid = float(np.max(np.abs((fit - q) / q)))
        ok = K > 0 and S0 > 0 and math.isfinite(resid) and resid < 1e-7
        return TemplateMatch(template, bool(ok), {"S0": S0, "K": K}, resid)

    if template == "two-site":
        A = np.stack([-p * q, -q, p ** 2, p], axis=-1)
        coef, *_ = np.linalg.lstsq(A, q * p ** 2, rcond=None)
        d1, d0, n2, n1 = (float(v) for v in coef)
        roots = np.roots([1.0, d1, d0])
        if np.any(np.abs(roots.imag) > 0) or np.any(roots.real >= 0):
            return TemplateMatch(template, False, {}, float("inf"))
        K_pair = np.sort(-1.0 / roots.real)  # ascending affinities
        K1, K2 = (float(v) for v in K_pair)
        s = K1 * K2
        M = np.array([[1.0, 1.0], [K1, K2]])
        try:
            q12 = np.linalg.solve(M, np.array([n2, s * n1]))
        except np.linalg.LinAlgError:
            return TemplateMatch(template, False, {}, float("inf"))
        if np.any(q12 <= 0):
            return TemplateMatch(template, False, {}, float("inf"))
        q1, q2 = (float(v) for v in q12)
        with np.errstate(all="ignore"):
            fit = (q1 * K1 * p / (1 + K1 * p) + q2 * K2 * p / (1 + K2 * p))
            resid = float(np.max(np.abs((fit - q) / q)))
        ok = math.isfinite(resid) and resid < 1e-7
        params = {"q1": q1, "K1": K1, "q2": q2, "K2": K2}
        return TemplateMatch(template, bool(ok), params, resid)

    raise ValueError(f"unknown template {template!r}")


# ---------------------------------------------------------------------------
# adsorption sanity constraints


@dataclass(frozen=True)
class ThermoReport:
    constraints: tuple   # five booleans
    passed: int
    details: dict = field(repr=False, default=None)

    def __iter__(self):
        return iter(self.constraints)


def thermo_check(model) -> ThermoReport:
    """Five physical sanity constraints for an isotherm-like model on
    p > 0: zero limit at vanishing pressure, positivity, monotonicity,
    near-linear low-pressure growth (finite Henry slope), and saturation."""
    fn = _as_fn(model)
    grid = np.logspace(-6, 6, 120001)
    with np.errstate(all="ignore"):
        vals = np.asarray(fn(grid), dtype=float)
        f12, f9, f6 = (float(np.asarray(fn(np.array([x])))[0])
                       for x in (1e-12, 1e-9, 1e-6))
        tail = np.asarray(fn(np.array([1e6, 1e8, 1e10])), dtype=float)

    c1 = bool(math.isfinite(f9) and abs(f9) < 1e-6)
    c2 = bool(np.all(np.isfinite(vals)) and np.all(vals > 0))
    dd = (vals[2:] - vals[:-2]) / (grid[2:] - grid[:-2])
    c3 = bool(np.all(np.isfinite(vals)) and np.all(dd >= -1e-8))
    s1 = (f9 - f12) / (1e-9 - 1e-12)
    s2 = (f6 - f9) / (1e-6 - 1e-9)
    c4 = bool(math.isfinite(s1) and math.isfinite(s2) and s1 > 0 and s2 > 0
              and max(s1, s2) / min(s1, s2) < 100)
    c5 = bool(np.all(np.isfinite(tail)) and np.all(tail > 0)
              and (tail.max() - tail.min()) / tail.mean() < 0.01)
    cs = (c1, c2, c3, c4, c5)
    return ThermoReport(cs, sum(cs), details={
        "low_pressure_value": f9, "henry_slopes": (s1, s2),
        "saturation_tail": tuple(float(v) for v in tail)})


# ---------------------------------------------------------------------------
# combined audit


@dataclass(frozen=True)
class AuditReport:
    errors: NumericalErrors
    reasoning: NumericalErrors
    generalization: float
    dependence: dict

    def to_dict(self):
        def cells(e):
            return {"eps2_abs": e.eps2_abs, "epsinf_abs": e.epsinf_abs,
                    "eps2_rel": e.eps2_rel, "epsinf_rel": e.epsinf_rel}
        return {"errors": cells(self.errors),
                "reasoning_errors": cells(self.reasoning),
                "generalization_error": self.generalization,
                "dependence": dict(self.dependence)}


def audit_candidate(formula, data, system: AxiomSystem, n_grid=96,
                    dtype=np.float64) -> AuditReport:
    """Full audit of one candidate: error cells against the data, against
    the axiom solution, the box-sup generalization error, and per-variable
    dependence flags."""
    fb = reference_values(system, data)
    return AuditReport(
        errors=numerical_errors(formula, data),
        reasoning=numerical_errors(formula, data, reference=fb),
        generalization=generalization_error(formula, data, system,
                                            n_grid=n_grid, dtype=dtype),
        dependence=dependence_analysis(formula, data, system, n_grid=n_grid,
                                       dtype=dtype),
    )
