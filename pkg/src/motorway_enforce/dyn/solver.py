"""Solving DYN systems and deciding how many acceleration changes suffice.

For fixed splitting points every car's position is linear in its segment
accelerations, so each constraint sampled at a time instant is a linear
row.  A small LP then either minimizes the worst violation (feasibility) or
optimizes a terminal gap or speed.  Sampled rows are only necessary
conditions; the exact vertex test of ``check_plan`` finds any interior dip,
whose time is added as a new row (cutting planes) before re-solving.

The split times themselves are searched over a grid plus coordinate-wise
golden-section refinement.  The search for ``n`` splits is always seeded
with the best configuration for ``n - 1`` (padded by a duplicate split), so
every reported quantity is monotone in ``n``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from ..mlsls import GapConstraint
from ..traffic import TimedWord
from .model import DynSpec, DynSystem, Phase, PiecewisePlan, _pieces, check_plan, segment_matrices

STRICT_EPS = 1e-7
FEAS_TOL = 1e-9
DELTA = 1e-6
MAX_N = 8
GRID = 8
_HIGHS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


# --------------------------------------------------------------------------
# results
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SolveResult:
    status: str  # "feasible", "infeasible" or "unknown"
    n: int
    plan: Optional[PiecewisePlan] = None
    proven: bool = False
    reason: str = ""
    margin: float = math.nan

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


@dataclass(frozen=True)
class OutcomeBox:
    pos: dict
    spd: dict
    extension: float

    def close_to(self, other: "OutcomeBox", delta: float = DELTA) -> bool:
        if abs(self.extension - other.extension) > delta:
            return False
        for mine, theirs in ((self.pos, other.pos), (self.spd, other.spd)):
            if mine.keys() != theirs.keys():
                return False
            for k in mine:
                a, b = mine[k], theirs[k]
                if (a is None) != (b is None):
                    return False
                if a is not None and (abs(a[0] - b[0]) > delta or abs(a[1] - b[1]) > delta):
                    return False
        return True


@dataclass(frozen=True)
class Decision:
    status: str  # "feasible", "infeasible" or "indeterminate"
    n: int
    word: Optional[TimedWord] = None
    plan: Optional[PiecewisePlan] = None
    proven: bool = False
    reason: str = ""
    history: tuple = ()

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


# --------------------------------------------------------------------------
# linear rows for fixed splitting points
# --------------------------------------------------------------------------

class _Lp:
    def __init__(self, spec: DynSpec, phases, splits: tuple, horizon: float):
        self.spec = spec
        self.T = horizon
        self.borders = np.array((0.0, *splits, horizon))
        self.ctrl = spec.controlled
        self.k = len(splits) + 1
        self.nvar = len(self.ctrl) * self.k + 1
        self.phases = phases

    def car_pos(self, car, t):
        t = np.asarray(t, float)
        sp = self.spec
        coef = np.zeros((len(t), self.nvar))
        if car in self.ctrl:
            i = self.ctrl.index(car)
            _, pos = segment_matrices(self.borders, t)
            coef[:, i * self.k:(i + 1) * self.k] = pos
            return sp.pos0[car] + sp.spd0[car] * t, coef
        return sp.pos0[car] + sp.spd0[car] * t + 0.5 * sp.acc0[car] * t * t, coef

    def car_spd(self, car, t):
        t = np.asarray(t, float)
        sp = self.spec
        coef = np.zeros((len(t), self.nvar))
        if car in self.ctrl:
            i = self.ctrl.index(car)
            tau, _ = segment_matrices(self.borders, t)
            coef[:, i * self.k:(i + 1) * self.k] = tau
            return sp.spd0[car] + 0 * t, coef
        return sp.spd0[car] + sp.acc0[car] * t, coef

    def gap(self, g: GapConstraint, t):
        cf, af = self.car_pos(g.front, t)
        cr, ar = self.car_pos(g.rear, t)
        return cf - cr - self.spec.sizes[g.rear], af - ar

    def samples(self, ph: Phase, extra):
        pts = []
        for lo, hi, lc, hc in _pieces(ph.interval, self.borders[1:-1], self.T):
            if lo == hi:
                pts.append((lo, lc and hc))
                continue
            pts += [(lo, lc), (hi, hc), (0.5 * (lo + hi), True), (lo + 0.25 * (hi - lo), True),
                    (lo + 0.75 * (hi - lo), True)]
        iv = ph.interval
        for t in extra:
            if iv.contains(t) and t <= self.T:
                pts.append((t, True))
        return pts

    def rows(self, extra: dict):
        A, b, eq_A, eq_b = [], [], [], []
        for k, ph in enumerate(self.phases):
            pts = self.samples(ph, extra.get(k, ()))
            if not pts:
                continue
            ts = np.array([p[0] for p in pts])
            exact = [p[1] for p in pts]
            for g in ph.theta:
                const, coef = self.gap(g, ts)
                is_eq = g.lo == g.hi
                for r in range(len(ts)):
                    if not math.isinf(g.lo):
                        eps = STRICT_EPS if (exact[r] and not g.lo_closed) else 0.0
                        row = -coef[r].copy()
                        row[-1] = -1.0
                        A.append(row)
                        b.append(const[r] - g.lo - eps)
                    if not math.isinf(g.hi):
                        eps = STRICT_EPS if (exact[r] and not g.hi_closed) else 0.0
                        row = coef[r].copy()
                        row[-1] = -1.0
                        A.append(row)
                        b.append(g.hi - const[r] - eps)
                    if is_eq:
                        eq_A.append(coef[r].copy())
                        eq_b.append(g.lo - const[r])
        bd = self.spec.bounds
        for car in self.ctrl:
            const, coef = self.car_spd(car, self.borders)
            for r in range(len(self.borders)):
                A.append(coef[r].copy())
                b.append(bd.spd_max - const[r])
                A.append(-coef[r])
                b.append(const[r] - bd.spd_min)
        return A, b, eq_A, eq_b

    def var_bounds(self, z_max):
        bd = self.spec.bounds
        return [(bd.acc_min, bd.acc_max)] * (self.nvar - 1) + [(-1.0, z_max)]

    def plan(self, x) -> PiecewisePlan:
        acc = {c: tuple(x[i * self.k:(i + 1) * self.k]) for i, c in enumerate(self.ctrl)}
        return PiecewisePlan(tuple(self.borders[1:-1]), acc, self.T)

    def objective(self, target):
        kind, who, _ = target
        if kind == "gap":
            const, coef = self.gap(GapConstraint(*who), [self.T])
        else:
            const, coef = self.car_spd(who, [self.T])
        return float(const[0]), coef[0]


def _polish(lp: _Lp, x, eq_A, eq_b):
    if not eq_A:
        return x
    A = np.array(eq_A)
    r = np.array(eq_b) - A @ x
    if np.max(np.abs(r), initial=0) < 1e-13:
        return x
    dx, *_ = np.linalg.lstsq(A, r, rcond=None)
    y = x + dx
    bounds = lp.var_bounds(np.inf)
    for i, (lo, hi) in enumerate(bounds[:-1]):
        if y[i] < lo - 1e-12 or y[i] > hi + 1e-12:
            return x
    return y


class _Problem:
    """Fixed spec and constraint set; memoizes LP results by split configuration."""

    def __init__(self, spec: DynSpec, relaxed: bool, tol: float):
        self.spec = spec
        self.relaxed = relaxed
        self.tol = tol
        self.phases = spec.phases[:-1] if relaxed else spec.phases
        self.T = spec.horizon
        self.memo: dict = {}

    def evaluate(self, splits: tuple, target=None):
        """``(score, plan)``: score is -violation for feasibility, else the
        sense-adjusted objective (``-inf`` when infeasible)."""
        key = (tuple(round(s, 12) for s in splits), target)
        if key in self.memo:
            return self.memo[key]
        res = self._solve(tuple(splits), target)
        self.memo[key] = res
        return res

    def _solve(self, splits, target):
        lp = _Lp(self.spec, self.phases, splits, self.T)
        extra: dict = {}
        best = (-math.inf, None)
        for _ in range(10):
            A, b, eq_A, eq_b = lp.rows(extra)
            c = np.zeros(lp.nvar)
            if target is None:
                c[-1] = 1.0
                bounds = lp.var_bounds(None)
            else:
                const, coef = lp.objective(target)
                c[:] = -target[2] * coef
                c[-1] = 0.0
                bounds = lp.var_bounds(0.0)
            res = linprog(c, A_ub=np.array(A) if A else None, b_ub=np.array(b) if b else None,
                          bounds=bounds, method="highs", options=_HIGHS)
            if res.status != 0:
                return best
            x = _polish(lp, res.x, eq_A, eq_b)
            plan = lp.plan(x)
            rep = check_plan(plan, self.spec, relaxed=self.relaxed, tol=self.tol)
            if target is None:
                score = -res.x[-1]
                if rep.ok:
                    return (max(score, 0.0), plan)
                best = (min(score, -self.tol) if score > -self.tol else score, None)
            else:
                if rep.ok:
                    const, coef = lp.objective(target)
                    return (target[2] * (const + coef @ x), plan)
            cuts = [v for v in rep.violations if v.kind == "gap"]
            if not cuts:
                return best
            for k in range(len(self.phases)):
                extra.setdefault(k, [])
            for v in cuts:
                for k, ph in enumerate(self.phases):
                    if ph.interval.contains(v.time):
                        extra[k].append(v.time)
        return best


def _grid(spec: DynSpec, T: float) -> list[float]:
    pts = {round(T * k / GRID, 12) for k in range(1, GRID)}
    for ph in spec.phases:
        for x in (ph.interval.lo, ph.interval.hi):
            if 0 < x < T:
                pts.add(round(float(x), 12))
    return sorted(pts)


def _refine(f, lo, hi, x0, f0):
    """Bounded Brent maximization of ``f`` on ``[lo, hi]``; never worse than ``x0``."""
    if hi - lo <= 1e-12:
        return f0, x0
    # infeasible splits score -inf, which Brent's parabolic step cannot digest
    res = minimize_scalar(lambda x: -max(f(x), -1e12), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10, "maxiter": 40})
    best = (f0, x0)
    for x in (res.x, lo, hi):
        best = max(best, (f(x), x))
    return best


class _Search:
    """Memoized split-time search, seeded across ``n``."""

    def __init__(self, problem: _Problem):
        self.p = problem
        self.best: dict = {}  # (target, n) -> (score, splits, plan)

    def run(self, n: int, target=None, stop_when_feasible=True):
        key = (target, n)
        if key in self.best:
            return self.best[key]
        T = self.p.T
        if n == 0 or T <= 0:
            s, plan = self.p.evaluate(tuple([0.0] * n) if T <= 0 else (), target)
            out = (s, tuple([0.0] * n) if T <= 0 else (), plan)
            self.best[key] = out
            return out
        prev = self.run(n - 1, target, stop_when_feasible)
        grid = _grid(self.p.spec, T)
        cands = set()
        if math.comb(len(grid) + n - 1, n) <= 120:
            cands |= set(itertools.combinations_with_replacement(grid, n))
        base = prev[1]
        for g in list(grid) + list(base):
            cands.add(tuple(sorted(base + (g,))))

        def done(res):
            return target is None and stop_when_feasible and res[2] is not None

        scored = []
        pad = tuple(sorted(base + ((base[-1] if base else 0.0),)))
        first = self.p.evaluate(pad, target)
        scored.append((first[0], pad, first[1]))
        if done(scored[-1]):
            self.best[key] = scored[-1]
            return scored[-1]
        for c in sorted(cands):
            s, plan = self.p.evaluate(c, target)
            scored.append((s, c, plan))
            if done(scored[-1]):
                self.best[key] = scored[-1]
                return scored[-1]
        scored.sort(key=lambda r: r[0], reverse=True)
        best = scored[0]
        for start in scored[:1]:
            cur = list(start[1])
            cur_best = start
            for _ in range(3):
                before = cur_best[0]
                for j in range(n):
                    lo = cur[j - 1] if j > 0 else 0.0
                    hi = cur[j + 1] if j + 1 < n else T

                    def f(x, j=j):
                        trial = tuple(cur[:j] + [x] + cur[j + 1:])
                        return self.p.evaluate(trial, target)[0]

                    s, x = _refine(f, lo, hi, cur[j], cur_best[0])
                    if s > cur_best[0]:
                        cur[j] = x
                        trial = tuple(cur)
                        cur_best = (s, trial, self.p.evaluate(trial, target)[1])
                        if done(cur_best):
                            self.best[key] = cur_best
                            return cur_best
                if cur_best[0] - before <= 1e-10:
                    break
            if cur_best[0] > best[0]:
                best = cur_best
        if best[0] < prev[0]:
            # keep monotonicity: the padded seed reproduces the previous optimum
            best = (prev[0], pad, self.p.evaluate(pad, target)[1] or prev[2])
        self.best[key] = best
        return best


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------

_SEARCHES: dict = {}


def _spec_key(spec: DynSpec, relaxed: bool, tol: float):
    return (spec.phases, tuple(sorted(spec.pos0.items())), tuple(sorted(spec.spd0.items())),
            tuple(sorted(spec.acc0.items())), spec.bounds, spec.controllable,
            tuple(sorted(spec.sizes.items())), relaxed, tol)


def _search_for(spec: DynSpec, relaxed: bool, tol: float) -> _Search:
    key = _spec_key(spec, relaxed, tol)
    s = _SEARCHES.get(key)
    if s is None:
        if len(_SEARCHES) > 256:
            _SEARCHES.clear()
        s = _SEARCHES[key] = _Search(_Problem(spec, relaxed, tol))
    return s


def kinematic_infeasibility(spec: DynSpec, relaxed: bool = False) -> Optional[str]:
    """Reason why no plan can exist, from position envelopes of bang-bang extremes."""
    bd = spec.bounds
    phases = spec.phases[:-1] if relaxed else spec.phases

    def envelope(car, t):
        p0, v0 = spec.pos0[car], spec.spd0[car]
        if car not in spec.controllable:
            x = p0 + v0 * t + 0.5 * spec.acc0[car] * t * t
            return x, x
        tu = max(0.0, (bd.spd_max - v0) / bd.acc_max)
        hi = p0 + (v0 * t + 0.5 * bd.acc_max * t * t if t <= tu
                   else v0 * tu + 0.5 * bd.acc_max * tu * tu + bd.spd_max * (t - tu))
        td = max(0.0, (v0 - bd.spd_min) / -bd.acc_min)
        lo = p0 + (v0 * t + 0.5 * bd.acc_min * t * t if t <= td
                    else v0 * td + 0.5 * bd.acc_min * td * td + bd.spd_min * (t - td))
        return lo, hi

    for k, ph in enumerate(phases):
        for g in ph.theta:
            if g.is_empty():
                return f"phase {k + 1}: constraint {g} is empty"
            iv = ph.interval
            ts = [float(iv.lo), float(iv.hi)] if iv.is_point else [
                float(iv.lo) + (float(iv.hi) - float(iv.lo)) * f for f in (0.0, 0.5, 1.0)]
            for t in ts:
                rl, rh = envelope(g.rear, t)
                fl, fh = envelope(g.front, t)
                glo, ghi = fl - rh - spec.sizes[g.rear], fh - rl - spec.sizes[g.rear]
                closed = iv.contains(t)
                if ghi < g.lo - 1e-12 or (closed and not g.lo_closed and ghi <= g.lo):
                    return (f"phase {k + 1}: gap({g.rear},{g.front}) can reach at most {ghi:g} "
                            f"at t={t:g}, below {g.lo:g}")
                if glo > g.hi + 1e-12 or (closed and not g.hi_closed and glo >= g.hi):
                    return (f"phase {k + 1}: gap({g.rear},{g.front}) is at least {glo:g} "
                            f"at t={t:g}, above {g.hi:g}")
    return None


def solve(system: DynSystem, *, tol: float = FEAS_TOL) -> SolveResult:
    """Find a plan with ``system.n`` shared splitting points."""
    spec = system.spec
    reason = kinematic_infeasibility(spec, system.relaxed)
    if reason:
        return SolveResult("infeasible", system.n, proven=True, reason=reason)
    s, splits, plan = _search_for(spec, system.relaxed, tol).run(system.n)
    if plan is not None:
        return SolveResult("feasible", system.n, plan, margin=s)
    return SolveResult("unknown", system.n, reason="no solution found within search budget", margin=s)


def _feasible(spec: DynSpec, n: int, tol: float) -> bool:
    if kinematic_infeasibility(spec):
        return False
    return _search_for(spec, False, tol).run(n)[2] is not None


def _drop_last(spec: DynSpec) -> DynSpec:
    last = spec.phases[-1]
    return DynSpec(spec.phases[:-1] + (Phase((), last.interval),), spec.pos0, spec.spd0, spec.acc0,
                   spec.bounds, spec.controllable, spec.sizes)


def max_extension(system: DynSystem, *, tol: float = FEAS_TOL, delta_t: float = DELTA) -> float:
    """Largest ``x`` such that the constraints can be followed on ``[0, x]``."""
    spec = _drop_last(system.spec) if system.relaxed else system.spec
    T = spec.horizon
    if _feasible(spec, system.n, tol):
        return T
    if not _feasible(spec.truncated(0.0), system.n, tol):
        return 0.0
    lo, hi = 0.0, T
    while hi - lo > delta_t:
        mid = 0.5 * (lo + hi)
        if _feasible(spec.truncated(mid), system.n, tol):
            lo = mid
        else:
            hi = mid
    return lo


def _outcome(system: DynSystem, target_kind: str, who, tol: float):
    srch = _search_for(system.spec, system.relaxed, tol)
    hi = srch.run(system.n, (target_kind, who, 1))
    lo = srch.run(system.n, (target_kind, who, -1))
    if hi[2] is None or lo[2] is None:
        return None
    return (-lo[0], hi[0])


def max_outcome_pos(system: DynSystem, *, tol: float = FEAS_TOL) -> dict:
    """Per constrained pair, the reachable range of the gap at the end of I."""
    return {pair: _outcome(system, "gap", pair, tol) for pair in system.spec.pairs()}


def max_outcome_spd(system: DynSystem, *, tol: float = FEAS_TOL) -> dict:
    """Per car, the reachable range of the speed at the end of I."""
    out = {}
    for car in system.spec.cars:
        if car in system.spec.controllable:
            out[car] = _outcome(system, "spd", car, tol)
        else:
            ok = _search_for(system.spec, system.relaxed, tol).run(system.n)[2] is not None
            v = system.spec.spd0[car] + system.spec.acc0[car] * system.spec.horizon
            out[car] = (v, v) if ok else None
    return out


def outcome_box(system: DynSystem, *, tol: float = FEAS_TOL) -> OutcomeBox:
    return OutcomeBox(max_outcome_pos(system, tol=tol), max_outcome_spd(system, tol=tol),
                      max_extension(system, tol=tol))


def decide_acceleration(spec: DynSpec, *, n: Optional[int] = None, max_n: int = MAX_N,
                        tol: float = FEAS_TOL, delta: float = DELTA) -> Decision:
    """Algorithm deciding acceleration: grow ``n`` per prefix until the
    relaxed maxima stabilize, then solve the strict system once.

    With ``n`` given, stabilization is skipped and only that ``n`` is tried.
    Otherwise a failed strict solve is retried with more splits up to
    ``max_n`` before giving up.
    """
    history = []
    capped = False
    forced = n is not None
    if n is None:
        n = 0
        for i in range(1, len(spec.phases) + 1):
            prefix = spec.prefix(i)
            while True:
                a = outcome_box(DynSystem(prefix, n, True), tol=tol)
                if n >= max_n:
                    capped = True
                    break
                b = outcome_box(DynSystem(prefix, n + 1, True), tol=tol)
                history.append((i, n, a.extension, b.extension))
                if a.close_to(b, delta):
                    break
                n += 1
    res = solve(DynSystem(spec, n, False), tol=tol)
    # the relaxed maxima never see the last phase, so they can settle before the
    # strict system becomes solvable; keep adding splits up to the cap
    m = n
    while not res.feasible and not res.proven and not forced and m < max_n:
        m += 1
        res = solve(DynSystem(spec, m, False), tol=tol)
    if res.feasible:
        word = res.plan.to_word(spec.controlled)
        return Decision("feasible", m, word, res.plan, history=tuple(history))
    if res.proven:
        return Decision("infeasible", n, proven=True, reason=res.reason, history=tuple(history))
    if capped:
        return Decision("indeterminate", n, reason=f"maxima did not stabilize within n <= {max_n}",
                        history=tuple(history))
    why = f"no solution found with n = {n}" if forced else f"no solution found for n in {n}..{m} after the maxima stabilized"
    return Decision("infeasible", n, proven=False, reason=why, history=tuple(history))
