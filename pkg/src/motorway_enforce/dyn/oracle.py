"""Exhaustive grid search over switch times and accelerations.

Only meant for small instances: every split configuration on the time grid
and every acceleration vector on the acceleration grid is tried.  Candidate
plans are screened on dense samples in bulk and confirmed by ``check_plan``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import DynSpec, PiecewisePlan, check_plan, segment_matrices


@dataclass(frozen=True)
class OracleResult:
    feasible: bool
    plan: Optional[PiecewisePlan]
    tried: int


def _grid(lo, hi, step):
    k = int(np.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(k + 1)


def grid_oracle(spec: DynSpec, *, max_splits: int = 1, time_step: float = 0.25, acc_step: float = 0.25,
                dense: int = 64, tol: float = 1e-9, limit: int = 5_000_000) -> OracleResult:
    T = spec.horizon
    bd = spec.bounds
    accs = _grid(bd.acc_min, bd.acc_max, acc_step)
    if 0.0 not in accs:
        accs = np.sort(np.append(accs, 0.0))
    times = [t for t in _grid(0.0, T, time_step)[1:] if t < T - 1e-12]
    ctrl = spec.controlled
    tried = 0
    for n in range(max_splits + 1):
        for splits in itertools.combinations(times, n):
            borders = np.array((0.0, *splits, T))
            k = n + 1
            nv = k * len(ctrl)
            if len(accs) ** nv > limit:
                raise RuntimeError(f"grid oracle would try {len(accs) ** nv} acceleration vectors")
            combos = np.array(list(itertools.product(accs, repeat=nv)))
            tried += len(combos)
            ok = np.ones(len(combos), bool)
            tau_b, _ = segment_matrices(borders, borders)
            for i, c in enumerate(ctrl):
                v = spec.spd0[c] + combos[:, i * k:(i + 1) * k] @ tau_b.T
                ok &= np.all((v >= bd.spd_min - tol) & (v <= bd.spd_max + tol), axis=1)
            for ph in spec.phases:
                iv = ph.interval
                lo, hi = float(iv.lo), float(iv.hi)
                ts = np.array([lo]) if lo == hi else np.linspace(lo, hi, dense + 2)[1:-1]
                if lo < hi:
                    ts = np.concatenate([ts, [x for x, cl in ((lo, iv.lo_closed), (hi, iv.hi_closed)) if cl]])
                _, posm = segment_matrices(borders, ts)

                def pos(c):
                    base = spec.pos0[c] + spec.spd0[c] * ts
                    if c in ctrl:
                        i = ctrl.index(c)
                        return base[None, :] + combos[:, i * k:(i + 1) * k] @ posm.T
                    return (base + 0.5 * spec.acc0[c] * ts * ts)[None, :]

                for g in ph.theta:
                    gap = pos(g.front) - pos(g.rear) - spec.sizes[g.rear]
                    if g.lo > -np.inf:
                        ok &= np.all(gap >= g.lo - tol if g.lo_closed else gap > g.lo, axis=1)
                    if g.hi < np.inf:
                        ok &= np.all(gap <= g.hi + tol if g.hi_closed else gap < g.hi, axis=1)
            for idx in np.nonzero(ok)[0]:
                x = combos[idx]
                plan = PiecewisePlan(splits, {c: tuple(x[i * k:(i + 1) * k]) for i, c in enumerate(ctrl)}, T)
                if check_plan(plan, spec, tol=tol).ok:
                    return OracleResult(True, plan, tried)
    return OracleResult(False, None, tried)
