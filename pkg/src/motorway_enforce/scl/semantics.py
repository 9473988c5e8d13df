"""Direct continuous-time semantics on ultimately periodic slot words.

This evaluator never builds an automaton.  It works on words of alternating
point and open slots whose truth values are constant per slot; all
subformulae of a formula with integer constants stay constant per slot as
long as slot borders lie on the half-integer grid.  Evaluation is batched
with numpy over many candidate words at once, which is what makes the
brute-force satisfiability search below affordable.

Semantics, at time ``t``:

* ``a U b``: some ``t' >= t`` has ``b`` and ``a`` holds on ``[t, t')``.
* ``a S b``: some ``t' <= t`` has ``b`` and ``a`` holds on ``(t', t]``.
* ``next[~c] a``: there is ``t' > t`` with ``a(t')`` and ``a`` false on
  ``(t, t')`` (the first later occurrence is attained) and ``t' - t ~ c``.
* ``last[~c] a``: mirror image; false when ``a`` never held before.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import formula as F


@dataclass
class SlotWords:
    """A batch of lasso words sharing one slot skeleton.

    ``values[name]`` is a bool array of shape (batch, n_slots).  Slot ``k``
    is a point at ``lo[k]`` when ``is_point[k]``, else the open interval
    ``(lo[k], hi[k])``.  After the last slot the word continues with slot
    ``loop_start`` shifted by ``period`` time units, forever.
    """

    values: dict
    is_point: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    loop_start: int
    period: float

    @property
    def n(self) -> int:
        return len(self.is_point)

    @property
    def batch(self) -> int:
        return next(iter(self.values.values())).shape[0] if self.values else 1


def _unroll(words: SlotWords, copies: int) -> tuple[SlotWords, int]:
    """Append ``copies`` extra loop iterations; returns words and loop length."""
    L = words.n - words.loop_start
    idx = list(range(words.n))
    lo, hi = list(words.lo), list(words.hi)
    pts = list(words.is_point)
    for c in range(1, copies + 1):
        for k in range(words.loop_start, words.n):
            idx.append(k)
            lo.append(words.lo[k] + c * words.period)
            hi.append(words.hi[k] + c * words.period)
            pts.append(words.is_point[k])
    idx = np.array(idx)
    vals = {p: v[:, idx] for p, v in words.values.items()}
    new_start = len(idx) - L
    return SlotWords(vals, np.array(pts), np.array(lo), np.array(hi), new_start, words.period), L


def evaluate_batch(psi: F.SclFormula, words: SlotWords, extra_copies: int | None = None) -> np.ndarray:
    """Truth of ``psi`` at time 0 for every word in the batch."""
    if extra_copies is None:
        total = sum(g.c for g in F.subformulas(psi) if isinstance(g, (F.Next, F.Last)))
        depth = sum(1 for g in F.subformulas(psi) if isinstance(g, (F.Since, F.Last, F.Until)))
        extra_copies = int(np.ceil((total + 1) / max(words.period, 1e-9))) + depth + 2
    w, L = _unroll(words, extra_copies)
    M = w.n
    B = words.batch
    mid = np.where(w.is_point, w.lo, (w.lo + w.hi) / 2)
    cache: dict = {}

    def ev(g) -> np.ndarray:
        if g in cache:
            return cache[g]
        if isinstance(g, F.Prop):
            r = w.values[g.name] if g.name in w.values else np.zeros((B, M), bool)
        elif isinstance(g, F.TrueS):
            r = np.ones((B, M), bool)
        elif isinstance(g, F.Not):
            r = ~ev(g.arg)
        elif isinstance(g, F.Or):
            r = ev(g.left) | ev(g.right)
        elif isinstance(g, F.And):
            r = ev(g.left) & ev(g.right)
        elif isinstance(g, F.Until):
            r = _until(ev(g.left), ev(g.right), w)
        elif isinstance(g, F.Since):
            r = _since(ev(g.left), ev(g.right), w)
        elif isinstance(g, F.Next):
            r = _next(ev(g.arg), g.op, g.c, w, mid)
        elif isinstance(g, F.Last):
            r = _last(ev(g.arg), g.op, g.c, w, mid)
        else:
            raise TypeError(g)
        cache[g] = r
        return r

    return ev(psi)[:, 0]


def _until(a, b, w):
    B, M = a.shape
    out = np.zeros((B, M), bool)
    order = list(range(M - 1, w.loop_start - 1, -1)) * 2 + list(range(w.loop_start - 1, -1, -1))
    for i in order:
        j = i + 1 if i + 1 < M else w.loop_start
        if w.is_point[i]:
            out[:, i] = b[:, i] | (a[:, i] & a[:, j] & out[:, j])
        else:
            out[:, i] = b[:, i] | (a[:, i] & out[:, j])
    return out


def _since(a, b, w):
    B, M = a.shape
    out = np.zeros((B, M), bool)
    out[:, 0] = b[:, 0]
    for i in range(1, M):
        if w.is_point[i]:
            out[:, i] = b[:, i] | (a[:, i] & a[:, i - 1] & out[:, i - 1])
        else:
            out[:, i] = b[:, i] | (a[:, i] & out[:, i - 1])
    return out


def _cmp(d, op, c):
    if op == "=":
        return np.isclose(d, c, atol=1e-9)
    if op == "<":
        return d < c - 1e-9
    if op == "<=":
        return d <= c + 1e-9
    if op == ">":
        return d > c + 1e-9
    return d >= c - 1e-9


def _next(a, op, c, w, mid):
    B, M = a.shape
    # first true slot strictly after i: index and time shift
    first_idx = np.full(B, -1)
    # seed from the periodic continuation: first true slot in the loop
    for k in range(M - 1, w.loop_start - 1, -1):
        hit = a[:, k]
        first_idx = np.where(hit, k, first_idx)
    first_shift = np.where(first_idx >= 0, w.period, 0.0)
    out = np.zeros((B, M), bool)
    for i in range(M - 1, -1, -1):
        has = first_idx >= 0
        j = np.where(has, first_idx, 0)
        target_point = w.is_point[j]
        t_target = w.lo[j] + first_shift
        d = t_target - mid[i]
        out[:, i] = has & target_point & _cmp(d, op, c)
        if not w.is_point[i]:
            out[:, i] &= ~a[:, i]
        first_idx = np.where(a[:, i], i, first_idx)
        first_shift = np.where(a[:, i], 0.0, first_shift)
    return out


def _last(a, op, c, w, mid):
    B, M = a.shape
    last_idx = np.full(B, -1)
    out = np.zeros((B, M), bool)
    for i in range(M):
        has = last_idx >= 0
        j = np.where(has, last_idx, 0)
        d = mid[i] - w.hi[j]
        out[:, i] = has & w.is_point[j] & _cmp(d, op, c)
        if not w.is_point[i]:
            out[:, i] &= ~a[:, i]
        last_idx = np.where(a[:, i], i, last_idx)
    return out


# --------------------------------------------------------------------------
# brute-force satisfiability over half-integer grids
# --------------------------------------------------------------------------

def half_grid_skeleton(horizon: int):
    """Slots P0, O, P0.5, ..., P(horizon) followed by a one-unit loop."""
    pts, lo, hi = [], [], []
    steps = 2 * horizon
    for k in range(steps + 1):
        t = k / 2
        pts.append(True); lo.append(t); hi.append(t)
        if k < steps:
            pts.append(False); lo.append(t); hi.append(t + 0.5)
    loop_start = len(pts)
    for k in range(2):
        t = horizon + k / 2
        pts.append(False); lo.append(t); hi.append(t + 0.5)
        pts.append(True); lo.append(t + 0.5); hi.append(t + 0.5)
    return np.array(pts), np.array(lo, float), np.array(hi, float), loop_start


def _prefix_patterns(n_slots: int, n_vals: int, max_changes: int):
    for k in range(max_changes + 1):
        for where in itertools.combinations(range(1, n_slots), k):
            for first in range(n_vals):
                for deltas in itertools.product(range(1, n_vals), repeat=k):
                    row = np.empty(n_slots, int)
                    cur, prev = first, 0
                    for pos, dv in zip(where, deltas):
                        row[prev:pos] = cur
                        cur = (cur + dv) % n_vals
                        prev = pos
                    row[prev:] = cur
                    yield row


def bruteforce_witness(psi: F.SclFormula, props=None, horizon: int = 5, max_changes: int = 2,
                       chunk: int = 60000):
    """Search half-grid lasso words for a model of ``psi``.

    Returns ``(values, skeleton)`` of a witness or ``None``.  The prefix
    covers ``[0, horizon]`` with at most ``max_changes`` value changes; the
    loop is any one-unit pattern of four half-slots.
    """
    props = sorted(props if props is not None else F.props(psi)) or ["_none"]
    pts, lo, hi, start = half_grid_skeleton(horizon)
    n_vals = 2 ** len(props)
    loops = np.array(list(itertools.product(range(n_vals), repeat=len(pts) - start)))
    prefixes = np.array(list(_prefix_patterns(start, n_vals, max_changes)))
    bits = np.array([[(v >> i) & 1 for i in range(len(props))] for v in range(n_vals)], bool)

    def batches():
        per = max(1, chunk // len(loops))
        for s in range(0, len(prefixes), per):
            pre = prefixes[s:s + per]
            rows = np.concatenate([np.repeat(pre, len(loops), axis=0), np.tile(loops, (len(pre), 1))], axis=1)
            yield rows

    for rows in batches():
        values = {p: bits[rows, i] for i, p in enumerate(props)}
        words = SlotWords(values, pts, lo, hi, start, 1.0)
        sat = evaluate_batch(psi, words)
        hits = np.nonzero(sat)[0]
        if len(hits):
            k = hits[0]
            return {p: v[k] for p, v in values.items()}, (pts, lo, hi, start)
    return None


def bruteforce_satisfiable(psi: F.SclFormula, horizon: int = 5, max_changes: int = 2) -> bool:
    return bruteforce_witness(psi, horizon=horizon, max_changes=max_changes) is not None


def evaluate_word(psi: F.SclFormula, slots, loop_start: int, period) -> bool:
    """Evaluate on one explicit lasso ``[(is_point, lo, hi, props), ...]``."""
    names = sorted(F.props(psi))
    vals = {p: np.array([[p in s[3] for s in slots]]) for p in names}
    words = SlotWords(vals, np.array([s[0] for s in slots]), np.array([float(s[1]) for s in slots]),
                      np.array([float(s[2]) for s in slots]), loop_start, float(period))
    return bool(evaluate_batch(psi, words)[0])
