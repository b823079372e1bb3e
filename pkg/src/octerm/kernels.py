"""Floating-point hot loops: value iteration and Monte-Carlo simulation.

Each kernel has a numba version and a pure-numpy fallback.  Setting the
environment variable OCTERM_DISABLE_NUMBA=1 (or lacking numba) selects the
fallback.  Value iteration only seeds exact policy iteration, so the two
backends may differ there without affecting any reported result; the
simulators consume the same random stream and return identical counts.

Random numbers: run k of a simulation with seed s starts from the 64-bit
state mix(s ^ mix(k + 1)), where mix is the SplitMix64 finalizer.  Every
draw advances the state by 0x9E3779B97F4A7C15 and returns mix(state); the
uniform variate is (draw >> 11) * 2**-53.  Draws happen only at chance
states; rule j of a chance state is taken when u < cum[j] for the first such
j, where cum holds the float64 running sums of the rule probabilities with
the last entry forced to 1.
"""
from __future__ import annotations

import os

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
M1 = 0xBF58476D1CE4E5B9
M2 = 0x94D049BB133111EB
MASK = (1 << 64) - 1

MAX, MIN, RAND = 0, 1, 2


def _numba_wanted() -> bool:
    return os.environ.get("OCTERM_DISABLE_NUMBA", "").strip() not in ("1", "true", "yes")


try:
    if not _numba_wanted():
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def backend() -> str:
    return "numba" if HAVE_NUMBA and _numba_wanted() else "numpy"


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * M1) & MASK
    z = ((z ^ (z >> 27)) * M2) & MASK
    return z ^ (z >> 31)


def run_state(seed: int, k: int) -> int:
    return mix64((seed & MASK) ^ mix64(k + 1))


# ---------------------------------------------------------------------------
# value iteration


def _vi_numpy(offsets, dst, prob, owner, target, values, tol, max_sweeps):
    starts = offsets[:-1]
    is_rand = owner == RAND
    is_max = owner == MAX
    for sweep in range(max_sweeps):
        succ = values[dst]
        sums = np.add.reduceat(prob * succ, starts)
        maxs = np.maximum.reduceat(succ, starts)
        mins = np.minimum.reduceat(succ, starts)
        new = np.where(is_rand, sums, np.where(is_max, maxs, mins))
        new[target] = 1.0
        delta = np.max(np.abs(new - values)) if len(values) else 0.0
        values[:] = new
        if delta < tol:
            return sweep + 1
    return max_sweeps


if HAVE_NUMBA:

    @njit(cache=True)
    def _vi_numba(offsets, dst, prob, owner, target, values, tol, max_sweeps):
        n = owner.shape[0]
        for sweep in range(max_sweeps):
            delta = 0.0
            for s in range(n):
                if target[s]:
                    values[s] = 1.0
                    continue
                a = offsets[s]
                b = offsets[s + 1]
                if owner[s] == RAND:
                    acc = 0.0
                    for e in range(a, b):
                        acc += prob[e] * values[dst[e]]
                elif owner[s] == MAX:
                    acc = -1.0
                    for e in range(a, b):
                        if values[dst[e]] > acc:
                            acc = values[dst[e]]
                else:
                    acc = 2.0
                    for e in range(a, b):
                        if values[dst[e]] < acc:
                            acc = values[dst[e]]
                d = abs(acc - values[s])
                if d > delta:
                    delta = d
                values[s] = acc
            if delta < tol:
                return sweep + 1
        return max_sweeps


def value_iteration(offsets, dst, prob, owner, target, tol=1e-13, max_sweeps=20000):
    """Reachability values from below; Gauss-Seidel with numba, Jacobi with numpy."""
    values = np.zeros(len(owner))
    values[target] = 1.0
    if backend() == "numba":
        sweeps = _vi_numba(offsets, dst, prob, owner, target, values, tol, max_sweeps)
    else:
        sweeps = _vi_numpy(offsets, dst, prob, owner, target, values, tol, max_sweeps)
    return values, sweeps


# ---------------------------------------------------------------------------
# simulation


def _simulate_numpy(rule_off, rule_delta, rule_dst, cum, owner, table, above, limit, start_state, start_counter, horizon, states0):
    runs = len(states0)
    rng = states0.copy()
    q = np.full(runs, start_state, dtype=np.int64)
    c = np.full(runs, start_counter, dtype=np.int64)
    switched = np.zeros((2, runs), dtype=np.bool_)
    terminated = c <= 0
    active = np.flatnonzero(~terminated)
    g, m1, m2 = np.uint64(GAMMA), np.uint64(M1), np.uint64(M2)
    s30, s27, s31, s11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
    for t in range(horizon):
        if active.size == 0:
            break
        # the counter cannot reach 0 in the remaining steps
        active = active[c[active] <= horizon - t]
        if active.size == 0:
            break
        qa = q[active]
        ca = c[active]
        own = owner[qa]
        rule = np.empty(active.size, dtype=np.int64)

        rnd = own == RAND
        if rnd.any():
            idx = active[rnd]
            x = rng[idx] + g
            rng[idx] = x
            z = (x ^ (x >> s30)) * m1
            z = (z ^ (z >> s27)) * m2
            z = z ^ (z >> s31)
            u = (z >> s11).astype(np.float64) * (1.0 / 9007199254740992.0)
            qs = qa[rnd]
            lo = rule_off[qs]
            hi = rule_off[qs + 1]
            j = hi - 1
            pending = np.ones(idx.size, dtype=np.bool_)
            for k in range(int((hi - lo).max()) - 1):
                pos = np.minimum(lo + k, hi - 1)
                hit = pending & (pos < hi - 1) & (u < cum[pos])
                j[hit] = pos[hit]
                pending &= ~hit
            rule[rnd] = j

        for who in (MAX, MIN):
            sel = own == who
            if not sel.any():
                continue
            idx = np.flatnonzero(sel)
            sw = switched[who, active[idx]] | (ca[idx] >= limit[who])
            switched[who, active[idx]] = sw
            qs = qa[idx]
            below = table[who, qs, np.minimum(ca[idx], table.shape[2] - 1)]
            rule[idx] = np.where(sw, above[who, qs], below)

        q[active] = rule_dst[rule]
        c[active] = ca + rule_delta[rule]
        hit = c[active] <= 0
        terminated[active[hit]] = True
        active = active[~hit]
    return int(terminated.sum())


if HAVE_NUMBA:

    @njit(cache=True)
    def _simulate_numba(rule_off, rule_delta, rule_dst, cum, owner, table, above, limit, start_state, start_counter, horizon, states0):
        runs = states0.shape[0]
        count = 0
        width = table.shape[2]
        for k in range(runs):
            x = states0[k]
            q = start_state
            c = start_counter
            sw0 = False
            sw1 = False
            if c <= 0:
                count += 1
                continue
            for t in range(horizon):
                if c > horizon - t:
                    break
                o = owner[q]
                if o == RAND:
                    x = x + np.uint64(GAMMA)
                    z = (x ^ (x >> np.uint64(30))) * np.uint64(M1)
                    z = (z ^ (z >> np.uint64(27))) * np.uint64(M2)
                    z = z ^ (z >> np.uint64(31))
                    u = np.float64(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
                    j = rule_off[q]
                    end = rule_off[q + 1]
                    while j < end - 1 and not (u < cum[j]):
                        j += 1
                    rule = j
                elif o == MAX:
                    sw0 = sw0 or c >= limit[0]
                    rule = above[0, q] if sw0 else table[0, q, min(c, width - 1)]
                else:
                    sw1 = sw1 or c >= limit[1]
                    rule = above[1, q] if sw1 else table[1, q, min(c, width - 1)]
                q = rule_dst[rule]
                c += rule_delta[rule]
                if c <= 0:
                    count += 1
                    break
        return count


def simulate_counts(rule_off, rule_delta, rule_dst, cum, owner, table, above, limit, start_state, start_counter, horizon, seed, runs):
    states0 = np.array([run_state(seed, k) for k in range(runs)], dtype=np.uint64)
    args = (rule_off, rule_delta, rule_dst, cum, owner, table, above, limit, np.int64(start_state), np.int64(start_counter), np.int64(horizon), states0)
    if backend() == "numba":
        return int(_simulate_numba(*args))
    return _simulate_numpy(*args)
