"""Drift LP, submartingale check and the exponential tail certificate.

For a rising maximizing OC-MDP the LP below has an optimum with x > 0.  The
process counter + z[state] - x * steps is then a submartingale with bounded
differences, and the Azuma-Hoeffding inequality bounds the probability of
ever terminating from counter i by c**i / (1 - c) once i >= h.
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

import numpy as np
from mpmath import iv
from mpmath.libmp import to_rational

from .errors import NotRising
from .model import OcSsg, Owner
from .simplex import Infeasible, maximize

# the exact simplex is used up to this many LP variables, HiGHS beyond
EXACT_LP_LIMIT = 64
DEFAULT_PREC = 128


@dataclass(frozen=True)
class LpSystem:
    """Constraints ``sum(coeffs[v] * var_v) <= rhs``; variable 0 is x, variable q + 1 is z_q.

    All variables are non-negative.  Maximizing x over x >= 0 decides
    whether the unrestricted optimum is positive.
    """

    n_states: int
    rows: tuple[tuple[dict[int, Fraction], Fraction], ...]
    labels: tuple[tuple[int, int | None], ...]  # (state, rule or None for a chance state)

    @property
    def n_vars(self) -> int:
        return self.n_states + 1


def build_lp(model: OcSsg) -> LpSystem:
    if model.has_min:
        raise ValueError("the drift LP is defined for maximizing OC-MDPs")
    rows = []
    labels = []
    for q in range(model.n_states):
        if model.owner(q) is Owner.MAX:
            for i in model.out_rules[q]:
                r = model.rules[i]
                coeffs = {0: Fraction(1)}
                if r.dst != q:
                    coeffs[q + 1] = Fraction(1)
                    coeffs[r.dst + 1] = Fraction(-1)
                rows.append((coeffs, Fraction(r.delta)))
                labels.append((q, i))
        else:
            coeffs = {0: Fraction(1), q + 1: Fraction(1)}
            rhs = Fraction(0)
            for i in model.out_rules[q]:
                r = model.rules[i]
                coeffs[r.dst + 1] = coeffs.get(r.dst + 1, Fraction(0)) - r.prob
                rhs += r.prob * r.delta
            rows.append(({v: a for v, a in coeffs.items() if a}, rhs))
            labels.append((q, None))
    return LpSystem(model.n_states, tuple(rows), tuple(labels))


def _min_slack(lp: LpSystem, z: Sequence[Fraction]) -> Fraction:
    """Largest x making (x, z) feasible: every row has x-coefficient 1."""
    best = None
    for coeffs, rhs in lp.rows:
        room = rhs - sum((a * z[v - 1] for v, a in coeffs.items() if v), Fraction(0))
        if best is None or room < best:
            best = room
    return best


def _normalize(z: Sequence[Fraction]) -> list[Fraction]:
    # every row's z-coefficients sum to 0, so shifting z keeps feasibility
    low = min(z)
    return [v - low for v in z]


def _solve_exact(lp: LpSystem) -> tuple[Fraction, list[Fraction]]:
    A = []
    b = []
    for coeffs, rhs in lp.rows:
        row = [Fraction(0)] * lp.n_vars
        for v, a in coeffs.items():
            row[v] = a
        A.append(row)
        b.append(rhs)
    c = [Fraction(1)] + [Fraction(0)] * lp.n_states
    try:
        x, v = maximize(c, A, b)
    except Infeasible:
        raise NotRising("drift LP is infeasible") from None
    return x, _normalize(v[1:])


def _solve_highs(lp: LpSystem) -> tuple[Fraction, list[Fraction]]:
    from scipy.optimize import linprog
    from scipy.sparse import coo_matrix

    data, ri, ci, b = [], [], [], []
    for k, (coeffs, rhs) in enumerate(lp.rows):
        for v, a in coeffs.items():
            ri.append(k)
            ci.append(v)
            data.append(float(a))
        b.append(float(rhs))
    A = coo_matrix((data, (ri, ci)), shape=(len(lp.rows), lp.n_vars)).tocsr()
    c = np.zeros(lp.n_vars)
    c[0] = -1.0
    res = linprog(c, A_ub=A, b_ub=np.array(b), bounds=(0, None), method="highs")
    if res.status == 2:
        raise NotRising("drift LP is infeasible")
    if res.status != 0:
        raise ArithmeticError(f"HiGHS failed: {res.message}")
    # Rationalize z and recompute x exactly as the smallest slack: the pair
    # is feasible by construction, only optimality is up to float accuracy.
    best = None
    for limit in (10**6, 10**9, None):
        z = [Fraction(float(v)) if limit is None else Fraction(float(v)).limit_denominator(limit) for v in res.x[1:]]
        z = _normalize(z)
        x = _min_slack(lp, z)
        if best is None or x > best[0]:
            best = (x, z)
        if x > 0 and abs(float(x) - res.x[0]) <= 1e-9 * max(1.0, abs(res.x[0])):
            break
    return best


def solve_lp_max_x(lp: LpSystem, method: str = "auto") -> tuple[Fraction, list[Fraction]]:
    """Optimal (x, z) with min z = 0; raises NotRising unless x > 0.

    ``method`` is "exact" (rational simplex), "highs" (HiGHS followed by an
    exact feasibility repair) or "auto" (exact for small systems).
    """
    if method not in ("auto", "exact", "highs"):
        raise ValueError(f"unknown LP method {method!r}")
    if method == "exact" or (method == "auto" and lp.n_vars <= EXACT_LP_LIMIT):
        x, z = _solve_exact(lp)
    else:
        x, z = _solve_highs(lp)
        if x <= 0 and method == "auto":
            # float optimum lost in rationalization; fall back to the exact route
            x, z = _solve_exact(lp)
    if x <= 0:
        raise NotRising(f"drift LP optimum is x = {x}")
    return x, z


def _span_highs(lp: LpSystem, x: Fraction) -> list[Fraction] | None:
    from scipy.optimize import linprog
    from scipy.sparse import coo_matrix

    n = lp.n_states
    data, ri, ci, b = [], [], [], []
    for k, (coeffs, rhs) in enumerate(lp.rows):
        for v, a in coeffs.items():
            if v:
                ri.append(k)
                ci.append(v - 1)
                data.append(float(a))
        b.append(float(rhs - x))
    base = len(lp.rows)
    for q in range(n):
        ri += [base + q, base + q]
        ci += [q, n]
        data += [1.0, -1.0]
        b.append(0.0)
    A = coo_matrix((data, (ri, ci)), shape=(base + n, n + 1)).tocsr()
    c = np.zeros(n + 1)
    c[n] = 1.0
    res = linprog(c, A_ub=A, b_ub=np.array(b), bounds=(0, None), method="highs")
    if res.status != 0:
        return None
    return _normalize([Fraction(float(v)).limit_denominator(10**9) for v in res.x[:n]])


def _rate(x: Fraction, z: Sequence[Fraction]) -> Fraction:
    return x**2 / (2 * (max(z) - min(z) + x + 1))


def best_certificate_pair(lp: LpSystem, x_bar: Fraction, z_bar: Sequence[Fraction]) -> tuple[Fraction, list[Fraction]]:
    """Feasible (x, z) maximizing the tail exponent over a grid of drifts.

    Any feasible pair with x > 0 yields a certificate.  The exponent grows
    with x but shrinks with the spread of z, so for x in x_bar * {1, 7/8,
    ..., 1/64} the spread is minimized with x fixed and the best pair is
    kept.  The result is never worse than (x_bar, z_bar).
    """
    best = (x_bar, list(z_bar))
    for scale in (1, Fraction(7, 8), Fraction(3, 4), Fraction(5, 8), Fraction(1, 2), Fraction(3, 8),
                  Fraction(1, 4), Fraction(1, 8), Fraction(1, 16), Fraction(1, 32), Fraction(1, 64)):
        x = x_bar * scale
        z = _span_highs(lp, x)
        if z is None:
            continue
        x = min(x, _min_slack(lp, z))  # rounding in the float route may cost a little drift
        if x > 0 and _rate(x, z) > _rate(*best):
            best = (x, z)
    return best


@dataclass(frozen=True)
class SubmartingaleCheck:
    ok: bool
    state: int | None = None
    rule: int | None = None
    slack: Fraction | None = None  # negative on failure


def check_submartingale(model: OcSsg, x_bar: Fraction, z_bar: Sequence[Fraction]) -> SubmartingaleCheck:
    """Check the one-step drift inequalities; the first violation is the witness."""
    if model.has_min:
        raise ValueError("check_submartingale expects a maximizing OC-MDP")
    for q in range(model.n_states):
        if model.owner(q) is Owner.MAX:
            for i in model.out_rules[q]:
                r = model.rules[i]
                slack = r.delta + z_bar[r.dst] - x_bar - z_bar[q]
                if slack < 0:
                    return SubmartingaleCheck(False, q, i, slack)
        else:
            gain = sum((model.rules[i].prob * (model.rules[i].delta + z_bar[model.rules[i].dst]) for i in model.out_rules[q]), Fraction(0))
            slack = gain - x_bar - z_bar[q]
            if slack < 0:
                return SubmartingaleCheck(False, q, None, slack)
    return SubmartingaleCheck(True)


# ---------------------------------------------------------------------------
# certificate


@contextmanager
def _precision(bits: int):
    old = iv.prec
    iv.prec = bits
    try:
        yield
    finally:
        iv.prec = old


def _iv(value: Fraction):
    return iv.mpf(value.numerator) / iv.mpf(value.denominator)


def _ends(interval) -> tuple[Fraction, Fraction]:
    lo, hi = interval._mpi_
    return Fraction(*map(int, to_rational(lo))), Fraction(*map(int, to_rational(hi)))


def _base(cert: "Certificate"):
    return iv.mpf([_iv(cert.c_lo).a, _iv(cert.c_hi).b])


@dataclass(frozen=True)
class Certificate:
    x_bar: Fraction
    z_bar: tuple[Fraction, ...]
    z_span: Fraction
    c_lo: Fraction  # exact dyadic ends of the enclosure of c
    c_hi: Fraction
    h: int
    N: int | None = None
    names: tuple[str, ...] = ()
    prec: int = DEFAULT_PREC

    def __post_init__(self):
        if not self.c_hi < 1:
            raise ValueError("certificate base c must be < 1")
        if self.N is not None and self.N < self.h:
            raise ValueError("N must be at least h")

    @property
    def exponent(self) -> Fraction:
        """c = exp(-exponent)."""
        return self.x_bar**2 / (2 * (self.z_span + self.x_bar + 1))

    def to_json(self) -> dict:
        from .report import decimal, rational

        return {
            "x_bar": rational(self.x_bar),
            "z_bar": {name: rational(v) for name, v in zip(self.names, self.z_bar)},
            "z_span": rational(self.z_span),
            "c": [decimal(self.c_lo, "down"), decimal(self.c_hi, "up")],
            "h": self.h,
            "N": self.N,
        }


def tail_certificate(x_bar: Fraction, z_bar: Sequence[Fraction], names: Sequence[str] = (), prec: int = DEFAULT_PREC) -> Certificate:
    x_bar = Fraction(x_bar)
    if x_bar <= 0:
        raise ValueError("x_bar must be positive")
    z = tuple(Fraction(v) for v in z_bar)
    if any(v < 0 for v in z):
        raise ValueError("z_bar must be non-negative")
    span = max(z) - min(z) if z else Fraction(0)
    a = x_bar**2 / (2 * (span + x_bar + 1))
    with _precision(prec):
        lo, hi = _ends(iv.exp(-_iv(a)))
    return Certificate(x_bar, z, span, lo, hi, math.ceil(span), None, tuple(names), prec)


def counter_bound_N(cert: Certificate, epsilon: Fraction) -> int:
    """max(h, ceil(log_c(eps * (1 - c)))), rounded upwards through interval arithmetic."""
    epsilon = Fraction(epsilon)
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    with _precision(cert.prec):
        c = _base(cert)
        ratio = iv.log(_iv(epsilon) * (1 - c)) / iv.log(c)
        _, hi = _ends(ratio)
    return max(cert.h, math.ceil(hi))


def with_bound(cert: Certificate, epsilon: Fraction) -> Certificate:
    return replace(cert, N=counter_bound_N(cert, epsilon))


def tail_bound_value(cert: Certificate, i: int) -> Fraction:
    """A rational upper bound on c**i / (1 - c), valid for i >= h."""
    if i < cert.h:
        raise ValueError(f"tail bound needs i >= h = {cert.h}")
    with _precision(cert.prec):
        c = _base(cert)
        _, hi = _ends(c**i / (1 - c))
    return hi


# ---------------------------------------------------------------------------
# exponential supermartingale (refinement)


@dataclass(frozen=True)
class ExpCertificate:
    """rho**counter * w[state] is a supermartingale under every Max strategy.

    By optional stopping the probability of terminating from (q, i) is at
    most rho**i * w[q] / min(w).  Unlike the Azuma bound this captures the
    exact exponential decay rate of a walk with positive drift, so it is
    used to shrink N when the certificate's N would make the segment game
    too large to solve.
    """

    rho: Fraction
    w: tuple[Fraction, ...]
    names: tuple[str, ...] = ()

    def bound(self, i: int) -> Fraction:
        return self.rho**i * max(self.w) / min(self.w)

    def counter_bound(self, epsilon: Fraction) -> int:
        """Least i >= 0 with bound(i) <= epsilon."""
        ratio = max(self.w) / min(self.w)
        i = max(0, math.floor(math.log(float(ratio / epsilon)) / -math.log(float(self.rho))) - 2)
        while self.bound(i) > epsilon:
            i += 1
        while i > 0 and self.bound(i - 1) <= epsilon:
            i -= 1
        return i

    def to_json(self) -> dict:
        from .report import rational

        return {"rho": rational(self.rho), "w": {n: rational(v) for n, v in zip(self.names, self.w)}}


def check_supermartingale(model: OcSsg, rho: Fraction, w: Sequence[Fraction]) -> bool:
    for q in range(model.n_states):
        rules = [model.rules[i] for i in model.out_rules[q]]
        if model.owner(q) is Owner.MAX:
            if any(rho**r.delta * w[r.dst] > w[q] for r in rules):
                return False
        elif sum((r.prob * rho**r.delta * w[r.dst] for r in rules), Fraction(0)) > w[q]:
            return False
    return True


def _weights(model: OcSsg, rho: Fraction) -> list[Fraction] | None:
    """Least-sum w >= 1 satisfying the supermartingale inequalities for ``rho``."""
    n = model.n_states
    A, b = [], []
    for q in range(n):
        if model.owner(q) is Owner.MAX:
            groups = [[i] for i in model.out_rules[q]]
        else:
            groups = [list(model.out_rules[q])]
        for group in groups:
            row = [Fraction(0)] * n
            row[q] -= 1
            for i in group:
                r = model.rules[i]
                row[r.dst] += (r.prob if r.prob is not None else 1) * rho**r.delta
            A.append(row)
            b.append(Fraction(0))
    for q in range(n):
        row = [Fraction(0)] * n
        row[q] = Fraction(-1)
        A.append(row)
        b.append(Fraction(-1))
    try:
        _, w = maximize([Fraction(-1)] * n, A, b)
    except (Infeasible, ArithmeticError):
        return None
    return w


def exponential_certificate(model: OcSsg, epsilon: Fraction, grid: int = 64) -> ExpCertificate | None:
    """Best certificate over rho in {k / grid}, by the N it gives for ``epsilon``.

    Feasibility is upward closed in rho, so the scan stops at the first
    infeasible rho.  Returns None for models beyond the exact LP size or
    without any feasible rho < 1 (e.g. a zero-drift chance loop).
    """
    if model.has_min or model.n_states > EXACT_LP_LIMIT:
        return None
    names = tuple(name for name, _ in model.states)
    best = None
    for k in range(grid - 1, 0, -1):
        rho = Fraction(k, grid)
        w = _weights(model, rho)
        if w is None:
            break
        cert = ExpCertificate(rho, tuple(w), names)
        if not check_supermartingale(model, rho, cert.w):  # the LP is exact; this guards the contract
            break
        if best is None or cert.counter_bound(epsilon) < best.counter_bound(epsilon):
            best = cert
    return best
