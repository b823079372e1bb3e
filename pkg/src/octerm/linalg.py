"""Exact sparse Gaussian elimination over the rationals."""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from gmpy2 import mpq  # much faster than Fraction on the long denominators of deep segment games

Row = dict[int, Fraction]


class SingularSystem(ArithmeticError):
    pass


def as_fraction(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(int(v.numerator), int(v.denominator))


def solve_sparse(rows: Sequence[Row], rhs: Sequence[Fraction], raw: bool = False) -> list[Fraction]:
    """Solve ``A x = b`` exactly, with ``A`` given as one ``{column: coeff}`` dict per row.

    Rows are eliminated in the given order, which keeps fill-in inside the
    band for the level-structured systems produced by the segment game.
    Systems of the form ``I - P`` with ``P`` substochastic and absorbing are
    nonsingular M-matrices, so the diagonal pivot never vanishes for them;
    a row swap is done anyway when it does, to stay correct on other input.

    Arithmetic runs on gmpy2 rationals; ``raw`` returns them as they are
    instead of converting back to Fraction.
    """
    n = len(rows)
    a = [{j: mpq(v) for j, v in r.items()} for r in rows]
    b = [mpq(v) for v in rhs]
    cols: dict[int, set[int]] = {}
    for i, r in enumerate(a):
        for j in r:
            cols.setdefault(j, set()).add(i)

    for k in range(n):
        if not a[k].get(k):
            cand = sorted(i for i in cols.get(k, ()) if i > k and a[i].get(k))
            if not cand:
                raise SingularSystem(f"no pivot for column {k}")
            p = cand[0]
            for j in a[k]:
                cols[j].discard(k)
                cols[j].add(p)
            for j in a[p]:
                cols[j].discard(p)
                cols[j].add(k)
            a[k], a[p] = a[p], a[k]
            b[k], b[p] = b[p], b[k]
        rk = a[k]
        piv = rk[k]
        if piv != 1:
            inv = 1 / piv
            for j in rk:
                rk[j] *= inv
            b[k] *= inv
        bk = b[k]
        for i in list(cols.get(k, ())):
            if i <= k:
                continue
            ri = a[i]
            f = ri.pop(k)
            cols[k].discard(i)
            for j, v in rk.items():
                if j == k:
                    continue
                old = ri.get(j)
                if old is None:
                    ri[j] = -f * v
                    cols.setdefault(j, set()).add(i)
                else:
                    new = old - f * v
                    if new:
                        ri[j] = new
                    else:
                        del ri[j]
                        cols[j].discard(i)
            if bk:
                b[i] -= f * bk

    x = [mpq(0)] * n
    for k in range(n - 1, -1, -1):
        s = b[k]
        for j, v in a[k].items():
            if j != k:
                s -= v * x[j]
        x[k] = s
    return x if raw else [as_fraction(v) for v in x]
