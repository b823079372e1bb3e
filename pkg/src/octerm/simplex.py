"""Exact two-phase simplex over the rationals with Bland's rule."""
from __future__ import annotations

from fractions import Fraction
from typing import Sequence

Z = Fraction(0)


class Infeasible(ArithmeticError):
    pass


class Unbounded(ArithmeticError):
    pass


def _pivot(rows: list[list[Fraction]], obj: list[Fraction] | None, basis: list[int], i: int, j: int) -> None:
    row = rows[i]
    piv = row[j]
    if piv != 1:
        row[:] = [v / piv for v in row]
    others = [r for k, r in enumerate(rows) if k != i]
    if obj is not None:
        others.append(obj)
    for other in others:
        if other[j]:
            f = other[j]
            other[:] = [a - f * b for a, b in zip(other, row)]
    basis[i] = j


def _optimize(rows, obj, basis, allowed) -> None:
    """Maximize; ``obj`` holds reduced costs (negated) with the value in the last slot."""
    while True:
        enter = next((j for j in allowed if obj[j] < 0), None)
        if enter is None:
            return
        best = None
        for i, row in enumerate(rows):
            a = row[enter]
            if a > 0:
                ratio = row[-1] / a
                key = (ratio, basis[i])
                if best is None or key < best[0]:
                    best = (key, i)
        if best is None:
            raise Unbounded("objective is unbounded")
        _pivot(rows, obj, basis, best[1], enter)


def maximize(c: Sequence[Fraction], A: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> tuple[Fraction, list[Fraction]]:
    """max c.v subject to A v <= b, v >= 0.  Returns (optimum, v)."""
    m = len(A)
    n = len(c)
    # columns: n originals, m slacks, m artificials, rhs
    width = n + 2 * m + 1
    rows: list[list[Fraction]] = []
    basis: list[int] = []
    for i in range(m):
        row = [Fraction(v) for v in A[i]] + [Z] * (2 * m) + [Fraction(b[i])]
        row[n + i] = Fraction(1)
        if row[-1] < 0:
            row = [-v for v in row]
            row[n + m + i] = Fraction(1)
            basis.append(n + m + i)
        else:
            basis.append(n + i)
        rows.append(row)

    artificial = [i for i in range(m) if basis[i] >= n + m]
    if artificial:
        # phase 1: maximize -(sum of artificials)
        obj = [Z] * width
        for i in artificial:
            obj[n + m + i] = Fraction(1)
        for i in artificial:
            obj[:] = [a - r for a, r in zip(obj, rows[i])]
        _optimize(rows, obj, basis, range(n + m))
        if obj[-1] != 0:
            raise Infeasible("constraints are infeasible")
        for i in range(m):
            if basis[i] >= n + m:
                j = next((j for j in range(n + m) if rows[i][j] != 0), None)
                if j is not None:
                    _pivot(rows, None, basis, i, j)
        keep = [i for i in range(m) if basis[i] < n + m]
        rows = [rows[i] for i in keep]
        basis = [basis[i] for i in keep]

    obj = [-Fraction(v) for v in c] + [Z] * (2 * m) + [Z]
    for i, j in enumerate(basis):
        if obj[j]:
            f = obj[j]
            obj[:] = [a - f * r for a, r in zip(obj, rows[i])]
    _optimize(rows, obj, basis, range(n + m))
    v = [Z] * n
    for i, j in enumerate(basis):
        if j < n:
            v[j] = rows[i][-1]
    return obj[-1], v
