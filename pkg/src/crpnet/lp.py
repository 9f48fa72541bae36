"""Small dense LPs and linear systems in exact rational arithmetic."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

Matrix = list[list[Fraction]]


class SingularError(ArithmeticError):
    pass


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(str(v)) if isinstance(v, float) else Fraction(v)


def to_fractions(a) -> Matrix:
    return [[_frac(v) for v in row] for row in a]


def inverse(a) -> Matrix:
    """Gauss-Jordan inverse of a square rational matrix."""
    n = len(a)
    aug = [[_frac(v) for v in row] + [Fraction(int(i == k)) for k in range(n)] for i, row in enumerate(a)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise SingularError(f"matrix is singular (column {col})")
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [v - f * w for v, w in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def solve(a, b) -> list[Fraction]:
    inv = inverse(a)
    b = [_frac(v) for v in b]
    return [sum((x * y for x, y in zip(row, b)), Fraction(0)) for row in inv]


def rank(a) -> int:
    rows = [[_frac(v) for v in row] for row in a]
    if not rows:
        return 0
    r = 0
    ncol = len(rows[0])
    for col in range(ncol):
        piv = next((i for i in range(r, len(rows)) if rows[i][col] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        for i in range(len(rows)):
            if i != r and rows[i][col] != 0:
                f = rows[i][col] / rows[r][col]
                rows[i] = [v - f * w for v, w in zip(rows[i], rows[r])]
        r += 1
        if r == len(rows):
            break
    return r


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: list[Fraction] | None = None
    objective: Fraction | None = None
    basis: list[int] | None = None
    reduced_costs: list[Fraction] | None = None


class _Tableau:
    def __init__(self, a: Matrix, b: list[Fraction], basis: list[int]):
        self.a = [row[:] for row in a]
        self.b = b[:]
        self.basis = basis[:]

    def pivot(self, r: int, c: int) -> None:
        a, b = self.a, self.b
        p = a[r][c]
        a[r] = [v / p for v in a[r]]
        b[r] /= p
        for i in range(len(a)):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [v - f * w for v, w in zip(a[i], a[r])]
                b[i] -= f * b[r]
        self.basis[r] = c

    def reduced_costs(self, c: list[Fraction]) -> list[Fraction]:
        d = c[:]
        for i, bi in enumerate(self.basis):
            cb = c[bi]
            if cb != 0:
                row = self.a[i]
                d = [dj - cb * aij for dj, aij in zip(d, row)]
        return d

    def run(self, c: list[Fraction], allowed: set[int]) -> str:
        """Bland's rule: lowest-index entering column, lowest-index leaving basic variable."""
        while True:
            d = self.reduced_costs(c)
            enter = next((j for j in sorted(allowed) if d[j] < 0 and j not in self.basis), None)
            if enter is None:
                return "optimal"
            best = None
            for i, row in enumerate(self.a):
                if row[enter] > 0:
                    ratio = self.b[i] / row[enter]
                    key = (ratio, self.basis[i])
                    if best is None or key < best[0]:
                        best = (key, i)
            if best is None:
                return "unbounded"
            self.pivot(best[1], enter)


def simplex(c, a_eq, b_eq) -> LPResult:
    """Minimise c'x subject to A x = b, x >= 0 by the two-phase simplex method.

    All arithmetic is exact; Bland's rule guarantees termination.
    """
    c = [_frac(v) for v in c]
    a = to_fractions(a_eq)
    b = [_frac(v) for v in b_eq]
    m, n = len(a), len(c)
    for i in range(m):
        if b[i] < 0:
            a[i] = [-v for v in a[i]]
            b[i] = -b[i]
    # phase 1 with one artificial per row
    a1 = [row + [Fraction(int(i == k)) for k in range(m)] for i, row in enumerate(a)]
    tab = _Tableau(a1, b, list(range(n, n + m)))
    c1 = [Fraction(0)] * n + [Fraction(1)] * m
    tab.run(c1, set(range(n + m)))
    if sum((tab.b[i] for i in range(m) if tab.basis[i] >= n), Fraction(0)) > 0:
        return LPResult("infeasible")
    # drive zero-level artificials out of the basis; rows that cannot pivot are redundant
    keep = []
    for i in range(m):
        if tab.basis[i] >= n:
            col = next((j for j in range(n) if tab.a[i][j] != 0), None)
            if col is None:
                continue
            tab.pivot(i, col)
        keep.append(i)
    tab.a = [tab.a[i][:n] for i in keep]
    tab.b = [tab.b[i] for i in keep]
    tab.basis = [tab.basis[i] for i in keep]
    status = tab.run(c, set(range(n)))
    if status != "optimal":
        return LPResult(status)
    x = [Fraction(0)] * n
    for i, bi in enumerate(tab.basis):
        x[bi] = tab.b[i]
    d = tab.reduced_costs(c)
    obj = sum((ci * xi for ci, xi in zip(c, x)), Fraction(0))
    return LPResult("optimal", x, obj, tab.basis[:], d)
