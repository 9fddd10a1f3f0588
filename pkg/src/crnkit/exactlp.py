"""Exact linear programming over the rationals.

A small dense simplex on `fractions.Fraction` entries, used where
floating-point feasibility answers would be untrustworthy: conservation
weightings and rate-independent reachability witnesses.  Problems here are
tiny (tens of variables), so a textbook two-phase tableau with Bland's rule
is plenty.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

Row = Sequence[Fraction]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


def _pivot(tableau: list[list[Fraction]], basis: list[int], row: int, col: int) -> None:
    piv = tableau[row][col]
    tableau[row] = [x / piv for x in tableau[row]]
    for r, line in enumerate(tableau):
        if r != row and line[col]:
            factor = line[col]
            tableau[r] = [x - factor * y for x, y in zip(line, tableau[row])]
    basis[row] = col


def _simplex(tableau: list[list[Fraction]], basis: list[int], costs: list[Fraction],
             ncols: int) -> str:
    """Minimize costs over the tableau in place; Bland's rule, so no cycling."""
    m = len(tableau)
    while True:
        # reduced costs: c_j - c_B . column_j
        cb = [costs[b] for b in basis]
        entering = -1
        for j in range(ncols):
            red = costs[j] - sum(cb[r] * tableau[r][j] for r in range(m))
            if red < 0:
                entering = j
                break
        if entering < 0:
            return OPTIMAL
        leaving = -1
        best = None
        for r in range(m):
            a = tableau[r][entering]
            if a > 0:
                ratio = tableau[r][-1] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[leaving]):
                    best = ratio
                    leaving = r
        if leaving < 0:
            return UNBOUNDED
        _pivot(tableau, basis, leaving, entering)


def solve_lp(objective: Sequence[Fraction | int], a_eq: Sequence[Row],
             b_eq: Sequence[Fraction | int], maximize: bool = False,
             ) -> tuple[str, list[Fraction] | None, Fraction | None]:
    """Solve min/max ``objective . x`` subject to ``a_eq x = b_eq``, ``x >= 0``.

    Returns ``(status, x, value)`` with exact rational entries; ``x`` is None
    unless the status is "optimal".
    """
    m = len(a_eq)
    n = len(objective)
    a = [[Fraction(x) for x in row] for row in a_eq]
    b = [Fraction(x) for x in b_eq]
    for r in range(m):
        if b[r] < 0:
            a[r] = [-x for x in a[r]]
            b[r] = -b[r]

    # phase I: artificial basis
    tableau = [a[r] + [Fraction(int(i == r)) for i in range(m)] + [b[r]] for r, _ in enumerate(a)]
    basis = [n + r for r in range(m)]
    phase1 = [Fraction(0)] * n + [Fraction(1)] * m
    status = _simplex(tableau, basis, phase1, n + m)
    assert status == OPTIMAL  # phase I is always bounded below by 0
    residue = sum(tableau[r][-1] for r in range(m) if basis[r] >= n)
    if residue > 0:
        return INFEASIBLE, None, None

    # drive leftover artificials out of the basis (or drop redundant rows)
    for r in range(m):
        if basis[r] >= n:
            col = next((j for j in range(n) if tableau[r][j] != 0), None)
            if col is not None:
                _pivot(tableau, basis, r, col)
    keep = [r for r in range(m) if basis[r] < n]
    tableau = [tableau[r][:n] + [tableau[r][-1]] for r in keep]
    basis = [basis[r] for r in keep]

    sign = -1 if maximize else 1
    costs = [sign * Fraction(c) for c in objective]
    status = _simplex(tableau, basis, costs, n)
    if status == UNBOUNDED:
        return UNBOUNDED, None, None
    x = [Fraction(0)] * n
    for r, bcol in enumerate(basis):
        x[bcol] = tableau[r][-1]
    value = sum(Fraction(c) * xi for c, xi in zip(objective, x))
    return OPTIMAL, x, value


def feasible_point(a_eq: Sequence[Row], b_eq: Sequence[Fraction | int],
                   ) -> list[Fraction] | None:
    """Some ``x >= 0`` with ``a_eq x = b_eq``, or None if none exists."""
    n = len(a_eq[0]) if a_eq else 0
    status, x, _ = solve_lp([Fraction(0)] * n, a_eq, b_eq)
    return x if status == OPTIMAL else None
