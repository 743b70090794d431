"""Exact linear-programming decisions for constraint implication.

The question answered here: given inequality rows ``a_i . x + k_i >= 0``, does
``c . x + k >= 0`` hold on the whole feasible set?  Verdicts are always backed
by exact rational evidence:

* implied     -- a Farkas combination ``c = sum(l_i * a_i)`` with ``l_i >= 0``
                 and ``k - sum(l_i * k_i) >= 0``, verified in Fractions;
* not implied -- a rational point (or improving ray) satisfying every row and
                 violating the candidate, again verified exactly.

A floating-point solve (scipy / HiGHS) only proposes the certificate support
or the witness; whenever exact verification of a proposal fails, the decision
falls back to a dense two-phase rational simplex, so no verdict ever rests on
floating-point feasibility.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .rows import Row, coord_key

_FLOAT_TOL = 1e-7
#: Above this tableau size the rational simplex fallback refuses to run.
_EXACT_CELL_BUDGET = 2_000_000


@dataclass(frozen=True)
class ImplicationResult:
    implied: bool
    #: A violating rational point, or an improving ray for unbounded cases.
    witness: Optional[dict] = None

    def __bool__(self) -> bool:
        return self.implied


def decide_implication(rows: Sequence[Row], cand: Row) -> ImplicationResult:
    """Decide whether ``cand >= 0`` follows from ``rows >= 0`` (exactly)."""
    if not cand.coeffs:
        if cand.const >= 0:
            return ImplicationResult(True)
        if not rows:
            return ImplicationResult(False, witness={})
        feasible, point = _exact_feasible_point(rows)
        if not feasible:
            return ImplicationResult(True)
        return ImplicationResult(False, witness=point)
    if not rows:
        coord = next(iter(cand.coeffs))
        sign = -1 if cand.coeffs[coord] > 0 else 1
        scale = Fraction(abs(cand.const) + 1, abs(cand.coeffs[coord]))
        return ImplicationResult(False, witness={coord: sign * scale})

    coords = sorted({c for r in rows for c in r.coeffs} | set(cand.coeffs), key=coord_key)
    witness = _float_witness(rows, cand, coords)
    if witness is not None:
        return ImplicationResult(False, witness=witness)
    if _float_certificate(rows, cand, coords):
        return ImplicationResult(True)
    return _exact_decide(rows, cand, coords)


def verify_witness(rows: Sequence[Row], cand: Row, point: dict) -> bool:
    """Exact check that ``point`` satisfies all rows and violates ``cand``."""
    for r in rows:
        if _row_value(r, point) < 0:
            return False
    return _row_value(cand, point) < 0


def _row_value(row: Row, point: dict) -> Fraction:
    total = Fraction(row.const)
    for c, v in row.coeffs.items():
        total += v * point.get(c, Fraction(0))
    return total


# ---------------------------------------------------------------------------
# Floating-point proposal paths
# ---------------------------------------------------------------------------


def _dense(rows: Sequence[Row], coords: list) -> tuple[np.ndarray, np.ndarray]:
    index = {c: i for i, c in enumerate(coords)}
    a = np.zeros((len(rows), len(coords)))
    k = np.zeros(len(rows))
    for r_i, r in enumerate(rows):
        for c, v in r.coeffs.items():
            a[r_i, index[c]] = float(v)
        k[r_i] = float(r.const)
    return a, k


def _float_witness(rows, cand, coords) -> Optional[dict]:
    """Look for an interior violating point; return it only if exact-verified."""
    a, k = _dense(rows, coords)
    cvec, _ = _dense([cand], coords)
    cvec = cvec[0]
    cconst = float(cand.const)
    d = len(coords)
    box = 1.0 if _homogeneous(rows, cand) else 1e4
    # Variables (x, s): maximize the margin s with every row slack >= s and
    # the candidate value at most -s, so mild rounding cannot flip any sign.
    a_ub = np.hstack([-a, np.ones((len(rows), 1))])
    b_ub = k.copy()
    a_ub = np.vstack([a_ub, np.append(cvec, 1.0)])
    b_ub = np.append(b_ub, -cconst)
    obj = np.zeros(d + 1)
    obj[-1] = -1.0
    bounds = [(-box, box)] * d + [(0, 1.0)]
    res = linprog(obj, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success or res.x is None or res.x[-1] <= _FLOAT_TOL:
        return None
    xs = res.x[:d]
    for denom in (10**4, 10**8, 10**12):
        point = {
            coords[i]: Fraction(xs[i]).limit_denominator(denom) for i in range(d)
        }
        if verify_witness(rows, cand, point):
            return point
    return None


def _float_certificate(rows, cand, coords) -> bool:
    """Propose a Farkas support by float LP, then solve it exactly."""
    a, k = _dense(rows, coords)
    cvec, _ = _dense([cand], coords)
    cvec = cvec[0]
    cconst = float(cand.const)
    m = len(rows)
    res = linprog(
        np.ones(m),
        A_eq=a.T,
        b_eq=cvec,
        A_ub=k.reshape(1, -1),
        b_ub=[cconst],
        bounds=[(0, None)] * m,
        method="highs",
    )
    if not res.success or res.x is None:
        return False
    for cut in (1e-9, 1e-12):
        support = [i for i in range(m) if res.x[i] > cut]
        if support and _exact_certificate_on_support(rows, cand, support):
            return True
    return False


def _exact_certificate_on_support(rows, cand, support) -> bool:
    """Solve sum(l_i a_i) = c exactly on the given rows; check the signs."""
    sup_rows = [rows[i] for i in support]
    coords = sorted(
        {c for r in sup_rows for c in r.coeffs} | set(cand.coeffs), key=coord_key
    )
    ncols = len(sup_rows)
    cindex = {c: i for i, c in enumerate(coords)}
    mat = [[Fraction(0)] * (ncols + 1) for _ in coords]
    for j, r in enumerate(sup_rows):
        for c, v in r.coeffs.items():
            mat[cindex[c]][j] = Fraction(v)
    for c, v in cand.coeffs.items():
        mat[cindex[c]][ncols] = Fraction(v)
    solution = _solve_consistent(mat, ncols)
    if solution is None or any(l < 0 for l in solution):
        return False
    slack = Fraction(cand.const) - sum(
        l * Fraction(r.const) for l, r in zip(solution, sup_rows)
    )
    return slack >= 0


def _solve_consistent(mat: list[list[Fraction]], ncols: int) -> Optional[list[Fraction]]:
    """Gaussian elimination on [M | rhs]; particular solution with free vars 0."""
    nrows = len(mat)
    pivot_of_col: dict[int, int] = {}
    r = 0
    for col in range(ncols):
        pivot = next((i for i in range(r, nrows) if mat[i][col] != 0), None)
        if pivot is None:
            continue
        mat[r], mat[pivot] = mat[pivot], mat[r]
        pv = mat[r][col]
        mat[r] = [v / pv for v in mat[r]]
        for i in range(nrows):
            if i != r and mat[i][col] != 0:
                f = mat[i][col]
                mat[i] = [vi - f * vr for vi, vr in zip(mat[i], mat[r])]
        pivot_of_col[col] = r
        r += 1
        if r == nrows:
            break
    for i in range(nrows):
        if all(v == 0 for v in mat[i][:ncols]) and mat[i][ncols] != 0:
            return None
    out = [Fraction(0)] * ncols
    for col, row_i in pivot_of_col.items():
        out[col] = mat[row_i][ncols]
    return out


def _homogeneous(rows, cand) -> bool:
    return cand.const == 0 and all(r.const == 0 for r in rows)


# ---------------------------------------------------------------------------
# Exact rational simplex (fallback / small systems)
# ---------------------------------------------------------------------------


def _exact_decide(rows, cand, coords) -> ImplicationResult:
    cells = (len(rows) + 2) * (2 * len(coords) + 2 * len(rows) + 2)
    if cells > _EXACT_CELL_BUDGET:
        raise RuntimeError(
            "implication undecided by certificate search and system too large "
            f"for the exact simplex fallback ({len(rows)} rows, {len(coords)} cols)"
        )
    status, value, point = simplex_min(rows, cand, coords)
    if status == "infeasible":
        return ImplicationResult(True)
    if status == "unbounded":
        return ImplicationResult(False, witness=point)
    if value >= 0:
        return ImplicationResult(True)
    return ImplicationResult(False, witness=point)


def simplex_min(
    rows: Sequence[Row], objective: Row, coords: Optional[list] = None
) -> tuple[str, Optional[Fraction], Optional[dict]]:
    """Exact two-phase simplex: minimize ``objective`` s.t. every row >= 0.

    Free variables are split into positive and negative parts; Bland's rule
    guarantees termination.  Returns (status, value, point) where status is
    ``optimal`` / ``unbounded`` / ``infeasible``; for ``unbounded`` the point
    is an improving ray instead of a feasible point.
    """
    if coords is None:
        coords = sorted(
            {c for r in rows for c in r.coeffs} | set(objective.coeffs), key=coord_key
        )
    if not rows:
        raise ValueError("simplex_min requires at least one constraint row")
    cindex = {c: i for i, c in enumerate(coords)}
    d = len(coords)
    m = len(rows)
    # y-layout: u (d) | w (d) | slack (m) | artificial (m) | rhs.
    # Constraint row i encodes a_i (u - w) - s_i = -k_i.
    art0 = 2 * d + m
    total = art0 + m
    tab: list[list[Fraction]] = []
    for i, r in enumerate(rows):
        row = [Fraction(0)] * (total + 1)
        for c, v in r.coeffs.items():
            j = cindex[c]
            row[j] = Fraction(v)
            row[d + j] = Fraction(-v)
        row[2 * d + i] = Fraction(-1)
        row[total] = Fraction(-r.const)
        if row[total] < 0:
            row = [-v for v in row]
        row[art0 + i] = Fraction(1)
        tab.append(row)
    basis = [art0 + i for i in range(m)]

    def pivot(row_i: int, col_j: int, cost: list):
        pv = tab[row_i][col_j]
        if pv != 1:
            tab[row_i] = [v / pv for v in tab[row_i]]
        for i in range(len(tab)):
            if i != row_i and tab[i][col_j] != 0:
                f = tab[i][col_j]
                tab[i] = [vi - f * vr for vi, vr in zip(tab[i], tab[row_i])]
        if cost[col_j] != 0:
            f = cost[col_j]
            prow = tab[row_i]
            for j in range(total + 1):
                if prow[j] != 0:
                    cost[j] -= f * prow[j]
        basis[row_i] = col_j

    def run(cost: list, allowed_cols: int) -> str:
        while True:
            enter = next((j for j in range(allowed_cols) if cost[j] < 0), None)
            if enter is None:
                return "optimal"
            ratios = [
                (tab[i][total] / tab[i][enter], basis[i], i)
                for i in range(len(tab))
                if tab[i][enter] > 0
            ]
            if not ratios:
                return f"unbounded:{enter}"
            _, _, leave = min(ratios, key=lambda t: (t[0], t[1]))
            pivot(leave, enter, cost)

    # Phase 1: minimize the artificial sum, written in nonbasic terms.
    cost1 = [Fraction(0)] * (total + 1)
    for row in tab:
        for j in range(total + 1):
            cost1[j] -= row[j]
    for i in range(m):
        cost1[art0 + i] = Fraction(0)
    status = run(cost1, total)
    if status != "optimal":
        raise AssertionError("phase-1 objective is bounded below by zero")
    if -cost1[total] > 0:
        return "infeasible", None, None
    # Remove leftover basic artificials (pivot out, or drop redundant rows).
    for i in reversed(range(len(tab))):
        if basis[i] >= art0:
            j = next((j for j in range(art0) if tab[i][j] != 0), None)
            if j is None:
                del tab[i]
                del basis[i]
            else:
                pivot(i, j, cost1)

    cost2 = [Fraction(0)] * (total + 1)
    for c, v in objective.coeffs.items():
        j = cindex[c]
        cost2[j] = Fraction(v)
        cost2[d + j] = Fraction(-v)
    for i in range(len(tab)):
        j = basis[i]
        if j < art0 and cost2[j] != 0:
            f = cost2[j]
            for col in range(total + 1):
                cost2[col] -= f * tab[i][col]

    status = run(cost2, art0)
    if status.startswith("unbounded"):
        enter = int(status.split(":")[1])
        ray = [Fraction(0)] * total
        ray[enter] = Fraction(1)
        for i in range(len(tab)):
            ray[basis[i]] = -tab[i][enter]
        return "unbounded", None, _point_from_y(ray, coords, d)
    y = [Fraction(0)] * total
    for i in range(len(tab)):
        y[basis[i]] = tab[i][total]
    point = _point_from_y(y, coords, d)
    value = Fraction(objective.const) + sum(
        Fraction(v) * point.get(c, Fraction(0)) for c, v in objective.coeffs.items()
    )
    return "optimal", value, point


def _point_from_y(y: list[Fraction], coords: list, d: int) -> dict:
    return {coords[j]: y[j] - y[d + j] for j in range(d) if y[j] != y[d + j]}


def _exact_feasible_point(rows) -> tuple[bool, Optional[dict]]:
    coords = sorted({c for r in rows for c in r.coeffs}, key=coord_key)
    if not coords:
        return all(r.const >= 0 for r in rows), {}
    status, _, point = simplex_min(rows, Row({}, 0), coords)
    if status == "infeasible":
        return False, None
    return True, point
