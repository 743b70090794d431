"""Exact integer arithmetic on sparse constraint rows.

A row represents the affine expression ``sum_c coeffs[c] * x_c + const`` over
coordinates ``c``.  Coordinates are subset masks (int) or auxiliary term names
(str).  All arithmetic is over the integers: rows are rescaled by their gcd
after every operation, so Fourier-Motzkin combination and Gaussian
substitution never leave the integers and are immune to rounding.
"""

from __future__ import annotations

from math import gcd
from typing import Callable, Iterable, Optional, Union

Coord = Union[int, str]


def coord_key(c: Coord) -> tuple:
    """Deterministic total order: subset masks by (size, mask), then aux names."""
    if isinstance(c, int):
        return (0, c.bit_count(), c)
    return (1, c)


class Row:
    """Mutable sparse integer row with provenance history for Chernikov pruning."""

    __slots__ = ("coeffs", "const", "hist")

    def __init__(self, coeffs: dict, const: int = 0, hist: frozenset = frozenset()):
        self.coeffs = coeffs
        self.const = const
        self.hist = hist

    def copy(self) -> "Row":
        return Row(dict(self.coeffs), self.const, self.hist)

    def key(self) -> tuple:
        items = tuple(sorted(self.coeffs.items(), key=lambda kv: coord_key(kv[0])))
        return (items, self.const)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"Row({self.coeffs}, const={self.const})"


def normalize(row: Row) -> Row:
    """Divide by the gcd of all coefficients and the constant (in place)."""
    row.coeffs = {c: v for c, v in row.coeffs.items() if v != 0}
    g = 0
    for v in row.coeffs.values():
        g = gcd(g, v)
    g = gcd(g, row.const)
    if g > 1:
        row.coeffs = {c: v // g for c, v in row.coeffs.items()}
        row.const //= g
    return row


def scaled_sum(a: Row, fa: int, b: Row, fb: int) -> Row:
    """Return ``fa * a + fb * b``, gcd-normalized, with merged history."""
    coeffs = {c: v * fa for c, v in a.coeffs.items()}
    for c, v in b.coeffs.items():
        coeffs[c] = coeffs.get(c, 0) + v * fb
    out = Row(coeffs, a.const * fa + b.const * fb, a.hist | b.hist)
    return normalize(out)


def negated(row: Row) -> Row:
    return Row({c: -v for c, v in row.coeffs.items()}, -row.const, row.hist)


def substitute(row: Row, eq: Row, pivot: Coord) -> Row:
    """Eliminate ``pivot`` from ``row`` using the equality row ``eq``.

    Scales by |eq[pivot]| so the result is a valid consequence for
    inequalities (the multiplier on ``row`` stays positive).
    """
    rp = row.coeffs.get(pivot, 0)
    if rp == 0:
        return row
    ep = eq.coeffs[pivot]
    if ep > 0:
        out = scaled_sum(row, ep, eq, -rp)
    else:
        out = scaled_sum(row, -ep, eq, rp)
    out.coeffs.pop(pivot, None)
    out.hist = row.hist
    return out


def eliminate_equalities(
    equalities: list[Row],
    rows: list[Row],
    pivot_rank: Callable[[Coord], tuple],
    allowed: Optional[Callable[[Coord], bool]] = None,
) -> tuple[list[tuple[Coord, Row]], list[Row], list[Row]]:
    """Gaussian elimination of equalities against a row list.

    Each equality is solved for one pivot coordinate (the one minimizing
    ``pivot_rank`` among coordinates accepted by ``allowed``) and substituted
    into every other row and remaining equality.  Returns ``(substitutions,
    residual_equalities, reduced_rows)`` where substitutions is the list of
    ``(pivot, equality)`` pairs applied in order and residual equalities are
    the nonzero equalities with no admissible pivot.

    Raises InfeasibleSystemError if an equality reduces to ``const != 0``.
    """
    from .errors import InfeasibleSystemError

    pending = [normalize(e.copy()) for e in equalities]
    pending.sort(key=lambda r: r.key())
    work_rows = [normalize(r.copy()) for r in rows]
    subs: list[tuple[Coord, Row]] = []
    residual: list[Row] = []

    while pending:
        eq = pending.pop(0)
        if eq.is_zero():
            if eq.const != 0:
                raise InfeasibleSystemError("inconsistent equality constraints")
            continue
        candidates = [c for c in eq.coeffs if allowed is None or allowed(c)]
        if not candidates:
            residual.append(eq)
            continue
        pivot = min(candidates, key=pivot_rank)
        subs.append((pivot, eq))
        pending = [substitute(r, eq, pivot) for r in pending]
        work_rows = [substitute(r, eq, pivot) for r in work_rows]
        residual = [substitute(r, eq, pivot) for r in residual]

    return subs, residual, work_rows


def reduce_row(row: Row, subs: Iterable[tuple[Coord, Row]]) -> Row:
    """Apply a recorded substitution sequence to a fresh row."""
    out = normalize(row.copy())
    for pivot, eq in subs:
        out = substitute(out, eq, pivot)
    return out
