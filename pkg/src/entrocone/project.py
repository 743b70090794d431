"""Projection of entropy constraint systems onto marginal scenarios.

The pipeline: substitute equalities away by exact Gaussian elimination (CI
equalities are numerous and substitution is lossless), then run
Fourier-Motzkin elimination on the remaining unwanted coordinates with
Kohler/Chernikov history pruning, and finally certify every surviving
inequality as a facet by exact LP.  The output is canonical: equalities in
reduced row-echelon form, inequalities reduced modulo the equality space,
deduplicated, irredundant, and sorted -- so the result is independent of the
elimination order and safe to use as a golden file.
"""

from __future__ import annotations

import os
import time
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .cone import EQ, INEQ, ConstraintSystem, LinearConstraint
from .errors import InfeasibleSystemError, ResourceLimitError
from .rows import (
    Coord,
    Row,
    coord_key,
    eliminate_equalities,
    negated,
    normalize,
    scaled_sum,
    substitute,
)
from .subsets import set_label, subsets_of

#: Default cap on intermediate inequality counts, overridable via environment.
DEFAULT_MAX_ROWS = 200_000
MAX_ROWS_ENV = "ENTROCONE_MAX_INEQS"


def _default_max_rows() -> int:
    raw = os.environ.get(MAX_ROWS_ENV)
    if raw is None:
        return DEFAULT_MAX_ROWS
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{MAX_ROWS_ENV} must be an integer, got {raw!r}") from None


@dataclass(frozen=True, init=False)
class MarginalScenario:
    """The family of variable subsets whose joint statistics are observable.

    Stored downward closed: if a set is observable, so is every nonempty
    subset of it.  Inputs that are not already closed are closed here, with a
    warning (entropies of subsets are defined whenever the superset is).
    """

    n: int
    kept: frozenset

    def __init__(self, n: int, kept: Iterable[int]):
        raw = set(kept)
        closure = set()
        full = (1 << n) - 1
        for mask in raw:
            if mask == 0 or mask & ~full:
                raise ValueError(f"scenario set {mask} out of range for n={n}")
            closure.update(subsets_of(mask))
        if closure != raw:
            warnings.warn(
                "marginal scenario was not downward closed; taking its closure",
                stacklevel=2,
            )
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "kept", frozenset(closure))

    @property
    def support(self) -> int:
        mask = 0
        for m in self.kept:
            mask |= m
        return mask

    def maximal_sets(self) -> tuple[int, ...]:
        return tuple(
            sorted(
                m
                for m in self.kept
                if not any(o != m and o & m == m for o in self.kept)
            )
        )


def scenario_observable(dag) -> MarginalScenario:
    """All nonempty subsets of the DAG's observable nodes."""
    mask = dag.observable_mask
    if mask == 0:
        raise ValueError("the DAG has no observable nodes")
    return MarginalScenario(dag.n, [mask])


def scenario_pairwise(
    n: int, variables: Optional[Sequence[int]] = None
) -> MarginalScenario:
    """Singletons and pairs of the given variable indices (default: all)."""
    idx = list(range(n)) if variables is None else list(variables)
    if len(idx) < 2:
        raise ValueError("a pairwise scenario needs at least two variables")
    sets = [1 << i for i in idx]
    sets += [(1 << a) | (1 << b) for k, a in enumerate(idx) for b in idx[k + 1 :]]
    return MarginalScenario(n, sets)


def scenario_from_sets(n: int, sets: Iterable[int]) -> MarginalScenario:
    return MarginalScenario(n, list(sets))


@dataclass(frozen=True)
class EliminationStrategy:
    """Tuning knobs for :func:`eliminate`; defaults match production use."""

    max_rows: Optional[int] = None
    chernikov: bool = True
    substitute_equalities: bool = True
    #: Forced elimination order (coordinate list) for reproducibility tests.
    order: Optional[tuple] = None
    #: Run an exact-LP redundancy sweep whenever the active set grows past this.
    lp_prune_threshold: Optional[int] = None

    def resolved_max_rows(self) -> int:
        return self.max_rows if self.max_rows is not None else _default_max_rows()


@dataclass(frozen=True)
class StepReport:
    coordinate: str
    rows_before: int
    pairs: int
    rows_after: int
    seconds: float


@dataclass(frozen=True)
class EliminationReport:
    order: tuple[str, ...]
    substituted: tuple[str, ...]
    steps: tuple[StepReport, ...]
    rows_out: int
    equalities_out: int
    seconds_total: float

    def to_json_dict(self, include_timing: bool = False) -> dict:
        steps = []
        for s in self.steps:
            d = {
                "coordinate": s.coordinate,
                "rows_before": s.rows_before,
                "pairs": s.pairs,
                "rows_after": s.rows_after,
            }
            if include_timing:
                d["seconds"] = s.seconds
            steps.append(d)
        out = {
            "order": list(self.order),
            "substituted": list(self.substituted),
            "steps": steps,
            "rows_out": self.rows_out,
            "equalities_out": self.equalities_out,
        }
        if include_timing:
            out["seconds_total"] = self.seconds_total
        return out


def _coord_label(coord: Coord, variables: Sequence[str]) -> str:
    if isinstance(coord, int):
        return set_label(coord, variables)
    return coord


def eliminate(
    system: ConstraintSystem,
    scenario: MarginalScenario,
    strategy: Optional[EliminationStrategy] = None,
) -> tuple[ConstraintSystem, EliminationReport]:
    """Project ``system`` onto the scenario's coordinates.

    The returned system is expressed over the scenario's support variables
    (plus any auxiliary coordinates of the input) and is a complete, fully
    irredundant facet description of the projection.
    """
    strategy = strategy or EliminationStrategy()
    if scenario.n != system.n:
        raise ValueError("scenario and system disagree on the variable count")
    t_start = time.perf_counter()
    max_rows = strategy.resolved_max_rows()

    keep: set = set(scenario.kept) | set(system.aux)
    ineq_rows = [c.to_row() for c in system.inequalities]
    eq_rows = [c.to_row() for c in system.equalities]

    substituted: list[str] = []
    if strategy.substitute_equalities:
        subs, residual_eqs, ineq_rows = eliminate_equalities(
            eq_rows,
            ineq_rows,
            pivot_rank=lambda c: (
                -(c.bit_count() if isinstance(c, int) else 0),
                coord_key(c),
            ),
            allowed=lambda c: c not in keep,
        )
        substituted = [_coord_label(p, system.variables) for p, _ in subs]
    else:
        residual_eqs = []
        for eq in eq_rows:
            if any(c not in keep for c in eq.coeffs):
                ineq_rows.append(eq.copy())
                ineq_rows.append(negated(eq))
            else:
                residual_eqs.append(eq)

    done: dict[tuple, Row] = {}
    active: dict[tuple, Row] = {}

    def absorb(row: Row, pool_done: dict, pool_active: dict, eliminated: int):
        if row.is_zero():
            if row.const < 0:
                raise InfeasibleSystemError("system is infeasible")
            return
        if strategy.chernikov and len(row.hist) > eliminated + 1:
            return
        pool = pool_done if all(c in keep for c in row.coeffs) else pool_active
        key = row.key()
        if key not in pool or len(pool[key].hist) > len(row.hist):
            pool[key] = row

    for i, row in enumerate(ineq_rows):
        row = normalize(row)
        row.hist = frozenset([i])
        absorb(row, done, active, 0)

    steps: list[StepReport] = []
    order_labels: list[str] = []
    eliminated = 0
    forced = list(strategy.order) if strategy.order else []

    while True:
        pending = sorted(
            {c for row in active.values() for c in row.coeffs if c not in keep},
            key=coord_key,
        )
        if not pending:
            break
        forced = [c for c in forced if c in pending]
        coord = forced.pop(0) if forced else _greedy_coordinate(active, pending)

        t_step = time.perf_counter()
        rows_before = len(active)
        pos, neg, zero = [], [], []
        for row in active.values():
            v = row.coeffs.get(coord, 0)
            (pos if v > 0 else neg if v < 0 else zero).append(row)
        eliminated += 1
        new_active: dict[tuple, Row] = {}
        for row in zero:
            absorb(row, done, new_active, eliminated)
        for p in pos:
            pc = p.coeffs[coord]
            for q in neg:
                combined = scaled_sum(p, -q.coeffs[coord], q, pc)
                combined.coeffs.pop(coord, None)
                absorb(combined, done, new_active, eliminated)
                if len(new_active) + len(done) > max_rows:
                    raise ResourceLimitError(
                        f"intermediate inequality count exceeded {max_rows} "
                        f"(override via {MAX_ROWS_ENV} or the strategy)"
                    )
        active = new_active
        if (
            strategy.lp_prune_threshold is not None
            and len(active) > strategy.lp_prune_threshold
        ):
            active = _lp_prune(active, list(done.values()), residual_eqs)
        order_labels.append(_coord_label(coord, system.variables))
        steps.append(
            StepReport(
                coordinate=order_labels[-1],
                rows_before=rows_before,
                pairs=len(pos) * len(neg),
                rows_after=len(active),
                seconds=time.perf_counter() - t_step,
            )
        )

    final_ineqs, final_eqs = _finalize(list(done.values()), residual_eqs)
    out_system = _compact(system, scenario, final_ineqs, final_eqs)
    report = EliminationReport(
        order=tuple(order_labels),
        substituted=tuple(substituted),
        steps=tuple(steps),
        rows_out=len(out_system.inequalities),
        equalities_out=len(out_system.equalities),
        seconds_total=time.perf_counter() - t_start,
    )
    return out_system, report


def _greedy_coordinate(active: Mapping[tuple, Row], pending: list) -> Coord:
    """Classic minimum pos*neg fill-in heuristic, ties broken by coordinate."""
    counts: dict = {c: [0, 0] for c in pending}
    for row in active.values():
        for c, v in row.coeffs.items():
            if c in counts:
                counts[c][0 if v > 0 else 1] += 1
    return min(pending, key=lambda c: (counts[c][0] * counts[c][1], coord_key(c)))


def _lp_prune(active: dict, done_rows: list[Row], eqs: list[Row]) -> dict:
    """Drop active rows exactly implied by the rest (used only on blowup)."""
    from . import lp

    context = done_rows + _eq_as_rows(eqs)
    keys = sorted(active)
    kept: dict[tuple, Row] = {}
    for key in keys:
        others = [active[k] for k in keys if k != key and (k in kept or k > key)]
        if not lp.decide_implication(others + context, active[key]).implied:
            kept[key] = active[key]
    return kept


def _finalize(ineq_rows: list[Row], eq_rows: list[Row]) -> tuple[list[Row], list[Row]]:
    """Canonicalize the projected system: implicit equalities, RREF, facets."""
    from . import lp

    eqs = [normalize(e.copy()) for e in eq_rows]
    ineqs = _reduce_mod_equalities(ineq_rows, eqs)

    # Implicit equalities: inequalities whose reverse is also implied.
    changed = True
    while changed:
        changed = False
        lp_rows = ineqs + _eq_as_rows(eqs)
        for row in list(ineqs):
            if lp.decide_implication(lp_rows, negated(row)).implied:
                eqs.append(row)
                ineqs = _reduce_mod_equalities(
                    [r for r in ineqs if r is not row], eqs
                )
                changed = True
                break

    # Facet certification: drop rows implied by all the others.
    eq_context = _eq_as_rows(eqs)
    rows_sorted = sorted(ineqs, key=lambda r: r.key())
    survivors = []
    for i, row in enumerate(rows_sorted):
        others = [r for j, r in enumerate(rows_sorted) if j != i]
        if not lp.decide_implication(others + eq_context, row).implied:
            survivors.append(row)
    return survivors, eqs


def _eq_as_rows(eqs: list[Row]) -> list[Row]:
    out = []
    for e in eqs:
        out.append(e)
        out.append(negated(e))
    return out


def _reduce_mod_equalities(ineq_rows: list[Row], eqs: list[Row]) -> list[Row]:
    """RREF the equalities in place, then reduce inequalities modulo them."""
    basis: list[tuple[Coord, Row]] = []
    for e in sorted((normalize(e.copy()) for e in eqs), key=lambda r: r.key()):
        for pivot, b in basis:
            e = substitute(e, b, pivot)
        if e.is_zero():
            if e.const != 0:
                raise InfeasibleSystemError("inconsistent equalities in projection")
            continue
        pivot = min(e.coeffs, key=coord_key)
        basis = [(pv, substitute(b, e, pivot)) for pv, b in basis]
        basis.append((pivot, e))
    basis.sort(key=lambda t: coord_key(t[0]))
    eqs[:] = [b for _, b in basis]

    seen: dict[tuple, Row] = {}
    for row in ineq_rows:
        r = normalize(row.copy())
        for pivot, b in basis:
            r = substitute(r, b, pivot)
        if r.is_zero():
            if r.const < 0:
                raise InfeasibleSystemError("projection is infeasible")
            continue
        seen.setdefault(r.key(), r)
    return list(seen.values())


def _compact(
    system: ConstraintSystem,
    scenario: MarginalScenario,
    ineq_rows: list[Row],
    eq_rows: list[Row],
) -> ConstraintSystem:
    """Re-express the projection over the scenario's support variables only."""
    support = scenario.support
    old_indices = [i for i in range(system.n) if support >> i & 1]
    remap = {old: new for new, old in enumerate(old_indices)}
    variables = tuple(system.variables[i] for i in old_indices)

    def remap_mask(mask: int) -> int:
        out = 0
        for i in range(mask.bit_length()):
            if mask >> i & 1:
                out |= 1 << remap[i]
        return out

    def convert(row: Row, kind: str) -> LinearConstraint:
        coeffs = {}
        for c, v in row.coeffs.items():
            coeffs[remap_mask(c) if isinstance(c, int) else c] = v
        return LinearConstraint.make(coeffs, row.const, kind)

    from .notation import render_constraint

    ineqs = sorted(
        (convert(r, INEQ) for r in ineq_rows), key=lambda c: (c.terms, c.const)
    )
    eqs = sorted((convert(r, EQ) for r in eq_rows), key=lambda c: (c.terms, c.const))
    ineqs = [c.relabeled(render_constraint(c, variables)) for c in ineqs]
    eqs = [c.relabeled(render_constraint(c, variables)) for c in eqs]
    return ConstraintSystem(variables, tuple(ineqs), tuple(eqs), system.aux)


def eliminate_with_term(
    system: ConstraintSystem,
    scenario: MarginalScenario,
    term: Mapping,
    name: str = "t",
    strategy: Optional[EliminationStrategy] = None,
) -> ConstraintSystem:
    """Project while keeping an auxiliary coordinate tied to a linear term.

    ``term`` maps coordinates of ``system`` to coefficients; the projection
    then bounds the new coordinate ``name`` by scenario-observable entropies.
    """
    if name in system.aux or name in system.variables:
        raise ValueError(f"auxiliary name {name!r} already in use")
    coeffs = dict(term)
    coeffs[name] = coeffs.get(name, 0) - 1
    defining = LinearConstraint.make(coeffs, kind=EQ, label=f"{name}:definition")
    extended = ConstraintSystem(
        system.variables,
        system.inequalities,
        system.equalities + (defining,),
        system.aux + (name,),
    )
    projected, _ = eliminate(extended, scenario, strategy)
    return projected


def elementary_within(
    scenario: MarginalScenario,
    variables: Sequence[str],
    aux_nonneg: Sequence[str] = (),
) -> ConstraintSystem:
    """Monotonicity and submodularity instances expressible inside a scenario.

    This is the reference system for calling a projected inequality
    "non-trivial": anything implied by these within-scenario polymatroid
    facts carries no information about the latent structure.  Auxiliary
    coordinates listed in ``aux_nonneg`` (information terms, hence
    nonnegative) contribute their sign constraint.
    """
    rows: list[LinearConstraint] = []
    kept = scenario.kept
    for m in sorted(kept):
        for i in range(scenario.n):
            if not m >> i & 1:
                continue
            below = m & ~(1 << i)
            if below == 0 or below in kept:
                coeffs = {m: 1}
                if below:
                    coeffs[below] = -1
                cond = set_label(below, variables)
                label = f"H({variables[i]}|{cond})" if cond else f"H({variables[i]})"
                rows.append(LinearConstraint.make(coeffs, kind=INEQ, label=label))
    for m in sorted(kept):
        bits = [i for i in range(scenario.n) if m >> i & 1]
        if len(bits) < 2:
            continue
        for a_pos in range(len(bits) - 1):
            for b_pos in range(a_pos + 1, len(bits)):
                i, j = bits[a_pos], bits[b_pos]
                s = m & ~(1 << i) & ~(1 << j)
                if s and s not in kept:
                    continue
                si, sj = s | 1 << i, s | 1 << j
                if si not in kept or sj not in kept:
                    continue
                coeffs = {si: 1, sj: 1, m: -1}
                if s:
                    coeffs[s] = coeffs.get(s, 0) - 1
                cond = set_label(s, variables)
                label = f"I({variables[i]}:{variables[j]}" + (
                    f"|{cond})" if cond else ")"
                )
                rows.append(LinearConstraint.make(coeffs, kind=INEQ, label=label))
    dedup: dict[tuple, LinearConstraint] = {}
    for c in rows:
        dedup.setdefault(c.scaled_key(), c)
    aux_rows = [
        LinearConstraint.make({a: 1}, kind=INEQ, label=f"{a}>=0") for a in aux_nonneg
    ]
    return ConstraintSystem(
        tuple(variables),
        tuple(dedup.values()) + tuple(aux_rows),
        (),
        tuple(aux_nonneg),
    )


def nontrivial_inequalities(
    system: ConstraintSystem,
    scenario: MarginalScenario,
    aux_nonneg: Sequence[str] = (),
) -> tuple[LinearConstraint, ...]:
    """The inequalities of ``system`` not implied by within-scenario facts."""
    from .cone import implies

    reference = elementary_within(scenario, system.variables, aux_nonneg)
    return tuple(c for c in system.inequalities if not implies(reference, c))
