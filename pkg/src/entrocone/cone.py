"""Entropy-space constraint systems.

Joint entropies of n variables are treated as a vector indexed by the
nonempty subsets of the variables (see :mod:`entrocone.subsets` for the mask
convention).  This module builds the polymatroid description of that space --
the monotonicity and submodularity inequalities every entropy vector
satisfies -- together with the conditional-independence equalities a Bayesian
network adds, and decides linear implication between such systems exactly.

All constraints are stored in a canonical integer form: an inequality is
``expr >= 0``, an equality ``expr = 0`` with the first nonzero coefficient
positive, and the coefficient gcd is always 1.  Entropies are measured in
bits throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from numbers import Rational
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import ResourceLimitError
from .rows import Coord, Row, coord_key, eliminate_equalities, normalize, reduce_row
from .subsets import set_label

INEQ = "ineq"
EQ = "eq"

#: Hard cap on the number of variables of a single system (2**n coordinates).
MAX_VARS = 20

_RationalLike = Union[int, Fraction, Rational]


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


@dataclass(frozen=True)
class SetFunction:
    """A real-valued function on nonempty subsets of [n], e.g. an entropy vector.

    The value at the empty set is structurally zero and never stored.
    """

    n: int
    values: Mapping[int, float]

    def __post_init__(self):
        if not 1 <= self.n <= MAX_VARS:
            raise ValueError(f"variable count must be in [1, {MAX_VARS}]")
        full = (1 << self.n) - 1
        for mask in self.values:
            if not 0 < mask <= full:
                raise ValueError(f"subset mask {mask} out of range for n={self.n}")

    def __getitem__(self, mask: int) -> float:
        if mask == 0:
            return 0.0
        return self.values[mask]

    def get(self, mask: int, default=None):
        if mask == 0:
            return 0.0
        return self.values.get(mask, default)

    def restrict(self, masks: Iterable[int]) -> "SetFunction":
        return SetFunction(self.n, {m: self.values[m] for m in masks if m != 0})


@dataclass(frozen=True)
class CiStatement:
    """Conditional independence of two subsets given a third: a _||_ b | z."""

    a: int
    b: int
    z: int

    def __post_init__(self):
        if self.a & self.b or self.a & self.z or self.b & self.z:
            raise ValueError("a, b, z must be pairwise disjoint")
        if self.a == 0 or self.b == 0:
            raise ValueError("a and b must be nonempty")

    def swapped(self) -> "CiStatement":
        return CiStatement(self.b, self.a, self.z)

    def canonical(self) -> "CiStatement":
        return self if self.a <= self.b else self.swapped()

    def label(self, variables: Sequence[str]) -> str:
        a = set_label(self.a, variables)
        b = set_label(self.b, variables)
        if self.z:
            return f"I({a}:{b}|{set_label(self.z, variables)})"
        return f"I({a}:{b})"


@dataclass(frozen=True)
class LinearConstraint:
    """Canonical sparse linear constraint over subset coordinates.

    ``terms`` holds (coordinate, integer coefficient) pairs sorted by
    coordinate; ``const`` is the inhomogeneity.  ``kind`` is INEQ for
    ``expr >= 0`` or EQ for ``expr = 0``.
    """

    terms: tuple[tuple[Coord, int], ...]
    const: int = 0
    kind: str = INEQ
    label: Optional[str] = field(default=None, compare=False, hash=False)

    @staticmethod
    def make(
        coeffs: Mapping[Coord, _RationalLike],
        const: _RationalLike = 0,
        kind: str = INEQ,
        label: Optional[str] = None,
    ) -> "LinearConstraint":
        """Build a constraint, rescaling rational input to primitive integers."""
        if kind not in (INEQ, EQ):
            raise ValueError(f"unknown constraint kind {kind!r}")
        fracs = {c: _to_fraction(v) for c, v in coeffs.items() if v != 0}
        if not fracs:
            raise ValueError("constraint has no nonzero coefficients")
        for c in fracs:
            if isinstance(c, int) and c <= 0:
                raise ValueError("subset coordinates must be nonempty masks")
        fconst = _to_fraction(const)
        denom = 1
        for v in list(fracs.values()) + [fconst]:
            denom = denom * v.denominator // _gcd(denom, v.denominator)
        ints = {c: int(v * denom) for c, v in fracs.items()}
        iconst = int(fconst * denom)
        g = 0
        for v in ints.values():
            g = _gcd(g, v)
        g = _gcd(g, iconst)
        ints = {c: v // g for c, v in ints.items()}
        iconst //= g
        terms = tuple(sorted(ints.items(), key=lambda kv: coord_key(kv[0])))
        if kind == EQ and terms[0][1] < 0:
            terms = tuple((c, -v) for c, v in terms)
            iconst = -iconst
        return LinearConstraint(terms, iconst, kind, label)

    @property
    def coeffs(self) -> dict[Coord, int]:
        return dict(self.terms)

    def coords(self) -> tuple[Coord, ...]:
        return tuple(c for c, _ in self.terms)

    def value(self, h: Mapping[Coord, float]) -> float:
        """Evaluate the constraint expression at a coordinate assignment."""
        total = float(self.const)
        for c, v in self.terms:
            if isinstance(c, int) and c == 0:
                continue
            try:
                total += v * float(h[c])
            except KeyError:
                raise ValueError(f"coordinate {c!r} missing from the point") from None
        return total

    def scaled_key(self) -> tuple:
        """Identity of the constraint up to positive scaling (and sign for EQ)."""
        return (self.kind, self.terms, self.const)

    def negated(self) -> "LinearConstraint":
        return LinearConstraint.make(
            {c: -v for c, v in self.terms}, -self.const, self.kind, self.label
        )

    def relabeled(self, label: Optional[str]) -> "LinearConstraint":
        return LinearConstraint(self.terms, self.const, self.kind, label)

    def to_row(self) -> Row:
        return Row({c: v for c, v in self.terms}, self.const)


def constraint_from_row(row: Row, kind: str = INEQ, label: Optional[str] = None):
    """Convert a normalized Row back to a constraint; None if trivial."""
    if row.is_zero():
        return None
    return LinearConstraint.make(row.coeffs, row.const, kind, label)


def _gcd(a: int, b: int) -> int:
    from math import gcd

    return gcd(a, b)


@dataclass(frozen=True)
class ConstraintSystem:
    """A finite list of inequalities and equalities over one coordinate space.

    ``variables`` fixes the subset-mask interpretation and rendering order;
    ``aux`` names any auxiliary scalar coordinates (used when an unobservable
    information term is kept through a projection).
    """

    variables: tuple[str, ...]
    inequalities: tuple[LinearConstraint, ...] = ()
    equalities: tuple[LinearConstraint, ...] = ()
    aux: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.variables:
            raise ValueError("a constraint system needs at least one variable")
        if len(set(self.variables)) != len(self.variables):
            raise ValueError("variable names must be unique")
        if len(self.variables) > MAX_VARS:
            raise ResourceLimitError(
                f"{len(self.variables)} variables exceeds the cap of {MAX_VARS}"
            )
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "aux", tuple(self.aux))
        full = (1 << self.n) - 1
        seen: set[tuple] = set()
        for group, kind in ((self.inequalities, INEQ), (self.equalities, EQ)):
            for c in group:
                if c.kind != kind:
                    raise ValueError("constraint stored under the wrong kind")
                for coord, _ in c.terms:
                    if isinstance(coord, int):
                        if not 0 < coord <= full:
                            raise ValueError(f"mask {coord} out of range")
                    elif coord not in self.aux:
                        raise ValueError(f"unknown auxiliary coordinate {coord!r}")
                key = c.scaled_key()
                if key in seen:
                    raise ValueError(f"duplicate constraint {key}")
                seen.add(key)
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        object.__setattr__(self, "equalities", tuple(self.equalities))

    @property
    def n(self) -> int:
        return len(self.variables)

    def __len__(self) -> int:
        return len(self.inequalities) + len(self.equalities)

    def constraints(self) -> tuple[LinearConstraint, ...]:
        return self.inequalities + self.equalities

    def coords_used(self) -> tuple[Coord, ...]:
        seen = []
        have = set()
        for c in self.constraints():
            for coord, _ in c.terms:
                if coord not in have:
                    have.add(coord)
                    seen.append(coord)
        return tuple(sorted(seen, key=coord_key))

    def with_constraints(
        self,
        inequalities: Iterable[LinearConstraint] = (),
        equalities: Iterable[LinearConstraint] = (),
    ) -> "ConstraintSystem":
        """Append constraints, silently dropping exact duplicates."""
        ineqs = list(self.inequalities)
        eqs = list(self.equalities)
        have = {c.scaled_key() for c in ineqs + eqs}
        for c in inequalities:
            if c.scaled_key() not in have:
                have.add(c.scaled_key())
                ineqs.append(c)
        for c in equalities:
            if c.scaled_key() not in have:
                have.add(c.scaled_key())
                eqs.append(c)
        return ConstraintSystem(self.variables, tuple(ineqs), tuple(eqs), self.aux)

    def sorted(self) -> "ConstraintSystem":
        key = lambda c: (c.terms, c.const)
        return ConstraintSystem(
            self.variables,
            tuple(sorted(self.inequalities, key=key)),
            tuple(sorted(self.equalities, key=key)),
            self.aux,
        )


def elementary_inequalities(
    n: int, variables: Optional[Sequence[str]] = None
) -> ConstraintSystem:
    """The polymatroid (monotonicity + submodularity) description of n variables.

    Produces exactly ``n + C(n,2) * 2**(n-2)`` inequalities and no equalities.
    """
    if n < 1:
        raise ValueError("need at least one variable")
    if n > MAX_VARS:
        raise ResourceLimitError(f"n={n} exceeds the cap of {MAX_VARS} variables")
    if variables is None:
        variables = tuple(f"X{i+1}" for i in range(n))
    variables = tuple(variables)
    if len(variables) != n:
        raise ValueError("variable list length must equal n")

    full = (1 << n) - 1
    out: list[LinearConstraint] = []
    for i in range(n):
        below = full ^ (1 << i)
        coeffs = {full: 1}
        if below:
            coeffs[below] = -1
        rest = set_label(below, variables)
        label = f"H({variables[i]}|{rest})" if rest else f"H({variables[i]})"
        out.append(LinearConstraint.make(coeffs, kind=INEQ, label=label))
    for i in range(n - 1):
        for j in range(i + 1, n):
            bi, bj = 1 << i, 1 << j
            others = [k for k in range(n) if k not in (i, j)]
            for pick in range(1 << len(others)):
                k_mask = 0
                for t, node in enumerate(others):
                    if pick >> t & 1:
                        k_mask |= 1 << node
                coeffs = {k_mask | bi: 1, k_mask | bj: 1, k_mask | bi | bj: -1}
                if k_mask:
                    coeffs[k_mask] = coeffs.get(k_mask, 0) - 1
                cond = set_label(k_mask, variables)
                label = f"I({variables[i]}:{variables[j]}" + (
                    f"|{cond})" if cond else ")"
                )
                out.append(LinearConstraint.make(coeffs, kind=INEQ, label=label))
    assert len(out) == n + comb(n, 2) * (1 << max(n - 2, 0))
    return ConstraintSystem(variables, tuple(out))


def ci_expansion(ci: CiStatement) -> dict[int, int]:
    """Coefficients of I(a:b|z) as a linear form in joint entropies."""
    coeffs = {ci.a | ci.z: 1}
    coeffs[ci.b | ci.z] = coeffs.get(ci.b | ci.z, 0) + 1
    abz = ci.a | ci.b | ci.z
    coeffs[abz] = coeffs.get(abz, 0) - 1
    if ci.z:
        coeffs[ci.z] = coeffs.get(ci.z, 0) - 1
    return {c: v for c, v in coeffs.items() if v != 0}


def ci_to_constraint(
    ci: CiStatement, n: int, variables: Optional[Sequence[str]] = None
) -> LinearConstraint:
    """The equality I(a:b|z) = 0 as a constraint on joint entropies."""
    full = (1 << n) - 1
    if (ci.a | ci.b | ci.z) & ~full:
        raise ValueError("statement mentions variables outside [n]")
    label = ci.label(variables) if variables is not None else None
    return LinearConstraint.make(ci_expansion(ci), kind=EQ, label=label)


def constrained_cone(dag, mode: str = "pairwise-singleton") -> ConstraintSystem:
    """Polymatroid inequalities plus the CI equalities implied by a DAG."""
    from .dag import ci_constraints

    names = dag.names
    system = elementary_inequalities(dag.n, names)
    eqs = [ci_to_constraint(ci, dag.n, names) for ci in ci_constraints(dag, mode)]
    return system.with_constraints(equalities=eqs)


def add_epsilon_constraint(
    system: ConstraintSystem, ci: CiStatement, epsilon: _RationalLike
) -> ConstraintSystem:
    """Append the quantitative near-independence bound I(a:b|z) <= epsilon."""
    eps = _to_fraction(epsilon)
    if eps < 0:
        raise ValueError("epsilon must be nonnegative")
    coeffs = {c: -v for c, v in ci_expansion(ci).items()}
    label = f"{ci.label(system.variables)}<={eps}"
    bound = LinearConstraint.make(coeffs, const=eps, kind=INEQ, label=label)
    return system.with_constraints(inequalities=[bound])


def _system_rows(system: ConstraintSystem) -> tuple[list[Row], list[Row]]:
    ineqs = [c.to_row() for c in system.inequalities]
    eqs = [c.to_row() for c in system.equalities]
    return ineqs, eqs


def implies(system: ConstraintSystem, candidate: LinearConstraint) -> bool:
    """Whether ``candidate >= 0`` holds everywhere on the feasible set.

    Decided by exact rational linear programming: equalities are substituted
    away by exact Gaussian elimination, then the residual implication is
    settled with an exactly verified Farkas certificate or counterexample
    point (see :mod:`entrocone.lp`).  An implication that only fails at
    infinity (unbounded improving ray) counts as not implied.
    """
    return check_implication(system, candidate).implied


@dataclass(frozen=True)
class ImplicationResult:
    implied: bool
    #: Rational witness point violating the candidate, when not implied.
    witness: Optional[dict] = None

    def __bool__(self) -> bool:  # pragma: no cover - convenience
        return self.implied


def check_implication(
    system: ConstraintSystem, candidate: LinearConstraint
) -> ImplicationResult:
    from . import lp

    ineq_rows, eq_rows = _system_rows(system)
    subs, residual, reduced = eliminate_equalities(
        eq_rows, ineq_rows, pivot_rank=coord_key
    )
    assert not residual  # no 'allowed' filter, so every equality finds a pivot
    cand = reduce_row(candidate.to_row(), subs)
    if candidate.kind == EQ:
        # expr = 0 implied iff both expr >= 0 and -expr >= 0 are.
        res = lp.decide_implication(reduced, cand)
        if not res.implied:
            return ImplicationResult(False, res.witness)
        from .rows import negated

        return lp.decide_implication(reduced, normalize(negated(cand)))
    return lp.decide_implication(reduced, cand)
