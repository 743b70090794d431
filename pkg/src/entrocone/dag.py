"""Directed acyclic graphs with hidden nodes and their independence structure.

Nodes are indexed 0..n-1 in declaration order; subsets of nodes use the mask
convention of :mod:`entrocone.subsets`.  d-separation is decided on the
moralized ancestral graph (Lauritzen's construction), which is equivalent to
the path-blocking definition and much easier to get right.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .cone import CiStatement
from .subsets import members_of

SubsetLike = Union[int, Iterable[Union[int, str]]]


@dataclass(frozen=True)
class Dag:
    """Labeled DAG; ``parents[i]`` is the parent mask of node i."""

    names: tuple[str, ...]
    observable: tuple[bool, ...]
    parents: tuple[int, ...]

    def __post_init__(self):
        n = len(self.names)
        if len(set(self.names)) != n:
            raise ValueError("node names must be unique")
        if len(self.observable) != n or len(self.parents) != n:
            raise ValueError("names, observable flags and parents must align")
        full = (1 << n) - 1
        for i, pa in enumerate(self.parents):
            if pa & ~full or pa >> i & 1:
                raise ValueError(f"invalid parent set for node {self.names[i]}")
        if self.topological_order() is None:
            raise ValueError("graph contains a directed cycle")

    @staticmethod
    def from_edges(
        nodes: Sequence[tuple[str, bool]], edges: Iterable[tuple[str, str]]
    ) -> "Dag":
        names = tuple(name for name, _ in nodes)
        observable = tuple(bool(flag) for _, flag in nodes)
        index = {name: i for i, name in enumerate(names)}
        parents = [0] * len(names)
        for parent, child in edges:
            if parent not in index or child not in index:
                raise ValueError(f"edge ({parent}, {child}) uses unknown node")
            parents[index[child]] |= 1 << index[parent]
        return Dag(names, observable, tuple(parents))

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def observable_mask(self) -> int:
        return sum(1 << i for i, obs in enumerate(self.observable) if obs)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(f"unknown node {name!r}") from None

    def subset_mask(self, subset: SubsetLike) -> int:
        """Coerce an int mask / iterable of names or indices to a mask."""
        if isinstance(subset, int):
            if subset & ~((1 << self.n) - 1):
                raise ValueError(f"mask {subset} out of range")
            return subset
        mask = 0
        for item in subset:
            mask |= 1 << (self.index(item) if isinstance(item, str) else item)
        return mask

    def children(self, i: int) -> int:
        return sum(1 << j for j in range(self.n) if self.parents[j] >> i & 1)

    def edges(self) -> list[tuple[str, str]]:
        return [
            (self.names[p], self.names[c])
            for c in range(self.n)
            for p in members_of(self.parents[c])
        ]

    def topological_order(self) -> Optional[tuple[int, ...]]:
        placed = 0
        order: list[int] = []
        while len(order) < self.n:
            batch = [
                i
                for i in range(self.n)
                if not placed >> i & 1 and self.parents[i] & ~placed == 0
            ]
            if not batch:
                return None
            for i in batch:
                order.append(i)
                placed |= 1 << i
        return tuple(order)

    def ancestors(self, mask: int) -> int:
        """Ancestors of the masked nodes, the nodes themselves included."""
        out = mask
        frontier = mask
        while frontier:
            step = 0
            for i in members_of(frontier):
                step |= self.parents[i]
            frontier = step & ~out
            out |= step
        return out

    def descendants(self, i: int) -> int:
        out = 1 << i
        frontier = out
        while frontier:
            step = 0
            for j in members_of(frontier):
                step |= self.children(j)
            frontier = step & ~out
            out |= step
        return out


def d_separated(dag: Dag, a: SubsetLike, b: SubsetLike, z: SubsetLike) -> bool:
    """Whether every path between a and b is blocked given z."""
    am, bm, zm = dag.subset_mask(a), dag.subset_mask(b), dag.subset_mask(z)
    if am & bm or am & zm or bm & zm:
        raise ValueError("a, b, z must be pairwise disjoint")
    if am == 0 or bm == 0:
        raise ValueError("a and b must be nonempty")

    relevant = dag.ancestors(am | bm | zm)
    adj = [0] * dag.n
    for child in members_of(relevant):
        pa = dag.parents[child] & relevant
        for p in members_of(pa):
            adj[p] |= 1 << child
            adj[child] |= 1 << p
        # Moralization: co-parents of a common child become neighbors.
        for p in members_of(pa):
            adj[p] |= pa & ~(1 << p)

    seen = am
    frontier = am
    blocked = zm
    while frontier:
        step = 0
        for i in members_of(frontier):
            step |= adj[i]
        step &= relevant & ~seen & ~blocked
        if step & bm:
            return False
        seen |= step
        frontier = step
    return True


def ci_constraints(dag: Dag, mode: str = "pairwise-singleton") -> list[CiStatement]:
    """Conditional independencies implied by the DAG, as canonical statements.

    ``pairwise-singleton`` enumerates every separated ({i}, {j}, Z); on the
    entropy cone these generate the full set through submodularity.
    ``saturated`` enumerates all separated disjoint triples of subsets, which
    is exponentially larger and kept as a cross-check.
    """
    out: list[CiStatement] = []
    n = dag.n
    if mode == "pairwise-singleton":
        for i in range(n - 1):
            for j in range(i + 1, n):
                rest = [k for k in range(n) if k not in (i, j)]
                for pick in product((0, 1), repeat=len(rest)):
                    z = sum(1 << k for k, bit in zip(rest, pick) if bit)
                    if d_separated(dag, 1 << i, 1 << j, z):
                        out.append(CiStatement(1 << i, 1 << j, z))
    elif mode == "saturated":
        for assignment in product((0, 1, 2, 3), repeat=n):
            a = sum(1 << i for i, g in enumerate(assignment) if g == 1)
            b = sum(1 << i for i, g in enumerate(assignment) if g == 2)
            z = sum(1 << i for i, g in enumerate(assignment) if g == 3)
            if a and b and a < b and d_separated(dag, a, b, z):
                out.append(CiStatement(a, b, z))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return sorted(out, key=lambda ci: (ci.a, ci.b, ci.z))


def local_markov_statements(dag: Dag) -> list[CiStatement]:
    """Each node vs. its non-descendants given its parents (where nonempty)."""
    out = []
    for i in range(dag.n):
        nd = ((1 << dag.n) - 1) & ~dag.descendants(i) & ~dag.parents[i]
        if nd:
            out.append(CiStatement(1 << i, nd, dag.parents[i]).canonical())
    return out


# ---------------------------------------------------------------------------
# Structural models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Mechanism:
    """Conditional distribution of one node given its parents.

    Stored as a table of shape ``(*parent_cards, card)``; deterministic
    function-plus-noise mechanisms keep their original pieces so they can be
    serialized faithfully, but always expose the equivalent table.
    """

    table: np.ndarray
    noise_probs: Optional[np.ndarray] = None
    mapping: Optional[np.ndarray] = None

    def __post_init__(self):
        sums = self.table.sum(axis=-1)
        if not np.allclose(sums, 1.0, atol=1e-12, rtol=0):
            raise ValueError("conditional table rows must sum to 1 within 1e-12")
        if (self.table < -1e-15).any():
            raise ValueError("conditional table entries must be nonnegative")

    @staticmethod
    def from_table(table, parent_cards: Sequence[int], card: int) -> "Mechanism":
        arr = np.asarray(table, dtype=float).reshape(*parent_cards, card)
        return Mechanism(arr)

    @staticmethod
    def from_function(
        fn,
        parent_cards: Sequence[int],
        card: int,
        noise_probs: Optional[Sequence[float]] = None,
    ) -> "Mechanism":
        """Deterministic map of (parent values, noise value) -> outcome.

        ``fn`` receives the parent values in node order followed by the noise
        value; omit ``noise_probs`` for a noiseless function.
        """
        probs = np.asarray(noise_probs if noise_probs is not None else [1.0], float)
        noise_card = len(probs)
        shape = tuple(parent_cards) + (noise_card,)
        mapping = np.zeros(shape, dtype=np.int64)
        for idx in np.ndindex(*shape):
            value = int(fn(*idx))
            if not 0 <= value < card:
                raise ValueError(f"function output {value} outside cardinality {card}")
            mapping[idx] = value
        table = np.zeros(tuple(parent_cards) + (card,))
        for idx in np.ndindex(*shape):
            table[idx[:-1] + (mapping[idx],)] += probs[idx[-1]]
        return Mechanism(table, probs, mapping)


@dataclass(frozen=True)
class StructuralModel:
    """A DAG with cardinalities and one mechanism per node."""

    dag: Dag
    cards: tuple[int, ...]
    mechanisms: tuple[Mechanism, ...]

    def __post_init__(self):
        if len(self.cards) != self.dag.n or len(self.mechanisms) != self.dag.n:
            raise ValueError("cards and mechanisms must cover every node")
        if any(c < 1 for c in self.cards):
            raise ValueError("cardinalities must be positive")
        for i, mech in enumerate(self.mechanisms):
            expect = tuple(self.cards[p] for p in members_of(self.dag.parents[i]))
            if mech.table.shape != expect + (self.cards[i],):
                raise ValueError(
                    f"mechanism table for {self.dag.names[i]} has shape "
                    f"{mech.table.shape}, expected {expect + (self.cards[i],)}"
                )


def make_model(dag: Dag, cards, mechanisms: dict) -> StructuralModel:
    """Assemble a model from a {node name: Mechanism} mapping."""
    cards = tuple(int(c) for c in cards)
    mechs = []
    for name in dag.names:
        if name not in mechanisms:
            raise ValueError(f"no mechanism given for node {name!r}")
        mechs.append(mechanisms[name])
    return StructuralModel(dag, cards, tuple(mechs))


def derive_seed(seed: int, *path: int) -> np.random.SeedSequence:
    """Deterministic per-task stream: SeedSequence(seed) with a spawn key."""
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))


def rng_for(seed: Union[int, np.random.SeedSequence]) -> np.random.Generator:
    """Philox (counter-based) generator for a seed or derived stream."""
    return np.random.Generator(np.random.Philox(seed))


def sample(model: StructuralModel, count: int, seed: Union[int, np.random.SeedSequence]) -> np.ndarray:
    """Draw ``count`` joint outcomes in topological order; (count, n) ints."""
    if count < 1:
        raise ValueError("count must be positive")
    rng = rng_for(seed)
    order = model.dag.topological_order()
    out = np.zeros((count, model.dag.n), dtype=np.int64)
    for i in order:
        table = model.mechanisms[i].table
        pa = members_of(model.dag.parents[i])
        if pa:
            rows = table[tuple(out[:, p] for p in pa)]
        else:
            rows = np.broadcast_to(table, (count,) + table.shape)
        cdf = np.cumsum(rows, axis=-1)
        u = rng.random(count)
        out[:, i] = np.minimum(
            (u[:, None] > cdf).sum(axis=1), model.cards[i] - 1
        )
    return out
