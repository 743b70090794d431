"""Exact probability-side computations on dense joint tables.

Entropies are in bits.  Tables are dense numpy arrays with one axis per
variable in declaration order; the flattened layout is row-major, so the last
variable varies fastest.  Problem sizes in this package are tiny, which makes
dense-plus-exact-summation the simplest correct choice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .cone import SetFunction
from .dag import StructuralModel
from .errors import ResourceLimitError
from .subsets import members_of, subsets_of

#: Cap on dense table size (cells).
MAX_TABLE_CELLS = 1 << 24


@dataclass(frozen=True)
class JointDistribution:
    """A normalized probability table over named discrete variables."""

    variables: tuple[str, ...]
    cards: tuple[int, ...]
    probs: np.ndarray

    def __post_init__(self):
        if len(self.variables) != len(self.cards):
            raise ValueError("variables and cardinalities must align")
        if self.probs.shape != tuple(self.cards):
            raise ValueError(
                f"table shape {self.probs.shape} does not match cards {self.cards}"
            )
        if self.probs.size > MAX_TABLE_CELLS:
            raise ResourceLimitError("probability table exceeds the size cap")
        if (self.probs < -1e-15).any():
            raise ValueError("probabilities must be nonnegative")
        if abs(float(self.probs.sum()) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1 within 1e-12")

    @property
    def n(self) -> int:
        return len(self.variables)

    @staticmethod
    def from_flat(variables: Sequence[str], cards: Sequence[int], flat) -> "JointDistribution":
        cards = tuple(int(c) for c in cards)
        table = np.asarray(flat, dtype=float).reshape(cards)
        return JointDistribution(tuple(variables), cards, table)


def _entropy_bits(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def marginal_table(dist: JointDistribution, keep_mask: int) -> np.ndarray:
    drop = tuple(i for i in range(dist.n) if not keep_mask >> i & 1)
    return dist.probs.sum(axis=drop) if drop else dist.probs


def marginalize(dist: JointDistribution, keep: int) -> JointDistribution:
    """Sum out every variable not in the ``keep`` mask."""
    if keep == 0:
        raise ValueError("keep must be a nonempty subset")
    idx = members_of(keep)
    return JointDistribution(
        tuple(dist.variables[i] for i in idx),
        tuple(dist.cards[i] for i in idx),
        marginal_table(dist, keep),
    )


def subset_entropy(dist: JointDistribution, mask: int) -> float:
    """Shannon entropy in bits of the marginal on the masked variables."""
    if mask == 0:
        return 0.0
    return _entropy_bits(marginal_table(dist, mask).ravel())


def entropy_vector(dist: JointDistribution) -> SetFunction:
    """All 2**n - 1 joint entropies of the distribution, as a set function."""
    full = (1 << dist.n) - 1
    values = {mask: subset_entropy(dist, mask) for mask in subsets_of(full)}
    return SetFunction(dist.n, values)


def mutual_information(dist: JointDistribution, a: int, b: int, z: int = 0) -> float:
    """I(a:b|z) in bits via the entropy identity H(az)+H(bz)-H(abz)-H(z)."""
    if a & b or a & z or b & z:
        raise ValueError("a, b, z must be pairwise disjoint")
    if a == 0 or b == 0:
        raise ValueError("a and b must be nonempty")
    return (
        subset_entropy(dist, a | z)
        + subset_entropy(dist, b | z)
        - subset_entropy(dist, a | b | z)
        - subset_entropy(dist, z)
    )


def model_distribution(model: StructuralModel) -> JointDistribution:
    """Exact joint table of a structural model (product of its mechanisms)."""
    cells = 1
    for c in model.cards:
        cells *= c
    if cells > MAX_TABLE_CELLS:
        raise ResourceLimitError(
            f"joint table would have {cells} cells (cap {MAX_TABLE_CELLS})"
        )
    n = model.dag.n
    table = np.ones(model.cards)
    for i in range(n):
        axes = members_of(model.dag.parents[i]) + (i,)
        table = table * _aligned(model.mechanisms[i].table, axes, n)
    return JointDistribution(model.dag.names, model.cards, table)


def _aligned(factor: np.ndarray, axes: tuple[int, ...], n: int) -> np.ndarray:
    """Embed a factor over ``axes`` into an n-axis broadcastable array."""
    order = np.argsort(axes)
    arranged = np.transpose(factor, order)
    shape = [1] * n
    for pos, axis in enumerate(sorted(axes)):
        shape[axis] = arranged.shape[pos]
    return arranged.reshape(shape)
