"""Bitmask encoding of variable subsets.

Throughout the package a subset S of the ground set {0, ..., n-1} is encoded
as an integer mask with bit i set iff variable i is in S, e.g. for variables
(X, Y, Z) the mask 0b101 = 5 stands for {X, Z}.  Joint-entropy coordinates are
indexed by these masks; the empty set (mask 0) is never a coordinate because
H(empty) = 0 identically.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Sequence


def subsets_of(mask: int) -> Iterator[int]:
    """Iterate all nonempty submasks of ``mask`` in increasing order."""
    sub = mask
    out = []
    while sub:
        out.append(sub)
        sub = (sub - 1) & mask
    return iter(sorted(out))


def mask_of(members: Iterable[int]) -> int:
    m = 0
    for i in members:
        m |= 1 << i
    return m


def members_of(mask: int) -> tuple[int, ...]:
    return tuple(i for i in range(mask.bit_length()) if mask >> i & 1)


def mask_from_names(names: Iterable[str], variables: Sequence[str]) -> int:
    """Mask for the named subset, resolved against a variable order."""
    index = {v: i for i, v in enumerate(variables)}
    m = 0
    for name in names:
        try:
            m |= 1 << index[name]
        except KeyError:
            raise ValueError(f"unknown variable {name!r}") from None
    return m


def names_from_mask(mask: int, variables: Sequence[str]) -> tuple[str, ...]:
    return tuple(variables[i] for i in members_of(mask))


def set_label(mask: int, variables: Sequence[str]) -> str:
    """Render a subset as a comma-free concatenation, e.g. ``XYZ``."""
    return "".join(names_from_mask(mask, variables))
