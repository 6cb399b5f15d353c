"""Tetrahedral (diamond) lattice geometry.

A chain of ``L`` residues is described by ``L - 1`` turns. Each turn is a
direction index in ``{0, 1, 2, 3}``. The diamond lattice has two
sublattices: a step that leaves an even-numbered residue uses the vector
``v_d``, a step that leaves an odd-numbered one uses ``-v_d``. Any two distinct
same-parity vectors meet at arccos(-1/3), about 109.47 degrees.

Coordinates are integer triples where one bond is a vector of +-1 components,
so every bond has squared length 3.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

DIRECTIONS: tuple[tuple[int, int, int], ...] = (
    (1, 1, 1),
    (1, -1, -1),
    (-1, 1, -1),
    (-1, -1, 1),
)
N_DIRECTIONS = 4
BOND_SQ = 3
# Virtual Calpha-Calpha distance in Angstrom for one lattice bond.
BOND_ANGSTROM = 3.8
LATTICE_TO_ANGSTROM = BOND_ANGSTROM / math.sqrt(BOND_SQ)

Point = tuple[int, int, int]


def direction_vector(d: int, parity: int) -> np.ndarray:
    """Bond vector of direction ``d`` leaving a site of the given parity."""
    if d not in range(N_DIRECTIONS):
        raise ValueError(f"direction must be in 0..3, got {d!r}")
    v = np.array(DIRECTIONS[d], dtype=np.int64)
    return v if parity % 2 == 0 else -v


@dataclass(frozen=True)
class TurnSequence:
    """Conformation of an ``L``-residue chain as ``L - 1`` direction indices."""

    turns: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "turns", tuple(int(t) for t in self.turns))
        if len(self.turns) < 1:
            raise ValueError("a turn sequence needs at least one turn (L >= 2)")
        bad = [t for t in self.turns if t not in range(N_DIRECTIONS)]
        if bad:
            raise ValueError(f"invalid direction indices: {bad}")

    @property
    def length(self) -> int:
        return len(self.turns) + 1

    def __len__(self) -> int:
        return len(self.turns)

    def __iter__(self):
        return iter(self.turns)

    def __getitem__(self, k):
        return self.turns[k]


def walk(turns: TurnSequence | Sequence[int]) -> list[Point]:
    """Lattice positions of every residue, starting at the origin.

    Overlaps are allowed here; use :func:`is_self_avoiding` to check.
    """
    pos = np.zeros(3, dtype=np.int64)
    points: list[Point] = [(0, 0, 0)]
    for k, d in enumerate(turns):
        pos = pos + direction_vector(d, k % 2)
        points.append(tuple(int(c) for c in pos))
    return points


def is_self_avoiding(points: Iterable[Point]) -> bool:
    pts = [tuple(p) for p in points]
    return len(set(pts)) == len(pts)


def collisions(points: Sequence[Point]) -> list[tuple[int, int]]:
    """All residue pairs ``(i, j)``, ``i < j``, that occupy the same site."""
    seen: dict[Point, list[int]] = {}
    for i, p in enumerate(points):
        seen.setdefault(tuple(p), []).append(i)
    out = []
    for idx in seen.values():
        out.extend((a, b) for n, a in enumerate(idx) for b in idx[n + 1 :])
    return sorted(out)


def squared_distance(p: Point, q: Point) -> int:
    return sum((a - b) ** 2 for a, b in zip(p, q))


def contacts(points: Sequence[Point], min_separation: int = 3) -> list[tuple[int, int]]:
    """Non-bonded residue pairs one lattice bond apart.

    Returns every ``(i, j)`` with ``j - i >= min_separation`` and squared
    distance equal to one bond. Because the lattice is bipartite, contacts in
    a self-avoiding walk only occur at odd separations of at least 5.
    """
    if min_separation < 2:
        raise ValueError("min_separation must be >= 2")
    n = len(points)
    return [
        (i, j)
        for i in range(n)
        for j in range(i + min_separation, n)
        if squared_distance(points[i], points[j]) == BOND_SQ
    ]


def has_backtrack(turns: Sequence[int]) -> bool:
    """True if two consecutive turns share an index (an immediate reversal)."""
    return any(a == b for a, b in zip(turns, turns[1:]))


def turn_vectors(turns: Sequence[int], start_parity: int = 0) -> np.ndarray:
    """``(len(turns), 3)`` array of bond vectors, first turn at ``start_parity``."""
    return np.array(
        [direction_vector(d, (start_parity + k) % 2) for k, d in enumerate(turns)],
        dtype=np.int64,
    ).reshape(-1, 3)


def to_angstrom(points: Sequence[Point]) -> np.ndarray:
    """Scale lattice coordinates so one bond is 3.8 Angstrom."""
    return np.asarray(points, dtype=float).reshape(-1, 3) * LATTICE_TO_ANGSTROM
