"""Bitstrings to conformations, classical rescoring and the exhaustive oracle."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import lattice
from .hamiltonian import HamiltonianWeights, InteractionMatrix, validate_sequence
from .lattice import TurnSequence
from .pauli import PauliSum, diagonal, index_to_bits
from .qsim import MeasurementHistogram

DEFAULT_ORACLE_MAX_QUBITS = 26
ARGMIN_CAP = 64


def encode_turns(turns: TurnSequence | Sequence[int]) -> str:
    """Measurement bitstring whose decoding is ``turns``.

    Turn ``t`` lives on qubits ``2t`` (digit ``d_0``) and ``2t + 1`` (digit
    ``d_1``); a digit of 1 is measured as bit 0.
    """
    out = []
    for d in turns:
        if d not in range(4):
            raise ValueError(f"invalid direction {d!r}")
        out.append("0" if d & 1 else "1")
        out.append("0" if d & 2 else "1")
    return "".join(out)


def decode_bits(bits: str | Sequence[int], length: int) -> TurnSequence:
    bits = "".join(str(int(b)) for b in bits) if not isinstance(bits, str) else bits
    if len(bits) != 2 * (length - 1):
        raise ValueError(f"bitstring of length {len(bits)} cannot encode L={length} (needs {2 * (length - 1)})")
    if set(bits) - {"0", "1"}:
        raise ValueError(f"bitstring has characters other than 0/1: {bits!r}")
    turns = []
    for t in range(length - 1):
        d0 = 1 - int(bits[2 * t])
        d1 = 1 - int(bits[2 * t + 1])
        turns.append(d0 + 2 * d1)
    return TurnSequence(tuple(turns))


@dataclass(frozen=True)
class Backbone:
    sequence: str
    points: tuple[lattice.Point, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", tuple(tuple(int(c) for c in p) for p in self.points))
        if len(self.points) != len(self.sequence):
            raise ValueError(f"{len(self.points)} points for a sequence of length {len(self.sequence)}")
        for k, (p, q) in enumerate(zip(self.points, self.points[1:])):
            if lattice.squared_distance(p, q) != lattice.BOND_SQ:
                raise ValueError(f"residues {k} and {k + 1} are not one lattice bond apart")

    @classmethod
    def from_turns(cls, sequence: str, turns: TurnSequence | Sequence[int]) -> Backbone:
        return cls(sequence, tuple(lattice.walk(turns)))

    @property
    def coords_angstrom(self) -> np.ndarray:
        return lattice.to_angstrom(self.points)

    @property
    def is_self_avoiding(self) -> bool:
        return lattice.is_self_avoiding(self.points)

    def turns(self) -> TurnSequence:
        out = []
        for k, (p, q) in enumerate(zip(self.points, self.points[1:])):
            step = np.subtract(q, p)
            sign = 1 if k % 2 == 0 else -1
            out.append(next(d for d, v in enumerate(lattice.DIRECTIONS) if np.array_equal(sign * np.array(v), step)))
        return TurnSequence(tuple(out))


class NoValidConformation(RuntimeError):
    def __init__(self, message: str, invalid: list[tuple[str, float]]):
        super().__init__(message)
        self.invalid = invalid


@dataclass(frozen=True)
class Selection:
    bitstring: str
    turns: TurnSequence
    backbone: Backbone
    rank: int
    weight: float


def select_conformation(
    histogram: MeasurementHistogram | Mapping[str, float],
    sequence: str,
    policy: str = "valid_first",
    top_k_report: int = 10,
) -> Selection:
    """Pick the conformation to report from measured outcomes.

    Outcomes are ranked by descending count (or quasi-probability), ties by
    lexicographically smallest bitstring. ``valid_first`` returns the first
    self-avoiding one; ``mode`` returns the top entry regardless.
    """
    weights = histogram.counts if isinstance(histogram, MeasurementHistogram) else dict(histogram)
    if not weights:
        raise ValueError("empty histogram")
    if policy not in ("valid_first", "mode"):
        raise ValueError(f"unknown selection policy {policy!r}")
    seq = validate_sequence(sequence)
    ranked = sorted(weights.items(), key=lambda kv: (-kv[1], kv[0]))
    invalid = []
    for rank, (bits, w) in enumerate(ranked):
        turns = decode_bits(bits, len(seq))
        bb = Backbone.from_turns(seq, turns)
        if policy == "mode" or bb.is_self_avoiding:
            return Selection(bits, turns, bb, rank, float(w))
        invalid.append((bits, float(w)))
    raise NoValidConformation(
        f"none of the {len(ranked)} measured bitstrings decodes to a self-avoiding walk",
        invalid[:top_k_report],
    )


def classical_energy(
    backbone: Backbone,
    J: InteractionMatrix,
    weights: HamiltonianWeights | None = None,
    min_separation: int = 3,
) -> float:
    """Sum of ``J`` over lattice contacts, plus ``eta`` per overlapping residue pair."""
    seq = backbone.sequence
    e = sum(J[seq[i], seq[j]] for i, j in lattice.contacts(backbone.points, min_separation))
    clashes = lattice.collisions(backbone.points)
    if clashes:
        eta = (weights or HamiltonianWeights()).eta
        e += eta * len(clashes)
    return float(e)


@dataclass
class OracleReport:
    min_energy: float
    max_energy: float
    argmin: list[str]
    n_evaluated: int
    argmin_truncated: bool = False
    n_argmin: int = 0
    valid_only: bool = False

    @property
    def range(self) -> float:
        return self.max_energy - self.min_energy

    def to_dict(self) -> dict:
        d = asdict(self)
        d["range"] = self.range
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> OracleReport:
        d = {k: v for k, v in d.items() if k != "range"}
        return cls(**d)


@dataclass
class _Partial:
    lo: float = np.inf
    hi: float = -np.inf
    arg: list[int] = field(default_factory=list)
    n_arg: int = 0
    n: int = 0

    def merge(self, other: _Partial) -> _Partial:
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        if other.lo < self.lo:
            arg, n_arg = other.arg, other.n_arg
        elif other.lo > self.lo:
            arg, n_arg = self.arg, self.n_arg
        else:
            arg = sorted(self.arg + other.arg)[:ARGMIN_CAP]
            n_arg = self.n_arg + other.n_arg
        return _Partial(min(self.lo, other.lo), max(self.hi, other.hi), arg, n_arg, self.n + other.n)


def self_avoiding_mask(indices: np.ndarray, length: int) -> np.ndarray:
    """Vectorized: which basis indices decode to self-avoiding walks of ``length`` residues."""
    x = indices.astype(np.int64)
    dirs = np.array(lattice.DIRECTIONS, dtype=np.int64)
    pos = np.zeros((x.shape[0], length, 3), dtype=np.int64)
    for t in range(length - 1):
        d0 = 1 - ((x >> (2 * t)) & 1)
        d1 = 1 - ((x >> (2 * t + 1)) & 1)
        step = dirs[d0 + 2 * d1] * (1 if t % 2 == 0 else -1)
        pos[:, t + 1] = pos[:, t] + step
    ok = np.ones(x.shape[0], dtype=bool)
    # same-parity residues only; bipartite lattice
    for i in range(length):
        for j in range(i + 2, length, 2):
            ok &= np.any(pos[:, i] != pos[:, j], axis=1)
    return ok


def _scan(h: PauliSum, start: int, stop: int, valid_only: bool) -> _Partial:
    diag = diagonal(h, start, stop)
    idx = np.arange(start, stop)
    if valid_only:
        keep = self_avoiding_mask(idx, h.n_qubits // 2 + 1)
        diag, idx = diag[keep], idx[keep]
    if diag.size == 0:
        return _Partial()
    lo = float(diag.min())
    hits = idx[diag == lo]
    return _Partial(lo, float(diag.max()), [int(v) for v in hits[:ARGMIN_CAP]], int(hits.size), int(diag.size))


def brute_force(
    h: PauliSum,
    valid_only: bool = False,
    max_qubits: int = DEFAULT_ORACLE_MAX_QUBITS,
    chunk_bits: int = 18,
    workers: int = 1,
) -> OracleReport:
    """Exact min/max of a diagonal Hamiltonian by scanning all ``2^n`` basis states.

    The index range is split into chunks whose partial extrema are merged, so
    chunks may be evaluated on ``workers`` threads.
    ``valid_only`` restricts the scan to bitstrings that decode to
    self-avoiding walks.
    """
    n = h.n_qubits
    if n > max_qubits:
        raise ValueError(f"oracle refuses {n} qubits (cap {max_qubits}); 2^{n} states is too many to enumerate")
    if valid_only and n % 2:
        raise ValueError("valid_only needs an even register (two qubits per turn)")
    dim = 1 << n
    step = 1 << min(chunk_bits, n)
    ranges = [(s, min(s + step, dim)) for s in range(0, dim, step)]
    if workers > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda r: _scan(h, r[0], r[1], valid_only), ranges))
    else:
        parts = [_scan(h, a, b, valid_only) for a, b in ranges]
    total = _Partial()
    for p in parts:
        total = total.merge(p)
    if total.n == 0:
        raise ValueError("no bitstring satisfied the restriction")
    return OracleReport(
        min_energy=total.lo,
        max_energy=total.hi,
        argmin=[index_to_bits(x, n) for x in total.arg],
        n_evaluated=total.n,
        argmin_truncated=total.n_arg > len(total.arg),
        n_argmin=total.n_arg,
        valid_only=valid_only,
    )
