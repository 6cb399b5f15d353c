"""Diagonal lattice-folding Hamiltonian.

The total operator is

    H = lambda_c * H_chirality + lambda_g * H_geometric
        + lambda_d * H_steric + lambda_i * H_interaction

over ``2 (L - 1)`` qubits, two per turn. Every piece is a sum of products of
turn indicator projectors, so the result is a Z-only :class:`PauliSum`.

Energies are dimensionless model units ("a.u."). The coefficients behind the
published hardware energies were never released, so absolute values here are
not comparable to them.
"""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import lattice
from .pauli import PauliSum, diagonal, identity, projector, zero

ALPHABET = "ACDEFGHIKLMNPQRSTVWY"

THREE_LETTER = {
    "A": "ALA", "C": "CYS", "D": "ASP", "E": "GLU", "F": "PHE",
    "G": "GLY", "H": "HIS", "I": "ILE", "K": "LYS", "L": "LEU",
    "M": "MET", "N": "ASN", "P": "PRO", "Q": "GLN", "R": "ARG",
    "S": "SER", "T": "THR", "V": "VAL", "W": "TRP", "Y": "TYR",
}


class SequenceError(ValueError):
    """Invalid residue letter; ``position`` is 0-based."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


def validate_sequence(seq: str) -> str:
    """Upper-case and check a one-letter sequence, raising on the first bad letter."""
    seq = seq.strip().upper()
    if len(seq) < 2:
        raise SequenceError(f"sequence must have at least 2 residues, got {len(seq)}")
    for i, ch in enumerate(seq):
        if ch not in ALPHABET:
            raise SequenceError(f"unknown residue {ch!r} at position {i + 1}", position=i)
    return seq


def n_qubits_for(length: int) -> int:
    return 2 * (length - 1)


@dataclass(frozen=True)
class HamiltonianWeights:
    lambda_c: float = 1.0
    lambda_g: float = 1.0
    lambda_d: float = 1.0
    lambda_i: float = 1.0
    mu_oh: float = 1.0
    mu_ang: float = 10.0
    kappa_bt: float = 10.0
    kappa_chi: float = 0.0
    eta: float = 10.0
    # None: ten times the largest penalty weight.
    pin_weight: float | None = None

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if value is None:
                continue
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"weight {name} must be finite and >= 0, got {value}")

    def resolved_pin_weight(self) -> float:
        if self.pin_weight is not None:
            return self.pin_weight
        return 10.0 * max(self.mu_ang, self.kappa_bt, self.kappa_chi, self.eta)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def zeros(cls) -> HamiltonianWeights:
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, pin_weight=0.0)


class InteractionMatrix:
    """Symmetric 20x20 residue contact energies indexed by one-letter codes."""

    def __init__(self, letters: str, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape != (20, 20):
            raise ValueError(f"interaction matrix must be 20x20, got {values.shape}")
        if sorted(letters) != sorted(ALPHABET):
            raise ValueError(f"matrix letters {letters!r} are not the 20 canonical residues")
        if not np.all(np.isfinite(values)):
            raise ValueError("interaction matrix has non-finite entries")
        if not np.array_equal(values, values.T):
            raise ValueError("interaction matrix must be symmetric")
        self.letters = letters
        self.values = values
        self._index = {a: i for i, a in enumerate(letters)}

    def __getitem__(self, pair: tuple[str, str]) -> float:
        a, b = pair
        try:
            return float(self.values[self._index[a], self._index[b]])
        except KeyError as exc:
            raise SequenceError(f"unknown residue {exc.args[0]!r}") from None

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    @classmethod
    def uniform(cls, value: float = -1.0) -> InteractionMatrix:
        return cls(ALPHABET, np.full((20, 20), float(value)))


def load_mj_matrix(path: str | Path) -> InteractionMatrix:
    """Read a 20x20 CSV with residue letters in the header row and first column.

    Asymmetric entries (difference above 1e-9) are averaged with a warning.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    if len(rows) != 21:
        raise ValueError(f"{path}: expected header + 20 rows, got {len(rows)} rows")
    header = [c.strip().upper() for c in rows[0][1:]]
    if len(header) != 20:
        raise ValueError(f"{path}: expected 20 column letters, got {len(header)}")
    for h in header:
        if h not in ALPHABET:
            raise ValueError(f"{path}: unknown residue letter {h!r} in header")
    if len(set(header)) != 20:
        raise ValueError(f"{path}: header letters are not a permutation of the 20 residues")
    values = np.zeros((20, 20))
    row_letters = []
    for i, row in enumerate(rows[1:]):
        if len(row) != 21:
            raise ValueError(f"{path}: row {i + 1} has {len(row)} fields, expected 21")
        letter = row[0].strip().upper()
        if letter not in ALPHABET:
            raise ValueError(f"{path}: unknown residue letter {letter!r} in row {i + 1}")
        row_letters.append(letter)
        try:
            values[i] = [float(c) for c in row[1:]]
        except ValueError as exc:
            raise ValueError(f"{path}: row {i + 1}: {exc}") from None
    if len(set(row_letters)) != 20:
        raise ValueError(f"{path}: row letters are not a permutation of the 20 residues")
    # Reorder rows to follow the header.
    order = [row_letters.index(h) for h in header]
    values = values[order]
    diff = np.abs(values - values.T)
    if np.max(diff) > 1e-9:
        warnings.warn(
            f"{path}: interaction matrix asymmetric (max |J_ab - J_ba| = {np.max(diff):.3g}); averaging",
            stacklevel=2,
        )
    values = 0.5 * (values + values.T)
    return InteractionMatrix("".join(header), values)


def default_mj_matrix() -> InteractionMatrix:
    """The shipped Miyazawa-Jernigan (1996) contact energy table."""
    ref = resources.files("tetrafold.data").joinpath("mj_matrix.csv")
    with resources.as_file(ref) as p:
        return load_mj_matrix(p)


Pair = tuple[int, int]
MaskKey = tuple[int, int, int, int]

ALL_PAIRS: frozenset[Pair] = frozenset(itertools.product(range(4), repeat=2))
REVERSAL_PAIRS: frozenset[Pair] = frozenset((d, d) for d in range(4))


@dataclass(frozen=True)
class MaskSet:
    """Direction-pattern masks feeding the penalty and interaction terms.

    ``collision`` and ``contact`` map ``(t, u, d, e)`` with ``t < u`` to a
    weight (normally 1). Missing keys are zero. ``pins`` maps a turn index to
    the direction it is held at.
    """

    allowed_pairs: frozenset[Pair] = ALL_PAIRS
    forbidden_bt: frozenset[Pair] = field(default_factory=frozenset)
    forbidden_chi: frozenset[tuple[int, int, int]] = field(default_factory=frozenset)
    collision: Mapping[MaskKey, float] = field(default_factory=dict)
    contact: Mapping[MaskKey, float] = field(default_factory=dict)
    pins: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clash = set(self.forbidden_bt) & set(self.allowed_pairs)
        if clash:
            raise ValueError(f"pairs both allowed and forbidden: {sorted(clash)}")
        for key in itertools.chain(self.collision, self.contact):
            t, u, d, e = key
            if not t < u:
                raise ValueError(f"mask key {key} must have t < u")



def reversal_collisions(length: int) -> dict[MaskKey, float]:
    """Exact collision mask: adjacent turns with the same index fold back."""
    return {(t, t + 1, d, d): 1.0 for t in range(length - 2) for d in range(4)}


def heuristic_contacts(length: int, weight: float = 1.0, spans: range = range(3, 6)) -> dict[MaskKey, float]:
    """Mark turn pairs that can close a contact between residues ``t`` and ``u + 1``.

    For each ``u - t`` in ``spans``, the pair ``(d, e)`` is marked when some
    non-reversing, self-avoiding choice of the intervening turns puts the two
    residues one bond apart. This is only a pairwise approximation: whether
    the contact forms also depends on the turns in between.
    """
    out: dict[MaskKey, float] = {}
    for t in range(length - 1):
        for span in spans:
            u = t + span
            if u > length - 2:
                continue
            for d, e in ALL_PAIRS:
                if _contact_closable(t, d, e, span):
                    out[(t, u, d, e)] = float(weight)
    return out


def _contact_closable(t: int, d: int, e: int, span: int) -> bool:
    for middle in itertools.product(range(4), repeat=span - 1):
        turns = (d, *middle, e)
        if lattice.has_backtrack(turns):
            continue
        vecs = lattice.turn_vectors(turns, start_parity=t % 2)
        pts = np.vstack([np.zeros(3, dtype=np.int64), np.cumsum(vecs, axis=0)])
        if len({tuple(p) for p in pts}) != len(pts):
            continue
        if int(np.sum((pts[-1] - pts[0]) ** 2)) == lattice.BOND_SQ:
            return True
    return False


def default_masks(length: int, contact_mode: str = "off", contact_weight: float = 1.0, pin: bool = True) -> MaskSet:
    """Masks used by the pipeline unless overridden.

    Adjacent turns may take any two different indices; equal indices are a
    reversal, penalized by the angle, backtracking and collision terms alike.
    Turns 0 and 1 are pinned to directions 1 and 0 to remove the lattice's
    rotation/reflection degeneracy.
    """
    if contact_mode == "off":
        contact: dict[MaskKey, float] = {}
    elif contact_mode == "heuristic":
        contact = heuristic_contacts(length, contact_weight)
    else:
        raise ValueError(f"unknown contact_mode {contact_mode!r}")
    pins = {}
    if pin:
        pins = {t: d for t, d in ((0, 1), (1, 0)) if t < length - 1}
    return MaskSet(
        allowed_pairs=ALL_PAIRS - REVERSAL_PAIRS,
        forbidden_bt=REVERSAL_PAIRS,
        forbidden_chi=frozenset(),
        collision=reversal_collisions(length),
        contact=contact,
        pins=pins,
    )


def _projectors(length: int) -> list[list[PauliSum]]:
    n = n_qubits_for(length)
    return [[projector(t, d, n) for d in range(4)] for t in range(length - 1)]


def build_geometric(length: int, weights: HamiltonianWeights, masks: MaskSet) -> PauliSum:
    n = n_qubits_for(length)
    P = _projectors(length)
    one_hot = zero(n)
    for t in range(length - 1):
        miss = identity(n) - (P[t][0] + P[t][1] + P[t][2] + P[t][3])
        one_hot = one_hot + miss * miss
    angle = zero(n)
    bad = ALL_PAIRS - set(masks.allowed_pairs)
    for t in range(1, length - 1):
        for d, e in sorted(bad):
            angle = angle + P[t - 1][d] * P[t][e]
    return one_hot.scale(weights.mu_oh) + angle.scale(weights.mu_ang)


def one_hot_part(length: int) -> PauliSum:
    """Unweighted one-hot penalty; zero with two qubits per turn."""
    return build_geometric(length, HamiltonianWeights(mu_oh=1.0, mu_ang=0.0), MaskSet(allowed_pairs=ALL_PAIRS))


def build_chirality(length: int, weights: HamiltonianWeights, masks: MaskSet) -> PauliSum:
    n = n_qubits_for(length)
    P = _projectors(length)
    bt = zero(n)
    for t in range(1, length - 1):
        for d, e in sorted(masks.forbidden_bt):
            bt = bt + P[t - 1][d] * P[t][e]
    chi = zero(n)
    for t in range(1, length - 2):
        for d, e, f in sorted(masks.forbidden_chi):
            chi = chi + P[t - 1][d] * P[t][e] * P[t + 1][f]
    pin = zero(n)
    for t, d in sorted(masks.pins.items()):
        if t >= length - 1:
            raise ValueError(f"pinned turn {t} out of range for L={length}")
        pin = pin + (identity(n) - P[t][d])
    return bt.scale(weights.kappa_bt) + chi.scale(weights.kappa_chi) + pin.scale(weights.resolved_pin_weight())


def _pair_mask_sum(length: int, mask: Mapping[MaskKey, float], coeff=lambda t, u: 1.0) -> PauliSum:
    n = n_qubits_for(length)
    P = _projectors(length)
    acc: dict[int, float] = {}
    for (t, u, d, e), w in sorted(mask.items()):
        if u > length - 2:
            raise ValueError(f"mask key {(t, u, d, e)} out of range for L={length}")
        c = w * coeff(t, u)
        if c == 0.0:
            continue
        for m, v in (P[t][d] * P[u][e]).terms.items():
            acc[m] = acc.get(m, 0.0) + c * v
    return PauliSum(n, acc)


def build_steric(length: int, weights: HamiltonianWeights, masks: MaskSet) -> PauliSum:
    return _pair_mask_sum(length, masks.collision).scale(weights.eta)


def build_interaction(sequence: str, weights: HamiltonianWeights, masks: MaskSet, J: InteractionMatrix) -> PauliSum:
    """Contact energies ``J[a_t, a_u]`` gated by the contact mask."""
    seq = validate_sequence(sequence)
    return _pair_mask_sum(len(seq), masks.contact, lambda t, u: J[seq[t], seq[u]])


@dataclass
class BuildRecord:
    sequence: str
    length: int
    n_qubits: int
    weights: dict
    term_count: int
    max_locality: int
    min_diagonal: float | None = None
    max_diagonal: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: v for k, v in d.items() if v is not None}


def build_total(
    sequence: str,
    weights: HamiltonianWeights | None = None,
    masks: MaskSet | None = None,
    J: InteractionMatrix | None = None,
    with_extrema: bool = False,
) -> tuple[PauliSum, BuildRecord]:
    """Weighted sum of the four builders plus a summary record."""
    seq = validate_sequence(sequence)
    L = len(seq)
    weights = weights or HamiltonianWeights()
    masks = masks if masks is not None else default_masks(L)
    J = J if J is not None else default_mj_matrix()
    h = (
        build_chirality(L, weights, masks).scale(weights.lambda_c)
        + build_geometric(L, weights, masks).scale(weights.lambda_g)
        + build_steric(L, weights, masks).scale(weights.lambda_d)
        + build_interaction(seq, weights, masks, J).scale(weights.lambda_i)
    )
    record = BuildRecord(
        sequence=seq,
        length=L,
        n_qubits=h.n_qubits,
        weights=weights.to_dict(),
        term_count=len(h),
        max_locality=h.max_locality(),
    )
    if with_extrema:
        diag = diagonal(h)
        record.min_diagonal = float(diag.min())
        record.max_diagonal = float(diag.max())
    return h, record
