"""Statevector simulation of the hardware-efficient Ry/Rz + CX ansatz.

Also covers shot sampling, readout-noise injection and readout mitigation
by inverting a tensor-product confusion model.

Conventions: qubit ``q`` is bit ``q`` of the basis index;
``Ry(a) = exp(-i a Y / 2)``, ``Rz(a) = exp(-i a Z / 2)``; CX control is
always the lower qubit index.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .pauli import PauliSum, diagonal, index_to_bits, bits_to_index

DEFAULT_MAX_QUBITS = 24


class QubitCapError(ValueError):
    pass


def check_cap(n_qubits: int, max_qubits: int = DEFAULT_MAX_QUBITS) -> None:
    if n_qubits > max_qubits:
        raise QubitCapError(
            f"{n_qubits} qubits exceeds the simulator cap of {max_qubits}; "
            "use the sliding-window assembler (tetrafold assemble) for long sequences"
        )


@dataclass(frozen=True)
class AnsatzSpec:
    """Layers of per-qubit Ry then Rz rotations separated by CX entanglers.

    ``reps`` entangling blocks give ``reps + 1`` rotation layers.
    """

    n_qubits: int
    reps: int = 1
    entanglement: str = "linear"

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise ValueError("ansatz needs at least one qubit")
        if self.reps < 0:
            raise ValueError("reps must be >= 0")
        if self.entanglement not in ("linear", "circular"):
            raise ValueError(f"entanglement must be 'linear' or 'circular', got {self.entanglement!r}")

    @property
    def n_params(self) -> int:
        return 2 * self.n_qubits * (self.reps + 1)

    def entangler_pairs(self) -> list[tuple[int, int]]:
        n = self.n_qubits
        pairs = [(q, q + 1) for q in range(n - 1)]
        if self.entanglement == "circular" and n > 2:
            pairs.append((0, n - 1))
        return pairs

    def depth(self) -> int:
        """Unoptimized layer depth: two rotation moments per layer plus a serial CX chain."""
        return 2 * (self.reps + 1) + self.reps * len(self.entangler_pairs())

    def cx_count(self) -> int:
        return self.reps * len(self.entangler_pairs())


def _apply_1q(psi: np.ndarray, u: np.ndarray, q: int, n: int) -> np.ndarray:
    v = psi.reshape(1 << (n - q - 1), 2, 1 << q)
    return np.einsum("ab,ibj->iaj", u, v).reshape(-1)


def _apply_cx(psi: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    t = psi.reshape([2] * n).copy()
    ac, at = n - 1 - control, n - 1 - target
    sl = [slice(None)] * n
    sl[ac] = 1
    sub = t[tuple(sl)]
    axis = at if at < ac else at - 1
    t[tuple(sl)] = np.flip(sub, axis=axis).copy()
    return t.reshape(-1)


def _rotation(ry: float, rz: float) -> np.ndarray:
    c, s = math.cos(ry / 2), math.sin(ry / 2)
    m_ry = np.array([[c, -s], [s, c]], dtype=complex)
    m_rz = np.array([[np.exp(-0.5j * rz), 0], [0, np.exp(0.5j * rz)]])
    return m_rz @ m_ry


def simulate(spec: AnsatzSpec, theta: Sequence[float], max_qubits: int = DEFAULT_MAX_QUBITS) -> np.ndarray:
    """Statevector ``|psi(theta)>`` starting from ``|0...0>``.

    ``theta`` is laid out as ``[layer][ry, rz][qubit]``.
    """
    n = spec.n_qubits
    check_cap(n, max_qubits)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.n_params,):
        raise ValueError(f"expected {spec.n_params} parameters, got shape {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("parameters must be finite")
    angles = theta.reshape(spec.reps + 1, 2, n)
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1.0
    pairs = spec.entangler_pairs()
    for layer in range(spec.reps + 1):
        if layer > 0:
            for c, t in pairs:
                psi = _apply_cx(psi, c, t, n)
        for q in range(n):
            psi = _apply_1q(psi, _rotation(angles[layer, 0, q], angles[layer, 1, q]), q, n)
    return psi


def probabilities(state: np.ndarray) -> np.ndarray:
    p = np.abs(state) ** 2
    return p / p.sum()


def _diag_of(h: PauliSum | np.ndarray, dim: int) -> np.ndarray:
    if isinstance(h, PauliSum):
        if (1 << h.n_qubits) != dim:
            raise ValueError(f"Hamiltonian on {h.n_qubits} qubits vs state of dimension {dim}")
        return diagonal(h)
    d = np.asarray(h, dtype=float)
    if d.shape != (dim,):
        raise ValueError(f"diagonal of shape {d.shape} vs state of dimension {dim}")
    return d


def expectation_exact(state: np.ndarray, h: PauliSum | np.ndarray) -> float:
    """``<psi|h|psi>`` for a diagonal ``h`` (a PauliSum or its precomputed diagonal)."""
    state = np.asarray(state)
    return float(np.dot(np.abs(state) ** 2, _diag_of(h, state.shape[0])))


@dataclass(frozen=True)
class ReadoutNoise:
    """Independent per-qubit readout flips.

    ``p01`` is P(read 1 | prepared 0) and ``p10`` is P(read 0 | prepared 1);
    either may be a scalar shared by all qubits or a per-qubit sequence.
    """

    p01: float | tuple[float, ...] = 0.0
    p10: float | tuple[float, ...] = 0.0

    def __post_init__(self) -> None:
        for name in ("p01", "p10"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)):
                object.__setattr__(self, name, tuple(float(x) for x in v))
            vals = np.atleast_1d(getattr(self, name))
            if np.any(vals < 0) or np.any(vals > 1) or not np.all(np.isfinite(vals)):
                raise ValueError(f"{name} must lie in [0, 1]")

    def arrays(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        out = []
        for v in (self.p01, self.p10):
            a = np.broadcast_to(np.asarray(v, dtype=float), (n,)) if np.ndim(v) == 0 else np.asarray(v, dtype=float)
            if a.shape != (n,):
                raise ValueError(f"readout noise defined for {a.shape[0]} qubits, register has {n}")
            out.append(a)
        return out[0], out[1]

    def is_zero(self) -> bool:
        return not (np.any(np.asarray(self.p01)) or np.any(np.asarray(self.p10)))


@dataclass
class MeasurementHistogram:
    """Counts per bitstring; character ``q`` of a key is qubit ``q``."""

    n_qubits: int
    counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        clean = {}
        for k, v in self.counts.items():
            if len(k) != self.n_qubits or set(k) - {"0", "1"}:
                raise ValueError(f"bad bitstring {k!r} for {self.n_qubits} qubits")
            if int(v) < 0:
                raise ValueError(f"negative count for {k!r}")
            if int(v):
                clean[k] = int(v)
        self.counts = dict(sorted(clean.items()))

    @property
    def shots(self) -> int:
        return sum(self.counts.values())

    def most_common(self) -> list[tuple[str, int]]:
        """Entries by descending count, ties by lexicographic bitstring."""
        return sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))

    def frequencies(self) -> dict[str, float]:
        s = self.shots
        return {k: v / s for k, v in self.counts.items()}

    def merge(self, other: MeasurementHistogram) -> MeasurementHistogram:
        if other.n_qubits != self.n_qubits:
            raise ValueError("cannot merge histograms over different registers")
        out = dict(self.counts)
        for k, v in other.counts.items():
            out[k] = out.get(k, 0) + v
        return MeasurementHistogram(self.n_qubits, out)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bitstring", "count"])
        for k, v in self.counts.items():
            w.writerow([k, v])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> MeasurementHistogram:
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["bitstring", "count"]:
            raise ValueError("histogram CSV must start with 'bitstring,count'")
        body = [r for r in rows[1:] if r]
        if not body:
            raise ValueError("histogram CSV has no entries")
        return cls(len(body[0][0]), {r[0]: int(r[1]) for r in body})

    @classmethod
    def from_indices(cls, n: int, indices: Iterable[int], counts: Iterable[int]) -> MeasurementHistogram:
        return cls(n, {index_to_bits(int(x), n): int(c) for x, c in zip(indices, counts)})


def sample(
    state: np.ndarray,
    shots: int,
    noise: ReadoutNoise | None = None,
    seed: int | np.random.Generator | None = None,
) -> MeasurementHistogram:
    """Draw ``shots`` computational-basis outcomes, then apply readout flips."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    dim = state.shape[0]
    n = dim.bit_length() - 1
    counts = rng.multinomial(shots, probabilities(state))
    idx = np.nonzero(counts)[0]
    if noise is None or noise.is_zero():
        return MeasurementHistogram.from_indices(n, idx, counts[idx])
    outcomes = np.repeat(idx.astype(np.int64), counts[idx])
    p01, p10 = noise.arrays(n)
    for q in range(n):
        bit = (outcomes >> q) & 1
        p = np.where(bit == 0, p01[q], p10[q])
        flip = rng.random(outcomes.shape[0]) < p
        outcomes ^= flip.astype(np.int64) << q
    vals, cnt = np.unique(outcomes, return_counts=True)
    return MeasurementHistogram.from_indices(n, vals, cnt)


def expectation_sampled(histogram: MeasurementHistogram | Mapping[str, float], h: PauliSum) -> float:
    """Shot-weighted mean of diagonal energies; also accepts a quasi-distribution."""
    if isinstance(histogram, MeasurementHistogram):
        weights = histogram.counts
        total = histogram.shots
    else:
        weights = histogram
        total = sum(weights.values())
    if not weights or total == 0:
        raise ValueError("cannot estimate an expectation from an empty histogram")
    idx = np.array([bits_to_index(k, h.n_qubits) for k in weights])
    w = np.array(list(weights.values()), dtype=float)
    return _sampled_from_indices(h, idx, w) / total


def _sampled_from_indices(h: PauliSum, idx: np.ndarray, w: np.ndarray) -> float:
    x = idx.astype(np.uint64)
    acc = 0.0
    for mask, coeff in h.terms.items():
        parity = np.bitwise_count(x & np.uint64(mask)) & 1
        acc += coeff * float(np.dot(w, 1.0 - 2.0 * parity))
    return acc


def mitigate_readout(histogram: MeasurementHistogram, noise: ReadoutNoise) -> dict[str, float]:
    """Apply the inverse tensor-product confusion matrix to the empirical distribution.

    The result is a quasi-distribution: entries may be slightly negative but
    sum to one.
    """
    n = histogram.n_qubits
    if histogram.shots == 0:
        raise ValueError("empty histogram")
    p01, p10 = noise.arrays(n)
    vec = np.zeros(1 << n)
    for k, v in histogram.counts.items():
        vec[bits_to_index(k, n)] = v
    vec /= vec.sum()
    for q in range(n):
        det = 1.0 - p01[q] - p10[q]
        if det <= 0 or abs(det) < 1e-12:
            raise ValueError(f"confusion matrix for qubit {q} is singular or inverted (p01+p10 >= 1)")
        # columns: prepared state; rows: read-out state
        a = np.array([[1 - p01[q], p10[q]], [p01[q], 1 - p10[q]]])
        vec = _apply_1q(vec, np.linalg.inv(a), q, n).real
    return {index_to_bits(x, n): float(vec[x]) for x in np.nonzero(vec)[0]}


def total_variation(p: Mapping[str, float], q: Mapping[str, float]) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
