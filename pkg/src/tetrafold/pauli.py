"""Sparse real linear combinations of Z-only Pauli strings.

A Z-string on ``n`` qubits is an integer bit mask: bit ``q`` set means a
Pauli Z acts on qubit ``q``. Since ``Z_S Z_T = Z_{S xor T}``, products of
Z-strings never leave the representation, and every operator built here is
diagonal in the computational basis.

Bit convention: a measured bit ``m = 0`` is the Z eigenvalue ``+1`` and
``m = 1`` is ``-1``. Bitstrings are written with character ``q`` holding
qubit ``q``. Integer basis indices hold qubit ``q`` in bit ``q``.

Coefficients are never pruned by tolerance; only exact zeros are dropped.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from types import MappingProxyType

import numpy as np


class PauliSum:
    """Immutable mapping ``z_mask -> coefficient`` on a fixed number of qubits."""

    __slots__ = ("_terms", "_n")

    def __init__(self, n_qubits: int, terms: Mapping[int, float] | Iterable[tuple[int, float]] = ()):
        if n_qubits < 0:
            raise ValueError("n_qubits must be >= 0")
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[int, float] = {}
        limit = 1 << n_qubits
        for mask, coeff in items:
            mask = int(mask)
            if not 0 <= mask < limit:
                raise ValueError(f"mask {mask:#x} does not fit in {n_qubits} qubits")
            acc[mask] = acc.get(mask, 0.0) + float(coeff)
        self._terms = MappingProxyType({m: c for m, c in sorted(acc.items()) if c != 0.0})
        self._n = n_qubits

    @property
    def n_qubits(self) -> int:
        return self._n

    @property
    def terms(self) -> Mapping[int, float]:
        return self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    def __repr__(self) -> str:
        body = ", ".join(f"{c:g}*Z[{_mask_qubits(m)}]" for m, c in self._terms.items())
        return f"PauliSum(n={self._n}, {{{body}}})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self._n == other._n and dict(self._terms) == dict(other._terms)

    def __hash__(self) -> int:
        return hash((self._n, tuple(self._terms.items())))

    def _check(self, other: PauliSum) -> None:
        if other._n != self._n:
            raise ValueError(f"qubit count mismatch: {self._n} vs {other._n}")

    def __add__(self, other: PauliSum) -> PauliSum:
        if not isinstance(other, PauliSum):
            return NotImplemented
        self._check(other)
        return PauliSum(self._n, list(self._terms.items()) + list(other._terms.items()))

    def __neg__(self) -> PauliSum:
        return self.scale(-1.0)

    def __sub__(self, other: PauliSum) -> PauliSum:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self + (-other)

    def scale(self, c: float) -> PauliSum:
        return PauliSum(self._n, {m: c * v for m, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            self._check(other)
            out: dict[int, float] = {}
            for ma, ca in self._terms.items():
                for mb, cb in other._terms.items():
                    m = ma ^ mb
                    out[m] = out.get(m, 0.0) + ca * cb
            return PauliSum(self._n, out)
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(float(other))
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(float(other))
        return NotImplemented

    def max_locality(self) -> int:
        """Largest number of Z factors in any term (0 for constants or empty)."""
        return max((bin(m).count("1") for m in self._terms), default=0)

    def to_text(self) -> str:
        """One ``<coeff> <mask-hex>`` line per term after an ``n_qubits`` header."""
        lines = [f"# n_qubits {self._n}"]
        lines += [f"{c!r} {m:x}" for m, c in self._terms.items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> PauliSum:
        n = None
        terms = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "n_qubits":
                    n = int(parts[1])
                continue
            coeff, mask = line.split()
            terms.append((int(mask, 16), float(coeff)))
        if n is None:
            raise ValueError("missing '# n_qubits N' header")
        return cls(n, terms)


def _mask_qubits(mask: int) -> str:
    return ",".join(str(q) for q in range(mask.bit_length()) if mask >> q & 1)


def identity(n: int) -> PauliSum:
    return PauliSum(n, {0: 1.0})


def zero(n: int) -> PauliSum:
    return PauliSum(n)


def z(qubits: int | Iterable[int], n: int, coeff: float = 1.0) -> PauliSum:
    """``coeff * prod_q Z_q`` over the given qubit(s)."""
    qs = [qubits] if isinstance(qubits, int) else list(qubits)
    mask = 0
    for q in qs:
        if not 0 <= q < n:
            raise ValueError(f"qubit {q} out of range for {n} qubits")
        mask ^= 1 << q
    return PauliSum(n, {mask: coeff})


def add(a: PauliSum, b: PauliSum) -> PauliSum:
    return a + b


def scale(a: PauliSum, c: float) -> PauliSum:
    return a.scale(c)


def mul(a: PauliSum, b: PauliSum) -> PauliSum:
    return a * b


def direction_digits(d: int) -> tuple[int, int]:
    """Binary digits ``(d_0, d_1)`` of a direction index, ``d = d_0 + 2 d_1``."""
    if d not in range(4):
        raise ValueError(f"direction must be in 0..3, got {d!r}")
    return d & 1, (d >> 1) & 1


def turn_qubits(t: int) -> tuple[int, int]:
    """Qubit indices ``(2t, 2t + 1)`` holding digits ``d_0`` and ``d_1`` of turn ``t``."""
    return 2 * t, 2 * t + 1


def projector(t: int, d: int, n_qubits: int) -> PauliSum:
    """Indicator that turn ``t`` takes direction ``d``.

    Built as ``1/4 (I + s_0 Z_{2t})(I + s_1 Z_{2t+1})`` where ``s_b = +1``
    when digit ``d_b`` is 1 and ``-1`` when it is 0.
    """
    if t < 0:
        raise ValueError(f"turn index must be >= 0, got {t}")
    q0, q1 = turn_qubits(t)
    if q1 >= n_qubits:
        raise ValueError(f"turn {t} needs qubits {q0},{q1} but register has {n_qubits}")
    s0, s1 = (1.0 if b else -1.0 for b in direction_digits(d))
    m0, m1 = 1 << q0, 1 << q1
    return PauliSum(n_qubits, {0: 0.25, m0: 0.25 * s0, m1: 0.25 * s1, m0 | m1: 0.25 * s0 * s1})


def _bits_to_int(bits, n: int) -> int:
    if isinstance(bits, str):
        if len(bits) != n:
            raise ValueError(f"bitstring length {len(bits)} != n_qubits {n}")
        return sum(1 << q for q, ch in enumerate(bits) if ch == "1")
    if isinstance(bits, (int, np.integer)):
        if not 0 <= bits < (1 << n):
            raise ValueError(f"basis index {bits} out of range for {n} qubits")
        return int(bits)
    seq = list(bits)
    if len(seq) != n:
        raise ValueError(f"bitstring length {len(seq)} != n_qubits {n}")
    return sum(1 << q for q, b in enumerate(seq) if int(b))


def bits_to_index(bits, n: int) -> int:
    """Basis index of a bitstring (``str`` or sequence of 0/1, qubit ``q`` at position ``q``)."""
    return _bits_to_int(bits, n)


def index_to_bits(x: int, n: int) -> str:
    return "".join("1" if x >> q & 1 else "0" for q in range(n))


def eval_diagonal(h: PauliSum, bits) -> float:
    """Diagonal entry ``<x|h|x>`` for one basis state.

    ``bits`` may be a ``'0'/'1'`` string, a sequence of 0/1, or a basis index.
    """
    x = _bits_to_int(bits, h.n_qubits)
    total = 0.0
    for mask, coeff in h.terms.items():
        total += -coeff if bin(x & mask).count("1") & 1 else coeff
    return total


def diagonal(h: PauliSum, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Diagonal entries for basis indices ``start <= x < stop`` (vectorized)."""
    n = h.n_qubits
    stop = (1 << n) if stop is None else stop
    if not 0 <= start <= stop <= (1 << n):
        raise ValueError(f"index range [{start}, {stop}) invalid for {n} qubits")
    x = np.arange(start, stop, dtype=np.uint64)
    out = np.zeros(stop - start, dtype=float)
    for mask, coeff in h.terms.items():
        if mask == 0:
            out += coeff
            continue
        parity = np.bitwise_count(x & np.uint64(mask)) & 1
        out += coeff * (1.0 - 2.0 * parity)
    return out
