"""Sliding-window prediction for chains too long to simulate in one piece.

Each window of consecutive residues is folded independently. Window
conformations are only defined up to a lattice symmetry, so each one is
first relabelled (a permutation of direction indices, i.e. an element of the
tetrahedral point group) to agree best with the windows already placed.
Per-turn unit vectors are then averaged across windows, snapped back to the
nearest lattice direction and, if the result overlaps itself, repaired.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import lattice
from .decode import Backbone
from .hamiltonian import HamiltonianWeights, InteractionMatrix, validate_sequence
from .qsim import ReadoutNoise
from .vqe import ITER_PRESETS, RunRecord, VqeConfig, run_pipeline

ASSEMBLY_SCHEMA = "tetrafold.assembly/1"
DIRECTION_UNITS = np.array(lattice.DIRECTIONS, dtype=float) / np.sqrt(lattice.BOND_SQ)
PERMUTATIONS = list(itertools.permutations(range(4)))


class AssemblyError(RuntimeError):
    pass


@dataclass(frozen=True)
class WindowPlan:
    """Residue windows ``[start, end)``; window ``k`` covers turns ``start .. end - 2``."""

    length: int
    window: int
    stride: int
    windows: tuple[tuple[int, int], ...]

    @property
    def n_turns(self) -> int:
        return self.length - 1

    def turn_range(self, k: int) -> range:
        start, end = self.windows[k]
        return range(start, end - 1)

    def coverage(self) -> np.ndarray:
        cov = np.zeros(self.n_turns, dtype=int)
        for k in range(len(self.windows)):
            cov[list(self.turn_range(k))] += 1
        return cov


def plan_windows(length: int, window: int = 7, stride: int = 1) -> WindowPlan:
    if window < 3:
        raise ValueError(f"window must be >= 3 residues, got {window}")
    if not 1 <= stride <= window - 1:
        # consecutive windows must share a residue or the turn between them is lost
        raise ValueError(f"stride must be between 1 and window - 1 = {window - 1}, got {stride}")
    if length < window:
        raise ValueError(f"sequence length {length} is shorter than the window ({window})")
    starts = list(range(0, length - window + 1, stride))
    if starts[-1] + window < length:
        starts.append(length - window)
    return WindowPlan(length, window, stride, tuple((s, s + window) for s in starts))


def unit_vector(d: int, parity: int) -> np.ndarray:
    return DIRECTION_UNITS[d] * (1.0 if parity % 2 == 0 else -1.0)


@dataclass
class FusedVectors:
    mean: np.ndarray
    variance: np.ndarray
    count: np.ndarray
    # per turn: direction chosen by the most confident covering window
    fallback: list[int]

    @property
    def ambiguous(self) -> np.ndarray:
        return np.linalg.norm(self.mean, axis=1) < 1e-9

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["turn", "mean_x", "mean_y", "mean_z", "variance", "count"])
        for t in range(self.mean.shape[0]):
            mx, my, mz = (float(v) for v in self.mean[t])
            w.writerow([t, repr(mx), repr(my), repr(mz), repr(float(self.variance[t])), int(self.count[t])])
        return buf.getvalue()


def _window_weights(n_turns: int, weighting: str) -> np.ndarray:
    if weighting == "uniform":
        return np.ones(n_turns)
    if weighting == "triangular":
        j = np.arange(n_turns)
        return np.minimum(j + 1, n_turns - j).astype(float)
    raise ValueError(f"unknown weighting {weighting!r}")


def fuse(
    window_turns: Sequence[Sequence[int]],
    plan: WindowPlan,
    weighting: str = "uniform",
    confidence: Sequence[float] | None = None,
) -> FusedVectors:
    """Weighted per-turn mean of window direction vectors in the global frame.

    ``window_turns[k]`` are the (already aligned) global direction indices
    window ``k`` assigns to its turns. Variance is the weighted mean squared
    distance of the unit vectors from their mean.
    """
    if len(window_turns) != len(plan.windows):
        raise ValueError(f"{len(window_turns)} window predictions for {len(plan.windows)} windows")
    T = plan.n_turns
    confidence = list(confidence) if confidence is not None else [1.0] * len(window_turns)
    wsum = np.zeros(T)
    acc = np.zeros((T, 3))
    acc_sq = np.zeros(T)
    count = np.zeros(T, dtype=int)
    best_conf = np.full(T, -np.inf)
    fallback = [-1] * T
    for k, turns in enumerate(window_turns):
        rng = plan.turn_range(k)
        if len(turns) != len(rng):
            raise ValueError(f"window {k} has {len(turns)} turns, expected {len(rng)}")
        w = _window_weights(len(rng), weighting)
        for j, t in enumerate(rng):
            v = unit_vector(turns[j], t)
            acc[t] += w[j] * v
            acc_sq[t] += w[j] * float(v @ v)
            wsum[t] += w[j]
            count[t] += 1
            if confidence[k] > best_conf[t]:
                best_conf[t] = confidence[k]
                fallback[t] = int(turns[j])
    if np.any(count == 0):
        raise ValueError(f"turns {np.nonzero(count == 0)[0].tolist()} are not covered by any window")
    mean = acc / wsum[:, None]
    variance = np.maximum(acc_sq / wsum - np.sum(mean**2, axis=1), 0.0)
    return FusedVectors(mean=mean, variance=variance, count=count, fallback=fallback)


def _scores(fused: FusedVectors, t: int) -> np.ndarray:
    return np.array([float(unit_vector(d, t) @ fused.mean[t]) for d in range(4)])


def snap_to_lattice(fused: FusedVectors) -> lattice.TurnSequence:
    """Per turn, the direction whose (parity-signed) vector best matches the mean.

    Ties go to the lower index; zero-mean turns take the fallback choice.
    """
    out = []
    amb = fused.ambiguous
    for t in range(fused.mean.shape[0]):
        if amb[t] and fused.fallback[t] >= 0:
            out.append(fused.fallback[t])
            continue
        s = _scores(fused, t)
        out.append(int(np.flatnonzero(s >= s.max() - 1e-12)[0]))
    return lattice.TurnSequence(tuple(out))


def repair(turns: lattice.TurnSequence, fused: FusedVectors, max_passes: int = 3) -> tuple[lattice.TurnSequence, list[dict]]:
    """Re-snap turns until the walk is self-avoiding, at most ``max_passes`` edits.

    Each pass takes the overlapping pair with the smallest sequence separation
    and changes one turn between them to a lower-ranked direction, preferring
    the edit that leaves the fewest overlaps and then the smallest loss in
    agreement with the fused mean.
    """
    cur = list(turns)
    log = []
    for _ in range(max_passes):
        clashes = lattice.collisions(lattice.walk(cur))
        if not clashes:
            return lattice.TurnSequence(tuple(cur)), log
        i, j = min(clashes, key=lambda p: (p[1] - p[0], p[0]))
        best = None
        for k in range(i, j):
            s = _scores(fused, k)
            order = sorted(range(4), key=lambda d: (-s[d], d))
            for rank, d in enumerate(order):
                if d == cur[k]:
                    continue
                trial = cur.copy()
                trial[k] = d
                n_clash = len(lattice.collisions(lattice.walk(trial)))
                key = (n_clash, float(s[cur[k]] - s[d]), rank, k)
                if best is None or key < best[0]:
                    best = (key, k, d)
        _, k, d = best
        log.append({"turn": k, "from": cur[k], "to": d, "clash": [i, j]})
        cur[k] = d
    if lattice.collisions(lattice.walk(cur)):
        raise AssemblyError(f"could not repair self-overlap within {max_passes} passes: {log}")
    return lattice.TurnSequence(tuple(cur)), log


def align(local_turns: Sequence[int], start: int, consensus: np.ndarray, covered: np.ndarray) -> tuple[int, ...]:
    """Permutation of direction labels that best matches the running consensus.

    ``consensus[t]`` is the summed unit vector of windows already placed and
    ``covered[t]`` whether any window has placed turn ``t``. Returns the
    permutation; identity wins ties.
    """
    best_perm, best_score = PERMUTATIONS[0], -np.inf
    for perm in PERMUTATIONS:
        score = 0.0
        for j, d in enumerate(local_turns):
            t = start + j
            if covered[t]:
                score += float(unit_vector(perm[d], t) @ consensus[t])
        if score > best_score + 1e-12:
            best_perm, best_score = perm, score
    return best_perm


@dataclass(frozen=True)
class AssemblyConfig:
    window: int = 7
    stride: int = 1
    weighting: str = "uniform"
    vqe: VqeConfig = field(default_factory=lambda: VqeConfig(max_iter=ITER_PRESETS["window"]))
    reps: int = 1
    entanglement: str = "linear"
    weights: HamiltonianWeights = field(default_factory=HamiltonianWeights)
    noise: ReadoutNoise | None = None
    mitigate: bool = False
    max_repair_passes: int = 3
    workers: int = 1


@dataclass
class AssemblyResult:
    sequence: str
    plan: WindowPlan
    records: list[RunRecord]
    permutations: list[tuple[int, ...]]
    aligned_turns: list[list[int]]
    fused: FusedVectors
    snapped: lattice.TurnSequence
    turns: lattice.TurnSequence
    repairs: list[dict]
    backbone: Backbone

    def manifest(self, record_files: Sequence[str] | None = None) -> dict:
        return {
            "schema": ASSEMBLY_SCHEMA,
            "sequence": self.sequence,
            "length": len(self.sequence),
            "window": self.plan.window,
            "stride": self.plan.stride,
            "windows": [
                {
                    "start": s,
                    "end": e,
                    "subsequence": self.sequence[s:e],
                    "permutation": list(self.permutations[k]),
                    "local_turns": self.records[k].selection["turns"],
                    "aligned_turns": self.aligned_turns[k],
                    **({"record": record_files[k]} if record_files else {}),
                }
                for k, (s, e) in enumerate(self.plan.windows)
            ],
            "snapped_turns": list(self.snapped.turns),
            "turns": list(self.turns.turns),
            "repairs": self.repairs,
            "backbone": [list(p) for p in self.backbone.points],
            "self_avoiding": self.backbone.is_self_avoiding,
        }

    def write(self, outdir: str | Path, stem: str = "assembly") -> dict:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        names = []
        for k, rec in enumerate(self.records):
            name = f"{stem}_window{k:02d}.json"
            rec.write(out / name)
            names.append(name)
        manifest = self.manifest(names)
        (out / f"{stem}_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        (out / f"{stem}_fused.csv").write_text(self.fused.to_csv())
        return manifest


def assemble_long(
    sequence: str,
    config: AssemblyConfig = AssemblyConfig(),
    seed: int = 0,
    J: InteractionMatrix | None = None,
) -> AssemblyResult:
    """Predict a full-length backbone from overlapping window predictions.

    Every window runs :func:`run_pipeline` under the same root seed, so a
    sequence that fits in one window reproduces a single run exactly.
    """
    seq = validate_sequence(sequence)
    plan = plan_windows(len(seq), config.window, config.stride)

    def run(k: int) -> RunRecord:
        s, e = plan.windows[k]
        return run_pipeline(
            seq[s:e],
            weights=config.weights,
            J=J,
            reps=config.reps,
            entanglement=config.entanglement,
            config=config.vqe,
            seed=seed,
            noise=config.noise,
            mitigate=config.mitigate,
        )

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            records = list(pool.map(run, range(len(plan.windows))))
    else:
        records = [run(k) for k in range(len(plan.windows))]

    consensus = np.zeros((plan.n_turns, 3))
    covered = np.zeros(plan.n_turns, dtype=bool)
    perms, aligned = [], []
    for k, rec in enumerate(records):
        start = plan.windows[k][0]
        local = rec.selection["turns"]
        perm = align(local, start, consensus, covered)
        glob = [perm[d] for d in local]
        for j, d in enumerate(glob):
            consensus[start + j] += unit_vector(d, start + j)
            covered[start + j] = True
        perms.append(perm)
        aligned.append(glob)

    confidence = [rec.selection["weight"] for rec in records]
    fused = fuse(aligned, plan, config.weighting, confidence)
    snapped = snap_to_lattice(fused)
    turns, repairs = repair(snapped, fused, config.max_repair_passes)
    backbone = Backbone.from_turns(seq, turns)
    return AssemblyResult(seq, plan, records, perms, aligned, fused, snapped, turns, repairs, backbone)

