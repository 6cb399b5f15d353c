"""Two-stage variational minimization.

Stage one minimizes ``<psi(theta)|H|psi(theta)>`` with a derivative-free
optimizer, either estimating energies from ``shots_opt`` samples or exactly
(``shots_opt = 0``). Stage two freezes the best parameters and samples the
state ``shots_measure`` times; the histogram is decoded into a structure.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from . import decode, lattice
from .hamiltonian import (
    BuildRecord,
    HamiltonianWeights,
    InteractionMatrix,
    MaskSet,
    build_total,
    default_masks,
    default_mj_matrix,
    validate_sequence,
)
from .pauli import PauliSum, diagonal, eval_diagonal
from .qsim import (
    DEFAULT_MAX_QUBITS,
    AnsatzSpec,
    MeasurementHistogram,
    ReadoutNoise,
    check_cap,
    mitigate_readout,
    probabilities,
    sample,
    simulate,
)
from .seeding import stage_rng

RUN_SCHEMA = "tetrafold.run/1"
THETA_BOUND = 2 * math.pi
# Iteration presets: full single-fragment runs vs. per-window runs.
ITER_PRESETS = {"full": 200, "window": 30}


@dataclass(frozen=True)
class VqeConfig:
    max_iter: int = 200
    shots_opt: int = 2000
    shots_measure: int = 20000
    optimizer: str = "cobyla"
    init: str = "random"
    init_scale: float = 0.1
    convergence_tol: float = 1e-4
    trust_radius_init: float = math.pi
    trust_radius_final: float = 1e-6
    n_restarts: int = 3
    restart_mode: str = "warm"
    restart_radius: float = 0.2
    restart_shrink: float = 0.1
    max_qubits: int = DEFAULT_MAX_QUBITS

    def __post_init__(self) -> None:
        if self.max_iter < 1 or self.shots_measure < 1 or self.n_restarts < 1:
            raise ValueError("max_iter, shots_measure and n_restarts must be positive")
        if self.shots_opt < 0:
            raise ValueError("shots_opt must be >= 0 (0 selects exact expectations)")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be > 0")
        if self.optimizer not in ("cobyla", "nelder_mead"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.restart_mode not in ("warm", "independent"):
            raise ValueError(f"unknown restart_mode {self.restart_mode!r}")
        if self.init not in ("random", "zeros"):
            raise ValueError(f"unknown init {self.init!r}")

    @property
    def exact(self) -> bool:
        return self.shots_opt == 0


@dataclass
class EnergyTrace:
    """One entry per energy evaluation, across all restarts."""

    energies: list[float] = field(default_factory=list)
    restarts: list[int] = field(default_factory=list)

    def append(self, restart: int, energy: float) -> int:
        self.energies.append(float(energy))
        self.restarts.append(restart)
        return len(self.energies) - 1

    def __len__(self) -> int:
        return len(self.energies)

    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate(np.asarray(self.energies))

    def to_csv(self) -> str:
        lines = ["iter,energy"] + [f"{i},{e!r}" for i, e in enumerate(self.energies)]
        return "\n".join(lines) + "\n"


@dataclass
class VqeResult:
    best_theta: np.ndarray
    best_energy: float
    best_iteration: int
    trace: EnergyTrace
    restart_best: list[float]


class NonFiniteEnergy(RuntimeError):
    pass


def _initial_theta(spec: AnsatzSpec, config: VqeConfig, rng: np.random.Generator) -> np.ndarray:
    if config.init == "zeros":
        return np.zeros(spec.n_params)
    return rng.uniform(-config.init_scale, config.init_scale, spec.n_params)


def optimize(h: PauliSum, spec: AnsatzSpec, config: VqeConfig = VqeConfig(), seed: int = 0) -> VqeResult:
    """Minimize the energy over ansatz parameters, best of ``n_restarts`` runs.

    Every evaluation is recorded in the trace and the returned parameters are
    the ones with the lowest observed estimate. With ``restart_mode="warm"``
    restart ``r >= 1`` resumes from the best parameters so far with trust
    radius ``restart_radius * restart_shrink**(r - 1)``; ``"independent"``
    draws a fresh initial point each time.
    """
    if h.n_qubits != spec.n_qubits:
        raise ValueError(f"Hamiltonian has {h.n_qubits} qubits, ansatz {spec.n_qubits}")
    check_cap(spec.n_qubits, config.max_qubits)
    diag = diagonal(h)
    trace = EnergyTrace()
    best_e, best_theta, best_it = math.inf, None, -1
    restart_best = []
    bounds = [(-THETA_BOUND, THETA_BOUND)] * spec.n_params

    for r in range(config.n_restarts):
        shot_rng = stage_rng(seed, "shots", r)
        if r == 0 or config.restart_mode == "independent":
            x0 = _initial_theta(spec, config, stage_rng(seed, "init", r))
            radius = config.trust_radius_init
        else:
            x0 = best_theta.copy()
            radius = config.restart_radius * config.restart_shrink ** (r - 1)
        local_best = math.inf

        def energy(theta: np.ndarray) -> float:
            nonlocal best_e, best_theta, best_it, local_best
            psi = simulate(spec, theta, config.max_qubits)
            if config.exact:
                e = float(np.dot(np.abs(psi) ** 2, diag))
            else:
                counts = shot_rng.multinomial(config.shots_opt, probabilities(psi))
                e = float(np.dot(counts, diag)) / config.shots_opt
            if not math.isfinite(e):
                raise NonFiniteEnergy(f"energy evaluated to {e}; the Hamiltonian is malformed")
            it = trace.append(r, e)
            if e < best_e:
                best_e, best_theta, best_it = e, np.array(theta, dtype=float), it
            local_best = min(local_best, e)
            return e

        if config.optimizer == "cobyla":
            options = {"rhobeg": radius, "tol": config.trust_radius_final, "maxiter": config.max_iter}
            minimize(energy, x0, method="COBYLA", bounds=bounds, options=options)
        else:
            simplex = np.vstack([x0, x0 + radius * np.eye(spec.n_params)])
            options = {
                "maxfev": config.max_iter,
                "fatol": config.convergence_tol,
                "xatol": config.trust_radius_final,
                "initial_simplex": np.clip(simplex, -THETA_BOUND, THETA_BOUND),
            }
            minimize(energy, x0, method="Nelder-Mead", bounds=bounds, options=options)
        restart_best.append(local_best)

    return VqeResult(best_theta=best_theta, best_energy=best_e, best_iteration=best_it, trace=trace, restart_best=restart_best)


def measure_stage(
    spec: AnsatzSpec,
    theta: np.ndarray,
    shots: int,
    noise: ReadoutNoise | None = None,
    seed: int | np.random.Generator | None = 0,
    max_qubits: int = DEFAULT_MAX_QUBITS,
) -> MeasurementHistogram:
    """Sample the frozen ansatz state (second stage)."""
    return sample(simulate(spec, theta, max_qubits), shots, noise, seed)


@dataclass
class RunRecord:
    """Everything a single-fragment run produced; JSON-serializable.

    ``timings`` holds wall-clock data and the creation timestamp, the only
    fields that vary between identical runs.
    """

    sequence: str
    seed: int
    build: dict
    ansatz: dict
    vqe: dict
    trace: list[float]
    trace_restarts: list[int]
    best_theta: list[float]
    best_energy: float
    histogram: dict[str, int]
    selection: dict
    backbone: list[list[int]]
    classical_energy: float
    oracle: dict | None = None
    mitigated_top: dict[str, float] | None = None
    noise: dict | None = None
    timings: dict = field(default_factory=dict)
    schema: str = RUN_SCHEMA

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    def to_json(self, include_timings: bool = True) -> str:
        d = self.to_dict()
        if not include_timings:
            d.pop("timings", None)
        return json.dumps(d, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> RunRecord:
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> RunRecord:
        return cls.from_dict(json.loads(text))

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    def backbone_obj(self) -> decode.Backbone:
        return decode.Backbone(self.sequence, tuple(tuple(p) for p in self.backbone))

    @property
    def turns(self) -> lattice.TurnSequence:
        return lattice.TurnSequence(tuple(self.selection["turns"]))


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


def run_pipeline(
    sequence: str,
    weights: HamiltonianWeights | None = None,
    masks: MaskSet | None = None,
    J: InteractionMatrix | None = None,
    reps: int = 1,
    entanglement: str = "linear",
    config: VqeConfig = VqeConfig(),
    seed: int = 0,
    noise: ReadoutNoise | None = None,
    mitigate: bool = False,
    policy: str = "valid_first",
    oracle_max_qubits: int = 20,
) -> RunRecord:
    """Build, optimize, measure and decode one fragment.

    Failures are re-raised as :class:`PipelineError` tagged with the stage;
    :class:`decode.NoValidConformation` passes through unchanged.
    """
    timings: dict = {"started": datetime.now(timezone.utc).isoformat()}
    t0 = time.perf_counter()
    stage = "build"
    try:
        seq = validate_sequence(sequence)
        weights = weights or HamiltonianWeights()
        J = J if J is not None else default_mj_matrix()
        masks = masks if masks is not None else default_masks(len(seq))
        check_cap(2 * (len(seq) - 1), config.max_qubits)
        h, build = build_total(seq, weights, masks, J)
        oracle = None
        if h.n_qubits <= oracle_max_qubits:
            stage = "oracle"
            rep = decode.brute_force(h)
            build.min_diagonal, build.max_diagonal = rep.min_energy, rep.max_energy
            oracle = _oracle_summary(rep)
        timings["build_s"] = time.perf_counter() - t0

        stage = "optimize"
        t1 = time.perf_counter()
        spec = AnsatzSpec(h.n_qubits, reps, entanglement)
        res = optimize(h, spec, config, seed)
        timings["optimize_s"] = time.perf_counter() - t1

        stage = "measure"
        t2 = time.perf_counter()
        hist = measure_stage(spec, res.best_theta, config.shots_measure, noise, stage_rng(seed, "measure"), config.max_qubits)
        mitigated = None
        ranking: MeasurementHistogram | dict = hist
        if mitigate and noise is not None:
            mitigated = mitigate_readout(hist, noise)
            ranking = mitigated
        timings["measure_s"] = time.perf_counter() - t2

        stage = "decode"
        sel = decode.select_conformation(ranking, seq, policy)
    except decode.NoValidConformation:
        raise
    except Exception as exc:
        raise PipelineError(stage, exc) from exc

    timings["total_s"] = time.perf_counter() - t0
    top_mitigated = None
    if mitigated is not None:
        top_mitigated = dict(sorted(mitigated.items(), key=lambda kv: (-kv[1], kv[0]))[:64])
    return RunRecord(
        sequence=seq,
        seed=seed,
        build=build.to_dict(),
        ansatz={"n_qubits": spec.n_qubits, "reps": reps, "entanglement": entanglement,
                "n_params": spec.n_params, "depth": spec.depth(), "cx_count": spec.cx_count()},
        vqe=asdict(config),
        trace=res.trace.energies,
        trace_restarts=res.trace.restarts,
        best_theta=[float(v) for v in res.best_theta],
        best_energy=res.best_energy,
        histogram=hist.counts,
        selection={
            "bitstring": sel.bitstring,
            "turns": list(sel.turns.turns),
            "rank": sel.rank,
            "weight": sel.weight,
            "energy": eval_diagonal(h, sel.bitstring),
            "policy": policy,
        },
        backbone=[list(p) for p in sel.backbone.points],
        classical_energy=decode.classical_energy(sel.backbone, J, weights),
        oracle=oracle,
        mitigated_top=top_mitigated,
        noise=None if noise is None else {"p01": noise.p01, "p10": noise.p10, "mitigated": bool(mitigate)},
        timings=timings,
    )


def _oracle_summary(rep: decode.OracleReport) -> dict:
    return {
        "min_energy": rep.min_energy,
        "max_energy": rep.max_energy,
        "range": rep.range,
        "n_argmin": rep.n_argmin,
        "n_evaluated": rep.n_evaluated,
    }


def with_iterations(config: VqeConfig, preset: str | int) -> VqeConfig:
    n = ITER_PRESETS[preset] if isinstance(preset, str) else int(preset)
    return replace(config, max_iter=n)
