"""Command-line front end: ``tetrafold {build,predict,oracle,decode,assemble,rmsd}``.

Settings come from built-in defaults, then an optional JSON config file
(``--config``), then command-line flags, each layer overriding the previous.
Exit codes: 0 success, 2 configuration error, 3 pipeline error,
4 no self-avoiding conformation among the measured outcomes.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

from . import assemble as asm
from . import decode, evalio
from .data import load_manifest
from .hamiltonian import HamiltonianWeights, SequenceError, build_total, n_qubits_for, validate_sequence
from .qsim import ReadoutNoise
from .vqe import ITER_PRESETS, PipelineError, VqeConfig, run_pipeline

log = logging.getLogger("tetrafold")

OUTPUT_ENV = "TETRAFOLD_OUTPUT_DIR"
DEFAULT_OUTPUT = "tetrafold-out"

EXIT_OK, EXIT_CONFIG, EXIT_PIPELINE, EXIT_NO_VALID = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    sequences: list[str] = field(default_factory=list)
    sequence_file: str | None = None
    name: str | None = None
    output_dir: str | None = None
    seed: int = 0
    mode: str = "sampled"
    weights: dict = field(default_factory=dict)
    vqe: dict = field(default_factory=dict)
    reps: int = 1
    entanglement: str = "linear"
    policy: str = "valid_first"
    noise: dict | None = None
    mitigate: bool = False
    window: int = 7
    stride: int = 1
    weighting: str = "uniform"
    workers: int = 1
    valid_only: bool = False
    oracle_max_qubits: int = decode.DEFAULT_ORACLE_MAX_QUBITS
    assemble: bool = False

    @classmethod
    def from_mapping(cls, data: dict, where: str = "config") -> RunConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        data = dict(data)
        if "sequence" in data:
            seq = data.pop("sequence")
            data["sequences"] = [seq] if isinstance(seq, str) else list(seq)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"{where}: unknown keys {unknown}")
        return cls(**data)

    def validate(self) -> None:
        if self.mode not in ("exact", "sampled"):
            raise ConfigError(f"mode must be 'exact' or 'sampled', got {self.mode!r}")
        if self.window < 3:
            raise ConfigError(f"window must be >= 3 residues, got {self.window}")
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        unknown = set(self.weights) - {f.name for f in dataclasses.fields(HamiltonianWeights)}
        if unknown:
            raise ConfigError(f"unknown weight names {sorted(unknown)}")
        unknown = set(self.vqe) - {f.name for f in dataclasses.fields(VqeConfig)}
        if unknown:
            raise ConfigError(f"unknown vqe settings {sorted(unknown)}")
        if self.noise is not None and set(self.noise) - {"p01", "p10"}:
            raise ConfigError(f"noise accepts only p01 and p10, got {sorted(self.noise)}")
        try:
            self.hamiltonian_weights()
            self.vqe_config()
            self.readout_noise()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def hamiltonian_weights(self) -> HamiltonianWeights:
        return HamiltonianWeights(**self.weights)

    def vqe_config(self, default_iter: int = ITER_PRESETS["full"]) -> VqeConfig:
        settings = {"max_iter": default_iter, **self.vqe}
        if self.mode == "exact":
            settings["shots_opt"] = 0
        elif settings.get("shots_opt", 1) == 0:
            raise ConfigError("sampled mode needs shots_opt > 0 (use --mode exact for exact expectations)")
        return VqeConfig(**settings)

    def readout_noise(self) -> ReadoutNoise | None:
        if not self.noise:
            return None
        return ReadoutNoise(self.noise.get("p01", 0.0), self.noise.get("p10", 0.0))

    def out_dir(self) -> Path:
        out = Path(self.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)
        out.mkdir(parents=True, exist_ok=True)
        return out

    def resolved_sequences(self) -> list[str]:
        seqs = list(self.sequences)
        if self.sequence_file:
            seqs += read_sequence_file(self.sequence_file)
        if not seqs:
            raise ConfigError("no sequence given (use --seq or --seq-file)")
        return [validate_sequence(s) for s in seqs]


def read_sequence_file(path: str) -> list[str]:
    """Plain or FASTA text: one sequence per record, header lines start with '>'."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read sequence file: {exc}") from None
    records, cur = [], []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith(">"):
            if cur:
                records.append("".join(cur))
            cur = []
        elif text.lstrip().startswith(">"):
            cur.append(line)
        else:
            records.append(line)
    if cur:
        records.append("".join(cur))
    return records


# flag destination -> (section, key); section None means a top-level RunConfig field
_FLAG_MAP = {
    "seq": (None, "sequences"),
    "seq_file": (None, "sequence_file"),
    "name": (None, "name"),
    "out": (None, "output_dir"),
    "seed": (None, "seed"),
    "mode": (None, "mode"),
    "reps": (None, "reps"),
    "entanglement": (None, "entanglement"),
    "policy": (None, "policy"),
    "mitigate": (None, "mitigate"),
    "window": (None, "window"),
    "stride": (None, "stride"),
    "weighting": (None, "weighting"),
    "workers": (None, "workers"),
    "valid_only": (None, "valid_only"),
    "oracle_max_qubits": (None, "oracle_max_qubits"),
    "assemble": (None, "assemble"),
    "max_iter": ("vqe", "max_iter"),
    "shots_opt": ("vqe", "shots_opt"),
    "shots_measure": ("vqe", "shots_measure"),
    "restarts": ("vqe", "n_restarts"),
    "optimizer": ("vqe", "optimizer"),
    "max_qubits": ("vqe", "max_qubits"),
    "mu_oh": ("weights", "mu_oh"),
    "mu_ang": ("weights", "mu_ang"),
    "kappa_bt": ("weights", "kappa_bt"),
    "kappa_chi": ("weights", "kappa_chi"),
    "eta": ("weights", "eta"),
    "p01": ("noise", "p01"),
    "p10": ("noise", "p10"),
}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{args.config}: top level must be a JSON object")
    try:
        cfg = RunConfig.from_mapping(data, getattr(args, "config", None) or "config")
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    for dest, (section, key) in _FLAG_MAP.items():
        value = getattr(args, dest, None)
        if value is None or value is False:
            continue
        if section is None:
            setattr(cfg, key, value)
        else:
            target = getattr(cfg, section) or {}
            target = dict(target)
            target[key] = value
            setattr(cfg, section, target)
    cfg.validate()
    return cfg


def _stem(cfg: RunConfig, seq: str) -> str:
    return cfg.name or seq


def _table_note(seq: str, n_qubits: int) -> str | None:
    for frag in load_manifest():
        if frag.sequence == seq and frag.table_qubits is not None and frag.table_qubits != n_qubits:
            return (f"note: {frag.pdb_id} is listed with {frag.table_qubits} qubits in the reference table; "
                    f"this encoding uses 2(L-1) = {n_qubits}")
    return None


def cmd_build(cfg: RunConfig) -> int:
    out = cfg.out_dir()
    for seq in cfg.resolved_sequences():
        h, record = build_total(seq, cfg.hamiltonian_weights())
        stem = _stem(cfg, seq)
        (out / f"{stem}.ham").write_text(h.to_text())
        (out / f"{stem}_build.json").write_text(json.dumps(record.to_dict(), indent=2) + "\n")
        print(f"{seq}: n_qubits={h.n_qubits} terms={record.term_count} max_locality={record.max_locality}")
        note = _table_note(seq, h.n_qubits)
        if note:
            print(note)
    return EXIT_OK


def _check_fits(seq: str, cfg: RunConfig, vqe: VqeConfig) -> None:
    n = n_qubits_for(len(seq))
    if n > vqe.max_qubits:
        raise ConfigError(
            f"{seq} needs {n} qubits, above the simulator cap of {vqe.max_qubits}; "
            f"use `tetrafold assemble` (or `predict --assemble`) for sliding-window prediction"
        )


def _write_run(out: Path, stem: str, rec) -> None:
    rec.write(out / f"{stem}.json")
    evalio.write_pdb(rec.backbone_obj(), out / f"{stem}.pdb")
    evalio.write_report(rec.to_dict(), out / f"{stem}_report.json")
    (out / f"{stem}_trace.csv").write_text(
        "iter,energy\n" + "".join(f"{i},{e!r}\n" for i, e in enumerate(rec.trace))
    )


def cmd_predict(cfg: RunConfig) -> int:
    if cfg.assemble:
        return cmd_assemble(cfg)
    out = cfg.out_dir()
    vqe = cfg.vqe_config()
    for seq in cfg.resolved_sequences():
        _check_fits(seq, cfg, vqe)
        rec = run_pipeline(
            seq, weights=cfg.hamiltonian_weights(), reps=cfg.reps, entanglement=cfg.entanglement,
            config=vqe, seed=cfg.seed, noise=cfg.readout_noise(), mitigate=cfg.mitigate, policy=cfg.policy,
        )
        stem = _stem(cfg, seq)
        _write_run(out, stem, rec)
        sel = rec.selection
        print(f"{seq}: best_energy={rec.best_energy:.6g} selected={sel['bitstring']} "
              f"energy={sel['energy']:.6g} turns={sel['turns']} -> {out / (stem + '.pdb')}")
        if rec.oracle:
            print(f"  oracle min={rec.oracle['min_energy']:.6g} max={rec.oracle['max_energy']:.6g}")
    return EXIT_OK


def cmd_oracle(cfg: RunConfig) -> int:
    out = cfg.out_dir()
    print("sequence,L,n_qubits,min_e,max_e,range,n_argmin")
    for seq in cfg.resolved_sequences():
        n = n_qubits_for(len(seq))
        if n > cfg.oracle_max_qubits:
            raise ConfigError(f"{seq}: oracle refuses {n} qubits (cap {cfg.oracle_max_qubits})")
        h, _ = build_total(seq, cfg.hamiltonian_weights())
        rep = decode.brute_force(h, valid_only=cfg.valid_only, max_qubits=cfg.oracle_max_qubits, workers=cfg.workers)
        (out / f"{_stem(cfg, seq)}_oracle.json").write_text(json.dumps(rep.to_dict(), indent=2) + "\n")
        print(f"{seq},{len(seq)},{n},{rep.min_energy!r},{rep.max_energy!r},{rep.range!r},{rep.n_argmin}")
    return EXIT_OK


def cmd_decode(cfg: RunConfig, bits: str) -> int:
    seqs = cfg.resolved_sequences()
    if len(seqs) != 1:
        raise ConfigError("decode takes exactly one sequence")
    seq = seqs[0]
    try:
        turns = decode.decode_bits(bits, len(seq))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    bb = decode.Backbone.from_turns(seq, turns)
    path = cfg.out_dir() / f"{_stem(cfg, seq)}_decoded.pdb"
    evalio.write_pdb(bb, path)
    print(f"turns={list(turns.turns)} self_avoiding={bb.is_self_avoiding} -> {path}")
    return EXIT_OK if bb.is_self_avoiding else EXIT_NO_VALID


def cmd_assemble(cfg: RunConfig) -> int:
    out = cfg.out_dir()
    vqe = cfg.vqe_config(default_iter=ITER_PRESETS["window"])
    acfg = asm.AssemblyConfig(
        window=cfg.window, stride=cfg.stride, weighting=cfg.weighting, vqe=vqe, reps=cfg.reps,
        entanglement=cfg.entanglement, weights=cfg.hamiltonian_weights(), noise=cfg.readout_noise(),
        mitigate=cfg.mitigate, workers=cfg.workers,
    )
    for seq in cfg.resolved_sequences():
        try:
            asm.plan_windows(len(seq), cfg.window, cfg.stride)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        _check_fits(seq[: cfg.window], cfg, vqe)
        result = asm.assemble_long(seq, acfg, seed=cfg.seed)
        stem = _stem(cfg, seq)
        manifest = result.write(out, stem)
        evalio.write_pdb(result.backbone, out / f"{stem}.pdb")
        evalio.write_report(manifest, out / f"{stem}_report.json", kind="assembly")
        print(f"{seq}: {len(result.plan.windows)} windows, repairs={len(result.repairs)}, "
              f"self_avoiding={result.backbone.is_self_avoiding} -> {out / (stem + '.pdb')}")
    return EXIT_OK


def cmd_rmsd(pred: str, ref: str) -> int:
    try:
        a, b = evalio.read_pdb(pred), evalio.read_pdb(ref)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if len(a.coords) != len(b.coords):
        raise ConfigError(f"structures differ in length: {len(a.coords)} vs {len(b.coords)} CA atoms")
    rep = evalio.kabsch_rmsd(a.coords, b.coords, allow_degenerate=True)
    print(json.dumps({"rmsd_angstrom": rep.rmsd_angstrom, "n_atoms": rep.n_atoms}))
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seq", action="append", help="amino-acid sequence (repeatable)")
    p.add_argument("--seq-file", help="file with one sequence per line, or FASTA")
    p.add_argument("--name", help="output file stem (default: the sequence)")
    p.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    w = p.add_argument_group("Hamiltonian weights")
    for flag in ("mu-oh", "mu-ang", "kappa-bt", "kappa-chi", "eta"):
        w.add_argument(f"--{flag}", type=float)


def _add_run(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("exact", "sampled"))
    p.add_argument("--max-iter", type=int)
    p.add_argument("--shots-opt", type=int)
    p.add_argument("--shots-measure", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--optimizer", choices=("cobyla", "nelder_mead"))
    p.add_argument("--max-qubits", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--entanglement", choices=("linear", "circular"))
    p.add_argument("--policy", choices=("valid_first", "mode"))
    p.add_argument("--p01", type=float, help="readout error probability 0 -> 1")
    p.add_argument("--p10", type=float, help="readout error probability 1 -> 0")
    p.add_argument("--mitigate", action="store_true", help="apply readout mitigation before selection")


def _add_window(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--weighting", choices=("uniform", "triangular"))
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tetrafold", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build and save the Hamiltonian")
    _add_common(p)

    p = sub.add_parser("predict", help="optimize, measure and decode one fragment")
    _add_common(p)
    _add_run(p)
    _add_window(p)
    p.add_argument("--assemble", action="store_true", help="use sliding-window assembly")

    p = sub.add_parser("oracle", help="exact min/max energy by enumeration")
    _add_common(p)
    p.add_argument("--valid-only", action="store_true", help="only self-avoiding conformations")
    p.add_argument("--oracle-max-qubits", type=int)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("decode", help="turn a measured bitstring into a structure")
    _add_common(p)
    p.add_argument("bits")

    p = sub.add_parser("assemble", help="sliding-window prediction for long sequences")
    _add_common(p)
    _add_run(p)
    _add_window(p)

    p = sub.add_parser("rmsd", help="CA RMSD between two PDB files after superposition")
    p.add_argument("pred")
    p.add_argument("ref")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "rmsd":
            return cmd_rmsd(args.pred, args.ref)
        cfg = resolve_config(args)
        if args.command == "build":
            return cmd_build(cfg)
        if args.command == "predict":
            return cmd_predict(cfg)
        if args.command == "oracle":
            return cmd_oracle(cfg)
        if args.command == "decode":
            return cmd_decode(cfg, args.bits)
        return cmd_assemble(cfg)
    except (ConfigError, SequenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except decode.NoValidConformation as exc:
        print(f"error: {exc}", file=sys.stderr)
        for bits, w in exc.invalid:
            print(f"  {bits} weight={w}", file=sys.stderr)
        return EXIT_NO_VALID
    except (PipelineError, asm.AssemblyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
