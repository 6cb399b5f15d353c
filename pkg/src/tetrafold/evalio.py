"""RMSD after optimal superposition, and file export (PDB, JSON, CSV)."""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .decode import Backbone
from .hamiltonian import THREE_LETTER

REPORT_SCHEMA = "tetrafold.report/1"
ENERGY_UNITS = "a.u."
UNITS_NOTE = (
    "Energies are in model units (a.u.) of the lattice Hamiltonian with the "
    "shipped weights; they are not comparable to published absolute values."
)
SUMMARY_COLUMNS = ("pdb_id", "sequence", "L", "n_qubits", "min_e", "max_e", "range", "rmsd")
_ONE_LETTER = {v: k for k, v in THREE_LETTER.items()}


class DegenerateStructure(ValueError):
    """Raised when a point set is collinear, so the superposition is not unique."""


@dataclass(frozen=True)
class RmsdReport:
    rmsd_angstrom: float
    rotation: np.ndarray
    translation: np.ndarray
    n_atoms: int

    def to_dict(self) -> dict:
        return {
            "rmsd_angstrom": self.rmsd_angstrom,
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "n_atoms": self.n_atoms,
        }


def _as_coords(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim != 2 or a.shape[1] != 3:
        raise ValueError(f"expected an (N, 3) coordinate array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("coordinates must be finite")
    return a


def _collinear(centered: np.ndarray) -> bool:
    s = np.linalg.svd(centered, compute_uv=False)
    return s[0] == 0 or s[1] <= 1e-9 * s[0]


def kabsch_rmsd(a, b, allow_degenerate: bool = False) -> RmsdReport:
    """Minimal RMSD between ``a`` and ``b`` over proper rigid motions.

    The returned ``rotation`` and ``translation`` map ``a`` onto ``b``:
    ``a @ rotation.T + translation``. Collinear inputs raise
    :class:`DegenerateStructure` unless ``allow_degenerate`` is set, in which
    case the RMSD is still minimal but the rotation is one of many.
    """
    a, b = _as_coords(a), _as_coords(b)
    if a.shape != b.shape:
        raise ValueError(f"point sets differ in size: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < 3:
        raise ValueError(f"need at least 3 points, got {a.shape[0]}")
    if np.array_equal(a, b):
        return RmsdReport(0.0, np.eye(3), np.zeros(3), a.shape[0])
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    pa, pb = a - ca, b - cb
    if not allow_degenerate and (_collinear(pa) or _collinear(pb)):
        raise DegenerateStructure("point set is collinear; superposition is not unique")
    u, _, vt = np.linalg.svd(pb.T @ pa)
    sign = 1.0 if np.linalg.det(u @ vt) >= 0 else -1.0
    r = u @ np.diag([1.0, 1.0, sign]) @ vt
    diff = pa @ r.T - pb
    rmsd = math.sqrt(max(float(np.sum(diff * diff)) / a.shape[0], 0.0))
    return RmsdReport(rmsd, r, cb - r @ ca, a.shape[0])


# PDB v3.3 ATOM record, columns 1-80
_ATOM_FMT = (
    "{rec:<6s}{serial:>5d} {name:<4s}{alt:1s}{res:>3s} {chain:1s}{seq:>4d}{icode:1s}   "
    "{x:8.3f}{y:8.3f}{z:8.3f}{occ:6.2f}{b:6.2f}          {elem:>2s}{charge:2s}"
)


def format_atom(serial: int, resname: str, resseq: int, xyz, chain: str = "A") -> str:
    x, y, z = (float(v) for v in xyz)
    for v in (x, y, z):
        if not -999.9995 < v < 9999.9995:
            raise ValueError(f"coordinate {v} does not fit the PDB column width")
    return _ATOM_FMT.format(
        rec="ATOM", serial=serial, name=" CA", alt="", res=resname, chain=chain, seq=resseq,
        icode="", x=x, y=y, z=z, occ=1.0, b=0.0, elem="C", charge="",
    )


def write_pdb(backbone: Backbone, path: str | Path) -> None:
    """Write a Cα trace: one ATOM record per residue, then END."""
    coords = backbone.coords_angstrom
    lines = [
        format_atom(i + 1, THREE_LETTER[aa], i + 1, coords[i])
        for i, aa in enumerate(backbone.sequence)
    ]
    lines.append("END")
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class PdbTrace:
    sequence: str
    coords: np.ndarray


def read_pdb(path: str | Path) -> PdbTrace:
    """Read CA atoms (first model, first altloc) from a PDB file by column position."""
    seq, xyz = [], []
    for line in Path(path).read_text().splitlines():
        rec = line[:6]
        if rec.startswith("ENDMDL"):
            break
        if rec not in ("ATOM  ", "HETATM") or line[12:16].strip() != "CA":
            continue
        if line[16] not in (" ", "A"):
            continue
        try:
            xyz.append((float(line[30:38]), float(line[38:46]), float(line[46:54])))
        except ValueError as exc:
            raise ValueError(f"malformed coordinates in {path}: {line!r}") from exc
        seq.append(_ONE_LETTER.get(line[17:20].strip(), "X"))
    if not xyz:
        raise ValueError(f"no CA atoms found in {path}")
    return PdbTrace("".join(seq), np.array(xyz))


def _drop_none(obj):
    if isinstance(obj, Mapping):
        return {k: _drop_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, list):
        return [_drop_none(v) for v in obj]
    return obj


def build_report(record: Mapping, kind: str = "run") -> dict:
    """Wrap a run or assembly dict into a versioned report.

    Energies from the oracle, when present, are surfaced under ``energies``
    with ``range`` recomputed as ``max - min``.
    """
    report = {"schema": REPORT_SCHEMA, "kind": kind, "energy_units": ENERGY_UNITS, "units_note": UNITS_NOTE}
    oracle = record.get("oracle")
    if oracle:
        lo, hi = oracle["min_energy"], oracle["max_energy"]
        report["energies"] = {"min": lo, "max": hi, "range": hi - lo}
    report["record"] = record
    return _drop_none(report)


def write_report(record: Mapping, path: str | Path, kind: str = "run") -> dict:
    report = build_report(record, kind)
    Path(path).write_text(json.dumps(report, indent=2, allow_nan=False) + "\n")
    return report


def read_report(path: str | Path) -> dict:
    report = json.loads(Path(path).read_text())
    if report.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"unsupported report schema {report.get('schema')!r}")
    return report


def write_summary_csv(rows: Iterable[Mapping], path: str | Path) -> None:
    """Write one summary row per fragment; missing values become empty cells."""
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if row.get(k) is None else row[k]) for k in SUMMARY_COLUMNS})
