"""Reference data shipped with the package: the fragment manifest and golden oracle reports."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

MANIFEST_FILE = "fragments.csv"
GOLDEN_LENGTHS = (3, 4, 5)
_REQUIRED = ("pdb_id", "sequence", "length", "residues", "source")


@dataclass(frozen=True)
class Fragment:
    pdb_id: str
    sequence: str
    length: int
    residues: str
    source: str
    table_qubits: int | None = None
    table_min_e: float | None = None
    table_max_e: float | None = None
    table_range: float | None = None
    table_depth: int | None = None


@dataclass(frozen=True)
class FragmentManifest:
    entries: tuple[Fragment, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, pdb_id: str) -> Fragment:
        for e in self.entries:
            if e.pdb_id == pdb_id:
                return e
        raise KeyError(pdb_id)

    def by_source(self, source: str) -> list[Fragment]:
        return [e for e in self.entries if e.source == source]


def _opt(value: str, kind):
    return kind(value) if value.strip() else None


def load_manifest(path: str | Path | None = None) -> FragmentManifest:
    """Parse the fragment CSV, checking that every length matches its sequence."""
    if path is None:
        text = resources.files(__package__).joinpath(MANIFEST_FILE).read_text()
        where = MANIFEST_FILE
    else:
        text, where = Path(path).read_text(), str(path)
    reader = csv.DictReader(text.splitlines())
    missing = [c for c in _REQUIRED if c not in (reader.fieldnames or [])]
    if missing:
        raise ValueError(f"{where}: missing columns {missing}")
    entries = []
    for lineno, row in enumerate(reader, start=2):
        try:
            length = int(row["length"])
        except ValueError:
            raise ValueError(f"{where}:{lineno}: length {row['length']!r} is not an integer") from None
        seq = row["sequence"].strip().upper()
        if length != len(seq):
            raise ValueError(f"{where}:{lineno}: length {length} does not match {seq!r} ({len(seq)} residues)")
        try:
            entries.append(Fragment(
                pdb_id=row["pdb_id"].strip(),
                sequence=seq,
                length=length,
                residues=row["residues"].strip(),
                source=row["source"].strip(),
                table_qubits=_opt(row.get("table_qubits") or "", int),
                table_min_e=_opt(row.get("table_min_e") or "", float),
                table_max_e=_opt(row.get("table_max_e") or "", float),
                table_range=_opt(row.get("table_range") or "", float),
                table_depth=_opt(row.get("table_depth") or "", int),
            ))
        except ValueError as exc:
            raise ValueError(f"{where}:{lineno}: {exc}") from None
    return FragmentManifest(tuple(entries))


def golden_path(length: int) -> str:
    return f"golden/poly_g_L{length}.json"


def load_golden(length: int) -> dict:
    return json.loads(resources.files(__package__).joinpath(golden_path(length)).read_text())
