"""Regenerate the golden oracle reports: ``python -m tetrafold.data.golden``."""

from __future__ import annotations

import json
from pathlib import Path

from ..decode import brute_force
from ..hamiltonian import build_total
from . import GOLDEN_LENGTHS, golden_path


def golden_report(length: int) -> dict:
    seq = "G" * length
    h, record = build_total(seq)
    rep = brute_force(h)
    return {"sequence": seq, "n_qubits": h.n_qubits, "term_count": record.term_count, "oracle": rep.to_dict()}


def main() -> None:
    root = Path(__file__).parent
    for length in GOLDEN_LENGTHS:
        out = root / golden_path(length)
        out.parent.mkdir(exist_ok=True)
        out.write_text(json.dumps(golden_report(length), indent=2) + "\n")
        print(out)


if __name__ == "__main__":
    main()
