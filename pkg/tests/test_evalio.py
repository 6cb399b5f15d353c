import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar
from scipy.spatial.transform import Rotation

from tetrafold.decode import Backbone
from tetrafold.evalio import (
    UNITS_NOTE,
    DegenerateStructure,
    build_report,
    kabsch_rmsd,
    read_pdb,
    read_report,
    write_pdb,
    write_report,
    write_summary_csv,
)

seeds = st.integers(0, 2**32 - 1)


def random_cloud(rng, n=12):
    return rng.normal(scale=5.0, size=(n, 3))


def test_identical_sets():
    a = random_cloud(np.random.default_rng(0))
    rep = kabsch_rmsd(a, a)
    assert rep.rmsd_angstrom == 0.0 and rep.n_atoms == 12


def test_recovers_known_motion():
    rng = np.random.default_rng(1)
    a = random_cloud(rng)
    R = Rotation.random(random_state=3).as_matrix()
    t = np.array([1.0, -2.0, 7.5])
    rep = kabsch_rmsd(a, a @ R.T + t)
    assert rep.rmsd_angstrom < 1e-8
    assert np.allclose(rep.rotation, R, atol=1e-8) and np.allclose(rep.translation, t, atol=1e-8)
    assert np.linalg.det(rep.rotation) == pytest.approx(1.0)


def test_matches_direct_minimization_in_plane():
    # Both sets lie in the z=0 plane, so the optimal proper rotation is either a
    # rotation about z or one composed with a half-turn about x (which flips the
    # plane over). A 1-D search over the angle for each branch is exhaustive.
    a = np.array([[1.0, 0, 0], [-1.0, 0, 0], [0, 0.5, 0]])
    b = np.array([[0, 2.0, 0], [0, -2.0, 0], [0.3, 0, 0]])
    pa, pb = a - a.mean(0), b - b.mean(0)

    def rmsd_at(phi, flip):
        c, s = math.cos(phi), math.sin(phi)
        R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]]) @ np.diag([1.0, flip, flip])
        return math.sqrt(np.mean(np.sum((pa @ R.T - pb) ** 2, axis=1)))

    best = min(
        (minimize_scalar(rmsd_at, args=(flip,), bounds=(lo, lo + math.pi / 2), method="bounded",
                         options={"xatol": 1e-12})
         for lo in np.arange(0, 2 * math.pi, math.pi / 2) for flip in (1.0, -1.0)),
        key=lambda r: r.fun,
    )
    assert kabsch_rmsd(a, b).rmsd_angstrom == pytest.approx(best.fun, abs=1e-7)


def test_reflection_is_not_a_proper_motion():
    rng = np.random.default_rng(2)
    a = random_cloud(rng)
    mirrored = a * np.array([1.0, 1.0, -1.0])
    rep = kabsch_rmsd(a, mirrored)
    assert rep.rmsd_angstrom > 0.1
    assert np.linalg.det(rep.rotation) == pytest.approx(1.0)


def test_input_errors():
    with pytest.raises(ValueError):
        kabsch_rmsd(np.ones((4, 3)), np.ones((5, 3)))
    with pytest.raises(ValueError):
        kabsch_rmsd(np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(ValueError):
        kabsch_rmsd(np.full((3, 3), np.nan), np.ones((3, 3)))
    line = np.outer(np.arange(4.0), [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateStructure):
        kabsch_rmsd(line, line + 1.0)
    assert kabsch_rmsd(line, line + 1.0, allow_degenerate=True).rmsd_angstrom < 1e-9


@given(seeds)
def test_rmsd_symmetry(seed):
    rng = np.random.default_rng(seed)
    a, b = random_cloud(rng), random_cloud(rng)
    assert abs(kabsch_rmsd(a, b).rmsd_angstrom - kabsch_rmsd(b, a).rmsd_angstrom) < 1e-9


@given(seeds)
def test_rmsd_invariance_under_rigid_motion(seed):
    rng = np.random.default_rng(seed)
    a, b = random_cloud(rng), random_cloud(rng)
    R = Rotation.random(random_state=seed).as_matrix()
    t = rng.normal(scale=20, size=3)
    base = kabsch_rmsd(a, b).rmsd_angstrom
    assert abs(kabsch_rmsd(a @ R.T + t, b).rmsd_angstrom - base) < 1e-9
    assert abs(kabsch_rmsd(a, b @ R.T + t).rmsd_angstrom - base) < 1e-9


def test_pdb_two_residues(tmp_path):
    p = tmp_path / "gg.pdb"
    write_pdb(Backbone.from_turns("GV", (0,)), p)
    lines = p.read_text().splitlines()
    assert len(lines) == 3 and lines[-1] == "END"
    assert all(line.startswith("ATOM  ") for line in lines[:2])


def test_pdb_columns(tmp_path):
    p = tmp_path / "v.pdb"
    write_pdb(Backbone.from_turns("VKDRS", (1, 0, 1, 2)), p)
    first = p.read_text().splitlines()[0]
    assert len(first) == 80
    assert first[0:6] == "ATOM  "
    assert first[6:11] == "    1"
    assert first[12:16] == " CA "
    assert first[17:20] == "VAL"
    assert first[21] == "A"
    assert first[22:26] == "   1"
    assert first[30:38] == "   0.000"
    assert first[54:60] == "  1.00"
    assert first[76:78] == " C"


@given(st.lists(st.integers(0, 3), min_size=2, max_size=15))
def test_pdb_parse_back(tmp_path_factory, turns):
    seq = "ACDEFGHIKLMNPQRSTVWY"[: len(turns) + 1]
    bb = Backbone.from_turns(seq, turns)
    p = tmp_path_factory.mktemp("pdb") / "x.pdb"
    write_pdb(bb, p)
    trace = read_pdb(p)
    assert trace.sequence == seq
    assert np.max(np.abs(trace.coords - bb.coords_angstrom)) <= 5e-4
    d = np.linalg.norm(np.diff(trace.coords, axis=0), axis=1)
    assert np.all(np.abs(d - 3.8) <= 0.01)


def test_pdb_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        write_pdb(Backbone.from_turns("GG", (0,)), tmp_path / "missing" / "x.pdb")


def test_report_roundtrip_and_range(tmp_path):
    record = {"sequence": "GGG", "oracle": {"min_energy": 0.0, "max_energy": 230.0}, "mitigated_top": None}
    p = tmp_path / "r.json"
    written = write_report(record, p)
    back = read_report(p)
    assert back == written
    assert back["energies"]["range"] == back["energies"]["max"] - back["energies"]["min"]
    assert back["energy_units"] == "a.u." and back["units_note"] == UNITS_NOTE
    assert "mitigated_top" not in back["record"]
    assert "energies" not in build_report({"sequence": "GG"})


def test_report_rejects_foreign_schema(tmp_path):
    p = tmp_path / "r.json"
    p.write_text(json.dumps({"schema": "other/1"}))
    with pytest.raises(ValueError):
        read_report(p)


def test_summary_csv(tmp_path):
    p = tmp_path / "s.csv"
    write_summary_csv([{"pdb_id": "3ckz", "sequence": "VKDRS", "L": 5, "n_qubits": 8, "min_e": 0.0,
                        "max_e": 290.0, "range": 290.0, "extra": 1}], p)
    assert p.read_text().splitlines() == [
        "pdb_id,sequence,L,n_qubits,min_e,max_e,range,rmsd",
        "3ckz,VKDRS,5,8,0.0,290.0,290.0,",
    ]
