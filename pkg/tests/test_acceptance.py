"""One test per acceptance criterion, each at its stated tolerance.

Every test records a single ``criterion N: PASS|FAIL ...`` line; the lines are
printed together in the pytest terminal summary.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from conftest import ACCEPTANCE_LINES
from tetrafold.cli import main as cli
from tetrafold.decode import brute_force, decode_bits, encode_turns
from tetrafold.evalio import kabsch_rmsd, read_pdb
from tetrafold.data import load_manifest
from tetrafold.hamiltonian import build_total, n_qubits_for, one_hot_part
from tetrafold.pauli import diagonal, identity, index_to_bits, projector, zero
from tetrafold.qsim import (
    AnsatzSpec,
    ReadoutNoise,
    expectation_exact,
    expectation_sampled,
    mitigate_readout,
    probabilities,
    sample,
    simulate,
    total_variation,
)
from tetrafold.vqe import VqeConfig, optimize

MANIFEST = load_manifest()


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_projector_algebra():
    t0 = time.perf_counter()
    n = n_qubits_for(5)
    ok = True
    for t in range(4):
        P = [projector(t, d, n) for d in range(4)]
        ok &= P[0] + P[1] + P[2] + P[3] == identity(n)
        for d, e in itertools.product(range(4), repeat=2):
            ok &= P[d] * P[e] == (P[d] if d == e else zero(n))
    elapsed = time.perf_counter() - t0
    record(1, ok and elapsed < 1.0, f"completeness and orthogonality term-exact for 4 turns at L=5 ({elapsed:.3f} s)")


def test_criterion_02_diagonality_and_locality():
    t0 = time.perf_counter()
    short = [f for f in MANIFEST if f.length <= 7]
    worst, ok = 0, True
    for frag in MANIFEST:
        h, rec = build_total(frag.sequence)
        ok &= all(0 <= m < (1 << h.n_qubits) for m in h.terms)
        ok &= one_hot_part(frag.length) == zero(h.n_qubits)
        if frag.length <= 7:
            worst = max(worst, rec.max_locality)
    elapsed = time.perf_counter() - t0
    record(2, ok and worst <= 6 and elapsed < 10.0,
           f"{len(short)} fragments with L<=7 (and all {len(MANIFEST)} built): Z-only, "
           f"max locality {worst}, one-hot term zero ({elapsed:.2f} s)")


def test_criterion_03_oracle_equivalence():
    t0 = time.perf_counter()
    cfg = VqeConfig(max_iter=200, shots_opt=0, n_restarts=3)
    results = {}
    for seq in ["GGG", "GGGG", "GGGGG", "VKDRS"]:
        h, _ = build_total(seq)
        target = brute_force(h).min_energy
        spec = AnsatzSpec(h.n_qubits, reps=1)
        results[seq] = sum(abs(optimize(h, spec, cfg, seed=s).best_energy - target) <= 1e-2 for s in range(10))
    elapsed = time.perf_counter() - t0
    ok = all(v >= 8 for v in results.values()) and elapsed < 300
    detail = ", ".join(f"{k} {v}/10" for k, v in results.items())
    record(3, ok, f"exact-mode VQE reaches brute-force minimum within 1e-2: {detail} ({elapsed:.1f} s)")


def test_criterion_04_range_scaling():
    t0 = time.perf_counter()
    ranges = []
    for L in range(3, 8):
        rep = brute_force(build_total("A" * L)[0])
        ranges.append(rep.range)
    elapsed = time.perf_counter() - t0
    ok = all(b > a for a, b in zip(ranges, ranges[1:])) and elapsed < 120
    record(4, ok, f"poly-Ala oracle range L=3..7 = {ranges} ({elapsed:.2f} s)")


def test_criterion_05_qubit_formula():
    ok = True
    diverging = []
    for frag in MANIFEST:
        h, _ = build_total(frag.sequence)
        ok &= h.n_qubits == 2 * (frag.length - 1)
        if frag.table_qubits is not None and frag.table_qubits != h.n_qubits:
            diverging.append(f"{frag.pdb_id}:{h.n_qubits}vs{frag.table_qubits}")
    record(5, ok, f"n_qubits = 2(L-1) for all {len(MANIFEST)} fragments; {len(diverging)} differ from the "
                  f"reference table (ours vs table): {' '.join(diverging)}")


def test_criterion_06_shot_noise_scaling():
    t0 = time.perf_counter()
    h, _ = build_total("VKDRS")
    spec = AnsatzSpec(8, 1)
    psi = simulate(spec, np.random.default_rng(0).uniform(-math.pi, math.pi, spec.n_params))
    exact = expectation_exact(psi, h)
    rng = np.random.default_rng(1)
    shots_list = [100, 400, 1600, 6400]
    errors = []
    for shots in shots_list:
        est = [expectation_sampled(sample(psi, shots, seed=rng), h) for _ in range(50)]
        errors.append(math.sqrt(np.mean((np.array(est) - exact) ** 2)))
    slope = np.polyfit(np.log(shots_list), np.log(errors), 1)[0]
    elapsed = time.perf_counter() - t0
    record(6, abs(slope + 0.5) <= 0.1 and elapsed < 120,
           f"log-log slope of standard error vs shots = {slope:.3f} ({elapsed:.2f} s)")


def test_criterion_07_readout_mitigation():
    spec = AnsatzSpec(2, 1)
    psi = simulate(spec, np.random.default_rng(3).uniform(-math.pi, math.pi, spec.n_params))
    p = probabilities(psi)
    truth = {index_to_bits(x, 2): float(p[x]) for x in range(4)}
    noise = ReadoutNoise(0.0135, 0.0135)
    hist = sample(psi, 10**6, noise, seed=7)
    mitigated = mitigate_readout(hist, noise)
    raw_tv = total_variation(hist.frequencies(), truth)
    tv = total_variation(mitigated, truth)
    record(7, tv < 0.01, f"TV(mitigated, noiseless) = {tv:.5f} (raw {raw_tv:.5f}) at 1e6 shots")


def test_criterion_08_decode_roundtrip():
    ok = True
    count = 0
    for L in range(2, 7):
        n = 2 * (L - 1)
        for x in range(1 << n):
            bits = index_to_bits(x, n)
            ok &= encode_turns(decode_bits(bits, L)) == bits
            count += 1
    rng = np.random.default_rng(10)
    for _ in range(10**4):
        turns = tuple(int(v) for v in rng.integers(0, 4, 9))
        ok &= decode_bits(encode_turns(turns), 10).turns == turns
    record(8, ok, f"exhaustive round-trip on {count} bitstrings (L<=6) and 10^4 random cases at L=10")


def _strip_timings(path):
    d = json.loads(path.read_text())
    d.pop("timings")
    return json.dumps(d, indent=2).encode()


def test_criterion_09_two_stage_determinism(tmp_path):
    for d in ("a", "b"):
        assert cli(["predict", "--seq", "VKDRS", "--mode", "exact", "--seed", "11", "--out", str(tmp_path / d)]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    same_pdb = (a / "VKDRS.pdb").read_bytes() == (b / "VKDRS.pdb").read_bytes()
    same_rec = _strip_timings(a / "VKDRS.json") == _strip_timings(b / "VKDRS.json")
    record(9, same_pdb and same_rec, f"repeat predict runs: PDB identical={same_pdb}, record identical "
                                     f"outside timings={same_rec}")


def test_criterion_10_sliding_window(tmp_path):
    seq = MANIFEST["3d83"].sequence
    assert len(seq) == 10
    code = cli(["assemble", "--seq", seq, "--window", "7", "--stride", "1", "--out", str(tmp_path / "asm")])
    trace = read_pdb(tmp_path / "asm" / f"{seq}.pdb")
    dists = np.linalg.norm(np.diff(trace.coords, axis=0), axis=1)
    distinct = len({tuple(np.round(c, 3)) for c in trace.coords}) == len(trace.coords)
    bonds_ok = bool(np.all(np.abs(dists - 3.8) <= 0.01))

    short = MANIFEST["3dx3"].sequence
    cli(["assemble", "--seq", short, "--window", "7", "--seed", "2", "--out", str(tmp_path / "one")])
    cli(["predict", "--seq", short, "--max-iter", "30", "--seed", "2", "--out", str(tmp_path / "pred")])
    same_pdb = (tmp_path / "one" / f"{short}.pdb").read_bytes() == (tmp_path / "pred" / f"{short}.pdb").read_bytes()
    same_rec = (_strip_timings(tmp_path / "one" / f"{short}_window00.json")
                == _strip_timings(tmp_path / "pred" / f"{short}.json"))
    ok = code == 0 and distinct and bonds_ok and same_pdb and same_rec
    record(10, ok, f"{seq}: self-avoiding={distinct}, CA-CA in [{dists.min():.3f}, {dists.max():.3f}] A; "
                   f"single-window {short} equals predict: PDB={same_pdb} record={same_rec}")


def test_criterion_11_rmsd():
    rng = np.random.default_rng(42)
    a = rng.normal(scale=6.0, size=(15, 3))
    self_rmsd = kabsch_rmsd(a, a).rmsd_angstrom
    worst = 0.0
    for k in range(100):
        R = Rotation.random(random_state=k).as_matrix()
        t = rng.normal(scale=30.0, size=3)
        worst = max(worst, kabsch_rmsd(a, a @ R.T + t).rmsd_angstrom)
    mirrored = kabsch_rmsd(a, a * np.array([-1.0, 1.0, 1.0])).rmsd_angstrom
    ok = self_rmsd == 0.0 and worst < 1e-8 and mirrored > 1e-3
    record(11, ok, f"self={self_rmsd}, worst rigid-motion RMSD={worst:.2e}, mirror image RMSD={mirrored:.3f}")


def test_criterion_12_not_targeted():
    record(12, True, "not targeted: reference-table absolute energies, circuit depths and run times, "
                     "hardware docking affinities, external structure-predictor and classical baseline numbers, "
                     "and the reported energy-affinity correlation depend on unpublished coefficients, "
                     "external tools or hardware; no test compares against them")
