import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tetrafold import lattice
from tetrafold.assemble import (
    AssemblyConfig,
    AssemblyError,
    FusedVectors,
    align,
    assemble_long,
    fuse,
    plan_windows,
    repair,
    snap_to_lattice,
    unit_vector,
)
from tetrafold.vqe import VqeConfig, run_pipeline

EXACT30 = VqeConfig(shots_opt=0, max_iter=30)


def fused_from(means, fallback=None):
    means = np.asarray(means, dtype=float)
    T = len(means)
    return FusedVectors(means, np.zeros(T), np.ones(T, dtype=int), fallback or [0] * T)


def test_plan_examples():
    assert plan_windows(7, 7, 1).windows == ((0, 7),)
    plan = plan_windows(10, 7, 1)
    assert [s for s, _ in plan.windows] == [0, 1, 2, 3]
    assert len(plan.windows) == (10 - 7) // 1 + 1
    assert plan_windows(10, 7, 2).windows == ((0, 7), (2, 9), (3, 10))
    with pytest.raises(ValueError):
        plan_windows(5, 7)
    with pytest.raises(ValueError):
        plan_windows(10, 2)
    with pytest.raises(ValueError):
        plan_windows(10, 7, 0)
    with pytest.raises(ValueError, match="window - 1"):
        plan_windows(10, 3, 3)


@given(st.integers(3, 40), st.integers(3, 12), st.integers(1, 11))
def test_plan_coverage(L, w, s):
    if L < w or s >= w:
        return
    plan = plan_windows(L, w, s)
    cov = plan.coverage()
    assert np.all(cov >= 1)
    assert plan.windows[-1][1] == L and plan.windows[0][0] == 0
    if s == 1:
        n_win = L - w + 1
        for t in range(L - 1):
            assert cov[t] == min(t + 1, L - 1 - t, w - 1, n_win)


def test_fuse_agreeing_windows_have_zero_variance():
    plan = plan_windows(4, 3, 1)
    fused = fuse([[1, 0], [0, 2]], plan)
    assert fused.count.tolist() == [1, 2, 1]
    assert np.allclose(fused.variance, 0)
    assert np.allclose(fused.mean[1], unit_vector(0, 1))
    assert not fused.ambiguous.any()


def test_fuse_cancelling_windows_flag_ambiguity():
    # The four tetrahedral directions sum to zero: four windows each picking a
    # different direction for the shared turn leave no preferred direction.
    plan = plan_windows(8, 5, 1)
    turns = [[0] * 4 for _ in range(4)]
    for k in range(4):
        turns[k][3 - k] = k
    fused = fuse(turns, plan)
    assert fused.count[3] == 4
    assert fused.ambiguous.tolist() == [t == 3 for t in range(7)]
    assert np.allclose(fused.mean[3], 0)
    assert fused.variance[3] == pytest.approx(1.0)


def test_weighting_only_matters_under_disagreement():
    plan = plan_windows(6, 4, 1)
    agree = [[1, 0, 2], [0, 2, 1], [2, 1, 3]]
    a = fuse(agree, plan, "uniform")
    b = fuse(agree, plan, "triangular")
    assert np.allclose(a.mean, b.mean)
    disagree = [[1, 0, 2], [0, 3, 1], [2, 1, 3]]
    a = fuse(disagree, plan, "uniform")
    b = fuse(disagree, plan, "triangular")
    assert not np.allclose(a.mean, b.mean)
    with pytest.raises(ValueError):
        fuse(agree, plan, "gaussian")


def test_fuse_input_checks():
    plan = plan_windows(5, 3, 1)
    with pytest.raises(ValueError):
        fuse([[0, 1]], plan)
    with pytest.raises(ValueError):
        fuse([[0, 1, 2], [0, 1], [0, 1]], plan)


def test_snap_examples():
    assert snap_to_lattice(fused_from([unit_vector(2, 0), unit_vector(3, 1)])).turns == (2, 3)
    assert snap_to_lattice(fused_from([[0.9, 1.1, 1.0]])).turns == (0,)
    # equidistant from directions 0 and 1
    assert snap_to_lattice(fused_from([[1.0, 0.0, 0.0]])).turns == (0,)
    assert snap_to_lattice(fused_from([[0.0, 0.0, 0.0]], fallback=[3])).turns == (3,)


def test_align_recovers_relabelling():
    consensus = np.array([unit_vector(d, t) for t, d in enumerate([1, 0, 2, 3, 1])])
    covered = np.array([True] * 5 + [False])
    consensus = np.vstack([consensus, np.zeros(3)])
    perm = (2, 3, 0, 1)
    inverse = [perm.index(d) for d in range(4)]
    local = [inverse[d] for d in [0, 2, 3, 1]] + [inverse[2]]
    got = align(local, 1, consensus, covered)
    assert [got[d] for d in local[:4]] == [0, 2, 3, 1]


def test_align_defaults_to_identity_without_overlap():
    assert align([1, 0, 2], 0, np.zeros((3, 3)), np.zeros(3, dtype=bool)) == (0, 1, 2, 3)


def test_repair_fixes_overlap():
    # (1, 0, 1, 0, 1) is straight; forcing a ring-closing sixth turn makes a clash
    turns = lattice.TurnSequence((1, 1, 0, 2))
    means = [unit_vector(d, t) for t, d in enumerate(turns)]
    fixed, log = repair(turns, fused_from(means))
    assert lattice.is_self_avoiding(lattice.walk(fixed))
    assert len(log) == 1 and log[0]["clash"] == [0, 2]


def test_repair_gives_up_loudly():
    turns = lattice.TurnSequence((0, 0, 0, 0, 0, 0, 0, 0))
    means = [unit_vector(0, t) for t in range(8)]
    with pytest.raises(AssemblyError):
        repair(turns, fused_from(means), max_passes=1)


def test_assemble_ten_residues_exact():
    result = assemble_long("IHGIGGFIAA", AssemblyConfig(vqe=EXACT30), seed=0)
    assert len(result.plan.windows) == 4
    assert len(result.backbone.points) == 10
    assert result.backbone.is_self_avoiding
    assert result.fused.count.tolist() == [1, 2, 3, 4, 4, 4, 3, 2, 1]
    manifest = result.manifest()
    assert len(manifest["windows"]) == 4 and manifest["self_avoiding"]


def test_assembly_is_deterministic(tmp_path):
    cfg = AssemblyConfig(vqe=VqeConfig(max_iter=30, shots_opt=200, shots_measure=2000))
    a = assemble_long("GAVEDGATMT", cfg, seed=5)
    b = assemble_long("GAVEDGATMT", cfg, seed=5)
    assert a.turns == b.turns
    assert a.fused.to_csv() == b.fused.to_csv()
    threaded = assemble_long("GAVEDGATMT", AssemblyConfig(vqe=cfg.vqe, workers=3), seed=5)
    assert threaded.turns == a.turns


def test_homopolymer_windows_are_identical_subproblems():
    result = assemble_long("G" * 9, AssemblyConfig(vqe=EXACT30), seed=2)
    first = result.records[0]
    for rec in result.records[1:]:
        assert rec.to_json(include_timings=False) == first.to_json(include_timings=False)


def test_single_window_reduces_to_pipeline():
    seq = "DWGGMKS"
    result = assemble_long(seq, AssemblyConfig(vqe=EXACT30), seed=4)
    rec = run_pipeline(seq, config=EXACT30, seed=4)
    assert result.turns == rec.turns
    assert result.backbone == rec.backbone_obj()
    assert result.records[0].to_json(include_timings=False) == rec.to_json(include_timings=False)
    assert result.repairs == []


def test_assembly_outputs(tmp_path):
    result = assemble_long("IHGIGGFIA", AssemblyConfig(vqe=EXACT30), seed=1)
    manifest = result.write(tmp_path, "x")
    assert [w["record"] for w in manifest["windows"]] == ["x_window00.json", "x_window01.json", "x_window02.json"]
    header = (tmp_path / "x_fused.csv").read_text().splitlines()[0]
    assert header == "turn,mean_x,mean_y,mean_z,variance,count"
