import math

import numpy as np
import pytest

from heegner_heights.asymptotics import MomentConfig
from heegner_heights.curve_model import CoefficientTable, load_curves
from heegner_heights.harness import (
    LANDMARKS, CheckpointMismatch, compute_heights, default_grid, delta_from_sweeps, delta_pair,
    error_probe, fmt, read_checkpoint, report_tables, summarize, sweep, write_probe_csv,
    write_sweep_csv,
)
from heegner_heights.lvalues import HeightEngine
from heegner_heights.quad_arith import enumerate_D

CURVES = load_curves()


def test_default_grid():
    g = default_grid(20000)
    assert g == sorted(g) and g[0] == 100.0 and g[-1] == 20000.0
    assert all(y in g for y in LANDMARKS)
    assert all(b / a <= 1.3 + 1e-9 for a, b in zip(g, g[1:]))
    assert default_grid(50) == [50.0]
    assert fmt(1 / 3) == "0.3333333333"


def test_cumulative_sums_and_zero_region():
    c = CURVES["11a"]
    s = sweep(c, 400, [2.5, 6.9, 7.0, 100.0, 400.0])
    assert s.cumulative_point_sum[0] == 0.0 and s.cumulative_trace_sum[0] == 0.0
    assert s.cumulative_point_sum[1] == 0.0
    assert s.cumulative_point_sum[2] == s.records[0].height_point
    assert all(b >= a for a, b in zip(s.cumulative_point_sum, s.cumulative_point_sum[1:]))
    assert s.C_P_exp[-1] == pytest.approx(s.cumulative_point_sum[-1] / (400 ** 1.5 * math.log(400)))
    assert s.point_ratio is None
    assert [r.d for r in s.records] == [r.d for r in enumerate_D(11, 400)]


def test_ymax_floor():
    with pytest.raises(ValueError):
        sweep(CURVES["11a"], 99)


def test_determinism_across_workers(tmp_path):
    c = CURVES["37B"]
    outputs = []
    for w in (1, 4, 8):
        s = sweep(c, 1200, workers=w)
        path = tmp_path / f"w{w}.csv"
        write_sweep_csv(s, path)
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_compute_heights_streams_in_order():
    c = CURVES["11a"]
    recs = enumerate_D(11, 600)
    seen = []
    out = compute_heights(HeightEngine(c), recs, workers=3, sink=seen.append)
    assert [r.d for r in out] == [r.d for r in recs] == [r.d for r in seen]
    assert compute_heights(HeightEngine(c), []) == []


def test_resume_after_interruption(tmp_path):
    c = CURVES["26B"]
    ref = sweep(c, 1500, checkpoint=tmp_path / "ref.ckpt")
    ck = tmp_path / "run.ckpt"
    sweep(c, 1500, checkpoint=ck)
    lines = ck.read_text().split("\n")
    keep = len(lines) // 2
    # cut mid-record, as a killed process would
    ck.write_text("\n".join(lines[:keep]) + "\n" + lines[keep][: len(lines[keep]) // 2])
    resumed = sweep(c, 1500, checkpoint=ck, resume=True)
    assert resumed.records == ref.records
    assert resumed.cumulative_point_sum == ref.cumulative_point_sum
    assert ck.read_text() == (tmp_path / "ref.ckpt").read_text()


def test_resume_extends_to_larger_ymax(tmp_path):
    c = CURVES["11a"]
    ck = tmp_path / "c.ckpt"
    sweep(c, 800, checkpoint=ck)
    longer = sweep(c, 1600, checkpoint=ck, resume=True)
    assert longer.records == sweep(c, 1600).records


def test_resume_refuses_other_parameters(tmp_path):
    c = CURVES["11a"]
    ck = tmp_path / "c.ckpt"
    sweep(c, 300, checkpoint=ck)
    with pytest.raises(CheckpointMismatch):
        sweep(c, 300, checkpoint=ck, resume=True, eps_trunc=1e-10)
    with pytest.raises(CheckpointMismatch):
        sweep(c, 300, checkpoint=ck, resume=True, include_d3=False)
    with pytest.raises(CheckpointMismatch):
        sweep(CURVES["37A"], 300, checkpoint=ck, resume=True)
    # a fresh run simply overwrites
    sweep(c, 300, checkpoint=ck, eps_trunc=1e-10)
    assert len(read_checkpoint(ck, HeightEngine(c, 1e-10), True)) == len(enumerate_D(11, 300))


def test_delta_properties():
    grid = [300.0, 900.0]
    same = delta_pair(CURVES["37A"], CURVES["37A"], grid)
    assert same.delta == (0.0, 0.0)
    with pytest.raises(ValueError):
        delta_pair(CURVES["37A"], CURVES["11a"], grid)
    a = sweep(CURVES["26A"], 900, grid)
    b = sweep(CURVES["26B"], 900, grid)
    ab, ba = delta_from_sweeps(a, b, grid), delta_from_sweeps(b, a, grid)
    assert ab.delta == tuple(-x for x in ba.delta)
    expect = (b.cumulative_point_sum[1] - a.cumulative_point_sum[1]) / 900 ** 1.5
    assert ab.delta[1] == pytest.approx(expect, rel=1e-14)


def test_error_probe_zero_table(bundle_of):
    c = CURVES["11a"]
    zero = CoefficientTable(400000, np.zeros(400001, dtype=np.int64))
    s = sweep(c, 1500, engine=HeightEngine(c, table=zero))
    assert all(r.height_point == 0.0 and r.height_trace == 0.0 for r in s.records)
    b = bundle_of("11a")
    rows = error_probe(s.records, b, [200.0, 1500.0])
    for r in rows:
        assert r.moment == 0.0
        main = b.alpha_tilde * r.Y * math.log(r.Y) + b.beta_tilde * r.Y
        assert r.residual == pytest.approx(-main, rel=1e-15)
        assert r.residual_over_Y == pytest.approx(-main / r.Y, rel=1e-15)


def test_error_probe_real_data(bundle_of, tmp_path):
    c = CURVES["11a"]
    s = sweep(c, 2000)
    rows = error_probe(s.records, bundle_of("11a"), [500.0, 1000.0, 2000.0])
    # the residual is lower order than the main terms
    assert all(abs(r.residual) < 0.5 * abs(r.main_terms) for r in rows)
    manual = math.fsum(1.5 * math.sqrt(r.abs_d / 1000.0) * r.Lprime_rankin
                       for r in s.records if r.abs_d <= 1000)
    assert rows[1].moment == pytest.approx(manual, rel=1e-12)
    write_probe_csv(rows, tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().startswith("Y,moment,main_terms,residual")
    bump = MomentConfig("smooth_bump", 0.1)
    assert error_probe(s.records, bundle_of("11a"), [1000.0], bump)[0].moment < rows[1].moment


def test_report_tables_empty(tmp_path):
    files = report_tables([], tmp_path)
    assert [f.name for f in files] == ["table1.csv"]
    assert files[0].read_text().strip() == "label,rank,C_Tr_x1e3,C_P_x1e3,C_P_over_C_Tr"


def test_report_tables_full(tmp_path, bundle_of):
    b = bundle_of("11a")
    s = summarize("11a", sweep(CURVES["11a"], 600).records, [300.0, 600.0], b)
    files = report_tables([b], tmp_path, [s], columns=[300.0, 600.0])
    names = {f.name for f in files}
    assert {"table1.csv", "table2.csv", "11a_points.dat", "11a_points_theory.dat",
            "11a_points_leading.dat", "11a_traces.dat", "11a_traces_theory.dat"} <= names
    row = (tmp_path / "table1.csv").read_text().splitlines()[1].split(",")
    assert row[0] == "11a" and float(row[2]) == pytest.approx(b.C_Tr * 1e3, rel=1e-9)
    t2 = (tmp_path / "table2.csv").read_text().splitlines()
    assert t2[0] == "label,300,600"
    assert float(t2[1].split(",")[2]) == pytest.approx(s.point_ratio[1], rel=1e-9)
    pts = np.loadtxt(tmp_path / "11a_points.dat")
    assert pts[-1, 1] == pytest.approx(s.cumulative_point_sum[-1], rel=1e-9)
