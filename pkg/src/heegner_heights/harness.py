"""Discriminant sweeps, moment aggregation, checkpoints and report files."""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import accumulate
from pathlib import Path
from typing import Iterable, Sequence

from .asymptotics import (ConstantBundle, MomentConfig, constants, predicted_point_sum,
                          predicted_trace_sum)
from .curve_model import CurveRecord
from .lvalues import HeightEngine, HeightRecord
from .quad_arith import DiscriminantRecord, enumerate_D

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 2
LANDMARKS = (6000.0, 13000.0, 20000.0)


def default_grid(ymax: float, start: float = 100.0, ratio: float = 1.3) -> list[float]:
    """Geometric grid up to ymax plus the landmark values below it."""
    if ymax < start:
        return [float(ymax)]
    pts = []
    y = start
    while y < ymax:
        pts.append(round(y, 6))
        y *= ratio
    pts.extend(v for v in LANDMARKS if v <= ymax)
    pts.append(float(ymax))
    return sorted(set(pts))


def fmt(x: float) -> str:
    """10 significant digits, as used in every CSV."""
    return f"{x:.10g}"


# --- checkpoints ----------------------------------------------------------------

class CheckpointMismatch(RuntimeError):
    """An existing checkpoint was written with different parameters."""


def _header(engine: HeightEngine, include_d3: bool) -> str:
    c = engine.curve
    fields = [
        f"v={CHECKPOINT_VERSION}",
        f"label={c.label}",
        "ainvs=" + ",".join(str(a) for a in c.ainvs),
        f"N={c.N}",
        f"eps_trunc={engine.eps_trunc!r}",
        f"trunc_scale={engine.trunc_scale!r}",
        f"include_d3={int(include_d3)}",
        f"volume={engine.volume!r}",
    ]
    return "# heegner-heights checkpoint " + " ".join(fields)


def _format_record(r: HeightRecord) -> str:
    return " ".join([str(r.d), str(r.u), repr(r.Lprime_rankin), repr(r.L_twist_value),
                     repr(r.L_twist_deriv), repr(r.height_point), repr(r.height_trace)])


def _parse_record(line: str, engine: HeightEngine) -> HeightRecord:
    d, u, lr, ltw, ltd, hp, htr = line.split()
    tw_val, tw_der = float(ltw), float(ltd)
    if engine.curve.analytic_rank == 0:
        over_k = engine.L_value_at_1 * tw_der
    else:
        over_k = engine.L_deriv_at_1 * tw_val
    return HeightRecord(int(d), int(u), tw_val, tw_der, float(lr), over_k, float(hp), float(htr))


def read_checkpoint(path: Path, engine: HeightEngine, include_d3: bool) -> list[HeightRecord]:
    """Records of a compatible checkpoint; a torn last line is dropped."""
    with open(path) as fh:
        text = fh.read()
    lines = text.split("\n")
    if not lines or lines[0] != _header(engine, include_d3):
        raise CheckpointMismatch(f"{path}: written with different parameters, refusing to resume")
    complete = lines[1:-1] if not text.endswith("\n") else lines[1:]
    out = []
    for line in complete:
        if line.strip():
            out.append(_parse_record(line, engine))
    return out


class CheckpointWriter:
    """Single append-only writer; records arrive already ordered by |d|."""

    def __init__(self, path: Path, header: str, fresh: bool, keep: int):
        self.path = path
        if fresh:
            with open(path, "w") as fh:
                fh.write(header + "\n")
        else:
            self._truncate_to(keep)
        self._fh = open(path, "a")

    def _truncate_to(self, keep: int) -> None:
        # drop a torn trailing line left by an interrupted run
        with open(self.path) as fh:
            lines = fh.read().split("\n")
        with open(self.path, "w") as fh:
            fh.write("\n".join(lines[:keep + 1]) + "\n")

    def write(self, rec: HeightRecord) -> None:
        self._fh.write(_format_record(rec) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


# --- sweeps -------------------------------------------------------------------------

def compute_heights(engine: HeightEngine, recs: Sequence[DiscriminantRecord], workers: int = 1,
                    sink=None) -> list[HeightRecord]:
    """Heights for each discriminant, returned (and streamed to ``sink``) in input order."""
    if not recs:
        return []
    engine.prepare(max(r.abs_d for r in recs))
    engine.L_value_at_1
    if engine.curve.analytic_rank == 1:
        engine.L_deriv_at_1
    out = []
    if workers <= 1:
        results: Iterable[HeightRecord] = map(engine.heights, recs)
        for r in results:
            out.append(r)
            if sink:
                sink(r)
        return out
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for r in pool.map(engine.heights, recs):
            out.append(r)
            if sink:
                sink(r)
    return out


@dataclass(frozen=True)
class SweepResult:
    label: str
    grid: tuple[float, ...]
    records: tuple[HeightRecord, ...]
    cumulative_point_sum: tuple[float, ...]
    cumulative_trace_sum: tuple[float, ...]
    C_P_exp: tuple[float, ...]
    point_ratio: tuple[float, ...] | None     # C_P_exp / C_P
    trace_ratio: tuple[float, ...] | None     # trace sum / leading prediction

    def at(self, Y: float) -> int:
        return self.grid.index(float(Y))


def _cumulative(records: Sequence[HeightRecord], grid: Sequence[float], attr: str) -> list[float]:
    out = []
    for Y in grid:
        out.append(math.fsum(getattr(r, attr) for r in records if r.abs_d <= Y))
    return out


def summarize(label: str, records: Sequence[HeightRecord], grid: Sequence[float],
              bundle: ConstantBundle | None = None) -> SweepResult:
    grid = sorted(float(y) for y in grid)
    pts = _cumulative(records, grid, "height_point")
    trs = _cumulative(records, grid, "height_trace")
    cexp = [s / (Y ** 1.5 * math.log(Y)) if Y > 1 else math.nan for s, Y in zip(pts, grid)]
    pr = tr = None
    if bundle is not None:
        pr = tuple(c / bundle.C_P for c in cexp)
        tr = tuple(s / predicted_trace_sum(bundle, Y, full=False) if Y > 1 else math.nan
                   for s, Y in zip(trs, grid))
    return SweepResult(label, tuple(grid), tuple(records), tuple(pts), tuple(trs),
                       tuple(cexp), pr, tr)


def sweep(curve: CurveRecord, ymax: float, grid: Sequence[float] | None = None, *,
          eps_trunc: float = 1e-9, workers: int = 1, include_d3: bool = True,
          checkpoint: str | os.PathLike | None = None, resume: bool = False,
          bundle: ConstantBundle | None = None, with_theory: bool = False,
          engine: HeightEngine | None = None) -> SweepResult:
    """Heights over all d in the family with |d| <= ymax, aggregated on a Y grid."""
    if ymax < 100:
        raise ValueError("ymax must be at least 100")
    engine = engine or HeightEngine(curve, eps_trunc)
    recs = enumerate_D(curve.N, ymax, include_d3)
    done: list[HeightRecord] = []
    writer = None
    if checkpoint is not None:
        path = Path(checkpoint)
        header = _header(engine, include_d3)
        if resume and path.exists():
            done = read_checkpoint(path, engine, include_d3)
            expected = [r.d for r in recs[:len(done)]]
            if [r.d for r in done] != expected:
                raise CheckpointMismatch(f"{path}: discriminant sequence differs, refusing to resume")
            writer = CheckpointWriter(path, header, fresh=False, keep=len(done))
        else:
            writer = CheckpointWriter(path, header, fresh=True, keep=0)
    try:
        todo = recs[len(done):]
        logger.info("%s: %d discriminants to evaluate (%d from checkpoint)",
                    curve.label, len(todo), len(done))
        fresh = compute_heights(engine, todo, workers, writer.write if writer else None)
    finally:
        if writer:
            writer.close()
    records = done + fresh
    if bundle is None and with_theory:
        bundle = constants(curve)
    return summarize(curve.label, records, grid or default_grid(ymax), bundle)


# --- two-curve comparison -------------------------------------------------------------

@dataclass(frozen=True)
class DeltaResult:
    labels: tuple[str, str]
    grid: tuple[float, ...]
    delta: tuple[float, ...]


def delta_from_sweeps(a: SweepResult, b: SweepResult, grid: Sequence[float]) -> DeltaResult:
    grid = sorted(float(y) for y in grid)
    pa = _cumulative(a.records, grid, "height_point")
    pb = _cumulative(b.records, grid, "height_point")
    delta = tuple((sb - sa) / Y ** 1.5 for sa, sb, Y in zip(pa, pb, grid))
    return DeltaResult((a.label, b.label), tuple(grid), delta)


def delta_pair(curve_a: CurveRecord, curve_b: CurveRecord, grid: Sequence[float],
               checkpoint_dir: str | os.PathLike | None = None, **kw) -> DeltaResult:
    """Y^{-3/2} sum_{|d| <= Y} (h_B(P_d) - h_A(P_d))."""
    if curve_a.N != curve_b.N:
        raise ValueError(f"conductors differ: {curve_a.N} vs {curve_b.N}")
    ymax = max(grid)

    def run(c: CurveRecord) -> SweepResult:
        ck = Path(checkpoint_dir) / f"{c.label}.ckpt" if checkpoint_dir is not None else None
        return sweep(c, ymax, grid, checkpoint=ck, **kw)

    sa = run(curve_a)
    sb = sa if curve_b == curve_a else run(curve_b)
    return delta_from_sweeps(sa, sb, grid)


# --- error term probe --------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeRow:
    Y: float
    moment: float          # sum_d L'_d(E,1) F(|d|/Y)
    main_terms: float      # alpha~ Y log Y + beta~ Y
    residual: float

    @property
    def residual_over_Y(self) -> float:
        return self.residual / self.Y


def error_probe(records: Sequence[HeightRecord], bundle: ConstantBundle, grid: Sequence[float],
                moment: MomentConfig | None = None) -> list[ProbeRow]:
    """Residual of the weighted first moment after its two main terms.

    ``bundle`` must have been computed with the same ``moment``; a sharp
    F only approximates the smooth test functions of the asymptotic.
    """
    moment = moment or MomentConfig()
    rows = []
    for Y in sorted(float(y) for y in grid):
        inside = [r for r in records if r.abs_d <= Y]
        if inside:
            w = moment.F([r.abs_d / Y for r in inside])
            s = math.fsum(float(wi) * r.Lprime_rankin for wi, r in zip(w, inside))
        else:
            s = 0.0
        main = bundle.alpha_tilde * Y * math.log(Y) + bundle.beta_tilde * Y
        rows.append(ProbeRow(Y, s, main, s - main))
    return rows


# --- report files ----------------------------------------------------------------------------

TABLE1_HEADER = ["label", "rank", "C_Tr_x1e3", "C_P_x1e3", "C_P_over_C_Tr"]


def write_table1(bundles: Sequence[ConstantBundle], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE1_HEADER)
        for b in bundles:
            w.writerow([b.label, b.rank, fmt(b.C_Tr * 1e3), fmt(b.C_P * 1e3), fmt(b.C_P / b.C_Tr)])


def write_table2(sweeps: Sequence[SweepResult], columns: Sequence[float], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label"] + [fmt(Y) for Y in columns])
        for s in sweeps:
            if s.point_ratio is None:
                raise ValueError(f"{s.label}: sweep lacks the theoretical constants")
            w.writerow([s.label] + [fmt(s.point_ratio[s.at(Y)]) for Y in columns])


def write_table3(delta: DeltaResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Y", f"delta_{delta.labels[1]}_minus_{delta.labels[0]}"])
        for Y, v in zip(delta.grid, delta.delta):
            w.writerow([fmt(Y), fmt(v)])


def write_sweep_csv(s: SweepResult, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["Y", "count", "point_sum", "trace_sum", "C_P_exp"]
        if s.point_ratio is not None:
            head += ["C_P_exp_over_C_P", "trace_over_prediction"]
        w.writerow(head)
        for i, Y in enumerate(s.grid):
            count = sum(1 for r in s.records if r.abs_d <= Y)
            row = [fmt(Y), count, fmt(s.cumulative_point_sum[i]), fmt(s.cumulative_trace_sum[i]),
                   fmt(s.C_P_exp[i])]
            if s.point_ratio is not None:
                row += [fmt(s.point_ratio[i]), fmt(s.trace_ratio[i])]
            w.writerow(row)


def write_probe_csv(rows: Sequence[ProbeRow], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Y", "moment", "main_terms", "residual", "residual_over_Y"])
        for r in rows:
            w.writerow([fmt(r.Y), fmt(r.moment), fmt(r.main_terms), fmt(r.residual),
                        fmt(r.residual_over_Y)])


def _write_xy(path: Path, xs: Iterable[float], ys: Iterable[float]) -> None:
    with open(path, "w") as fh:
        for x, y in zip(xs, ys):
            fh.write(f"{fmt(x)} {fmt(y)}\n")


def write_plot_data(s: SweepResult, out: Path, bundle: ConstantBundle | None = None) -> list[Path]:
    """Cumulative sums at every |d| plus the predicted curves on the same abscissae."""
    xs = [r.abs_d for r in s.records]
    files = []
    for kind, attr in (("points", "height_point"), ("traces", "height_trace")):
        path = out / f"{s.label}_{kind}.dat"
        _write_xy(path, xs, accumulate(getattr(r, attr) for r in s.records))
        files.append(path)
    if bundle is not None:
        ys = [float(x) for x in xs if x > 1]
        for kind, fn in (("points", predicted_point_sum), ("traces", predicted_trace_sum)):
            path = out / f"{s.label}_{kind}_theory.dat"
            _write_xy(path, ys, (fn(bundle, y) for y in ys))
            files.append(path)
        path = out / f"{s.label}_points_leading.dat"
        _write_xy(path, ys, (predicted_point_sum(bundle, y, full=False) for y in ys))
        files.append(path)
    return files


def report_tables(bundles: Sequence[ConstantBundle], out: str | os.PathLike,
                  sweeps: Sequence[SweepResult] = (), columns: Sequence[float] = LANDMARKS,
                  delta: DeltaResult | None = None) -> list[Path]:
    """Write table1.csv, and table2.csv / table3.csv / plot data when given sweeps or a delta."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files = [out / "table1.csv"]
    write_table1(bundles, files[0])
    if sweeps:
        cols = [Y for Y in columns if all(float(Y) in s.grid for s in sweeps)]
        files.append(out / "table2.csv")
        write_table2(sweeps, cols, files[-1])
        by_label = {b.label: b for b in bundles}
        for s in sweeps:
            files += write_plot_data(s, out, by_label.get(s.label))
    if delta is not None:
        files.append(out / "table3.csv")
        write_table3(delta, files[-1])
    return files
