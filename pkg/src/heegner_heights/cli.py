"""Command-line entry point: ``heegner-heights <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import asymptotics, harness
from .curve_model import load_curves


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--curves", type=Path, default=None, help="curve config file")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--pmax", type=int, default=asymptotics.DEFAULT_PMAX,
                   help="Euler product prime cutoff")


def _sweep_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ymax", type=float, default=6000.0)
    p.add_argument("--eps-trunc", type=float, default=1e-9)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--include-d3", type=_bool, default=True, metavar="BOOL")
    p.add_argument("--resume", action="store_true", help="continue from existing checkpoints")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heegner-heights",
                                 description="Heegner point heights from L-values.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="Euler products and asymptotic constants")
    _common(p)
    p.add_argument("labels", nargs="*", help="curve labels (default: all)")

    p = sub.add_parser("sweep", help="heights over the discriminant family")
    _common(p)
    _sweep_flags(p)
    p.add_argument("labels", nargs="+")

    p = sub.add_parser("delta", help="normalised difference of point-height sums")
    _common(p)
    _sweep_flags(p)
    p.add_argument("label_a")
    p.add_argument("label_b")

    p = sub.add_parser("error-probe", help="residual of the first moment after its main terms")
    _common(p)
    _sweep_flags(p)
    p.add_argument("--bump-width", type=float, default=None,
                   help="use a smooth test function with this edge width")
    p.add_argument("label")

    p = sub.add_parser("tables", help="constant table, ratio table and plot data")
    _common(p)
    _sweep_flags(p)
    p.add_argument("labels", nargs="*")

    p = sub.add_parser("verify", help="run the invariant checks")
    _common(p)
    return ap


def _pick(curves, labels):
    if not labels:
        return list(curves.values())
    missing = [lab for lab in labels if lab not in curves]
    if missing:
        raise SystemExit(f"unknown curve label(s): {', '.join(missing)}")
    return [curves[lab] for lab in labels]


def _sweep_kw(args) -> dict:
    return dict(eps_trunc=args.eps_trunc, workers=args.workers,
                include_d3=args.include_d3, resume=args.resume)


def _checkpoint(args, label: str) -> Path:
    d = args.out / "checkpoints"
    d.mkdir(parents=True, exist_ok=True)
    return d / f"{label}.ckpt"


def cmd_constants(args) -> int:
    curves = _pick(load_curves(args.curves), args.labels)
    bundles = []
    for c in curves:
        b = asymptotics.constants(c, args.pmax)
        bundles.append(b)
        print(f"{b.label:>6}  rank {b.rank}  C_Tr*1e3 = {b.C_Tr * 1e3:.4g}  "
              f"C_P*1e3 = {b.C_P * 1e3:.4g}  C_P/C_Tr = {b.C_P / b.C_Tr:.4g}  "
              f"C_P' = {b.C_Pprime:.4g}  gamma_E = {b.gamma_E:.4g}")
    args.out.mkdir(parents=True, exist_ok=True)
    harness.write_table1(bundles, args.out / "table1.csv")
    return 0


def cmd_sweep(args) -> int:
    curves = _pick(load_curves(args.curves), args.labels)
    args.out.mkdir(parents=True, exist_ok=True)
    for c in curves:
        bundle = asymptotics.constants(c, args.pmax)
        s = harness.sweep(c, args.ymax, checkpoint=_checkpoint(args, c.label), bundle=bundle,
                          **_sweep_kw(args))
        harness.write_sweep_csv(s, args.out / f"{c.label}_sweep.csv")
        harness.write_plot_data(s, args.out, bundle)
        i = len(s.grid) - 1
        print(f"{c.label}: {len(s.records)} discriminants, C_P_exp/C_P at Y={s.grid[i]:g}: "
              f"{s.point_ratio[i]:.4f}")
    return 0


def cmd_delta(args) -> int:
    curves = load_curves(args.curves)
    a, b = _pick(curves, [args.label_a, args.label_b])
    grid = harness.default_grid(args.ymax)
    _checkpoint(args, a.label)
    res = harness.delta_pair(a, b, grid, checkpoint_dir=args.out / "checkpoints", **_sweep_kw(args))
    harness.write_table3(res, args.out / "table3.csv")
    for Y, v in zip(res.grid, res.delta):
        print(f"{Y:>10g}  {v:.6f}")
    return 0


def cmd_error_probe(args) -> int:
    curve = _pick(load_curves(args.curves), [args.label])[0]
    moment = (asymptotics.MomentConfig("smooth_bump", args.bump_width)
              if args.bump_width else asymptotics.MomentConfig())
    bundle = asymptotics.constants(curve, args.pmax, moment)
    s = harness.sweep(curve, args.ymax, checkpoint=_checkpoint(args, curve.label),
                      bundle=bundle, **_sweep_kw(args))
    rows = harness.error_probe(s.records, bundle, s.grid, moment)
    args.out.mkdir(parents=True, exist_ok=True)
    harness.write_probe_csv(rows, args.out / f"{curve.label}_error_probe.csv")
    for r in rows:
        print(f"{r.Y:>10g}  residual {r.residual:.6g}  residual/Y {r.residual_over_Y:.6g}")
    return 0


def cmd_tables(args) -> int:
    curves = _pick(load_curves(args.curves), args.labels)
    bundles, sweeps = [], []
    grid = harness.default_grid(args.ymax)
    for c in curves:
        b = asymptotics.constants(c, args.pmax)
        bundles.append(b)
        sweeps.append(harness.sweep(c, args.ymax, grid, checkpoint=_checkpoint(args, c.label),
                                    bundle=b, **_sweep_kw(args)))
    cols = [Y for Y in harness.LANDMARKS if Y <= args.ymax] or [grid[-1]]
    for f in harness.report_tables(bundles, args.out, sweeps, cols):
        print(f)
    return 0


def cmd_verify(args) -> int:
    from .verify import run_all
    return 0 if run_all(load_curves(args.curves)) else 1


COMMANDS = {
    "constants": cmd_constants,
    "sweep": cmd_sweep,
    "delta": cmd_delta,
    "error-probe": cmd_error_probe,
    "tables": cmd_tables,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
