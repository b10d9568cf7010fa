"""Command line entry point: ``doubledescent {sweep,synthetic,theory,report}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import yaml

from . import sweep as sw
from . import theory


def _load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise SystemExit(f"{path}: config must be a mapping")
    return raw


def _apply_overrides(raw: dict, args) -> sw.SweepConfig:
    if args.seed is not None:
        raw["base_seed"] = args.seed
    if args.workers is not None:
        raw["workers"] = args.workers
    return sw.SweepConfig.from_dict(raw)


def _write_outputs(result: sw.SweepResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    family = result.config.family
    csv_path = sw.emit_csv(result, out / f"{family}.csv")
    sw.emit_plot(result, out / f"{family}.png")
    if result.histories:
        sw.emit_histories(result, out / "histories")
    meta = {"config": result.config.to_dict(), "threshold": result.threshold,
            "threshold_squared": result.threshold_squared,
            "threshold_zero_one": result.threshold_zero_one, **result.metadata}
    (out / f"{family}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {csv_path}")
    print(f"interpolation threshold: {result.threshold}")
    for p in result.points + result.references:
        print(f"  {p.family:>16} cap={p.capacity:>7} train_sq={p.train_sq:.3e} test_sq={p.test_sq:.3e} "
              f"test_01={p.test_01:.4f} norm={p.norm:.3e} {p.status}")


def cmd_sweep(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    _write_outputs(sw.run_sweep(cfg), Path(args.out))
    return 0


def cmd_synthetic(args) -> int:
    raw = _load_config(args.config)
    raw.setdefault("family", "synthetic")
    if raw["family"] != "synthetic":
        raise SystemExit("the synthetic subcommand needs family: synthetic")
    params = raw.setdefault("params", {})
    if args.snr is not None:
        params["snr"] = float(args.snr)
    if args.n is not None:
        params["n"] = args.n
    if args.trials is not None:
        raw["repeats"] = args.trials
    if not raw.get("capacities"):
        raw["capacities"] = [16, 32, 64, 128, 192, 224, 256, 288, 320, 384, 512, 1024, 2048]
    return _write_outputs(sw.run_sweep(_apply_overrides(raw, args)), Path(args.out)) or 0


def cmd_theory(args) -> int:
    raw = _load_config(args.config)
    d = args.d or raw.get("d", 1)
    ns = args.ns or raw.get("ns", [2 ** k for k in range(5, 13)])
    trials = args.trials or raw.get("trials", 20)
    sigma = args.sigma or raw.get("sigma", 0.05 if d == 1 else 0.2)
    approx_ns = raw.get("approx_ns", [8, 16, 32, 64, 128, 256, 512])
    seed = args.seed if args.seed is not None else raw.get("seed", 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    fit = theory.fill_scaling(d, ns, trials, seed)
    with (out / f"fill_d{d}.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "mean_log_kappa"])
        for n, v in zip(fit.ns, fit.mean_log_kappa):
            w.writerow([n, repr(v)])
    print(f"fill-distance slope (d={d}): {fit.slope:.4f}, expected {-1.0 / d:.4f}")

    rep = theory.noiseless_approx_experiment(sigma, approx_ns, seed, d, trials)
    with (out / f"approx_d{d}.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "trial", "kappa", "sup_error", "norm_h", "norm_hstar"])
        for r in rep.rows:
            w.writerow([r.n, r.trial, repr(r.kappa), repr(r.sup_error), repr(r.norm_h), repr(r.norm_hstar)])
    print(f"min-norm interpolant never exceeds target norm: {rep.minimality_holds}")
    print(f"mean sup error decreasing in n: {rep.sup_error_decreasing}")
    for n in sorted(rep.means):
        print(f"  n={n:>5} sup_error={rep.means[n][0]:.3e} kappa={rep.means[n][1]:.4f}")
    return 0


def cmd_report(args) -> int:
    points = sw.read_csv(args.csv)
    out = Path(args.out) if args.out else Path(args.csv).with_suffix(".png")
    sw.emit_plot(points, out)
    curve = [p for p in points if p.capacity >= 0]
    thr = sw.threshold_from_points(curve)
    metric = "test_01" if any(p.test_01 == p.test_01 for p in curve) else "test_sq"
    check = sw.verify_double_descent(curve, thr, metric=metric)
    print(f"plot: {out}")
    print(f"interpolation threshold: {thr}")
    print(f"double descent ({metric}): peak={check.test_peak_at_threshold} "
          f"second_descent={check.second_descent} norm_peak={check.norm_peak_at_threshold} "
          f"norm_nonincreasing={check.norm_nonincreasing_after}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="doubledescent", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="YAML config file")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--seed", type=int, default=None, help="override base_seed")

    p = sub.add_parser("sweep", help="capacity sweep for one model family")
    common(p, config_required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synthetic", help="Fourier-on-the-circle sweep over N")
    common(p)
    p.add_argument("--snr", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_synthetic)

    p = sub.add_parser("theory", help="fill-distance scaling and noiseless interpolation")
    common(p)
    p.add_argument("--d", type=int)
    p.add_argument("--ns", type=int, nargs="+")
    p.add_argument("--trials", type=int)
    p.add_argument("--sigma", type=float)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("report", help="re-plot and summarize a sweep CSV")
    p.add_argument("csv")
    p.add_argument("--out", default=None, help="plot path (default: next to the CSV)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
