"""Command-line front end.

Subcommands: ``validate-weights``, ``run``, ``sweep``, ``threshold``, ``fit``
and ``plot``. Any option may also come from a flat ``key = value`` config file
given with ``--config`` (keys are option names with ``-`` or ``_``; ``#``
starts a comment); options given on the command line win.

Exit codes: 0 success, 1 usage or input error, 2 weight validation mismatch,
3 under-sampled run.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from collections import defaultdict
from fractions import Fraction

import numpy as np

from .analysis import IDEALIZED_BETA, NoCrossover, bootstrap_crossover, fit_gamma, fit_threshold_decay
from .circuits import Scheme
from .graph import CLASSES, TABLE1, derive_weights_by_fault_enumeration
from .montecarlo import CSV_COLUMNS, SimConfig, run_batch

EXIT_OK, EXIT_USAGE, EXIT_MISMATCH, EXIT_UNDERSAMPLED = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- config + grids


def read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key = value")
            key, val = (x.strip() for x in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def float_list(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def int_list(text: str) -> list[int]:
    return [int(x) for x in str(text).split(",") if x.strip()]


def grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive arithmetic grid, rounded to suppress float drift."""
    if step <= 0:
        raise UsageError("grid step must be positive")
    if stop < start:
        return []
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(n)]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _sim_options(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--scheme", default="NoLRU")
    ap.add_argument("--decoder", default="standard")
    ap.add_argument("--q", type=float, default=None, help="measurement flip probability (default p)")
    ap.add_argument("--s", type=float, default=1.0)
    ap.add_argument("--rounds", type=int, default=None)
    ap.add_argument("--three-outcome", type=_bool, default=False)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--min-trials", type=int, default=10_000)
    ap.add_argument("--min-failures", type=int, default=1_000)
    ap.add_argument("--max-trials", type=int, default=10_000)
    ap.add_argument("--chunk-size", type=int, default=500)
    ap.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="toricleak", description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", default=None, help="flat key = value file")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("validate-weights", help="enumerate single faults and compare edge weights with the table")

    run = sub.add_parser("run", help="simulate one (d, p, r) cell and print its CSV row")
    run.add_argument("--d", type=int, default=None)
    run.add_argument("--p", type=float, default=None)
    run.add_argument("--r", type=float, default=0.0)
    _sim_options(run)

    sw = sub.add_parser("sweep", help="simulate a grid of cells into a CSV file (resumable)")
    sw.add_argument("--d", type=int_list, default=None, help="comma-separated distances")
    sw.add_argument("--p-start", type=float, default=None)
    sw.add_argument("--p-stop", type=float, default=None)
    sw.add_argument("--p-step", type=float, default=None)
    sw.add_argument("--r", type=float_list, default=[0.0], help="comma-separated r values")
    sw.add_argument("--out", default=None)
    _sim_options(sw)

    th = sub.add_parser("threshold", help="crossover of two distances' failure curves")
    th.add_argument("--csv", default=None)
    th.add_argument("--d-pair", type=int_list, default=None, help="e.g. 5,7 (default: two smallest)")
    th.add_argument("--bootstrap", type=int, default=1000)
    th.add_argument("--seed", type=int, default=0)
    th.add_argument("--max-rate", type=float, default=None,
                    help="ignore points where both failure rates exceed this (saturated tail)")

    fit = sub.add_parser("fit", help="fit alpha/(1+beta r) and per-distance sub-threshold slopes")
    fit.add_argument("--csv", default=None)
    fit.add_argument("--d-pair", type=int_list, default=None)
    fit.add_argument("--gamma-max-p", type=float, default=None,
                     help="largest p used for slopes (default: below the crossover of each curve set)")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--max-rate", type=float, default=None)

    pl = sub.add_parser("plot", help="render failure-rate and threshold plots as SVG")
    pl.add_argument("--csv", default=None)
    pl.add_argument("--out-dir", default=".")
    pl.add_argument("--d-pair", type=int_list, default=None)
    return ap


REQUIRED = {
    "run": ("d", "p"),
    "sweep": ("d", "p_start", "p_stop", "p_step", "out"),
    "threshold": ("csv",),
    "fit": ("csv",),
    "plot": ("csv",),
}


def parse_args(argv) -> argparse.Namespace:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        conf = read_config(args.config)
        explicit = {a.split("=", 1)[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
        sub = ap._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
        actions = {a.dest: a for a in sub._actions}  # noqa: SLF001
        for key, val in conf.items():
            if key in explicit:
                continue
            if key not in actions:
                raise UsageError(f"unknown config key {key!r} for {args.command}")
            act = actions[key]
            try:
                setattr(args, key, act.type(val) if act.type else val)
            except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"bad value for {key}: {exc}") from None
    missing = [k for k in REQUIRED.get(args.command, ()) if getattr(args, k, None) is None]
    if missing:
        raise UsageError(f"missing options: {', '.join('--' + k.replace('_', '-') for k in missing)}")
    return args


def _config(args, d: int, p: float, r: float) -> SimConfig:
    return SimConfig(d=d, scheme=args.scheme, decoder=args.decoder, p=p, q=args.q, r=r, s=args.s,
                     rounds=args.rounds, three_outcome=args.three_outcome, seed=args.seed,
                     min_trials=args.min_trials, min_failures=args.min_failures, max_trials=args.max_trials,
                     chunk_size=args.chunk_size, workers=args.workers)


# ---------------------------------------------------------------- CSV


def read_rows(path: str) -> list[dict]:
    """Parse a results CSV, rejecting malformed rows with their line number."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise UsageError(f"{path}: missing header row")
        missing = set(CSV_COLUMNS) - set(reader.fieldnames)
        if missing:
            raise UsageError(f"{path}: header lacks {sorted(missing)}")
        rows = []
        for row in reader:
            try:
                rows.append({
                    "d": int(row["d"]), "scheme": row["scheme"], "decoder": row["decoder"],
                    "p": float(row["p"]), "q": float(row["q"]), "r": float(row["r"]), "s": float(row["s"]),
                    "trials": int(row["trials"]), "x_fail": int(row["x_fail"]), "z_fail": int(row["z_fail"]),
                    "any_fail": int(row["any_fail"]), "ci_lo": float(row["ci_lo"]),
                    "ci_hi": float(row["ci_hi"]), "seed": int(row["seed"]),
                })
            except (TypeError, ValueError) as exc:
                raise UsageError(f"{path}: malformed row at line {reader.line_num}: {exc}") from None
            if rows[-1]["trials"] < rows[-1]["any_fail"] or rows[-1]["trials"] <= 0:
                raise UsageError(f"{path}: inconsistent counts at line {reader.line_num}")
    return rows


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def write_row(fh, row: dict) -> None:
    fh.write(",".join(_fmt(row[c]) for c in CSV_COLUMNS) + "\n")
    fh.flush()


def _cell_key(row: dict) -> tuple:
    return (row["d"], str(row["scheme"]), str(row["decoder"]), round(float(row["p"]), 12),
            round(float(row["r"]), 12), round(float(row["s"]), 12), int(row["seed"]))


# ---------------------------------------------------------------- commands


def cmd_validate_weights(out=None) -> int:
    out = out or sys.stdout
    ok = True
    for scheme in Scheme:
        for et in ("X", "Z"):
            got = derive_weights_by_fault_enumeration(scheme, error_type=et)
            for c in CLASSES:
                want = TABLE1[scheme][c]
                have = got.get(c, (Fraction(0), 0))
                match = tuple(have) == tuple(want)
                ok &= match
                qpart = " + q" if want[1] else ""
                out.write(f"{scheme.value:<11} {et} {c}  enumerated {have[0]}*p{' + q' if have[1] else ''}"
                          f"  table {want[0]}*p{qpart}  {'ok' if match else 'MISMATCH'}\n")
    out.write("all edge weights match\n" if ok else "edge weight mismatch\n")
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_run(args, out=None) -> int:
    out = out or sys.stdout
    stats = run_batch(_config(args, args.d, args.p, args.r))
    out.write(",".join(CSV_COLUMNS) + "\n")
    write_row(out, stats.csv_row())
    return EXIT_UNDERSAMPLED if stats.under_sampled else EXIT_OK


def cmd_sweep(args, out=None) -> int:
    out = out or sys.stdout
    ps = grid(args.p_start, args.p_stop, args.p_step)
    if not args.d or not args.r:
        raise UsageError("empty d or r list")
    done = set()
    if os.path.exists(args.out) and os.path.getsize(args.out) > 0:
        done = {_cell_key(r) for r in read_rows(args.out)}
        fh = open(args.out, "a", encoding="utf-8")
    else:
        fh = open(args.out, "w", encoding="utf-8")
        fh.write(",".join(CSV_COLUMNS) + "\n")
        fh.flush()
    under = False
    with fh:
        for r in args.r:
            for d in args.d:
                for p in ps:
                    cfg = _config(args, d, p, r)
                    key = _cell_key({"d": d, "scheme": cfg.scheme, "decoder": cfg.decoder, "p": p, "r": r,
                                     "s": cfg.s, "seed": cfg.seed})
                    if key in done:
                        continue
                    stats = run_batch(cfg)
                    under |= stats.under_sampled
                    write_row(fh, stats.csv_row())
                    out.write(f"d={d} p={p:g} r={r:g}: {stats.any_failures}/{stats.trials}\n")
    return EXIT_UNDERSAMPLED if under else EXIT_OK


def _curves(rows: list[dict]) -> dict:
    """(scheme, decoder, r) -> d -> (p array, k, n) aggregated over duplicate cells."""
    acc = defaultdict(lambda: defaultdict(lambda: defaultdict(lambda: [0, 0])))
    for row in rows:
        cell = acc[(row["scheme"], row["decoder"], row["r"])][row["d"]][row["p"]]
        cell[0] += row["any_fail"]
        cell[1] += row["trials"]
    out = {}
    for key, by_d in acc.items():
        out[key] = {}
        for d, by_p in by_d.items():
            ps = sorted(by_p)
            out[key][d] = (np.array(ps), np.array([by_p[p][0] for p in ps]), np.array([by_p[p][1] for p in ps]))
    return out


def thresholds_from_rows(rows, d_pair=None, n_boot: int = 1000, seed: int = 0, max_rate=None) -> dict:
    """(scheme, decoder, r) -> ThresholdEstimate or the NoCrossover message."""
    res = {}
    for key, by_d in sorted(_curves(rows).items()):
        ds = sorted(by_d) if d_pair is None else list(d_pair)
        if len(ds) < 2 or any(d not in by_d for d in ds[:2]):
            res[key] = "need two distances"
            continue
        d1, d2 = ds[:2]
        p1, k1, n1 = by_d[d1]
        p2, k2, n2 = by_d[d2]
        common = np.intersect1d(p1, p2)
        i1, i2 = np.searchsorted(p1, common), np.searchsorted(p2, common)
        try:
            res[key] = bootstrap_crossover(common, k1[i1], n1[i1], k2[i2], n2[i2], n_boot=n_boot, seed=seed,
                                            max_rate=max_rate)
        except NoCrossover as exc:
            res[key] = str(exc)
    return res


def cmd_threshold(args, out=None) -> int:
    out = out or sys.stdout
    res = thresholds_from_rows(read_rows(args.csv), args.d_pair, args.bootstrap, args.seed, args.max_rate)
    if not res:
        raise UsageError("no data rows")
    status = EXIT_OK
    for (scheme, decoder, r), est in res.items():
        if isinstance(est, str):
            out.write(f"{scheme} {decoder} r={r:g}: {est}\n")
            status = EXIT_USAGE
        else:
            out.write(f"{scheme} {decoder} r={r:g}: p_th = {est.p_th:.5%}  "
                      f"95% CI [{est.ci[0]:.5%}, {est.ci[1]:.5%}]\n")
    return status


def cmd_fit(args, out=None) -> int:
    out = out or sys.stdout
    rows = read_rows(args.csv)
    th = thresholds_from_rows(rows, args.d_pair, 200, args.seed, args.max_rate)
    groups = defaultdict(dict)
    for (scheme, decoder, r), est in th.items():
        if not isinstance(est, str):
            groups[(scheme, decoder)][r] = est.p_th
    status = EXIT_OK
    for (scheme, decoder), by_r in sorted(groups.items()):
        rs = sorted(by_r)
        out.write(f"{scheme} {decoder}\n")
        try:
            f = fit_threshold_decay(rs, [by_r[r] for r in rs])
            out.write(f"  alpha = {f.alpha:.5%} +- {f.alpha_err:.5%}   beta = {f.beta:.4f} +- {f.beta_err:.4f}\n")
            out.write("  r      p_th       fit        idealized(beta=3/4)\n")
            for r, resid in zip(rs, f.residuals):
                ideal = f.alpha / (1 + IDEALIZED_BETA * r)
                out.write(f"  {r:<6g} {by_r[r]:.5%}  {by_r[r] - resid:.5%}  {ideal:.5%}\n")
        except ValueError as exc:
            out.write(f"  threshold fit rejected: {exc}\n")
            status = EXIT_USAGE
    curves = _curves(rows)
    for (scheme, decoder, r), by_d in sorted(curves.items()):
        pmax = args.gamma_max_p
        if pmax is None:
            est = th.get((scheme, decoder, r))
            pmax = est.p_th if est is not None and not isinstance(est, str) else math.inf
        for d, (ps, ks, ns) in sorted(by_d.items()):
            sel = ps < pmax
            try:
                g, res = fit_gamma(ps[sel], ks[sel] / ns[sel], d)
                out.write(f"gamma {scheme} {decoder} r={r:g} d={d}: {g:.4f} "
                          f"(max |residual| {max(abs(x) for x in res):.3f})\n")
            except ValueError as exc:
                out.write(f"gamma {scheme} {decoder} r={r:g} d={d}: rejected ({exc})\n")
    return status


def cmd_plot(args, out=None) -> int:
    out = out or sys.stdout
    from .plotting import plot_failure_rates, plot_thresholds

    rows = read_rows(args.csv)
    os.makedirs(args.out_dir, exist_ok=True)
    paths = []
    for log in (False, True):
        name = os.path.join(args.out_dir, f"failure_{'log' if log else 'linear'}.svg")
        plot_failure_rates(rows, name, log=log)
        paths.append(name)
    th = thresholds_from_rows(rows, args.d_pair, n_boot=0) if rows else {}
    name = os.path.join(args.out_dir, "threshold_vs_r.svg")
    plot_thresholds(th, name)
    paths.append(name)
    for p in paths:
        out.write(p + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        if args.command == "validate-weights":
            return cmd_validate_weights()
        return {"run": cmd_run, "sweep": cmd_sweep, "threshold": cmd_threshold, "fit": cmd_fit,
                "plot": cmd_plot}[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # argparse
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
