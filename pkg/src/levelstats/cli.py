"""Command-line front end.

Subcommands: simulate, analyze, theory, fit, unfold, crosscorr.  Exit codes:
0 success, 1 data error, 2 usage error.  Every command that writes files also
writes a ``manifest.json`` recording the flags, seed and outputs, so a run
can be reproduced bit-for-bit.
"""

from __future__ import annotations

import argparse
import glob as globmod
import json
import sys
import time

import numpy as np

from . import __version__
from .estimators import (StatCurve, number_variance, pooled_spacings, power_spectrum,
                         read_statcurve_csv, rigidity, spacing_histogram,
                         write_statcurve_csv)
from .fitting import fit_phi, fit_xi
from .rmt import EnsembleConfig, generate_ensemble
from .spectra import (BilliardGeometry, LevelSequence, LevelUnit, cross_correlation_windows,
                      read_level_file, read_sparameter_csv, unfold_weyl,
                      write_level_file)
from .theory import build_nth_neighbor_model, theory_curve

_UNIT_FLAGS = {"ghz": LevelUnit.FREQUENCY_GHZ, "raw": LevelUnit.RAW_EIGENVALUE,
               "unfolded": LevelUnit.UNFOLDED}


def _parse_grid(text):
    """'a:b:h' -> inclusive-start grid with step h."""
    try:
        a, b, h = (float(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be 'start:stop:step', got {text!r}")
    if h <= 0 or b <= a:
        raise argparse.ArgumentTypeError("grid needs stop > start and step > 0")
    n = int(np.floor((b - a) / h + 1e-9)) + 1
    return a + h * np.arange(n)


def _parse_range(text):
    try:
        lo, hi = (float(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"range must be 'lo:hi', got {text!r}")
    return lo, hi


def _write_manifest(out_dir, subcommand, flags, outputs, seed, started):
    manifest = {
        "subcommand": subcommand,
        "flags": flags,
        "seed": seed,
        "version": __version__,
        "outputs": sorted(str(p) for p in outputs),
        "wall_clock_s": round(time.monotonic() - started, 3),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _emit_json(payload, out):
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_simulate(args):
    from pathlib import Path
    started = time.monotonic()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = EnsembleConfig(n=args.n, count=args.count, xi=args.xi, phi=args.phi,
                            bulk_fraction=args.bulk, seed=args.seed,
                            unfolding=args.unfolding, degree=args.degree)
    spectra = generate_ensemble(config, workers=args.workers)
    outputs = []
    for i, spec in enumerate(spectra):
        path = out_dir / f"real_{i:04d}.lvl"
        write_level_file(path, spec.values,
                         header=f"realization={i}, provenance={spec.provenance}")
        outputs.append(path)
    flags = {"n": args.n, "count": args.count, "xi": args.xi, "phi": args.phi,
             "bulk_fraction": args.bulk, "unfolding": args.unfolding,
             "degree": args.degree}
    outputs.append(_write_manifest(out_dir, "simulate", flags, outputs, args.seed,
                                   started))
    print(f"wrote {len(spectra)} spectra to {out_dir}")
    return 0


def _load_spectra(pattern):
    paths = sorted(globmod.glob(pattern))
    if not paths:
        raise ValueError(f"no files match {pattern!r}")
    return [read_level_file(p, LevelUnit.UNFOLDED) for p in paths]


def _cmd_analyze(args):
    from pathlib import Path
    started = time.monotonic()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spectra = _load_spectra(args.inputs)
    stats = args.stats.split(",")
    known = {"nn", "sigma2", "delta3", "power"}
    unknown = set(stats) - known
    if unknown:
        raise UsageError(f"unknown statistic(s) {sorted(unknown)}; choose from {sorted(known)}")
    l_grid = args.lgrid
    outputs = []
    for stat in stats:
        if stat == "nn":
            curve = spacing_histogram(pooled_spacings(spectra, k=1), args.nn_bin)
        elif stat == "sigma2":
            curve = number_variance(spectra, l_grid)
        elif stat == "delta3":
            curve = rigidity(spectra, l_grid)
        else:
            n_common = min(len(s) for s in spectra) if args.ncommon == "AUTO" \
                else int(args.ncommon)
            curve = power_spectrum(spectra, n_common)
        path = out_dir / f"{stat}.csv"
        write_statcurve_csv(path, curve)
        outputs.append(path)
    flags = {"in": args.inputs, "stats": args.stats, "nn_bin": args.nn_bin,
             "lgrid": list(map(float, l_grid)), "ncommon": args.ncommon}
    outputs.append(_write_manifest(out_dir, "analyze", flags, outputs, None, started))
    print(f"wrote {len(stats)} statistics to {out_dir}")
    return 0


def _cmd_theory(args):
    grid = args.grid
    model = None
    if args.curve == "ps" and args.phi < 1.0:
        config = EnsembleConfig(n=args.model_dim, count=args.model_count,
                                xi=args.xi, phi=1.0, seed=args.model_seed)
        model = build_nth_neighbor_model(args.xi, config, workers=args.workers)
    if args.curve == "power":
        inside = (grid > 0.0) & (grid < 1.0)
        if not np.all(inside):
            print(f"warning: dropping {int((~inside).sum())} singular grid "
                  "point(s) at t=0 or t=1", file=sys.stderr)
            grid = grid[inside]
    curve = theory_curve(args.curve, grid, args.xi, args.phi, model)
    write_statcurve_csv(args.out, curve)
    print(f"wrote {args.curve} curve to {args.out}")
    return 0


def _cmd_fit(args):
    if args.parameter == "phi":
        curve = read_statcurve_csv(args.power)
        result = fit_phi(curve, xi=args.xi, fit_range=args.trange)
    else:
        curve = read_statcurve_csv(args.sigma2)
        result = fit_xi(curve, phi=args.phi, L_range=args.lrange)
    payload = {"estimate": result.estimate, "stderr": result.stderr,
               "objective": result.objective,
               "range": list(result.diagnostics["range"])}
    if result.diagnostics.get("boundary"):
        payload["warnings"] = ["minimum at search boundary"]
    _emit_json(payload, args.out)
    return 0


def _cmd_unfold(args):
    unit = _UNIT_FLAGS[args.unit]
    if unit is not LevelUnit.FREQUENCY_GHZ:
        raise UsageError("unfold currently supports --unit ghz (smooth-count unfolding)")
    levels = read_level_file(args.inputs, unit)
    geometry = BilliardGeometry(area=args.area, perimeter=args.perimeter,
                                perimeter_sign=args.sign,
                                constant_offset=args.const)
    spectrum = unfold_weyl(levels, geometry, calibrate=args.calibrate)
    write_level_file(args.out, spectrum.values,
                     header=f"unfolded from {args.inputs}, sign={args.sign}")
    print(f"wrote {len(spectrum)} unfolded levels to {args.out}")
    return 0


def _cmd_crosscorr(args):
    trace = read_sparameter_csv(args.inputs)
    centers, coeffs = cross_correlation_windows(trace, args.window)
    payload = {"window_ghz": args.window,
               "centers_ghz": [round(float(c), 9) for c in centers],
               "coefficients": [float(c) for c in coeffs]}
    _emit_json(payload, args.out)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class UsageError(Exception):
    pass


def build_parser():
    parser = argparse.ArgumentParser(
        prog="levelstats",
        description="Fluctuation statistics of (incomplete) eigenvalue spectra "
                    "across the orthogonal-unitary crossover.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate an ensemble of unfolded spectra")
    p.add_argument("--n", type=int, required=True, help="matrix dimension")
    p.add_argument("--count", type=int, required=True, help="number of realizations")
    p.add_argument("--xi", type=float, required=True, help="crossover strength")
    p.add_argument("--phi", type=float, default=1.0, help="observed fraction")
    p.add_argument("--seed", type=int, required=True, help="master seed")
    p.add_argument("--bulk", type=float, default=0.6, help="central fraction kept")
    p.add_argument("--unfolding", choices=("polynomial", "semicircle"),
                   default="polynomial")
    p.add_argument("--degree", type=int, default=7, help="unfolding polynomial degree")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="ensemble", help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", help="empirical statistics of level files")
    p.add_argument("--in", dest="inputs", required=True, help="glob of level files")
    p.add_argument("--stats", default="nn,sigma2,delta3,power",
                   help="comma list: nn,sigma2,delta3,power")
    p.add_argument("--nn-bin", type=float, default=0.2, help="spacing histogram bin")
    p.add_argument("--lgrid", type=_parse_grid, default="0.5:10:0.25",
                   help="interval lengths start:stop:step")
    p.add_argument("--ncommon", default="AUTO",
                   help="common level count for the power spectrum, or AUTO")
    p.add_argument("--out", default="stats", help="output directory")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("theory", help="sample an analytic curve to CSV")
    p.add_argument("--xi", type=float, required=True)
    p.add_argument("--phi", type=float, default=1.0)
    p.add_argument("--curve", choices=("ps", "sigma2", "delta3", "power", "y2", "K"),
                   required=True)
    p.add_argument("--grid", type=_parse_grid, required=True, help="start:stop:step")
    p.add_argument("--model-dim", type=int, default=500,
                   help="matrix dimension for the gap-density fits (ps only)")
    p.add_argument("--model-count", type=int, default=500)
    p.add_argument("--model-seed", type=int, default=715)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="theory.csv")
    p.set_defaults(func=_cmd_theory)

    p = sub.add_parser("fit", help="estimate phi or xi from a statistic CSV")
    fit_sub = p.add_subparsers(dest="parameter", required=True)
    fp = fit_sub.add_parser("phi", help="observed fraction from the power spectrum")
    fp.add_argument("--power", required=True, help="power-spectrum CSV")
    fp.add_argument("--xi", type=float, required=True, help="fixed crossover strength")
    fp.add_argument("--trange", type=_parse_range, default=(0.02, 0.3),
                    help="fit window lo:hi in scaled frequency")
    fp.add_argument("--out", default=None, help="JSON output path (default stdout)")
    fp.set_defaults(func=_cmd_fit, parameter="phi")
    fx = fit_sub.add_parser("xi", help="crossover strength from the number variance")
    fx.add_argument("--sigma2", required=True, help="number-variance CSV")
    fx.add_argument("--phi", type=float, required=True, help="fixed observed fraction")
    fx.add_argument("--lrange", type=_parse_range, default=(0.5, 5.0),
                    help="fit window lo:hi in interval length")
    fx.add_argument("--out", default=None)
    fx.set_defaults(func=_cmd_fit, parameter="xi")

    p = sub.add_parser("unfold", help="unfold measured frequencies (smooth count)")
    p.add_argument("--in", dest="inputs", required=True, help="level file")
    p.add_argument("--unit", choices=tuple(_UNIT_FLAGS), default="ghz")
    p.add_argument("--area", type=float, required=True, help="cavity area in m^2")
    p.add_argument("--perimeter", type=float, required=True, help="perimeter in m")
    p.add_argument("--sign", choices=("minus", "plus"), default="minus")
    p.add_argument("--const", type=float, default=0.0, help="constant offset")
    p.add_argument("--calibrate", action="store_true",
                   help="shift so the first level maps to 0.5")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_unfold)

    p = sub.add_parser("crosscorr", help="windowed S-matrix cross-correlation")
    p.add_argument("--in", dest="inputs", required=True, help="S-parameter CSV")
    p.add_argument("--window", type=float, default=1.0, help="window width in GHz")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_crosscorr)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
