"""Command-line surface.

Subcommands: simulate, estimate, btr, bench, cable-sens. Every subcommand
accepts --config with a flat JSON object; explicit flags override config
keys, which override built-in defaults.

Exit codes: 0 success, 2 configuration problem (including argparse usage
errors), 3 unusable input data, 4 estimator failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict

import numpy as np

from .arrays import ArrayGeometry, build_dictionary, half_wavelength_spacing, \
    uniform_line_array
from .bench import PRESETS, run_monte_carlo
from .broadband import broadband_estimate, btr
from .cable import FiberSpec, MandrelSpec, cable_sensitivity, \
    mandrel_radial_displacement
from .errors import ConfigError, DataError, EstimationError, ToolkitError
from .estimators import SolverConfig, cbf_spectrum, music_spectrum, peak_pick, \
    qspice_solve, _pick
from .recordio import load_config, load_record, render_table, save_record, \
    save_table, save_timing_table, scenario_from_dict, write_gnuplot
from .refine import RefineConfig, gnr2_estimate
from .simulate import NoiseModel, SourceSpec, synthesize

JOBS_ENV = "DASDOA_JOBS"


def _floats(text: str):
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers, got {text!r}")


def _names(text: str):
    return tuple(part.strip() for part in text.split(",") if part.strip())


class _Options:
    """Layered lookup: command-line flag, then config file, then default."""

    def __init__(self, args):
        self.args = args
        self.config = load_config(args.config) if args.config else {}

    def get(self, key, default=None):
        flag = getattr(self.args, key, None)
        if flag is not None:
            return flag
        return self.config.get(key, default)


def _solver_config(opt: _Options) -> SolverConfig:
    return SolverConfig(r=opt.get("r", 1.0), q=opt.get("q", 2.0),
                        max_iter=int(opt.get("max_iter", 500)),
                        rel_tol=opt.get("rel_tol", 1e-6))


def _refine_config(opt: _Options) -> RefineConfig:
    return RefineConfig(initial_step=opt.get("initial_step", 1.0),
                        target_step=opt.get("target_step", 0.05))


def _geometry(opt: _Options, n_channels: int, frequency) -> ArrayGeometry:
    offsets = opt.get("offsets")
    spacing = opt.get("spacing")
    speed = opt.get("sound_speed", 1500.0)
    if spacing is None:
        spacing = (half_wavelength_spacing(frequency, speed)
                   if frequency else 0.75)
    if offsets is not None:
        geom = ArrayGeometry(np.asarray(offsets, dtype=float), spacing, speed)
        if geom.n_elements != n_channels:
            raise ConfigError(f"geometry has {geom.n_elements} offsets but the "
                              f"record has {n_channels} channels")
        return geom
    return uniform_line_array(n_channels, spacing, speed)


# -----------------------------
# simulate
# -----------------------------
def _cmd_simulate(args) -> int:
    opt = _Options(args)
    kind = opt.get("kind", "tonal")
    angles = tuple(opt.get("angles", (2.36, 27.62)))
    powers = tuple(opt.get("powers", (1.0,) * len(angles)))
    rate = opt.get("rate", 6000.0)
    frequency = opt.get("frequency", 3000.0)
    if kind == "tonal":
        freqs = tuple(opt.get("freqs",
                              tuple(frequency + 100.0 * i
                                    for i in range(len(angles)))))
        samples = int(opt.get("samples", 60))
    else:
        freqs = tuple(opt.get("freqs", ()))
        samples = int(opt.get("samples", round(2 * rate)))
    band = tuple(opt.get("band", (100.0, 1000.0)))
    lines = opt.get("lines", ())
    lines = tuple(tuple(tuple(p) for p in src) for src in lines)
    sources = SourceSpec(kind, angles, powers, freqs=freqs,
                         snapshot_rate=rate, band=band, lines=lines)

    noise_kind = opt.get("noise", "uniform-gaussian")
    if noise_kind == "none":
        model, snr = None, None
    else:
        diag = tuple(opt.get("noise_diag", ()))
        model = NoiseModel(noise_kind, sigma2=opt.get("sigma2", 1.0),
                           diag=diag, alpha=opt.get("alpha", 1.2),
                           gamma=opt.get("gamma", 1.0))
        snr = opt.get("snr", 5.0)

    n_elem = int(opt.get("elements", 12))
    geometry = _geometry(opt, n_elem, frequency if kind == "tonal" else None)
    rng = np.random.default_rng(int(opt.get("seed", 0)))
    block = synthesize(geometry, sources, model, snr, samples, rng,
                       dictionary_frequency=frequency,
                       convention=opt.get("convention", "broadside"))
    save_record(block, args.out, opt.get("format", "binary"))
    print(f"wrote {args.out}: {block.n_channels} channels x "
          f"{block.n_samples} samples ({block.domain})")
    return 0


# -----------------------------
# estimate
# -----------------------------
def _narrowband_estimate(r_hat, dictionary, estimator, k, opt: _Options):
    if estimator == "cbf":
        spectrum = cbf_spectrum(r_hat, dictionary)
        est = peak_pick(spectrum, k, opt.get("peak_guard", 1.0)) if k else ((), False)
    elif estimator == "music":
        if not k:
            raise ConfigError("music needs the source count --k")
        spectrum = music_spectrum(r_hat, dictionary, k)
        est = peak_pick(spectrum, k)
    else:
        r, q = (1.0, 1.0) if estimator == "spice" else (None, None)
        scfg = _solver_config(opt)
        if r is not None:
            scfg = SolverConfig(r=r, q=q, max_iter=scfg.max_iter,
                                rel_tol=scfg.rel_tol)
        res = qspice_solve(r_hat, dictionary, scfg)
        spectrum = res.spectrum
        est = (_pick(res.powers.signal, dictionary.angles, k)
               if k else ((), False))
    return spectrum, est


def _cmd_estimate(args) -> int:
    opt = _Options(args)
    record = load_record(args.input, opt.get("format", "binary"))
    estimator = opt.get("estimator", "qspice")
    k = opt.get("k")
    k = int(k) if k is not None else None
    convention = opt.get("convention", "broadside")
    sector = opt.get("sector")
    step = opt.get("step", 1.0 if estimator == "gnr2" else 0.5)

    if record.domain == "time":
        frequency = opt.get("frequency")
        geometry = _geometry(opt, record.n_channels, frequency)
        select = opt.get("select_bins")
        spectrum, estimates = broadband_estimate(
            record, geometry, bins=tuple(opt.get("band", (50.0, 1050.0))),
            n_fft=int(opt.get("n_fft", 512)), estimator=estimator, k=k,
            sector=tuple(sector) if sector else None, step=step,
            convention=convention,
            select_count=int(select) if select else None,
            solver_cfg=_solver_config(opt), refine_cfg=_refine_config(opt))
        shortfall = bool(k) and len(estimates) < k
        if estimator != "gnr2" and k:
            estimates, shortfall = peak_pick(spectrum, k)
    else:
        frequency = opt.get("frequency")
        if frequency is None:
            raise ConfigError("snapshot-domain records need --frequency for "
                              "the steering dictionary")
        geometry = _geometry(opt, record.n_channels, frequency)
        if sector is None:
            sector = (-90.0, 90.0) if convention == "broadside" else (0.0, 180.0)
        r_hat = record.data @ record.data.conj().T / record.n_samples
        if estimator == "gnr2":
            if not k:
                raise ConfigError("gnr2 needs the source count --k")
            res = gnr2_estimate(r_hat, geometry, frequency, k, tuple(sector),
                                convention, _solver_config(opt),
                                _refine_config(opt))
            spectrum, (estimates, shortfall) = res.spectrum, (res.angles,
                                                              res.shortfall)
        else:
            dictionary = build_dictionary(geometry, frequency, tuple(sector),
                                          step, convention)
            spectrum, (estimates, shortfall) = _narrowband_estimate(
                r_hat, dictionary, estimator, k, opt)

    if args.out:
        save_table(spectrum, args.out)
        if args.gnuplot:
            write_gnuplot(args.out, args.out + ".gp", "spectrum")
    if k:
        if shortfall:
            raise EstimationError(
                f"{estimator} resolved {len(estimates)} of {k} sources")
        print("angles_deg: " + " ".join(f"{a:.4f}" for a in estimates))
    elif not args.out:
        print(f"spectrum: {spectrum.angles.size} points "
              f"({spectrum.estimator}); use --out to save it")
    return 0


# -----------------------------
# btr
# -----------------------------
def _cmd_btr(args) -> int:
    opt = _Options(args)
    record = load_record(args.input, opt.get("format", "binary"))
    estimator = opt.get("estimator", "cbf")
    k = opt.get("k")
    k = int(k) if k is not None else None
    sector = opt.get("sector")
    select = opt.get("select_bins")
    geometry = _geometry(opt, record.n_channels, None)
    result = btr(record, geometry, bins=tuple(opt.get("band", (50.0, 1050.0))),
                 n_fft=int(opt.get("n_fft", 512)),
                 frame_seconds=opt.get("frame_seconds", 1.0),
                 frame_hop_fraction=opt.get("hop_fraction", 0.5),
                 estimator=estimator, k=k,
                 sector=tuple(sector) if sector else None,
                 step=opt.get("step", 1.0),
                 convention=opt.get("convention", "broadside"),
                 select_count=int(select) if select else None,
                 solver_cfg=_solver_config(opt),
                 refine_cfg=_refine_config(opt))
    save_table(result, args.out)
    if args.gnuplot:
        write_gnuplot(args.out, args.out + ".gp", "btr")
    print(f"wrote {args.out}: {len(result.times)} frames x "
          f"{result.angles.size} bearings ({result.estimator})")
    return 0


# -----------------------------
# bench
# -----------------------------
def _cmd_bench(args) -> int:
    base = asdict(PRESETS[args.preset]()) if args.preset else {}
    if args.config:
        base.update(load_config(args.config))
    for key in ("trials", "seed"):
        value = getattr(args, key)
        if value is not None:
            base[key] = value
    if args.methods is not None:
        base["methods"] = args.methods
    if args.sweep_values is not None:
        base["sweep_values"] = args.sweep_values
    cfg = scenario_from_dict(base)
    jobs = args.jobs if args.jobs else int(os.environ.get(JOBS_ENV, "1"))
    result = run_monte_carlo(cfg, jobs=jobs)
    if args.out:
        save_table(result, args.out)
        if args.gnuplot:
            write_gnuplot(args.out, args.out + ".gp", "bench")
        print(f"wrote {args.out}: {len(result.rows)} rows "
              f"(config {result.digest})")
    else:
        sys.stdout.write(render_table(result))
    if args.timing_out:
        save_timing_table(result, args.timing_out)
        print(f"wrote {args.timing_out}")
    return 0


# -----------------------------
# cable-sens
# -----------------------------
def _cmd_cable(args) -> int:
    opt = _Options(args)
    mandrel = MandrelSpec(
        inner_radius=opt.get("inner_radius", 4.0e-3),
        outer_radius=opt.get("outer_radius", 8.0e-3),
        poisson_ratio=opt.get("poisson_ratio", 0.4),
        youngs_modulus=opt.get("youngs_modulus", 1.0e9),
        p1=opt.get("p1", 0.0), p2=opt.get("p2", 1.0))
    fiber = FiberSpec(
        refractive_index=opt.get("refractive_index", 1.468),
        wavelength=opt.get("wavelength", 1550e-9),
        wound_length=opt.get("wound_length", 6.3),
        cable_length=opt.get("cable_length", 1.0))
    dr = mandrel_radial_displacement(mandrel)
    sens = cable_sensitivity(mandrel, fiber)
    print(f"radial_displacement_m: {dr:.6e}")
    print(f"sensitivity_db_re_1rad_per_uPa_m: {sens:.2f}")
    return 0


# -----------------------------
# Parser
# -----------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dasdoa",
        description="Broadband direction-of-arrival toolkit for line arrays.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic record")
    sim.add_argument("--config", help="JSON file with option keys")
    sim.add_argument("--out", required=True)
    sim.add_argument("--format", choices=("binary", "csv"))
    sim.add_argument("--kind", choices=("tonal", "propeller-broadband"))
    sim.add_argument("--angles", type=_floats)
    sim.add_argument("--powers", type=_floats)
    sim.add_argument("--freqs", type=_floats)
    sim.add_argument("--band", type=_floats, help="f_lo,f_hi for propeller")
    sim.add_argument("--rate", type=float)
    sim.add_argument("--frequency", type=float, help="tonal carrier Hz")
    sim.add_argument("--elements", type=int)
    sim.add_argument("--spacing", type=float, help="element spacing in m")
    sim.add_argument("--samples", type=int)
    sim.add_argument("--snr", type=float)
    sim.add_argument("--noise", choices=("none", "uniform-gaussian",
                                         "nonuniform-gaussian", "impulsive-sas"))
    sim.add_argument("--noise-diag", dest="noise_diag", type=_floats)
    sim.add_argument("--alpha", type=float)
    sim.add_argument("--seed", type=int)
    sim.set_defaults(fn=_cmd_simulate)

    est = sub.add_parser("estimate", help="bearing spectrum from a record")
    est.add_argument("--config")
    est.add_argument("--input", required=True)
    est.add_argument("--format", choices=("binary", "csv"))
    est.add_argument("--estimator", choices=("cbf", "music", "spice",
                                             "qspice", "gnr2"))
    est.add_argument("--k", type=int, help="source count (enables peak picking)")
    est.add_argument("--frequency", type=float)
    est.add_argument("--band", type=_floats)
    est.add_argument("--n-fft", dest="n_fft", type=int)
    est.add_argument("--select-bins", dest="select_bins", type=int)
    est.add_argument("--sector", type=_floats)
    est.add_argument("--step", type=float)
    est.add_argument("--convention", choices=("broadside", "endfire"))
    est.add_argument("--spacing", type=float)
    est.add_argument("--offsets", type=_floats)
    est.add_argument("--out", help="write the spectrum as CSV")
    est.add_argument("--gnuplot", action="store_true")
    est.set_defaults(fn=_cmd_estimate)

    btr_p = sub.add_parser("btr", help="bearing-time record from a time record")
    btr_p.add_argument("--config")
    btr_p.add_argument("--input", required=True)
    btr_p.add_argument("--format", choices=("binary", "csv"))
    btr_p.add_argument("--estimator", choices=("cbf", "music", "spice",
                                               "qspice", "gnr2"))
    btr_p.add_argument("--k", type=int)
    btr_p.add_argument("--band", type=_floats)
    btr_p.add_argument("--n-fft", dest="n_fft", type=int)
    btr_p.add_argument("--select-bins", dest="select_bins", type=int)
    btr_p.add_argument("--frame-seconds", dest="frame_seconds", type=float)
    btr_p.add_argument("--hop-fraction", dest="hop_fraction", type=float)
    btr_p.add_argument("--sector", type=_floats)
    btr_p.add_argument("--step", type=float)
    btr_p.add_argument("--convention", choices=("broadside", "endfire"))
    btr_p.add_argument("--spacing", type=float)
    btr_p.add_argument("--offsets", type=_floats)
    btr_p.add_argument("--out", required=True)
    btr_p.add_argument("--gnuplot", action="store_true")
    btr_p.set_defaults(fn=_cmd_btr)

    ben = sub.add_parser("bench", help="Monte Carlo accuracy benchmark")
    ben.add_argument("--preset", choices=sorted(PRESETS))
    ben.add_argument("--config", help="JSON with ScenarioConfig keys")
    ben.add_argument("--trials", type=int)
    ben.add_argument("--seed", type=int)
    ben.add_argument("--methods", type=_names)
    ben.add_argument("--sweep-values", dest="sweep_values", type=_floats)
    ben.add_argument("--jobs", type=int,
                     help=f"worker processes (default ${JOBS_ENV} or 1)")
    ben.add_argument("--out", help="metrics CSV path (default: stdout)")
    ben.add_argument("--timing-out", dest="timing_out",
                     help="wall-clock CSV path (non-deterministic)")
    ben.add_argument("--gnuplot", action="store_true")
    ben.set_defaults(fn=_cmd_bench)

    cab = sub.add_parser("cable-sens", help="spiral cable pressure sensitivity")
    cab.add_argument("--config")
    cab.add_argument("--inner-radius", dest="inner_radius", type=float)
    cab.add_argument("--outer-radius", dest="outer_radius", type=float)
    cab.add_argument("--poisson", dest="poisson_ratio", type=float)
    cab.add_argument("--modulus", dest="youngs_modulus", type=float)
    cab.add_argument("--p1", type=float)
    cab.add_argument("--p2", type=float)
    cab.add_argument("--index", dest="refractive_index", type=float)
    cab.add_argument("--wavelength", type=float)
    cab.add_argument("--wound-length", dest="wound_length", type=float)
    cab.add_argument("--cable-length", dest="cable_length", type=float)
    cab.set_defaults(fn=_cmd_cable)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except EstimationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ToolkitError as exc:           # future subtypes
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
