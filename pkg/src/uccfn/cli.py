"""Experiment runner: turns configs into CSV curves, surfaces and reports.

Subcommands: simulate, analyze, ablation, figure <id>, sweep, compare, report.
Exit codes: 0 ok, 1 validation, 2 numerics, 3 I/O.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, analytic, inversion, simulator
from .config import (SystemParams, ValidationError, db_to_linear, derive,
                     load_params, params_digest, validate)
from .inversion import (DistCurve, NumericsError, default_theta_grid_db,
                        default_theta_p_grid_dbm, read_curve_csv,
                        write_curve_csv, write_surface_csv)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICS, EXIT_IO = 0, 1, 2, 3

# caption parameter sets of the reproduced experiments
FIGURE_PRESETS = {
    "fig3": dict(p_t=0.1, freq=3e9, alpha=2.5, r0=1.0, r1=100.0,
                 n_av_R=4.0, n_av_U=2.5, m=4, n0=0.0),
    "fig5": dict(p_t=0.1, freq=4e9, alpha=2.5, r0=1.0, r1=100.0,
                 n_av_R=None, n_av_U=0.5, m=1, n0=0.0),
}
FIG5_DENSITIES = (2.0, 8.0, 18.0, 28.0)
FIG6_THETAS_DB = (-10.0, -5.0, 0.0, 5.0, 10.0)
FIG8_DENSITIES = (1.0, 6.0, 30.0)
FIG9_DENSITIES = (1.0, 2.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 30.0)
FIG9_POINTS = ((5.0, -55.0), (10.0, -52.0))


def _preset_params(name, n_av_R=None):
    base = dict(FIGURE_PRESETS["fig3" if name == "fig3" else "fig5"])
    if n_av_R is not None:
        base["n_av_R"] = n_av_R
    return validate(SystemParams.from_cluster_averages(**base))


def _theta_grid(args):
    return np.arange(args.theta_min, args.theta_max + args.theta_step / 2,
                     args.theta_step)


def _theta_p_grid(args):
    return np.arange(args.thetap_min, args.thetap_max + args.thetap_step / 2,
                     args.thetap_step)


def _meta(params, args, **extra):
    meta = {"params": params_digest(params), "seed": getattr(args, "seed", 0),
            "version": __version__}
    meta.update(extra)
    return meta


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit_plot_script(out: Path, files):
    lines = ["# gnuplot-style view of the emitted curves",
             "set datafile separator ','", "set key autotitle columnhead"]
    lines += [f"plot '{f.name}' using 1:2 with lines" for f in files]
    (out / "view.gp").write_text("\n".join(lines) + "\n")


def _analytic_coverage_db(params, grid_db, variant="full") -> DistCurve:
    curve = inversion.coverage_probability_variant(
        params, db_to_linear(np.asarray(grid_db, float)), variant)
    return DistCurve(np.asarray(grid_db, float), curve.values,
                     "coverage_ccdf", "dB", meta=curve.meta)


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_simulate(args):
    params = load_params(args.config)
    out = _outdir(args)
    model = "gamma_approx" if args.model == "gamma" else args.model
    stats = simulator.run_trials(params, args.trials, model=model,
                                 seed=args.seed, theta_grid_db=_theta_grid(args),
                                 theta_p_grid_dbm=_theta_p_grid(args),
                                 n_jobs=args.jobs)
    simulator.write_samples_csv(stats, out / f"samples_{model}.csv")
    for curve, name in ((stats.rate_ccdf, "rate_ccdf"), (stats.ipd_cdf, "ipd_cdf")):
        curve.meta.update(_meta(params, args, model=model, trials=args.trials))
        write_curve_csv(curve, out / f"{name}_{model}.csv")
    print(f"simulate: {args.trials} trials ({model}) -> {out}")
    return EXIT_OK


def cmd_analyze(args):
    params = load_params(args.config)
    out = _outdir(args)
    cov = _analytic_coverage_db(params, _theta_grid(args))
    cov.meta.update(_meta(params, args, variant="full"))
    write_curve_csv(cov, out / "coverage_analytic.csv")
    ipd = inversion.ipd_distribution(params, _theta_p_grid(args))
    ipd.meta.update(_meta(params, args))
    write_curve_csv(ipd, out / "ipd_cdf_analytic.csv")
    m1, v1 = analytic.moments_signal_plus_intra(params)
    m2, v2 = analytic.moments_inter_cluster(params)
    mt, vt = analytic.moments_total_power(params)
    mpath = out / "moments.csv"
    mpath.write_text(
        "component,mean_w,variance_w2\n"
        f"signal_plus_intra,{m1:.10g},{v1:.10g}\n"
        f"inter_cluster,{m2:.10g},{v2:.10g}\n"
        f"total,{mt:.10g},{vt:.10g}\n")
    if args.plot_script:
        _emit_plot_script(out, [out / "coverage_analytic.csv",
                                out / "ipd_cdf_analytic.csv"])
    print(f"analyze: curves + moments -> {out}")
    return EXIT_OK


def cmd_ablation(args):
    params = load_params(args.config)
    out = _outdir(args)
    variant = args.variant.replace("-", "_").replace("indep_intra",
                                                     "independent_intra")
    curve = _analytic_coverage_db(params, _theta_grid(args), variant)
    curve.meta.update(_meta(params, args, variant=variant))
    path = out / f"coverage_{variant}.csv"
    write_curve_csv(curve, path)
    print(f"ablation: {variant} -> {path}")
    return EXIT_OK


def cmd_figure(args):
    out = _outdir(args)
    grid_db = _theta_grid(args)
    grid_dbm = _theta_p_grid(args)
    files = []
    if args.id == "fig3":
        params = _preset_params("fig3")
        stats = simulator.run_trials(params, args.trials, model="exact",
                                     seed=args.seed, theta_grid_db=grid_db,
                                     theta_p_grid_dbm=grid_dbm, n_jobs=args.jobs)
        stats.rate_ccdf.meta.update(_meta(params, args, model="exact",
                                          trials=args.trials))
        write_curve_csv(stats.rate_ccdf, out / "fig3_coverage_exact_mc.csv")
        files.append(out / "fig3_coverage_exact_mc.csv")
        for variant in ("full", "no_intra", "independent_intra"):
            curve = _analytic_coverage_db(params, grid_db, variant)
            curve.meta.update(_meta(params, args, variant=variant))
            path = out / f"fig3_coverage_{variant}.csv"
            write_curve_csv(curve, path)
            files.append(path)
    elif args.id == "fig5":
        for nav in FIG5_DENSITIES:
            params = _preset_params("fig5", nav)
            ipd = inversion.ipd_distribution(params, grid_dbm)
            ipd.meta.update(_meta(params, args, n_av_R=nav))
            write_curve_csv(ipd, out / f"fig5_ipd_cdf_nav{nav:g}.csv")
            cov = _analytic_coverage_db(params, grid_db)
            cov.meta.update(_meta(params, args, n_av_R=nav))
            write_curve_csv(cov, out / f"fig5_coverage_nav{nav:g}.csv")
            files += [out / f"fig5_ipd_cdf_nav{nav:g}.csv",
                      out / f"fig5_coverage_nav{nav:g}.csv"]
    elif args.id == "fig6":
        params = _preset_params("fig5", 8.0)
        p_r = _analytic_coverage_db(params, grid_db)
        p_e = inversion.ipd_distribution(params, grid_dbm)
        _, g = inversion.frechet_bounds(p_r, p_e)
        g.meta.update(_meta(params, args, n_av_R=8.0))
        write_surface_csv(g, out / "fig6_iso_G_bounds_nav8.csv")
        files.append(out / "fig6_iso_G_bounds_nav8.csv")
        params = _preset_params("fig5", 4.0)
        p_r = _analytic_coverage_db(params, np.asarray(FIG6_THETAS_DB))
        p_e = inversion.ipd_distribution(params, grid_dbm)
        _, g = inversion.frechet_bounds(p_r, p_e)
        g.meta.update(_meta(params, args, n_av_R=4.0))
        write_surface_csv(g, out / "fig6_G_vs_thetap_nav4.csv")
        files.append(out / "fig6_G_vs_thetap_nav4.csv")
    elif args.id == "fig8":
        for nav in FIG8_DENSITIES:
            params = _preset_params("fig5", nav)
            p_r = _analytic_coverage_db(params, grid_db)
            p_e = inversion.ipd_distribution(params, grid_dbm)
            _, g = inversion.frechet_bounds(p_r, p_e)
            g.meta.update(_meta(params, args, n_av_R=nav))
            path = out / f"fig8_G_bounds_nav{nav:g}.csv"
            write_surface_csv(g, path)
            files.append(path)
    elif args.id == "fig9":
        rows = _density_sweep(FIG9_DENSITIES, FIG9_POINTS, args)
        path = out / "fig9_G_bounds_vs_density.csv"
        _write_sweep(path, rows)
        files.append(path)
    else:
        print(f"unknown figure preset {args.id!r}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.plot_script:
        _emit_plot_script(out, files)
    print(f"figure {args.id}: {len(files)} artifact(s) -> {out}")
    return EXIT_OK


def _density_sweep(densities, points, args):
    rows = []
    for nav in densities:
        params = _preset_params("fig5", nav)
        thetas = sorted({th for th, _ in points})
        p_r = _analytic_coverage_db(params, np.asarray(thetas))
        p_e = inversion.ipd_distribution(
            params, np.asarray(sorted({tp for _, tp in points})))
        for th, tp in points:
            pr = float(p_r.values[list(p_r.thresholds).index(th)])
            pe = float(p_e.values[list(p_e.thresholds).index(tp)])
            rows.append((nav, th, tp, max(0.0, pr + pe - 1.0), min(pr, pe)))
    return rows


def _write_sweep(path, rows):
    with open(path, "w") as fh:
        fh.write("# uccfn-curve,kind=G_bounds_sweep,units=dB,dBm\n")
        fh.write("n_av_R,theta_db,theta_p_dbm,g_lower,g_upper\n")
        for r in rows:
            fh.write(",".join(f"{v:.10g}" for v in r) + "\n")


def cmd_sweep(args):
    if args.config:
        base = load_params(args.config)
        der = derive(base)
        make = lambda nav: validate(base.with_cluster_averages(n_av_R=nav))
    else:
        make = lambda nav: _preset_params("fig5", nav)
    densities = [float(x) for x in args.densities.split(",")]
    rows = []
    for nav in densities:
        params = make(nav)
        p_r = _analytic_coverage_db(params, np.array([args.theta]))
        p_e = inversion.ipd_distribution(params, np.array([args.theta_p]))
        pr, pe = float(p_r.values[0]), float(p_e.values[0])
        rows.append((nav, args.theta, args.theta_p,
                     max(0.0, pr + pe - 1.0), min(pr, pe)))
        print(f"n_av_R={nav:g}: G in [{rows[-1][3]:.4f}, {rows[-1][4]:.4f}]")
    out = _outdir(args)
    path = out / "sweep_G_bounds.csv"
    _write_sweep(path, rows)
    print(f"sweep -> {path}")
    return EXIT_OK


def cmd_compare(args):
    a = read_curve_csv(args.curve_a)
    b = read_curve_csv(args.curve_b)
    if len(a.thresholds) != len(b.thresholds) or \
            not np.allclose(a.thresholds, b.thresholds, rtol=0, atol=1e-9):
        print("compare: threshold grids do not match", file=sys.stderr)
        return EXIT_VALIDATION
    dev = np.abs(a.values - b.values)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        fh.write(f"# uccfn-compare,a={Path(args.curve_a).name},"
                 f"b={Path(args.curve_b).name}\n")
        fh.write("threshold,value_a,value_b,abs_dev\n")
        for t, va, vb, d in zip(a.thresholds, a.values, b.values, dev):
            fh.write(f"{t:.10g},{va:.10g},{vb:.10g},{d:.10g}\n")
    print(f"compare: max dev {dev.max():.6f}, mean dev {dev.mean():.6f} -> {out}")
    return EXIT_OK


def cmd_report(args):
    worst = 0.0
    for path in args.comparisons:
        rows = [line.split(",") for line in
                Path(path).read_text().splitlines()[2:] if line]
        devs = np.array([float(r[3]) for r in rows])
        sup = float(devs.max())
        worst = max(worst, sup)
        verdict = "PASS" if sup <= args.tol else "FAIL"
        print(f"{path}: sup gap {sup:.6f}  mean {devs.mean():.6f}  "
              f"tol {args.tol}  {verdict}")
    if worst > args.tol:
        print(f"report: FAIL (worst sup gap {worst:.6f} > {args.tol})")
        return EXIT_NUMERICS
    print(f"report: PASS (worst sup gap {worst:.6f} <= {args.tol})")
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def _add_grid_flags(p):
    p.add_argument("--theta-min", type=float, default=-10.0,
                   help="SIR threshold grid start (dB)")
    p.add_argument("--theta-max", type=float, default=20.0)
    p.add_argument("--theta-step", type=float, default=0.5)
    p.add_argument("--thetap-min", type=float, default=-70.0,
                   help="power threshold grid start (dBm)")
    p.add_argument("--thetap-max", type=float, default=-30.0)
    p.add_argument("--thetap-step", type=float, default=0.5)


def _add_common(p, config_required=True):
    if config_required:
        p.add_argument("--config", required=True, help="JSON or key=value file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--plot-script", action="store_true",
                   help="also emit a gnuplot-style script")
    _add_grid_flags(p)


def build_parser():
    ap = argparse.ArgumentParser(
        prog="uccfn",
        description="Rate / received-power statistics of user-centric "
                    "cell-free networks: analytic engine + Monte Carlo")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo run")
    _add_common(p)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--model", choices=("exact", "gamma", "gamma_approx"),
                   default="exact")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("analyze", help="closed-form curves and moments")
    _add_common(p)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("ablation", help="interference-modeling variants")
    _add_common(p)
    p.add_argument("--variant", choices=("full", "no-intra", "indep-intra"),
                   default="full")
    p.set_defaults(fn=cmd_ablation)

    p = sub.add_parser("figure", help="caption-parameter presets")
    p.add_argument("id", choices=("fig3", "fig5", "fig6", "fig8", "fig9"))
    _add_common(p, config_required=False)
    p.add_argument("--trials", type=int, default=20_000)
    p.set_defaults(fn=cmd_figure)

    p = sub.add_parser("sweep", help="joint-bound sweep over RRH density")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.add_argument("--metric", choices=("G",), default="G")
    p.add_argument("--theta", type=float, default=5.0, help="dB")
    p.add_argument("--theta-p", dest="theta_p", type=float, default=-55.0,
                   help="dBm")
    p.add_argument("--densities", default="1,2,4,6,8,12,16,24,30")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("compare", help="overlay two curves on one grid")
    p.add_argument("curve_a")
    p.add_argument("curve_b")
    p.add_argument("--out", default="comparison.csv")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("report", help="pass/fail deviation summary")
    p.add_argument("comparisons", nargs="+")
    p.add_argument("--tol", type=float, default=0.05)
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericsError as exc:
        print(f"numerics error: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
