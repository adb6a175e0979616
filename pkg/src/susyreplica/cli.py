"""Command-line entry point.

Exit codes: 0 success, 1 a check failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import correlation as corr
from . import goemc
from . import hierarchy as hier
from . import partition as part
from .config import ConfigError, RunConfig
from .io import manifest, write_csv, write_json
from .quadrature import ConvergenceError, HalfLineContour, gauss_legendre_rule

log = logging.getLogger("susyreplica")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _pmap(fn, items, threads: int):
    """Ordered map, in a process pool when ``threads > 1``."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _numerics(cfg: RunConfig):
    rule = gauss_legendre_rule(cfg["quad.finite_order"])
    contour = HalfLineContour(cfg["quad.halfline_order"], cfg["quad.halfline_panels"], cfg["quad.u_max"])
    return rule, contour


# ---------------------------------------------------------------------------
# constants


def cmd_constants(cfg: RunConfig, out: Path) -> int:
    rows = []
    for m in range(1, part.MAX_FERMIONIC + 1):
        rows.append(("fermionic", m, part.constant_fermionic(m), part.log_constant_fermionic(m),
                     "log-gamma telescoping of the Barnes G ratio"))
    for m in range(1, part.MAX_BOSONIC + 1):
        rows.append(("bosonic", m, part.constant_bosonic(m), part.log_constant_bosonic(m),
                     "product of Gamma(j/2)^2"))
    print(f"{'kind':<10} {'m':>2} {'value':>24} {'log value':>22}")
    for kind, m, v, lv, _ in rows:
        print(f"{kind:<10} {m:>2} {v:>24.16e} {lv:>22.15f}")
    write_csv(out / "constants.csv", ["kind", "m", "value", "log_value", "derivation"], rows,
              manifest(cfg, "constants"))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _pfkp_job(args):
    n, interval, degree, points, gauge, finite_order, contour_params = args
    rule = gauss_legendre_rule(finite_order)
    contour = HalfLineContour(*contour_params)
    kw = {"rule": rule} if n > 0 else {"contour": contour}
    fits = hier.RecursionFits.build(n, interval, degree, **kw)
    out = []
    for w in points:
        r = hier.pfkp_residual(n, w, fits, gauge=gauge)
        if gauge != 1.0:
            ref = hier.pfkp_residual(n, w, fits)
            r.details["rhs_inflation"] = abs(r.rhs) / abs(ref.rhs)
        out.append(r)
    return out


def _suite_pfkp(cfg: RunConfig):
    rule, contour = _numerics(cfg)
    cparams = (contour.order, contour.panels, contour.u_max)
    jobs = []
    for n, key in ((1, "cheb.interval_fermionic"), (-1, "cheb.interval_bosonic")):
        a, b = cfg[key]
        pts = np.linspace(a, b, cfg["pfkp.points"] + 2)[1:-1]
        jobs.append((n, (a, b), cfg["cheb.degree"], pts, cfg["pfkp.gauge"], cfg["quad.finite_order"], cparams))
    results = []
    for reports in _pmap(_pfkp_job, jobs, cfg["run.threads"]):
        for r in reports:
            ok = r.passed and r.normalized_residual <= cfg["pfkp.tol"]
            results.append((r, True, ok))
    for w in (0.5, 1.0):
        r = hier.pfkp_residual(0, w)
        results.append((r, True, r.passed))
    return results


def _failed_report(identity, point, exc):
    """A check that could not be evaluated counts as failed, with the reason attached."""
    return hier.ResidualReport(identity, point, complex("nan"), complex("nan"), math.nan, 0.0, False,
                               {"error": f"{type(exc).__name__}: {exc}", "measured_order": math.nan})


_EVAL_ERRORS = (ValueError, ZeroDivisionError, ConvergenceError)


def _tau_job(args):
    kind, m, s, h, finite_order, cparams = args
    rule = gauss_legendre_rule(finite_order)
    contour = HalfLineContour(*cparams)
    fn = hier.pfkp1_residual if kind == "pfkp1" else hier.pfkp2_residual
    try:
        return fn(m, s, h=h, contour=contour, rule=rule)
    except _EVAL_ERRORS as exc:
        return _failed_report(kind, {"m": m, "s": s}, exc)


def _s_list(cfg, key):
    if key == "tau.s_fermionic":
        return [complex(a, b) for a, b in cfg[key]]
    return [complex(float(x)) for x in cfg[key]]


def _suite_tau(cfg: RunConfig):
    rule, contour = _numerics(cfg)
    cparams = (contour.order, contour.panels, contour.u_max)
    jobs = [(k, 1, s, cfg["fd.h_high"], cfg["quad.finite_order"], cparams)
            for s in _s_list(cfg, "tau.s_fermionic") for k in ("pfkp1", "pfkp2")]
    # m = 0 ties one bosonic and one fermionic flavour; reported, not counted
    jobs += [(k, 0, s, cfg["fd.h_high"], cfg["quad.finite_order"], cparams)
             for s in _s_list(cfg, "tau.s_bosonic") for k in ("pfkp1", "pfkp2")]
    results = []
    for job, r in zip(jobs, _pmap(_tau_job, jobs, cfg["run.threads"])):
        counted = job[1] != 0
        results.append((r, counted, r.passed and r.normalized_residual <= cfg["tau.tol"]))
    for m in (1, 2, -1, -2):
        ratio = part.calibrate_projection(m)
        analytic = part.projection_constant(m)
        dev = abs(ratio / analytic - 1.0)
        rep = hier.ResidualReport("projection", {"m": m, "omega": 0.7}, ratio, analytic,
                                  dev, cfg["tau.projection_tol"], dev <= cfg["tau.projection_tol"])
        results.append((rep, True, rep.passed))
    return results


def _vir_job(args):
    m, q, s, form, h, finite_order, cparams = args
    try:
        return hier.virasoro_residual(m, q, s, form, h=h, contour=HalfLineContour(*cparams),
                                      rule=gauss_legendre_rule(finite_order))
    except _EVAL_ERRORS as exc:
        return _failed_report("virasoro", {"m": m, "q": q, "s": s, "form": form}, exc)


def _suite_virasoro(cfg: RunConfig):
    rule, contour = _numerics(cfg)
    cparams = (contour.order, contour.panels, contour.u_max)
    form = cfg["virasoro.form"]
    jobs = [(1, q, s, form, cfg["fd.h"], cfg["quad.finite_order"], cparams)
            for s in _s_list(cfg, "tau.s_fermionic") for q in (-1, 0, 1)]
    jobs += [(-1, q, s, form, cfg["fd.h"], cfg["quad.finite_order"], cparams)
             for s in _s_list(cfg, "tau.s_bosonic") for q in (-1, 0, 1)]
    results = []
    for r in _pmap(_vir_job, jobs, cfg["run.threads"]):
        ok = (r.passed and r.normalized_residual <= cfg["tau.tol"]
              and r.details["measured_order"] >= cfg["fd.min_order"])
        results.append((r, True, ok))
    return results


SUITES = {"pfkp": _suite_pfkp, "tau": _suite_tau, "virasoro": _suite_virasoro}


def cmd_verify(cfg: RunConfig, out: Path, suite: str) -> int:
    names = list(SUITES) if suite == "all" else [suite]
    failed, errors = [], []
    for name in names:
        results = SUITES[name](cfg)
        rows, reports = [], []
        for r, counted, ok in results:
            d = r.to_dict()
            d.update(counted=counted, ok=ok)
            reports.append(d)
            point = ";".join(f"{k}={v}" for k, v in sorted(r.point.items()))
            order = r.details.get("measured_order", math.nan)
            rows.append((name, r.identity, point, r.normalized_residual, r.error_budget, order,
                         int(counted), int(ok)))
            if counted and not ok:
                failed.append((name, r.identity, point, r.normalized_residual, r.error_budget, order))
                if "error" in r.details:
                    errors.append((name, r.identity, point, r.details["error"]))
        meta = manifest(cfg, f"verify {name}")
        write_json(out / f"verify_{name}.json", {"suite": name, "reports": reports}, meta)
        write_csv(out / f"verify_{name}.csv",
                  ["suite", "identity", "point", "residual", "budget", "measured_order", "counted", "pass"],
                  rows, meta)
        n_counted = sum(1 for _, c, _ in results if c)
        n_ok = sum(1 for _, c, ok in results if c and ok)
        print(f"{name}: {n_ok}/{n_counted} checks passed")
    for name, ident, point, res, budget, order in failed:
        print(f"FAIL {name}/{ident} [{point}] residual={res:.3e} budget={budget:.3e} order={order:.3f}",
              file=sys.stderr)
    for name, ident, point, reason in errors:
        print(f"  {name}/{ident} [{point}] not evaluated: {reason}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# curves


def _z_job(args):
    n, omegas, finite_order, cparams = args
    rule = gauss_legendre_rule(finite_order)
    contour = HalfLineContour(*cparams)
    rows = []
    for w in omegas:
        try:
            v = part.z_super(n, w, rule=rule, contour=contour)
            z = v.complex_value
            rows.append((w, z.real, z.imag, v.error_estimate, v.method))
        except (ValueError, ConvergenceError) as exc:
            rows.append((w, math.nan, math.nan, math.nan, f"domain-error: {exc}"))
    return n, rows


def cmd_curves(cfg: RunConfig, out: Path, what: str) -> int:
    res = cfg["curves.resolution"]
    meta = manifest(cfg, f"curves {what}")
    bad = 0
    if what in ("z", "all"):
        rule, contour = _numerics(cfg)
        cparams = (contour.order, contour.panels, contour.u_max)
        omegas = np.linspace(*cfg["curves.z_range"], res)
        jobs = [(n, omegas, cfg["quad.finite_order"], cparams) for n in range(-2, 3)]
        for n, rows in _pmap(_z_job, jobs, cfg["run.threads"]):
            bad += sum(1 for r in rows if str(r[4]).startswith("domain-error"))
            write_csv(out / f"z_n{n:+d}.csv", ["omega", "re", "im", "abs_error", "method"], rows, meta)
        constants = {f"c_plus_{m}": part.constant_fermionic(m) for m in range(1, 4)}
        constants.update({f"c_minus_{m}": part.constant_bosonic(m) for m in range(1, 3)})
        write_json(out / "z_curves.json", {
            "finite_order": cfg["quad.finite_order"],
            "contour": {"order": contour.order, "panels": contour.panels, "u_max": contour.u_max},
            "constants": constants, "n": list(range(-2, 3)), "omega_range": cfg["curves.z_range"],
        }, meta)
        print(f"z curves: 5 files x {res} rows")
    if what in ("r2", "all"):
        grid = np.linspace(*cfg["curves.r2_range"], res)
        table = corr.curve_table(grid, cfg["curves.tail_tol"])
        write_csv(out / "r2_curves.csv", ["omega", "r2_exact", "r2_asymptotic", "r2_factorized", "abs_diff"],
                  table, meta)
        print(f"r2 curves: {res} rows, max route gap {table[:, 4].max():.3e}")
    if bad:
        print(f"{bad} curve points outside the domain", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


# ---------------------------------------------------------------------------
# goemc


def goe_config(cfg: RunConfig) -> goemc.GoeConfig:
    return goemc.GoeConfig(
        N=cfg["goe.N"], samples=cfg["goe.samples"], seed=cfg["goe.seed"], bulk_window=cfg["goe.bulk_window"],
        bin_width=cfg["goe.bin_width"], omega_max=cfg["goe.omega_max"], threads=cfg["run.threads"],
        unfold_scale=cfg["goe.unfold_scale"], density_correction=cfg["goe.density_correction"])


def cmd_goemc(cfg: RunConfig, out: Path) -> int:
    try:
        gc = goe_config(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    t0 = time.perf_counter()
    est = goemc.estimate_r2(gc)
    rep = goemc.compare_to_exact(est, tuple(cfg["goe.compare_range"]))
    # runtime goes to the log only so output files stay bit-identical
    log.info("goemc: %d samples in %.1f s", gc.samples, time.perf_counter() - t0)
    meta = manifest(cfg, "goemc")
    write_csv(out / "goemc_bins.csv", ["bin_center", "r2_estimate", "stderr", "r2_exact_binavg", "zscore"],
              rep.rows(), meta)
    write_json(out / "goemc.json", {
        "config": {k: v for k, v in goemc.config_dict(gc).items() if k != "threads"},
        "statistically_valid": gc.statistically_valid,
        "clipped_levels": est.clipped,
        "empty_bins": est.empty_bins,
        "density": {"mean": est.density.mean, "stderr": est.density.stderr, "zscore": est.density.zscore,
                    "within_2sigma": est.density.within_2sigma},
        "fraction_within_3sigma": rep.fraction_within_3sigma,
        "chi2": rep.chi2, "dof": rep.dof, "mean_zscore": rep.mean_zscore,
        "passed": rep.passed,
    }, meta)
    print(f"goemc: {rep.fraction_within_3sigma:.0%} of bins within 3 sigma, chi2/dof = {rep.chi2 / rep.dof:.2f}, "
          f"bulk density {est.density.mean:.4f} +- {est.density.stderr:.4f}")
    return EXIT_OK if rep.passed else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="YAML/JSON file of dotted keys")
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Monte Carlo seed (u64)")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker processes")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", default=argparse.SUPPRESS,
                        help="override one config key (repeatable)")
    common.add_argument("--print-config", action="store_true", default=argparse.SUPPRESS,
                        help="print the effective configuration and exit")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="susyreplica", parents=[common],
                                description="Replica partition functions, integrable-hierarchy checks "
                                            "and GOE two-level correlations.")
    sub = p.add_subparsers(dest="command")
    sub.add_parser("constants", parents=[common], help="normalisation constants")
    v = sub.add_parser("verify", parents=[common], help="residual suites")
    v.add_argument("--suite", choices=["pfkp", "tau", "virasoro", "all"], default="all")
    c = sub.add_parser("curves", parents=[common], help="partition-function and correlation curves")
    c.add_argument("--what", choices=["z", "r2", "all"], default="all")
    c.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"), default=None,
                   help="omega range (overrides the config range of the selected curves)")
    c.add_argument("--resolution", type=int, default=None, help="points per curve")
    sub.add_parser("goemc", parents=[common], help="GOE Monte Carlo")
    return p


def _effective_config(args) -> RunConfig:
    overrides = list(getattr(args, "set", []) or [])
    if hasattr(args, "seed"):
        overrides.append(f"goe.seed={args.seed}")
    if hasattr(args, "threads"):
        overrides.append(f"run.threads={args.threads}")
    if hasattr(args, "out"):
        overrides.append(f"run.out={args.out}")
    if getattr(args, "resolution", None) is not None:
        overrides.append(f"curves.resolution={args.resolution}")
    if getattr(args, "range", None) is not None:
        lo, hi = args.range
        what = getattr(args, "what", "all")
        if what in ("z", "all"):
            overrides.append(f"curves.z_range=[{lo!r}, {hi!r}]")
        if what in ("r2", "all"):
            overrides.append(f"curves.r2_range=[{lo!r}, {hi!r}]")
    return RunConfig.load(getattr(args, "config", None), overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = _effective_config(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "print_config", False):
        sys.stdout.write(cfg.to_yaml())
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg["run.out"])
    try:
        if args.command == "constants":
            return cmd_constants(cfg, out)
        if args.command == "verify":
            return cmd_verify(cfg, out, args.suite)
        if args.command == "curves":
            return cmd_curves(cfg, out, args.what)
        return cmd_goemc(cfg, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
