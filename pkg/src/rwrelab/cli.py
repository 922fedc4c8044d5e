"""Batch experiment driver.

Subcommands::

    stationarity    shift-series run under a provably stationary weighting
    counterexample  paired runs of the non-unimodular counterexample
    kernel-check    exact global/detailed balance verification on a window
    mtp-check       exact mass-transport identity check
    alili-demo      site profile of the line-walk stationary weight

Every run writes ``results.jsonl`` (one JSON record per estimate),
an optional ``results.csv`` mirror, a ``manifest.json`` sufficient to
reproduce the run bit-exactly, and (unless ``--no-figures``) PNG figures
next to the data.  Exit codes: 0 success; 1 a mathematically guaranteed
property failed; 2 configuration error; 3 convergence/resource error.

``results.jsonl`` content is a deterministic function of the resolved
configuration and seed: reruns agree byte for byte for any worker count.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import json
import os
import sys
from fractions import Fraction

from . import __version__
from .environment import EnvConfig, Environment, derive_seed
from .errors import (ConfigurationError, ConvergenceError, ResourceLimitError,
                     RwreError)
from .montecarlo import (ExperimentConfig, constancy_report, mann_kendall,
                         run_counterexample, run_stationarity)
from .mtp import builtin_transports, mtp_check
from .space import make_space
from .walks import detailed_balance_check, global_balance_check

DEFAULTS = {"tol": 1e-12, "R": [12], "r": 1, "k": 1, "colors": 4,
            "a": 0.6, "b": 0.9, "M": 10000, "N": 20, "mode": "auto"}


def _fresh_seed() -> int:
    return int.from_bytes(os.urandom(8), "little") >> 1


def _parse_radii(text):
    return [int(tok) for tok in str(text).split(",") if tok.strip()]


def _parse_names(text):
    return [tok.strip() for tok in text.split(",") if tok.strip()] or None


def load_config(args) -> ExperimentConfig:
    """Resolve flags over an optional JSON config file (or a manifest).

    Flags override file values; unset fields take the documented defaults.
    The seed is generated, printed and stored when omitted.
    """
    file_cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            data = json.load(fh)
        file_cfg = data.get("config", data)

    def pick(flag, key, default=None):
        v = getattr(args, flag, None)
        if v is not None:
            return v
        if key in file_cfg and file_cfg[key] is not None:
            return file_cfg[key]
        return default

    space = pick("space", "space")
    kernel = pick("kernel", "kernel")
    if not space or not kernel:
        raise ConfigurationError("both a space and a kernel are required")
    env_file = file_cfg.get("env", {})
    p = pick("p", "p", env_file.get("p"))
    a = getattr(args, "a", None)
    b = getattr(args, "b", None)
    if a is None and b is None and env_file.get("site_range"):
        a, b = env_file["site_range"]
    colors = pick("colors", "colors", env_file.get("colors", DEFAULTS["colors"]))
    if kernel == "alili" and a is None and b is None:
        a, b = DEFAULTS["a"], DEFAULTS["b"]
    if (a is None) != (b is None):
        raise ConfigurationError("site parameters need both a and b")
    seed = pick("seed", "seed")
    if seed is None:
        seed = _fresh_seed()
        print(f"seed not given; generated seed={seed}")
    mode = pick("mode", "mode", DEFAULTS["mode"])
    if mode == "auto":
        mode = "general" if make_space(space).kind == "tree-end" else "unimodular"
    radii = pick("R", "cluster_radii", DEFAULTS["R"])
    if isinstance(radii, str):
        radii = _parse_radii(radii)
    observables = pick("observables", "observables")
    if isinstance(observables, str):
        observables = _parse_names(observables)
    representatives = pick("representatives", "representatives")
    if isinstance(representatives, str):
        representatives = [int(t) for t in representatives.split(",") if t.strip()]
    env = EnvConfig(
        seed=seed,
        p_open=None if p is None else float(p),
        site_range=None if a is None else (float(a), float(b)),
        n_colors=None if not colors else int(colors),
    )
    return ExperimentConfig(
        space=space,
        kernel=kernel,
        env=env,
        n_shifts=int(pick("N", "n_shifts", DEFAULTS["N"])),
        n_replicas=int(pick("M", "n_replicas", DEFAULTS["M"])),
        seed=seed,
        mode=mode,
        radius=int(pick("r", "radius", DEFAULTS["r"])),
        horizon=int(pick("k", "horizon", DEFAULTS["k"])),
        cluster_radii=tuple(radii),
        observables=tuple(observables) if observables else None,
        representatives=tuple(representatives) if representatives else None,
        tol=float(pick("tol", "tol", DEFAULTS["tol"])),
    )


def _outdir(args, command, seed) -> str:
    if getattr(args, "outdir", None):
        return args.outdir
    base = os.environ.get("RWRELAB_OUTDIR", "runs")
    return os.path.join(base, f"{command}-seed{seed}")


def write_jsonl(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def write_csv(path, records):
    if not records:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(records[0].keys()))
        writer.writeheader()
        for rec in records:
            writer.writerow({k: json.dumps(v) if isinstance(v, list) else v
                             for k, v in rec.items()})


def write_manifest(outdir, command, config_dict, outputs, workers, extra=None):
    manifest = {
        "tool": "rwrelab",
        "version": __version__,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "command": command,
        "workers": workers,
        "config": config_dict,
        "outputs": outputs,
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def _balance_precheck(cfg: ExperimentConfig):
    """Verify the stationarity hypothesis exactly on one sampled window."""
    space, ks = cfg.build()
    env = Environment(dataclasses.replace(cfg.env, seed=derive_seed(cfg.seed, 0)),
                      space)
    radius = 20 if space.degree == 2 else 4
    window = list(space.ball(space.origin, radius))
    tol = 1e-9 if cfg.kernel == "alili" else 1e-12
    return global_balance_check(ks, env, window, tol=tol, nu_tol=cfg.tol)


def _emit_run(args, command, cfg, records, figure_fn, extra_manifest=None):
    outdir = _outdir(args, command, cfg.seed)
    os.makedirs(outdir, exist_ok=True)
    jsonl = os.path.join(outdir, "results.jsonl")
    write_jsonl(jsonl, records)
    outputs = {"results_jsonl": jsonl}
    if not getattr(args, "no_csv", False):
        csv_path = os.path.join(outdir, "results.csv")
        write_csv(csv_path, records)
        outputs["results_csv"] = csv_path
    if not getattr(args, "no_figures", False):
        outputs["figures"] = figure_fn(outdir)
    write_manifest(outdir, command, cfg.as_dict(), outputs,
                   getattr(args, "workers", 1), extra_manifest)
    print(f"wrote {len(records)} records to {jsonl}")
    return outdir


def _cmd_stationarity(args) -> int:
    cfg = load_config(args)
    precheck = _balance_precheck(cfg)
    if not precheck.passed:
        print(f"balance pre-check FAILED: max residual {precheck.max_residual:.3e}; "
              f"x -> m(x) nu(x) is not stationary for this configuration",
              file=sys.stderr)
        return 1
    series = run_stationarity(cfg, workers=args.workers)
    records = series.to_records()

    def figures(outdir):
        from .report import render_series_figures

        return render_series_figures(records, os.path.join(outdir, "figures"))

    _emit_run(args, "stationarity", cfg, records, figures,
              {"balance_precheck_max_residual": precheck.max_residual})
    failures = [c for c in constancy_report(series) if not c.passed]
    for c in failures:
        print(f"constancy FAILED for {c.observable}: worst n={c.worst_n} "
              f"at {c.worst_gap_sigmas:.2f} sigma", file=sys.stderr)
    if failures:
        return 1
    print("all observables constant within 3 SE across shifts")
    return 0


def _cmd_counterexample(args) -> int:
    if not getattr(args, "config", None):
        if args.kernel is None:
            args.kernel = "srw-clusters"
        if args.space is None:
            args.space = "tree-end3"
        if args.R is None:
            args.R = "8,12"
        if args.p is None:
            args.p = 2.0 / 3.0
    cfg = load_config(args)
    series_i, series_ii = run_counterexample(cfg, workers=args.workers)
    records = series_i.to_records() + series_ii.to_records()

    def figures(outdir):
        from .report import render_counterexample_figure, render_series_figures

        figdir = os.path.join(outdir, "figures")
        paths = render_counterexample_figure(series_i.to_records(),
                                             series_ii.to_records(), figdir)
        paths += render_series_figures(series_ii.to_records(), figdir)
        return paths

    ok = True
    checks = {}
    for name in series_i.observable_names:
        row = series_i.series(name)
        e0 = row[0]
        positive = e0.stderr > 0 and e0.estimate > 5.0 * e0.stderr
        mk = mann_kendall([e.estimate for e in row])
        decays = mk.z <= -3.0
        checks[name] = {"start_estimate": e0.estimate, "start_stderr": e0.stderr,
                        "start_positive_5sigma": positive,
                        "mann_kendall_z": mk.z, "decay_rejected_constancy": decays}
        if not positive or not decays:
            ok = False
            print(f"counterexample check FAILED for {name}: start>0 {positive}, "
                  f"MK z={mk.z:.2f}", file=sys.stderr)
    const_fail = [c for c in constancy_report(series_ii) if not c.passed]
    for c in const_fail:
        ok = False
        print(f"stationary-side constancy FAILED for {c.observable} "
              f"({c.worst_gap_sigmas:.2f} sigma at n={c.worst_n})", file=sys.stderr)
    _emit_run(args, "counterexample", cfg, records, figures,
              {"counterexample_checks": checks})
    if ok:
        print("counterexample behaves as established: decaying degree-weighted "
              "series, stationary alpha-weighted series")
    return 0 if ok else 1


def _cmd_kernel_check(args) -> int:
    cfg = load_config(args)
    space, ks = cfg.build()
    env = Environment(dataclasses.replace(cfg.env, seed=cfg.seed), space)
    radius = args.window_radius or (40 if space.degree == 2 else 5)
    window = list(space.ball(space.origin, radius))
    if len(window) < 3:
        raise ConfigurationError("window radius too small for an interior site")
    balance_tol = args.tol if args.tol is not None else (
        1e-9 if cfg.kernel == "alili" else 1e-12)
    glob = global_balance_check(ks, env, window, tol=balance_tol, nu_tol=cfg.tol)
    det = detailed_balance_check(ks, env, window, tol=balance_tol, nu_tol=cfg.tol)
    records = []
    for rep in (glob, det):
        for e in rep.entries:
            records.append({"check": rep.check, "site": e.site,
                            "residual": e.residual, "pass": e.passed})
    expect_reversible = cfg.kernel != "alili"
    detailed_as_expected = det.passed == expect_reversible
    summary = {
        "global_passed": glob.passed, "global_max_residual": glob.max_residual,
        "detailed_passed": det.passed, "detailed_max_residual": det.max_residual,
        "detailed_expected_to_pass": expect_reversible,
    }
    outdir = _outdir(args, "kernel-check", cfg.seed)
    os.makedirs(outdir, exist_ok=True)
    jsonl = os.path.join(outdir, "results.jsonl")
    write_jsonl(jsonl, records)
    write_manifest(outdir, "kernel-check", cfg.as_dict(),
                   {"results_jsonl": jsonl}, 1, {"summary": summary})
    print(f"global balance: max residual {glob.max_residual:.3e} "
          f"({'pass' if glob.passed else 'FAIL'} at tol {balance_tol:g})")
    print(f"detailed balance: max residual {det.max_residual:.3e} "
          f"({'pass' if det.passed else 'fails'}; "
          f"expected to {'pass' if expect_reversible else 'fail'})")
    return 0 if glob.passed and detailed_as_expected else 1


def _cmd_mtp_check(args) -> int:
    space = make_space(args.space)
    fns = builtin_transports(space)
    if args.f not in fns:
        raise ConfigurationError(
            f"unknown transport function {args.f!r} for {space.name}; "
            f"available: {sorted(fns)}")
    f = fns[args.f]
    p = Fraction(args.p) if args.p is not None else Fraction(1, 2)
    report = mtp_check(space, f, p=p, tol=args.tol or DEFAULTS["tol"])
    outdir = _outdir(args, "mtp-check", 0)
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, "report.json")
    with open(path, "w") as fh:
        json.dump(report.as_dict(), fh, indent=2)
        fh.write("\n")
    if not report.invariance_ok:
        print(f"{f.name}: invariance pre-test failed; identity not evaluated")
        return 0 if not f.expected_invariant else 1
    print(f"{f.name}: lhs={report.lhs!r} rhs={report.rhs!r} "
          f"diff={report.diff:.3e} -> {'pass' if report.passed else 'FAIL'}")
    return 0 if report.passed and f.expected_invariant else 1


def _cmd_alili_demo(args) -> int:
    args.space, args.kernel = "line", "alili"
    cfg = load_config(args)
    space, ks = cfg.build()
    env = Environment(dataclasses.replace(cfg.env, seed=cfg.seed), space)
    from .walks import alili_A, alili_rho, nu

    span = args.sites
    records = []
    for x in range(-span, span + 1):
        a_val = alili_A(env, x, tol=cfg.tol)
        records.append({
            "site": x, "xi": env.site_param(x), "A": a_val,
            "nu": (1.0 + alili_rho(env, x)) * a_val,
        })
    check = global_balance_check(ks, env, range(-span - 1, span + 2),
                                 tol=1e-9, nu_tol=cfg.tol)
    resid = {e.site: e.residual for e in check.entries}
    for rec in records:
        rec["residual"] = resid.get(str(rec["site"]))

    def figures(outdir):
        from .report import render_profile_figure

        return render_profile_figure(records, os.path.join(outdir, "figures"),
                                     "site", ("xi", "nu"),
                                     "line-walk stationary weight profile",
                                     "alili_profile.png")

    _emit_run(args, "alili-demo", cfg, records, figures,
              {"balance_max_residual": check.max_residual})
    a, b = cfg.env.site_range
    if a == b:
        expect = 1.0 / (2.0 * a - 1.0)
        worst = max(abs(r["nu"] - expect) for r in records)
        print(f"constant xi={a}: nu should be {expect:.12g}, "
              f"max deviation {worst:.3e}")
        if worst > 1e-9:
            return 1
    print(f"balance max residual {check.max_residual:.3e} "
          f"({'pass' if check.passed else 'FAIL'})")
    return 0 if check.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rwrelab",
        description="random walks in random environments with random scenery: "
                    "stationarity experiments and exact checks")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, with_run=True):
        sp.add_argument("--config", help="JSON config file or a manifest.json")
        sp.add_argument("--space")
        sp.add_argument("--kernel")
        sp.add_argument("--p", type=float, help="edge-open probability")
        sp.add_argument("--a", type=float, help="site-parameter lower bound")
        sp.add_argument("--b", type=float, help="site-parameter upper bound")
        sp.add_argument("--colors", type=int,
                        help="scenery palette size (0 disables scenery)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--outdir")
        if with_run:
            sp.add_argument("--M", type=int, help="replica count")
            sp.add_argument("--N", type=int, help="largest shift time")
            sp.add_argument("--R", help="cluster truncation radii, comma separated")
            sp.add_argument("--r", type=int, help="observable window radius")
            sp.add_argument("--k", type=int, help="trajectory horizon")
            sp.add_argument("--mode", choices=("auto", "unimodular", "general"))
            sp.add_argument("--observables", help="comma-separated names")
            sp.add_argument("--representatives",
                            help="comma-separated 1-based orbit indices")
            sp.add_argument("--workers", type=int, default=1)
            sp.add_argument("--no-csv", action="store_true")
            sp.add_argument("--no-figures", action="store_true")

    sp = sub.add_parser("stationarity", help="shift-stationarity experiment")
    add_common(sp)
    sp.set_defaults(fn=_cmd_stationarity)

    sp = sub.add_parser("counterexample",
                        help="paired non-unimodular counterexample runs")
    add_common(sp)
    sp.set_defaults(fn=_cmd_counterexample)

    sp = sub.add_parser("kernel-check", help="exact balance verification")
    add_common(sp, with_run=False)
    sp.add_argument("--window-radius", type=int)
    sp.set_defaults(fn=_cmd_kernel_check)

    sp = sub.add_parser("mtp-check", help="exact mass-transport identity check")
    sp.add_argument("--space", required=True)
    sp.add_argument("--f", required=True, help="transport function name")
    sp.add_argument("--p", help="edge probability as a fraction, e.g. 2/3")
    sp.add_argument("--tol", type=float)
    sp.add_argument("--outdir")
    sp.set_defaults(fn=_cmd_mtp_check)

    sp = sub.add_parser("alili-demo", help="line-walk stationary weight profile")
    add_common(sp, with_run=False)
    sp.add_argument("--sites", type=int, default=50)
    sp.add_argument("--no-csv", action="store_true")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(fn=_cmd_alili_demo)
    return parser


def dispatch(argv) -> int:
    """Run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, ResourceLimitError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return 3
    except RwreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
