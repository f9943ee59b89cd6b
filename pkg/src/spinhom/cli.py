"""Command-line entry point: ``spinhom run | audit | gen``.

Exit codes: 0 success, 1 audit failed, 2 validation error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import lattice as lat
from .cellproblem import estimate_phi, subadditivity_check, sweep, translation_check, truncation_check
from .config import ConfigError, RunConfig, load_config
from .continuum import PhiTable, gamma_check
from .energy import CONVENTION

EXIT_OK, EXIT_AUDIT_FAIL, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3


class _Progress:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, msg: str) -> None:
        if not self.quiet:
            print(msg, file=sys.stderr, flush=True)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _write_json(path: Path, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sample_rows(samples, failures, nus, dim, timing: bool):
    rows = []
    for s in samples:
        rows.append([s.nu_idx, *s.nu, s.t, s.seed, s.mu, s.mu_norm, s.n_free, s.n_frozen, s.solve_ms if timing else None])
    for f in failures:
        for k, nu in enumerate(nus):
            rows.append([k, *nu, f["t"], f["seed"], math.nan, math.nan, None, None, None])
    rows.sort(key=lambda r: (r[0], r[dim + 1], r[dim + 2]))
    return rows


def _results_header(dim: int):
    return ["nu_idx", "nu_x", "nu_y"] + (["nu_z"] if dim == 3 else []) + ["t", "seed", "mu", "mu_norm", "n_free", "n_frozen", "solve_ms"]


def _estimate_summary(e) -> dict:
    return {
        "nu": list(e.nu),
        "per_t": {repr(t): v for t, v in e.stats.items()},
        "extrapolated": e.extrapolated,
        "fit": e.fit,
        "failures": len(e.failures),
    }


def _run_phi(cfg: RunConfig, out: Path, log) -> dict:
    dim = cfg.lattice.dim
    if cfg.experiment == "phi":
        e = estimate_phi(cfg.nus[0], cfg.t, cfg.seeds, cfg.coupling, cfg.lattice, cfg.center, cfg.l, cfg.jobs)
        ests, failures = [e], e.failures
    else:
        sw = sweep(np.array(cfg.nus), cfg.t, cfg.seeds, cfg.coupling, cfg.lattice, cfg.center, cfg.l, cfg.jobs)
        ests = sw.estimates
        failures = ests[0].failures
    samples = [s for e in ests for s in e.samples]
    if not samples:
        raise RuntimeError("every sample failed: " + "; ".join(f["error"] for f in failures))
    for f in failures:
        log(f"sample t={f['t']} seed={f['seed']} failed: {f['error']}")
    _write_csv(out / "results.csv", _results_header(dim), _sample_rows(samples, failures, cfg.nus, dim, cfg.timing))
    summary = {"directions": [_estimate_summary(e) for e in ests]}
    if cfg.experiment == "sweep":
        summary["sweep"] = sw.summary
        PhiTable.from_sweep(sw).save_csv(out / "phi_table.csv")
    return summary


def _run_translation(cfg: RunConfig, out: Path, log) -> dict:
    rep = translation_check(cfg.nus[0], cfg.t[-1], cfg.seeds, cfg.offsets, cfg.coupling, cfg.lattice)
    rows = []
    for i, off in enumerate(rep["offsets"]):
        for s in rep["samples"][i]:
            rows.append([i, *off, s.t, s.seed, s.mu, s.mu_norm, s.n_free, s.n_frozen])
    hdr = ["offset_idx"] + [f"offset_{c}" for c in "xyz"[: cfg.lattice.dim]] + ["t", "seed", "mu", "mu_norm", "n_free", "n_frozen"]
    _write_csv(out / "translation.csv", hdr, rows)
    return {"t": cfg.t[-1], "offsets": rep["offsets"], "means": rep["means"], "max_rel_deviation": rep["max_rel_deviation"]}


def _run_subadd(cfg: RunConfig, out: Path, log) -> dict:
    rows = []
    for t in cfg.t:
        for s in cfg.seeds:
            log(f"subadditivity t={t} seed={s}")
            rep = subadditivity_check(cfg.nus[0], t, s, cfg.coupling, cfg.lattice)
            rows.append([t, s, rep["mu_big"], math.fsum(rep["mu_sub"]), rep["interfaces"], rep["K_eff"]])
    _write_csv(out / "subadd.csv", ["t", "seed", "mu_big", "mu_sub_sum", "interfaces", "K_eff"], rows)
    k = [r[-1] for r in rows]
    return {"K_eff_max": max(k), "K_eff_mean": float(np.mean(k))}


def _run_truncation(cfg: RunConfig, out: Path, log) -> dict:
    rows, summary = [], {}
    for t in cfg.t:
        rep = truncation_check(cfg.nus[0], t, cfg.seeds, cfg.trunc_L, cfg.trunc_L_ref, cfg.coupling, cfg.lattice)
        for row in rep["rows"]:
            for L, m in sorted(row["mu"].items()):
                chk = next((c for c in rep["checks"] if c["seed"] == row["seed"] and c["L"] == L), None)
                rows.append([t, row["seed"], L, m, chk["gap"] if chk else 0.0, chk["bound"] if chk else None, chk["ok"] if chk else True])
        summary[repr(t)] = {"monotone": rep["monotone"], "mean_gap": rep["mean_gap"], "gap_strictly_decreasing": rep["gap_strictly_decreasing"], "all_within_bound": all(c["ok"] for c in rep["checks"])}
    _write_csv(out / "truncation.csv", ["t", "seed", "L", "mu", "gap", "bound", "ok"], rows)
    return summary


def _run_gamma(cfg: RunConfig, out: Path, log) -> dict:
    if cfg.phi is not None:
        phi = PhiTable.constant(cfg.phi)
    else:
        path = Path(cfg.phi_table)
        phi = PhiTable.load_csv(path, cfg.interpolation)
    res = gamma_check(cfg.eps, cfg.side, cfg.nus[0], cfg.lattice, cfg.coupling, phi, cfg.seeds)
    res.save_csv(out / "gamma.csv")
    return {"rel_gap": res.gaps, "monotone": res.monotone}


def _run_audit_experiment(cfg: RunConfig, out: Path, log) -> dict:
    rows = []
    lo, hi = cfg.audit_box
    box = [lo, hi]
    for s in cfg.seeds:
        ps = _generate(cfg.lattice.model, cfg.lattice.dim, box, s, cfg.lattice.a, cfg.lattice.diameter, cfg.lattice.defects)
        rep = lat.estimate_admissibility(ps)
        rows.append([s, rep.n_points, rep.r_min, rep.R_cover, rep.resolution, rep.r_declared, rep.R_declared, rep.passed])
    _write_csv(out / "audit.csv", ["seed", "n_points", "r_min", "R_cover", "resolution", "r_declared", "R_declared", "pass"], rows)
    return {"all_pass": all(r[-1] for r in rows), "r_min": min(r[2] for r in rows), "R_cover": max(r[3] for r in rows)}


_RUNNERS = {
    "phi": _run_phi,
    "sweep": _run_phi,
    "translation": _run_translation,
    "subadd": _run_subadd,
    "truncation": _run_truncation,
    "gamma": _run_gamma,
    "lattice-audit": _run_audit_experiment,
}


def run(config_path, seed=None, jobs=None, out_dir=None, quiet=False) -> int:
    log = _Progress(quiet)
    try:
        cfg = load_config(config_path)
        if seed is not None:
            cfg.seeds = [int(seed)]
        if jobs is not None:
            if jobs < 1:
                raise ConfigError("--jobs must be >= 1")
            cfg.jobs = jobs
        if out_dir is not None:
            cfg.out_dir = out_dir
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    log(f"{cfg.experiment}: {len(cfg.seeds)} seed(s), output in {out}")
    start = time.perf_counter()
    try:
        summary = _RUNNERS[cfg.experiment](cfg, out, log)
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    wall = time.perf_counter() - start
    summary.update(
        {
            "experiment": cfg.experiment,
            "convention": CONVENTION,
            "model": {"coupling": cfg.coupling.to_dict(), "lattice": cfg.lattice.to_dict()},
            "seeds": cfg.seeds,
            "version": __version__,
        }
    )
    _write_json(out / "summary.json", summary)
    _write_json(
        out / "manifest.json",
        {
            "version": __version__,
            "config": cfg.raw,
            "seeds": cfg.seeds,
            "convention": CONVENTION,
            "rng": lat.RNG_NAME,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "wall_time_s": wall,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        },
    )
    log(f"done in {wall:.2f} s")
    return EXIT_OK


def audit(path, quiet=False) -> int:
    try:
        ps = lat.load_lattice(path)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    rep = lat.estimate_admissibility(ps)
    if not quiet:
        print(f"points    {rep.n_points}", file=sys.stderr)
        print(f"r_min     {rep.r_min:.6g}  (declared r = {rep.r_declared:.6g})  {'pass' if rep.pass_r else 'FAIL'}", file=sys.stderr)
        print(f"R_cover   {rep.R_cover:.6g}  (declared R = {rep.R_declared:.6g}, resolution {rep.resolution:.2g})  {'pass' if rep.pass_R else 'FAIL'}", file=sys.stderr)
    print(json.dumps(rep.to_dict(), sort_keys=True))
    return EXIT_OK if rep.passed else EXIT_AUDIT_FAIL


def _generate(model, dim, box, seed, a, diameter, defects) -> lat.PointSet:
    box = np.asarray(box, dtype=float)
    if model in ("square", "triangular"):
        ps = lat.generate_deterministic(model, dim, box)
    elif model == "perturbed":
        ps = lat.generate_perturbed(dim, box, a, seed)
    elif model == "parking":
        ps = lat.generate_random_parking(box, diameter, seed, dim=dim)
    else:
        raise ValueError(f"unknown lattice model {model!r}")
    if defects:
        ps = lat.apply_defects(ps, defects, seed)
    return ps


def gen(args) -> int:
    try:
        ps = _generate(args.model, args.dim, args.box, args.seed or 0, args.a, args.diameter, args.defects)
        lat.save_lattice(ps, args.output)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if not args.quiet:
        print(f"wrote {len(ps)} points to {args.output}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override the seed list with a single seed")
    common.add_argument("--jobs", type=int, help="number of worker processes")
    common.add_argument("--out-dir", help="output directory")
    common.add_argument("--quiet", action="store_true", help="suppress progress on stderr")

    p = argparse.ArgumentParser(prog="spinhom", description="Surface tension of ferromagnetic spin systems on admissible lattices.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="run an experiment described by a TOML config")
    r.add_argument("config")

    a = sub.add_parser("audit", parents=[common], help="measure r_min and R_cover of a lattice file")
    a.add_argument("lattice")

    g = sub.add_parser("gen", parents=[common], help="generate a lattice file")
    g.add_argument("model", choices=["square", "triangular", "perturbed", "parking"])
    g.add_argument("--dim", type=int, default=2)
    g.add_argument("--box", type=float, nargs=2, metavar=("LO", "HI"), default=[0.0, 32.0])
    g.add_argument("--a", type=float, default=0.25, help="perturbation amplitude")
    g.add_argument("--diameter", type=float, default=1.0, help="parking exclusion diameter")
    g.add_argument("--defects", type=int, default=0, help="number of deleted points")
    g.add_argument("-o", "--output", required=True)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    if args.command == "run":
        return run(args.config, args.seed, args.jobs, args.out_dir, args.quiet)
    if args.command == "audit":
        return audit(args.lattice, args.quiet)
    return gen(args)


if __name__ == "__main__":
    sys.exit(main())
