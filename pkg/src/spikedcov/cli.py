"""Batch command-line surface.

Subcommands: generate | eigs | clt | eigvec | mp | check-identities |
consistency | concentration. Every run writes a manifest listing each
output file with its SHA-256 hash, so a run is reproducible from
(config, seed, version).

Exit codes: 0 success, 2 config error, 3 numeric precondition,
4 tolerance failure, 5 IO error.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__, centering, matio, mp
from .config import build_experiment, build_spec, load_config, parse_law
from .eigen import alignment, block_decompose, sample_covariance, sym_eigen, verify_master_identities
from .errors import ConfigInvalid, NumericPrecondition, SpikedCovError
from .model import generate_data
from .montecarlo import (
    concentration_hw_check,
    concentration_sm_check,
    consistency_report,
    run_experiment,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_TOLERANCE = 4
EXIT_IO = 5


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Manifest:
    def __init__(self, config_path, out_dir, master_seed):
        self.record = {
            "tool": "spikedcov",
            "version": __version__,
            "config": str(config_path) if config_path else None,
            "output_dir": str(out_dir),
            "master_seed": master_seed,
            "started": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "files": {},
        }
        self.out_dir = out_dir

    def add(self, path) -> None:
        rel = os.path.relpath(path, self.out_dir)
        self.record["files"][rel] = _sha256(path)

    def write(self) -> None:
        self.record["finished"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        path = os.path.join(self.out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.record, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _write_json(path, record) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _experiment_outputs(out_dir, report, config, manifest) -> None:
    _write_json(os.path.join(out_dir, "report.json"), report.aggregate_record(config))
    manifest.add(os.path.join(out_dir, "report.json"))
    jsonl = os.path.join(out_dir, "samples.jsonl")
    with open(jsonl, "w", encoding="utf-8") as fh:
        for row in report.rows:
            fh.write(json.dumps(row, sort_keys=True))
            fh.write("\n")
    manifest.add(jsonl)
    csv_path = os.path.join(out_dir, "samples.csv")
    with open(csv_path, "w", encoding="ascii") as fh:
        fh.write("value\n")
        for v in report.samples:
            fh.write("%.17g\n" % v)
    manifest.add(csv_path)


def cmd_generate(args) -> int:
    parser = load_config(args.config)
    spec = build_spec(parser)
    seed = args.seed if args.seed is not None else _seed_from(parser)
    X, Z = generate_data(spec, seed)
    os.makedirs(args.out, exist_ok=True)
    manifest = Manifest(args.config, args.out, seed)
    for name, mat in (("X", X),) + ((("Z", Z),) if args.with_z else ()):
        csv_path = os.path.join(args.out, f"{name}.csv")
        bin_path = os.path.join(args.out, f"{name}.bin")
        matio.write_csv(csv_path, mat)
        matio.write_binary(bin_path, mat)
        manifest.add(csv_path)
        manifest.add(bin_path)
    manifest.write()
    return EXIT_OK


def cmd_eigs(args) -> int:
    parser = load_config(args.config)
    spec = build_spec(parser)
    seed = args.seed if args.seed is not None else _seed_from(parser)
    X, _ = generate_data(spec, seed)
    eig = sym_eigen(sample_covariance(X))
    os.makedirs(args.out, exist_ok=True)
    manifest = Manifest(args.config, args.out, seed)
    values_path = os.path.join(args.out, "eigenvalues.csv")
    matio.write_csv(values_path, eig.values[np.newaxis, :])
    vectors_path = os.path.join(args.out, "eigenvectors.bin")
    matio.write_binary(vectors_path, eig.vectors)
    manifest.add(values_path)
    manifest.add(vectors_path)
    manifest.write()
    return EXIT_OK


def cmd_clt(args) -> int:
    parser = load_config(args.config)
    statistic = f"clt_{args.mode}" if args.mode else None
    config = build_experiment(
        parser,
        statistic=statistic,
        replicates=args.replicates,
        master_seed=args.seed,
        x_mode=args.x_mode,
        workers=args.threads,
    )
    report = run_experiment(config)
    if config.statistic in ("clt_mixed", "clt_oracle"):
        mode = centering.resolve_x_mode(config.x_mode, config.spec.n, config.spec.M)
        x = centering.deterministic_shift(config.spec.spikes, config.nu, config.spec.n, mode)
        residual = 0.0
        if mode != "zero":
            coeffs = centering.polynomial_coefficients(
                config.spec.spikes, config.nu, config.spec.n
            )
            residual = centering.root_residual(coeffs, x)
        report.extra.update(x=x, x_mode=mode, x_residual=residual)
        for row in report.rows:
            row["x"] = x
            row["x_residual"] = residual
    os.makedirs(args.out, exist_ok=True)
    manifest = Manifest(args.config, args.out, config.master_seed)
    _experiment_outputs(args.out, report, config, manifest)
    manifest.write()
    return EXIT_OK


def cmd_eigvec(args) -> int:
    parser = load_config(args.config)
    statistic = f"eigvec_{args.variant}" if args.variant else None
    config = build_experiment(
        parser,
        statistic=statistic,
        replicates=args.replicates,
        master_seed=args.seed,
        empirical=args.empirical or None,
        workers=args.threads,
    )
    report = run_experiment(config)
    os.makedirs(args.out, exist_ok=True)
    manifest = Manifest(args.config, args.out, config.master_seed)
    _experiment_outputs(args.out, report, config, manifest)
    manifest.write()
    return EXIT_OK


def cmd_mp_table(args) -> int:
    try:
        start, stop, count = args.z_grid.split(":")
        grid = np.linspace(float(start), float(stop), int(count))
    except ValueError as exc:
        raise ConfigInvalid(f"bad --z-grid {args.z_grid!r}: want start:stop:count") from exc
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w", encoding="ascii") as fh:
        fh.write("z,m,quadratic_residual,error\n")
        for z in grid:
            try:
                m = mp.mp_stieltjes(z, args.gamma)
                res = mp.mp_quadratic_residual(z, args.gamma)
                fh.write("%.17g,%.17g,%.17g,\n" % (z, m, res))
            except NumericPrecondition as exc:
                fh.write("%.17g,,,%s\n" % (z, type(exc).__name__))
    return EXIT_OK


def cmd_check_identities(args) -> int:
    parser = load_config(args.config)
    spec = build_spec(parser)
    seed = args.seed if args.seed is not None else _seed_from(parser)
    nu = args.nu if args.nu is not None else _nu_from(parser)
    _, Z = generate_data(spec, seed)
    bd = block_decompose(Z, spec.spikes)
    # identity-frame covariance: the basis is rotated out so the A/B split is literal
    Y = Z.copy()
    Y[: spec.M, :] *= spec.sqrt_lambda()[:, np.newaxis]
    eig = sym_eigen(sample_covariance(Y))
    ortho = eig.vectors[:, : spec.M]
    r3 = float(np.max(np.abs(ortho.T @ ortho - np.eye(spec.M))))
    tol_scale = 1.0 if args.tol is None else args.tol / 1e-6
    failures = []
    if r3 > 1e-10 * tol_scale:
        failures.append(f"orthonormality residual {r3:.3e}")
    report = {"orthonormality": r3, "per_spike": [], "seed": seed}
    try:
        for v in range(1, spec.M + 1) if nu == 0 else [nu]:
            al = alignment(eig, None, spec.spikes, v)
            ident = verify_master_identities(bd, al)
            series = centering.series_expansion_check(bd, al, spec.spikes, v, J=args.series_terms)
            rec = {
                "nu": v,
                "r4": ident["r4"],
                "r5": ident["r5"],
                "series_entry": series.entry_residual,
                "series_sigma3": series.sigma3_residual,
            }
            report["per_spike"].append(rec)
            if ident["r4"] > 1e-6 * tol_scale * al.l_hat:
                failures.append(f"nu={v}: r4 = {ident['r4']:.3e}")
            if ident["r5"] > 1e-6 * tol_scale * (1.0 + ident["R2_over_1mR2"]):
                failures.append(f"nu={v}: r5 = {ident['r5']:.3e}")
            if series.entry_residual > 1e-6 * tol_scale:
                failures.append(f"nu={v}: series entry residual {series.entry_residual:.3e}")
            if series.sigma3_residual > 1e-6 * tol_scale:
                failures.append(f"nu={v}: series sigma3 residual {series.sigma3_residual:.3e}")
    except NumericPrecondition as exc:
        print(f"numeric precondition failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps(report, indent=2, sort_keys=True))
    if failures:
        for f in failures:
            print(f"TOLERANCE: {f}", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_consistency(args) -> int:
    parser = load_config(args.config)
    config = build_experiment(
        parser,
        statistic="consistency",
        replicates=args.replicates,
        master_seed=args.seed,
        workers=args.threads,
    )
    rep = consistency_report(config)
    os.makedirs(args.out, exist_ok=True)
    manifest = Manifest(args.config, args.out, config.master_seed)
    out = {
        "median_max_ratio_error": rep["median_max_ratio_error"].tolist(),
        "median_inner_sq": rep["median_inner_sq"].tolist(),
        "flags": rep["flags"],
        "replicates": config.replicates,
        "master_seed": config.master_seed,
    }
    path = os.path.join(args.out, "consistency.json")
    _write_json(path, out)
    manifest.add(path)
    manifest.write()
    return EXIT_OK


def cmd_concentration(args) -> int:
    law = parse_law(args.law)
    os.makedirs(args.out, exist_ok=True)
    manifest = Manifest(None, args.out, args.seed)
    if args.kind == "sm":
        rec = concentration_sm_check(
            args.p, args.q, law, args.t, args.replicates, args.seed, C=args.constant
        )
        out = {k: v for k, v in rec.items()}
    else:
        t_grid = np.linspace(args.t_min, args.t_max, args.t_count)
        rec = concentration_hw_check(
            args.p, law, np.eye(args.p), t_grid, args.replicates, args.seed
        )
        out = {
            "t": rec["t"].tolist(),
            "tail_hw": rec["tail_hw"].tolist(),
            "tail_ahw": rec["tail_ahw"].tolist(),
            "shape": rec["shape"].tolist(),
            "c_hw": rec["c_hw"],
            "c_ahw": rec["c_ahw"],
            "reps": rec["reps"],
        }
    path = os.path.join(args.out, f"concentration_{args.kind}.json")
    _write_json(path, out)
    manifest.add(path)
    manifest.write()
    return EXIT_OK


def _seed_from(parser) -> int:
    if "experiment" in parser and parser["experiment"].get("master_seed"):
        return parser["experiment"].getint("master_seed")
    return 0


def _nu_from(parser) -> int:
    if "experiment" in parser and parser["experiment"].get("nu"):
        return parser["experiment"].getint("nu")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spikedcov", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True)
        if out:
            p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)

    g = sub.add_parser("generate", help="write simulated data matrices")
    common(g)
    g.add_argument("--with-z", action="store_true")
    g.set_defaults(fn=cmd_generate)

    e = sub.add_parser("eigs", help="eigendecomposition of one instance")
    common(e)
    e.set_defaults(fn=cmd_eigs)

    c = sub.add_parser("clt", help="eigenvalue CLT experiment")
    common(c)
    c.add_argument("--mode", choices=["mixed", "statistical", "oracle"], default=None)
    c.add_argument("--x-mode", default=None, help="root | iter:<k0> | zero | auto")
    c.add_argument("--replicates", type=int, default=None)
    c.set_defaults(fn=cmd_clt)

    v = sub.add_parser("eigvec", help="eigenvector consistency experiment")
    common(v)
    v.add_argument("--variant", choices=["A", "B", "C1", "C2"], default=None)
    v.add_argument("--empirical", action="store_true")
    v.add_argument("--replicates", type=int, default=None)
    v.set_defaults(fn=cmd_eigvec)

    m = sub.add_parser("mp", help="tabulate the MP Stieltjes transform")
    m.add_argument("--gamma", type=float, required=True)
    m.add_argument("--z-grid", required=True, help="start:stop:count")
    m.add_argument("--out", required=True)
    m.set_defaults(fn=cmd_mp_table)

    k = sub.add_parser("check-identities", help="deterministic identity suite")
    k.add_argument("--config", required=True)
    k.add_argument("--seed", type=int, default=None)
    k.add_argument("--nu", type=int, default=None, help="spike index; 0 = all")
    k.add_argument("--tol", type=float, default=None, help="scales every tolerance")
    k.add_argument("--series-terms", type=int, default=30)
    k.set_defaults(fn=cmd_check_identities)

    s = sub.add_parser("consistency", help="eigenstructure consistency experiment")
    common(s)
    s.add_argument("--replicates", type=int, default=None)
    s.set_defaults(fn=cmd_consistency)

    z = sub.add_parser("concentration", help="empirical concentration checks")
    z.add_argument("--kind", choices=["sm", "hw"], required=True)
    z.add_argument("--out", required=True)
    z.add_argument("--law", default="gaussian")
    z.add_argument("--seed", type=int, default=0)
    z.add_argument("--replicates", type=int, default=1000)
    z.add_argument("--p", type=int, default=400)
    z.add_argument("--q", type=int, default=40)
    z.add_argument("--t", type=float, default=4.5)
    z.add_argument("--constant", type=float, default=2.0)
    z.add_argument("--t-min", type=float, default=5.0)
    z.add_argument("--t-max", type=float, default=60.0)
    z.add_argument("--t-count", type=int, default=12)
    z.set_defaults(fn=cmd_concentration)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericPrecondition as exc:
        print(f"numeric precondition failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SpikedCovError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
