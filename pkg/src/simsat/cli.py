"""Command-line entry point ``simsat``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for usage,
configuration or resolution-guard errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import averaging
from .extension import BUILTINS, UnderResolvedError, decay_fit, surface_from_config
from .harness.config import ConfigError, load_config, output_dir
from .harness.norms import GridGuardError
from .harness.records import RecordParseError, read_records, write_records
from .harness.sweep import restriction_sweep
from .perm import GuardError, PermTuple
from .saturation import FiniteSystem, PointSet, analyse_system

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _line(ok: bool, name: str, detail: str = "") -> str:
    return f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  {detail}" if detail else "")


def cmd_verify_lemmas(args) -> int:
    n, m = args.n, args.m
    ok = True
    structural = [averaging.check_class_sizes, averaging.check_similarity,
                  averaging.check_weaving_product, averaging.check_projector_identity]
    for check in structural:
        try:
            rep = check(n, m)
            print(_line(True, rep.name, json.dumps(rep.details)))
        except averaging.StructuralMismatch as exc:
            ok = False
            print(_line(False, check.__name__, str(exc)))
    A = averaging.build_symmetrized_average(n, m)
    psd = averaging.check_psd(A)
    ok &= psd.is_psd
    print(_line(psd.is_psd, "A_psd", f"lambda_min={psd.lambda_min:.3e} norm={psd.norm:.3e}"))
    for check in (averaging.check_spectral_gap, averaging.check_cycle_spectrum):
        rep = check(n, m)
        ok &= rep.passed
        print(_line(rep.passed, rep.name, json.dumps(rep.details)))
    return EXIT_OK if ok else EXIT_FAIL


SYSTEM_SCHEMA_KEYS = {"N", "M", "P", "h", "eps", "count", "groups", "replicated", "seed"}


def cmd_run_system(args) -> int:
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read system config: {exc}") from None
    unknown = set(cfg) - SYSTEM_SCHEMA_KEYS
    if unknown or not {"N", "M"} <= set(cfg):
        raise ConfigError(f"system config needs N and M; unknown keys {sorted(unknown)}")
    N, M = int(cfg["N"]), int(cfg["M"])
    P, h = int(cfg.get("P", N + 1)), int(cfg.get("h", 4))
    eps, count = float(cfg.get("eps", 0.5)), int(cfg.get("count", 1))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    if P < N:
        raise ConfigError("P must be at least N")
    ok = True
    for i in range(count):
        rng = np.random.default_rng([seed, i])
        groups = cfg.get("groups") or [1] * M
        system = FiniteSystem.random(M, P, h, rng, n_groups=groups,
                                     replicated=bool(cfg.get("replicated", False)))
        base = PointSet(tuple(sorted(rng.choice(P, size=N, replace=False).tolist())))
        report = analyse_system(system, base, eps)
        ok &= report.passed
        print(report.to_json())
    return EXIT_OK if ok else EXIT_FAIL


def _load_surface(spec: str, width: float | None):
    if spec in BUILTINS:
        cfg = {"type": spec, "d": 2}
    else:
        try:
            cfg = json.loads(Path(spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"unknown surface {spec!r} ({exc})") from None
    if width is not None:
        cfg["width"] = width
    try:
        return surface_from_config(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def cmd_kernel_decay(args) -> int:
    H = _load_surface(args.surface, args.width)
    try:
        lams = [float(x) for x in args.lambdas.split(",")]
    except ValueError:
        raise UsageError("--lambdas must be comma-separated numbers") from None
    nu = H.nu
    perp = np.zeros(H.d)
    perp[H.others[0]] = 1.0
    perp -= (perp @ nu) * nu
    perp /= np.linalg.norm(perp)
    on = decay_fit(H, nu, lams, offset=args.offset)
    off = decay_fit(H, perp, lams, offset=args.offset)
    ok = off.R_hat >= 3
    print(f"surface={H.kind} width={H.width} offset={args.offset}")
    print(f"on_cone_R={on.R_hat:.4f} off_cone_R={off.R_hat:.4f} clamped={off.clamped}")
    for lam, a, b in zip(lams, on.magnitudes, off.magnitudes):
        print(f"lambda={lam:g} on={a:.6e} off={b:.6e} ratio={b / a:.3e}")
    print(_line(ok, "off_cone_decay", "R >= 3"))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_restriction_sweep(args) -> int:
    cfg = load_config(args.config)
    result = restriction_sweep(cfg, seed=args.seed)
    name = cfg["output"].get("name", cfg["experiment_id"])
    out = Path(args.out) if args.out else output_dir(cfg) / f"{name}.csv"
    write_records(result.records, out, {**cfg, "seed": args.seed if args.seed is not None else cfg["seed"]})
    for r in result.records:
        print(f"lambda={r.lam:g} norm={r.norm:.6e}")
    print(f"slope={result.slope:.4f} target={result.target:.4f} slack={result.slack}")
    if result.stability:
        print(f"C0 spread={result.stability['spread']:.3f}")
    ok = result.passed and result.stability.get("stable", True)
    print(_line(ok, result.experiment_id, f"records written to {out}"))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_report(args) -> int:
    records = read_records(args.input)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["experiment_id", "log_lambda", "log_norm", "exponent_target", "slope", "pass"])
        for r in records:
            w.writerow([r.experiment_id, repr(math.log(r.lam)), repr(math.log(r.norm)),
                        repr(r.exponent_target), repr(r.slope), "true" if r.passed else "false"])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK if all(r.passed for r in records) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simsat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("verify-lemmas", help="structural and spectral checks of the averaging matrices")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.set_defaults(func=cmd_verify_lemmas)

    p = sub.add_parser("run-system", help="energy-matrix checks on random finite systems")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_run_system)

    p = sub.add_parser("kernel-decay", help="on-cone and off-cone kernel decay exponents")
    p.add_argument("--surface", required=True, help="builtin name or JSON surface file")
    p.add_argument("--lambdas", default="32,64,128")
    p.add_argument("--width", type=float, default=None)
    p.add_argument("--offset", type=float, default=0.5)
    p.set_defaults(func=cmd_kernel_decay)

    p = sub.add_parser("restriction-sweep", help="lam-sweep of a product-field norm")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="CSV path (manifest is written alongside)")
    p.set_defaults(func=cmd_restriction_sweep)

    p = sub.add_parser("report", help="plot-ready log-log CSV from stored records")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"simsat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, GridGuardError, UnderResolvedError, GuardError, RecordParseError) as exc:
        print(f"simsat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"simsat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
