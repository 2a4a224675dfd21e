"""Acceptance criteria, one test each; every test records a PASS/FAIL summary line."""

import json
import math
import time
from functools import lru_cache
from pathlib import Path

import numpy as np

from conftest import ACCEPTANCE_LINES
from simsat import averaging
from simsat.extension import decay_fit, loop_falsification, closed_loop_gram_determinant, paraboloid
from simsat.harness.config import load_config
from simsat.harness.records import read_records, records_equal, write_records
from simsat.harness.sweep import restriction_sweep
from simsat.perm import PermTuple, TupleSpace
from simsat.saturation import (FiniteSystem, PointSet, averaging_matrix, build_energy_matrix,
                               diagonal_census, ones_eigen_check)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SHAPES = [(2, 2), (3, 2), (4, 2), (2, 4), (3, 4)]


def report(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def test_criterion_1_structural_suite():
    start = time.perf_counter()
    failures = []
    for n, m in SHAPES:
        for check in (averaging.check_similarity, averaging.check_weaving_product,
                      averaging.check_class_sizes):
            try:
                check(n, m)
            except averaging.StructuralMismatch as exc:
                failures.append(f"{check.__name__}({n},{m}): {exc}")
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 120
    report(1, ok, f"similarity, C^M = Id, C^2 commutation, weaving product, class sizes on {SHAPES}; "
                  f"{elapsed:.1f}s" + (f"; {failures}" if failures else ""))
    assert not failures
    assert elapsed < 120


def test_criterion_2_spectral_suite():
    rows, ok = [], True
    for n, m in SHAPES:
        if math.factorial(n) ** m > 1300:
            continue
        A = averaging.build_symmetrized_average(n, m)
        psd = averaging.check_psd(A)
        ev = averaging.projector_sum_spectrum(n, m)
        gap_ok = bool(np.all((ev <= 1e-9) | (ev >= 1 - 1e-9)))
        bad = ev[(ev > 1e-9) & (ev < 1 - 1e-9)]
        this = psd.is_psd and gap_ok
        ok &= this
        rows.append(f"({n},{m}) lambda_min(A)={psd.lambda_min:.3g}"
                    + ("" if gap_ok else f" sum-of-projectors eigenvalues in (0,1): {np.unique(bad.round(9)).tolist()}"))
    report(2, ok, "; ".join(rows))
    assert ok, "; ".join(rows)


@lru_cache(maxsize=None)
def cached_average(n, m):
    return averaging_matrix(n, m)


def test_criterion_3_saturation_properties():
    start = time.perf_counter()
    worst = {"residual": 0.0, "lambda_min": 0.0, "trace_ratio": math.inf, "census_ratio": 0.0}
    failures = []
    for i in range(100):
        rng = np.random.default_rng([2024, i])
        M = int(rng.choice([2, 4]))
        N = int(rng.integers(1, 4))
        h = int(rng.integers(1, 9))
        P = N + int(rng.integers(0, 3))
        groups = [int(rng.integers(1, 4))]
        system = FiniteSystem.random(M, P, h, rng, n_groups=groups, replicated=True)
        base = PointSet(tuple(sorted(rng.choice(P, size=N, replace=False).tolist())))
        W = build_energy_matrix(system, base).W
        ev = np.linalg.eigvalsh(W)
        norm = float(np.max(np.abs(ev)))
        ones = ones_eigen_check(W, raise_on_fail=False)
        A = cached_average(N, M)
        trace = float(np.real(np.sum(A * W.T)))
        space = TupleSpace(N, M)
        s = space.tuple(int(rng.integers(space.D)))
        eps = float(rng.uniform(0, 1))
        census = diagonal_census(base, s, eps)
        checks = {
            "residual": ones.residual <= 1e-9 * norm,
            "psd": ev[0] >= -1e-9 * norm,
            "trace": trace >= ones.Lambda * (1 - 1e-9),
            "census": census.passed,
        }
        if not all(checks.values()):
            failures.append((i, N, M, checks))
        worst["residual"] = max(worst["residual"], ones.residual / norm if norm else 0.0)
        worst["lambda_min"] = min(worst["lambda_min"], ev[0] / norm if norm else 0.0)
        worst["trace_ratio"] = min(worst["trace_ratio"], trace / ones.Lambda)
        worst["census_ratio"] = max(worst["census_ratio"], census.count / census.bound)
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 180
    report(3, ok, f"100 replicated-family systems; max residual/|W| {worst['residual']:.2e}, min lambda_min/|W| "
                  f"{worst['lambda_min']:.2e}, min Trace/Lambda {worst['trace_ratio']:.3f}, "
                  f"max census/bound {worst['census_ratio']:.2e}; {elapsed:.1f}s")
    assert not failures, failures
    assert elapsed < 180


def test_criterion_4_kernel_decay():
    start = time.perf_counter()
    H = paraboloid(2, width=3.0)
    lams = [32, 64, 128]
    on = decay_fit(H, H.nu, lams)
    off = decay_fit(H, [0.0, 1.0], lams)
    ratio = off.magnitudes[1] / on.magnitudes[1]
    elapsed = time.perf_counter() - start
    ok = off.R_hat >= 3 and 0.4 <= on.R_hat <= 0.6 and ratio <= 1e-3 and elapsed < 60 and not off.clamped
    report(4, ok, f"off-cone R={off.R_hat:.3f}, on-cone R={on.R_hat:.3f}, ratio at 64 = {ratio:.2e}; {elapsed:.1f}s")
    assert ok


def test_criterion_5_loop_collapse():
    start = time.perf_counter()
    hits = {}
    for d in (2, 3, 4):
        rng = np.random.default_rng([55, d])
        hits[d] = loop_falsification(d, 0.05, 10_000, rng).hits
    rng = np.random.default_rng(56)
    dets = [closed_loop_gram_determinant(d, rng) for d in (2, 3, 4) for _ in range(1000)]
    elapsed = time.perf_counter() - start
    ok = all(h == 0 for h in hits.values()) and max(dets) < 1e-18 and elapsed < 30
    report(5, ok, f"hits per d {hits}; max closed-loop Gram det {max(dets):.1e}; {elapsed:.1f}s")
    assert ok


def test_criterion_6_bilinear_sweep():
    start = time.perf_counter()
    cfg = load_config(CONFIGS / "bilinear_d2.json")
    assert cfg["lambdas"] == [16, 32, 64]
    res = restriction_sweep(cfg)
    elapsed = time.perf_counter() - start
    spread = res.stability["spread"]
    ok = res.slope <= -1 + 0.15 and spread <= 4 and elapsed < 300
    report(6, ok, f"slope {res.slope:.4f} (target -1 + 0.15), C_0 {['%.3g' % c for c in res.stability['C0']]} "
                  f"spread {spread:.2f}; {elapsed:.1f}s")
    assert ok


def test_criterion_7_curved_endpoint():
    start = time.perf_counter()
    curved = restriction_sweep(load_config(CONFIGS / "curved_endpoint_d2.json"))
    flat = restriction_sweep(load_config(CONFIGS / "flat_control_d2.json"))
    elapsed = time.perf_counter() - start
    threshold = -0.25 + 0.1
    ok = curved.slope <= threshold and flat.slope > threshold and elapsed < 120
    report(7, ok, f"curved slope {curved.slope:.4f}, flat slope {flat.slope:.4f}, threshold {threshold}; {elapsed:.1f}s")
    assert ok


def test_criterion_8_determinism_and_persistence(tmp_path):
    cfg = load_config(CONFIGS / "bilinear_d2.json")
    first = restriction_sweep(cfg, seed=11)
    second = restriction_sweep(cfg, seed=11)
    identical = all(records_equal(a, b) for a, b in zip(first.records, second.records))
    path = tmp_path / "bilinear.csv"
    write_records(first.records, path, {**cfg, "seed": 11})
    back = read_records(path)
    lossless = len(back) == len(first.records) and all(records_equal(a, b) for a, b in zip(first.records, back))
    manifest = json.loads((tmp_path / "bilinear.manifest.json").read_text())
    rerun = restriction_sweep(manifest["config"], seed=manifest["config"]["seed"])
    from_manifest = all(records_equal(a, b) for a, b in zip(rerun.records, back))
    ok = identical and lossless and from_manifest
    report(8, ok, f"bit-identical rerun {identical}, CSV/manifest round-trip {lossless}, "
                  f"rerun from manifest {from_manifest}")
    assert ok
