"""Command-line entry points: sweep, demo, verify."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from geomatch import linalg, theory
from geomatch.estimators import EstimatorConfig
from geomatch.harness import (
    SweepConfig,
    default_sigma_grid,
    parse_estimator_name,
    run_sweep,
    summarize,
    sweep_config_from_json,
)
from geomatch.models import Permutation, sample_instance


def _add_override_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--n", type=int, default=None)
    parser.add_argument("--d", type=int, default=None)
    parser.add_argument("--sigma-min", type=float, default=None)
    parser.add_argument("--sigma-max", type=float, default=None)
    parser.add_argument("--sigma-points", type=int, default=None)
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--models", type=str, default=None, help="comma-separated model tags")
    parser.add_argument(
        "--estimators", type=str, default=None, help="comma-separated estimator names"
    )
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", type=str, default=None)


def _apply_overrides(cfg: SweepConfig, args: argparse.Namespace) -> SweepConfig:
    if args.n is not None:
        cfg.n = args.n
    if args.d is not None:
        cfg.d = args.d
    if args.trials is not None:
        cfg.trials = args.trials
    if args.models is not None:
        cfg.models = args.models.split(",")
    if args.estimators is not None:
        cfg.estimators = [parse_estimator_name(s) for s in args.estimators.split(",")]
    if args.seed is not None:
        cfg.base_seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.out is not None:
        cfg.output_path = args.out
    if args.sigma_min is not None or args.sigma_max is not None or args.sigma_points is not None:
        lo = args.sigma_min if args.sigma_min is not None else 0.1 * cfg.n ** (-2.0 / cfg.d)
        hi = args.sigma_max if args.sigma_max is not None else 10.0 * cfg.n ** (-1.0 / cfg.d)
        points = args.sigma_points if args.sigma_points is not None else 15
        cfg.sigma_grid = [float(s) for s in np.logspace(np.log10(lo), np.log10(hi), points)]
    elif args.n is not None or args.d is not None:
        cfg.sigma_grid = default_sigma_grid(cfg.n, cfg.d)
    return cfg


def _print_summary(records) -> None:
    for agg in summarize(records):
        print(
            f"{agg.model:>17s} {agg.estimator:>18s} sigma={agg.sigma:<12.6g}"
            f" overlap={agg.mean_overlap:.4f} +/-{agg.std_overlap:.4f}"
            f" runtime={agg.mean_runtime_ms:.1f}ms ({agg.trials} trials)"
        )


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.config:
        cfg = sweep_config_from_json(Path(args.config).read_text())
    else:
        cfg = SweepConfig()
    cfg = _apply_overrides(cfg, args)
    records = run_sweep(cfg)
    _print_summary(records)
    if cfg.output_path:
        print(f"wrote {len(records)} records to {cfg.output_path}")
    return 0


def cmd_demo(args: argparse.Namespace) -> int:
    """Sweep mirroring the two headline comparisons.

    d=2: exact linear-assignment MLE on the raw clouds versus the angle-grid
    alignment (exact and greedy rounding) on the Gram pair. d=4: the sign-flip
    alignment (exact and greedy) plus the eigenvector sign-sum spectral method.
    """
    cfg = SweepConfig(n=args.n, d=args.d, trials=args.trials, base_seed=args.seed)
    cfg.models = ["linear_assignment", "dot_product"]
    if args.d == 2:
        cfg.estimators = [
            EstimatorConfig("mle_linear"),
            EstimatorConfig("aml_grid2d", grid_size=100),
            EstimatorConfig("aml_grid2d", grid_size=100, matcher="greedy"),
        ]
    else:
        cfg.estimators = [
            EstimatorConfig("mle_linear"),
            EstimatorConfig("aml_signflip"),
            EstimatorConfig("aml_signflip", matcher="greedy"),
            EstimatorConfig("umeyama"),
        ]
    cfg.sigma_grid = default_sigma_grid(cfg.n, cfg.d)
    cfg.workers = args.workers
    cfg.output_path = args.out
    records = run_sweep(cfg)
    _print_summary(records)
    if cfg.output_path:
        print(f"wrote {len(records)} records to {cfg.output_path}")
    return 0


def _verify_mgf(rng: np.random.Generator, failures: list[str]) -> None:
    n, d, samples = 4, 2, 200_000
    for trial in range(3):
        pi = Permutation.random(n, np.random.default_rng(100 + trial))
        theta = float(rng.uniform(0, np.pi))
        q = linalg.rotation2d(theta)
        sigma = float(rng.uniform(0.2, 0.5))
        closed = theory.mgf_closed_form(pi.cycle_type(), [theta, -theta], sigma)
        mc = theory.mgf_monte_carlo(n, d, pi, q, sigma, samples, rng)
        rel = abs(closed - mc) / closed
        status = "ok" if rel <= 0.05 else "FAIL"
        print(f"mgf closed-form vs monte-carlo: rel err {rel:.4f} [{status}]")
        if rel > 0.05:
            failures.append("mgf")
        corrected = closed * theory.mgf_distance_correction([theta, -theta], sigma)
        mc_centered = theory.mgf_monte_carlo(n, d, pi, q, sigma, samples, rng, center=True)
        rel_c = abs(corrected - mc_centered) / corrected
        status = "ok" if rel_c <= 0.05 else "FAIL"
        print(f"mgf centered vs corrected closed-form: rel err {rel_c:.4f} [{status}]")
        if rel_c > 0.05:
            failures.append("mgf-distance")


def _verify_net(rng: np.random.Generator, failures: list[str]) -> None:
    for delta in (0.5, 0.1, 0.02):
        bad = 0
        for _ in range(100):
            m = rng.standard_normal((2, 2))
            if not theory.check_net_lemma(m, delta).holds:
                bad += 1
        status = "ok" if bad == 0 else "FAIL"
        print(f"net lemma delta={delta}: {bad}/100 violations [{status}]")
        if bad:
            failures.append(f"net-{delta}")


def _verify_orbits(rng: np.random.Generator, failures: list[str]) -> None:
    bad = 0
    for trial in range(100):
        n = int(rng.integers(4, 21))
        inst = sample_instance(n, int(rng.integers(1, 4)), float(rng.uniform(0.05, 1.0)), rng=int(rng.integers(2**31)))
        pi = Permutation.random(n, rng)
        total = sum(
            theory.delta_orbit(inst, orbit)
            for orbit in theory.orbit_decomposition(inst.pi_star, pi)
        )
        lhs = inst.sigma**2 * theory.loglik_diff(inst, pi)
        if abs(lhs - total) > 1e-9 * max(1.0, abs(lhs)):
            bad += 1
    status = "ok" if bad == 0 else "FAIL"
    print(f"orbit identity: {bad}/100 violations [{status}]")
    if bad:
        failures.append("orbit")


def cmd_verify(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    failures: list[str] = []
    _verify_mgf(rng, failures)
    _verify_net(rng, failures)
    _verify_orbits(rng, failures)
    if failures:
        print(f"verification FAILED: {failures}")
        return 1
    print("all verification checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geomatch")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sweep = sub.add_parser("sweep", help="run a sweep from a JSON config plus overrides")
    p_sweep.add_argument("--config", type=str, default=None)
    _add_override_args(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_demo = sub.add_parser("demo", help="run the built-in comparison sweep")
    p_demo.add_argument("--n", type=int, default=200)
    p_demo.add_argument("--d", type=int, default=2, choices=(2, 4))
    p_demo.add_argument("--trials", type=int, default=10)
    p_demo.add_argument("--seed", type=int, default=0)
    p_demo.add_argument("--workers", type=int, default=1)
    p_demo.add_argument("--out", type=str, default="demo_sweep.csv")
    p_demo.set_defaults(func=cmd_demo)

    p_verify = sub.add_parser("verify", help="run the theory oracle checks")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
