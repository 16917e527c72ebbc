"""Command-line pipeline: simulate -> fit -> infer -> evaluate, plus stability.

Exit statuses: 0 on success, 1 on runtime failure (diagnostic on stderr),
2 on usage errors.  Every subcommand is deterministic given its inputs
and seed flags; ``--threads`` (or the CASCOUNT_THREADS environment
variable) caps internal parallelism without changing any result.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import io as formats
from .cascade import cascade_sizes, conditional_expectation, conditional_sample
from .estimation import FitConfig, fit
from .evaluation import run_experiment
from .model import spectral_radius, steady_state_rate
from .simulator import simulate

__all__ = ["CliConfig", "parse_args", "dispatch", "main"]


@dataclass
class CliConfig:
    """Validated command-line request: one subcommand plus its options."""

    subcommand: str
    options: argparse.Namespace
    threads: int


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cascount",
        description="Simulate, fit, and infer latent event cascades in count networks.",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="cap internal parallelism (default: CASCOUNT_THREADS or machine count); "
        "results do not depend on it",
    )
    commands = parser.add_subparsers(dest="subcommand", required=True)

    sim = commands.add_parser("simulate", help="draw counts (and optionally the true cascade)")
    sim.add_argument("--model", required=True, help="model JSON")
    sim.add_argument("--T", type=int, required=True, help="number of time bins")
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--out", required=True, help="counts CSV to write")
    sim.add_argument("--decomposition", help="also write the ground-truth decomposition CSV")
    sim.add_argument("--burn-in", action="store_true", help="discard a stationarity prefix")

    fit_cmd = commands.add_parser("fit", help="maximum-likelihood fit of counts")
    fit_cmd.add_argument("--counts", required=True, help="counts CSV")
    fit_cmd.add_argument("--out", required=True, help="fit JSON to write")
    fit_cmd.add_argument("--fix-tau", type=float, help="freeze the kernel time constant")
    fit_cmd.add_argument("--fix-phi", type=float, help="freeze the dispersion")
    fit_cmd.add_argument(
        "--poisson", action="store_true", help="force the Poisson family (phi = 0)"
    )
    fit_cmd.add_argument("--tol", type=float, default=1.0e-6, help="relative gradient tolerance")
    fit_cmd.add_argument("--max-iter", type=int, default=2000)
    fit_cmd.add_argument("--init", choices=["moment", "fixed"], default="moment")

    infer = commands.add_parser("infer", help="latent-cascade inference from counts + model")
    infer.add_argument("--counts", required=True, help="counts CSV")
    infer.add_argument("--model", required=True, help="model or fit JSON")
    infer.add_argument("--out-decomposition", required=True, help="decomposition CSV to write")
    infer.add_argument("--out-sizes", help="cascade-size grid CSV to write")
    infer.add_argument(
        "--sample",
        type=int,
        metavar="N",
        help="emit N sampled decompositions instead of the expectation",
    )
    infer.add_argument("--seed", type=int, default=0, help="seed for --sample")

    evaluate = commands.add_parser("evaluate", help="run the multi-seed recovery study")
    evaluate.add_argument("--config", required=True, help="experiment config JSON")
    evaluate.add_argument("--out-dir", required=True, help="report directory to write")

    stability = commands.add_parser("stability", help="spectral radius and steady-state rates")
    stability.add_argument("--model", required=True, help="model JSON")

    return parser


def parse_args(argv) -> CliConfig:
    """Parse and validate argv (without the program name).

    Raises SystemExit(2) through argparse on usage errors, matching the
    documented exit status.
    """
    namespace = _build_parser().parse_args(argv)
    threads = namespace.threads
    if threads is None:
        env = os.environ.get("CASCOUNT_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise SystemExit(2)
    return CliConfig(subcommand=namespace.subcommand, options=namespace, threads=threads)


def _run_simulate(options) -> int:
    model = formats.read_model_json(options.model)
    if options.T < 1:
        print("error: --T must be at least 1", file=sys.stderr)
        return 1
    decomposition, counts = simulate(model, options.T, options.seed, burn_in=options.burn_in)
    formats.write_counts_csv(counts, options.out)
    if options.decomposition:
        formats.write_decomposition_csv(decomposition, options.decomposition)
    return 0


def _run_fit(options) -> int:
    counts = formats.read_counts_csv(options.counts)
    fix_phi = 0.0 if options.poisson else options.fix_phi
    config = FitConfig(
        max_iterations=options.max_iter,
        gradient_tolerance=options.tol,
        init_strategy=options.init,
        fit_tau=options.fix_tau is None,
        fit_phi=fix_phi is None,
        fixed_tau=options.fix_tau,
        fixed_phi=fix_phi,
    )
    result = fit(counts, config)
    formats.write_fit_json(result, options.out)
    if not result.converged:
        print(
            f"warning: fit did not converge within {options.max_iter} iterations "
            f"(projected gradient {result.gradient_norm:.3e})",
            file=sys.stderr,
        )
    return 0


def _write_sizes(decomposition, path) -> None:
    grid = cascade_sizes(decomposition)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["j", "s", "size"])
        for j in range(grid.shape[0]):
            for s in range(grid.shape[1]):
                writer.writerow([j + 1, s + 1, format(grid[j, s], ".17g")])


def _run_infer(options) -> int:
    counts = formats.read_counts_csv(options.counts)
    model = formats.read_model_json(options.model)
    if model.n_components != counts.n_components:
        print(
            f"error: model has {model.n_components} components but counts have "
            f"{counts.n_components}",
            file=sys.stderr,
        )
        return 1
    if options.sample is not None:
        if options.sample < 1:
            print("error: --sample must be at least 1", file=sys.stderr)
            return 1
        out = Path(options.out_decomposition)
        for index in range(options.sample):
            drawn = conditional_sample(model, counts, seed=(options.seed, index))
            target = out.with_name(f"{out.stem}_{index:03d}{out.suffix or '.csv'}")
            formats.write_decomposition_csv(drawn, target)
        return 0
    expected = conditional_expectation(model, counts)
    formats.write_decomposition_csv(expected, options.out_decomposition)
    if options.out_sizes:
        _write_sizes(expected, options.out_sizes)
    return 0


def _run_evaluate(options, threads: int) -> int:
    config = formats.read_experiment_config(options.config)
    report = run_experiment(config, max_workers=threads)
    formats.write_experiment_report(report, options.out_dir)
    return 0


def _run_stability(options) -> int:
    model = formats.read_model_json(options.model)
    radius = spectral_radius(model.influence)
    print(f"spectral_radius {format(radius, '.17g')}")
    if radius < 1.0:
        rates = steady_state_rate(model)
        print("steady_state_rate " + " ".join(format(v, ".17g") for v in rates))
    else:
        print("steady_state_rate unstable")
    return 0


def dispatch(config: CliConfig) -> int:
    """Run the requested subcommand; returns the process exit status."""
    options = config.options
    try:
        if config.subcommand == "simulate":
            return _run_simulate(options)
        if config.subcommand == "fit":
            return _run_fit(options)
        if config.subcommand == "infer":
            return _run_infer(options)
        if config.subcommand == "evaluate":
            return _run_evaluate(options, config.threads)
        if config.subcommand == "stability":
            return _run_stability(options)
        print(f"error: unknown subcommand {config.subcommand!r}", file=sys.stderr)
        return 2
    except (formats.FileFormatError, ValueError, OSError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        config = parse_args(argv)
    except SystemExit as err:
        return int(err.code) if err.code is not None else 2
    return dispatch(config)


if __name__ == "__main__":
    sys.exit(main())
