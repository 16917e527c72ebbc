"""On-disk formats: model JSON, counts CSV, decomposition CSV, report files.

Counts travel as CSV with an explicit contiguous time column starting at
one; decompositions as long-format CSV with background rows marked by
``j = 0, s = 0``; model parameters as a single JSON document.  CSV floats
are written with 17 significant digits and JSON floats with Python's
shortest round-tripping representation, so every emitted file reads back
to bit-identical values.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .estimation import FitResult
from .evaluation import ExperimentConfig, ExperimentReport, qq_points
from .model import CountSeries, Kernel, ModelSpec, TriggerMap
from .simulator import CascadeDecomposition

__all__ = [
    "FileFormatError",
    "write_model_json",
    "read_model_json",
    "write_counts_csv",
    "read_counts_csv",
    "write_decomposition_csv",
    "read_decomposition_csv",
    "write_fit_json",
    "read_fit_json",
    "read_experiment_config",
    "write_experiment_config",
    "write_experiment_report",
]


class FileFormatError(ValueError):
    """Malformed input file; the message names file, line, and column."""

    def __init__(self, path, line: int | None, column, message: str):
        location = str(path)
        if line is not None:
            location += f", line {line}"
        if column is not None:
            location += f", column {column}"
        super().__init__(f"{location}: {message}")


def _fmt(x) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# model JSON


def _model_document(model: ModelSpec) -> dict:
    return {
        "K": model.n_components,
        "mu": [float(v) for v in model.mu],
        "A": [[float(v) for v in row] for row in model.influence],
        "phi": float(model.dispersion),
        "kernel": {"kind": model.kernel.kind, "tau": float(model.kernel.tau)},
    }


def write_model_json(model: ModelSpec, path) -> None:
    Path(path).write_text(json.dumps(_model_document(model), indent=2) + "\n")


def _load_json(path) -> dict:
    text = Path(path).read_text()
    try:
        document = json.loads(text)
    except json.JSONDecodeError as err:
        raise FileFormatError(path, err.lineno, err.colno, err.msg) from err
    if not isinstance(document, dict):
        raise FileFormatError(path, None, None, "expected a JSON object")
    return document


def _model_from_document(document: dict, path) -> ModelSpec:
    try:
        k = int(document["K"])
        mu = np.asarray(document["mu"], dtype=float)
        influence = np.asarray(document["A"], dtype=float)
        phi = float(document["phi"])
        kernel_doc = document["kernel"]
        kind = kernel_doc["kind"]
        tau = float(kernel_doc["tau"])
    except (KeyError, TypeError, ValueError) as err:
        raise FileFormatError(path, None, None, f"bad model document: {err}") from err
    if kind != "exponential":
        raise FileFormatError(path, None, None, f"unsupported kernel kind {kind!r}")
    if mu.shape != (k,) or influence.shape != (k, k):
        raise FileFormatError(
            path, None, None, "mu and A dimensions do not match the declared K"
        )
    try:
        return ModelSpec(
            mu=mu, influence=influence, kernel=Kernel.exponential(tau), dispersion=phi
        )
    except ValueError as err:
        raise FileFormatError(path, None, None, str(err)) from err


def read_model_json(path) -> ModelSpec:
    """Read a model document (extra diagnostic keys are ignored)."""
    return _model_from_document(_load_json(path), path)


# ---------------------------------------------------------------------------
# counts CSV


def write_counts_csv(counts: CountSeries, path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t"] + [f"c{i + 1}" for i in range(counts.n_components)])
        for col in range(counts.n_bins):
            writer.writerow([counts.t0 + col] + [int(v) for v in counts.counts[:, col]])


def read_counts_csv(path) -> CountSeries:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise FileFormatError(path, 1, None, "empty file") from None
        if not header or header[0] != "t" or len(header) < 2:
            raise FileFormatError(path, 1, 1, 'expected header "t,c1,...,cK"')
        for col, name in enumerate(header[1:], start=2):
            if name != f"c{col - 1}":
                raise FileFormatError(path, 1, col, f'expected column name "c{col - 1}"')
        k = len(header) - 1
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != k + 1:
                raise FileFormatError(
                    path, line_no, None, f"expected {k + 1} fields, found {len(row)}"
                )
            parsed = []
            for col, text in enumerate(row, start=1):
                try:
                    parsed.append(int(text))
                except ValueError:
                    raise FileFormatError(
                        path, line_no, col, f"not an integer: {text!r}"
                    ) from None
            expected_t = len(rows) + 1
            if parsed[0] != expected_t:
                raise FileFormatError(
                    path, line_no, 1, f"time index must be contiguous; expected {expected_t}"
                )
            if any(v < 0 for v in parsed[1:]):
                raise FileFormatError(path, line_no, None, "counts must be non-negative")
            rows.append(parsed[1:])
    if not rows:
        raise FileFormatError(path, 2, None, "no count rows")
    return CountSeries(counts=np.asarray(rows, dtype=np.int64).T)


# ---------------------------------------------------------------------------
# decomposition CSV


def write_decomposition_csv(decomposition: CascadeDecomposition, path) -> None:
    """Long-format dump: one row per part, background rows as j=0, s=0.

    Indices are one-based on disk.  Every background cell is written (the
    grid is dense); triggered rows carry only the stored entries.
    """
    sampled = decomposition.mode == "sampled"
    value_name = "count" if sampled else "expected"
    fmt = (lambda v: str(int(v))) if sampled else _fmt
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["i", "t", "j", "s", value_name])
        background = decomposition.background
        for i in range(decomposition.n_components):
            for t in range(decomposition.n_bins):
                writer.writerow([i + 1, t + 1, 0, 0, fmt(background[i, t])])
        trig = decomposition.triggered
        for i, t, j, s, v in zip(trig.i, trig.t, trig.j, trig.s, trig.value):
            writer.writerow([i + 1, t + 1, j + 1, s + 1, fmt(v)])


def read_decomposition_csv(path) -> CascadeDecomposition:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise FileFormatError(path, 1, None, "empty file") from None
        if len(header) != 5 or header[:4] != ["i", "t", "j", "s"] or header[4] not in (
            "count",
            "expected",
        ):
            raise FileFormatError(
                path, 1, None, 'expected header "i,t,j,s,count" or "i,t,j,s,expected"'
            )
        sampled = header[4] == "count"
        bg_rows: dict[tuple[int, int], float] = {}
        tr = ([], [], [], [], [])
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise FileFormatError(path, line_no, None, "expected 5 fields")
            try:
                i, t, j, s = (int(row[c]) for c in range(4))
                value = int(row[4]) if sampled else float(row[4])
            except ValueError as err:
                raise FileFormatError(path, line_no, None, str(err)) from None
            if j == 0 and s == 0:
                bg_rows[(i - 1, t - 1)] = value
            else:
                for col, (name, val) in enumerate(zip("itj", (i, t, j)), start=1):
                    if val < 1:
                        raise FileFormatError(
                            path, line_no, col, f"{name} must be at least 1"
                        )
                tr[0].append(i - 1)
                tr[1].append(t - 1)
                tr[2].append(j - 1)
                tr[3].append(s - 1)
                tr[4].append(value)
    if not bg_rows:
        raise FileFormatError(path, None, None, "no background rows (j=0, s=0)")
    n_comp = max(key[0] for key in bg_rows) + 1
    n_bins = max(key[1] for key in bg_rows) + 1
    if len(bg_rows) != n_comp * n_bins:
        raise FileFormatError(
            path, None, None, "background rows do not cover the full grid"
        )
    dtype = np.int64 if sampled else np.float64
    background = np.zeros((n_comp, n_bins), dtype=dtype)
    for (i, t), value in bg_rows.items():
        background[i, t] = value
    triggered = TriggerMap(
        np.asarray(tr[0], dtype=np.int64),
        np.asarray(tr[1], dtype=np.int64),
        np.asarray(tr[2], dtype=np.int64),
        np.asarray(tr[3], dtype=np.int64),
        np.asarray(tr[4], dtype=dtype),
    )
    return CascadeDecomposition(
        background=background,
        triggered=triggered,
        mode="sampled" if sampled else "expected",
    )


# ---------------------------------------------------------------------------
# fit result JSON


def write_fit_json(result: FitResult, path) -> None:
    document = _model_document(result.model)
    document.update(
        {
            "log_likelihood": float(result.log_likelihood),
            "iterations": int(result.iterations),
            "converged": bool(result.converged),
            "gradient_norm": float(result.gradient_norm),
            "family": result.family,
        }
    )
    Path(path).write_text(json.dumps(document, indent=2) + "\n")


def read_fit_json(path) -> FitResult:
    document = _load_json(path)
    model = _model_from_document(document, path)
    try:
        return FitResult(
            model=model,
            log_likelihood=float(document["log_likelihood"]),
            iterations=int(document["iterations"]),
            converged=bool(document["converged"]),
            gradient_norm=float(document["gradient_norm"]),
            family=document.get("family", "negative-binomial"),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise FileFormatError(path, None, None, f"bad fit document: {err}") from err


# ---------------------------------------------------------------------------
# experiment config and report


def write_experiment_config(config: ExperimentConfig, path) -> None:
    document = {
        "K": config.n_components,
        "T_grid": list(config.horizons),
        "phi_grid": list(config.dispersions),
        "repetitions": config.repetitions,
        "mu": config.mu,
        "gamma_mean": config.influence_mean,
        "gamma_shape": config.influence_shape,
        "tau": config.tau,
        "base_seed": config.base_seed,
        "burn_in": config.burn_in,
    }
    Path(path).write_text(json.dumps(document, indent=2) + "\n")


def read_experiment_config(path) -> ExperimentConfig:
    document = _load_json(path)
    try:
        return ExperimentConfig(
            n_components=int(document["K"]),
            horizons=tuple(int(t) for t in document["T_grid"]),
            dispersions=tuple(float(p) for p in document["phi_grid"]),
            repetitions=int(document["repetitions"]),
            mu=float(document["mu"]),
            influence_mean=float(document["gamma_mean"]),
            influence_shape=float(document["gamma_shape"]),
            tau=float(document["tau"]),
            base_seed=int(document["base_seed"]),
            burn_in=bool(document.get("burn_in", False)),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise FileFormatError(path, None, None, f"bad experiment config: {err}") from err


_PLOT_SCRIPT = """\
# gnuplot script for the experiment report in this directory
set datafile separator ','
set key autotitle columnhead

set terminal pngcairo size 900,600
set output 'scatter.png'
set xlabel 'true triggered events'
set ylabel 'estimated triggered events'
plot 'scatter.csv' using 4:5 with points pt 7, x with lines lc 'gray'

set output 'qq.png'
set xlabel 'true cascade-size quantile'
set ylabel 'estimated cascade-size quantile'
plot 'qq.csv' using 4:5 with points pt 7, x with lines lc 'gray'

set output 'mse.png'
set logscale xy
set xlabel 'T'
set ylabel 'mse'
plot 'mse.csv' using 1:4 with points pt 7
"""


def write_experiment_report(report: ExperimentReport, out_dir, n_quantiles: int = 101) -> None:
    """Materialize a report directory: mse/scatter/sizes/qq CSVs + plot script."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "mse.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["T", "phi", "parameter", "mse", "bias_sq", "variance"])
        for cell in report.cells:
            for name, comp in (
                ("phi", cell.errors.dispersion),
                ("tau", cell.errors.tau),
                ("mu", cell.errors.mu),
                ("A", cell.errors.influence),
            ):
                writer.writerow(
                    [cell.horizon, _fmt(cell.dispersion), name]
                    + [_fmt(v) for v in (comp.mse, comp.bias_sq, comp.variance)]
                )

    with open(out / "scatter.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["T", "phi", "seed", "true_yc", "est_yc"])
        for cell in report.cells:
            for seed, true_val, est_val in zip(
                cell.included_seeds, cell.triggered_true, cell.triggered_estimated
            ):
                writer.writerow(
                    [cell.horizon, _fmt(cell.dispersion), seed, _fmt(true_val), _fmt(est_val)]
                )

    for name, attr in (("sizes_true.csv", "sizes_true"), ("sizes_est.csv", "sizes_estimated")):
        with open(out / name, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["T", "phi", "size"])
            for cell in report.cells:
                for value in getattr(cell, attr):
                    writer.writerow([cell.horizon, _fmt(cell.dispersion), _fmt(value)])

    with open(out / "qq.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["T", "phi", "prob", "true_quantile", "est_quantile"])
        for cell in report.cells:
            points = qq_points(cell.sizes_true, cell.sizes_estimated, n_quantiles)
            probs = (np.arange(n_quantiles) + 0.5) / n_quantiles
            for prob, (true_q, est_q) in zip(probs, points):
                writer.writerow(
                    [cell.horizon, _fmt(cell.dispersion), _fmt(prob), _fmt(true_q), _fmt(est_q)]
                )

    with open(out / "exclusions.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["T", "phi", "included", "excluded"])
        for cell in report.cells:
            writer.writerow([cell.horizon, _fmt(cell.dispersion), cell.included, cell.excluded])

    (out / "plots.gp").write_text(_PLOT_SCRIPT)
