"""Reproducible Monte-Carlo recovery experiments and their artifacts.

An experiment row fixes a dictionary (n1 FIR + n2 TM functions with a
pole recipe), a truth (a synthetic sparse coefficient vector or a named
benchmark system), a sampling budget (m samples from an N-point grid)
and a recovery threshold, then repeats trials with per-trial random
streams derived from one master seed.

Per-trial streams come from numpy's SeedSequence with spawn key
(row_index, trial_index), so trials are independent, reproducible, and
safe to run in parallel; artifacts are written after a deterministic
sort by trial index, which makes reruns byte-identical.

Artifacts per run directory:

* ``table.csv``    one row per experiment: model, sparsity,
                   measurements, max, min, average, order, rate;
* ``trials.jsonl`` one trial record per line;
* ``hist_<model>.csv``  error histogram (bin_left, count) per row;
* ``clusters.csv`` cluster sizes of recovered coefficient vectors, for
                   presets that cluster;
* ``run_meta.json`` environment fingerprint (versions, master seed).

Built-in presets reproduce the published recovery tables; the same
pipeline runs hand-written YAML configs.
"""

from __future__ import annotations

import csv
import json
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .identification import (
    PoleSpec,
    TrialRecord,
    RecoveryStats,
    cluster_coefficients,
    generate_ground_truth,
    h2_error,
    h2_error_to_function,
    identify,
    measure,
    reconstruction_order,
    recovery_stats,
    system_function,
    SYSTEMS,
)
from .l1_solver import Tolerances
from .rational_basis import basis_coherence, sparsity_report, uniqueness_check
from .sensing import (
    build_composite,
    build_grid,
    draw_sample_set,
    gram_diagnostics,
    matrix_coherence,
    measurement_bound,
)

__all__ = [
    "ConfigError",
    "TruthSpec",
    "ExperimentConfig",
    "Preset",
    "RowReport",
    "ReportBundle",
    "PRESET_NAMES",
    "preset",
    "load_config",
    "config_to_dict",
    "config_from_dict",
    "run_preset",
    "run_config",
    "run_rows",
    "report_from_trials",
    "diagnose",
    "format_diagnostics",
    "DiagnosticReport",
]

HIST_BIN_WIDTH = 0.05
SQRT3_2 = math.sqrt(3.0) / 2.0


class ConfigError(Exception):
    """Invalid experiment configuration; ``problems`` lists everything."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class TruthSpec:
    """What the trials try to recover.

    ``synthetic`` draws a fresh sparse coefficient vector per trial with
    s1 + s2 unit spikes; ``system`` measures a named benchmark transfer
    function, in which case s1/s2 are nominal sparsities kept for table
    display and diagnostics.
    """

    kind: str = "synthetic"
    s1: int = 0
    s2: int = 0
    amplitude_mode: str = "plus_one"
    system: str = ""


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment row (one model line of one table)."""

    label: str
    n1: int
    n2: int
    m: int
    grid_size: int
    trials: int
    threshold: float
    pole_spec: PoleSpec
    truth: TruthSpec
    error_metric: str = "h2"  # 'rel_coeff' | 'h2'
    noise_radius: float = 0.0
    tolerances: Tolerances = field(default_factory=Tolerances)
    quadrature_size: int = 16384

    @property
    def sparsity(self) -> int:
        return self.truth.s1 + self.truth.s2

    def validate(self) -> list[str]:
        bad = []
        if self.n1 < 0 or self.n2 < 0 or self.n1 + self.n2 < 1:
            bad.append("need n1 >= 0, n2 >= 0 and n1 + n2 >= 1")
        if self.grid_size < 2:
            bad.append("grid size N must be >= 2")
        admissible = max((self.grid_size - 1) // 2, 0)
        if not 1 <= self.m <= admissible:
            bad.append(f"m must lie in 1..{admissible} "
                       f"(admissible upper-circle indices of N={self.grid_size})")
        if self.trials < 1:
            bad.append("trials must be positive")
        if self.threshold <= 0:
            bad.append("threshold must be positive")
        if self.noise_radius < 0:
            bad.append("noise_radius must be nonnegative")
        if self.quadrature_size < 4 * max(self.n1 + self.n2, 1):
            bad.append("quadrature grid must be much denser than the dictionary")
        if self.error_metric not in ("rel_coeff", "h2"):
            bad.append(f"unknown error metric {self.error_metric!r}")
        t = self.truth
        if t.kind == "synthetic":
            if t.s1 < 0 or t.s2 < 0 or t.s1 > self.n1 or t.s2 > self.n2:
                bad.append("sparsity must satisfy 0 <= s1 <= n1, 0 <= s2 <= n2")
            if t.s1 + t.s2 < 1:
                bad.append("synthetic truth needs at least one spike")
            if t.amplitude_mode not in ("plus_one", "random_sign"):
                bad.append(f"unknown spike amplitude mode {t.amplitude_mode!r}")
        elif t.kind == "system":
            if t.system not in SYSTEMS:
                bad.append(f"unknown system {t.system!r}; known: {sorted(SYSTEMS)}")
            if self.error_metric == "rel_coeff":
                bad.append("rel_coeff metric needs a synthetic truth")
        else:
            bad.append(f"unknown truth kind {t.kind!r}")
        if self.pole_spec.kind == "fixed" and len(self.pole_spec.values) > self.n2:
            bad.append("fixed pole head longer than n2")
        if self.pole_spec.kind == "random_head" and self.pole_spec.head > self.n2:
            bad.append("random pole head longer than n2")
        if self.pole_spec.kind == "fixed" and any(
                abs(v) >= 1 for v in self.pole_spec.values):
            bad.append("fixed poles must satisfy |xi| < 1")
        if self.tolerances.max_iterations < 1:
            bad.append("max_iterations must be positive")
        return bad


@dataclass(frozen=True)
class Preset:
    name: str
    rows: tuple[ExperimentConfig, ...]
    cluster_label: str | None = None
    cluster_k: int = 10


@dataclass(frozen=True)
class RowReport:
    config: ExperimentConfig
    stats: RecoveryStats
    order_at_min_error: int
    records: tuple[TrialRecord, ...]


@dataclass(frozen=True)
class ReportBundle:
    name: str
    master_seed: int
    out_dir: Path
    rows: tuple[RowReport, ...]
    table_path: Path
    trials_path: Path
    hist_paths: dict[str, Path]
    clusters_path: Path | None
    meta_path: Path

    def all_failed(self) -> bool:
        return all(rec.solver_status == "failed"
                   for row in self.rows for rec in row.records)


# --- presets ---------------------------------------------------------------

def _row(label, *, n1, n2, m, N, threshold, pole_spec, truth,
         metric="h2", trials=100) -> ExperimentConfig:
    return ExperimentConfig(label=label, n1=n1, n2=n2, m=m, grid_size=N,
                            trials=trials, threshold=threshold,
                            pole_spec=pole_spec, truth=truth,
                            error_metric=metric)


def _preset_table1() -> Preset:
    row = _row("two-ortho", n1=50, n2=50, m=30, N=4000, threshold=5e-4,
               pole_spec=PoleSpec.uniform(),
               truth=TruthSpec(kind="synthetic", s1=3, s2=2),
               metric="rel_coeff")
    return Preset("table1", (row,))


def _preset_table2() -> Preset:
    poles = PoleSpec.fixed([0.01, SQRT3_2])
    truth = TruthSpec(kind="system", system="two_pole_rational", s1=0, s2=2)
    rows = (
        _row("two-ortho", n1=100, n2=100, m=28, N=1000, threshold=5e-4,
             pole_spec=poles, truth=truth),
        _row("TM", n1=0, n2=100, m=28, N=1000, threshold=5e-4,
             pole_spec=poles, truth=truth),
    )
    return Preset("table2", rows)


def _preset_table3() -> Preset:
    truth = TruthSpec(kind="system", system="three_tap_fir", s1=3, s2=0)
    rows = (
        _row("two-ortho", n1=100, n2=100, m=30, N=1000, threshold=5e-4,
             pole_spec=PoleSpec.random_head(3), truth=truth),
        _row("FIR", n1=100, n2=0, m=30, N=1000, threshold=5e-4,
             pole_spec=PoleSpec.fixed([]), truth=truth),
    )
    return Preset("table3", rows)


def _preset_table4(two_ortho_m: int) -> Preset:
    truth = TruthSpec(kind="system", system="two_pole_rational", s1=3, s2=2)
    fir_truth = TruthSpec(kind="system", system="two_pole_rational", s1=30, s2=0)
    rows = (
        _row("two-ortho", n1=100, n2=100, m=two_ortho_m, N=1000, threshold=5e-4,
             pole_spec=PoleSpec.fixed([SQRT3_2]), truth=truth),
        _row("FIR", n1=500, n2=0, m=180, N=1000, threshold=5e-4,
             pole_spec=PoleSpec.fixed([]), truth=fir_truth),
    )
    return Preset(f"table4_{'table' if two_ortho_m == 30 else 'text'}", rows)


def _preset_table5() -> Preset:
    truth = TruthSpec(kind="system", system="two_pole_rational", s1=3, s2=6)
    rows = []
    for pole in (0.9, 0.85, 0.8):
        for mult in range(2, 7):
            rows.append(_row(
                f"xi={pole},mult={mult}", n1=100, n2=100, m=54, N=1000,
                threshold=5e-4, pole_spec=PoleSpec.fixed([pole] * mult),
                truth=truth))
    return Preset("table5", tuple(rows))


def _preset_table6() -> Preset:
    truth = TruthSpec(kind="system", system="repeated_pole_rational", s1=3, s2=2)
    fir_truth = TruthSpec(kind="system", system="repeated_pole_rational", s1=30, s2=0)
    rows = (
        _row("two-ortho", n1=100, n2=50, m=50, N=1000, threshold=1e-3,
             pole_spec=PoleSpec.fixed([SQRT3_2] * 5), truth=truth),
        _row("FIR", n1=500, n2=0, m=120, N=1000, threshold=1e-3,
             pole_spec=PoleSpec.fixed([]), truth=fir_truth),
    )
    return Preset("table6", rows)


def _preset_table7() -> Preset:
    truth = TruthSpec(kind="system", system="repeated_pole_rational", s1=3, s2=2)
    fir_truth = TruthSpec(kind="system", system="repeated_pole_rational", s1=30, s2=0)
    rows = [
        _row("FIR", n1=500, n2=0, m=120, N=1000, threshold=5e-3,
             pole_spec=PoleSpec.fixed([]), truth=fir_truth),
    ]
    for pole in (0.9, 0.85, 0.8):
        rows.append(_row(
            f"xi={pole}", n1=100, n2=100, m=60, N=1000, threshold=5e-3,
            pole_spec=PoleSpec.fixed([pole] * 7), truth=truth))
    return Preset("table7", tuple(rows), cluster_label="xi=0.85", cluster_k=10)


_PRESET_BUILDERS = {
    "table1": _preset_table1,
    "table2": _preset_table2,
    "table3": _preset_table3,
    "table4_table": lambda: _preset_table4(30),
    "table4_text": lambda: _preset_table4(40),
    "table5": _preset_table5,
    "table6": _preset_table6,
    "table7": _preset_table7,
}

PRESET_NAMES = tuple(sorted(_PRESET_BUILDERS))


def preset(name: str) -> Preset:
    try:
        return _PRESET_BUILDERS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}") \
            from None


# --- config files ----------------------------------------------------------

def _as_float(value, name, problems):
    try:
        return float(value)
    except (TypeError, ValueError):
        problems.append(f"field {name!r} must be a number, got {value!r}")
        return 0.0


def _as_int(value, name, problems):
    try:
        return int(value)
    except (TypeError, ValueError):
        problems.append(f"field {name!r} must be an integer, got {value!r}")
        return 0


def config_from_dict(doc: dict) -> tuple[ExperimentConfig, int]:
    """Build a config row plus master seed from a parsed mapping.

    Collects every violation before raising so a bad file is diagnosed
    in one pass.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    problems: list[str] = []
    known = {"label", "n1", "n2", "s1", "s2", "m", "N", "trials", "threshold",
             "master_seed", "pole_spec", "truth", "spike_amplitude_mode",
             "noise_radius", "error_metric", "solver", "quadrature_N"}
    for key in doc:
        if key not in known:
            problems.append(f"unknown config field {key!r}")
    for key in ("n1", "n2", "m", "N", "trials", "threshold"):
        if key not in doc:
            problems.append(f"missing required field {key!r}")
    truth_doc = doc.get("truth", {"kind": "synthetic"})
    if not isinstance(truth_doc, dict):
        problems.append("field 'truth' must be a mapping")
        truth_doc = {"kind": "synthetic"}
    kind = truth_doc.get("kind", "synthetic")
    truth = TruthSpec(
        kind=str(kind),
        s1=_as_int(doc.get("s1", 0), "s1", problems),
        s2=_as_int(doc.get("s2", 0), "s2", problems),
        amplitude_mode=str(doc.get("spike_amplitude_mode", "plus_one")),
        system=str(truth_doc.get("name", "")),
    )
    pole_doc = doc.get("pole_spec", {"kind": "fixed", "values": []})
    try:
        pole_spec = PoleSpec.from_dict(pole_doc) if isinstance(pole_doc, dict) \
            else PoleSpec.fixed([])
        if not isinstance(pole_doc, dict):
            problems.append("field 'pole_spec' must be a mapping")
    except (ValueError, KeyError) as exc:
        problems.append(f"bad pole_spec: {exc}")
        pole_spec = PoleSpec.fixed([])
    solver_doc = doc.get("solver", {})
    if not isinstance(solver_doc, dict):
        problems.append("field 'solver' must be a mapping")
        solver_doc = {}
    tol = Tolerances(
        feasibility_tol=_as_float(solver_doc.get("feasibility_tol", 1e-7),
                                  "solver.feasibility_tol", problems),
        optimality_tol=_as_float(solver_doc.get("optimality_tol", 1e-6),
                                 "solver.optimality_tol", problems),
        max_iterations=_as_int(solver_doc.get("max_iterations", 50000),
                               "solver.max_iterations", problems),
    )
    metric = doc.get("error_metric")
    if metric is None:
        metric = "rel_coeff" if truth.kind == "synthetic" else "h2"
    config = ExperimentConfig(
        label=str(doc.get("label", "custom")),
        n1=_as_int(doc.get("n1", 0), "n1", problems),
        n2=_as_int(doc.get("n2", 0), "n2", problems),
        m=_as_int(doc.get("m", 0), "m", problems),
        grid_size=_as_int(doc.get("N", 0), "N", problems),
        trials=_as_int(doc.get("trials", 0), "trials", problems),
        threshold=_as_float(doc.get("threshold", 0.0), "threshold", problems),
        pole_spec=pole_spec,
        truth=truth,
        error_metric=str(metric),
        noise_radius=_as_float(doc.get("noise_radius", 0.0), "noise_radius", problems),
        tolerances=tol,
        quadrature_size=_as_int(doc.get("quadrature_N", 16384), "quadrature_N", problems),
    )
    problems.extend(config.validate())
    if problems:
        raise ConfigError(problems)
    return config, _as_int(doc.get("master_seed", 0), "master_seed", problems)


def config_to_dict(config: ExperimentConfig, master_seed: int) -> dict:
    """Inverse of :func:`config_from_dict`, for fixtures and presets."""
    doc = {
        "label": config.label,
        "n1": config.n1,
        "n2": config.n2,
        "s1": config.truth.s1,
        "s2": config.truth.s2,
        "m": config.m,
        "N": config.grid_size,
        "trials": config.trials,
        "threshold": config.threshold,
        "master_seed": master_seed,
        "pole_spec": config.pole_spec.to_dict(),
        "spike_amplitude_mode": config.truth.amplitude_mode,
        "noise_radius": config.noise_radius,
        "error_metric": config.error_metric,
        "quadrature_N": config.quadrature_size,
        "solver": {
            "feasibility_tol": config.tolerances.feasibility_tol,
            "optimality_tol": config.tolerances.optimality_tol,
            "max_iterations": config.tolerances.max_iterations,
        },
    }
    if config.truth.kind == "system":
        doc["truth"] = {"kind": "system", "name": config.truth.system}
    else:
        doc["truth"] = {"kind": "synthetic"}
    return doc


def load_config(path) -> tuple[ExperimentConfig, int]:
    """Parse and validate a YAML experiment config file."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(doc)


# --- trial execution --------------------------------------------------------

def _run_one_trial(config: ExperimentConfig, row_index: int, trial_index: int,
                   master_seed: int) -> TrialRecord:
    rng = np.random.default_rng(
        np.random.SeedSequence(master_seed, spawn_key=(row_index, trial_index)))
    if config.truth.kind == "synthetic":
        truth = generate_ground_truth(config.n1, config.n2, config.truth.s1,
                                      config.truth.s2, config.pole_spec, rng,
                                      config.truth.amplitude_mode)
        poles = truth.poles
    else:
        poles = config.pole_spec.realize(config.n2, rng)
        truth = system_function(config.truth.system)
    grid = build_grid(config.grid_size)
    omega = draw_sample_set(grid, config.m, rng)
    b = measure(truth, grid, omega, config.noise_radius, rng)

    failed = False
    try:
        theta_hat, solver = identify(b, omega, grid, config.n1, config.n2, poles,
                                     config.noise_radius, config.tolerances)
    except (ValueError, np.linalg.LinAlgError):
        failed = True
    if failed:
        from .identification import CoefficientVector
        theta_hat = CoefficientVector(np.zeros(config.n1 + config.n2),
                                      config.n1, config.n2)
        status, residual, iterations = "failed", math.inf, 0
    else:
        status, residual, iterations = solver.status, solver.residual_norm, \
            solver.iterations

    rel_error = None
    if config.truth.kind == "synthetic":
        scale = float(np.linalg.norm(truth.theta.values))
        rel_error = float(np.linalg.norm(theta_hat.values - truth.theta.values)) / scale
        h2 = h2_error(theta_hat, truth.theta, poles, config.quadrature_size)
    else:
        h2 = h2_error_to_function(theta_hat, poles, truth, config.quadrature_size)
    error = rel_error if config.error_metric == "rel_coeff" else h2
    if failed:
        error = math.inf

    return TrialRecord(
        trial=trial_index,
        model=config.label,
        master_seed=master_seed,
        spawn_key=(row_index, trial_index),
        omega=tuple(omega.indices),
        n1=config.n1,
        n2=config.n2,
        error=float(error),
        rel_coeff_error=rel_error,
        h2_error=float(h2),
        recon_order=reconstruction_order(theta_hat),
        solver_status=status,
        residual_norm=float(residual),
        iterations=int(iterations),
        threshold=config.threshold,
        sparsity=config.sparsity,
        theta_hat=tuple(float(v) for v in theta_hat.values),
    )


def _trial_task(args) -> TrialRecord:
    return _run_one_trial(*args)


def _run_row(config: ExperimentConfig, row_index: int, master_seed: int,
             pool: ProcessPoolExecutor | None) -> list[TrialRecord]:
    tasks = [(config, row_index, t, master_seed) for t in range(config.trials)]
    if pool is None:
        records = [_trial_task(t) for t in tasks]
    else:
        chunk = max(1, config.trials // (4 * (pool._max_workers or 1)))
        records = list(pool.map(_trial_task, tasks, chunksize=chunk))
    records.sort(key=lambda r: r.trial)
    return records


# --- artifact writers --------------------------------------------------------

def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_")


def _write_table_csv(path: Path, rows: list[RowReport]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model", "sparsity", "measurements", "max", "min",
                         "average", "order", "rate"])
        for row in rows:
            s = row.stats
            writer.writerow([
                row.config.label, row.config.sparsity, row.config.m,
                repr(s.max_error), repr(s.min_error), repr(s.average_error),
                row.order_at_min_error, repr(s.recover_rate),
            ])


def _write_trials_jsonl(path: Path, rows: list[RowReport]) -> None:
    with open(path, "w") as fh:
        for row in rows:
            for rec in row.records:
                fh.write(json.dumps(rec.to_json_dict(), sort_keys=True,
                                    separators=(",", ":")))
                fh.write("\n")


def _histogram(errors: np.ndarray) -> list[tuple[float, int]]:
    finite = errors[np.isfinite(errors)]
    top = float(finite.max(initial=0.0))
    nbins = max(int(math.ceil(top / HIST_BIN_WIDTH)), 1)
    counts, edges = np.histogram(finite, bins=nbins,
                                 range=(0.0, nbins * HIST_BIN_WIDTH))
    return [(float(edges[i]), int(counts[i])) for i in range(nbins)]


def _write_hist_csv(path: Path, errors: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_left", "count"])
        for left, count in _histogram(errors):
            writer.writerow([repr(left), count])


def _write_clusters_csv(path: Path, sizes: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["cluster", "size"])
        for j, size in enumerate(sizes, start=1):
            writer.writerow([j, int(size)])


# --- runners -----------------------------------------------------------------

def run_rows(name: str, rows, master_seed: int, out_dir, jobs: int | None = None,
             cluster_label: str | None = None, cluster_k: int = 10) -> ReportBundle:
    """Run experiment rows and write all artifacts into ``out_dir``."""
    rows = tuple(rows)
    problems = []
    for row in rows:
        problems.extend(f"{row.label}: {p}" for p in row.validate())
    if problems:
        raise ConfigError(problems)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if jobs is None:
        jobs = os.cpu_count() or 1
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        reports = []
        for row_index, config in enumerate(rows):
            records = _run_row(config, row_index, master_seed, pool)
            stats = recovery_stats([r.error for r in records], config.threshold)
            best = min(records, key=lambda r: r.error)
            reports.append(RowReport(config=config, stats=stats,
                                     order_at_min_error=best.recon_order,
                                     records=tuple(records)))
    finally:
        if pool is not None:
            pool.shutdown()

    table_path = out_dir / "table.csv"
    trials_path = out_dir / "trials.jsonl"
    _write_table_csv(table_path, reports)
    _write_trials_jsonl(trials_path, reports)

    hist_paths = {}
    for report in reports:
        path = out_dir / f"hist_{_slug(report.config.label)}.csv"
        _write_hist_csv(path, np.asarray(report.stats.errors))
        hist_paths[report.config.label] = path

    clusters_path = None
    if cluster_label is not None:
        target = next((r for r in reports if r.config.label == cluster_label), None)
        if target is None:
            raise ConfigError(f"cluster row {cluster_label!r} not among rows")
        rng = np.random.default_rng(
            np.random.SeedSequence(master_seed, spawn_key=(len(rows), 0)))
        result = cluster_coefficients(
            [np.asarray(rec.theta_hat) for rec in target.records],
            cluster_k, rng)
        clusters_path = out_dir / "clusters.csv"
        _write_clusters_csv(clusters_path, result.sizes)

    meta_path = out_dir / "run_meta.json"
    meta = {
        "package": "sparsid",
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "run": name,
        "master_seed": master_seed,
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")

    return ReportBundle(name=name, master_seed=master_seed, out_dir=out_dir,
                        rows=tuple(reports), table_path=table_path,
                        trials_path=trials_path, hist_paths=hist_paths,
                        clusters_path=clusters_path, meta_path=meta_path)


def run_preset(name: str, master_seed: int, out_dir,
               jobs: int | None = None) -> ReportBundle:
    """Run a named preset with the given master seed."""
    p = preset(name)
    return run_rows(p.name, p.rows, master_seed, out_dir, jobs,
                    cluster_label=p.cluster_label, cluster_k=p.cluster_k)


def run_config(path, out_dir, jobs: int | None = None,
               master_seed: int | None = None) -> ReportBundle:
    """Run a YAML config file; ``master_seed`` overrides the file's seed."""
    config, file_seed = load_config(path)
    seed = file_seed if master_seed is None else master_seed
    return run_rows(config.label, (config,), seed, out_dir, jobs)


def report_from_trials(path) -> list[dict]:
    """Recompute the table rows from a trials.jsonl file.

    Groups records by model in order of first appearance and rebuilds
    rate, extremes and the order at the minimum-error trial.
    """
    groups: dict[str, list[TrialRecord]] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = TrialRecord.from_json_dict(json.loads(line))
            groups.setdefault(rec.model, []).append(rec)
    if not groups:
        raise ValueError(f"no trial records in {path}")
    rows = []
    for model, records in groups.items():
        stats = recovery_stats([r.error for r in records], records[0].threshold)
        best = min(records, key=lambda r: r.error)
        rows.append({
            "model": model,
            "sparsity": records[0].sparsity,
            "measurements": len(records[0].omega),
            "max": stats.max_error,
            "min": stats.min_error,
            "average": stats.average_error,
            "order": best.recon_order,
            "rate": stats.recover_rate,
        })
    return rows


# --- pre-flight diagnostics ---------------------------------------------------

@dataclass(frozen=True)
class DiagnosticReport:
    label: str
    poles_head: tuple[float, ...]
    basis_coherence: float | None
    matrix_coherence: float | None
    uniqueness_holds: bool | None
    uniqueness_margin: float | None
    bound: int | None
    bound_valid: bool | None
    bound_bracket: float | None
    pole_factor: float | None
    mu_max: float | None
    fir_gram_deviation: float | None
    tm_gram_deviation: float | None
    cross_gram_deviation: float | None


def diagnose(config: ExperimentConfig, master_seed: int = 0,
             delta: float = 0.1, constant: float = 1.0) -> DiagnosticReport:
    """Pre-flight recoverability report for one experiment row.

    Realizes the poles from the trial-0 stream, then reports the basis
    and matrix coherences, the uniqueness verdict at the configured
    sparsity (epsilon = 0), the sufficient-measurement bound for the
    nominal support (first s1 FIR and s2 TM indices), and the Gram
    deviations at the configured grid size.  Informational only; no
    value gates the experiment.
    """
    problems = config.validate()
    if problems:
        raise ConfigError(problems)
    rng = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(0, 0)))
    poles = config.pole_spec.realize(config.n2, rng)
    grid = build_grid(config.grid_size)
    composite = build_composite(grid, config.n1, config.n2,
                                poles if config.n2 else None)

    mu = None
    if config.n2 >= 1:
        mu = basis_coherence(poles, config.n2).value
    mat_mu = None
    if config.n1 >= 1 and config.n2 >= 1:
        mat_mu = matrix_coherence(composite)

    unique = margin = None
    if mu is not None:
        check = uniqueness_check(
            sparsity_report(np.ones(config.truth.s1), 0.0),
            sparsity_report(np.ones(config.truth.s2), 0.0), mu)
        unique, margin = check.unique, check.margin

    bound = valid = bracket = pole_factor = mu_max = None
    if mu is not None and config.truth.s1 + config.truth.s2 >= 1:
        t1 = tuple(range(1, min(config.truth.s1, config.n1) + 1))
        t2 = tuple(range(1, min(config.truth.s2, config.n2) + 1))
        mb = measurement_bound(t1, t2, delta, constant, composite, mu)
        bound, valid, bracket = mb.bound, mb.valid, mb.bracket
        pole_factor, mu_max = mb.pole_factor, mb.mu_max

    gram = gram_diagnostics(composite)
    return DiagnosticReport(
        label=config.label,
        poles_head=poles.poles[:8],
        basis_coherence=mu,
        matrix_coherence=mat_mu,
        uniqueness_holds=unique,
        uniqueness_margin=margin,
        bound=bound,
        bound_valid=valid,
        bound_bracket=bracket,
        pole_factor=pole_factor,
        mu_max=mu_max,
        fir_gram_deviation=gram.fir_deviation if config.n1 else None,
        tm_gram_deviation=gram.tm_deviation if config.n2 else None,
        cross_gram_deviation=gram.cross_deviation
        if config.n1 and config.n2 else None,
    )


def format_diagnostics(report: DiagnosticReport) -> str:
    def fmt(v):
        if v is None:
            return "n/a"
        if isinstance(v, bool):
            return "yes" if v else "no"
        if isinstance(v, float):
            return format(v, ".6g")
        return str(v)

    lines = [f"model: {report.label}"]
    lines.append(f"poles (head): {', '.join(format(p, '.6g') for p in report.poles_head)}")
    lines.append(f"basis coherence: {fmt(report.basis_coherence)}")
    lines.append(f"matrix coherence: {fmt(report.matrix_coherence)}")
    lines.append(f"uniqueness holds: {fmt(report.uniqueness_holds)}"
                 f" (margin {fmt(report.uniqueness_margin)})")
    if report.bound_valid is None:
        lines.append("bound: n/a")
    elif report.bound_valid:
        lines.append(f"bound: {report.bound} "
                     f"(pole factor {fmt(report.pole_factor)}, "
                     f"max entry {fmt(report.mu_max)})")
    else:
        lines.append(f"bound: undefined (bracket {fmt(report.bound_bracket)})")
    lines.append(f"gram deviations: fir {fmt(report.fir_gram_deviation)}, "
                 f"tm {fmt(report.tm_gram_deviation)}, "
                 f"cross {fmt(report.cross_gram_deviation)}")
    return "\n".join(lines)
