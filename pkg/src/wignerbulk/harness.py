"""Experiment orchestration: deterministic Monte Carlo, comparisons, reports.

Each sample index maps to its own random streams, so a worker pool can
compute samples in any order; the reducer merges results in index order.
Outputs are a pure function of the resolved config.
"""
from __future__ import annotations

import csv
import io
import json
import math
import multiprocessing
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from itertools import combinations
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .config import EnsembleSpec, ExperimentConfig
from .eigensolver import ConvergenceError, Spectrum, eigenvalues
from .ensemble import ou_interpolate, sample_wigner
from .gapstats import MeanAccumulator, correlation_sample, gap_sample_curve
from .predict import fredholm_table, gap_limit_cdf, sine_correlation_integral
from .rng import sample_streams
from .spectral import (
    EnergyWindow,
    LocalLawReport,
    eta_grid,
    interval_density_check,
    localization_check,
    semicircle_ks,
    sup_deviation,
)
from .testfunctions import from_descriptor

__all__ = [
    "COMMANDS",
    "ComparisonReport",
    "EnsembleRun",
    "RunAborted",
    "RunResult",
    "collect",
    "ks_distance",
    "run_experiment",
    "universality_compare",
]

COMMANDS = ("sample", "gap", "correlation", "local-law", "localization", "fredholm-table", "compare")
MAX_FAILURE_RATE = 0.01
# rough bound on memory held by one worker: a handful of complex n x n arrays
MEMORY_BUDGET_BYTES = 8 * 2**30


class RunAborted(RuntimeError):
    pass


# --- per-sample work ---------------------------------------------------------


@dataclass(frozen=True)
class _Job:
    n: int
    seed: int
    experiment_id: str
    ensemble: EnsembleSpec
    eigensolver: str
    window: EnergyWindow
    measures: tuple[str, ...]
    s_grid: tuple[float, ...] = ()
    test_function: str = ""
    quad_nodes: int = 16
    kappa: float = 0.5
    etas: tuple[float, ...] = ()
    step_fraction: float = 0.25
    dump_matrix: bool = False


@dataclass
class SampleResult:
    index: int
    ok: bool
    values: np.ndarray | None = None
    gap: np.ndarray | None = None
    correlation: float | None = None
    sup_dev: np.ndarray | None = None
    density_ratio: float | None = None
    matrix_rows: list | None = None
    error: str = ""


def _diagonalize(h, solver: str) -> Spectrum:
    if solver == "lapack":
        return Spectrum(np.sort(np.linalg.eigvalsh(h.entries), kind="stable"))
    return eigenvalues(h)


def _run_sample(job: _Job, index: int) -> SampleResult:
    matrix_rng, ou_rng = sample_streams(job.seed, job.experiment_id, index)
    off, dia = job.ensemble.atoms(job.n)
    h = sample_wigner(job.n, off, dia, matrix_rng)
    t = job.ensemble.ou_t(job.n)
    if t is not None:
        h = ou_interpolate(h, t, ou_rng)
    rows = list(h.upper_rows()) if job.dump_matrix and index == 0 else None
    try:
        spec = _diagonalize(h, job.eigensolver)
    except ConvergenceError as exc:
        return SampleResult(index, False, error=str(exc))
    del h
    res = SampleResult(index, True, values=spec.values, matrix_rows=rows)
    if "gap" in job.measures:
        res.gap = gap_sample_curve(spec, job.window, job.s_grid)
    if "correlation" in job.measures:
        f = from_descriptor(json.loads(job.test_function))
        res.correlation = correlation_sample(spec, f, job.window, job.quad_nodes)
    if "local_law" in job.measures:
        res.sup_dev = np.array([sup_deviation(spec, eta, job.kappa, job.step_fraction) for eta in job.etas])
    if "density" in job.measures:
        res.density_ratio = interval_density_check(spec, job.window)["max_ratio"]
    return res


def _worker_cap(n: int, workers: int, samples: int) -> int:
    per_worker = 8 * 16 * n * n
    return max(1, min(workers, samples, MEMORY_BUDGET_BYTES // per_worker))


def _map_samples(job: _Job, samples: int, workers: int) -> list[SampleResult]:
    workers = _worker_cap(job.n, workers, samples)
    if workers == 1:
        return [_run_sample(job, i) for i in range(samples)]
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        # map() yields in index order whatever the completion order
        return list(pool.map(partial(_run_sample, job), range(samples), chunksize=max(1, samples // (4 * workers))))


@dataclass
class EnsembleRun:
    """Successful per-sample results of one ensemble, in index order."""

    name: str
    samples: int
    results: list[SampleResult]
    failures: int
    failure_messages: list[str] = field(default_factory=list)

    @property
    def spectra(self) -> list[Spectrum]:
        return [Spectrum(r.values) for r in self.results]

    def stacked(self, attr: str) -> np.ndarray:
        return np.array([getattr(r, attr) for r in self.results], dtype=float)

    def mean(self, attr: str) -> MeanAccumulator:
        rows = [getattr(r, attr) for r in self.results]
        acc = MeanAccumulator(np.shape(rows[0]) if rows else ())
        for row in rows:
            acc.add(row)
        return acc


def collect(
    cfg: ExperimentConfig,
    measures: Sequence[str] = (),
    ensemble: EnsembleSpec | None = None,
    experiment_id: str | None = None,
    name: str = "",
) -> EnsembleRun:
    """Sample, diagonalize and measure ``cfg.samples`` matrices."""
    etas = tuple(float(e) for e in eta_grid(cfg.n, cfg.local_law.delta, cfg.local_law.eta_count)) if "local_law" in measures else ()
    job = _Job(
        n=cfg.n,
        seed=cfg.seed,
        experiment_id=experiment_id or cfg.experiment_id,
        ensemble=ensemble or cfg.ensemble,
        eigensolver=cfg.eigensolver,
        window=cfg.window,
        measures=tuple(measures),
        s_grid=cfg.gap.s_grid,
        test_function=json.dumps(cfg.correlation.test_function, sort_keys=True),
        quad_nodes=cfg.correlation.quad_nodes,
        kappa=cfg.local_law.kappa,
        etas=etas,
        step_fraction=cfg.local_law.step_fraction,
        dump_matrix=cfg.output.dump_matrix,
    )
    results = _map_samples(job, cfg.samples, cfg.workers)
    ok = [r for r in results if r.ok]
    failed = [r for r in results if not r.ok]
    run = EnsembleRun(name or job.experiment_id, cfg.samples, ok, len(failed), [f"sample {r.index}: {r.error}" for r in failed])
    if run.failures > MAX_FAILURE_RATE * cfg.samples:
        raise RunAborted(f"{run.failures} of {cfg.samples} samples failed to diagonalize: {run.failure_messages[:3]}")
    if not ok:
        raise RunAborted("no successful samples")
    return run


# --- comparisons ---------------------------------------------------------------


def _check_monotone(values: np.ndarray, label: str) -> None:
    if np.any(~np.isfinite(values)):
        raise ValueError(f"{label} has non-finite values")
    if np.any(np.diff(values) < -1e-9):
        raise ValueError(f"{label} is not nondecreasing")


def ks_distance(curve_a, curve_b, grid_a=None, grid_b=None) -> float:
    """``sup |A - B|`` over a grid for two nondecreasing grid functions.

    With no grids the curves must share one grid. With two different grids both
    curves are linearly interpolated to the union grid (constant beyond their
    ends).
    """
    a = np.asarray(curve_a, dtype=float)
    b = np.asarray(curve_b, dtype=float)
    _check_monotone(a, "curve A")
    _check_monotone(b, "curve B")
    if grid_a is None and grid_b is None:
        if a.shape != b.shape:
            raise ValueError("curves on a common grid must have equal length")
        return float(np.max(np.abs(a - b))) if a.size else 0.0
    ga = np.asarray(grid_a if grid_a is not None else grid_b, dtype=float)
    gb = np.asarray(grid_b if grid_b is not None else grid_a, dtype=float)
    if ga.shape != a.shape or gb.shape != b.shape:
        raise ValueError("grid and curve lengths differ")
    if np.any(np.diff(ga) <= 0) or np.any(np.diff(gb) <= 0):
        raise ValueError("grids must be strictly increasing")
    union = np.union1d(ga, gb)
    return float(np.max(np.abs(np.interp(union, ga, a) - np.interp(union, gb, b))))


def _bootstrap_floor(curves: np.ndarray, reps: int, rng: np.random.Generator) -> float:
    """Bootstrap mean of ``sup |mean* - mean|`` for a stack of per-sample curves."""
    if reps == 0 or curves.shape[0] < 2:
        return 0.0
    base = curves.mean(axis=0)
    s = curves.shape[0]
    dev = [np.max(np.abs(curves[rng.integers(0, s, s)].mean(axis=0) - base)) for _ in range(reps)]
    return float(np.mean(dev))


def _pair(a: str, b: str) -> str:
    return f"{a}~{b}"


@dataclass
class ComparisonReport:
    """Per-ensemble results, pairwise and vs-theory distances, thresholds.

    For ``statistic == "gap"`` distances are KS distances of the gap curves and
    ``threshold`` bounds them. For ``"correlation"`` they are z-scores
    ``|difference| / combined std_error`` bounded by ``threshold``.
    """

    statistic: str
    ensembles: dict
    pairwise: dict
    vs_theory: dict
    threshold: float
    noise_floor: dict = field(default_factory=dict)
    theory: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(d <= self.threshold for d in list(self.pairwise.values()) + list(self.vs_theory.values()))

    def to_json(self) -> dict:
        return {
            "statistic": self.statistic,
            "ensembles": self.ensembles,
            "pairwise": self.pairwise,
            "vs_theory": self.vs_theory,
            "noise_floor": self.noise_floor,
            "theory": self.theory,
            "threshold": self.threshold,
            "threshold_note": "engineering choice; the limit theorems give no finite-n rate",
            "passed": self.passed,
        }


def _gap_theory(cfg: ExperimentConfig) -> np.ndarray:
    return np.array([gap_limit_cdf(s, cfg.fredholm.m, cfg.fredholm.h) for s in cfg.gap.s_grid])


def _compare_gap(cfg: ExperimentConfig, runs: Mapping[str, EnsembleRun], theory) -> ComparisonReport:
    grid = np.asarray(cfg.gap.s_grid)
    theory = _gap_theory(cfg) if theory is None else np.asarray(theory, dtype=float)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed, spawn_key=(0x6A7,))))
    curves, floors, ens = {}, {}, {}
    for name, run in runs.items():
        acc = run.mean("gap")
        curves[name] = np.asarray(acc.mean)
        floors[name] = _bootstrap_floor(run.stacked("gap"), cfg.compare.bootstrap, rng)
        ens[name] = {
            "samples": acc.count,
            "failures": run.failures,
            "value": [float(x) for x in acc.mean],
            "std_error": [float(x) for x in acc.std_error],
            "bootstrap_sup_deviation": floors[name],
        }
    pairwise, noise = {}, {}
    for a, b in combinations(runs, 2):
        pairwise[_pair(a, b)] = ks_distance(curves[a], curves[b])
        noise[_pair(a, b)] = math.hypot(floors[a], floors[b])
    vs_theory = {name: ks_distance(curves[name], theory) for name in runs}
    return ComparisonReport(
        "gap", ens, pairwise, vs_theory, cfg.compare.threshold, noise,
        {"s_grid": [float(s) for s in grid], "cdf": [float(x) for x in theory]},
    )


def _compare_correlation(cfg: ExperimentConfig, runs: Mapping[str, EnsembleRun], theory) -> ComparisonReport:
    f = from_descriptor(cfg.correlation.test_function)
    if theory is None:
        value, err = sine_correlation_integral(f, return_error=True)
    else:
        value, err = float(theory), 0.0
    est, ens = {}, {}
    for name, run in runs.items():
        acc = run.mean("correlation")
        est[name] = (float(acc.mean), float(acc.std_error))
        ens[name] = {"samples": acc.count, "failures": run.failures, "value": est[name][0], "std_error": est[name][1]}

    def z(diff, se):
        if se == 0:
            return 0.0 if diff == 0 else math.inf
        return abs(diff) / se

    pairwise = {_pair(a, b): z(est[a][0] - est[b][0], math.hypot(est[a][1], est[b][1])) for a, b in combinations(runs, 2)}
    vs_theory = {name: z(est[name][0] - value, math.hypot(est[name][1], err)) for name in runs}
    return ComparisonReport(
        "correlation", ens, pairwise, vs_theory, cfg.compare.z_threshold, {},
        {"k": f.k, "test_function": f.to_dict(), "value": value, "quad_error": err},
    )


def _comparable(a: ExperimentConfig, b: ExperimentConfig) -> bool:
    neutral = dict(ensemble=a.ensemble, experiment_id=a.experiment_id, output=a.output, workers=a.workers, compare=a.compare)
    return replace(b, **neutral) == a


def universality_compare(
    cfg_a: ExperimentConfig,
    cfg_b: ExperimentConfig,
    theory=None,
    statistic: str = "gap",
    names: tuple[str, str] = ("A", "B"),
) -> ComparisonReport:
    """Run two ensembles with otherwise identical settings and compare them.

    ``theory`` is the limiting gap curve on the config's ``s_grid`` (or the
    limiting correlation integral); computed from the predictor when omitted.
    """
    if not _comparable(cfg_a, cfg_b):
        raise ValueError("configs must differ only in the ensemble spec")
    if statistic not in ("gap", "correlation"):
        raise ValueError(f"unknown statistic {statistic!r}")
    if names[0] == names[1]:
        raise ValueError("ensemble names must differ")
    measure = (statistic,)
    runs = {
        names[0]: collect(cfg_a, measure, experiment_id=f"{cfg_a.experiment_id}/{names[0]}", name=names[0]),
        names[1]: collect(cfg_b, measure, experiment_id=f"{cfg_b.experiment_id}/{names[1]}", name=names[1]),
    }
    return (_compare_gap if statistic == "gap" else _compare_correlation)(cfg_a, runs, theory)


# --- report files ----------------------------------------------------------------


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _versions() -> dict:
    import numba
    import scipy

    return {
        "wignerbulk": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


@dataclass
class RunResult:
    command: str
    out_dir: Path
    files: list[str]
    manifest: dict
    report: object = None
    wall_time: float = 0.0


class _Writer:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: list[str] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> None:
        (self.out_dir / name).write_text(text, encoding="utf-8")
        self.files.append(name)

    def spectra(self, run: EnsembleRun, name: str = "spectra.csv") -> None:
        n = run.results[0].values.size
        header = ["sample_index"] + [f"lambda_{i}" for i in range(1, n + 1)]
        self.write(name, _csv_text(header, ([r.index] + [float(x) for x in r.values] for r in run.results)))

    def matrix(self, run: EnsembleRun, name: str = "matrix.csv") -> None:
        rows = next((r.matrix_rows for r in run.results if r.matrix_rows is not None), None)
        if rows is not None:
            self.write(name, _csv_text(["l", "k", "re", "im"], rows))


def _gap_rows(grid, acc: MeanAccumulator):
    return ([float(s), float(v), float(e), acc.count] for s, v, e in zip(grid, acc.mean, acc.std_error))


CORR_HEADER = ["stat_id", "k", "u", "eps", "value", "std_error", "samples"]


def run_experiment(cfg: ExperimentConfig, command: str = "sample") -> RunResult:
    """Run one CLI command and write its CSV/JSON reports plus ``manifest.json``.

    Wall time goes to ``run.log`` so that every CSV/JSON output is
    byte-identical for identical (config, seed).
    """
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}; expected one of {COMMANDS}")
    start = time.perf_counter()
    out = _Writer(Path(cfg.output.dir))
    runs: dict[str, EnsembleRun] = {}
    report: object = None
    w = cfg.window

    if command == "fredholm-table":
        rows = fredholm_table(cfg.fredholm.alphas, cfg.fredholm.m, cfg.fredholm.h)
        header = ["alpha", "E", "E_err", "density", "cdf"]
        out.write("fredholm.csv", _csv_text(header, ([r[h] for h in header] for r in rows)))
        report = rows
    elif command == "compare":
        if len(cfg.compare.ensembles) < 2:
            raise ValueError("compare needs at least two entries in compare.ensembles")
        for name, ens in cfg.compare.ensembles:
            runs[name] = collect(cfg, cfg.compare.statistics, ensemble=ens, experiment_id=f"{cfg.experiment_id}/{name}", name=name)
        reports = {}
        if "gap" in cfg.compare.statistics:
            rep = _compare_gap(cfg, runs, None)
            reports["gap"] = rep
            for name, run in runs.items():
                out.write(f"gap_{name}.csv", _csv_text(["s", "value", "std_error", "samples"], _gap_rows(cfg.gap.s_grid, run.mean("gap"))))
            theory_rows = ([s, c, 0.0, 0] for s, c in zip(rep.theory["s_grid"], rep.theory["cdf"]))
            out.write("gap_theory.csv", _csv_text(["s", "value", "std_error", "samples"], theory_rows))
        if "correlation" in cfg.compare.statistics:
            rep = _compare_correlation(cfg, runs, None)
            reports["correlation"] = rep
            k = rep.theory["k"]
            rows = [[name, k, w.u, w.eps, e["value"], e["std_error"], e["samples"]] for name, e in rep.ensembles.items()]
            rows.append(["theory", k, w.u, w.eps, rep.theory["value"], rep.theory["quad_error"], 0])
            out.write("correlation.csv", _csv_text(CORR_HEADER, rows))
        out.write("comparison.json", _json_text({s: r.to_json() for s, r in reports.items()}))
        report = reports
    else:
        measures = {
            "sample": ("density",),
            "gap": ("gap",),
            "correlation": ("correlation",),
            "local-law": ("local_law",),
            "localization": (),
        }[command]
        run = collect(cfg, measures, name="main")
        runs["main"] = run
        if command == "sample":
            ratios = run.stacked("density_ratio")
            report = {
                "n": cfg.n,
                "samples": len(run.results),
                "semicircle_ks": semicircle_ks(run.spectra),
                "interval_density_max_ratio": {
                    "mean": float(np.mean(ratios)),
                    "std_error": float(np.std(ratios, ddof=1) / math.sqrt(ratios.size)) if ratios.size > 1 else 0.0,
                    "max": float(np.max(ratios)),
                },
            }
            out.spectra(run)
            out.write("summary.json", _json_text(report))
        elif command == "gap":
            acc = run.mean("gap")
            report = acc
            out.write("gap.csv", _csv_text(["s", "value", "std_error", "samples"], _gap_rows(cfg.gap.s_grid, acc)))
        elif command == "correlation":
            acc = run.mean("correlation")
            f = from_descriptor(cfg.correlation.test_function)
            value, err = sine_correlation_integral(f, return_error=True)
            rows = [[f"correlation_k{f.k}", f.k, w.u, w.eps, float(acc.mean), float(acc.std_error), acc.count]]
            rows.append(["theory", f.k, w.u, w.eps, value, err, 0])
            out.write("correlation.csv", _csv_text(CORR_HEADER, rows))
            report = {"value": float(acc.mean), "std_error": float(acc.std_error), "samples": acc.count, "theory": value}
        elif command == "local-law":
            ll = cfg.local_law
            etas = eta_grid(cfg.n, ll.delta, ll.eta_count)
            report = LocalLawReport(ll.kappa, ll.delta, etas, run.stacked("sup_dev"), ll.eps0)
            out.write("local_law.json", _json_text(dict(report.to_json(), n=cfg.n)))
        elif command == "localization":
            report = localization_check(run.spectra, cfg.localization.delta_idx)
            bound = cfg.n ** -0.6
            out.write("localization.json", _json_text(dict(report, n=cfg.n, reference_bound=bound, within_bound=report["ensemble_max"] <= bound)))
        if cfg.output.dump_spectra and command != "sample":
            out.spectra(run)
    if cfg.output.dump_matrix and runs:
        out.matrix(next(iter(runs.values())))

    manifest = {
        "command": command,
        "experiment_id": cfg.experiment_id,
        "config_hash": cfg.hash(),
        "config": {k: v for k, v in cfg.to_dict().items() if k not in ("output", "workers")},
        "seed": cfg.seed,
        "n": cfg.n,
        "samples_requested": cfg.samples,
        "samples_ok": {name: len(r.results) for name, r in runs.items()},
        "failures": {name: r.failures for name, r in runs.items()},
        "failure_messages": {name: r.failure_messages for name, r in runs.items()},
        "versions": _versions(),
        "outputs": sorted(out.files),
    }
    out.write("manifest.json", _json_text(manifest))
    wall = time.perf_counter() - start
    (out.out_dir / "run.log").write_text(f"command={command} wall_time_s={wall:.3f}\n", encoding="utf-8")
    return RunResult(command, out.out_dir, out.files, manifest, report, wall)
