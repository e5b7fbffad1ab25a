"""Experiment configuration: a JSON document validated into frozen dataclasses.

Unknown keys are errors. Every error message starts with the key path of the
offending entry, e.g. ``window.u``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any

from .ensemble import AtomDistribution, make_atom, make_truncated, paper_ou_time, truncate_atom
from .spectral import EnergyWindow
from .testfunctions import from_descriptor

__all__ = [
    "ConfigError",
    "EnsembleSpec",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "config_from_dict",
    "DEFAULT_S_GRID",
]


class ConfigError(ValueError):
    pass


DEFAULT_S_GRID = {"start": 0.0, "stop": 5.0, "step": 0.1}
DEFAULT_TEST_FUNCTION = {"type": "pair_bump", "half_width": 2.0, "pair_half_width": 1.0, "width": 0.05}


def _fail(path: str, msg: str):
    raise ConfigError(f"{path or '<document>'}: {msg}")


def _section(raw: Any, path: str, allowed: set[str]) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        _fail(path, "expected an object")
    for key in raw:
        if key not in allowed:
            _fail(f"{path}.{key}" if path else key, "unknown key")
    return raw


def _num(raw: dict, key: str, path: str, default=None, *, integer=False, positive=False, nonneg=False):
    p = f"{path}.{key}" if path else key
    val = raw.get(key, default)
    if val is None:
        _fail(p, "required")
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        _fail(p, f"expected a number, got {val!r}")
    if integer:
        if isinstance(val, float) and not val.is_integer():
            _fail(p, f"expected an integer, got {val!r}")
        val = int(val)
    else:
        val = float(val)
        if not math.isfinite(val):
            _fail(p, "must be finite")
    if positive and not val > 0:
        _fail(p, f"must be > 0, got {val!r}")
    if nonneg and val < 0:
        _fail(p, f"must be >= 0, got {val!r}")
    return val


def _bool(raw: dict, key: str, path: str, default: bool) -> bool:
    val = raw.get(key, default)
    if not isinstance(val, bool):
        _fail(f"{path}.{key}", f"expected true/false, got {val!r}")
    return val


# --- ensemble ----------------------------------------------------------------


def _atom_spec(raw: Any, path: str) -> dict:
    """Normalize an atom description to ``{"kind": ..., ...}``."""
    if isinstance(raw, str):
        raw = {"kind": raw}
    if not isinstance(raw, dict):
        _fail(path, "expected an atom kind string or object")
    kind = raw.get("kind")
    if kind in ("gaussian", "bernoulli", "uniform", "laplace"):
        _section(raw, path, {"kind"})
        return {"kind": kind}
    if kind == "three_point":
        _section(raw, path, {"kind", "points", "probs"})
        out: dict = {"kind": kind}
        for key in ("points", "probs"):
            if key in raw:
                vals = raw[key]
                if not isinstance(vals, list) or len(vals) != 3 or not all(isinstance(v, (int, float)) for v in vals):
                    _fail(f"{path}.{key}", "expected a list of three numbers")
                out[key] = [float(v) for v in vals]
        return out
    if kind == "truncated":
        _section(raw, path, {"kind", "inner", "bound"})
        if "inner" not in raw:
            _fail(f"{path}.inner", "required")
        return {"kind": kind, "inner": _atom_spec(raw["inner"], f"{path}.inner"), "bound": _num(raw, "bound", path, positive=True)}
    _fail(f"{path}.kind", f"unknown atom kind {kind!r}")


def build_atom(spec: dict, role: str) -> AtomDistribution:
    if spec["kind"] == "truncated":
        return make_truncated(build_atom(spec["inner"], role), spec["bound"])
    return make_atom(spec["kind"], role, spec.get("points"), spec.get("probs"))


@dataclass(frozen=True)
class EnsembleSpec:
    off_diagonal: dict = field(default_factory=lambda: {"kind": "gaussian"})
    diagonal: dict = field(default_factory=lambda: {"kind": "gaussian"})
    truncate: bool = False
    ou_time: float | str | None = None

    def atoms(self, n: int) -> tuple[AtomDistribution, AtomDistribution]:
        off = build_atom(self.off_diagonal, "off_diagonal")
        dia = build_atom(self.diagonal, "diagonal")
        if self.truncate:
            off, dia = truncate_atom(off, n), truncate_atom(dia, n)
        return off, dia

    def ou_t(self, n: int) -> float | None:
        if self.ou_time is None:
            return None
        if self.ou_time == "paper":
            return paper_ou_time(n)
        return float(self.ou_time)


def _ensemble(raw: Any, path: str) -> EnsembleSpec:
    raw = _section(raw, path, {"off_diagonal", "diagonal", "truncate", "ou_time"})
    off = _atom_spec(raw.get("off_diagonal", "gaussian"), f"{path}.off_diagonal")
    dia = _atom_spec(raw["diagonal"], f"{path}.diagonal") if "diagonal" in raw else dict(off)
    ou = raw.get("ou_time")
    if ou is not None and ou != "paper":
        ou = _num(raw, "ou_time", path, nonneg=True)
    spec = EnsembleSpec(off, dia, _bool(raw, "truncate", path, False), ou)
    try:
        build_atom(off, "off_diagonal"), build_atom(dia, "diagonal")
    except ValueError as exc:
        _fail(path, str(exc))
    return spec


def _check_truncation(spec: EnsembleSpec, n: int, path: str) -> None:
    if spec.truncate and n >= 2:
        try:
            spec.atoms(n)
        except ValueError as exc:
            _fail(path, str(exc))


# --- statistic sections --------------------------------------------------------


def _s_grid(raw: Any, path: str) -> tuple[float, ...]:
    if isinstance(raw, list):
        if not raw or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw):
            _fail(path, "expected a non-empty list of numbers")
        grid = [float(v) for v in raw]
    else:
        raw = _section(raw, path, {"start", "stop", "step"})
        start = _num(raw, "start", path, 0.0, nonneg=True)
        stop = _num(raw, "stop", path, 5.0, nonneg=True)
        step = _num(raw, "step", path, 0.1, positive=True)
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        if count < 1:
            _fail(path, "empty grid")
        grid = [round(start + i * step, 12) for i in range(count)]
    if any(v < 0 for v in grid) or any(b < a for a, b in zip(grid, grid[1:])):
        _fail(path, "grid must be non-negative and ascending")
    return tuple(grid)


@dataclass(frozen=True)
class GapSpec:
    s_grid: tuple[float, ...] = tuple(round(0.1 * i, 12) for i in range(51))


@dataclass(frozen=True)
class CorrelationSpec:
    test_function: dict = field(default_factory=lambda: dict(DEFAULT_TEST_FUNCTION))
    quad_nodes: int = 16

    @property
    def k(self) -> int:
        return from_descriptor(self.test_function).k


@dataclass(frozen=True)
class LocalLawSpec:
    kappa: float = 0.5
    delta: float = 0.2
    eps0: tuple[float, ...] = (0.1,)
    eta_count: int = 6
    step_fraction: float = 0.25


@dataclass(frozen=True)
class LocalizationSpec:
    delta_idx: float = 0.1


@dataclass(frozen=True)
class FredholmSpec:
    m: int = 40
    h: float = 1e-3
    alphas: tuple[float, ...] = tuple(round(0.1 * i, 12) for i in range(61))


@dataclass(frozen=True)
class CompareSpec:
    ensembles: tuple[tuple[str, EnsembleSpec], ...] = ()
    statistics: tuple[str, ...] = ("gap",)
    threshold: float = 0.05
    z_threshold: float = 4.0
    bootstrap: int = 200


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    dump_spectra: bool = False
    dump_matrix: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 400
    samples: int = 100
    seed: int = 0
    experiment_id: str = "experiment"
    workers: int = 1
    eigensolver: str = "native"
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    window: EnergyWindow = field(default_factory=lambda: EnergyWindow(0.0, 0.2))
    gap: GapSpec = field(default_factory=GapSpec)
    correlation: CorrelationSpec = field(default_factory=CorrelationSpec)
    local_law: LocalLawSpec = field(default_factory=LocalLawSpec)
    localization: LocalizationSpec = field(default_factory=LocalizationSpec)
    fredholm: FredholmSpec = field(default_factory=FredholmSpec)
    compare: CompareSpec = field(default_factory=CompareSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["compare"]["ensembles"] = {name: asdict(spec) for name, spec in self.compare.ensembles}
        return d

    def hash(self) -> str:
        """SHA-256 of the resolved configuration (output paths and worker count excluded)."""
        d = self.to_dict()
        d.pop("output")
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def with_overrides(self, **kw) -> "ExperimentConfig":
        out_dir = kw.pop("out", None)
        cfg = replace(self, **{k: v for k, v in kw.items() if v is not None})
        if out_dir is not None:
            cfg = replace(cfg, output=replace(cfg.output, dir=str(out_dir)))
        _check_sizes(cfg)
        return cfg


def _check_sizes(cfg: ExperimentConfig) -> None:
    if cfg.n < 1:
        _fail("n", "must be >= 1")
    if cfg.samples < 1:
        _fail("samples", "must be >= 1")
    if cfg.seed < 0:
        _fail("seed", "must be >= 0")
    if cfg.workers < 1:
        _fail("workers", "must be >= 1")
    _check_truncation(cfg.ensemble, cfg.n, "ensemble")
    for name, spec in cfg.compare.ensembles:
        _check_truncation(spec, cfg.n, f"compare.ensembles.{name}")


TOP_KEYS = {
    "n", "samples", "seed", "experiment_id", "workers", "eigensolver", "ensemble", "window",
    "gap", "correlation", "local_law", "localization", "fredholm", "compare", "output",
}


def config_from_dict(raw: Any) -> ExperimentConfig:
    raw = _section(raw, "", TOP_KEYS)
    d = ExperimentConfig()
    eid = raw.get("experiment_id", d.experiment_id)
    if not isinstance(eid, str) or not eid:
        _fail("experiment_id", "expected a non-empty string")
    solver = raw.get("eigensolver", d.eigensolver)
    if solver not in ("native", "lapack"):
        _fail("eigensolver", f"expected 'native' or 'lapack', got {solver!r}")

    w = _section(raw.get("window"), "window", {"u", "eps"})
    try:
        window = EnergyWindow(_num(w, "u", "window", 0.0), _num(w, "eps", "window", 0.2))
    except ValueError as exc:
        _fail("window", str(exc))

    g = _section(raw.get("gap"), "gap", {"s_grid"})
    gap = GapSpec(_s_grid(g.get("s_grid", DEFAULT_S_GRID), "gap.s_grid"))

    c = _section(raw.get("correlation"), "correlation", {"k", "test_function", "quad_nodes"})
    tf = c.get("test_function", DEFAULT_TEST_FUNCTION)
    if not isinstance(tf, dict):
        _fail("correlation.test_function", "expected an object")
    try:
        f = from_descriptor(tf)
    except (KeyError, TypeError, ValueError) as exc:
        _fail("correlation.test_function", f"invalid test function: {exc}")
    if "k" in c and _num(c, "k", "correlation", integer=True) != f.k:
        _fail("correlation.k", f"does not match the test function (k = {f.k})")
    if f.k > 3:
        _fail("correlation.k", "k > 3 not supported")
    corr = CorrelationSpec(f.to_dict(), _num(c, "quad_nodes", "correlation", 16, integer=True, positive=True))

    ll = _section(raw.get("local_law"), "local_law", {"kappa", "delta", "eps0", "eta_count", "step_fraction"})
    eps0 = ll.get("eps0", [0.1])
    if isinstance(eps0, (int, float)) and not isinstance(eps0, bool):
        eps0 = [eps0]
    if not isinstance(eps0, list) or not eps0 or not all(isinstance(x, (int, float)) and x > 0 for x in eps0):
        _fail("local_law.eps0", "expected a positive number or list of them")
    kappa = _num(ll, "kappa", "local_law", 0.5, positive=True)
    if kappa >= 2:
        _fail("local_law.kappa", "must be < 2")
    delta = _num(ll, "delta", "local_law", 0.2, positive=True)
    if delta > 1:
        _fail("local_law.delta", "must be <= 1")
    local_law = LocalLawSpec(
        kappa, delta, tuple(float(x) for x in eps0),
        _num(ll, "eta_count", "local_law", 6, integer=True, positive=True),
        _num(ll, "step_fraction", "local_law", 0.25, positive=True),
    )

    lo = _section(raw.get("localization"), "localization", {"delta_idx"})
    delta_idx = _num(lo, "delta_idx", "localization", 0.1, nonneg=True)
    if delta_idx >= 0.5:
        _fail("localization.delta_idx", "must be < 0.5")

    fr = _section(raw.get("fredholm"), "fredholm", {"m", "h", "alphas"})
    m = _num(fr, "m", "fredholm", 40, integer=True)
    if m < 4:
        _fail("fredholm.m", "must be >= 4")
    alphas = _s_grid(fr.get("alphas", {"start": 0.0, "stop": 6.0, "step": 0.1}), "fredholm.alphas")
    fredholm = FredholmSpec(m, _num(fr, "h", "fredholm", 1e-3, positive=True), alphas)

    cp = _section(raw.get("compare"), "compare", {"ensembles", "statistics", "threshold", "z_threshold", "bootstrap"})
    ens_raw = cp.get("ensembles", {})
    if not isinstance(ens_raw, dict):
        _fail("compare.ensembles", "expected an object mapping names to ensembles")
    ensembles = tuple((name, _ensemble(spec, f"compare.ensembles.{name}")) for name, spec in ens_raw.items())
    stats = cp.get("statistics", ["gap"])
    if isinstance(stats, str):
        stats = [stats]
    if not isinstance(stats, list) or not stats or any(s not in ("gap", "correlation") for s in stats):
        _fail("compare.statistics", "expected a list drawn from 'gap', 'correlation'")
    compare = CompareSpec(
        ensembles, tuple(stats),
        _num(cp, "threshold", "compare", 0.05, positive=True),
        _num(cp, "z_threshold", "compare", 4.0, positive=True),
        _num(cp, "bootstrap", "compare", 200, integer=True, nonneg=True),
    )

    o = _section(raw.get("output"), "output", {"dir", "dump_spectra", "dump_matrix"})
    out_dir = o.get("dir", "out")
    if not isinstance(out_dir, str):
        _fail("output.dir", "expected a string")
    output = OutputSpec(out_dir, _bool(o, "dump_spectra", "output", False), _bool(o, "dump_matrix", "output", False))

    cfg = ExperimentConfig(
        n=_num(raw, "n", "", d.n, integer=True),
        samples=_num(raw, "samples", "", d.samples, integer=True),
        seed=_num(raw, "seed", "", d.seed, integer=True),
        experiment_id=eid,
        workers=_num(raw, "workers", "", d.workers, integer=True),
        eigensolver=solver,
        ensemble=_ensemble(raw.get("ensemble"), "ensemble"),
        window=window,
        gap=gap,
        correlation=corr,
        local_law=local_law,
        localization=LocalizationSpec(delta_idx),
        fredholm=fredholm,
        compare=compare,
        output=output,
    )
    _check_sizes(cfg)
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment description."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<document>: invalid JSON ({exc})") from exc
    return config_from_dict(raw)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
