"""Configuration, the analysis pipeline, threshold bisection and parameter sweeps.

A configuration is a JSON document::

    {
      "plant": {"k": 0.5, "m_min": 1, "m_max": 4},        # or {"A": .., "b": .., "c": ..}
      "rates": {"eps": 1},                               # or affine / tabulated bounds
      "grid": {"dkappa": 0.01, "dtheta": null},
      "run": {"n_max": 20, "tau": null, "oracle_trials": 0, "seed": 0, "oracle_tol": 0.02},
      "mode": "analyze",
      "bisect": {"param": "k", "lo": 0.2, "hi": 0.7, "tol": 0.005}
    }

Affine rates: ``{"delta_min": {"offset": a, "slope": b}, "delta_max": {...}}``;
tabulated: ``{"kappa": [...], "delta_min": [...], "delta_max": [...]}``.
The ``eps`` form needs the example-family plant.
"""

from __future__ import annotations

import copy
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .errors import BracketError, ConfigError, DomainError
from .hjb import GridSpec, make_grid, solve
from .plant import OscillationReport, PlantSystem, PolarField, check_oscillatory
from .ratebound import AffineRateBound, RateBoundSpec, TabulatedRateBound, symmetric_affine
from .simulate import OracleReport, greedy_witness, oracle_check
from .verdict import COMPARISON_METHOD_BOUND, StabilityVerdict, Status, comparator_bounds, decide

log = logging.getLogger(__name__)

MODES = ("analyze", "bisect", "sweep")
EXAMPLE_KEYS = ("k", "m_min", "m_max")
SHORTCUTS = {"k": "plant.k", "m_min": "plant.m_min", "m_max": "plant.m_max", "eps": "rates.eps"}


def expand_example(k: float, m_min: float, m_max: float, eps: float):
    """Plant and rate bounds for ``m(t) x'' + k x' + x = 0`` with
    ``m_min <= m <= m_max`` and ``|m'| <= eps``, state ``(x', x)``."""
    if not 0 < m_min < m_max:
        raise DomainError("need 0 < m_min < m_max")
    if eps < 0 or k < 0:
        raise DomainError("need eps >= 0 and k >= 0")
    A = [[-k / m_min, -1.0 / m_min], [1.0, 0.0]]
    b = [1.0 / m_min - 1.0 / m_max, 0.0]
    c = [k, 1.0]
    return PlantSystem(A, b, c), symmetric_affine(eps, m_min / (m_max - m_min))


@dataclass
class GridConfig:
    dkappa: float = 0.01
    dtheta: float | None = None


@dataclass
class RunConfig:
    n_max: int = 20
    tau: float | None = None
    oracle_trials: int = 0
    seed: int = 0
    oracle_tol: float = 0.02


@dataclass
class BisectConfig:
    param: str = "k"
    lo: float = 0.2
    hi: float = 0.7
    tol: float = 0.005


@dataclass
class AnalysisConfig:
    plant: dict
    rates: dict
    grid: GridConfig = field(default_factory=GridConfig)
    run: RunConfig = field(default_factory=RunConfig)
    mode: str = "analyze"
    bisect: BisectConfig | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "AnalysisConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(raw) - {"plant", "rates", "grid", "run", "mode", "bisect"}
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        for key in ("plant", "rates"):
            if not isinstance(raw.get(key), dict):
                raise ConfigError(f"'{key}' block is required")
        plant, rates = dict(raw["plant"]), dict(raw["rates"])
        raw_form = {"A", "b", "c"} <= plant.keys()
        example_form = set(EXAMPLE_KEYS) <= plant.keys()
        if raw_form == example_form:
            raise ConfigError("plant needs exactly one of {A, b, c} or {k, m_min, m_max}")
        forms = ["eps" in rates, {"delta_min", "delta_max"} <= rates.keys()]
        if sum(forms) != 1:
            raise ConfigError("rates need exactly one of {eps} or {delta_min, delta_max}")
        if "eps" in rates and not example_form:
            raise ConfigError("rates {eps} requires the example-family plant")
        mode = raw.get("mode", "analyze")
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        try:
            grid = GridConfig(**raw.get("grid", {}))
            run = RunConfig(**raw.get("run", {}))
            bis = BisectConfig(**raw["bisect"]) if raw.get("bisect") is not None else None
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        if mode == "bisect" and bis is None:
            raise ConfigError("mode 'bisect' requires a 'bisect' block")
        return cls(plant, rates, grid, run, mode, bis)

    def to_dict(self) -> dict:
        out = {
            "plant": self.plant,
            "rates": self.rates,
            "grid": vars(self.grid).copy(),
            "run": vars(self.run).copy(),
            "mode": self.mode,
        }
        if self.bisect is not None:
            out["bisect"] = vars(self.bisect).copy()
        return out

    @property
    def is_example(self) -> bool:
        return set(EXAMPLE_KEYS) <= self.plant.keys()

    def build(self) -> tuple[PlantSystem, RateBoundSpec]:
        try:
            if self.is_example:
                p = {key: float(self.plant[key]) for key in EXAMPLE_KEYS}
                if "eps" in self.rates:
                    return expand_example(p["k"], p["m_min"], p["m_max"], float(self.rates["eps"]))
                plant, _ = expand_example(p["k"], p["m_min"], p["m_max"], 0.0)
            else:
                plant = PlantSystem(self.plant["A"], self.plant["b"], self.plant["c"])
            return plant, _build_rates(self.rates)
        except (TypeError, KeyError, ValueError) as exc:
            if isinstance(exc, DomainError):
                raise
            raise ConfigError(f"invalid plant or rates: {exc}") from None

    def with_param(self, key: str, value) -> "AnalysisConfig":
        raw = self.to_dict()
        set_path(raw, SHORTCUTS.get(key, key), value)
        return AnalysisConfig.from_dict(raw)


def _build_rates(rates: dict) -> RateBoundSpec:
    lo, hi = rates["delta_min"], rates["delta_max"]
    if isinstance(lo, dict) and isinstance(hi, dict):
        return AffineRateBound(
            float(lo.get("offset", 0.0)), float(lo.get("slope", 0.0)),
            float(hi.get("offset", 0.0)), float(hi.get("slope", 0.0)),
        )
    if "kappa" not in rates:
        raise ConfigError("tabulated rates need a 'kappa' array")
    return TabulatedRateBound(rates["kappa"], lo, hi)


def set_path(raw: dict, dotted: str, value):
    parts = dotted.split(".")
    node = raw
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {dotted!r}")
    node[parts[-1]] = value


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(raw: dict, assignment: str) -> dict:
    """Apply ``key=value`` (dotted path or shortcut k/m_min/m_max/eps) to a raw config."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not key=value")
    key, value = assignment.split("=", 1)
    out = copy.deepcopy(raw)
    set_path(out, SHORTCUTS.get(key.strip(), key.strip()), parse_value(value.strip()))
    return out


def load_config(path, overrides=()) -> AnalysisConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for assignment in overrides:
        raw = apply_override(raw, assignment)
    return AnalysisConfig.from_dict(raw)


@dataclass
class AnalysisReport:
    verdict: StabilityVerdict
    grid: GridSpec
    oscillation: OscillationReport
    comparators: dict | None = None
    oracle: OracleReport | None = None
    witness_growth: float | None = None
    files: dict = field(default_factory=dict)
    field: object = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = self.verdict.to_dict()
        out["grid"] = {
            "dkappa": self.grid.dkappa,
            "dtheta": self.grid.dtheta,
            "J": self.grid.J,
            "steps_per_pi": self.grid.steps_per_pi,
            "cfl_number": self.grid.cfl_number,
        }
        out["swapped_coordinates"] = self.oscillation.swapped
        out["min_abs_g"] = self.oscillation.min_abs_g
        if self.comparators is not None:
            out["comparator_bounds"] = self.comparators
        if self.witness_growth is not None:
            out["witness_growth"] = self.witness_growth
        if self.oracle is not None:
            out["oracle"] = {k: v for k, v in self.oracle.to_dict().items() if k != "violating"}
        return out

    def summary(self) -> str:
        v = self.verdict
        lines = [f"verdict: {v.status.value}"]
        if v.witness_N is not None:
            lines.append(f"  witness N = {v.witness_N} (theta = {v.witness_N}*pi)")
        lines.append(f"  rho range at that row: [{v.rho_min_at_N:.6g}, {v.rho_max_at_N:.6g}], margin {v.margin:.4g}, tau {v.tau:.4g}")
        lines.append(f"  grid: dkappa={self.grid.dkappa:g} dtheta={self.grid.dtheta:.6g} ({self.grid.steps_per_pi} steps per pi)")
        if self.oscillation.swapped:
            lines.append("  note: plant rotated clockwise; analysed in swapped coordinates (x2, x1)")
        if self.witness_growth is not None:
            lines.append(f"  destabilising witness growth r(N pi)/r(0) = {self.witness_growth:.6g}")
        if self.comparators is not None:
            c = self.comparators
            lines.append(f"  literature bounds on k: circle {c['circle']:.4g}, comparison {c['comparison_method']:.4g}, ignatyev {c['ignatyev']:.4g}")
        if self.oracle is not None:
            o = self.oracle
            lines.append(f"  oracle: {o.trials} trials, {o.violations} violations, max growth/rho {o.max_ratio:.4g}")
        for name, path in self.files.items():
            lines.append(f"  wrote {name}: {path}")
        return "\n".join(lines)


def _comparators(config: AnalysisConfig):
    if not (config.is_example and "eps" in config.rates):
        return None
    out = comparator_bounds(float(config.plant["m_min"]), float(config.plant["m_max"]),
                            float(config.rates["eps"]))
    out["comparison_method"] = COMPARISON_METHOD_BOUND
    return out


def run_analysis(config: AnalysisConfig, out_dir=None, write_rho: bool = True,
                 rho_stride: int = 1) -> AnalysisReport:
    """check_oscillatory -> make_grid -> solve -> decide [-> witness] [-> oracle]."""
    plant, spec = config.build()
    osc = check_oscillatory(plant)
    grid = make_grid(osc.plant, spec, config.grid.dkappa, config.grid.dtheta)
    keep = "all" if (out_dir is not None and write_rho) else "pi"
    field_ = solve(osc.plant, spec, grid.dkappa, config.run.n_max, grid=grid, keep=keep)
    verdict = decide(field_, config.run.tau)
    report = AnalysisReport(verdict, grid, osc, _comparators(config), field=field_)

    witness = None
    if verdict.status is Status.UNSTABLE:
        if field_.branch is None:
            field_ = solve(osc.plant, spec, grid.dkappa, verdict.witness_N, grid=grid)
        witness = greedy_witness(field_, verdict.witness_N)
        report.witness_growth = witness.growth

    if out_dir is not None:
        out = Path(out_dir)
        if write_rho:
            report.files["rho"] = str(io.write_rho_csv(report.field, out / "rho.csv", rho_stride))
        report.files["rows_at_pi"] = str(io.write_rows_at_pi_csv(report.field, out / "rows_at_pi.csv"))
        if witness is not None:
            report.files["trajectory"] = str(io.write_trajectory_csv(witness, out / "trajectory_witness.csv"))

    try:
        if config.run.oracle_trials > 0:
            report.oracle = oracle_check(report.field, PolarField(osc.plant), spec,
                                         config.run.oracle_trials, config.run.seed,
                                         config.run.oracle_tol, raise_on_violation=False)
    finally:
        if out_dir is not None:
            if report.oracle is not None:
                report.files["oracle"] = str(io.write_json(report.oracle.to_dict(), Path(out_dir) / "oracle.json"))
            report.files["verdict"] = str(Path(out_dir) / "verdict.json")
            io.write_json(report.to_dict(), Path(out_dir) / "verdict.json")
    if report.oracle is not None and report.oracle.violations:
        from .errors import OracleViolation

        raise OracleViolation(
            f"{report.oracle.violations} oracle violations", report.oracle.violating[0], report.oracle
        )
    return report


def quick_verdict(config: AnalysisConfig) -> StabilityVerdict:
    plant, spec = config.build()
    osc = check_oscillatory(plant)
    grid = make_grid(osc.plant, spec, config.grid.dkappa, config.grid.dtheta)
    return decide(solve(osc.plant, spec, grid.dkappa, config.run.n_max, grid=grid, keep="pi"),
                  config.run.tau)


@dataclass
class BisectResult:
    threshold: float
    last_unstable: float
    first_stable: float
    inconclusive_band: tuple | None
    trace: list

    def to_dict(self):
        return {
            "threshold": self.threshold,
            "last_unstable": self.last_unstable,
            "first_stable": self.first_stable,
            "inconclusive_band": list(self.inconclusive_band) if self.inconclusive_band else None,
            "trace": self.trace,
        }


def bisect_threshold(config: AnalysisConfig) -> BisectResult:
    """Locate the boundary between Unstable (at ``lo``) and Stable (at ``hi``).

    The Stable edge is bisected first, treating Inconclusive as not-Stable;
    if Inconclusive points were met, the Unstable edge is then bisected
    below them. The result is the midpoint of [last Unstable, first Stable]
    with the Inconclusive band in between reported separately.
    """
    b = config.bisect
    if b is None:
        raise ConfigError("bisection needs a 'bisect' block")
    if not b.lo < b.hi or not b.tol > 0:
        raise ConfigError("bisection needs lo < hi and tol > 0")
    trace = []

    def status(x):
        v = quick_verdict(config.with_param(b.param, x))
        trace.append({"value": x, "status": v.status.value, "witness_N": v.witness_N})
        log.info("%s=%.6g -> %s", b.param, x, v.status.value)
        return v.status

    s_lo, s_hi = status(b.lo), status(b.hi)
    if s_lo is not Status.UNSTABLE or s_hi is not Status.STABLE:
        raise BracketError(
            f"{b.param}={b.lo} gives {s_lo.value} and {b.param}={b.hi} gives {s_hi.value}; "
            "need Unstable at lo and Stable at hi"
        )
    lo, hi = b.lo, b.hi  # invariant: lo not Stable, hi Stable
    last_unstable = b.lo
    inconclusive = []
    while hi - lo > b.tol:
        mid = 0.5 * (lo + hi)
        s = status(mid)
        if s is Status.STABLE:
            hi = mid
        else:
            lo = mid
            if s is Status.UNSTABLE:
                last_unstable = mid
            else:
                inconclusive.append(mid)
    band = None
    if inconclusive:
        a, c = last_unstable, min(inconclusive)
        while c - a > b.tol:
            mid = 0.5 * (a + c)
            s = status(mid)
            if s is Status.UNSTABLE:
                a = mid
            else:
                c = mid
                inconclusive.append(mid)
        last_unstable = a
        band = (min(inconclusive), max(inconclusive))
    return BisectResult(0.5 * (last_unstable + hi), last_unstable, hi, band, trace)


def parse_range(spec: str):
    """``name=start:stop:step`` -> (name, values), stop inclusive."""
    if "=" not in spec:
        raise ConfigError(f"sweep parameter {spec!r} must look like k=0.2:0.7:0.05")
    name, rng = spec.split("=", 1)
    try:
        start, stop, step = (float(x) for x in rng.split(":"))
    except ValueError:
        raise ConfigError(f"bad range {rng!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"bad range {rng!r}")
    n = int(math.floor((stop - start) / step + 1e-9))
    return name.strip(), [round(start + i * step, 12) for i in range(n + 1)]


def sweep(config: AnalysisConfig, param: str, values, out_dir=None) -> list[dict]:
    """Analyse each parameter value; per-point artifacts go to ``out_dir/<param>=<value>/``."""

    def one(value):
        cfg = config.with_param(param, value)
        sub = None if out_dir is None else Path(out_dir) / f"{param}={value:g}"
        rep = run_analysis(cfg, sub, write_rho=False)
        v = rep.verdict
        return {"value": value, "status": v.status.value, "witness_N": v.witness_N,
                "rho_min": v.rho_min_at_N, "rho_max": v.rho_max_at_N, "margin": v.margin}

    threads = max(1, int(os.environ.get("ABSTAB_THREADS", "1")))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, values))
    else:
        rows = [one(v) for v in values]
    if out_dir is not None:
        path = Path(out_dir) / "sweep.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            fh.write("value,status,witness_N,rho_min,rho_max,margin\n")
            for r in rows:
                wn = "" if r["witness_N"] is None else r["witness_N"]
                fh.write(f"{r['value']!r},{r['status']},{wn},{r['rho_min']!r},{r['rho_max']!r},{r['margin']!r}\n")
    return rows
