"""JSON run configuration and the experiment drivers the CLI exposes."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import frp
from .engine import (FBD, RFBD, DispatchMode, McSummary, RequirementDraws, RollingTrajectory,
                     draw_requirement_samples, monte_carlo, run_rolling,
                     sample_trajectory_realization, trial_rng)
from .market_model import (FrpRequirement, GeneratorSpec, LoadSpec, SystemSpec, VerUnit)
from .uncertainty import CapProfile, ForecastSeries, WindowForecast


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass(frozen=True)
class GeneratorConfig:
    id: str
    energy_cost: float
    p_min: float
    p_max: float
    ramp_down_mag: float
    ramp_up_mag: float
    emission_factor: float = 0.0


@dataclass(frozen=True)
class LoadConfig:
    id: str
    shed_penalty: float


@dataclass(frozen=True)
class VerUnitConfig:
    id: str
    kind: str = "wind"


@dataclass(frozen=True)
class SystemConfig:
    generators: tuple[GeneratorConfig, ...]
    loads: tuple[LoadConfig, ...]
    ver_units: tuple[VerUnitConfig, ...]
    interval_hours: float = 1.0 / 12.0
    window_length: int = 2


@dataclass(frozen=True)
class WindowConfig:
    origin: int
    load: tuple[tuple[str, tuple[float, ...]], ...]
    ver: tuple[tuple[str, tuple[float, ...]], ...]


@dataclass(frozen=True)
class ModeConfig:
    name: str
    kind: str
    initial_dispatch: tuple[tuple[str, float], ...]
    cap_per_unit: Optional[tuple[tuple[str, float], ...]] = None
    first_window_binding_cap: bool = False


@dataclass(frozen=True)
class SamplingConfig:
    error_fraction: float = 0.1
    requirement_samples: int = 1000
    mc_trials: int = 1000
    master_seed: int = 0
    bin_width: float = 0.5


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig
    forecasts: tuple[WindowConfig, ...]
    modes: tuple[ModeConfig, ...]
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    output_dir: str = "out"

    # -- domain objects ---------------------------------------------------

    def system_spec(self) -> SystemSpec:
        s = self.system
        return SystemSpec(
            generators=tuple(GeneratorSpec(**asdict(g)) for g in s.generators),
            loads=tuple(LoadSpec(**asdict(l)) for l in s.loads),
            ver_units=tuple(VerUnit(**asdict(v)) for v in s.ver_units),
            interval_hours=s.interval_hours,
            window_length=s.window_length,
        )

    def forecast_series(self) -> ForecastSeries:
        load_ids = [l.id for l in self.system.loads]
        unit_ids = [v.id for v in self.system.ver_units]
        windows = []
        for w in self.forecasts:
            load, ver = dict(w.load), dict(w.ver)
            windows.append(WindowForecast(w.origin, [load[i] for i in load_ids],
                                          [ver[i] for i in unit_ids]))
        return ForecastSeries(tuple(windows))

    def mode(self, name: str) -> ModeConfig:
        for m in self.modes:
            if m.name == name:
                return m
        raise KeyError(name)

    def dispatch_mode(self, name: str) -> DispatchMode:
        m = self.mode(name)
        caps = None
        if m.kind == RFBD:
            per_unit = dict(m.cap_per_unit or ())
            caps = CapProfile(np.array([per_unit.get(v.id, 0.0) for v in self.system.ver_units]))
        return DispatchMode(m.name, m.kind, caps, m.first_window_binding_cap)

    def initial_dispatch(self, name: str) -> np.ndarray:
        init = dict(self.mode(name).initial_dispatch)
        return np.array([init[g.id] for g in self.system.generators], dtype=float)

    def to_dict(self) -> dict:
        s = self.system
        return {
            "system": {
                "generators": [asdict(g) for g in s.generators],
                "loads": [asdict(l) for l in s.loads],
                "ver_units": [asdict(v) for v in s.ver_units],
                "interval_hours": s.interval_hours,
                "window_length": s.window_length,
            },
            "forecasts": [{"origin": w.origin,
                           "load": {k: list(v) for k, v in w.load},
                           "ver": {k: list(v) for k, v in w.ver}} for w in self.forecasts],
            "modes": [_mode_dict(m) for m in self.modes],
            "sampling": asdict(self.sampling),
            "output_dir": self.output_dir,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _mode_dict(m: ModeConfig) -> dict:
    d = {"name": m.name, "kind": m.kind, "initial_dispatch": dict(m.initial_dispatch)}
    if m.cap_per_unit is not None:
        d["cap_per_unit"] = dict(m.cap_per_unit)
    if m.first_window_binding_cap:
        d["first_window_binding_cap"] = True
    return d


# -- parsing ------------------------------------------------------------------

def _locate(text: Optional[str], path) -> Optional[int]:
    if not text:
        return None
    pos = 0
    found = False
    for part in path:
        if isinstance(part, str):
            idx = text.find(f'"{part}"', pos)
            if idx >= 0:
                pos, found = idx, True
    return text.count("\n", 0, pos) + 1 if found else None


class _Reader:
    def __init__(self, text):
        self.text = text

    def fail(self, path, msg):
        where = ".".join(str(p) for p in path) or "<root>"
        raise ConfigError(f"{where}: {msg}", _locate(self.text, path))

    def obj(self, d, path, required, optional=()):
        if not isinstance(d, dict):
            self.fail(path, "expected an object")
        unknown = set(d) - set(required) - set(optional)
        if unknown:
            key = sorted(unknown)[0]
            self.fail(list(path) + [key], f"unknown key {key!r}")
        for k in required:
            if k not in d:
                self.fail(path, f"missing key {k!r}")
        return d

    def num(self, v, path, lo=None, strict=False):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(path, f"expected a finite number, got {v!r}")
        if lo is not None and (v < lo or (strict and v == lo)):
            self.fail(path, f"must be {'>' if strict else '>='} {lo}")
        return float(v)

    def int_(self, v, path, lo=None):
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(path, f"expected an integer, got {v!r}")
        if lo is not None and v < lo:
            self.fail(path, f"must be >= {lo}")
        return v

    def str_(self, v, path):
        if not isinstance(v, str) or not v:
            self.fail(path, "expected a non-empty string")
        return v

    def list_(self, v, path, nonempty=False):
        if not isinstance(v, list) or (nonempty and not v):
            self.fail(path, "expected a non-empty list" if nonempty else "expected a list")
        return v


def parse_config(data: dict, text: Optional[str] = None) -> RunConfig:
    """Validate a decoded JSON document. Unknown keys are rejected."""
    r = _Reader(text)
    r.obj(data, [], ["system", "forecasts", "modes"], ["sampling", "output_dir"])

    sd = r.obj(data["system"], ["system"], ["generators", "loads", "ver_units"],
               ["interval_hours", "window_length"])
    gens = []
    for i, g in enumerate(r.list_(sd["generators"], ["system", "generators"], nonempty=True)):
        p = ["system", "generators", i]
        r.obj(g, p, ["id", "energy_cost", "p_min", "p_max", "ramp_down_mag", "ramp_up_mag"],
              ["emission_factor"])
        gc = GeneratorConfig(
            r.str_(g["id"], p + ["id"]), r.num(g["energy_cost"], p + ["energy_cost"]),
            r.num(g["p_min"], p + ["p_min"], 0), r.num(g["p_max"], p + ["p_max"], 0),
            r.num(g["ramp_down_mag"], p + ["ramp_down_mag"], 0),
            r.num(g["ramp_up_mag"], p + ["ramp_up_mag"], 0),
            r.num(g.get("emission_factor", 0.0), p + ["emission_factor"], 0))
        if gc.p_min > gc.p_max:
            r.fail(p + ["p_min"], "p_min exceeds p_max")
        gens.append(gc)
    loads = []
    for i, l in enumerate(r.list_(sd["loads"], ["system", "loads"])):
        p = ["system", "loads", i]
        r.obj(l, p, ["id", "shed_penalty"])
        loads.append(LoadConfig(r.str_(l["id"], p + ["id"]), r.num(l["shed_penalty"], p + ["shed_penalty"], 0)))
    units = []
    for i, v in enumerate(r.list_(sd["ver_units"], ["system", "ver_units"])):
        p = ["system", "ver_units", i]
        r.obj(v, p, ["id"], ["kind"])
        kind = v.get("kind", "wind")
        if kind not in ("wind", "solar"):
            r.fail(p + ["kind"], "kind must be 'wind' or 'solar'")
        units.append(VerUnitConfig(r.str_(v["id"], p + ["id"]), kind))
    for name, group in (("generators", gens), ("loads", loads), ("ver_units", units)):
        ids = [u.id for u in group]
        if len(set(ids)) != len(ids):
            r.fail(["system", name], "duplicate ids")
    system = SystemConfig(
        tuple(gens), tuple(loads), tuple(units),
        r.num(sd.get("interval_hours", 1.0 / 12.0), ["system", "interval_hours"], 0, strict=True),
        r.int_(sd.get("window_length", 2), ["system", "window_length"], 2))

    windows = []
    for i, w in enumerate(r.list_(data["forecasts"], ["forecasts"], nonempty=True)):
        p = ["forecasts", i]
        r.obj(w, p, ["origin", "load", "ver"])
        origin = r.int_(w["origin"], p + ["origin"], 0)
        lengths = set()

        def series(block, ids, key):
            r.obj(block, p + [key], ids)
            out = []
            for uid in ids:
                vals = r.list_(block[uid], p + [key, uid], nonempty=True)
                out.append((uid, tuple(r.num(x, p + [key, uid], 0) for x in vals)))
                lengths.add(len(vals))
            return tuple(out)

        load = series(w["load"], [l.id for l in loads], "load")
        ver = series(w["ver"], [u.id for u in units], "ver")
        if len(lengths) > 1:
            r.fail(p, "all series in a window must have the same length")
        windows.append(WindowConfig(origin, load, ver))
    if len({w.origin for w in windows}) != len(windows):
        r.fail(["forecasts"], "duplicate window origins")

    modes = []
    gen_ids = [g.id for g in gens]
    unit_ids = [u.id for u in units]
    for i, m in enumerate(r.list_(data["modes"], ["modes"], nonempty=True)):
        p = ["modes", i]
        r.obj(m, p, ["name", "kind", "initial_dispatch"], ["cap_per_unit", "first_window_binding_cap"])
        kind = m["kind"]
        if kind not in (FBD, RFBD):
            r.fail(p + ["kind"], f"kind must be {FBD!r} or {RFBD!r}")
        r.obj(m["initial_dispatch"], p + ["initial_dispatch"], gen_ids)
        init = tuple((g, r.num(m["initial_dispatch"][g], p + ["initial_dispatch", g], 0)) for g in gen_ids)
        caps = None
        if kind == RFBD:
            if "cap_per_unit" not in m:
                r.fail(p, "RFBD mode needs cap_per_unit")
            c = m["cap_per_unit"]
            if isinstance(c, dict):
                r.obj(c, p + ["cap_per_unit"], [], unit_ids)
                caps = tuple((u, r.num(c.get(u, 0.0), p + ["cap_per_unit", u], 0)) for u in unit_ids)
            else:
                val = r.num(c, p + ["cap_per_unit"], 0)
                caps = tuple((u, val) for u in unit_ids)
        elif "cap_per_unit" in m:
            r.fail(p + ["cap_per_unit"], "FBD mode carries no caps")
        flag = m.get("first_window_binding_cap", False)
        if not isinstance(flag, bool):
            r.fail(p + ["first_window_binding_cap"], "expected true/false")
        modes.append(ModeConfig(r.str_(m["name"], p + ["name"]), kind, init, caps, flag))
    if len({m.name for m in modes}) != len(modes):
        r.fail(["modes"], "duplicate mode names")

    smp = data.get("sampling", {})
    p = ["sampling"]
    r.obj(smp, p, [], ["error_fraction", "requirement_samples", "mc_trials", "master_seed", "bin_width"])
    d = SamplingConfig()
    sampling = SamplingConfig(
        r.num(smp.get("error_fraction", d.error_fraction), p + ["error_fraction"], 0),
        r.int_(smp.get("requirement_samples", d.requirement_samples), p + ["requirement_samples"], 1),
        r.int_(smp.get("mc_trials", d.mc_trials), p + ["mc_trials"], 1),
        r.int_(smp.get("master_seed", d.master_seed), p + ["master_seed"], 0),
        r.num(smp.get("bin_width", d.bin_width), p + ["bin_width"], 0, strict=True))
    out = data.get("output_dir", "out")
    if not isinstance(out, str):
        r.fail(["output_dir"], "expected a string")
    return RunConfig(system, tuple(windows), tuple(modes), sampling, out)


def loads(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    return parse_config(data, text)


def load_config(path) -> RunConfig:
    return loads(Path(path).read_text())


def case_study_config() -> RunConfig:
    """Two-generator, two-VER, two-window study bundled with the package."""
    text = resources.files("frpdispatch").joinpath("data/case_study.json").read_text()
    return loads(text)


# -- experiment drivers -------------------------------------------------------

@dataclass
class RequirementResult:
    draws: RequirementDraws
    requirements: dict      # mode -> FrpRequirement
    histograms: dict        # mode -> frp.Histogram


def compute_requirements(cfg: RunConfig, seed: Optional[int] = None) -> RequirementResult:
    """Draw the shared sample set and turn each mode's net-load errors into requirements."""
    smp = cfg.sampling
    modes = [cfg.dispatch_mode(m.name) for m in cfg.modes]
    draws = draw_requirement_samples(cfg.forecast_series(), modes, smp.requirement_samples,
                                     smp.error_fraction, smp.master_seed if seed is None else seed)
    reqs = {name: frp.requirements_from_samples(s) for name, s in draws.sample_sets.items()}
    hists = {name: frp.build_histogram(s, smp.bin_width) for name, s in draws.sample_sets.items()}
    return RequirementResult(draws, reqs, hists)


def run_mode(cfg: RunConfig, name: str, requirement: FrpRequirement,
             trial_seed: Optional[int] = None) -> RollingTrajectory:
    """One trajectory; realization equals the forecasts unless ``trial_seed`` is given."""
    fc = cfg.forecast_series()
    real = None
    if trial_seed is not None:
        real = sample_trajectory_realization(fc, cfg.sampling.error_fraction, trial_rng(trial_seed, 0))
    return run_rolling(cfg.system_spec(), cfg.dispatch_mode(name), fc, real, requirement,
                       cfg.initial_dispatch(name))


def run_monte_carlo(cfg: RunConfig, requirements: dict, trials: Optional[int] = None,
                    seed: Optional[int] = None, workers: int = 1) -> dict[str, McSummary]:
    smp = cfg.sampling
    spec, fc = cfg.system_spec(), cfg.forecast_series()
    return {m.name: monte_carlo(spec, cfg.dispatch_mode(m.name), fc,
                                trials or smp.mc_trials,
                                smp.master_seed if seed is None else seed,
                                requirements[m.name], cfg.initial_dispatch(m.name),
                                smp.error_fraction, workers)
            for m in cfg.modes}
