"""Cascaded rolling-window simulation and Monte Carlo ensembles."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np

from . import frp, uncertainty
from .diagnostics import BindingPattern, detect_transfer
from .market_model import (FrpRequirement, SystemSpec, WindowInfeasible, WindowInput,
                           WindowSolution, interval_cost, interval_emissions, solve_window)
from .uncertainty import CapProfile, ForecastSeries, Realization

FBD = "FBD"
RFBD = "RFBD"

# trial streams are SeedSequence([seed, _TRIAL_STREAM, j]); requirement draws use _REQ_STREAM
_TRIAL_STREAM = 0
_REQ_STREAM = 1

Requirements = Union[FrpRequirement, Mapping[tuple, FrpRequirement]]


@dataclass(frozen=True)
class DispatchMode:
    name: str
    kind: str = FBD
    caps: Optional[CapProfile] = None
    first_window_binding_cap: bool = False

    def __post_init__(self):
        if self.kind not in (FBD, RFBD):
            raise ValueError(f"mode kind must be {FBD} or {RFBD}")
        if self.kind == FBD and self.caps is not None:
            raise ValueError("FBD mode carries no caps")
        if self.kind == RFBD and self.caps is None:
            raise ValueError("RFBD mode needs a CapProfile")


@dataclass
class BindingRecord:
    interval: int
    dispatch: np.ndarray
    shed: np.ndarray
    cost: float
    emissions: float
    price_energy: float
    price_fru: np.ndarray      # advisory intervals of the window
    price_frd: np.ndarray
    patterns: list[BindingPattern]
    window: WindowSolution = field(repr=False, default=None)


@dataclass
class RollingTrajectory:
    mode: str
    records: list[BindingRecord]

    @property
    def total_cost(self) -> float:
        return sum(r.cost for r in self.records)

    @property
    def total_emissions(self) -> float:
        return sum(r.emissions for r in self.records)

    def ramp_violation(self, spec: SystemSpec, initial_dispatch) -> float:
        """Largest breach of a ramp limit along the executed binding path."""
        prev = np.asarray(initial_dispatch, dtype=float)
        up = np.array([g.ramp_up_mag for g in spec.generators])
        dn = np.array([g.ramp_down_mag for g in spec.generators])
        worst = 0.0
        for r in self.records:
            step = r.dispatch - prev
            worst = max(worst, float(np.max(step - up)), float(np.max(-step - dn)))
            prev = r.dispatch
        return max(worst, 0.0)


@dataclass
class McSummary:
    mode: str
    trials: int
    master_seed: int
    intervals: list[int]
    mean_cost: np.ndarray
    sd_cost: np.ndarray
    mean_emissions: np.ndarray
    sd_emissions: np.ndarray
    sd_defined: bool
    requirements: Requirements
    infeasible_trial_count: int
    trial_costs: np.ndarray = field(repr=False, default=None)
    trial_emissions: np.ndarray = field(repr=False, default=None)


def requirement_for(reqs: Requirements, origin: int, tau: int) -> FrpRequirement:
    if isinstance(reqs, FrpRequirement):
        return reqs
    for key in ((origin, tau), tau):
        if key in reqs:
            return reqs[key]
    raise KeyError(f"no FRP requirement for window {origin}, interval {tau}")


def window_horizon(spec: SystemSpec, forecasts: ForecastSeries, origin: int) -> tuple[int, ...]:
    w = forecasts.window(origin)
    end = min(origin + spec.window_length, origin + w.ver.shape[1], forecasts.horizon_end)
    return tuple(range(origin, end))


def build_window_input(spec: SystemSpec, mode: DispatchMode, forecasts: ForecastSeries,
                       origin: int, realized_ver, requirements: Requirements,
                       initial_dispatch, realized_load=None) -> WindowInput:
    """Assemble one window's LP data under ``mode``'s VER rules."""
    w = forecasts.window(origin)
    horizon = window_horizon(spec, forecasts, origin)
    n = len(horizon)
    load = w.load[:, :n].copy()
    if realized_load is not None:
        load[:, 0] = realized_load
    realized_ver = np.asarray(realized_ver, dtype=float)

    ver = np.empty(n)
    if mode.kind == FBD:
        ver[0] = realized_ver.sum()
        ver[1:] = w.ver[:, 1:n].sum(axis=0)
    else:
        prev = forecasts.previous(origin)
        if prev is not None:
            prior = uncertainty.apply_cap(prev.ver[:, prev.column(origin)], mode.caps, origin)
        elif mode.first_window_binding_cap:
            prior = uncertainty.apply_cap(w.ver[:, 0], mode.caps, origin)
        else:
            prior = None
        ver[0] = uncertainty.binding_ver_total(realized_ver, prior)
        for k in range(1, n):
            capped = uncertainty.apply_cap(w.ver[:, k], mode.caps, horizon[k])
            ver[k] = uncertainty.advisory_ver_total(capped)

    reqs = [FrpRequirement(0.0, 0.0)]
    reqs += [requirement_for(requirements, origin, tau) for tau in horizon[1:]]
    return WindowInput(origin, horizon, load, ver, reqs, initial_dispatch)


def run_rolling(spec: SystemSpec, mode: DispatchMode, forecasts: ForecastSeries,
                realization: Optional[Realization], requirements: Requirements,
                initial_dispatch) -> RollingTrajectory:
    """Execute every window's binding interval in sequence.

    Each solved binding dispatch becomes the next window's initial dispatch.
    A window without a feasible dispatch aborts with ``WindowInfeasible``.
    """
    realization = realization or Realization()
    g_prev = np.asarray(initial_dispatch, dtype=float)
    records = []
    for origin in forecasts.origins:
        w = forecasts.window(origin)
        realized = realization.ver.get(origin, w.ver[:, 0])
        win = build_window_input(spec, mode, forecasts, origin, realized, requirements,
                                 g_prev, realization.load.get(origin))
        sol = solve_window(spec, win)
        g = sol.dispatch[:, 0].copy()
        shed = sol.shed[:, 0].copy()
        records.append(BindingRecord(
            interval=origin,
            dispatch=g,
            shed=shed,
            cost=interval_cost(spec, g, shed),
            emissions=interval_emissions(spec, g),
            price_energy=float(sol.price_energy[0]),
            price_fru=sol.price_fru[1:].copy(),
            price_frd=sol.price_frd[1:].copy(),
            patterns=detect_transfer(sol),
            window=sol,
        ))
        g_prev = g
    return RollingTrajectory(mode.name, records)


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, _TRIAL_STREAM, trial]))


def requirement_rng(master_seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([master_seed, _REQ_STREAM]))


def sample_trajectory_realization(forecasts: ForecastSeries, error_fraction: float,
                                  rng: np.random.Generator) -> Realization:
    """Binding VER output for every window that an earlier window forecast.

    Each unit is drawn around the earlier window's advisory forecast of that
    interval; the first window keeps its own binding values.
    """
    ver = {}
    for origin in forecasts.origins:
        prev = forecasts.previous(origin)
        if prev is None:
            continue
        ver[origin] = uncertainty.sample_realization(prev.ver[:, prev.column(origin)],
                                                     error_fraction, rng)
    return Realization(ver=ver)


def _run_trial(args):
    spec, mode, forecasts, requirements, initial_dispatch, error_fraction, seed, j = args
    real = sample_trajectory_realization(forecasts, error_fraction, trial_rng(seed, j))
    try:
        traj = run_rolling(spec, mode, forecasts, real, requirements, initial_dispatch)
    except WindowInfeasible:
        return None
    return ([r.cost for r in traj.records], [r.emissions for r in traj.records])


def monte_carlo(spec: SystemSpec, mode: DispatchMode, forecasts: ForecastSeries,
                n_trials: int, master_seed: int, requirements: Requirements,
                initial_dispatch, error_fraction: float = 0.1,
                workers: int = 1) -> McSummary:
    """Average binding-interval cost and emissions over sampled realizations.

    Trial ``j`` draws from stream ``(master_seed, j)`` whatever the mode, so
    modes are compared on common random numbers; results are reduced in
    trial order, so ``workers`` does not change the output.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    tasks = [(spec, mode, forecasts, requirements, initial_dispatch, error_fraction,
              master_seed, j) for j in range(n_trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial, tasks, chunksize=max(1, n_trials // (4 * workers))))
    else:
        results = [_run_trial(t) for t in tasks]

    ok = [r for r in results if r is not None]
    infeasible = n_trials - len(ok)
    if not ok:
        raise WindowInfeasible(forecasts.origins[0], "infeasible in every trial")
    costs = np.array([r[0] for r in ok])
    ems = np.array([r[1] for r in ok])
    defined = len(ok) > 1
    sd = (lambda a: a.std(axis=0, ddof=1)) if defined else (lambda a: np.zeros(a.shape[1]))
    return McSummary(
        mode=mode.name,
        trials=n_trials,
        master_seed=master_seed,
        intervals=list(forecasts.origins),
        mean_cost=costs.mean(axis=0),
        sd_cost=sd(costs),
        mean_emissions=ems.mean(axis=0),
        sd_emissions=sd(ems),
        sd_defined=defined,
        requirements=requirements,
        infeasible_trial_count=infeasible,
        trial_costs=costs,
        trial_emissions=ems,
    )


@dataclass(frozen=True)
class RequirementDraws:
    """Shared realizations of the first advisory interval, and the per-mode sample sets."""

    interval: int
    realized: np.ndarray          # (n, n_units)
    sample_sets: dict             # mode name -> frp.SampleSet


def draw_requirement_samples(forecasts: ForecastSeries, modes, n_samples: int,
                             error_fraction: float, master_seed: int) -> RequirementDraws:
    """One realization set for the first window's first advisory interval, shared by all modes.

    Loads are treated as perfectly forecast.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    w = forecasts.windows[0]
    if w.ver.shape[1] < 2:
        raise ValueError("first window has no advisory interval")
    tau = w.origin + 1
    advisory = w.ver[:, 1]
    rng = requirement_rng(master_seed)
    realized = np.array([uncertainty.sample_realization(advisory, error_fraction, rng)
                         for _ in range(n_samples)]).reshape(n_samples, -1)
    totals = realized.sum(axis=1)
    sets = {}
    for mode in modes:
        if mode.kind == FBD:
            s = uncertainty.net_load_delta_fbd(totals, advisory.sum())
        else:
            capped = uncertainty.advisory_ver_total(uncertainty.apply_cap(advisory, mode.caps, tau))
            s = uncertainty.net_load_delta_rfbd(totals, capped)
        sets[mode.name] = frp.SampleSet(s, mode.name)
    return RequirementDraws(tau, realized, sets)


@dataclass(frozen=True)
class ModeTotals:
    mode: str
    total_cost: float
    total_emissions: float


def totals_report(results: Mapping[str, Union[McSummary, RollingTrajectory]]) -> list[ModeTotals]:
    """Cost and emissions summed over the executed binding intervals, per mode."""
    out = []
    for name, res in results.items():
        if isinstance(res, McSummary):
            out.append(ModeTotals(name, float(np.sum(res.mean_cost)), float(np.sum(res.mean_emissions))))
        else:
            out.append(ModeTotals(name, res.total_cost, res.total_emissions))
    return out
