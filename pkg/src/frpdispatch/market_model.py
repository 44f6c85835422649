"""Energy/flexible-ramping co-optimization over one look-ahead window.

Decision variables per generator ``i`` and interval ``tau``: dispatch ``g``,
upward ramping allocation ``r_up`` and downward allocation ``r_dn``; per load
``l``: curtailed demand ``shed``.  Constraints per interval:

* power balance ``sum(g) + sum(shed) == sum(load) - ver_total``
* ramping requirements ``sum(r_up) >= R_up`` and ``sum(r_dn) >= R_dn``
* capacity headroom ``g - r_dn >= p_min`` and ``g + r_up <= p_max``
* ramp coupling ``g[tau] - g[tau-1] - r_dn >= -ramp_down`` and
  ``g[tau] - g[tau-1] + r_up <= ramp_up`` (``g[t-1]`` is the initial dispatch)
* ``0 <= shed <= load``

Costs are hourly rates ($/MWh times MW), so every dual is in $/MWh; money and
emissions for an executed interval are scaled by ``interval_hours``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import lp_core
from .lp_core import INF, StandardLp

WIND = "wind"
SOLAR = "solar"

# slack at or below this (scaled by max(1, |rhs|)) marks a constraint active
ACTIVE_TOL = 1e-7


class WindowInfeasible(RuntimeError):
    """A look-ahead window has no feasible dispatch."""

    def __init__(self, start_interval: int, status: str = "infeasible"):
        super().__init__(f"window starting at interval {start_interval} is {status}")
        self.start_interval = start_interval
        self.status = status


@dataclass(frozen=True)
class GeneratorSpec:
    id: str
    energy_cost: float
    p_min: float
    p_max: float
    ramp_down_mag: float
    ramp_up_mag: float
    emission_factor: float = 0.0

    def __post_init__(self):
        if not 0 <= self.p_min <= self.p_max:
            raise ValueError(f"generator {self.id}: need 0 <= p_min <= p_max")
        if self.ramp_down_mag < 0 or self.ramp_up_mag < 0:
            raise ValueError(f"generator {self.id}: ramp magnitudes must be >= 0")
        if self.emission_factor < 0:
            raise ValueError(f"generator {self.id}: emission_factor must be >= 0")


@dataclass(frozen=True)
class LoadSpec:
    id: str
    shed_penalty: float

    def __post_init__(self):
        if self.shed_penalty < 0:
            raise ValueError(f"load {self.id}: shed_penalty must be >= 0")


@dataclass(frozen=True)
class VerUnit:
    id: str
    kind: str = WIND

    def __post_init__(self):
        if self.kind not in (WIND, SOLAR):
            raise ValueError(f"VER unit {self.id}: kind must be 'wind' or 'solar'")


@dataclass(frozen=True)
class SystemSpec:
    generators: tuple[GeneratorSpec, ...]
    loads: tuple[LoadSpec, ...]
    ver_units: tuple[VerUnit, ...]
    interval_hours: float = 1.0 / 12.0
    window_length: int = 2

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "loads", tuple(self.loads))
        object.__setattr__(self, "ver_units", tuple(self.ver_units))
        if not self.generators:
            raise ValueError("system needs at least one generator")
        if self.window_length < 2:
            raise ValueError("window_length must be >= 2")
        if self.interval_hours <= 0:
            raise ValueError("interval_hours must be > 0")
        for group in (self.generators, self.loads, self.ver_units):
            ids = [u.id for u in group]
            if len(set(ids)) != len(ids):
                raise ValueError(f"duplicate ids: {ids}")

    @property
    def generator_ids(self) -> list[str]:
        return [g.id for g in self.generators]


@dataclass(frozen=True)
class FrpRequirement:
    fru: float = 0.0
    frd: float = 0.0

    def __post_init__(self):
        if not (self.fru >= 0 and self.frd >= 0):
            raise ValueError(f"FRP requirements must be >= 0, got ({self.fru}, {self.frd})")


@dataclass(frozen=True, eq=False)
class WindowInput:
    """Right-hand data of one window.

    ``load_forecast`` has shape (n_loads, n_intervals); ``ver_total`` is the
    aggregate VER injection per interval after the dispatch-mode rules.
    """

    start_interval: int
    horizon: tuple[int, ...]
    load_forecast: np.ndarray
    ver_total: np.ndarray
    frp_req: tuple[FrpRequirement, ...]
    initial_dispatch: np.ndarray

    def __post_init__(self):
        horizon = tuple(int(t) for t in self.horizon)
        object.__setattr__(self, "horizon", horizon)
        load = np.atleast_2d(np.asarray(self.load_forecast, dtype=float))
        ver = np.asarray(self.ver_total, dtype=float).reshape(-1)
        object.__setattr__(self, "load_forecast", load)
        object.__setattr__(self, "ver_total", ver)
        object.__setattr__(self, "initial_dispatch",
                           np.asarray(self.initial_dispatch, dtype=float).reshape(-1))
        object.__setattr__(self, "frp_req", tuple(self.frp_req))
        n = len(horizon)
        if n < 1 or horizon[0] != self.start_interval:
            raise ValueError("horizon must start at start_interval")
        if load.shape[1] != n or ver.shape[0] != n or len(self.frp_req) != n:
            raise ValueError("load_forecast, ver_total and frp_req must cover the horizon")
        if np.any(load < 0) or np.any(ver < 0):
            raise ValueError("forecasts must be >= 0")
        if self.frp_req[0] != FrpRequirement(0.0, 0.0):
            raise ValueError("binding interval must carry zero FRP requirement")


@dataclass
class IndexMap:
    """Bijection between named quantities and LP columns/rows.

    ``var[(quantity, unit_id, tau)]`` -> column; ``row[(name, unit_id, tau)]``
    -> ``("eq" | "ub", row)``.  System-wide rows use ``unit_id = ""``.
    """

    var: dict = field(default_factory=dict)
    row: dict = field(default_factory=dict)

    def add_var(self, key) -> int:
        self.var[key] = len(self.var)
        return self.var[key]


@dataclass(eq=False)
class WindowSolution:
    """Primal values and multipliers of a solved window.

    Arrays are indexed ``[unit, k]`` with ``k`` the position in ``horizon``.
    The ``*_slack`` arrays hold the primal slack of each capacity/ramp row,
    scaled by ``max(1, |rhs|)``.
    """

    start_interval: int
    horizon: tuple[int, ...]
    generator_ids: list[str]
    load_ids: list[str]
    dispatch: np.ndarray
    fru_alloc: np.ndarray
    frd_alloc: np.ndarray
    shed: np.ndarray
    price_energy: np.ndarray
    price_fru: np.ndarray
    price_frd: np.ndarray
    mult_cap_lo: np.ndarray
    mult_cap_hi: np.ndarray
    mult_ramp_lo: np.ndarray
    mult_ramp_hi: np.ndarray
    mult_shed_lo: np.ndarray
    mult_shed_hi: np.ndarray
    objective_value: float
    cap_lo_slack: np.ndarray
    cap_hi_slack: np.ndarray
    ramp_lo_slack: np.ndarray
    ramp_hi_slack: np.ndarray
    requirements: tuple[FrpRequirement, ...]
    lp: StandardLp = field(repr=False, default=None)
    lp_solution: lp_core.LpSolution = field(repr=False, default=None)
    index_map: IndexMap = field(repr=False, default=None)

    def at(self, tau: int) -> int:
        return self.horizon.index(tau)


def build_window_lp(spec: SystemSpec, win: WindowInput) -> tuple[StandardLp, IndexMap]:
    gens = spec.generators
    n_t = len(win.horizon)
    if win.load_forecast.shape[0] != len(spec.loads):
        raise ValueError("load_forecast rows must match the system's loads")
    if win.initial_dispatch.shape[0] != len(gens):
        raise ValueError("initial_dispatch must have one entry per generator")

    im = IndexMap()
    for k, tau in enumerate(win.horizon):
        for g in gens:
            im.add_var(("g", g.id, tau))
            im.add_var(("r_up", g.id, tau))
            im.add_var(("r_dn", g.id, tau))
        for ld in spec.loads:
            im.add_var(("shed", ld.id, tau))
    n = len(im.var)
    c = np.zeros(n)
    lower = np.zeros(n)
    upper = np.full(n, INF)
    names = [""] * n
    for key, j in im.var.items():
        names[j] = f"{key[0]}[{key[1]},{key[2]}]"

    eq_rows, b_eq, ub_rows, b_ub = [], [], [], []

    def ub(name, unit, tau, coeffs, rhs):
        im.row[(name, unit, tau)] = ("ub", len(ub_rows))
        ub_rows.append(coeffs)
        b_ub.append(rhs)

    for k, tau in enumerate(win.horizon):
        bal = np.zeros(n)
        for i, g in enumerate(gens):
            jg = im.var[("g", g.id, tau)]
            c[jg] = g.energy_cost
            lower[jg] = -INF  # bounded through the capacity rows
            bal[jg] = 1.0
        for l, ld in enumerate(spec.loads):
            js = im.var[("shed", ld.id, tau)]
            c[js] = ld.shed_penalty
            upper[js] = win.load_forecast[l, k]
            bal[js] = 1.0
        im.row[("balance", "", tau)] = ("eq", len(eq_rows))
        eq_rows.append(bal)
        b_eq.append(win.load_forecast[:, k].sum() - win.ver_total[k])

        req = win.frp_req[k]
        up = np.zeros(n)
        dn = np.zeros(n)
        for g in gens:
            up[im.var[("r_up", g.id, tau)]] = -1.0
            dn[im.var[("r_dn", g.id, tau)]] = -1.0
        ub("fru", "", tau, up, -req.fru)
        ub("frd", "", tau, dn, -req.frd)

        for i, g in enumerate(gens):
            jg = im.var[("g", g.id, tau)]
            ju = im.var[("r_up", g.id, tau)]
            jd = im.var[("r_dn", g.id, tau)]
            row = np.zeros(n)
            row[jg], row[jd] = -1.0, 1.0
            ub("cap_lo", g.id, tau, row, -g.p_min)
            row = np.zeros(n)
            row[jg], row[ju] = 1.0, 1.0
            ub("cap_hi", g.id, tau, row, g.p_max)

            prev = None if k == 0 else im.var[("g", g.id, win.horizon[k - 1])]
            g_prev = win.initial_dispatch[i] if k == 0 else 0.0
            # g_prev - g + r_dn <= ramp_down
            row = np.zeros(n)
            row[jg], row[jd] = -1.0, 1.0
            if prev is not None:
                row[prev] = 1.0
            ub("ramp_lo", g.id, tau, row, g.ramp_down_mag - g_prev)
            # g - g_prev + r_up <= ramp_up
            row = np.zeros(n)
            row[jg], row[ju] = 1.0, 1.0
            if prev is not None:
                row[prev] = -1.0
            ub("ramp_hi", g.id, tau, row, g.ramp_up_mag + g_prev)

    lp = StandardLp.create(c, np.array(eq_rows), np.array(b_eq), np.array(ub_rows),
                           np.array(b_ub), lower, upper, names)
    return lp, im


def solve_window(spec: SystemSpec, win: WindowInput) -> WindowSolution:
    """Clear one window and map the LP solution back to named quantities.

    Raises :class:`WindowInfeasible` (carrying the window start) when the LP
    has no optimum; nothing is relaxed silently.
    """
    lp, im = build_window_lp(spec, win)
    sol = lp_core.solve(lp)
    if not sol.optimal:
        raise WindowInfeasible(win.start_interval, sol.status.value)
    _trim_over_procurement(spec, win, lp, im, sol)
    _zero_requirement_prices(spec, win, lp, im, sol)
    return _map_solution(spec, win, lp, im, sol)


def _trim_over_procurement(spec, win, lp, im, sol):
    # Ramping allocations are free, so a vertex may hold more than required.
    # Lowering an allocation only loosens the capacity/ramp rows it appears
    # in, and a row with slack on the requirement side has zero price, so
    # the trimmed point keeps the same objective and optimality certificate.
    x = sol.primal
    for k, tau in enumerate(win.horizon):
        for qty, need in (("r_up", win.frp_req[k].fru), ("r_dn", win.frp_req[k].frd)):
            cols = [im.var[(qty, g.id, tau)] for g in spec.generators]
            excess = x[cols].sum() - need
            for j in cols:
                if excess <= 0:
                    break
                cut = min(x[j], excess)
                x[j] -= cut
                excess -= cut


def _zero_requirement_prices(spec, win, lp, im, sol):
    # With R = 0 the row sum(r) >= 0 is implied by r >= 0, so its price is
    # taken as the left derivative, zero.  Dropping the multiplier only raises
    # the reduced costs of allocations sitting at zero; the dual stays feasible
    # and the dual objective is unchanged (rhs is 0).
    changed = False
    for k, tau in enumerate(win.horizon):
        for name, need in (("fru", win.frp_req[k].fru), ("frd", win.frp_req[k].frd)):
            if need == 0.0:
                _, r = im.row[(name, "", tau)]
                if sol.dual_ineq[r] != 0.0:
                    sol.dual_ineq[r] = 0.0
                    changed = True
    if changed:
        sol.reduced_costs = lp_core.reduced_costs(lp, sol.dual_eq, sol.dual_ineq)


def _map_solution(spec, win, lp, im, sol) -> WindowSolution:
    gens, loads = spec.generators, spec.loads
    n_g, n_l, n_t = len(gens), len(loads), len(win.horizon)
    x, z, y, d = sol.primal, sol.dual_ineq, sol.dual_eq, sol.reduced_costs
    slack = lp.b_ub - lp.a_ub @ x
    scaled_slack = slack / np.maximum(1.0, np.abs(lp.b_ub))

    def grid(n_units, fn):
        return np.array([[fn(u, tau) for tau in win.horizon] for u in range(n_units)]).reshape(n_units, n_t)

    var = lambda q, uid, tau: x[im.var[(q, uid, tau)]]
    row = lambda name, uid, tau: im.row[(name, uid, tau)][1]

    shed_red = grid(n_l, lambda l, tau: d[im.var[("shed", loads[l].id, tau)]])
    return WindowSolution(
        start_interval=win.start_interval,
        horizon=win.horizon,
        generator_ids=[g.id for g in gens],
        load_ids=[ld.id for ld in loads],
        dispatch=grid(n_g, lambda i, tau: var("g", gens[i].id, tau)),
        fru_alloc=grid(n_g, lambda i, tau: var("r_up", gens[i].id, tau)),
        frd_alloc=grid(n_g, lambda i, tau: var("r_dn", gens[i].id, tau)),
        shed=grid(n_l, lambda l, tau: var("shed", loads[l].id, tau)),
        price_energy=np.array([y[im.row[("balance", "", tau)][1]] for tau in win.horizon]),
        price_fru=np.array([z[row("fru", "", tau)] for tau in win.horizon]),
        price_frd=np.array([z[row("frd", "", tau)] for tau in win.horizon]),
        mult_cap_lo=grid(n_g, lambda i, tau: z[row("cap_lo", gens[i].id, tau)]),
        mult_cap_hi=grid(n_g, lambda i, tau: z[row("cap_hi", gens[i].id, tau)]),
        mult_ramp_lo=grid(n_g, lambda i, tau: z[row("ramp_lo", gens[i].id, tau)]),
        mult_ramp_hi=grid(n_g, lambda i, tau: z[row("ramp_hi", gens[i].id, tau)]),
        mult_shed_lo=np.maximum(shed_red, 0.0),
        mult_shed_hi=np.maximum(-shed_red, 0.0),
        objective_value=float(lp.c @ x),
        cap_lo_slack=grid(n_g, lambda i, tau: scaled_slack[row("cap_lo", gens[i].id, tau)]),
        cap_hi_slack=grid(n_g, lambda i, tau: scaled_slack[row("cap_hi", gens[i].id, tau)]),
        ramp_lo_slack=grid(n_g, lambda i, tau: scaled_slack[row("ramp_lo", gens[i].id, tau)]),
        ramp_hi_slack=grid(n_g, lambda i, tau: scaled_slack[row("ramp_hi", gens[i].id, tau)]),
        requirements=win.frp_req,
        lp=lp,
        lp_solution=sol,
        index_map=im,
    )


def interval_cost(spec: SystemSpec, dispatch_at_tau: Sequence[float],
                  shed_at_tau: Sequence[float] = ()) -> float:
    """Money spent in one executed interval: hourly cost rate times its length."""
    g = np.asarray(dispatch_at_tau, dtype=float)
    if g.shape[0] != len(spec.generators):
        raise ValueError("dispatch vector must have one entry per generator")
    rate = sum(gen.energy_cost * p for gen, p in zip(spec.generators, g))
    shed = np.asarray(shed_at_tau, dtype=float)
    if shed.size:
        rate += sum(ld.shed_penalty * s for ld, s in zip(spec.loads, shed))
    return float(rate * spec.interval_hours)


def interval_emissions(spec: SystemSpec, dispatch_at_tau: Sequence[float]) -> float:
    g = np.asarray(dispatch_at_tau, dtype=float)
    if g.shape[0] != len(spec.generators):
        raise ValueError("dispatch vector must have one entry per generator")
    return float(sum(gen.emission_factor * p for gen, p in zip(spec.generators, g))
                 * spec.interval_hours)
