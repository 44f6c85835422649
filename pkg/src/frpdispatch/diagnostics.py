"""Flexible-ramping price diagnostics.

A positive ramping price needs, in the same interval and direction, one unit
pinned by its capacity limit and a different unit pinned by its ramp limit.
Extra requirement is then met by moving energy between the two in the
preceding interval (unit dispatch transfer).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .market_model import (ACTIVE_TOL, FrpRequirement, SystemSpec, WindowInput,
                           WindowSolution, solve_window)

FRU = "FRU"
FRD = "FRD"


@dataclass(frozen=True)
class BindingPattern:
    interval: int
    direction: str
    capacity_bound_units: tuple[str, ...]
    ramp_bound_units: tuple[str, ...]
    price: float

    def describe(self) -> str:
        return (f"{self.interval}:{self.direction}:cap={'|'.join(self.capacity_bound_units)}"
                f":ramp={'|'.join(self.ramp_bound_units)}:price={self.price:.6g}")


def kkt_frp_residual(sol: WindowSolution, interior_tol: float = 1e-9) -> float:
    """Largest stationarity error of the ramping allocations.

    Only allocations strictly above zero are checked; at zero the sign
    constraint carries its own multiplier and the equality need not hold.
    """
    worst = 0.0
    up = -sol.price_fru[None, :] + sol.mult_cap_hi + sol.mult_ramp_hi
    dn = -sol.price_frd[None, :] + sol.mult_cap_lo + sol.mult_ramp_lo
    for resid, alloc in ((up, sol.fru_alloc), (dn, sol.frd_alloc)):
        mask = alloc > interior_tol
        if mask.any():
            worst = max(worst, float(np.max(np.abs(resid[mask]))))
    return worst


def detect_transfer(sol: WindowSolution, tol: float = 1e-6) -> list[BindingPattern]:
    """Report symmetric binding in every interval with a positive ramping price.

    Activity is read from primal slack, which stays meaningful when the
    multipliers are degenerate.
    """
    patterns = []
    for k, tau in enumerate(sol.horizon):
        for direction, price, cap_slack, ramp_slack in (
                (FRU, sol.price_fru[k], sol.cap_hi_slack, sol.ramp_hi_slack),
                (FRD, sol.price_frd[k], sol.cap_lo_slack, sol.ramp_lo_slack)):
            if price <= tol:
                continue
            cap_units = [i for i in range(len(sol.generator_ids)) if cap_slack[i, k] <= ACTIVE_TOL]
            ramp_units = [i for i in range(len(sol.generator_ids)) if ramp_slack[i, k] <= ACTIVE_TOL]
            if not any(i != j for i in cap_units for j in ramp_units):
                continue
            patterns.append(BindingPattern(
                interval=tau,
                direction=direction,
                capacity_bound_units=tuple(sol.generator_ids[i] for i in cap_units),
                ramp_bound_units=tuple(sol.generator_ids[j] for j in ramp_units),
                price=float(price),
            ))
    return patterns


def shadow_price_fd(spec: SystemSpec, win: WindowInput, direction: str, tau: int,
                    eps: float = 1e-4) -> float:
    """Right derivative of the window cost with respect to one ramping requirement.

    Raises :class:`~frpdispatch.market_model.WindowInfeasible` if the raised
    requirement cannot be met at all.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if direction not in (FRU, FRD):
        raise ValueError(f"direction must be {FRU!r} or {FRD!r}")
    k = win.horizon.index(tau)
    if k == 0:
        raise ValueError("the binding interval carries no ramping requirement")
    base = solve_window(spec, win).objective_value
    req = win.frp_req[k]
    bumped = (FrpRequirement(req.fru + eps, req.frd) if direction == FRU
              else FrpRequirement(req.fru, req.frd + eps))
    reqs = list(win.frp_req)
    reqs[k] = bumped
    perturbed = solve_window(spec, dataclasses.replace(win, frp_req=tuple(reqs))).objective_value
    return (perturbed - base) / eps
