import dataclasses

import numpy as np
import pytest

from conftest import first_window
from frpdispatch.diagnostics import (FRD, FRU, detect_transfer, kkt_frp_residual, shadow_price_fd)
from frpdispatch.market_model import FrpRequirement, WindowInfeasible, WindowInput, solve_window


def test_kkt_residual_fbd_window(spec):
    sol = solve_window(spec, first_window(5.6451, 5.7503))
    assert kkt_frp_residual(sol) <= 1e-6
    # G1 holds the downward allocation at t+1: price = ramp multiplier + capacity multiplier
    assert sol.frd_alloc[0, 1] > 0
    assert sol.mult_cap_lo[0, 1] + sol.mult_ramp_lo[0, 1] == pytest.approx(30, abs=1e-9)


def test_kkt_residual_zero_requirement(spec):
    sol = solve_window(spec, first_window(0, 0))
    assert kkt_frp_residual(sol) == 0
    assert np.all(sol.price_fru == 0) and np.all(sol.price_frd == 0)


def test_kkt_residual_detects_price_perturbation(spec):
    sol = solve_window(spec, first_window(5.6451, 5.7503))
    bad = dataclasses.replace(sol, price_fru=sol.price_fru + np.array([0, 0.5]))
    assert kkt_frp_residual(bad) == pytest.approx(0.5, abs=1e-9)


def test_fbd_window_frd_pattern(spec):
    pats = detect_transfer(solve_window(spec, first_window(5.6451, 5.7503)))
    assert len(pats) == 1
    p = pats[0]
    assert (p.interval, p.direction) == (1, FRD)
    assert "G1" in p.ramp_bound_units and "G2" in p.capacity_bound_units
    assert p.price == pytest.approx(30)


def test_capped_and_zero_windows_have_no_pattern(spec):
    assert detect_transfer(solve_window(spec, first_window(5.6451, 0))) == []
    assert detect_transfer(solve_window(spec, first_window(0, 0))) == []


def test_fru_transfer_pattern(spec):
    # G1 ends at capacity and G2 on its ramp-up limit in the advisory interval
    win = WindowInput(0, (0, 1), [[100, 150]], [0, 0],
                      [FrpRequirement(), FrpRequirement(5, 0)], (90, 0))
    sol = solve_window(spec, win)
    np.testing.assert_allclose(sol.dispatch[:, 0], [95, 5], atol=1e-9)
    pats = detect_transfer(sol)
    assert [(p.interval, p.direction) for p in pats] == [(1, FRU)]
    assert "G1" in pats[0].capacity_bound_units and "G2" in pats[0].ramp_bound_units
    assert shadow_price_fd(spec, win, FRU, 1) == pytest.approx(30, abs=1e-3)
    assert kkt_frp_residual(sol) <= 1e-6


def test_shadow_prices_fbd_window(spec):
    win = first_window(5.6451, 5.7503)
    assert shadow_price_fd(spec, win, FRD, 1) == pytest.approx(30, abs=1e-3)
    assert shadow_price_fd(spec, win, FRU, 1) == pytest.approx(0, abs=1e-6)


def test_shadow_prices_zero_requirement(spec):
    win = first_window(0, 0, load=(100, 100))
    for d in (FRU, FRD):
        assert shadow_price_fd(spec, win, d, 1, eps=1e-5) == pytest.approx(0, abs=1e-6)


def test_shadow_price_agrees_with_unique_dual(spec):
    for fru, frd in [(5.6451, 5.7503), (2.0, 3.0), (10.0, 1.0)]:
        win = first_window(fru, frd)
        sol = solve_window(spec, win)
        up_fd, dn_fd = shadow_price_fd(spec, win, FRU, 1), shadow_price_fd(spec, win, FRD, 1)
        assert up_fd >= -1e-9 and dn_fd >= -1e-9
        assert sol.price_frd[1] == pytest.approx(dn_fd, abs=1e-3)
        assert sol.price_fru[1] == pytest.approx(up_fd, abs=1e-3)


def test_shadow_price_hard_limit_raises(spec):
    # with shedding, upward headroom at t+1 tops out at 95
    win = first_window(95, 0, load=(100, 100))
    solve_window(spec, win)
    with pytest.raises(WindowInfeasible):
        shadow_price_fd(spec, win, FRU, 1, eps=1.0)


def test_shadow_price_rejects_binding_interval(spec):
    with pytest.raises(ValueError):
        shadow_price_fd(spec, first_window(1, 1), FRU, 0)
