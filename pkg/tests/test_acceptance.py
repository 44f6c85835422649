"""Acceptance criteria for the case study, one test per criterion.

Each test records a ``criterion N: PASS|FAIL ...`` line, printed at the end of
the session by the terminal-summary hook in conftest.
"""

import math
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize

from conftest import ACCEPTANCE_LINES, first_window
from frpdispatch import lp_core
from frpdispatch.config import case_study_config, compute_requirements, run_mode, run_monte_carlo
from frpdispatch.diagnostics import FRD, FRU, detect_transfer, kkt_frp_residual, shadow_price_fd
from frpdispatch.engine import (draw_requirement_samples, run_rolling, sample_trajectory_realization,
                                totals_report, trial_rng)
from frpdispatch.frp import requirements_from_samples
from frpdispatch.market_model import (FrpRequirement, GeneratorSpec, LoadSpec, SystemSpec, VerUnit,
                                      WindowInfeasible, WindowInput, build_window_lp, solve_window)
from frpdispatch.uncertainty import net_load_delta_rfbd

PUBLISHED_REQ = FrpRequirement(5.6451, 5.7503)
CAPS = {"Cap-0": 0, "Cap-1": 1, "Cap-2": 2}
MC_COST = {"FBD": 75.15, "Cap-0": 76.86, "Cap-1": 78.97, "Cap-2": 81.83}
MC_EMIS = {"FBD": 0.8041, "Cap-0": 0.8224, "Cap-1": 0.8450, "Cap-2": 0.8755}


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def cfg():
    return case_study_config()


@pytest.fixture(scope="module")
def req_result(cfg):
    return compute_requirements(cfg)


@pytest.fixture(scope="module")
def mc(cfg, req_result):
    return run_monte_carlo(cfg, req_result.requirements, trials=1000)


def fbd_window(cfg):
    return first_window(PUBLISHED_REQ.fru, PUBLISHED_REQ.frd, initial=tuple(cfg.initial_dispatch("FBD")))


def cap_window(cfg, name, req):
    return first_window(req.fru, req.frd, initial=tuple(cfg.initial_dispatch(name)))


def test_criterion_01_fbd_binding_interval(cfg):
    spec, win = cfg.system_spec(), fbd_window(cfg)
    rec = run_rolling(spec, cfg.dispatch_mode("FBD"), cfg.forecast_series(), None, PUBLISHED_REQ,
                      cfg.initial_dispatch("FBD")).records[0]
    g1, g2 = rec.dispatch
    up, dn = shadow_price_fd(spec, win, FRU, 1), shadow_price_fd(spec, win, FRD, 1)
    checks = {
        "g1=54.25": abs(g1 - 54.25) <= 1e-6,
        "g2=5.75": abs(g2 - 5.75) <= 1e-6,
        "C=114.375": abs(rec.cost - 114.375) <= 1e-6,
        "E=1.1726": abs(rec.emissions - 1.1726) <= 1e-4,
        "phiU=0": abs(up) <= 1e-6,
        "phiD=30": abs(dn - 30) <= 1e-3,
    }
    bad = [k for k, v in checks.items() if not v]
    ok = record(1, not bad, f"g=({g1:.6f}, {g2:.6f}) C={rec.cost:.6f} E={rec.emissions:.6f} "
                f"phiU={up:.6f} phiD={dn:.6f}" + (f"  failed: {', '.join(bad)}" if bad else ""))
    assert ok, f"failed checks: {bad}"


def test_criterion_02_cap_binding_interval(cfg, req_result):
    spec, details, ok = cfg.system_spec(), [], True
    for name in CAPS:
        req = req_result.requirements[name]
        rec = run_mode(cfg, name, req).records[0]
        sol = solve_window(spec, cap_window(cfg, name, req))
        this = (np.allclose(rec.dispatch, [60, 0], atol=1e-6)
                and abs(rec.cost - 100) <= 1e-6 and abs(rec.emissions - 1.07) <= 1e-4
                and abs(sol.price_fru[1]) <= 1e-6 and abs(sol.price_frd[1]) <= 1e-6
                and abs(rec.price_fru[0]) <= 1e-6 and abs(rec.price_frd[0]) <= 1e-6)
        ok &= this
        details.append(f"{name} g=({rec.dispatch[0]:.4f}, {rec.dispatch[1]:.4f}) C={rec.cost:.4f} "
                       f"E={rec.emissions:.4f} phi=({sol.price_fru[1]:g}, {sol.price_frd[1]:g})")
    assert record(2, ok, "; ".join(details))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3000), st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.5, 1.0, 2.0, 3.0]))
def _property_one(n, seed, cap):
    rng = np.random.default_rng(seed)
    realized = np.maximum(0, rng.normal(20, 2, size=(n, 2))).sum(axis=1)
    s = net_load_delta_rfbd(realized, 40 - 2 * cap)
    assert np.all(s >= 0)
    assert requirements_from_samples(s).frd == 0


def test_criterion_03_rfbd_no_downward_requirement(cfg):
    _property_one()
    modes = [cfg.dispatch_mode(m) for m in ("FBD", *CAPS)]
    draws = draw_requirement_samples(cfg.forecast_series(), modes, 10_000, 0.1, 99)
    mins = {m: float(draws.sample_sets[m].samples.min()) for m in CAPS}
    frd = {m: requirements_from_samples(draws.sample_sets[m]).frd for m in CAPS}
    ok = all(v >= 0 for v in mins.values()) and all(v == 0 for v in frd.values())
    assert record(3, ok, f"10^4 samples: min RFBD delta {min(mins.values()):g}, R_D {frd}; "
                  "hypothesis sizes 1..3000 passed")


def _bracket(samples, p=0.975):
    x = np.sort(np.asarray(samples, dtype=float))
    h = (x.size - 1) * p
    return x[math.floor(h)], x[min(math.floor(h) + 1, x.size - 1)]


def test_criterion_04_cap_spacing(cfg, req_result):
    modes = [cfg.dispatch_mode(m) for m in ("FBD", *CAPS)]
    seeds = (cfg.sampling.master_seed, 1, 2, 3, 4, 5)
    worst, checked = 0.0, 0
    for seed in seeds:
        draws = draw_requirement_samples(cfg.forecast_series(), modes, 1000, 0.1, seed)
        reqs = {m: requirements_from_samples(s) for m, s in draws.sample_sets.items()}
        lo, _ = _bracket(draws.sample_sets["FBD"].samples)
        for name, delta in CAPS.items():
            if delta == 0 or lo <= 2 * delta:
                continue
            worst = max(worst, abs(reqs[name].fru - (reqs["FBD"].fru - 2 * delta)))
            checked += 1
    r = req_result.requirements
    levels = ", ".join(f"{m} {r[m].fru:.4f}" for m in ("FBD", *CAPS))
    ok = checked >= len(seeds) and worst <= 1e-12
    assert record(4, ok, f"max |R_U(Cap) - (R_U(FBD) - 2D)| = {worst:.2e} over {checked} cases; "
                  f"seed {cfg.sampling.master_seed}: {levels}")


def test_criterion_05_fbd_requirement_band(req_result):
    lo, hi = 4.9, 6.3
    oracle = np.random.default_rng(123).normal(0, math.sqrt(8), 1_000_000)
    analytic = NormalDist(0, math.sqrt(8)).inv_cdf(0.975)
    batches = oracle.reshape(1000, 1000)
    up = np.quantile(batches, 0.975, axis=1)
    dn = -np.quantile(batches, 0.025, axis=1)
    coverage = min(np.mean((up >= lo) & (up <= hi)), np.mean((dn >= lo) & (dn <= hi)))
    r = req_result.requirements["FBD"]
    ok = (abs(np.quantile(oracle, 0.975) - analytic) < 0.02 and abs(analytic - 5.543) < 1e-3
          and coverage >= 0.99 and lo <= r.fru <= hi and lo <= r.frd <= hi
          and lo <= PUBLISHED_REQ.fru <= hi and lo <= PUBLISHED_REQ.frd <= hi)
    assert record(5, ok, f"R=({r.fru:.4f}, {r.frd:.4f}) band [{lo}, {hi}] coverage {coverage:.3f} "
                  f"analytic {analytic:.4f}")


def _min_expectation(cap, mu=40.0, var=8.0):
    sd = math.sqrt(var)
    nd = NormalDist()
    z = (cap - mu) / sd
    closed = cap - ((cap - mu) * nd.cdf(z) + sd * nd.pdf(z))
    quad, _ = integrate.quad(lambda v: min(v, cap) * NormalDist(mu, sd).pdf(v), mu - 12 * sd,
                             mu + 12 * sd, points=[cap], limit=200)
    assert abs(closed - quad) < 1e-8
    return closed


def test_criterion_06_monte_carlo_means(mc):
    ok, parts = True, []
    for name, summary in mc.items():
        c, e = summary.mean_cost[1], summary.mean_emissions[1]
        ok &= abs(c / MC_COST[name] - 1) <= 0.02 and abs(e / MC_EMIS[name] - 1) <= 0.02
        parts.append(f"{name} C={c:.2f} E={e:.4f} (infeasible {summary.infeasible_trial_count})")
        if name in CAPS:
            oracle = 20 * (85 - _min_expectation(40 - 2 * CAPS[name])) / 12
            same = f"{oracle:.3g}" == f"{MC_COST[name]:.3g}"
            ok &= same
            parts[-1] += f" oracle {oracle:.3f}"
    assert record(6, ok, "; ".join(parts))


def test_criterion_07_total_cost_ordering(mc):
    tot = {t.mode: t.total_cost for t in totals_report(mc)}
    ok = tot["Cap-0"] < tot["Cap-1"] < tot["Cap-2"] < tot["FBD"]
    assert record(7, ok, ", ".join(f"{m} {v:.2f}" for m, v in tot.items()))


def test_criterion_08_transfer_detection(cfg, req_result):
    spec = cfg.system_spec()
    pats = detect_transfer(solve_window(spec, fbd_window(cfg)))
    ok = (len(pats) == 1 and pats[0].interval == 1 and pats[0].direction == FRD
          and "G1" in pats[0].ramp_bound_units and "G2" in pats[0].capacity_bound_units)
    cap_counts = {}
    for name in CAPS:
        traj = run_mode(cfg, name, req_result.requirements[name])
        cap_counts[name] = sum(len(r.patterns) for r in traj.records)
    ok &= not any(cap_counts.values())
    desc = pats[0].describe() if pats else "none"
    assert record(8, ok, f"FBD: {len(pats)} pattern ({desc}); Cap patterns {cap_counts}")


def _random_instance(rng):
    gens = []
    for i in range(2):
        pmin = float(rng.integers(0, 20))
        gens.append(GeneratorSpec(f"G{i + 1}", float(rng.integers(5, 80)), pmin,
                                  pmin + float(rng.integers(20, 200)), float(rng.integers(2, 40)),
                                  float(rng.integers(2, 40)), float(rng.uniform(0.1, 1.0))))
    spec = SystemSpec(tuple(gens), (LoadSpec("D", float(rng.integers(100, 400))),),
                      (VerUnit("V1", "wind"),), 1 / 12, 2)
    total = sum(g.p_max for g in gens)
    load = rng.uniform(0.2, 1.0, 2) * total
    ver = rng.uniform(0, 0.2, 2) * total
    initial = [rng.uniform(g.p_min, g.p_max) for g in gens]
    req = FrpRequirement(float(rng.uniform(0, 30)), float(rng.uniform(0, 30)))
    return spec, WindowInput(0, (0, 1), [load.tolist()], ver.tolist(),
                             [FrpRequirement(), req], initial)


def _highs(lp):
    bounds = [(None if math.isinf(l) else l, None if math.isinf(u) else u)
              for l, u in zip(lp.lower, lp.upper)]
    return optimize.linprog(lp.c, A_ub=lp.a_ub if lp.a_ub.size else None,
                            b_ub=lp.b_ub if lp.b_ub.size else None, A_eq=lp.a_eq, b_eq=lp.b_eq,
                            bounds=bounds, method="highs",
                            options={"primal_feasibility_tolerance": 1e-10,
                                     "dual_feasibility_tolerance": 1e-10})


def test_criterion_09_lp_oracle_equivalence():
    rng = np.random.default_rng(2024)
    n, worst, reports_ok, attempts = 0, 0.0, True, 0
    while n < 200:
        attempts += 1
        spec, win = _random_instance(rng)
        lp, _ = build_window_lp(spec, win)
        ref = _highs(lp)
        if ref.status != 0:
            continue
        sol = lp_core.solve(lp)
        n += 1
        if not sol.optimal:
            reports_ok = False
            continue
        worst = max(worst, abs(sol.objective_value - ref.fun))
        reports_ok &= lp_core.verify_optimality(lp, sol).passed
    ok = worst <= 1e-7 and reports_ok
    assert record(9, ok, f"{n} feasible instances ({attempts} drawn): max |obj - HiGHS| = {worst:.2e}, "
                  f"optimality reports {'all passed' if reports_ok else 'FAILED'}")


def test_criterion_10_kkt_residuals(cfg, req_result):
    spec, fc = cfg.system_spec(), cfg.forecast_series()
    reqs = req_result.requirements
    windows = [solve_window(spec, fbd_window(cfg))]
    windows += [solve_window(spec, cap_window(cfg, m, reqs[m])) for m in CAPS]
    for name in ("FBD", *CAPS):
        windows += [r.window for r in run_mode(cfg, name, reqs[name]).records]
        mode, init = cfg.dispatch_mode(name), cfg.initial_dispatch(name)
        for j in range(cfg.sampling.mc_trials):
            real = sample_trajectory_realization(fc, cfg.sampling.error_fraction,
                                                 trial_rng(cfg.sampling.master_seed, j))
            try:
                traj = run_rolling(spec, mode, fc, real, reqs[name], init)
            except WindowInfeasible:
                continue
            windows += [r.window for r in traj.records]
    kkt = max(kkt_frp_residual(w) for w in windows)
    cs = max(lp_core.verify_optimality(w.lp, w.lp_solution).complementary_slackness for w in windows)
    ok = kkt <= 1e-6 and cs <= 1e-7
    assert record(10, ok, f"{len(windows)} windows: max FRP KKT residual {kkt:.2e}, "
                  f"max complementary slackness {cs:.2e}")
