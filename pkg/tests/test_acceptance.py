"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are written
straight to the terminal, so ``-s`` is not needed).
"""

import math
import time

import numpy as np
import pytest

from biparity.cli import project_table
from biparity.ensemble import EnsembleConfig, initial_slope, run_ensemble
from biparity.linalg3 import svd3
from biparity.pauli import coefficients_from_density, correlation_matrix, density_from_coefficients, preset
from biparity.rng import increments
from biparity.scan import argmax_axis, fibonacci_sphere, rate_map, rates_at
from biparity.sme import SimParams, _step_dense, _step_pauli, step_dense
from biparity.strategies import StrategyConfig, rate_bob, select_axis_bob_optimal

from conftest import random_density, random_state, random_unit

K = 0.1
DIAG = np.array([1.0, 0.0, 1.0]) / math.sqrt(2.0)


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
        assert ok, detail

    return emit


def test_criterion_1_optimal_axis(report):
    start = time.perf_counter()
    state = preset("jacobs_counterexample")
    axis = select_axis_bob_optimal(state)
    axis_err = min(np.max(np.abs(axis - DIAG)), np.max(np.abs(axis + DIAG)))
    grid = argmax_axis(state, K)
    elapsed = time.perf_counter() - start
    ok = axis_err < 1e-6 and grid.axis_discrepancy < 1e-4 and elapsed < 1.0
    report(1, ok, f"axis error {axis_err:.2e} (<1e-6), grid vs SVD {grid.axis_discrepancy:.2e} rad (<1e-4), {elapsed:.2f}s (<1s)")


def test_criterion_2_rate_map_shape(report):
    start = time.perf_counter()
    state = preset("dephased", beta=0.5, delta=0.01)
    rmap = rate_map(state, K, 181, 361)
    phi, _, _ = rmap.argmax("b")
    cell = math.pi / 180
    _, expected = project_table(state, K, 181, 361)
    pi, pj = np.unravel_index(np.argmax(expected), expected.shape)
    proj_phi = rmap.zeniths[pi]
    proj_purity = expected[pi, pj]
    elapsed = time.perf_counter() - start
    ok = (
        abs(phi - math.pi / 2) <= cell
        and (proj_phi == 0.0 or proj_phi == math.pi)
        and abs(proj_purity - 1.0) <= 1e-12
        and elapsed < 5.0
    )
    report(
        2,
        ok,
        f"weak argmax zenith {phi:.6f} (pi/2 +- {cell:.4f}), projective argmax zenith {proj_phi:.6f} "
        f"with purity {proj_purity:.15f}, {elapsed:.2f}s (<5s)",
    )


def test_criterion_3_rates_equal_top_singular_value(report):
    rng = np.random.default_rng(3)
    grid = fibonacci_sphere(100_000)
    worst_refined = 0.0
    worst_grid_excess = -np.inf
    for _ in range(200):
        s = random_state(rng)
        c = correlation_matrix(s)
        sigma1 = svd3(c).sigma[0]
        predicted = 4 * K * sigma1**2
        grid_rates = 4 * K * np.sum((grid @ c.T) ** 2, axis=1)
        # no grid axis beats the prediction
        worst_grid_excess = max(worst_grid_excess, float(grid_rates.max() - predicted))
        # the grid-seeded refined maximum reaches it
        worst_refined = max(worst_refined, abs(argmax_axis(s, K).rate - predicted))
    ok = worst_grid_excess <= 1e-9 and worst_refined <= 1e-9
    report(3, ok, f"max grid excess over 4k sigma1^2 {worst_grid_excess:.2e}, refined |rate - 4k sigma1^2| {worst_refined:.2e} (<=1e-9)")


def test_criterion_3_regression_sigma1_of_counterexample(report):
    c = correlation_matrix(preset("jacobs_counterexample"))
    sigma1 = float(svd3(c).sigma[0])
    # brute force: largest |C n| over a fine sphere grid
    brute = float(np.sqrt(np.max(np.sum((fibonacci_sphere(1_000_000) @ c.T) ** 2, axis=1))))
    ok = abs(sigma1 - math.sqrt(2 / 5)) < 1e-12 and abs(brute - math.sqrt(2 / 5)) < 1e-5 and abs(sigma1 - 1 / math.sqrt(5)) > 0.1
    report(
        "3 (regression)",
        ok,
        f"sigma1 = {sigma1:.9f}, brute force {brute:.9f}; C maps x and z both onto z/sqrt(5), "
        "so |C (x+z)/sqrt2| = sqrt(2/5) = 0.632455532, not 1/sqrt(5) = 0.447213595",
    )


def test_criterion_4_single_qubit_closed_form(report):
    start = time.perf_counter()
    params = SimParams(k=K, dt=1e-3, t_final=2.0, seed=2024)
    res = run_ensemble(EnsembleConfig(preset("maximally_mixed"), StrategyConfig("jacobs"), params, n_traj=100))
    exact = 1.0 - 0.5 * np.exp(-8 * K * res.times)
    err = float(np.max(np.abs(res.purities_a - exact)))
    var = float(np.max(res.stats.var_pa))
    elapsed = time.perf_counter() - start
    ok = err < 5e-3 and var < 1e-6 and elapsed < 10.0
    report(4, ok, f"max per-trajectory error {err:.2e} (<5e-3), max variance {var:.2e} (<1e-6), {elapsed:.2f}s (<10s)")


@pytest.mark.slow
def test_criterion_5_deterministic_bipartite_purification(report):
    state = preset("dephased", beta=0.5, delta=0.01)
    spreads = {}
    lines = []
    ok = True
    for dt in (1e-3, 1e-4):
        params = SimParams(k=K, dt=dt, t_final=1.0, seed=5)
        res = run_ensemble(EnsembleConfig(state, StrategyConfig("simultaneous"), params, n_traj=1000))
        rep = res.determinism(tol=10 * dt)
        sa, sb = float(np.max(rep.spread_a)), float(np.max(rep.spread_b))
        spreads[dt] = max(sa, sb)
        ok &= rep.deterministic_a and rep.deterministic_b
        lines.append(f"dt={dt:g}: spread A {sa:.2e}, B {sb:.2e} (<{10 * dt:g})")
    ratio = spreads[1e-4] / spreads[1e-3]
    ok &= ratio < 0.2
    report(5, ok, "; ".join(lines) + f"; spread ratio {ratio:.3f} (dt ratio 0.1)")


def test_criterion_6_integrator_oracle_equivalence(report):
    start = time.perf_counter()
    rng = np.random.default_rng(6)
    batch, dt = 100, 1e-4
    steps = int(round(1.0 / dt))
    r = np.stack([random_state(rng).r for _ in range(batch)])
    rho = density_from_coefficients(r)
    noise = np.stack([increments(66, i, steps, dt, "gaussian") for i in range(batch)])
    for t in range(steps):
        ax = random_unit(rng, batch)
        r = _step_pauli(r, ax, K, dt, noise[:, t])
        rho = _step_dense(rho, ax, K, dt, noise[:, t])
    err = float(np.max(np.abs(coefficients_from_density(rho) - r)))
    elapsed = time.perf_counter() - start
    ok = err < 1e-6 and elapsed < 60
    report(6, ok, f"max coefficient discrepancy {err:.2e} (<1e-6) after {steps} steps x {batch} pairs, {elapsed:.2f}s (<60s)")


def test_criterion_7_monte_carlo_drift(report):
    start = time.perf_counter()
    state = preset("jacobs_counterexample")
    strat = StrategyConfig("fixed", fixed_axis=tuple(DIAG))
    predicted = float(rate_bob(state, DIAG, K)[0])
    lines = []
    ok = True
    # Gaussian increments: single-step slope; two-point increments: 10-step window
    for kind, window in (("gaussian", 1), ("two_point", 10)):
        params = SimParams(k=K, dt=1e-3, t_final=0.01, seed=7, increments=kind)
        res = run_ensemble(EnsembleConfig(state, strat, params, n_traj=10_000))
        slope, sem = initial_slope(res, window=window)
        ok &= sem > 0 and abs(slope - 0.16) <= 3 * sem
        lines.append(f"{kind}: {slope:.5f} +- {sem:.5f}")
    elapsed = time.perf_counter() - start
    ok &= abs(predicted - 0.16) < 1e-12 and elapsed < 120
    report(7, ok, "; ".join(lines) + f" vs 0.16 within 3 sem, {elapsed:.2f}s (<120s)")


@pytest.mark.slow
def test_criterion_8_exact_invariants(report):
    rng = np.random.default_rng(8)
    # r_II over 10^6 sequential steps of one trajectory
    r = preset("dephased").r[None].copy()
    dt, block = 1e-4, 10_000
    r_ii_exact = True
    seen = 0
    for b in range(100):
        dw = increments(88, b, block, dt, "gaussian")
        axes = random_unit(rng, block)
        for t in range(block):
            r = _step_pauli(r, axes[t : t + 1], K, dt, dw[t : t + 1])
            r_ii_exact = r_ii_exact and r[0, 0, 0] == 1.0
            seen += 1
    # trace preservation of the dense step, one step at a time
    worst_trace = 0.0
    for _ in range(1000):
        rho = random_density(rng)
        out = step_dense(rho, random_unit(rng), K, 1e-3, rng.normal() * 0.1)
        worst_trace = max(worst_trace, abs(np.trace(out) - 1.0))
    # antipodal symmetry of rate maps
    worst_sym = 0.0
    for _ in range(50):
        s = random_state(rng)
        n = random_unit(rng, 2000)
        ra, rb = rates_at(s, n, K)
        ra2, rb2 = rates_at(s, -n, K)
        worst_sym = max(worst_sym, float(np.max(np.abs(ra - ra2))), float(np.max(np.abs(rb - rb2))))
    ok = r_ii_exact and seen == 1_000_000 and worst_trace <= 1e-13 and worst_sym <= 1e-12
    report(8, ok, f"r_II == 1 at each of {seen} steps: {bool(r_ii_exact)}; max |Tr - 1| {worst_trace:.1e} (<=1e-13); antipodal asymmetry {worst_sym:.1e} (<=1e-12)")
