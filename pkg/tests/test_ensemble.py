import json
import math

import numpy as np
import pytest

from biparity.ensemble import (
    SCHEMA_VERSION,
    EnsembleConfig,
    EnsembleStats,
    determinism_report,
    initial_slope,
    resolve_workers,
    run_ensemble,
    time_to_target,
)
from biparity.pauli import StateValidationError, TwoQubitState, preset
from biparity.sme import SimParams, simulate_trajectory
from biparity.rng import NoiseStream
from biparity.strategies import StrategyConfig, parse_strategy, rate_bob

K = 0.1


def run(initial, strategy, n_traj=50, **params):
    params = {"k": K, "dt": 1e-3, "t_final": 0.05, "seed": 1, **params}
    cfg = EnsembleConfig(initial, strategy, SimParams(**params), n_traj=n_traj)
    return run_ensemble(cfg)


def test_jacobs_on_maximally_mixed():
    res = run(preset("maximally_mixed"), StrategyConfig("jacobs"), n_traj=100, t_final=1.0)
    assert np.all(res.stats.var_pa < 1e-6)
    assert res.stats.mean_pa[-1] == pytest.approx(1 - 0.5 * math.exp(-0.8), abs=1e-3)
    assert res.stats.mean_pa[-1] == pytest.approx(0.7753, abs=1e-3)


def test_simultaneous_variance_scales_with_dt():
    # spread of purities is a discretisation residue: it should shrink with dt
    variances = []
    for dt in (2e-3, 1e-3):
        res = run(preset("dephased", beta=0.5, delta=0.01), StrategyConfig("simultaneous"), n_traj=40, dt=dt, t_final=0.2)
        variances.append(max(res.stats.var_pa.max(), res.stats.var_pb.max()))
        assert variances[-1] < dt
    assert variances[1] < variances[0]


def test_fixed_z_on_bell_slope():
    res = run(preset("bell", beta=0.0), StrategyConfig("fixed", fixed_axis=(0, 0, 1)), n_traj=10_000, t_final=0.01)
    slope, sem = initial_slope(res)
    assert sem > 0
    assert abs(slope - 4 * K) <= 3 * sem


def test_determinism_report_examples():
    res = run(preset("maximally_mixed"), StrategyConfig("jacobs"), n_traj=20, t_final=0.3)
    rep = res.determinism()
    assert np.max(rep.spread_a) < 1e-12
    assert rep.deterministic_a
    assert rep.tol == pytest.approx(10 * 1e-3)

    bell = run(preset("bell", beta=0.0), StrategyConfig("fixed", fixed_axis=(0, 0, 1)), n_traj=50, t_final=0.5)
    rep = bell.determinism()
    assert not rep.deterministic_b
    assert rep.spread_b[-1] > rep.tol

    single = simulate_trajectory(preset("dephased"), StrategyConfig("bob_opt"), SimParams(t_final=0.05))
    rep = determinism_report([single])
    assert np.all(rep.spread_a == 0) and np.all(rep.spread_b == 0)


def test_determinism_report_needs_records():
    with pytest.raises(ValueError):
        determinism_report([])


def test_determinism_report_from_records_matches_result():
    cfg = EnsembleConfig(preset("dephased"), StrategyConfig("bob_opt"), SimParams(t_final=0.03), n_traj=6, record_trajectories=True)
    res = run_ensemble(cfg)
    a = res.determinism()
    b = determinism_report(res.records)
    np.testing.assert_array_equal(a.spread_b, b.spread_b)


@pytest.mark.parametrize("workers", [1, 4, 16])
@pytest.mark.parametrize("chunk", [7, 64])
def test_seed_stability(workers, chunk):
    def stats(w, c):
        cfg = EnsembleConfig(
            preset("dephased", beta=0.3, delta=0.05),
            StrategyConfig("simultaneous"),
            SimParams(t_final=0.05, seed=42),
            n_traj=40,
            worker_count=w,
            chunk_size=c,
        )
        return run_ensemble(cfg)

    ref = stats(1, 256)
    other = stats(workers, chunk)
    assert ref.stats.to_csv() == other.stats.to_csv()
    np.testing.assert_array_equal(ref.purities_b, other.purities_b)


def test_trajectory_zero_matches_single_simulation():
    params = SimParams(t_final=0.05, seed=9)
    cfg = EnsembleConfig(preset("bell", beta=0.2), StrategyConfig("bob_det"), params, n_traj=3, record_trajectories=True)
    res = run_ensemble(cfg)
    single = simulate_trajectory(preset("bell", beta=0.2), StrategyConfig("bob_det"), params)
    np.testing.assert_array_equal(res.records[0].states, single.states)
    other = simulate_trajectory(preset("bell", beta=0.2), StrategyConfig("bob_det"), params, rng_stream=NoiseStream(9, 2))
    np.testing.assert_array_equal(res.records[2].purities_b, other.purities_b)


def test_mean_pb_monotone_for_bob_optimal():
    res = run(preset("jacobs_counterexample"), StrategyConfig("bob_opt"), n_traj=1000, t_final=0.2)
    sem = res.stats.sem("b")
    step = np.diff(res.stats.mean_pb)
    assert np.all(step >= -2 * np.hypot(sem[1:], sem[:-1]))


@pytest.mark.parametrize("strategy", ["jacobs", "bob_opt", "bob_det", "simultaneous", "along_bloch", "fixed:1,0,1"])
@pytest.mark.parametrize("name", ["jacobs_counterexample", "dephased", "bell"])
def test_initial_slope_matches_rate(strategy, name):
    state = preset(name) if name != "bell" else preset("bell", beta=0.3)
    strat = parse_strategy(strategy)
    res = run(state, strat, n_traj=4000, t_final=0.01, increments="gaussian", seed=5)
    slope, sem = initial_slope(res, window=1)
    expected = float(rate_bob(state, strat(state), K)[0])
    assert abs(slope - expected) <= 3 * sem + 1e-9


def test_stats_invariants():
    res = run(preset("dephased"), StrategyConfig("bob_opt"), n_traj=200, t_final=0.1)
    s = res.stats
    n = len(s.times)
    for col in EnsembleStats.COLUMNS[1:]:
        assert len(getattr(s, col)) == n
    assert np.all(s.var_pa >= 0) and np.all(s.var_pb >= 0)
    assert np.all(s.q05_pb <= s.q50_pb) and np.all(s.q50_pb <= s.q95_pb)
    assert np.all(s.q05_pa <= s.q50_pa) and np.all(s.q50_pa <= s.q95_pa)
    np.testing.assert_allclose(s.mean_pb, res.purities_b.mean(axis=0))


def test_stats_stride_subsamples():
    full = run(preset("dephased"), StrategyConfig("bob_opt"), n_traj=10, t_final=0.05)
    cfg = EnsembleConfig(preset("dephased"), StrategyConfig("bob_opt"), SimParams(t_final=0.05, seed=1), n_traj=10, stats_stride=7)
    strided = run_ensemble(cfg)
    idx = [0, 7, 14, 21, 28, 35, 42, 49, 50]
    np.testing.assert_allclose(strided.times, full.times[idx])
    np.testing.assert_array_equal(strided.purities_b, full.purities_b[:, idx])


def test_csv_and_json():
    res = run(preset("bell"), StrategyConfig("bob_opt"), n_traj=5, t_final=0.01)
    lines = res.stats.to_csv().splitlines()
    assert lines[0] == "t,mean_pa,var_pa,q05_pa,q50_pa,q95_pa,mean_pb,var_pb,q05_pb,q50_pb,q95_pb"
    assert len(lines) == 1 + len(res.times)
    obj = json.loads(res.stats.to_json(config=res.config.to_dict()))
    assert obj["schema_version"] == SCHEMA_VERSION
    assert obj["config"]["params"]["k"] == K
    assert obj["metadata"]["n_traj"] == 5


def test_time_to_target():
    times = np.array([0.0, 0.1, 0.2])
    p = np.array([[0.5, 0.95, 0.99], [0.5, 0.6, 0.7]])
    out = time_to_target(p, times, 0.9)
    assert out[0] == 0.1 and math.isinf(out[1])


def test_invalid_configs():
    bad = np.zeros((4, 4))
    bad[0, 0] = 1.0
    bad[3, 0] = 1.5
    with pytest.raises(StateValidationError):
        run_ensemble(EnsembleConfig(TwoQubitState(bad), StrategyConfig("jacobs"), SimParams(t_final=0.01), n_traj=2))
    with pytest.raises(ValueError):
        EnsembleConfig(preset("bell"), StrategyConfig("jacobs"), SimParams(), n_traj=0)
    with pytest.raises(ValueError):
        resolve_workers(0)
    assert resolve_workers("auto") >= 1
