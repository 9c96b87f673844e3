import numpy as np
import pytest
from scipy import stats

from probeq import (
    JunctionTopology,
    ScenarioConfig,
    SignalTiming,
    discharge,
    run_simulation,
    sample_vehicle,
    solve_assignment,
)

S1_RHO = (0.1, 0.8, 0.1)


def scenario(rho=S1_RHO, lam=0.75, p=0.5, q_sat=2.0, red_s=60.0, green_s=60.0,
             horizon_s=12000.0, seed=7):
    return ScenarioConfig(
        topology=JunctionTopology.standard3(),
        rho=rho,
        lam=lam,
        p=p,
        q_sat=q_sat,
        timing=SignalTiming(red_s, green_s),
        horizon_s=horizon_s,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# discharge


def test_discharge_queue_drains_at_saturation():
    exits, residual = discharge(list(range(5)), q_sat=0.5, green_s=30.0)
    assert [t for _, t in exits] == [2.0, 4.0, 6.0, 8.0, 10.0]
    assert [v for v, _ in exits] == [0, 1, 2, 3, 4]
    assert residual == []


def test_discharge_capacity_binds():
    exits, residual = discharge(list(range(20)), q_sat=0.5, green_s=30.0)
    assert len(exits) == 15
    assert exits[-1][1] == pytest.approx(30.0)
    assert residual == list(range(15, 20))


def test_discharge_pass_through_on_empty_road():
    exits, residual = discharge([], q_sat=0.5, green_s=30.0,
                                arrivals=[(3.0, "x"), (7.5, "y")])
    assert exits == [("x", 3.0), ("y", 7.5)]
    assert residual == []


def test_discharge_arrivals_join_behind_the_queue():
    exits, _ = discharge([0, 1, 2, 3, 4], q_sat=0.5, green_s=30.0,
                         arrivals=[(1.0, "a"), (11.0, "b")])
    times = dict((v, t) for v, t in exits)
    assert times["a"] == pytest.approx(12.0)
    assert times["b"] == pytest.approx(14.0)


def test_discharge_idle_gap_then_pass_through():
    exits, _ = discharge([0], q_sat=0.5, green_s=60.0, arrivals=[(50.0, "late")])
    assert exits == [(0, 2.0), ("late", 50.0)]


def test_discharge_blocks_fifo():
    exits, residual = discharge([0, 1], q_sat=0.5, green_s=3.0,
                                arrivals=[(2.5, "tail")])
    assert [v for v, _ in exits] == [0]
    # once the head of line cannot leave, nothing behind it may either
    assert residual == [1, "tail"]


def test_discharge_rejects_bad_rate():
    with pytest.raises(ValueError):
        discharge([], q_sat=0.0, green_s=10.0)


# ---------------------------------------------------------------------------
# configuration objects


def test_signal_timing():
    t = SignalTiming(60.0, 40.0)
    assert t.cycle_s == 100.0
    with pytest.raises(ValueError):
        SignalTiming(0.0, 40.0)
    with pytest.raises(ValueError):
        SignalTiming(60.0, -1.0)


def test_scenario_validation():
    with pytest.raises(ValueError):
        scenario(p=1.5)
    with pytest.raises(ValueError):
        scenario(lam=-0.1)
    with pytest.raises(ValueError):
        scenario(q_sat=0.0)
    with pytest.raises(ValueError):
        scenario(horizon_s=0.0)


def test_saturation_flag():
    assert not scenario().is_saturated()
    assert scenario(q_sat=0.1).is_saturated()


# ---------------------------------------------------------------------------
# vehicle sampling


def test_sample_vehicle_frequencies():
    rng = np.random.default_rng(3)
    w = solve_assignment(JunctionTopology.standard3(), S1_RHO)
    n = 1_000_000
    dest, lane, probe = sample_vehicle(rng, w, p=0.3, size=n)
    counts = np.zeros((3, 3))
    np.add.at(counts, (lane, dest), 1)
    flat = w.w.ravel()
    keep = flat > 0
    chi = stats.chisquare(counts.ravel()[keep], flat[keep] * n)
    assert chi.pvalue > 0.001
    assert (counts.ravel()[~keep] == 0).all()
    assert probe.mean() == pytest.approx(0.3, abs=3 * 0.46 / np.sqrt(n))


def test_sample_vehicle_scalar_form():
    rng = np.random.default_rng(3)
    w = solve_assignment(JunctionTopology.standard3(), S1_RHO)
    dest, lane, probe = sample_vehicle(rng, w, p=0.0)
    assert isinstance(dest, int) and isinstance(lane, int) and probe is False


# ---------------------------------------------------------------------------
# full simulation


def test_vehicle_conservation():
    for seed in (1, 2, 3):
        trace = run_simulation(scenario(seed=seed, horizon_s=6000.0))
        assert trace.total_arrivals == trace.total_departures + trace.final_in_system


def test_cycle_count_is_floor_of_horizon():
    trace = run_simulation(scenario(horizon_s=1000.0))
    assert len(trace.cycles) == 8


def test_mean_queue_tracks_stock():
    # lane arrival rates are lambda * w_i = 0.25 each, so the end-of-red
    # stock is 15 per lane
    trace = run_simulation(scenario(horizon_s=96000.0, seed=2))
    queues = np.array([c.true_queues for c in trace.cycles], dtype=float)
    n = queues.shape[0]
    assert n == 800
    for i in range(3):
        se = queues[:, i].std(ddof=1) / np.sqrt(n)
        assert abs(queues[:, i].mean() - 15.0) < 4 * se
        assert 0.9 < queues[:, i].mean() / 15.0 < 1.1
    for i, j in [(0, 1), (0, 2), (1, 2)]:
        r = np.corrcoef(queues[:, i], queues[:, j])[0, 1]
        assert abs(r) < 0.1


def test_probe_thinning():
    trace = run_simulation(scenario(p=0.3, horizon_s=48000.0, seed=4))
    probes = sum(sum(c.probe_queues) for c in trace.cycles)
    total = sum(sum(c.true_queues) for c in trace.cycles)
    se = np.sqrt(0.3 * 0.7 * total)
    assert abs(probes - 0.3 * total) < 3 * se


def test_determinism():
    a = run_simulation(scenario(seed=9, horizon_s=6000.0))
    b = run_simulation(scenario(seed=9, horizon_s=6000.0))
    assert a.cycles == b.cycles
    assert a.total_arrivals == b.total_arrivals


def test_lambda_zero_is_empty():
    trace = run_simulation(scenario(lam=0.0, horizon_s=6000.0))
    for c in trace.cycles:
        assert c.true_queues == (0, 0, 0)
        assert c.m == 0 and c.x_p == 0
        assert c.probe_exits == ()
        assert c.last_probe_lane is None


def test_p_zero_sees_nothing():
    trace = run_simulation(scenario(p=0.0, horizon_s=6000.0))
    for c in trace.cycles:
        assert c.probe_queues == (0, 0, 0)
        assert c.m == 0 and c.x_p == 0 and c.last_probe_lane is None
        assert c.probe_exits == ()


def test_p_one_sees_everything():
    trace = run_simulation(scenario(p=1.0, horizon_s=6000.0))
    for c in trace.cycles:
        assert c.probe_queues == c.true_queues
        assert c.m == max(c.true_queues)
        assert c.x_p == sum(c.true_queues)


def test_observation_invariants():
    cfg = scenario(p=0.4, horizon_s=12000.0, seed=13)
    w = solve_assignment(cfg.topology, cfg.rho)
    permitted = {(i, j) for i in range(3) for j in range(3) if w.w[i, j] > 0}
    trace = run_simulation(cfg, w=w)
    green = cfg.timing.green_s
    for c in trace.cycles:
        assert c.x_p == sum(c.probe_queues)
        assert c.m == max(c.last_probe_rows)
        for i in range(3):
            assert c.probe_queues[i] <= c.true_queues[i]
            assert c.last_probe_rows[i] <= c.true_queues[i]
        assert len(c.queued_probe_lanes) == c.x_p
        assert len(c.queued_probe_dests) == c.x_p
        times = [e.t_e for e in c.probe_exits]
        assert times == sorted(times)
        for e in c.probe_exits:
            assert e.t_e <= green + 1e-6
            assert 0 <= e.dest < 3
        for lane, dest in zip(c.queued_probe_lanes, c.queued_probe_dests):
            assert (lane, dest) in permitted


def test_overflow_carries_residual():
    cfg = scenario(q_sat=0.3, horizon_s=12000.0, seed=5)
    trace = run_simulation(cfg)
    assert any(c.overflow for c in trace.cycles)
    for prev, cur in zip(trace.cycles, trace.cycles[1:]):
        if not prev.overflow:
            assert cur.carry_in == 0
    assert trace.total_arrivals == trace.total_departures + trace.final_in_system


def test_green_arrivals_toggle():
    trace = run_simulation(scenario(p=1.0, horizon_s=6000.0), green_arrivals=False)
    for c in trace.cycles:
        assert all(e.queued for e in c.probe_exits)
    with_green = run_simulation(scenario(p=1.0, horizon_s=6000.0))
    assert any(not e.queued for c in with_green.cycles for e in c.probe_exits)
