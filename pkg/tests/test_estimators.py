import numpy as np
import pytest

from probeq import (
    CycleObservation,
    JunctionTopology,
    NoProbeExits,
    ProbeExit,
    ScenarioConfig,
    SignalTiming,
    ZeroColumn,
    ZeroPenetration,
    estimate_lambda,
    estimate_p,
    estimate_primary,
    estimate_turn_ratios,
    probe_counts_E0,
    probe_counts_E1,
    run_simulation,
    solve_assignment,
)

S1_RHO = (0.1, 0.8, 0.1)
S2_RHO = (0.7, 0.15, 0.15)


def cycle(x_p=0, exits=(), arrivals_red=0, dests=(), lanes=None, **kw):
    defaults = dict(
        cycle_index=0,
        true_queues=(0, 0, 0),
        probe_queues=(0, 0, 0),
        m=0,
        last_probe_lane=None,
        x_p=x_p,
        probe_exits=tuple(exits),
        probe_arrivals_in_red=arrivals_red,
        overflow=False,
        queued_probe_dests=tuple(dests),
        queued_probe_lanes=tuple(lanes if lanes is not None else [0] * len(dests)),
    )
    defaults.update(kw)
    return CycleObservation(**defaults)


def scenario(rho=S1_RHO, lam=0.75, p=0.5, horizon_s=36000.0, seed=17, q_sat=2.0):
    return ScenarioConfig(
        topology=JunctionTopology.standard3(),
        rho=rho,
        lam=lam,
        p=p,
        q_sat=q_sat,
        timing=SignalTiming(60.0, 60.0),
        horizon_s=horizon_s,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# penetration ratio


def test_p_hat_single_cycle_arithmetic():
    # 4 queued probes, last queued exits at 10 s and 6 s on two roads:
    # served flow is q_sat * 16, so p_hat = 4 / (0.5 * 16) = 0.5
    exits = (
        ProbeExit(1, 0, 4.0, True),
        ProbeExit(2, 0, 10.0, True),
        ProbeExit(3, 1, 6.0, True),
        ProbeExit(4, 1, 2.0, False),  # pass-through, ignored
    )
    c = cycle(x_p=4, exits=exits)
    assert estimate_p([c], q_sat=0.5) == pytest.approx(0.5)


def test_p_hat_pools_across_cycles():
    c1 = cycle(x_p=2, exits=(ProbeExit(1, 0, 8.0, True),))
    c2 = cycle(x_p=0, exits=())
    c3 = cycle(x_p=2, exits=(ProbeExit(2, 1, 8.0, True),))
    pooled = estimate_p([c1, c2, c3], q_sat=0.5)
    assert pooled == pytest.approx(4.0 / (0.5 * 16.0))


def test_p_hat_clamped_to_one():
    c = cycle(x_p=9, exits=(ProbeExit(1, 0, 2.0, True),))
    assert estimate_p([c], q_sat=0.5) == 1.0


def test_p_hat_requires_queued_exits():
    with pytest.raises(NoProbeExits):
        estimate_p([cycle(x_p=1, exits=(ProbeExit(1, 0, 3.0, False),))], q_sat=0.5)
    with pytest.raises(ValueError):
        estimate_p([cycle()], q_sat=0.0)


def test_p_hat_exact_at_full_penetration():
    trace = run_simulation(scenario(p=1.0, horizon_s=12000.0))
    assert estimate_p(trace, q_sat=2.0) == 1.0


def test_p_hat_statistical_accuracy():
    # short cohorts bias p_hat upward a little (the last queued probe sits
    # ~(1-p)/p vehicles short of the cohort end); longer reds tighten this
    for p in (0.3, 0.7):
        trace = run_simulation(scenario(p=p, seed=23))
        assert estimate_p(trace, q_sat=2.0) == pytest.approx(p, abs=0.06)


# ---------------------------------------------------------------------------
# arrival rate


def test_lambda_hat_arithmetic():
    cycles = [cycle(arrivals_red=5), cycle(arrivals_red=10)]
    # 15 probes / (p=0.5 * 6 s red * 2 cycles) = 2.5 veh/s
    assert estimate_lambda(cycles, p=0.5, red_s=6.0) == pytest.approx(2.5)


def test_lambda_hat_zero_arrivals():
    assert estimate_lambda([cycle()], p=0.5, red_s=6.0) == 0.0


def test_lambda_hat_requires_positive_p_and_red():
    with pytest.raises(ZeroPenetration):
        estimate_lambda([cycle()], p=0.0, red_s=6.0)
    with pytest.raises(ValueError):
        estimate_lambda([cycle()], p=0.5, red_s=0.0)
    with pytest.raises(ValueError):
        estimate_lambda([cycle()], p=0.5)
    with pytest.raises(ValueError):
        estimate_lambda([], p=0.5, red_s=6.0)


def test_lambda_hat_uses_trace_timing():
    trace = run_simulation(scenario(p=0.5, horizon_s=12000.0))
    direct = estimate_lambda(trace, p=0.5)
    explicit = estimate_lambda(trace.cycles, p=0.5, red_s=60.0)
    assert direct == explicit


def test_lambda_hat_nearly_unbiased():
    # average over replications: the probe count is Poisson(p lam R C)
    vals = []
    for seed in range(120):
        trace = run_simulation(scenario(p=0.4, horizon_s=6000.0, seed=1000 + seed))
        vals.append(estimate_lambda(trace, p=0.4))
    vals = np.asarray(vals)
    se = vals.std(ddof=1) / np.sqrt(len(vals))
    assert abs(vals.mean() - 0.75) < 3 * se


def test_lambda_hat_s2_relative_error():
    trace = run_simulation(scenario(rho=S2_RHO, lam=0.5, p=0.4, seed=31))
    lam_hat = estimate_lambda(trace, p=0.4)
    assert abs(lam_hat - 0.5) / 0.5 < 0.05


# ---------------------------------------------------------------------------
# turn ratios


def test_rho_hat_counts_all_probe_exits():
    exits = tuple(
        ProbeExit(i, d, 1.0 + i, i % 2 == 0)
        for i, d in enumerate([0] * 7 + [1] * 2 + [2] * 1)
    )
    got = estimate_turn_ratios([cycle(exits=exits)])
    np.testing.assert_allclose(got, [0.7, 0.2, 0.1])


def test_rho_hat_requires_exits():
    with pytest.raises(NoProbeExits):
        estimate_turn_ratios([cycle()])


def test_rho_hat_s1_accuracy():
    trace = run_simulation(scenario(p=0.5, seed=41))
    got = estimate_turn_ratios(trace)
    np.testing.assert_allclose(got, S1_RHO, atol=0.02)


# ---------------------------------------------------------------------------
# per-lane probe counts


def test_e0_counts_by_destination():
    c = cycle(x_p=4, dests=(0, 1, 1, 2), lanes=(0, 0, 1, 2))
    est = probe_counts_E0(c)
    assert est.counts == (1, 2, 1)
    assert est.raw == (1.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        probe_counts_E0(cycle(x_p=1, dests=(5,), lanes=(0,)))


def test_e1_splits_by_posterior():
    w = solve_assignment(JunctionTopology.standard3(), S1_RHO)
    c = cycle(x_p=1, dests=(1,), lanes=(1,))
    est = probe_counts_E1(c, w)
    np.testing.assert_allclose(est.raw, [7.0 / 24.0, 10.0 / 24.0, 7.0 / 24.0])
    assert est.counts == (0, 0, 0)


def test_e1_exact_for_diagonal_w():
    w = solve_assignment(JunctionTopology.standard3(), S2_RHO)
    c = cycle(x_p=3, dests=(0, 0, 2), lanes=(0, 0, 2))
    est = probe_counts_E1(c, w)
    assert est.counts == (2, 0, 1)
    np.testing.assert_allclose(est.raw, [2.0, 0.0, 1.0], atol=1e-12)


def test_e1_raw_mass_is_conserved():
    w = solve_assignment(JunctionTopology.standard3(), S1_RHO)
    c = cycle(x_p=5, dests=(0, 1, 1, 2, 1), lanes=(0, 0, 1, 2, 2))
    est = probe_counts_E1(c, w)
    assert sum(est.raw) == pytest.approx(5.0)


def test_e1_rounds_half_away_from_zero():
    w = np.array([[0.5, 0.0], [0.5, 0.0], [0.0, 0.0]])
    c = cycle(x_p=1, dests=(0,), lanes=(0,))
    est = probe_counts_E1(c, w, rho=(1.0, 0.0))
    assert est.raw == (0.5, 0.5, 0.0)
    assert est.counts == (1, 1, 0)


def test_e1_zero_column_raises():
    w = solve_assignment(JunctionTopology.standard3(), (0.5, 0.5, 0.0))
    c = cycle(x_p=1, dests=(2,), lanes=(2,))
    with pytest.raises(ZeroColumn):
        probe_counts_E1(c, w)


# ---------------------------------------------------------------------------
# the chained pipeline


def test_primary_estimates_chain():
    trace = run_simulation(scenario(p=0.5, seed=19))
    est = estimate_primary(trace)
    assert abs(est.p_hat - 0.5) < 0.06
    # lambda_hat inherits p_hat's error exactly: their product is the raw
    # probe arrival rate, independent of the estimated penetration
    assert est.lambda_hat * est.p_hat == pytest.approx(
        estimate_lambda(trace, p=1.0), abs=1e-12
    )
    assert abs(est.lambda_hat - 0.75) < 0.1
    np.testing.assert_allclose(est.rho_hat, S1_RHO, atol=0.02)
    w_hat = solve_assignment(JunctionTopology.standard3(), est.rho_hat)
    np.testing.assert_allclose(
        est.lane_rates_hat, est.lambda_hat * w_hat.row_sums, atol=1e-12
    )
    assert sum(est.lane_rates_hat) == pytest.approx(est.lambda_hat)
