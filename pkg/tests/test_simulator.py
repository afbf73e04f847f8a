"""Trajectory-level checks for the event-driven feeder simulation.

Most of these lean on exact counting identities (flow conservation,
deterministic replay) or on classical queueing facts the network reduces
to in corner cases: a single station under the linearized model is a plain
M/M/1 queue with service rate equal to the full boundary power, and an
overloaded station grows at its arrival surplus.  Statistical assertions
use horizons long enough that the noise floor sits orders of magnitude
below the tested effect.
"""

from __future__ import annotations

import math
from dataclasses import replace

import pytest

import linestab.simulator as simulator
from linestab.allocator import FairnessSpec, alpha_fair_distflow, alpha_fair_lindist
from linestab.powerflow import NetworkConfig, PowerModel, feasible
from linestab.simulator import (
    Classification,
    SimConfig,
    _make_allocator,
    _normalize,
    simulate,
    stability_probe,
)
from linestab.stability import lambda_dist, lambda_lin

NET1 = NetworkConfig(n_stations=1, resistance=1.0, delta=0.2)
# with one occupied station the whole boundary budget goes to it
P_STAR = NET1.w_headroom / (2.0 * NET1.resistance)


def _cfg(**overrides) -> SimConfig:
    base = dict(
        network=NET1,
        fairness=FairnessSpec(1.0),
        model=PowerModel.LINDIST,
        arrival_rate=0.5 * P_STAR,
        horizon=4096.0,
        seed=11,
        sample_interval=8.0,
    )
    base.update(overrides)
    return SimConfig(**base)


class TestConfigValidation:
    @pytest.mark.parametrize(
        "field, value",
        [
            ("arrival_rate", -0.1),
            ("arrival_rate", math.nan),
            ("arrival_rate", math.inf),
            ("horizon", 0.0),
            ("horizon", -3.0),
            ("horizon", math.nan),
            ("sample_interval", 0.0),
            ("sample_interval", -1.0),
            ("sample_interval", math.nan),
            ("seed", -1),
            ("seed", 1.5),
        ],
    )
    def test_rejects_bad_field(self, field, value):
        with pytest.raises(ValueError):
            _cfg(**{field: value})

    def test_sample_interval_must_fit_inside_horizon(self):
        with pytest.raises(ValueError):
            _cfg(horizon=10.0, sample_interval=10.5)

    def test_zero_arrival_rate_is_allowed(self):
        assert _cfg(arrival_rate=0.0).arrival_rate == 0.0


class TestNormalize:
    @pytest.mark.parametrize(
        "x, want",
        [
            ((2, 4, 6), (1, 2, 3)),
            ((3, 5), (3, 5)),
            ((0, 0, 0), (0, 0, 0)),
            ((0, 4, 8), (0, 1, 2)),
            ((7,), (1,)),
            ((), ()),
            ((12, 18, 30), (2, 3, 5)),
        ],
    )
    def test_divides_by_gcd(self, x, want):
        assert _normalize(x) == want


class TestFrozenFeeder:
    def test_no_arrivals_means_nothing_ever_happens(self):
        cfg = _cfg(
            network=NetworkConfig(3, 1.0, 0.2),
            arrival_rate=0.0,
            horizon=4096.0,
            sample_interval=8.0,
        )
        rep = simulate(cfg)
        assert rep.error is None
        assert rep.arrivals == 0 and rep.departures == 0
        assert set(rep.total_queue) == {0}
        assert rep.max_total_queue == 0
        assert rep.drift_estimate == 0.0
        assert rep.per_station_mean == (0.0, 0.0, 0.0)
        assert len(rep.time_grid) == 513
        assert rep.time_grid == tuple(8.0 * i for i in range(513))


class TestDeterminism:
    def test_identical_configs_give_identical_reports(self):
        net = NetworkConfig(3, 1.0, 0.2)
        cfg = _cfg(
            network=net,
            arrival_rate=0.8 * lambda_lin(net),
            horizon=2048.0,
            sample_interval=4.0,
            seed=123,
        )
        assert simulate(cfg) == simulate(cfg)

    def test_distflow_path_is_deterministic_too(self):
        net = NetworkConfig(2, 1.0, 0.2)
        cfg = _cfg(
            network=net,
            model=PowerModel.DISTFLOW,
            fairness=FairnessSpec(2.0),
            arrival_rate=0.8 * lambda_dist(net),
            horizon=2048.0,
            sample_interval=4.0,
            seed=77,
        )
        assert simulate(cfg) == simulate(cfg)

    def test_different_seeds_give_different_trajectories(self):
        cfg = _cfg(horizon=2048.0, sample_interval=4.0, seed=1)
        a = simulate(cfg)
        b = simulate(replace(cfg, seed=2))
        assert (a.arrivals, a.total_queue) != (b.arrivals, b.total_queue)


class TestFlowConservation:
    # horizon an exact binary multiple of the interval, so the last grid
    # point sits at the horizon itself and samples the final state
    @pytest.mark.parametrize("model", [PowerModel.LINDIST, PowerModel.DISTFLOW])
    @pytest.mark.parametrize("seed", [0, 7])
    def test_counts_balance(self, model, seed):
        net = NetworkConfig(3, 1.0, 0.2)
        lam_star = lambda_lin(net) if model is PowerModel.LINDIST else lambda_dist(net)
        cfg = _cfg(
            network=net,
            model=model,
            arrival_rate=0.7 * lam_star,
            horizon=4096.0,
            sample_interval=8.0,
            seed=seed,
        )
        rep = simulate(cfg)
        assert rep.error is None
        assert rep.arrivals >= rep.departures >= 0
        assert rep.arrivals - rep.departures == rep.total_queue[-1]
        assert all(q >= 0 for q in rep.total_queue)
        assert rep.max_total_queue >= max(rep.total_queue)
        assert len(rep.time_grid) == len(rep.total_queue)
        assert all(m >= 0.0 for m in rep.per_station_mean)
        assert len(rep.per_station_mean) == net.n_stations


class TestEventFeasibility:
    @pytest.mark.parametrize("model", [PowerModel.LINDIST, PowerModel.DISTFLOW])
    def test_every_visited_state_gets_a_feasible_split(self, monkeypatch, model):
        net = NetworkConfig(3, 1.0, 0.2)
        lam_star = lambda_lin(net) if model is PowerModel.LINDIST else lambda_dist(net)
        seen: list[tuple[tuple[int, ...], tuple[float, ...]]] = []
        real = simulator._make_allocator

        def spying(cfg):
            inner = real(cfg)

            def wrapped(x):
                p, s = inner(x)
                seen.append((tuple(x), tuple(p)))
                return p, s

            return wrapped

        monkeypatch.setattr(simulator, "_make_allocator", spying)
        rep = simulate(
            _cfg(
                network=net,
                model=model,
                arrival_rate=0.9 * lam_star,
                horizon=2048.0,
                sample_interval=4.0,
                seed=3,
            )
        )
        assert rep.error is None
        # one solve up front, then one after every processed event
        assert len(seen) == rep.arrivals + rep.departures + 1
        assert any(any(x) for x, _ in seen)
        for x, p in seen:
            for xj, pj in zip(x, p):
                assert (pj > 0.0) == (xj > 0)
            if any(x):
                _, slack = feasible(p, net, model)
                assert slack >= -1e-9


class TestAllocatorBridge:
    def test_lindist_bridge_matches_closed_form(self):
        net = NetworkConfig(4, 0.8, 0.15)
        spec = FairnessSpec(2.0)
        solve = _make_allocator(
            _cfg(network=net, fairness=spec, arrival_rate=0.01, horizon=16.0,
                 sample_interval=1.0)
        )
        for x in [(1, 0, 2, 5), (0, 0, 0, 1), (3, 3, 3, 3)]:
            p, total = solve(x)
            ref = alpha_fair_lindist(x, spec, net)
            for got, want in zip(p, ref.p):
                assert got == pytest.approx(want, rel=1e-12)
            assert total == pytest.approx(math.fsum(ref.p), rel=1e-12)

    def test_distflow_bridge_matches_dual_solver(self):
        net = NetworkConfig(3, 1.2, 0.25)
        spec = FairnessSpec(2.0)
        solve = _make_allocator(
            _cfg(network=net, fairness=spec, model=PowerModel.DISTFLOW,
                 arrival_rate=0.01, horizon=16.0, sample_interval=1.0)
        )
        for x in [(2, 1, 4), (1, 0, 1), (0, 5, 0)]:
            p, total = solve(x)
            ref = alpha_fair_distflow(x, spec, net)
            for got, want in zip(p, ref.p):
                assert got == pytest.approx(want, rel=1e-6, abs=1e-12)
            _, slack = feasible(p, net, PowerModel.DISTFLOW)
            assert slack >= -1e-9
            assert total == pytest.approx(math.fsum(p), rel=1e-15)

    def test_proportional_states_share_one_solution(self):
        net = NetworkConfig(3, 1.0, 0.2)
        solve = _make_allocator(
            _cfg(network=net, model=PowerModel.DISTFLOW, arrival_rate=0.01,
                 horizon=16.0, sample_interval=1.0)
        )
        pa, sa = solve((1, 2, 3))
        pb, sb = solve((2, 4, 6))
        pc, sc = solve((3, 6, 9))
        assert pa == pb == pc
        assert sa == sb == sc

    def test_all_empty_draws_no_power(self):
        for model in (PowerModel.LINDIST, PowerModel.DISTFLOW):
            solve = _make_allocator(
                _cfg(network=NetworkConfig(3, 1.0, 0.2), model=model,
                     arrival_rate=0.01, horizon=16.0, sample_interval=1.0)
            )
            p, total = solve((0, 0, 0))
            assert p == [0.0, 0.0, 0.0]
            assert total == 0.0


class TestSingleStationOracle:
    def test_occupied_station_always_gets_full_boundary_power(self):
        solve = _make_allocator(_cfg())
        for k in (1, 2, 3, 5, 8):
            p, total = solve([k])
            assert p[0] == pytest.approx(P_STAR, rel=1e-12)
            assert total == pytest.approx(P_STAR, rel=1e-12)

    def test_mean_queue_matches_mm1_at_half_load(self):
        # rho = 1/2, so the stationary mean queue is rho/(1 - rho) = 1
        horizon = 1.0e5 / P_STAR
        rep = simulate(
            _cfg(
                arrival_rate=0.5 * P_STAR,
                horizon=horizon,
                sample_interval=horizon / 512.0,
                seed=2024,
            )
        )
        assert rep.error is None
        assert rep.per_station_mean[0] == pytest.approx(1.0, abs=0.25)

    def test_stable_station_has_negligible_drift(self):
        lam = 0.5 * P_STAR
        horizon = 2.0e4 / P_STAR
        rep = simulate(
            _cfg(arrival_rate=lam, horizon=horizon,
                 sample_interval=horizon / 512.0, seed=6)
        )
        assert abs(rep.drift_estimate) < 0.05 * lam

    def test_overloaded_station_grows_at_its_arrival_surplus(self):
        lam = 3.0 * P_STAR
        horizon = 2.0e4 / (lam + P_STAR)
        rep = simulate(
            _cfg(arrival_rate=lam, horizon=horizon,
                 sample_interval=horizon / 512.0, seed=5)
        )
        surplus = lam - P_STAR
        assert rep.drift_estimate == pytest.approx(surplus, rel=0.2)
        assert rep.total_queue[-1] > 0.5 * surplus * horizon


class TestStabilityProbe:
    def test_brackets_the_single_station_threshold(self):
        base = _cfg(arrival_rate=P_STAR, horizon=64.0, sample_interval=1.0, seed=42)
        rows = stability_probe(base, (0.5, 3.0), replications=3, min_events=20_000)
        assert [r.classification for r in rows] == [
            Classification.STABLE,
            Classification.UNSTABLE,
        ]
        low, high = rows
        assert low.multiplier == 0.5 and high.multiplier == 3.0
        assert low.arrival_rate == pytest.approx(0.5 * P_STAR, rel=1e-15)
        assert low.stable_votes == 3 and low.unstable_votes == 0
        assert high.unstable_votes == 3
        assert low.q_cap == 50.0
        assert high.eps_drift == pytest.approx(0.05 * 3.0 * P_STAR, rel=1e-15)
        assert all(q < low.q_cap for q in low.max_queues)
        assert all(d > high.eps_drift for d in high.drifts)
        assert len(low.reports) == 3
        assert all(r.error is None for r in low.reports)

    def test_replication_seeds_step_from_the_base_seed(self):
        base = _cfg(arrival_rate=0.5 * P_STAR, horizon=64.0, sample_interval=1.0,
                    seed=900)
        rows = stability_probe(base, (1.0,), replications=2, min_events=4000)
        lam = base.arrival_rate
        horizon = max(base.horizon, 1.05 * 4000 / lam)
        want = simulate(
            replace(
                base,
                arrival_rate=lam,
                horizon=horizon,
                seed=base.seed + 1,
                sample_interval=horizon / 512.0,
            )
        )
        assert rows[0].reports[1] == want

    def test_queue_cap_of_zero_forces_inconclusive(self):
        base = _cfg(arrival_rate=0.5 * P_STAR, horizon=64.0, sample_interval=1.0,
                    seed=13)
        rows = stability_probe(
            base, (1.0,), replications=3, min_events=2000, q_cap=0.0
        )
        assert rows[0].classification is Classification.INCONCLUSIVE
        assert rows[0].stable_votes == 0
        assert rows[0].unstable_votes == 0

    @pytest.mark.parametrize("model", [PowerModel.LINDIST, PowerModel.DISTFLOW])
    def test_frontier_brackets_theory_on_a_small_feeder(self, model):
        net = NetworkConfig(3, 1.0, 0.1)
        lam_star = lambda_lin(net) if model is PowerModel.LINDIST else lambda_dist(net)
        base = _cfg(network=net, model=model, arrival_rate=lam_star,
                    horizon=64.0, sample_interval=1.0, seed=9)
        rows = stability_probe(base, (0.5, 2.0), replications=3, min_events=8000)
        assert [r.classification for r in rows] == [
            Classification.STABLE,
            Classification.UNSTABLE,
        ]

    def test_rejects_bad_arguments(self):
        base = _cfg(arrival_rate=0.5 * P_STAR)
        with pytest.raises(ValueError):
            stability_probe(base, (0.5,), replications=0)
        for bad in (0.0, -1.0, math.nan):
            with pytest.raises(ValueError):
                stability_probe(base, (bad,), replications=1, min_events=100)
        with pytest.raises(ValueError):
            stability_probe(_cfg(arrival_rate=0.0), (0.5,))


class TestMonotoneLoadResponse:
    def test_mean_queue_grows_with_load(self):
        net = NetworkConfig(5, 1.0, 0.1)
        lam_star = lambda_lin(net)
        means = []
        for mult in (0.4, 0.8):
            lam = mult * lam_star
            horizon = 5000.0 / (net.n_stations * lam)  # ~5000 arrivals per run
            acc = 0.0
            for seed in range(5):
                rep = simulate(
                    _cfg(
                        network=net,
                        arrival_rate=lam,
                        horizon=horizon,
                        sample_interval=horizon / 256.0,
                        seed=seed,
                    )
                )
                assert rep.error is None
                acc += math.fsum(rep.per_station_mean)
            means.append(acc / 5.0)
        assert means[0] > 0.0
        assert means[1] >= means[0]
