import numpy as np
import pytest

from epiframes.designs import Sample
from epiframes.errors import ConfigError, DesignError
from epiframes.synthpop import A, D, E, I, R, S, EpidemicTrace, SimConfig
from epiframes.waves import (
    WAVE_HEADER,
    WaveConfig,
    _draw,
    _estimate,
    chain_estimate,
    decompose_delta,
    delta_world,
    read_wave_csv,
    refresh_panel,
    run_waves,
    write_wave_csv,
)
from epiframes.frames import build_world


def hand_trace(states, contacts=()):
    states = np.asarray(states, dtype=np.int8)
    days, n = states.shape
    c = np.asarray(list(contacts), dtype=np.int32).reshape(-1, 3)
    cfg = SimConfig(grid_rows=1, grid_cols=1, cell_pop_min=n, cell_pop_max=n, phase1_days=days - 1,
                    phase2_days=0, initial_exposed=0)
    zeros = np.zeros_like(states, dtype=np.int16)
    return EpidemicTrace(cfg, states, zeros, zeros.copy(), c[:, 0].copy(), c[:, 1].copy(), c[:, 2].copy())


def test_hand_decomposition():
    # three infected at t0; one dies, one recovers, two new infections
    t = hand_trace([[I, I, A, S, S, S], [D, I, R, E, A, S]])
    d = decompose_delta(t, 0, 1)
    assert (d.dD, d.dH, d.dY) == (1, 1, 2)
    assert chain_estimate(3, d.dD, d.dH, d.dY) == 3 == t.infected(1).sum()


def test_degenerate_interval():
    t = hand_trace([[I, E, S], [R, I, E]])
    d = decompose_delta(t, 1, 1)
    assert (d.dD, d.dH, d.dY) == (0, 0, 0)
    with pytest.raises(ConfigError):
        decompose_delta(t, 1, 0)


def test_identity_on_simulated_trace(small_trace):
    y = small_trace.counts[:, [E, I, A]].sum(axis=1)
    for t0 in range(0, small_trace.horizon, 3):
        for t1 in (t0 + 1, min(t0 + 7, small_trace.horizon)):
            d = decompose_delta(small_trace, t0, t1)
            assert y[t1] == y[t0] - d.dD - d.dH + d.dY


def test_chain_properties():
    assert chain_estimate(17.5, 0, 0, 0) == 17.5
    # two steps equal one step with summed changes
    a = chain_estimate(chain_estimate(10, 1, 2, 5), 0.5, 1, 3)
    assert a == pytest.approx(chain_estimate(10, 1.5, 3, 8))


def test_census_chain_is_exact(small_trace):
    cfg = WaveConfig(times=(10, 15, 20, 25, 30, 35), n_v=None, panel_size=None, seed=3)
    rows = run_waves(small_trace, cfg)
    for r in rows:
        assert r.Y_hat == pytest.approx(r.Y_true, abs=1e-9)
        assert r.Y_cross == pytest.approx(r.Y_true, abs=1e-9)
    for r in rows[1:]:
        assert (r.dD_hat, r.dH_hat, r.dY_hat) == pytest.approx((r.dD, r.dH, r.dY), abs=1e-9)


def test_sampled_waves_run(small_trace):
    cfg = WaveConfig(times=(15, 20, 25), n_v=10, panel_size=200, seed=1)
    rows = run_waves(small_trace, cfg)
    assert [r.t for r in rows] == [15, 20, 25]
    assert all(np.isfinite(r.Y_hat) for r in rows)
    again = run_waves(small_trace, cfg)
    assert [r.Y_hat for r in rows] == [r.Y_hat for r in again]


def test_panel_refresh_drops_verified_members(rng):
    in_c = np.ones(20, dtype=bool)
    panel = Sample.first_stage([1, 4, 7, 9], 0.2, "C")
    in_c[[4, 9]] = False  # verified or dead since the last wave
    new = refresh_panel(panel, in_c, 4, rng)
    assert 4 not in new.person_id and 9 not in new.person_id
    assert {1, 7} <= set(new.person_id.tolist())
    assert len(new) == 4
    assert np.allclose(new.pi1, 4 / 18)
    census = refresh_panel(panel, in_c, None, rng)
    assert census.person_id.tolist() == np.nonzero(in_c)[0].tolist()
    with pytest.raises(DesignError):
        refresh_panel(panel, np.zeros(20, dtype=bool), 4, rng)


def test_verified_panel_member_moves_to_side_A(small_trace):
    world_prev = build_world(small_trace, 15)
    world = build_world(small_trace, 20)
    moved = np.nonzero(world_prev.frames.in_c & world.frames.in_v)[0]
    assert len(moved) > 0
    panel = Sample.first_stage(world_prev.frames.U_c, 1.0, "C")
    new = refresh_panel(panel, world.frames.in_c, None, np.random.default_rng(0))
    assert not np.isin(moved, new.person_id).any()
    fresh = delta_world(small_trace, 15, 20)
    assert np.all(fresh.gate_A[moved] == 1)


def test_no_new_cases_gives_zero(rng):
    # person 0 verified before t0 and nothing changes afterwards
    states = [[I, S, S, R], [I, S, S, R], [I, S, S, R]]
    trace = hand_trace(states, [(1, 0, 1), (2, 1, 2)])
    world = delta_world(trace, 1, 2, window_length=2)
    assert world.truth.Y == 0
    panel = Sample.first_stage(world.frames.U_c, 1.0, "C")
    cfg = WaveConfig(times=(1, 2), panel_size=None)
    sample = _draw(build_world(trace, 2, 2), panel, cfg, rng)
    assert _estimate(world, sample, "star") == 0.0


def test_wave_config_validation(small_trace):
    for times in [(10,), (10, 10), (20, 10), (0, 10), (10, small_trace.horizon + 1)]:
        with pytest.raises(ConfigError):
            run_waves(small_trace, WaveConfig(times=times))


def test_wave_csv_round_trip(tmp_path, small_trace):
    rows = run_waves(small_trace, WaveConfig(times=(10, 20), panel_size=None))
    write_wave_csv(rows, tmp_path / "w.csv")
    assert (tmp_path / "w.csv").read_text().splitlines()[0] == ",".join(WAVE_HEADER)
    back = read_wave_csv(tmp_path / "w.csv")
    assert [b["Y_hat"] for b in back] == [r.Y_hat for r in rows]
    assert [b["Y_true"] for b in back] == [r.Y_true for r in rows]
