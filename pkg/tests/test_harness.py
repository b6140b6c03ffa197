import dataclasses
import json

import numpy as np
import pytest

from epiframes.errors import ConfigError, NoVerifiedCasesError
from epiframes.frames import build_world
from epiframes.harness import (
    TABLE3_HEADER,
    ExperimentConfig,
    ExperimentResult,
    SchemeId,
    days_matching_prevalence,
    draw_replicate,
    emit_report,
    prevalence_curve,
    read_table3,
    replicate,
    run_experiment,
    run_scheme,
    srs_standard_error,
)
from epiframes.synthpop import SimConfig

GOLDEN_HEADER = ("day,prevalence,true_total,scheme,mean_estimate,alpha_star,standard_error,cv_percent,"
                 "relative_absolute_bias,efficiency_srs_without_contacts,efficiency_srs_with_contacts")


def small_cfg(small_trace, **kw):
    base = dict(sim=small_trace.config, days=(15, 20), R=20, n_v=10, n_C=150, seed=2)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def small_result(small_trace):
    return run_experiment(small_cfg(small_trace), small_trace)


def test_header_is_stable():
    assert TABLE3_HEADER == GOLDEN_HEADER


def test_scheme_ids():
    assert SchemeId("A1B2").scheme_v(0.9).mode == "all"
    assert SchemeId("A2B3").scheme_v(0.9).g == 0.9
    assert SchemeId("A1B3").scheme_c(12).nu == 12
    assert SchemeId("A2B2").scheme_c(12).mode == "all"
    with pytest.raises(ValueError):
        SchemeId("A3B1")


def test_experiment_deterministic(small_trace, small_result):
    again = run_experiment(small_cfg(small_trace), small_trace)
    assert again.rows == small_result.rows
    assert again.truth == small_result.truth


def test_order_invariance(small_trace):
    cfg = small_cfg(small_trace, R=8)
    world = build_world(small_trace, 20)
    fwd = run_scheme(world, "A2B3", cfg)
    rev = run_scheme(world, "A2B3", cfg, order=list(range(8))[::-1])
    assert fwd == rev
    with pytest.raises(ConfigError):
        run_scheme(world, "A2B3", cfg, order=[0, 1, 2])


def test_common_random_numbers_across_schemes(small_trace):
    cfg = small_cfg(small_trace)
    world = build_world(small_trace, 20)
    a = draw_replicate(world, SchemeId.A1B2, cfg, 3)
    b = draw_replicate(world, SchemeId.A2B3, cfg, 3)
    assert np.array_equal(a.verified.person_id, b.verified.person_id)
    assert np.array_equal(a.panel.person_id, b.panel.person_id)


def test_rows_are_sane(small_result):
    for r in small_result.rows:
        assert r.R == 20
        assert 0 <= r.alpha_star <= 1
        assert r.units_with_contacts >= r.units_without_contacts
        assert r.standard_error >= 0
        assert r.relative_absolute_bias >= 0
    for t in small_result.truth:
        assert t.Y == t.Y_A + t.Y_B - t.Y_AB
        assert t.n_verified + t.n_complement == t.n_alive


def test_contact_schemes_test_fewer_people(small_result):
    for day in (15, 20):
        full = small_result.row(day, "A1B2").units_with_contacts
        assert small_result.row(day, "A2B3").units_with_contacts <= full


def test_census_replicate_is_exact(small_trace):
    cfg = small_cfg(small_trace, n_v="census", n_C="census")
    world = build_world(small_trace, 20)
    rep, n_first, n_tested = replicate(world, SchemeId.A1B2, cfg, 0)
    assert rep.Y_hat == pytest.approx(world.truth.Y, abs=1e-9)
    assert n_first == world.n_alive


def test_no_verified_cases(small_trace):
    cfg = small_cfg(small_trace)
    world = build_world(small_trace, 1)
    assert len(world.frames.U_v) == 0
    with pytest.raises(NoVerifiedCasesError):
        replicate(world, SchemeId.A1B2, cfg, 0)


def test_srs_standard_error(small_trace):
    world = build_world(small_trace, 20)
    N = world.n_alive
    y = world.snapshot.y[world.alive]
    p = y.mean()
    n = 100
    assert srs_standard_error(world, n) == pytest.approx(np.sqrt(N * N * (1 - n / N) * p * (1 - p) * N / (N - 1) / n))
    assert srs_standard_error(world, N) == 0.0


def test_emit_and_read_round_trip(tmp_path, small_result):
    paths = emit_report(small_result, tmp_path, "csv")
    assert [p.name for p in paths] == ["table3.csv", "table1.csv", "table2.csv"]
    assert (tmp_path / "table3.csv").read_text().splitlines()[0] == GOLDEN_HEADER
    back = read_table3(tmp_path / "table3.csv")
    for got, row in zip(back, small_result.rows):
        d = dataclasses.asdict(row)
        for k, v in got.items():
            assert v == d[k]
    emit_report(small_result, tmp_path, "json")
    again = ExperimentResult.from_dict(json.loads((tmp_path / "result.json").read_text()))
    assert again.rows == small_result.rows
    assert again.truth == small_result.truth
    assert np.array_equal(again.counts, small_result.counts)


def test_plotdata_shape(tmp_path, trace):
    result = ExperimentResult({}, [], [], trace.counts)
    emit_report(result, tmp_path, "plotdata")
    lines = (tmp_path / "plotdata.csv").read_text().splitlines()
    assert lines[0] == "day,state,count"
    assert len(lines) - 1 == 84 * 6
    with pytest.raises(ConfigError):
        emit_report(result, tmp_path, "xlsx")


def test_config_parsing():
    cfg = ExperimentConfig.from_mapping({"grid_rows": "3", "days": "10, 20", "R": "50", "n_v": "census",
                                         "n_C": "auto", "schemes": "A1B2,A2B3", "seed": "7"})
    assert cfg.sim.grid_rows == 3 and cfg.days == (10, 20) and cfg.R == 50
    assert cfg.n_v == "census" and cfg.n_C is None
    assert cfg.schemes == (SchemeId.A1B2, SchemeId.A2B3)
    assert cfg.seed == 7
    assert ExperimentConfig.from_mapping({"seed": "4"}).seed == 4
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"colour": "red"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"R": "many"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"n_v": "-3"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"schemes": "A9"})
    for bad in (dict(R=1), dict(days=(0,)), dict(alpha_policy="best"), dict(g=0.0), dict(nu=0)):
        with pytest.raises(ConfigError):
            ExperimentConfig(**bad).validate()


def test_config_file(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("# comment\nR = 30\ndays=5,6\n\nmeetings_rate_1=4\n")
    cfg = ExperimentConfig.from_file(p)
    assert cfg.R == 30 and cfg.days == (5, 6) and cfg.sim.meetings_rate_1 == 4.0
    assert ExperimentConfig.from_mapping({k: str(v) if not isinstance(v, list) else ",".join(map(str, v))
                                          for k, v in cfg.to_mapping().items() if v is not None}) == cfg


def test_default_sizes(small_trace):
    world = build_world(small_trace, 20)
    nv, nc = ExperimentConfig().sizes(world)
    assert nv == min(len(world.frames.U_v), 1200)
    assert nc == min(len(world.frames.U_c), 900)


def test_lockdown_reduces_contacts(trace):
    per_day = np.bincount(trace.contact_day, minlength=trace.horizon + 1)[1:]
    p1 = trace.config.phase1_days
    assert per_day[p1:].mean() < per_day[:p1].mean()


def test_prevalence_days(trace):
    days = days_matching_prevalence(trace)
    prev = prevalence_curve(trace)
    assert days[-1] == 35
    assert prev[days[0]] >= 0.0058 and prev[days[0] - 1] < 0.0058
    assert days[0] < days[1]
    with pytest.raises(ConfigError):
        days_matching_prevalence(trace, targets=(0.99,))
