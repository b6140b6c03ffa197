"""Follow-up waves: change decomposition and chained estimates.

Between reference days ``t0 < t1`` the infected total moves as

    Y1 = Y0 - dD - dH + dY

with ``dD`` the infected at ``t0`` who are dead at ``t1``, ``dH`` those who
have recovered and ``dY`` the persons not infected at ``t0`` but infected at
``t1``. Exits are estimated by re-reading, at ``t1``, the units sampled at
``t0`` with their ``t0`` weights. New infections are estimated from the wave
``t1`` sample, with newly verified cases as side-A anchors and panelists who
converted since ``t0`` as side-B anchors.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .designs import ContactScheme, Sample, TwoFrameSample, draw_two_frame, srswor, trace_contacts
from .errors import ConfigError, ConsistencyError, DesignError
from .estimators import estimate, two_frame_inputs
from .frames import (
    WINDOW_DAYS,
    Snapshot,
    World,
    build_world,
    link_window,
    make_world,
    partition_and_multiplicities,
    with_value,
)
from .rng import stream
from .synthpop import D, INFECTED_STATES, R, EpidemicTrace


@dataclass(frozen=True)
class WaveDelta:
    dD: int
    dH: int
    dY: int

    def __post_init__(self):
        if min(self.dD, self.dH, self.dY) < 0:
            raise ConsistencyError("change counts must be non-negative")


def decompose_delta(trace: EpidemicTrace, t0: int, t1: int) -> WaveDelta:
    """Exact deaths, recoveries and new infections between ``t0`` and ``t1``.

    ``t1 == t0`` gives ``(0, 0, 0)``. The signed identity is checked against
    the trace.
    """
    if t1 < t0:
        raise ConfigError(f"t1={t1} precedes t0={t0}")
    trace.check_day(t0)
    trace.check_day(t1)
    s0, s1 = trace.states[t0], trace.states[t1]
    y0 = np.isin(s0, INFECTED_STATES)
    y1 = np.isin(s1, INFECTED_STATES)
    delta = WaveDelta(int((y0 & (s1 == D)).sum()), int((y0 & (s1 == R)).sum()), int((~y0 & y1).sum()))
    if int(y1.sum()) != int(y0.sum()) - delta.dD - delta.dH + delta.dY:
        raise ConsistencyError(f"change identity fails between days {t0} and {t1}")
    if delta.dD + delta.dH > int(y0.sum()):
        raise ConsistencyError("more exits than infected persons")
    return delta


def chain_estimate(Y_prev: float, dD: float, dH: float, dY: float) -> float:
    return Y_prev - dD - dH + dY


def exit_world(prev: World, trace: EpidemicTrace, t: int, outcome: int) -> World:
    """The ``t0`` world with contact values ``y_t0 * [state at t == outcome]``."""
    trace.check_day(t)
    z = prev.snapshot.y * (trace.states[t] == outcome)
    return with_value(prev, z)


def delta_world(trace: EpidemicTrace, t_prev: int, t: int, window_length: int = WINDOW_DAYS) -> World:
    """World for new infections ``z = (1 - y_{t_prev}) y_t``.

    Side-A anchors are ``U_v(t)`` members verified after ``t_prev``; side-B
    anchors are ``U_c(t)`` members with ``z = 1``. Multiplicities count only
    those anchors.
    """
    if t <= t_prev:
        raise ConfigError("t must follow t_prev")
    snap = Snapshot.from_trace(trace, t)
    link = link_window(trace, t, window_length)
    frames, _, _ = partition_and_multiplicities(snap, link)
    y_prev = np.isin(trace.states[t_prev], INFECTED_STATES).astype(np.int8)
    z = ((1 - y_prev) * snap.y).astype(np.int8)
    fresh = (frames.in_v & (snap.verified_day > t_prev)).astype(np.int8)
    return make_world(snap, link, frames, z, fresh, z)


def refresh_panel(panel: Sample, in_c: np.ndarray, target: int | None, rng: np.random.Generator) -> Sample:
    """Drop members who left ``U_c`` and top up from ``U_c`` to ``target``.

    ``target=None`` keeps the panel equal to the whole of ``U_c``. Inclusion
    probabilities are set to ``size / #U_c``, which is exact for the census
    and for the first wave and an approximation afterwards.
    """
    U_c = np.nonzero(in_c)[0]
    if target is None:
        return Sample.first_stage(U_c, 1.0, "C", "panel")
    keep = panel.person_id[in_c[panel.person_id]]
    need = target - len(keep)
    if need > 0:
        pool = np.setdiff1d(U_c, keep)
        if len(pool):
            extra = srswor(pool, min(need, len(pool)), rng, origin="C").person_id
            keep = np.sort(np.concatenate([keep, extra]))
    if len(keep) == 0:
        raise DesignError("panel is empty after refresh")
    return Sample.first_stage(keep, len(keep) / len(U_c), "C", "panel")


@dataclass
class WaveConfig:
    times: tuple = (10, 20, 30, 40, 50)
    n_v: int | None = None
    panel_size: int | None = 900
    scheme_v: ContactScheme = field(default_factory=ContactScheme.all)
    scheme_c: ContactScheme = field(default_factory=ContactScheme.all)
    alpha_policy: str = "minvar"
    window_length: int = WINDOW_DAYS
    seed: int = 0

    def validate(self, horizon: int) -> None:
        t = list(self.times)
        if len(t) < 2:
            raise ConfigError("at least two wave times are needed")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ConfigError("wave times must be strictly increasing")
        if t[0] < 1 or t[-1] > horizon:
            raise ConfigError(f"wave times must lie in 1..{horizon}")


@dataclass
class WaveInputs:
    world: World
    sample: TwoFrameSample
    exits_dead: World | None = None
    exits_healed: World | None = None
    new_cases: World | None = None


@dataclass
class WaveRow:
    t: int
    Y_hat: float
    dD_hat: float
    dH_hat: float
    dY_hat: float
    Y_true: int
    Y_cross: float
    dD: int = 0
    dH: int = 0
    dY: int = 0


WAVE_HEADER = ["t", "Y_hat", "dD_hat", "dH_hat", "dY_hat", "Y_true"]


def _draw(world: World, panel: Sample, cfg: WaveConfig, rng) -> TwoFrameSample:
    if len(world.frames.U_v) == 0:
        empty = Sample.first_stage([], 1.0, "V", "verified")
        tv = trace_contacts(empty.person_id, world.link, cfg.scheme_v, rng)
        pos = panel.person_id[world.snapshot.y[panel.person_id] == 1]
        return TwoFrameSample(empty, tv, panel, trace_contacts(pos, world.link, cfg.scheme_c, rng))
    return draw_two_frame(world, cfg.n_v, panel, cfg.scheme_v, cfg.scheme_c, rng)


def followup_samples(prev: WaveInputs, trace: EpidemicTrace, t: int, cfg: WaveConfig,
                     rng: np.random.Generator) -> WaveInputs:
    """Wave-``t`` sample plus the three change worlds relative to ``prev``."""
    if np.any(prev.sample.panel.person_id >= trace.n_persons):
        raise DesignError("previous sample references persons absent from the trace")
    t_prev = prev.world.day
    world = build_world(trace, t, cfg.window_length)
    panel = refresh_panel(prev.sample.panel, world.frames.in_c, cfg.panel_size, rng)
    sample = _draw(world, panel, cfg, rng)
    return WaveInputs(
        world,
        sample,
        exits_dead=exit_world(prev.world, trace, t, D),
        exits_healed=exit_world(prev.world, trace, t, R),
        new_cases=delta_world(trace, t_prev, t, cfg.window_length),
    )


def _estimate(world: World, sample: TwoFrameSample, policy: str) -> float:
    ia, ib = two_frame_inputs(world, sample)
    return estimate(ia, ib, policy).Y_hat


def run_waves(trace: EpidemicTrace, cfg: WaveConfig) -> list[WaveRow]:
    """Cross-section at the first time, then chained updates at each later time."""
    cfg.validate(trace.horizon)
    times = list(cfg.times)
    t0 = times[0]
    rng = stream(cfg.seed, "wave", t0)
    world = build_world(trace, t0, cfg.window_length)
    panel = refresh_panel(Sample.first_stage([], 1.0, "C"), world.frames.in_c, cfg.panel_size, rng)
    cur = WaveInputs(world, _draw(world, panel, cfg, rng))
    y_hat = _estimate(world, cur.sample, cfg.alpha_policy)
    rows = [WaveRow(t0, y_hat, 0.0, 0.0, 0.0, world.truth.Y, y_hat)]
    for t in times[1:]:
        nxt = followup_samples(cur, trace, t, cfg, stream(cfg.seed, "wave", t))
        dD = _estimate(nxt.exits_dead, cur.sample, cfg.alpha_policy)
        dH = _estimate(nxt.exits_healed, cur.sample, cfg.alpha_policy)
        dY = _estimate(nxt.new_cases, nxt.sample, cfg.alpha_policy)
        y_hat = chain_estimate(y_hat, dD, dH, dY)
        true = decompose_delta(trace, cur.world.day, t)
        rows.append(WaveRow(t, y_hat, dD, dH, dY, nxt.world.truth.Y,
                            _estimate(nxt.world, nxt.sample, cfg.alpha_policy), true.dD, true.dH, true.dY))
        cur = nxt
    return rows


def write_wave_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(WAVE_HEADER)
        for r in rows:
            w.writerow([r.t, repr(float(r.Y_hat)), repr(float(r.dD_hat)), repr(float(r.dH_hat)),
                        repr(float(r.dY_hat)), int(r.Y_true)])


def read_wave_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {"t": int(r["t"]), "Y_hat": float(r["Y_hat"]), "dD_hat": float(r["dD_hat"]),
             "dH_hat": float(r["dH_hat"]), "dY_hat": float(r["dY_hat"]), "Y_true": int(r["Y_true"])}
            for r in csv.DictReader(fh)
        ]
