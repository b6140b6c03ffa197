"""Artificial population on a square grid and a six-state epidemic driven by meetings.

People live in grid cells. Every day a fraction of the living population
moves by a random offset (clamped at the grid border), each cell holds a
Poisson number of meetings, and any meeting attended by an exposed or
asymptomatic person converts up to ``i_m`` susceptible attendees to exposed.
Exposed people leave the state after the incubation period, either as
symptomatic (and verified the same day) or asymptomatic cases.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd

from . import kernels
from .config import read_key_values
from .errors import ConfigError
from .rng import stream


class HealthState(IntEnum):
    SUSCEPTIBLE = 0
    EXPOSED = 1
    INFECTED_SYMPTOMATIC = 2
    ASYMPTOMATIC = 3
    RECOVERED = 4
    DEAD = 5

    @property
    def code(self) -> str:
        return "SEIARD"[self.value]


S, E, I, A, R, D = (int(s) for s in HealthState)
STATE_CODES = "SEIARD"
INFECTED_STATES = (E, I, A)

# allowed (from, to) pairs between consecutive days, self-loops included
ALLOWED_TRANSITIONS = frozenset(
    {(s, s) for s in range(6)} | {(S, E), (E, I), (E, A), (I, R), (I, D), (A, R)}
)


class Phase(NamedTuple):
    mobility_fraction: float
    movement_extent: int
    meetings_rate: float
    movers_rate: float
    infections_per_meeting: int


@dataclass(frozen=True)
class SimConfig:
    """All parameters of the synthetic epidemic.

    Per-phase parameters carry a ``_1``/``_2`` suffix: phase 1 covers days
    ``1..phase1_days`` and phase 2 the following ``phase2_days``.
    """

    grid_rows: int = 5
    grid_cols: int = 5
    cell_pop_min: int = 800
    cell_pop_max: int = 1000
    phase1_days: int = 28
    phase2_days: int = 56
    mobility_fraction_1: float = 0.03
    mobility_fraction_2: float = 0.01
    movement_extent_1: int = 4
    movement_extent_2: int = 1
    meetings_rate_1: float = 20.0
    meetings_rate_2: float = 3.0
    movers_rate_1: float = 5.0
    movers_rate_2: float = 3.0
    infections_per_meeting_1: int = 3
    infections_per_meeting_2: int = 2
    incubation_days: int = 5
    p_symptomatic: float = 0.25
    asymptomatic_days: int = 14
    symptomatic_days: int = 14
    p_recover_symptomatic: float = 0.85
    initial_exposed: int = 10
    seed: int = 0

    def __post_init__(self):
        self.validate()

    @property
    def horizon(self) -> int:
        return self.phase1_days + self.phase2_days

    @property
    def n_cells(self) -> int:
        return self.grid_rows * self.grid_cols

    def phase(self, day: int) -> Phase:
        k = 1 if day <= self.phase1_days else 2
        return Phase(*(getattr(self, f"{name}_{k}") for name in Phase._fields))

    def validate(self) -> None:
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise ConfigError("grid must have at least one cell")
        if self.cell_pop_min < 0 or self.cell_pop_max < self.cell_pop_min:
            raise ConfigError(
                f"empty cell population range [{self.cell_pop_min}, {self.cell_pop_max}]"
            )
        if self.cell_pop_max == 0:
            raise ConfigError("cell population range admits only empty cells")
        for name in ("phase1_days", "incubation_days", "asymptomatic_days", "symptomatic_days"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.phase2_days < 0:
            raise ConfigError("phase2_days must be non-negative")
        for name in ("p_symptomatic", "p_recover_symptomatic", "mobility_fraction_1", "mobility_fraction_2"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name}={p} is not a probability")
        for k in (1, 2):
            if getattr(self, f"movement_extent_{k}") < 0:
                raise ConfigError("movement extent must be non-negative")
            for name in ("meetings_rate", "movers_rate"):
                if getattr(self, f"{name}_{k}") < 0:
                    raise ConfigError(f"{name}_{k} must be non-negative")
            if getattr(self, f"infections_per_meeting_{k}") < 0:
                raise ConfigError("infections_per_meeting must be non-negative")
        if self.initial_exposed < 0:
            raise ConfigError("initial_exposed must be non-negative")
        if self.initial_exposed > self.n_cells * self.cell_pop_min and self.cell_pop_min == self.cell_pop_max:
            raise ConfigError("more index cases than people")

    @classmethod
    def from_mapping(cls, values: dict) -> "SimConfig":
        """Build from string or typed values, ignoring keys that are not config fields."""
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name in values:
                kwargs[f.name] = _coerce(f.name, f.type, values[f.name])
        return cls(**kwargs)

    def to_mapping(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(name, typ, value):
    if isinstance(value, str):
        value = value.strip()
    try:
        if typ in (int, "int"):
            as_float = float(value)
            if not as_float.is_integer():
                raise ValueError
            return int(as_float)
        if typ in (float, "float"):
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {name}: {value!r}") from None
    return value


@dataclass
class Population:
    """Mutable per-person arrays; index = person id."""

    cell_row: np.ndarray
    cell_col: np.ndarray
    state: np.ndarray
    entry_day: np.ndarray
    verified_day: np.ndarray

    @property
    def size(self) -> int:
        return len(self.state)

    def copy(self) -> "Population":
        return Population(*(getattr(self, f.name).copy() for f in dataclasses.fields(self)))

    def counts(self) -> np.ndarray:
        return np.bincount(self.state, minlength=6)


@dataclass
class DayLog:
    day: int
    pair_a: np.ndarray
    pair_b: np.ndarray
    n_meetings: int
    new_exposed: np.ndarray


def generate_population(config: SimConfig, rng: np.random.Generator) -> Population:
    """Draw cell sizes uniformly from the configured range and seed the index cases."""
    sizes = rng.integers(config.cell_pop_min, config.cell_pop_max + 1, size=config.n_cells)
    cell = np.repeat(np.arange(config.n_cells), sizes)
    n = len(cell)
    if n == 0:
        raise ConfigError("generated population is empty")
    if config.initial_exposed > n:
        raise ConfigError(f"initial_exposed={config.initial_exposed} exceeds population {n}")
    state = np.full(n, S, dtype=np.int8)
    entry = np.zeros(n, dtype=np.int32)
    index_cases = rng.choice(n, size=config.initial_exposed, replace=False)
    state[index_cases] = E
    return Population(
        cell_row=(cell // config.grid_cols).astype(np.int16),
        cell_col=(cell % config.grid_cols).astype(np.int16),
        state=state,
        entry_day=entry,
        verified_day=np.full(n, -1, dtype=np.int32),
    )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _meeting_pairs(ptr: np.ndarray, participants: np.ndarray):
    sizes = np.diff(ptr)
    a_parts, b_parts = [], []
    for s in np.unique(sizes):
        if s < 2:
            continue
        rows = np.nonzero(sizes == s)[0]
        block = participants[ptr[rows][:, None] + np.arange(s)]
        iu, ju = np.triu_indices(int(s), 1)
        a_parts.append(block[:, iu].ravel())
        b_parts.append(block[:, ju].ravel())
    if not a_parts:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    a = np.concatenate(a_parts)
    b = np.concatenate(b_parts)
    return np.minimum(a, b), np.maximum(a, b)


def step_day(pop: Population, config: SimConfig, day: int, rng: np.random.Generator) -> DayLog:
    """Advance ``pop`` in place by one day and return that day's contacts.

    Order within a day: movement, meetings, contagion, timed transitions
    (verification happens on entry into the symptomatic state).
    """
    if not 1 <= day <= config.horizon:
        raise ConfigError(f"day {day} outside 1..{config.horizon}")
    ph = config.phase(day)
    n = pop.size
    alive = np.nonzero(pop.state != D)[0]

    # movement; relocations persist
    n_move = min(len(alive), _round_half_up(ph.mobility_fraction * len(alive)))
    movers = rng.choice(alive, size=n_move, replace=False) if n_move else alive[:0]
    ext = ph.movement_extent
    dr = rng.integers(-ext, ext + 1, size=n_move)
    dc = rng.integers(-ext, ext + 1, size=n_move)
    pop.cell_row[movers] = np.clip(pop.cell_row[movers] + dr, 0, config.grid_rows - 1)
    pop.cell_col[movers] = np.clip(pop.cell_col[movers] + dc, 0, config.grid_cols - 1)

    # meetings among the current occupants of each cell
    cell = pop.cell_row[alive].astype(np.int64) * config.grid_cols + pop.cell_col[alive]
    order = np.argsort(cell, kind="stable")
    occupants = alive[order]
    counts = np.bincount(cell, minlength=config.n_cells)
    starts = np.cumsum(counts) - counts
    n_meet = rng.poisson(ph.meetings_rate, size=config.n_cells)
    mcell = np.repeat(np.arange(config.n_cells), n_meet)
    sizes = rng.poisson(ph.movers_rate, size=len(mcell)) + 1
    sizes = np.minimum(sizes, counts[mcell])
    keep = sizes > 0
    mcell, sizes = mcell[keep], sizes[keep].astype(np.int64)
    uniforms = rng.random(int(sizes.sum()))
    local = kernels.floyd_sample(counts[mcell].astype(np.int64), sizes, uniforms)
    participants = occupants[np.repeat(starts[mcell], sizes) + local].astype(np.int64)
    ptr = np.concatenate(([0], np.cumsum(sizes))).astype(np.int64)

    # contagion: sources are fixed at the start of the day
    is_source = ((pop.state == E) | (pop.state == A)).astype(np.uint8)
    keys = rng.random(len(participants))
    new_exposed = kernels.contagion(
        ptr, participants, is_source, pop.state, keys, int(ph.infections_per_meeting), S, E
    )
    pop.entry_day[new_exposed] = day

    # timed transitions
    elapsed = day - pop.entry_day
    ending_i = np.nonzero((pop.state == I) & (elapsed >= config.symptomatic_days))[0]
    ending_a = np.nonzero((pop.state == A) & (elapsed >= config.asymptomatic_days))[0]
    ending_e = np.nonzero((pop.state == E) & (elapsed >= config.incubation_days))[0]
    u_i = rng.random(len(ending_i))
    u_e = rng.random(len(ending_e))
    pop.state[ending_i] = np.where(u_i < config.p_recover_symptomatic, R, D)
    pop.state[ending_a] = R
    to_i = u_e < config.p_symptomatic
    pop.state[ending_e] = np.where(to_i, I, A)
    pop.verified_day[ending_e[to_i]] = day
    for idx in (ending_i, ending_a, ending_e):
        pop.entry_day[idx] = day

    a, b = _meeting_pairs(ptr, participants)
    if len(a):
        uniq = np.unique(a * n + b)
        a, b = uniq // n, uniq % n
    return DayLog(day, a, b, int(len(sizes)), new_exposed)


@dataclass
class EpidemicTrace:
    """Ground-truth world: daily states and cells of everyone plus the contact log.

    Row ``d`` of ``states``/``rows``/``cols`` holds end-of-day values; row 0 is
    the initial population.
    """

    config: SimConfig
    states: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    contact_day: np.ndarray
    contact_a: np.ndarray
    contact_b: np.ndarray

    @property
    def n_persons(self) -> int:
        return self.states.shape[1]

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    @property
    def counts(self) -> np.ndarray:
        """(horizon + 1, 6) array of state counts per day."""
        return np.stack([np.bincount(s, minlength=6) for s in self.states])

    @property
    def verified_day(self) -> np.ndarray:
        """Day each person entered the symptomatic (verified) state, -1 if never."""
        is_i = self.states == I
        ever = is_i.any(axis=0)
        first = np.argmax(is_i, axis=0).astype(np.int32)
        return np.where(ever, first, -1).astype(np.int32)

    def check_day(self, day: int) -> None:
        if not 0 <= day <= self.horizon:
            raise ConfigError(f"day {day} outside trace range 0..{self.horizon}")

    def infected(self, day: int) -> np.ndarray:
        self.check_day(day)
        return np.isin(self.states[day], INFECTED_STATES)

    def contacts_in(self, first_day: int, last_day: int):
        sel = (self.contact_day >= first_day) & (self.contact_day <= last_day)
        return self.contact_a[sel], self.contact_b[sel]

    # persistence ---------------------------------------------------------

    TRACE_HEADER = "day,person_id,state,cell_row,cell_col"
    CONTACT_HEADER = "day,person_a,person_b"

    def write(self, directory) -> None:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        codes = np.array(list(STATE_CODES))
        ids = np.arange(self.n_persons)
        with open(out / "trace.csv", "w", newline="") as fh:
            fh.write(self.TRACE_HEADER + "\n")
            for d in range(self.horizon + 1):
                st = codes[self.states[d]]
                fh.writelines(
                    f"{d},{p},{s},{r},{c}\n"
                    for p, s, r, c in zip(ids.tolist(), st.tolist(), self.rows[d].tolist(), self.cols[d].tolist())
                )
        with open(out / "contacts.csv", "w", newline="") as fh:
            fh.write(self.CONTACT_HEADER + "\n")
            fh.writelines(
                f"{d},{a},{b}\n"
                for d, a, b in zip(self.contact_day.tolist(), self.contact_a.tolist(), self.contact_b.tolist())
            )
        with open(out / "config.txt", "w") as fh:
            for key, value in self.config.to_mapping().items():
                fh.write(f"{key}={value}\n")

    @classmethod
    def read(cls, directory) -> "EpidemicTrace":
        src = Path(directory)
        config = SimConfig.from_mapping(read_key_values(src / "config.txt"))
        trace = _read_table(src / "trace.csv", cls.TRACE_HEADER,
                            {"day": np.int64, "person_id": np.int64, "state": str, "cell_row": np.int16,
                             "cell_col": np.int16})
        codes = pd.Categorical(trace["state"], categories=list(STATE_CODES)).codes
        if (codes < 0).any():
            raise ConfigError("unknown state code in trace")
        day, pid = trace["day"].to_numpy(), trace["person_id"].to_numpy()
        n_days, n = int(day.max()) + 1, int(pid.max()) + 1
        if len(trace) != n_days * n:
            raise ConfigError(f"trace has {len(trace)} rows, expected {n_days * n}")
        states = np.zeros((n_days, n), dtype=np.int8)
        crow = np.zeros((n_days, n), dtype=np.int16)
        ccol = np.zeros((n_days, n), dtype=np.int16)
        states[day, pid] = codes
        crow[day, pid] = trace["cell_row"].to_numpy()
        ccol[day, pid] = trace["cell_col"].to_numpy()
        log = _read_table(src / "contacts.csv", cls.CONTACT_HEADER,
                          {"day": np.int32, "person_a": np.int32, "person_b": np.int32})
        return cls(config, states, crow, ccol, *(log[c].to_numpy().copy() for c in log.columns))


def _read_table(path, header: str, dtypes: dict) -> pd.DataFrame:
    with open(path) as fh:
        first = fh.readline().rstrip("\r\n")
    if first != header:
        raise ConfigError(f"unexpected header in {path}: {first!r}")
    try:
        return pd.read_csv(path, dtype=dtypes)
    except (ValueError, pd.errors.ParserError) as exc:
        raise ConfigError(f"malformed {path}: {exc}") from None


def run_epidemic(config: SimConfig) -> EpidemicTrace:
    """Simulate the full horizon. The result depends only on ``config`` (seed included)."""
    rng = stream(config.seed, "epidemic")
    pop = generate_population(config, rng)
    h = config.horizon
    states = np.empty((h + 1, pop.size), dtype=np.int8)
    rows = np.empty((h + 1, pop.size), dtype=np.int16)
    cols = np.empty((h + 1, pop.size), dtype=np.int16)
    states[0], rows[0], cols[0] = pop.state, pop.cell_row, pop.cell_col
    days, aa, bb = [], [], []
    for day in range(1, h + 1):
        log = step_day(pop, config, day, rng)
        states[day], rows[day], cols[day] = pop.state, pop.cell_row, pop.cell_col
        days.append(np.full(len(log.pair_a), day, dtype=np.int32))
        aa.append(log.pair_a.astype(np.int32))
        bb.append(log.pair_b.astype(np.int32))
    return EpidemicTrace(
        config,
        states,
        rows,
        cols,
        np.concatenate(days) if days else np.empty(0, np.int32),
        np.concatenate(aa) if aa else np.empty(0, np.int32),
        np.concatenate(bb) if bb else np.empty(0, np.int32),
    )
