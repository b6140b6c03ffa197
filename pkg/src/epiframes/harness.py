"""Monte Carlo experiments over sampling schemes and reference days.

One epidemic is simulated per configuration. For each evaluation day and
scheme, ``R`` replications draw a verified-case sample and a panel, trace
contacts, and compute the composite estimate. Replication ``r`` on day
``d`` uses the streams ``(seed, d, r, part)`` for every scheme, so schemes
are compared on common random numbers and results do not depend on the
order in which replications run.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .config import read_key_values
from .designs import ContactScheme, TwoFrameSample, sample_size_for_proportion, select_panel, srswor, trace_contacts
from .errors import ConfigError, EpiFramesError, NoVerifiedCasesError
from .estimators import ALPHA_POLICIES, estimate, two_frame_inputs
from .frames import WINDOW_DAYS, World, build_world
from .rng import stream
from .synthpop import INFECTED_STATES, EpidemicTrace, HealthState, SimConfig, run_epidemic


class SchemeId(str, Enum):
    A1B2 = "A1B2"
    A1B3 = "A1B3"
    A2B2 = "A2B2"
    A2B3 = "A2B3"

    def scheme_v(self, g: float) -> ContactScheme:
        return ContactScheme.all() if self.value[:2] == "A1" else ContactScheme.fraction(g)

    def scheme_c(self, nu: int) -> ContactScheme:
        return ContactScheme.all() if self.value[2:] == "B2" else ContactScheme.cap(nu)


ALL_SCHEMES = tuple(SchemeId)

# first day reaching each prevalence, then a fixed lockdown day
REFERENCE_PREVALENCE = (0.0058, 0.0394)


def _parse_size(name: str, value) -> int | str | None:
    if value is None:
        return None
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("", "auto"):
            return None
        if v == "census":
            return "census"
        value = v
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, 'auto' or 'census'") from None
    if n < 1:
        raise ConfigError(f"{name} must be positive")
    return n


@dataclass
class ExperimentConfig:
    """Experiment settings.

    ``n_v`` and ``n_C`` accept an integer, ``None`` (sized for a 5% and 10%
    relative error at prevalences 0.25 and 0.10 respectively, capped by the
    frame) or ``"census"``.
    """

    sim: SimConfig = field(default_factory=SimConfig)
    days: tuple = (15, 25, 35)
    R: int = 500
    n_v: int | str | None = None
    n_C: int | str | None = None
    schemes: tuple = ALL_SCHEMES
    g: float = 0.9
    nu: int = 12
    alpha_policy: str = "minvar"
    alpha: float = 0.5
    window_length: int = WINDOW_DAYS
    seed: int = 0

    def __post_init__(self):
        self.days = tuple(int(d) for d in self.days)
        self.schemes = tuple(SchemeId(s) for s in self.schemes)
        self.n_v = _parse_size("n_v", self.n_v)
        self.n_C = _parse_size("n_C", self.n_C)

    def validate(self) -> None:
        self.sim.validate()
        if self.R < 2:
            raise ConfigError("R must be at least 2")
        if not self.days:
            raise ConfigError("at least one evaluation day is required")
        for d in self.days:
            if not 1 <= d <= self.sim.horizon:
                raise ConfigError(f"day {d} outside 1..{self.sim.horizon}")
        if not self.schemes:
            raise ConfigError("at least one scheme is required")
        if self.alpha_policy not in ALPHA_POLICIES:
            raise ConfigError(f"alpha_policy must be one of {ALPHA_POLICIES}")
        if not 0 <= self.alpha <= 1:
            raise ConfigError("alpha must lie in [0, 1]")
        if not 0 < self.g <= 1:
            raise ConfigError("g must lie in (0, 1]")
        if self.nu < 1:
            raise ConfigError("nu must be positive")
        if self.window_length < 1:
            raise ConfigError("window_length must be positive")

    def sizes(self, world: World) -> tuple[int, int]:
        n_uv, n_uc = len(world.frames.U_v), len(world.frames.U_c)
        if self.n_v == "census":
            nv = n_uv
        else:
            nv = min(n_uv, self.n_v or sample_size_for_proportion(0.25, 0.05))
        if self.n_C == "census":
            nc = n_uc
        else:
            nc = min(n_uc, self.n_C or sample_size_for_proportion(0.10, 0.10))
        return nv, nc

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        sim = SimConfig.from_mapping(values)
        kw = {}
        sim_keys = {f.name for f in dataclasses.fields(SimConfig)}
        known = {f.name for f in dataclasses.fields(cls)} - {"sim"}
        unknown = set(values) - sim_keys - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            if "days" in values:
                kw["days"] = _as_list(values["days"], int)
            if "schemes" in values:
                kw["schemes"] = _as_list(values["schemes"], str)
            for k, typ in (("R", int), ("g", float), ("nu", int), ("alpha", float), ("window_length", int),
                           ("seed", int)):
                if k in values:
                    kw[k] = typ(values[k])
        except ValueError as exc:
            raise ConfigError(f"bad experiment value: {exc}") from None
        for k in ("n_v", "n_C", "alpha_policy"):
            if k in values:
                kw[k] = values[k]
        if "seed" not in kw:
            kw["seed"] = sim.seed
        try:
            return cls(sim=sim, **kw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_mapping(read_key_values(path))

    def to_mapping(self) -> dict:
        d = self.sim.to_mapping()
        d.update(days=list(self.days), R=self.R, n_v=self.n_v, n_C=self.n_C,
                 schemes=[s.value for s in self.schemes], g=self.g, nu=self.nu,
                 alpha_policy=self.alpha_policy, alpha=self.alpha, window_length=self.window_length,
                 seed=self.seed)
        return d


def _as_list(value, typ) -> list:
    if isinstance(value, (list, tuple)):
        return [typ(v) for v in value]
    return [typ(v.strip()) for v in str(value).split(",") if v.strip()]


def prevalence_curve(trace: EpidemicTrace) -> np.ndarray:
    infected = trace.counts[:, list(INFECTED_STATES)].sum(axis=1)
    return infected / trace.n_persons


def days_matching_prevalence(trace: EpidemicTrace, targets=REFERENCE_PREVALENCE, lockdown_day: int | None = 35) -> list:
    """First day reaching each target prevalence, plus an optional fixed day."""
    prev = prevalence_curve(trace)
    days = []
    for p in targets:
        hit = np.nonzero(prev[1:] >= p)[0]
        if len(hit) == 0:
            raise ConfigError(f"prevalence never reaches {p}")
        days.append(int(hit[0]) + 1)
    if lockdown_day is not None:
        days.append(int(lockdown_day))
    return days


# ----------------------------------------------------------------- replication


def draw_replicate(world: World, scheme: SchemeId, cfg: ExperimentConfig, r: int) -> TwoFrameSample:
    """The two-frame sample of replication ``r`` (common random numbers across schemes)."""
    if len(world.frames.U_v) == 0:
        raise NoVerifiedCasesError(f"no verified cases on day {world.day}")
    nv, nc = cfg.sizes(world)
    d = world.day
    sv = srswor(world.frames.U_v, nv, stream(cfg.seed, d, r, "verified"), origin="V", label="verified")
    panel = select_panel(world.frames.U_c, nc, stream(cfg.seed, d, r, "panel"))
    tv = trace_contacts(sv.person_id, world.link, scheme.scheme_v(cfg.g), stream(cfg.seed, d, r, "trace-v"))
    positive = panel.person_id[world.y[panel.person_id] == 1]
    tc = trace_contacts(positive, world.link, scheme.scheme_c(cfg.nu), stream(cfg.seed, d, r, "trace-c"))
    return TwoFrameSample(sv, tv, panel, tc)


def replicate(world: World, scheme: SchemeId, cfg: ExperimentConfig, r: int) -> tuple:
    """One replication: returns ``(estimate report, first-stage count, tested count)``."""
    sample = draw_replicate(world, scheme, cfg, r)
    ia, ib = two_frame_inputs(world, sample)
    rep = estimate(ia, ib, cfg.alpha_policy, cfg.alpha)
    return rep, sample.n_first_stage, len(sample.tested())


def srs_standard_error(world: World, n: float) -> float:
    """Exact SRSWOR standard error of the HT total of infected over the living population."""
    alive = world.alive
    N = int(alive.sum())
    y = world.snapshot.y[alive].astype(float)
    if n >= N:
        return 0.0
    S2 = float(y.var(ddof=1)) if N > 1 else 0.0
    return math.sqrt(N * N * (1 - n / N) * S2 / n)


@dataclass
class SchemeRow:
    day: int
    prevalence: float
    true_total: int
    scheme: str
    mean_estimate: float
    alpha_star: float
    standard_error: float
    cv_percent: float
    relative_absolute_bias: float
    efficiency_srs_without_contacts: float
    efficiency_srs_with_contacts: float
    units_without_contacts: float
    units_with_contacts: float
    mean_estimated_se: float
    bias_mc_se: float
    R: int


TABLE3_FIELDS = [
    "day",
    "prevalence",
    "true_total",
    "scheme",
    "mean_estimate",
    "alpha_star",
    "standard_error",
    "cv_percent",
    "relative_absolute_bias",
    "efficiency_srs_without_contacts",
    "efficiency_srs_with_contacts",
]
TABLE3_HEADER = ",".join(TABLE3_FIELDS)


def run_scheme(world: World, scheme: SchemeId | str, cfg: ExperimentConfig, order=None) -> SchemeRow:
    """``R`` replications aggregated into one Table-3 row.

    ``order`` optionally permutes the replication indices; the row does not
    depend on it.
    """
    scheme = SchemeId(scheme)
    idx = list(range(cfg.R)) if order is None else list(order)
    if sorted(idx) != list(range(cfg.R)):
        raise ConfigError("order must be a permutation of range(R)")
    out = {r: replicate(world, scheme, cfg, r) for r in idx}
    reps = [out[r] for r in range(cfg.R)]
    est = np.array([x[0].Y_hat for x in reps])
    alpha = np.array([x[0].alpha for x in reps])
    se_hat = np.array([x[0].se for x in reps])
    n_first = np.array([x[1] for x in reps], dtype=float)
    n_tested = np.array([x[2] for x in reps], dtype=float)
    Y = world.truth.Y
    mean = float(est.mean())
    se = float(est.std(ddof=1))
    srs0 = srs_standard_error(world, float(n_first.mean()))
    srs1 = srs_standard_error(world, float(n_tested.mean()))
    return SchemeRow(
        day=world.day,
        prevalence=Y / world.n_alive,
        true_total=Y,
        scheme=scheme.value,
        mean_estimate=mean,
        alpha_star=float(alpha.mean()),
        standard_error=se,
        cv_percent=100.0 * se / mean if mean else float("nan"),
        relative_absolute_bias=abs(Y - mean) / Y if Y else float("nan"),
        efficiency_srs_without_contacts=se / srs0 if srs0 else float("nan"),
        efficiency_srs_with_contacts=se / srs1 if srs1 else float("nan"),
        units_without_contacts=float(n_first.mean()),
        units_with_contacts=float(n_tested.mean()),
        mean_estimated_se=float(se_hat.mean()),
        bias_mc_se=se / math.sqrt(cfg.R),
        R=cfg.R,
    )


@dataclass
class TruthRow:
    day: int
    Y: int
    Y_A: int
    Y_B: int
    Y_AB: int
    n_alive: int
    n_verified: int
    n_complement: int
    prevalence: float
    mean_contacts: float


def truth_row(world: World) -> TruthRow:
    t = world.truth
    alive = world.alive
    return TruthRow(world.day, t.Y, t.Y_A, t.Y_B, t.Y_AB, world.n_alive, len(world.frames.U_v),
                    len(world.frames.U_c), t.Y / world.n_alive,
                    float((world.L[alive] - 1).mean()))


@dataclass
class ExperimentResult:
    config: dict
    truth: list
    rows: list
    counts: np.ndarray  # (horizon + 1, 6)

    def row(self, day: int, scheme: str) -> SchemeRow:
        for r in self.rows:
            if r.day == day and r.scheme == str(SchemeId(scheme).value):
                return r
        raise KeyError((day, scheme))

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "table1": [dataclasses.asdict(t) for t in self.truth],
            "table2": [
                {"day": r.day, "scheme": r.scheme, "units_without_contacts": r.units_without_contacts,
                 "units_with_contacts": r.units_with_contacts}
                for r in self.rows
            ],
            "table3": [dataclasses.asdict(r) for r in self.rows],
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentResult":
        return cls(d["config"], [TruthRow(**t) for t in d["table1"]], [SchemeRow(**r) for r in d["table3"]],
                   np.asarray(d["counts"], dtype=np.int64))


def run_experiment(cfg: ExperimentConfig, trace: EpidemicTrace | None = None) -> ExperimentResult:
    cfg.validate()
    if trace is None:
        trace = run_epidemic(cfg.sim)
    truth, rows = [], []
    for day in cfg.days:
        world = build_world(trace, day, cfg.window_length)
        truth.append(truth_row(world))
        for scheme in cfg.schemes:
            rows.append(run_scheme(world, scheme, cfg))
    return ExperimentResult(cfg.to_mapping(), truth, rows, trace.counts.copy())


# ---------------------------------------------------------------------- output


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def emit_report(result: ExperimentResult, out_dir, fmt: str = "csv") -> list:
    """Write the report in ``csv``, ``json`` or ``plotdata`` form; returns the paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise EpiFramesError(f"cannot create {out}: {exc}") from exc
    paths = []
    try:
        if fmt == "csv":
            p = out / "table3.csv"
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(TABLE3_FIELDS)
                for r in result.rows:
                    d = dataclasses.asdict(r)
                    w.writerow([_fmt(d[k]) for k in TABLE3_FIELDS])
            paths.append(p)
            p = out / "table1.csv"
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                names = [f.name for f in dataclasses.fields(TruthRow)]
                w.writerow(names)
                for t in result.truth:
                    d = dataclasses.asdict(t)
                    w.writerow([_fmt(d[k]) for k in names])
            paths.append(p)
            p = out / "table2.csv"
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["day", "scheme", "units_without_contacts", "units_with_contacts"])
                for r in result.rows:
                    w.writerow([r.day, r.scheme, _fmt(r.units_without_contacts), _fmt(r.units_with_contacts)])
            paths.append(p)
        elif fmt == "json":
            p = out / "result.json"
            p.write_text(json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n")
            paths.append(p)
        elif fmt == "plotdata":
            p = out / "plotdata.csv"
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["day", "state", "count"])
                for day in range(1, result.counts.shape[0]):
                    for s in HealthState:
                        w.writerow([day, s.code, int(result.counts[day, s])])
            paths.append(p)
        else:
            raise ConfigError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise EpiFramesError(f"cannot write report to {out}: {exc}") from exc
    return paths


def read_table3(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        d = {k: (r[k] if k == "scheme" else (int(r[k]) if k in ("day", "true_total") else float(r[k])))
             for k in TABLE3_FIELDS}
        out.append(d)
    return out
