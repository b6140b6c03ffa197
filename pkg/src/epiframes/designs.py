"""Probability samples drawn from the verified and complement frames.

All selections take an explicit ``numpy.random.Generator``. Samples carry
their inclusion probabilities, so the estimators never need to know how a
sample was drawn beyond the first- and second-stage ``pi``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DesignError, NoVerifiedCasesError

NO_ANCHOR = -1

SAMPLE_HEADER = ["person_id", "pi1", "pi2", "origin_frame", "anchor_id", "design_label"]


@dataclass
class Sample:
    """A set of sampled persons with their inclusion probabilities.

    First-stage units have ``anchor_id == -1`` and ``pi2 = nan``. Contact units
    carry the anchor that traced them; their ``pi1`` is the anchor's.
    """

    person_id: np.ndarray
    pi1: np.ndarray
    pi2: np.ndarray
    origin: np.ndarray  # "V" or "C"
    anchor_id: np.ndarray
    design_label: str = ""

    def __post_init__(self):
        self.person_id = np.asarray(self.person_id, dtype=np.int64)
        self.pi1 = np.asarray(self.pi1, dtype=np.float64)
        self.pi2 = np.asarray(self.pi2, dtype=np.float64)
        self.origin = np.asarray(self.origin, dtype="<U1")
        self.anchor_id = np.asarray(self.anchor_id, dtype=np.int64)
        n = len(self.person_id)
        if not all(len(a) == n for a in (self.pi1, self.pi2, self.origin, self.anchor_id)):
            raise DesignError("sample columns have different lengths")
        if np.any(~((self.pi1 > 0) & (self.pi1 <= 1))):
            raise DesignError("first-stage probabilities must lie in (0, 1]")
        p2 = self.pi2[~np.isnan(self.pi2)]
        if np.any(~((p2 > 0) & (p2 <= 1))):
            raise DesignError("second-stage probabilities must lie in (0, 1]")

    def __len__(self) -> int:
        return len(self.person_id)

    @property
    def weight(self) -> np.ndarray:
        return 1.0 / (self.pi1 * np.where(np.isnan(self.pi2), 1.0, self.pi2))

    @property
    def is_anchor(self) -> np.ndarray:
        return self.anchor_id == NO_ANCHOR

    @classmethod
    def first_stage(cls, ids, pi, origin: str, label: str = "") -> "Sample":
        ids = np.asarray(ids, dtype=np.int64)
        n = len(ids)
        return cls(ids, np.broadcast_to(np.asarray(pi, dtype=float), (n,)).copy(), np.full(n, np.nan),
                   np.full(n, origin), np.full(n, NO_ANCHOR), label)

    @classmethod
    def concat(cls, parts, label: str | None = None) -> "Sample":
        parts = list(parts)
        if not parts:
            return cls.first_stage([], 1.0, "V", label or "")
        return cls(
            np.concatenate([p.person_id for p in parts]),
            np.concatenate([p.pi1 for p in parts]),
            np.concatenate([p.pi2 for p in parts]),
            np.concatenate([p.origin for p in parts]),
            np.concatenate([p.anchor_id for p in parts]),
            parts[0].design_label if label is None else label,
        )

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SAMPLE_HEADER)
            for row in zip(self.person_id, self.pi1, self.pi2, self.origin, self.anchor_id):
                pid, p1, p2, origin, anchor = row
                w.writerow([int(pid), repr(float(p1)), "" if np.isnan(p2) else repr(float(p2)), origin,
                            "" if anchor == NO_ANCHOR else int(anchor), self.design_label])

    @classmethod
    def read_csv(cls, path) -> "Sample":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        label = rows[0]["design_label"] if rows else ""
        return cls(
            [int(r["person_id"]) for r in rows],
            [float(r["pi1"]) for r in rows],
            [float(r["pi2"]) if r["pi2"] else np.nan for r in rows],
            [r["origin_frame"] for r in rows],
            [int(r["anchor_id"]) if r["anchor_id"] else NO_ANCHOR for r in rows],
            label,
        )


# --------------------------------------------------------------------- SRSWOR


def srswor(frame, n: int, rng: np.random.Generator, *, origin: str = "V", label: str = "srswor") -> Sample:
    """Simple random sample without replacement; every unit has ``pi = n / N``."""
    frame = np.asarray(frame, dtype=np.int64)
    N = len(frame)
    if n < 1 or n > N:
        raise DesignError(f"cannot draw n={n} without replacement from a frame of {N}")
    picked = np.sort(rng.choice(N, size=n, replace=False))
    return Sample.first_stage(frame[picked], n / N, origin, label)


# ------------------------------------------------------------ two-stage (PPS)


def self_weighting_pi(m_institutions: int, M_i: int, M: int, n_bar: int) -> float:
    """Final inclusion probability ``m * (M_i / M) * (n_bar / M_i)``, which is ``m * n_bar / M``."""
    if m_institutions < 1:
        raise DesignError("at least one institution must be selected")
    if not 0 < M_i <= M:
        raise DesignError("institution size must satisfy 0 < M_i <= M")
    if n_bar < 1 or n_bar > M_i:
        raise DesignError(f"second stage infeasible: n_bar={n_bar} > M_i={M_i}")
    pi1 = m_institutions * M_i / M
    if pi1 > 1:
        raise DesignError(f"institution of size {M_i} has first-stage probability {pi1:.3f} > 1")
    return pi1 * (n_bar / M_i)


def systematic_pps(sizes, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` institutions by systematic PPS on a random permutation.

    With integer sizes, the start is drawn uniformly from ``0..M-1`` and the
    selection points are ``start + i*M/m``; institution ``i`` is selected with
    probability exactly ``m * M_i / M`` provided that does not exceed 1.
    """
    sizes = np.asarray(sizes, dtype=np.int64)
    M = int(sizes.sum())
    if m < 1 or m > len(sizes):
        raise DesignError(f"cannot select {m} of {len(sizes)} institutions")
    too_big = m * sizes > M
    if too_big.any():
        raise DesignError(
            f"institutions {np.nonzero(too_big)[0].tolist()} exceed PPS capacity; select them with certainty"
        )
    order = rng.permutation(len(sizes))
    cum = np.cumsum(sizes[order])
    start = int(rng.integers(M))
    # points start + i*M/m in units of 1/m to stay in integer arithmetic
    points = (start * m + np.arange(m) * M) % (M * m)
    hit = np.searchsorted(cum * m, points, side="right")
    return np.sort(order[hit])


def two_stage_institution_sample(institution_of, m_institutions: int, n_bar: int, rng: np.random.Generator, *,
                                 frame=None, origin: str = "V", label: str = "two-stage") -> Sample:
    """PPS selection of institutions, then SRSWOR of ``n_bar`` persons within each.

    ``institution_of[k]`` is the institution label of frame unit ``k`` (labels
    ``0..I-1``). The resulting sample is self-weighting.
    """
    inst = np.asarray(institution_of, dtype=np.int64)
    ids = np.arange(len(inst)) if frame is None else np.asarray(frame, dtype=np.int64)
    sizes = np.bincount(inst)
    if np.any(sizes[sizes > 0] < n_bar):
        raise DesignError(f"every institution needs at least n_bar={n_bar} members")
    M = len(inst)
    chosen = systematic_pps(sizes, m_institutions, rng)
    parts = []
    for i in chosen:
        members = ids[inst == i]
        pi = self_weighting_pi(m_institutions, int(sizes[i]), M, n_bar)
        picked = np.sort(rng.choice(len(members), size=n_bar, replace=False))
        parts.append(Sample.first_stage(members[picked], pi, origin, label))
    return Sample.concat(parts, label)


def institutions_from_cells(cell_row, cell_col, grid_cols: int, block: int = 1) -> np.ndarray:
    """Label each person by the ``block x block`` group of grid cells it lives in."""
    cell_row = np.asarray(cell_row, dtype=np.int64) // block
    cell_col = np.asarray(cell_col, dtype=np.int64) // block
    ncols = -(-grid_cols // block)
    labels = cell_row * ncols + cell_col
    _, dense = np.unique(labels, return_inverse=True)
    return dense


# --------------------------------------------------------- contact subsampling


@dataclass(frozen=True)
class ContactScheme:
    """How many of an anchor's contacts are tested.

    ``all``: every contact. ``fraction``: ``max(1, round_half_up(g * M_k))``.
    ``cap``: all if ``M_k <= nu`` else ``nu``. ``M_k`` includes the anchor.
    """

    mode: str = "all"
    g: float = 1.0
    nu: int = 0

    def __post_init__(self):
        if self.mode not in ("all", "fraction", "cap"):
            raise DesignError(f"unknown contact scheme {self.mode!r}")
        if self.mode == "fraction" and not 0 < self.g <= 1:
            raise DesignError("g must lie in (0, 1]")
        if self.mode == "cap" and self.nu < 1:
            raise DesignError("nu must be a positive integer")

    @classmethod
    def all(cls) -> "ContactScheme":
        return cls("all")

    @classmethod
    def fraction(cls, g: float) -> "ContactScheme":
        return cls("fraction", g=float(g))

    @classmethod
    def cap(cls, nu: int) -> "ContactScheme":
        return cls("cap", nu=int(nu))

    def take(self, n_contacts):
        """Number of contacts tested for contact-set sizes ``n_contacts``."""
        M = np.asarray(n_contacts, dtype=np.int64)
        if self.mode == "all":
            out = M
        elif self.mode == "fraction":
            out = np.maximum(1, np.floor(self.g * M + 0.5).astype(np.int64))
            out = np.minimum(out, M)
        else:
            out = np.minimum(M, self.nu)
        return out

    def label(self) -> str:
        if self.mode == "all":
            return "all"
        return f"fraction({self.g:g})" if self.mode == "fraction" else f"cap({self.nu})"


@dataclass
class TracedContacts:
    """Contact subsamples for a batch of anchors in CSR layout."""

    anchors: np.ndarray
    ptr: np.ndarray
    contacts: np.ndarray
    n_contacts: np.ndarray  # M_k, the size of U_k
    pi2: np.ndarray  # per anchor

    @property
    def n_taken(self) -> np.ndarray:
        return np.diff(self.ptr)

    def of(self, i: int) -> np.ndarray:
        return self.contacts[self.ptr[i] : self.ptr[i + 1]]


def trace_contacts(anchors, link, scheme: ContactScheme, rng: np.random.Generator) -> TracedContacts:
    """SRSWOR of each anchor's contact set ``U_k`` under ``scheme``.

    Uses one uniform key per contact slot and keeps the smallest keys, which is
    an SRSWOR within every anchor.
    """
    anchors = np.asarray(anchors, dtype=np.int64)
    indptr, indices = link.indptr, link.indices
    starts, ends = indptr[anchors], indptr[anchors + 1]
    M = (ends - starts).astype(np.int64)
    ptr_full = np.concatenate([[0], np.cumsum(M)]).astype(np.int64)
    slots = np.repeat(starts - ptr_full[:-1], M) + np.arange(ptr_full[-1])
    full = indices[slots].astype(np.int64)
    take = scheme.take(M)
    if scheme.mode == "all" or np.all(take == M):
        mask = np.ones(len(full), dtype=bool)
    else:
        keys = rng.random(len(full))
        mask = np.asarray(kernels.select_by_keys(ptr_full, keys, take), dtype=bool)
    contacts = full[mask]
    ptr = np.concatenate([[0], np.cumsum(take)]).astype(np.int64)
    pi2 = np.where(M > 0, take / np.maximum(M, 1), 1.0)
    return TracedContacts(anchors, ptr, contacts, M, pi2)


def sample_contacts(anchor_id: int, link, scheme: ContactScheme, rng: np.random.Generator):
    """Single-anchor version: returns ``(contact ids, pi2)``."""
    t = trace_contacts([anchor_id], link, scheme, rng)
    return t.of(0), float(t.pi2[0])


def traced_sample(first_stage: Sample, traced: TracedContacts, label: str = "") -> Sample:
    """Attach traced contacts to a first-stage sample for export."""
    pos = {int(k): i for i, k in enumerate(first_stage.person_id)}
    idx = np.array([pos[int(a)] for a in traced.anchors], dtype=np.int64)
    n_taken = traced.n_taken
    contacts = Sample(
        traced.contacts,
        np.repeat(first_stage.pi1[idx], n_taken),
        np.repeat(traced.pi2, n_taken),
        np.repeat(first_stage.origin[idx], n_taken),
        np.repeat(traced.anchors, n_taken),
        label or first_stage.design_label,
    )
    return Sample.concat([first_stage, contacts], label or first_stage.design_label)


# ----------------------------------------------------------------------- panel


def proportional_allocation(stratum_sizes, n: int) -> np.ndarray:
    """Largest-remainder allocation of ``n`` proportional to stratum sizes."""
    sizes = np.asarray(stratum_sizes, dtype=np.int64)
    N = int(sizes.sum())
    exact = n * sizes / N
    alloc = np.floor(exact).astype(np.int64)
    short = n - int(alloc.sum())
    if short:
        # ties broken by stratum order
        order = np.lexsort((np.arange(len(sizes)), -(exact - alloc)))
        alloc[order[:short]] += 1
    return alloc


def select_panel(frame, n: int, rng: np.random.Generator, strata=None, *, label: str = "panel") -> Sample:
    """SRSWOR panel from ``U_c``, optionally stratified with proportional allocation."""
    frame = np.asarray(frame, dtype=np.int64)
    if n > len(frame):
        raise DesignError(f"panel of {n} requested from a frame of {len(frame)}")
    if strata is None:
        return srswor(frame, n, rng, origin="C", label=label)
    strata = np.asarray(strata)
    if len(strata) != len(frame):
        raise DesignError("one stratum label per frame unit is required")
    labels, code = np.unique(strata, return_inverse=True)
    sizes = np.bincount(code, minlength=len(labels))
    alloc = proportional_allocation(sizes, n)
    parts = []
    for h in range(len(labels)):
        if alloc[h] == 0:
            continue
        if sizes[h] == 0:
            raise DesignError(f"stratum {labels[h]!r} is empty but has positive allocation")
        parts.append(srswor(frame[code == h], int(alloc[h]), rng, origin="C", label=label))
    return Sample.concat(parts, label)


def mobility_risk_strata(n_moves, n_meetings) -> np.ndarray:
    """Four labels from median splits of movement count and meeting count."""
    n_moves = np.asarray(n_moves)
    n_meetings = np.asarray(n_meetings)
    mobile = n_moves > np.median(n_moves)
    risky = n_meetings > np.median(n_meetings)
    return np.where(mobile, "high-mobility", "low-mobility").astype(object) + "/" + np.where(
        risky, "high-risk", "low-risk"
    ).astype(object)


# ------------------------------------------------------------- sizing helpers


def proportion_cv(p: float, n: int) -> float:
    """Relative standard error ``sqrt(p(1-p)/n) / p`` of an estimated proportion."""
    if not 0 < p < 1:
        raise DesignError("p must lie strictly between 0 and 1")
    if n < 1:
        raise DesignError("n must be positive")
    return math.sqrt(p * (1 - p) / n) / p


def sample_size_for_proportion(p: float, target_cv: float) -> int:
    """Smallest ``n`` with ``proportion_cv(p, n) <= target_cv``."""
    if not 0 < p < 1:
        raise DesignError("p must lie strictly between 0 and 1")
    if target_cv <= 0:
        raise DesignError("target_cv must be positive")
    n = max(1, math.ceil((1 - p) / (p * target_cv**2)))
    # guard against floating rounding on either side
    while n > 1 and proportion_cv(p, n - 1) <= target_cv:
        n -= 1
    while proportion_cv(p, n) > target_cv:
        n += 1
    return n


@dataclass
class BalanceReport:
    names: list
    estimated: np.ndarray
    frame_total: np.ndarray
    deviation: np.ndarray = field(init=False)

    def __post_init__(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            self.deviation = np.where(
                self.frame_total != 0, (self.estimated - self.frame_total) / self.frame_total, 0.0
            )

    def as_dict(self) -> dict:
        return {n: float(d) for n, d in zip(self.names, self.deviation)}


def balance_check(sample: Sample, aux: dict, frame_totals: dict | None = None, frame=None) -> BalanceReport:
    """Relative deviation of HT totals of auxiliary variables from their frame totals.

    ``aux`` maps a name to a per-person array indexed by person id. Only
    first-stage units of ``sample`` are used. Frame totals are taken from
    ``frame_totals`` when given, otherwise summed over ``frame``.
    """
    units = sample.is_anchor
    ids, w = sample.person_id[units], 1.0 / sample.pi1[units]
    names = list(aux)
    est = np.array([float(np.sum(w * np.asarray(aux[k], dtype=float)[ids])) for k in names])
    if frame_totals is None:
        if frame is None:
            raise DesignError("either frame_totals or frame is required")
        frame = np.asarray(frame, dtype=np.int64)
        frame_totals = {k: float(np.sum(np.asarray(aux[k], dtype=float)[frame])) for k in names}
    tot = np.array([float(frame_totals[k]) for k in names])
    return BalanceReport(names, est, tot)


def subset_traced(traced: TracedContacts, keep) -> TracedContacts:
    """Restrict a batch of traced contacts to the anchors in ``keep``."""
    sel = np.isin(traced.anchors, np.asarray(keep, dtype=np.int64))
    idx = np.nonzero(sel)[0]
    blocks = [traced.of(i) for i in idx]
    contacts = np.concatenate(blocks) if blocks else np.empty(0, dtype=np.int64)
    ptr = np.concatenate([[0], np.cumsum(traced.n_taken[idx])]).astype(np.int64)
    return TracedContacts(traced.anchors[idx], ptr, contacts, traced.n_contacts[idx], traced.pi2[idx])


@dataclass
class TwoFrameSample:
    """One realisation of the two-frame design on a given day."""

    verified: Sample
    traced_v: TracedContacts
    panel: Sample
    traced_c: TracedContacts

    def tested(self) -> np.ndarray:
        """Distinct persons tested: both first-stage samples plus all traced contacts."""
        return np.unique(np.concatenate([self.verified.person_id, self.panel.person_id,
                                         self.traced_v.contacts, self.traced_c.contacts]))

    @property
    def n_first_stage(self) -> int:
        return len(self.verified) + len(self.panel)


def draw_two_frame(world, n_v: int | None, panel: Sample, scheme_v: ContactScheme, scheme_c: ContactScheme,
                   rng: np.random.Generator) -> TwoFrameSample:
    """SRSWOR of ``n_v`` verified cases (census if ``None`` or larger than ``U_v``).

    Contacts of every verified anchor are traced under ``scheme_v``; contacts
    of the panelists who test positive on the world's day under ``scheme_c``.
    """
    U_v = world.frames.U_v
    if len(U_v) == 0:
        raise NoVerifiedCasesError(f"no verified cases on day {world.day}")
    n = len(U_v) if n_v is None else min(int(n_v), len(U_v))
    sv = srswor(U_v, n, rng, origin="V", label="verified")
    tv = trace_contacts(sv.person_id, world.link, scheme_v, rng)
    positive = panel.person_id[world.snapshot.y[panel.person_id] == 1]
    tc = trace_contacts(positive, world.link, scheme_c, rng)
    return TwoFrameSample(sv, tv, panel, tc)
