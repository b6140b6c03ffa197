"""Link windows, the verified/complement frames, multiplicities and exact totals.

``l[k, j] = 1`` when ``k`` and ``j`` co-attended a meeting inside the window
ending on the reference day; ``l[k, k] = 1`` always. The verified frame
``U_v`` holds the verified cases that are still infected; ``U_c`` holds every
other living person. ``L_v[j]`` counts members of ``U_v`` linked to ``j`` and
``L_C[j]`` counts *infected* members of ``U_c`` linked to ``j``.

Totals are computed in exact rational arithmetic so the breakdown identity
``Y = Y_A + Y_B - Y_AB`` can be asserted with ``==``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import sparse

from .errors import ConfigError, ConsistencyError
from .synthpop import D, I, INFECTED_STATES, EpidemicTrace

WINDOW_DAYS = 14


@dataclass(frozen=True)
class LinkView:
    """Binary symmetric adjacency with self-links, stored as CSR."""

    reference_day: int
    window_length: int
    first_day: int
    matrix: sparse.csr_array

    @property
    def n_persons(self) -> int:
        return self.matrix.shape[0]

    @property
    def indptr(self) -> np.ndarray:
        return self.matrix.indptr

    @property
    def indices(self) -> np.ndarray:
        return self.matrix.indices

    @property
    def degree(self) -> np.ndarray:
        """``L_j``: number of linked persons, self included."""
        return np.diff(self.matrix.indptr)

    def contacts(self, k: int) -> np.ndarray:
        """``U_k = {j : l[k, j] = 1}`` in ascending id order."""
        return self.matrix.indices[self.matrix.indptr[k] : self.matrix.indptr[k + 1]]

    def linked(self, k: int, j: int) -> bool:
        row = self.contacts(k)
        pos = np.searchsorted(row, j)
        return bool(pos < len(row) and row[pos] == j)


def links_from_pairs(n_persons: int, a, b, *, reference_day: int = 0, window_length: int = 0,
                     first_day: int = 0) -> LinkView:
    """Adjacency from an explicit list of undirected pairs (self-links added)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    diag = np.arange(n_persons, dtype=np.int64)
    rows = np.concatenate([a, b, diag])
    cols = np.concatenate([b, a, diag])
    m = sparse.coo_array(
        (np.ones(len(rows), dtype=np.int32), (rows, cols)), shape=(n_persons, n_persons)
    ).tocsr()
    m.sum_duplicates()
    m.data[:] = 1
    m.sort_indices()
    return LinkView(reference_day, window_length, first_day, m)


def link_window(trace: EpidemicTrace, reference_day: int, window_length: int = WINDOW_DAYS) -> LinkView:
    """Links over the closed window ``[reference_day - window_length + 1, reference_day]``.

    A window reaching before day 1 is truncated to day 1.
    """
    if reference_day < 1:
        raise ConfigError("reference_day must be >= 1")
    if window_length < 1:
        raise ConfigError("window_length must be >= 1")
    trace.check_day(reference_day)
    first = max(1, reference_day - window_length + 1)
    a, b = trace.contacts_in(first, reference_day)
    return links_from_pairs(
        trace.n_persons, a, b, reference_day=reference_day, window_length=window_length, first_day=first
    )


@dataclass(frozen=True)
class Snapshot:
    """Cross-section of the population on one day."""

    day: int
    state: np.ndarray
    verified_day: np.ndarray

    @classmethod
    def from_trace(cls, trace: EpidemicTrace, day: int) -> "Snapshot":
        trace.check_day(day)
        vday = trace.verified_day
        # verification is only known up to the reference day
        vday = np.where((vday >= 0) & (vday <= day), vday, -1).astype(np.int32)
        return cls(day, trace.states[day].copy(), vday)

    @property
    def y(self) -> np.ndarray:
        return np.isin(self.state, INFECTED_STATES).astype(np.int8)

    @property
    def alive(self) -> np.ndarray:
        return self.state != D


@dataclass(frozen=True)
class Frames:
    reference_day: int
    in_v: np.ndarray
    in_c: np.ndarray

    @property
    def U_v(self) -> np.ndarray:
        return np.nonzero(self.in_v)[0]

    @property
    def U_c(self) -> np.ndarray:
        return np.nonzero(self.in_c)[0]


def partition_and_multiplicities(snap: Snapshot, link: LinkView):
    """Return ``(frames, L_v, L_C)`` for the snapshot's day.

    ``U_v`` = verified and still infected (symptomatic), ``U_c`` = living
    persons outside ``U_v``. The dead belong to neither frame but keep their
    links.
    """
    if link.reference_day and link.reference_day != snap.day:
        raise ConfigError(
            f"link window ends on day {link.reference_day}, snapshot is day {snap.day}"
        )
    in_v = (snap.verified_day >= 0) & (snap.state == I)
    in_c = snap.alive & ~in_v
    y = snap.y.astype(np.int64)
    m = link.matrix
    L_v = m @ in_v.astype(np.int64)
    L_C = m @ (in_c.astype(np.int64) * y)
    return Frames(snap.day, in_v, in_c), np.asarray(L_v, dtype=np.int64), np.asarray(L_C, dtype=np.int64)


def _rational_total(numerators: np.ndarray, denominators: np.ndarray) -> Fraction:
    """Exact ``sum(num / den)`` for small non-negative integer arrays."""
    if len(numerators) == 0:
        return Fraction(0)
    num_by_den = np.bincount(denominators, weights=numerators)
    return sum(
        (Fraction(int(round(c)), d) for d, c in enumerate(num_by_den) if d and c),
        Fraction(0),
    )


@dataclass(frozen=True)
class GroundTruth:
    Y: int
    Y_A: int
    Y_B: int
    Y_AB: int
    L_v: np.ndarray = field(repr=False)
    L_C: np.ndarray = field(repr=False)

    def to_json(self) -> str:
        return json.dumps({"Y": self.Y, "Y_A": self.Y_A, "Y_B": self.Y_B, "Y_AB": self.Y_AB})

    def table1(self) -> dict:
        return {"Y_A": self.Y_A, "Y_B": self.Y_B, "Y_AB": self.Y_AB, "Total infected": self.Y}


def _as_int(value: Fraction, label: str) -> int:
    if value.denominator != 1:
        raise ConsistencyError(f"{label} = {value} is not an integer")
    return int(value)


def exact_totals(value, gate_A, gate_B, in_v, in_c, link: LinkView, L_v, L_C) -> GroundTruth:
    """Exact totals of ``value`` over the population and the two link domains.

    Anchors of side A are ``U_v`` members with ``gate_A = 1``; anchors of side
    B are ``U_c`` members with ``gate_B = 1``. The overlap is computed three
    ways, and the breakdown identity is asserted; both fail only if some
    unit with ``value > 0`` is linked to no anchor at all.
    """
    value = np.asarray(value, dtype=np.int64)
    a_anchor = np.asarray(in_v, dtype=bool) & (np.asarray(gate_A) != 0)
    b_anchor = np.asarray(in_c, dtype=bool) & (np.asarray(gate_B) != 0)
    m = link.matrix.tocoo()
    k, j = m.row.astype(np.int64), m.col.astype(np.int64)

    Y = int(value.sum())

    sel = a_anchor[k]
    Y_A = _as_int(_rational_total(value[j[sel]], L_v[j[sel]]), "Y_A")
    # the anchor gate multiplies the side-B inner sum
    sel = b_anchor[k]
    Y_B = _as_int(_rational_total(value[j[sel]], L_C[j[sel]]), "Y_B")

    Y_AB_6 = int(value[(L_v * L_C) >= 1].sum())
    sel = a_anchor[k]
    Y_AB_7a = _rational_total(value[j[sel]] * (L_C[j[sel]] >= 1), L_v[j[sel]])
    sel = b_anchor[k]
    Y_AB_7b = _rational_total(value[j[sel]] * (L_v[j[sel]] >= 1), L_C[j[sel]])
    if not (Y_AB_6 == Y_AB_7a == Y_AB_7b):
        raise ConsistencyError(f"overlap totals disagree: {Y_AB_6}, {Y_AB_7a}, {Y_AB_7b}")
    if Y != Y_A + Y_B - Y_AB_6:
        raise ConsistencyError(f"Y={Y} but Y_A + Y_B - Y_AB = {Y_A + Y_B - Y_AB_6}")
    return GroundTruth(Y, Y_A, Y_B, Y_AB_6, np.asarray(L_v), np.asarray(L_C))


def true_totals(snap: Snapshot, frames: Frames, link: LinkView, L_v=None, L_C=None) -> GroundTruth:
    """Exact ``Y, Y_A, Y_B, Y_AB`` for the infection indicator on the snapshot day.

    ``Y_AB`` is evaluated three independent ways; a disagreement, or a failed
    breakdown identity, raises ``ConsistencyError``.
    """
    if L_v is None or L_C is None:
        _, L_v, L_C = partition_and_multiplicities(snap, link)
    y = snap.y
    return exact_totals(y, np.ones_like(y), y, frames.in_v, frames.in_c, link, L_v, L_C)


@dataclass(frozen=True)
class World:
    """Frames, links, multiplicities and truth for one estimation target.

    ``value`` is the contact-level variable being totalled. ``gate_A`` and
    ``gate_B`` select which frame members act as anchors: for the
    cross-section these are 1 on ``U_v`` and ``y`` on ``U_c``. Multiplicities
    count gated anchors only.
    """

    snapshot: Snapshot
    link: LinkView
    frames: Frames
    truth: GroundTruth
    value: np.ndarray
    gate_A: np.ndarray
    gate_B: np.ndarray

    @property
    def day(self) -> int:
        return self.snapshot.day

    @property
    def y(self) -> np.ndarray:
        return self.value

    @property
    def L_v(self) -> np.ndarray:
        return self.truth.L_v

    @property
    def L_C(self) -> np.ndarray:
        return self.truth.L_C

    @property
    def L(self) -> np.ndarray:
        return self.link.degree

    @property
    def alive(self) -> np.ndarray:
        return self.snapshot.alive

    @property
    def n_alive(self) -> int:
        return int(self.alive.sum())


def make_world(snap: Snapshot, link: LinkView, frames: Frames, value, gate_A, gate_B) -> World:
    value = np.asarray(value, dtype=np.int8)
    gate_A = np.asarray(gate_A, dtype=np.int8)
    gate_B = np.asarray(gate_B, dtype=np.int8)
    m = link.matrix
    L_v = np.asarray(m @ (frames.in_v * gate_A).astype(np.int64), dtype=np.int64)
    L_C = np.asarray(m @ (frames.in_c * gate_B).astype(np.int64), dtype=np.int64)
    truth = exact_totals(value, gate_A, gate_B, frames.in_v, frames.in_c, link, L_v, L_C)
    return World(snap, link, frames, truth, value, gate_A, gate_B)


def build_world(trace: EpidemicTrace, day: int, window_length: int = WINDOW_DAYS) -> World:
    snap = Snapshot.from_trace(trace, day)
    link = link_window(trace, day, window_length)
    frames, _, _ = partition_and_multiplicities(snap, link)
    y = snap.y
    return make_world(snap, link, frames, y, np.ones_like(y), y)


def with_value(world: World, value) -> World:
    """Same anchors and multiplicities, different contact-level variable."""
    value = np.asarray(value, dtype=np.int8)
    truth = exact_totals(value, world.gate_A, world.gate_B, world.frames.in_v, world.frames.in_c,
                         world.link, world.L_v, world.L_C)
    return World(world.snapshot, world.link, world.frames, truth, value, world.gate_A, world.gate_B)


def world_from_arrays(state, verified, pairs, day: int = 1) -> World:
    """Hand-built world for tests and toy examples.

    ``state`` holds :class:`HealthState` codes, ``verified`` is a boolean
    flag per person and ``pairs`` is an iterable of undirected links.
    """
    state = np.asarray(state, dtype=np.int8)
    verified = np.asarray(verified, dtype=bool)
    pairs = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
    snap = Snapshot(day, state, np.where(verified, day, -1).astype(np.int32))
    link = links_from_pairs(len(state), pairs[:, 0], pairs[:, 1], reference_day=day, window_length=1,
                            first_day=day)
    frames, _, _ = partition_and_multiplicities(snap, link)
    y = snap.y
    return make_world(snap, link, frames, y, np.ones_like(y), y)
