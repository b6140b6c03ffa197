"""GWSM estimators for the two-frame design, their variances and combinations.

Side A samples anchors from ``U_v``; side B samples a panel from ``U_c`` and
traces contacts of the panelists who test positive. Each side is held in a
:class:`GwsmInput`, a CSR layout of anchors and their tested contacts. All
estimators reduce to a per-contact term ``u_j``; the per-anchor totals are

    Z_k = gate_k * (1 / pi2_k) * sum_{j in S_k} u_j

and the point estimate is ``sum_k Z_k / pi1_k``. ``gate_k`` is the anchor's
test result on side B and 1 on side A for a cross-section.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .designs import subset_traced
from .errors import EstimationError, NotComputableError


@dataclass
class GwsmInput:
    """Anchors, their tested contacts and the contact-level measurements.

    Attributes:
        side: "A" (anchors from ``U_v``) or "B" (anchors from ``U_c``).
        frame_size: ``N`` of the anchor frame.
        anchors, pi1: one entry per first-stage unit.
        gate: 1 if the anchor counts (side B: tested positive), else 0.
        ptr: CSR offsets into the contact arrays, ``len(anchors) + 1``.
        pi2, n_contacts: per anchor; ``n_contacts`` is ``#U_k``.
        contact, y, L_v, L_C, L, in_c: per tested contact.
    """

    side: str
    frame_size: int
    anchors: np.ndarray
    pi1: np.ndarray
    gate: np.ndarray
    ptr: np.ndarray
    pi2: np.ndarray
    n_contacts: np.ndarray
    contact: np.ndarray
    y: np.ndarray
    L_v: np.ndarray
    L_C: np.ndarray
    L: np.ndarray
    in_c: np.ndarray

    def __post_init__(self):
        if self.side not in ("A", "B"):
            raise EstimationError("side must be 'A' or 'B'")
        n = len(self.anchors)
        if len(self.ptr) != n + 1:
            raise EstimationError("ptr must have one entry per anchor plus one")
        if np.any(~((self.pi1 > 0) & (self.pi1 <= 1))) or np.any(~((self.pi2 > 0) & (self.pi2 <= 1))):
            raise EstimationError("inclusion probabilities must lie in (0, 1]")
        own = self.L_v if self.side == "A" else self.L_C
        if np.any(own <= 0):
            raise EstimationError(
                f"a traced contact has zero multiplicity in frame {'U_v' if self.side == 'A' else 'U_c'}"
            )
        if np.any((self.gate == 0) & (self.n_taken > 0)):
            raise EstimationError("contacts traced for an anchor with gate 0 (e.g. a negative panelist)")

    @property
    def n(self) -> int:
        return len(self.anchors)

    @property
    def n_taken(self) -> np.ndarray:
        return np.diff(self.ptr)

    @property
    def anchor_of_contact(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), self.n_taken)

    @property
    def own_multiplicity(self) -> np.ndarray:
        return self.L_v if self.side == "A" else self.L_C

    def anchor_factor(self) -> np.ndarray:
        return self.gate.astype(float)

    def terms(self, kind: str = "total") -> np.ndarray:
        """Per-contact ``u_j`` for the requested target.

        ``total``: ``y_j / L_own``. ``overlap``: restricted to contacts that
        are also reachable from the other frame. ``in_c``: restricted to
        contacts in ``U_c``. ``printed``: restricted by ``L_j - L_Cj >= 1``.
        """
        u = self.y / self.own_multiplicity
        if kind == "total":
            return u
        if kind == "overlap":
            other = self.L_C if self.side == "A" else self.L_v
            return u * (other >= 1)
        if kind == "in_c":
            return u * self.in_c
        if kind == "printed":
            return u * ((self.L - self.L_C) >= 1)
        raise EstimationError(f"unknown term kind {kind!r}")

    def anchor_totals(self, u) -> np.ndarray:
        """``Z_k`` for every anchor."""
        sums = kernels.segment_sums(self.ptr, np.asarray(u, dtype=np.float64))
        return self.anchor_factor() * sums / self.pi2


def gwsm_input(world, side: str, anchors, pi1, traced=None) -> GwsmInput:
    """Assemble a :class:`GwsmInput` from a world and a traced first-stage sample.

    ``traced`` covers any subset of the anchors (side B traces only positive
    panelists); anchors not covered contribute no contacts. Anchors with a
    zero gate in ``world`` contribute nothing and must have no contacts.
    """
    anchors = np.asarray(anchors, dtype=np.int64)
    n = len(anchors)
    pi1 = np.broadcast_to(np.asarray(pi1, dtype=float), (n,)).copy()
    frame = world.frames.in_v if side == "A" else world.frames.in_c
    if n and not frame[anchors].all():
        raise EstimationError(f"side {side} anchors must come from {'U_v' if side == 'A' else 'U_c'}")
    taken = np.zeros(n, dtype=np.int64)
    pi2 = np.ones(n)
    M = np.zeros(n, dtype=np.int64)
    contact = np.empty(0, dtype=np.int64)
    if traced is not None and len(traced.anchors):
        pos = np.searchsorted(anchors, traced.anchors) if np.all(np.diff(anchors) > 0) else None
        if pos is None or np.any(pos >= n) or np.any(anchors[np.minimum(pos, n - 1)] != traced.anchors):
            lookup = {int(a): i for i, a in enumerate(anchors)}
            try:
                pos = np.array([lookup[int(a)] for a in traced.anchors], dtype=np.int64)
            except KeyError as exc:
                raise EstimationError(f"traced anchor {exc.args[0]} is not in the first-stage sample") from None
        taken[pos] = traced.n_taken
        pi2[pos] = traced.pi2
        M[pos] = traced.n_contacts
        # reorder contact blocks to follow the anchor order
        order = np.argsort(pos, kind="stable")
        blocks = [traced.of(i) for i in order]
        contact = np.concatenate(blocks) if blocks else contact
    ptr = np.concatenate([[0], np.cumsum(taken)]).astype(np.int64)
    y = world.value.astype(float)
    gate = (world.gate_A if side == "A" else world.gate_B)[anchors]
    return GwsmInput(
        side=side,
        frame_size=int(frame.sum()),
        anchors=anchors,
        pi1=pi1,
        gate=gate.astype(float),
        ptr=ptr,
        pi2=pi2,
        n_contacts=M,
        contact=contact,
        y=y[contact],
        L_v=world.L_v[contact].astype(float),
        L_C=world.L_C[contact].astype(float),
        L=world.L[contact].astype(float),
        in_c=world.frames.in_c[contact].astype(float),
    )


# ------------------------------------------------------------ point estimates


def _total(inp: GwsmInput, kind: str):
    Z = inp.anchor_totals(inp.terms(kind))
    return float(np.sum(Z / inp.pi1)), Z


def estimate_YA(inp: GwsmInput):
    """``Y_A`` estimate and per-anchor ``Z_vk``."""
    if inp.side != "A":
        raise EstimationError("estimate_YA needs a side-A input")
    return _total(inp, "total")


def estimate_YB(inp: GwsmInput):
    """``Y_B`` estimate and per-anchor ``Z_Ck`` (zero for negative panelists)."""
    if inp.side != "B":
        raise EstimationError("estimate_YB needs a side-B input")
    return _total(inp, "total")


def estimate_YAB(inp_a: GwsmInput, inp_b: GwsmInput):
    """The two overlap estimates ``(Y_AB^A, Y_AB^B)``."""
    if inp_a.side != "A" or inp_b.side != "B":
        raise EstimationError("estimate_YAB needs (side-A, side-B) inputs")
    return _total(inp_a, "overlap")[0], _total(inp_b, "overlap")[0]


def composite(Y_A: float, Y_B: float, Y_AB_A: float, Y_AB_B: float, alpha: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise EstimationError(f"alpha={alpha} outside [0, 1]")
    return Y_A + Y_B - (alpha * Y_AB_A + (1.0 - alpha) * Y_AB_B)


def alpha_star(V_A: float, V_B: float) -> float:
    """Hartley's rule ``V_B / (V_A + V_B)``; 0.5 when both variances vanish."""
    if V_A < 0 or V_B < 0:
        raise EstimationError("variances must be non-negative")
    if V_A + V_B == 0:
        return 0.5
    return V_B / (V_A + V_B)


def alpha_opt_raw(V_A, V_B, V_AB_A, V_AB_B, Cov_A, Cov_B) -> float:
    """``(V_B + Cov_B - Cov_A) / (V_A + V_B)`` with no clamping.

    ``Cov_A = Cov(Y_AB^A, Y_A)`` and ``Cov_B = Cov(Y_AB^B, Y_B)``. The overlap
    variances are accepted for signature symmetry but do not enter.
    """
    den = V_A + V_B
    if den == 0:
        raise EstimationError("alpha_opt undefined: V_A + V_B = 0")
    return (V_B + Cov_B - Cov_A) / den


def alpha_opt(V_A, V_B, V_AB_A, V_AB_B, Cov_A, Cov_B) -> float:
    """:func:`alpha_opt_raw` clamped to ``[0, 1]``."""
    return float(np.clip(alpha_opt_raw(V_A, V_B, V_AB_A, V_AB_B, Cov_A, Cov_B), 0.0, 1.0))


def alpha_minvar(V_AB_A, V_AB_B, Cov_A, Cov_B) -> float:
    """Minimiser of the composite variance over ``alpha``, clamped to ``[0, 1]``.

    Setting the derivative of the composite variance to zero gives
    ``(V_AB_B + Cov_A - Cov_B) / (V_AB_A + V_AB_B)``.
    """
    den = V_AB_A + V_AB_B
    if den <= 0:
        return 0.5
    return float(np.clip((V_AB_B + Cov_A - Cov_B) / den, 0.0, 1.0))


# ------------------------------------------------------------------ variances


class TwoStageVariance(NamedTuple):
    V1: float
    V2: float

    @property
    def total(self) -> float:
        return self.V1 + self.V2


def _srswor_design(inp: GwsmInput):
    n, N = inp.n, inp.frame_size
    if n == 0:
        if N == 0:
            return 0, 0, True
        raise EstimationError("no first-stage units")
    p = inp.pi1
    if np.ptp(p) > 1e-12 * p.max():
        raise EstimationError("variance formulas assume equal first-stage probabilities (SRSWOR)")
    census = n >= N
    if n < 2 and not census:
        raise EstimationError("variance needs at least two first-stage units")
    return n, N, census


def covariance_two_stage(inp: GwsmInput, u, v) -> TwoStageVariance:
    """Unbiased two-stage SRSWOR estimate of ``Cov(sum Z(u)/pi1, sum Z(v)/pi1)``.

    First stage: ``N^2 (1 - f) s_{Zu,Zv} / n``. Second stage:
    ``sum_k (1/pi1_k) M_k^2 (1 - m_k/M_k) s_{u,v,k} / m_k``; anchors with
    ``m_k = 1 < M_k`` contribute zero there (within variance not estimable).
    """
    n, N, census = _srswor_design(inp)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    Zu, Zv = inp.anchor_totals(u), inp.anchor_totals(v)
    if census or n < 2:
        V1 = 0.0
    else:
        s = float(np.sum((Zu - Zu.mean()) * (Zv - Zv.mean())) / (n - 1))
        V1 = N * N * (1 - n / N) * s / n
    m = inp.n_taken
    M = inp.n_contacts
    sub = (m >= 2) & (m < M)
    V2 = 0.0
    if sub.any():
        fac = inp.anchor_factor()
        su = kernels.segment_sums(inp.ptr, u)
        sv = kernels.segment_sums(inp.ptr, v)
        suv = kernels.segment_sums(inp.ptr, u * v)
        k = np.nonzero(sub)[0]
        mk = m[k].astype(float)
        cov_k = (suv[k] - su[k] * sv[k] / mk) / (mk - 1)
        Mk = M[k].astype(float)
        V2 = float(np.sum(fac[k] ** 2 / inp.pi1[k] * Mk * Mk * (1 - mk / Mk) * cov_k / mk))
    return TwoStageVariance(float(V1), V2)


def variance_two_stage(inp: GwsmInput, u=None) -> TwoStageVariance:
    u = inp.terms("total") if u is None else u
    return covariance_two_stage(inp, u, u)


class CompositeVariance(NamedTuple):
    value: float
    raw: float
    floored: bool


def variance_composite(V_A, V_B, V_AB_A, V_AB_B, Cov_A, Cov_B, alpha) -> CompositeVariance:
    """Variance of the composite estimator; negative estimates are floored at 0."""
    vals = np.array([V_A, V_B, V_AB_A, V_AB_B, Cov_A, Cov_B, alpha], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise EstimationError("variance components must be finite")
    a = float(alpha)
    raw = (V_A + V_B + a * a * V_AB_A + (1 - a) ** 2 * V_AB_B
           - 2 * a * Cov_A - 2 * (1 - a) * Cov_B)
    return CompositeVariance(max(raw, 0.0), raw, raw < 0)


# ------------------------------------------------------------ other estimators


def gcre(Y_A: float, Y_B: float, Y_AB_overlap: float) -> float:
    """Capture-recapture style ``Y_A * Y_B / Y_AB``."""
    if not Y_AB_overlap > 0:
        raise NotComputableError("capture-recapture estimate needs a positive overlap estimate")
    return Y_A * Y_B / Y_AB_overlap


def estimate_C(y_panel, pi_panel) -> float:
    """Plain HT total of infected persons in ``U_c``."""
    return float(np.sum(np.asarray(y_panel, dtype=float) / np.asarray(pi_panel, dtype=float)))


def estimate_alt(inp_a: GwsmInput, y_panel, pi_panel, indicator: str = "in_c") -> float:
    """``Y_A + Y_C - Y_AC^A`` from side A and an untraced panel.

    ``indicator="in_c"`` restricts the correction to contacts in ``U_c``,
    which makes the estimator unbiased for ``Y``. ``"printed"`` uses
    ``L_j - L_Cj >= 1`` instead and is kept for comparison.
    """
    if indicator not in ("in_c", "printed"):
        raise EstimationError(f"unknown indicator {indicator!r}")
    Y_A, _ = estimate_YA(inp_a)
    Y_AC, _ = _total(inp_a, indicator)
    return Y_A + estimate_C(y_panel, pi_panel) - Y_AC


# --------------------------------------------------------------------- report


@dataclass
class EstimateReport:
    Y_A: float
    Y_B: float
    Y_AB_A: float
    Y_AB_B: float
    alpha: float
    alpha_policy: str
    Y_hat: float
    V_A: TwoStageVariance
    V_B: TwoStageVariance
    V_AB_A: float
    V_AB_B: float
    Cov_A: float
    Cov_B: float
    V: float
    V_floored: bool
    alpha_opt_raw: float | None
    Z_v: np.ndarray = field(repr=False)
    Z_C: np.ndarray = field(repr=False)

    @property
    def se(self) -> float:
        return float(np.sqrt(self.V))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["V_A"] = {"V1": self.V_A.V1, "V2": self.V_A.V2, "total": self.V_A.total}
        d["V_B"] = {"V1": self.V_B.V1, "V2": self.V_B.V2, "total": self.V_B.total}
        d["Z_v"] = [float(x) for x in self.Z_v]
        d["Z_C"] = [float(x) for x in self.Z_C]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


ALPHA_POLICIES = ("star", "opt", "minvar", "fixed")


def estimate(inp_a: GwsmInput, inp_b: GwsmInput, alpha_policy: str = "star", alpha: float = 0.5) -> EstimateReport:
    """Point estimates, plug-in variances and the composite under an alpha policy.

    ``star`` uses Hartley's rule, ``opt`` the covariance-adjusted rule clamped
    to ``[0, 1]``, ``minvar`` the exact minimiser of the composite variance
    and ``fixed`` the supplied ``alpha``.
    """
    if alpha_policy not in ALPHA_POLICIES:
        raise EstimationError(f"unknown alpha policy {alpha_policy!r}")
    Y_A, Z_v = estimate_YA(inp_a)
    Y_B, Z_C = estimate_YB(inp_b)
    Y_AB_A, Y_AB_B = estimate_YAB(inp_a, inp_b)
    ua, uaa = inp_a.terms("total"), inp_a.terms("overlap")
    ub, ubb = inp_b.terms("total"), inp_b.terms("overlap")
    V_A = variance_two_stage(inp_a, ua)
    V_B = variance_two_stage(inp_b, ub)
    V_AB_A = variance_two_stage(inp_a, uaa).total
    V_AB_B = variance_two_stage(inp_b, ubb).total
    Cov_A = covariance_two_stage(inp_a, uaa, ua).total
    Cov_B = covariance_two_stage(inp_b, ubb, ub).total
    # plug-in variances can be slightly negative through the second stage
    vA, vB = max(V_A.total, 0.0), max(V_B.total, 0.0)
    raw = None
    if vA + vB > 0:
        raw = alpha_opt_raw(vA, vB, V_AB_A, V_AB_B, Cov_A, Cov_B)
    if alpha_policy == "star":
        a = alpha_star(vA, vB)
    elif alpha_policy == "opt":
        a = 0.5 if raw is None else float(np.clip(raw, 0.0, 1.0))
    elif alpha_policy == "minvar":
        a = alpha_minvar(V_AB_A, V_AB_B, Cov_A, Cov_B)
    else:
        a = float(alpha)
    Y_hat = composite(Y_A, Y_B, Y_AB_A, Y_AB_B, a)
    cv = variance_composite(vA, vB, V_AB_A, V_AB_B, Cov_A, Cov_B, a)
    return EstimateReport(Y_A, Y_B, Y_AB_A, Y_AB_B, a, alpha_policy, Y_hat, V_A, V_B, V_AB_A, V_AB_B,
                          Cov_A, Cov_B, cv.value, cv.floored, raw, Z_v, Z_C)


def two_frame_inputs(world, sample) -> tuple[GwsmInput, GwsmInput]:
    """Side-A and side-B inputs for a :class:`~epiframes.designs.TwoFrameSample`.

    Only anchors whose gate is open in ``world`` keep their contacts, so the
    same sample serves cross-sectional and change targets.
    """
    sv, sc = sample.verified, sample.panel
    open_v = sv.person_id[world.gate_A[sv.person_id] != 0]
    open_c = sc.person_id[world.gate_B[sc.person_id] != 0]
    ia = gwsm_input(world, "A", sv.person_id, sv.pi1, subset_traced(sample.traced_v, open_v))
    ib = gwsm_input(world, "B", sc.person_id, sc.pi1, subset_traced(sample.traced_c, open_c))
    return ia, ib
