"""Closed-form anticipated variances and their Monte Carlo validators.

The formulas assume SRSWOR at sampling fraction ``f`` in both frames, a
superpopulation model with infection probability ``mu`` overall and
``theta`` among linked units, a constant contact count ``L`` and overlap
proportions ``gamma_A``, ``gamma_B``. A share ``P_v`` of the population (and
of the sample) belongs to the verified frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EstimationError


@dataclass(frozen=True)
class AvParams:
    N: float
    f: float
    mu: float
    theta: float
    L: float
    P_v: float
    alpha: float = 0.5
    gamma_A: float = 1.0
    gamma_B: float = 1.0

    def __post_init__(self):
        for name in ("mu", "theta", "P_v", "alpha", "gamma_A", "gamma_B"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name}={v} must lie in [0, 1]")
        if not 0.0 < self.f <= 1.0:
            raise ConfigError("f must lie in (0, 1]")
        if self.N <= 0:
            raise ConfigError("N must be positive")
        if self.L < 0:
            raise ConfigError("L must be non-negative")

    def replace(self, **kw) -> "AvParams":
        d = self.__dict__.copy()
        d.update(kw)
        return AvParams(**d)


def av_srs_ht(N: float, f: float, mu: float) -> float:
    """``(N / f) mu (1 - mu)``: HT total under SRSWOR with Bernoulli(mu) marks."""
    if f <= 0:
        raise ConfigError("f must be positive")
    return N / f * mu * (1.0 - mu)


def _bracket_A(p: AvParams) -> float:
    t, g, a = p.theta, p.gamma_A, p.alpha
    return t * ((1 - t) * (1 - 2 * a * g) + a * a * g * (1 - g * t))


def _bracket_B(p: AvParams) -> float:
    t, g, b, m = p.theta, p.gamma_B, 1.0 - p.alpha, p.mu
    return t * ((1 - m * t) + b * b * g * (1 - g * m * t) - 2 * b * g * (1 - m * t))


def av_group_A(p: AvParams) -> float:
    if p.L <= 0:
        raise ConfigError("L must be positive")
    return p.P_v * p.N / p.f / p.L * _bracket_A(p)


def av_group_B(p: AvParams) -> float:
    if p.L <= 0:
        raise ConfigError("L must be positive")
    if p.mu <= 0:
        raise ConfigError("mu must be positive in the group-B term")
    return (1 - p.P_v) * p.N / (p.f * p.L * p.mu) * _bracket_B(p)


def av_strategy(p: AvParams) -> float:
    return av_group_A(p) + av_group_B(p)


def efficiency_parts(p: AvParams) -> tuple[float, float]:
    """Group-wise ratios ``(effA, effB)``; efficiency is ``P_v effA + (1 - P_v) effB``."""
    den = p.mu * (1 - p.mu)
    if den <= 0:
        raise EstimationError("SRS anticipated variance is zero (mu in {0, 1})")
    return _bracket_A(p) / p.L / den, _bracket_B(p) / (p.L * p.mu) / den


def efficiency(p: AvParams) -> float:
    """Ratio of the strategy AV to the SRS-HT AV."""
    eff_a, eff_b = efficiency_parts(p)
    return p.P_v * eff_a + (1 - p.P_v) * eff_b


def av_table(p: AvParams) -> dict:
    return {
        "AV_SRS_HT": av_srs_ht(p.N, p.f, p.mu),
        "AV_group_A": av_group_A(p),
        "AV_group_B": av_group_B(p),
        "AV_strategy": av_strategy(p),
        "efficiency": efficiency(p),
    }


# ------------------------------------------------------------------ validators


def circulant_links(n_anchors: int, L: int) -> np.ndarray:
    """Anchor ``k`` is linked to contacts ``k, k+1, ..., k+L-1`` (mod n).

    Every contact then has exactly ``L`` anchors, so multiplicities are
    constant and equal to ``L``.
    """
    if L < 1 or L > n_anchors:
        raise ConfigError("need 1 <= L <= n_anchors")
    return (np.arange(n_anchors)[:, None] + np.arange(L)[None, :]) % n_anchors


def _srswor_rows(rng, N: int, n: int, reps: int) -> np.ndarray:
    # argpartition of uniform keys gives an SRSWOR per row
    keys = rng.random((reps, N))
    return np.argpartition(keys, n - 1, axis=1)[:, :n]


def empirical_av_srs_ht(N: int, f: float, mu: float, reps: int, rng, batch: int = 500) -> float:
    """Monte Carlo ``E_M E_p (Y_hat - Y)^2`` with fresh Bernoulli marks per replicate."""
    n = max(1, int(round(f * N)))
    errs = []
    for start in range(0, reps, batch):
        b = min(batch, reps - start)
        y = rng.random((b, N)) < mu
        rows = _srswor_rows(rng, N, n, b)
        est = np.take_along_axis(y, rows, axis=1).sum(axis=1) * (N / n)
        errs.append(est - y.sum(axis=1))
    e = np.concatenate(errs)
    return float(np.mean(e * e))


def empirical_av_group_A(n_anchors: int, p: AvParams, reps: int, rng, batch: int = 200) -> float:
    """Monte Carlo AV of ``Y_A - alpha Y_AB^A`` on a circulant world.

    Contact marks are Bernoulli(theta), overlap flags Bernoulli(gamma_A),
    independent; the multiplicity of every contact is ``L``.
    """
    L = int(p.L)
    links = circulant_links(n_anchors, L)
    n = max(1, int(round(p.f * n_anchors)))
    errs = []
    for start in range(0, reps, batch):
        b = min(batch, reps - start)
        y = rng.random((b, n_anchors)) < p.theta
        flag = rng.random((b, n_anchors)) < p.gamma_A
        w = y * (1.0 - p.alpha * flag)
        Z = w[:, links].sum(axis=2) / L
        rows = _srswor_rows(rng, n_anchors, n, b)
        est = np.take_along_axis(Z, rows, axis=1).sum(axis=1) * (n_anchors / n)
        errs.append(est - Z.sum(axis=1))
    e = np.concatenate(errs)
    return float(np.mean(e * e))


def empirical_av_group_B(n_anchors: int, p: AvParams, reps: int, rng, batch: int = 200,
                         multiplicity: str = "observed") -> float:
    """Monte Carlo AV of ``Y_B - (1 - alpha) Y_AB^B`` on a circulant world.

    Anchor marks are Bernoulli(mu), contact marks Bernoulli(theta), overlap
    flags Bernoulli(gamma_B). ``multiplicity="observed"`` divides by the
    realised ``L_Cj`` (the GWSM); ``"expected"`` divides by ``L * mu``.
    """
    if multiplicity not in ("observed", "expected"):
        raise ConfigError(f"unknown multiplicity {multiplicity!r}")
    L = int(p.L)
    links = circulant_links(n_anchors, L)
    # contacts of anchor k are k..k+L-1, so the anchors of contact j are j-L+1..j
    back = (np.arange(n_anchors)[:, None] - np.arange(L)[None, :]) % n_anchors
    n = max(1, int(round(p.f * n_anchors)))
    beta = 1.0 - p.alpha
    errs = []
    for start in range(0, reps, batch):
        b = min(batch, reps - start)
        yk = rng.random((b, n_anchors)) < p.mu
        yj = rng.random((b, n_anchors)) < p.theta
        flag = rng.random((b, n_anchors)) < p.gamma_B
        if multiplicity == "observed":
            Lc = yk[:, back].sum(axis=2).astype(float)
            inv = np.divide(1.0, Lc, out=np.zeros_like(Lc), where=Lc > 0)
        else:
            inv = np.full((b, n_anchors), 1.0 / (L * p.mu))
        w = yj * (1.0 - beta * flag) * inv
        Z = yk * w[:, links].sum(axis=2)
        rows = _srswor_rows(rng, n_anchors, n, b)
        est = np.take_along_axis(Z, rows, axis=1).sum(axis=1) * (n_anchors / n)
        errs.append(est - Z.sum(axis=1))
    e = np.concatenate(errs)
    return float(np.mean(e * e))


def group_B_with_anchor_covariance(p: AvParams) -> float:
    """Group-B AV including the covariance between contacts of the same anchor.

    Every anchor's ``L`` products ``y_k w_j`` share ``y_k``; adding their
    pairwise covariance ``mu (1 - mu) E[w]^2`` to the closed form gives the
    exact model variance when the multiplicity is ``L * mu``.
    """
    beta = 1.0 - p.alpha
    e = p.theta * (1 - beta * p.gamma_B)
    extra = (1 - p.P_v) * p.N / p.f * p.L * (p.L - 1) * p.mu * (1 - p.mu) * e * e / (p.L * p.mu) ** 2
    return av_group_B(p) + extra
