from fractions import Fraction

import numpy as np
import pytest

from epiframes.designs import ContactScheme, TracedContacts, srswor, trace_contacts
from epiframes.errors import EstimationError, NotComputableError
from epiframes.estimators import (
    alpha_minvar,
    alpha_opt,
    alpha_star,
    composite,
    covariance_two_stage,
    estimate,
    estimate_alt,
    estimate_YA,
    estimate_YAB,
    estimate_YB,
    gcre,
    gwsm_input,
    variance_composite,
    variance_two_stage,
)
from epiframes.frames import world_from_arrays
from epiframes.synthpop import A, D, E, I, R, S

from oracles import ToyWorld, expectation, random_toy, side_A_table, side_B_table, srswor_variance


def census_inputs(world):
    U_v, U_c = world.frames.U_v, world.frames.U_c
    tv = trace_contacts(U_v, world.link, ContactScheme.all(), np.random.default_rng(0))
    pos = U_c[world.y[U_c] == 1]
    tc = trace_contacts(pos, world.link, ContactScheme.all(), np.random.default_rng(0))
    return gwsm_input(world, "A", U_v, 1.0, tv), gwsm_input(world, "B", U_c, 1.0, tc)


# ------------------------------------------------------------------ plain formulas


def test_composite_examples():
    assert composite(10, 20, 4, 6, 0.5) == 25
    assert composite(10, 20, 4, 6, 1.0) == 10 + 20 - 4
    assert composite(10, 20, 4, 6, 0.0) == 10 + 20 - 6
    with pytest.raises(EstimationError):
        composite(1, 1, 1, 1, 1.5)


def test_alpha_star_examples():
    assert alpha_star(2.0, 2.0) == 0.5
    assert alpha_star(1.0, 3.0) == 0.75
    assert alpha_star(0.0, 0.0) == 0.5
    with pytest.raises(EstimationError):
        alpha_star(-1.0, 1.0)


def test_alpha_opt_without_covariances_is_alpha_star():
    for V_A, V_B in [(1, 3), (5, 2), (0.1, 0.1)]:
        assert alpha_opt(V_A, V_B, 7.0, 9.0, 0.0, 0.0) == pytest.approx(alpha_star(V_A, V_B))


def test_alpha_minvar_minimises_composite_variance():
    rng = np.random.default_rng(3)
    grid = np.linspace(0, 1, 2001)
    for _ in range(50):
        V_A, V_B, V1, V2 = rng.uniform(0.5, 5, 4)
        c1, c2 = rng.uniform(-1, 1, 2) * np.sqrt([V1 * V_A, V2 * V_B])
        a = alpha_minvar(V1, V2, c1, c2)
        best = min(variance_composite(V_A, V_B, V1, V2, c1, c2, g).raw for g in grid)
        assert variance_composite(V_A, V_B, V1, V2, c1, c2, a).raw <= best + 1e-9


def test_variance_composite_endpoints():
    V_A, V_B, V1, V2, c1, c2 = 3.0, 5.0, 2.0, 4.0, 0.7, 1.1
    assert variance_composite(V_A, V_B, V1, V2, c1, c2, 0.0).value == pytest.approx(V_A + V_B + V2 - 2 * c2)
    assert variance_composite(V_A, V_B, V1, V2, 0, 0, 1.0).value == pytest.approx(V_A + V_B + V1)
    # symmetric inputs at one half, expanded by hand
    v = variance_composite(1.0, 1.0, 2.0, 2.0, 0.5, 0.5, 0.5).value
    assert v == pytest.approx(1 + 1 + 0.25 * 2 + 0.25 * 2 - 0.5 - 0.5)


def test_variance_composite_floors_negative():
    v = variance_composite(0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.5)
    assert v.value == 0.0 and v.floored and v.raw < 0
    with pytest.raises(EstimationError):
        variance_composite(np.nan, 0, 0, 0, 0, 0, 0.5)


def test_gcre():
    assert gcre(10, 20, 5) == 40
    assert gcre(12.5, 7.0, 7.0) == pytest.approx(12.5)
    for bad in (0.0, -1.0):
        with pytest.raises(NotComputableError):
            gcre(10, 20, bad)


# --------------------------------------------------------------- hand examples


def test_single_anchor_hand_example():
    # anchor 0 verified, one contact 1 (infected, linked only to 0); pi1 = 0.5, full tracing
    world = world_from_arrays([I, E, S], [True, False, False], [(0, 1)])
    assert world.L_v.tolist() == [1, 1, 0]
    traced = trace_contacts([0], world.link, ContactScheme.all(), np.random.default_rng(0))
    ia = gwsm_input(world, "A", [0], 0.5, traced)
    assert estimate_YA(ia)[0] == pytest.approx(4.0)


def test_four_anchor_variance_matches_textbook():
    # census of contacts, so only the first stage contributes
    toy = ToyWorld([I, I, I, I, S, E, S, E, A, S],
                   [True] * 4 + [False] * 6,
                   [(0, 4), (0, 5), (1, 5), (1, 6), (2, 7), (3, 8), (3, 9), (2, 9)])
    N = len(toy.U_v)
    n = 3
    sample = toy.U_v[:n]
    traced = trace_contacts(sample, toy.world.link, ContactScheme.all(), np.random.default_rng(0))
    ia = gwsm_input(toy.world, "A", sample, n / N, traced)
    z = [sum(Fraction(toy.y[j], toy.L_v[j]) for j in toy.adj[k]) for k in sample]
    v = variance_two_stage(ia)
    assert v.V2 == 0.0
    assert v.V1 == pytest.approx(N * N * (1 - n / N) * np.var(np.array(z, dtype=float), ddof=1) / n)


def test_variance_needs_srswor_and_two_units():
    toy = ToyWorld([I, I, I, S], [True] * 3 + [False], [(0, 3)])
    t = trace_contacts([0], toy.world.link, ContactScheme.all(), np.random.default_rng(0))
    with pytest.raises(EstimationError):
        variance_two_stage(gwsm_input(toy.world, "A", [0], 1 / 3, t))
    t2 = trace_contacts([0, 1], toy.world.link, ContactScheme.all(), np.random.default_rng(0))
    with pytest.raises(EstimationError):
        variance_two_stage(gwsm_input(toy.world, "A", [0, 1], np.array([0.5, 0.9]), t2))


# ------------------------------------------------------------------- census


@pytest.mark.parametrize("seed", range(5))
def test_census_returns_truth(seed):
    toy = random_toy(np.random.default_rng(seed), n_min=8, n_max=14, edge_p=0.3, max_degree=8)
    ia, ib = census_inputs(toy.world)
    assert estimate_YA(ia)[0] == pytest.approx(float(toy.Y_A), abs=1e-12)
    assert estimate_YB(ib)[0] == pytest.approx(float(toy.Y_B), abs=1e-12)
    a, b = estimate_YAB(ia, ib)
    assert a == pytest.approx(toy.Y_AB, abs=1e-12)
    assert b == pytest.approx(toy.Y_AB, abs=1e-12)
    rep = estimate(ia, ib, "star")
    assert rep.Y_hat == pytest.approx(toy.Y, abs=1e-12)
    assert rep.V == pytest.approx(0.0, abs=1e-12)
    y_panel = np.array([toy.y[k] for k in toy.U_c], dtype=float)
    assert estimate_alt(ia, y_panel, np.ones(len(y_panel))) == pytest.approx(toy.Y, abs=1e-12)


def test_disjoint_groups_give_zero_overlap():
    # the verified case only meets a susceptible, so no infected U_c member reaches U_A
    toy = ToyWorld([I, S, I, S, S], [True, False, False, False, False], [(0, 1), (2, 3), (2, 4)])
    assert toy.Y_AB == 0
    rng = np.random.default_rng(1)
    for _ in range(20):
        sv = srswor(toy.U_v, 1, rng)
        sc = srswor(toy.U_c, 2, rng, origin="C")
        tv = trace_contacts(sv.person_id, toy.world.link, ContactScheme.cap(1), rng)
        pos = sc.person_id[toy.world.y[sc.person_id] == 1]
        tc = trace_contacts(pos, toy.world.link, ContactScheme.cap(1), rng)
        ia = gwsm_input(toy.world, "A", sv.person_id, sv.pi1, tv)
        ib = gwsm_input(toy.world, "B", sc.person_id, sc.pi1, tc)
        assert estimate_YAB(ia, ib) == (0.0, 0.0)


def test_alt_with_no_infected_overlap_is_YA_plus_Uc_infected():
    # the only contact of the verified case is dead, so nothing in U_A is in U_c
    toy = ToyWorld([I, D, E, S], [True, False, False, False], [(0, 1), (2, 3)])
    ia, _ = census_inputs(toy.world)
    y_panel = np.array([toy.y[k] for k in toy.U_c], dtype=float)
    assert estimate_alt(ia, y_panel, np.ones(len(y_panel))) == pytest.approx(float(toy.Y_A) + toy.Y_c)


def test_side_checks():
    toy = ToyWorld([I, E, S], [True, False, False], [(0, 1)])
    ia, ib = census_inputs(toy.world)
    with pytest.raises(EstimationError):
        estimate_YA(ib)
    with pytest.raises(EstimationError):
        estimate_YB(ia)
    with pytest.raises(EstimationError):
        estimate_YAB(ib, ia)
    with pytest.raises(EstimationError):
        estimate(ia, ib, "bogus")


# ---------------------------------------------------------------- enumeration


TOY_SEEDS = [11, 12, 13, 14, 15, 16]


@pytest.mark.parametrize("seed", TOY_SEEDS)
@pytest.mark.parametrize("scheme", [ContactScheme.cap(2), ContactScheme.fraction(0.5)], ids=["cap2", "half"])
def test_enumeration_unbiased(seed, scheme):
    toy = random_toy(np.random.default_rng(seed))
    rows_a = side_A_table(toy, 2, scheme)
    rows_b = side_B_table(toy, 2, scheme)
    assert sum(r[0] for r in rows_a) == 1 and sum(r[0] for r in rows_b) == 1
    assert expectation(rows_a, "Y_A") == pytest.approx(float(toy.Y_A), abs=1e-9)
    assert expectation(rows_a, "Y_AB_A") == pytest.approx(toy.Y_AB, abs=1e-9)
    assert expectation(rows_b, "Y_B") == pytest.approx(float(toy.Y_B), abs=1e-9)
    assert expectation(rows_b, "Y_AB_B") == pytest.approx(toy.Y_AB, abs=1e-9)
    # library and brute force agree sample by sample
    for rows in (rows_a, rows_b):
        for _, _, lib, brute in rows:
            for key in lib:
                assert lib[key] == pytest.approx(brute[key], abs=1e-9)


@pytest.mark.parametrize("seed", TOY_SEEDS)
def test_enumeration_alt_estimator(seed):
    toy = random_toy(np.random.default_rng(seed))
    rows_a = side_A_table(toy, 2, ContactScheme.cap(2))
    # E[Y_C] over the panel design is the infected count of U_c
    E_alt = expectation(rows_a, "Y_A") + toy.Y_c - expectation(rows_a, "Y_AC")
    assert E_alt == pytest.approx(toy.Y, abs=1e-9)
    assert expectation(rows_a, "Y_AC") == pytest.approx(float(toy.Y_A) + toy.Y_c - toy.Y, abs=1e-9)


@pytest.mark.parametrize("seed", TOY_SEEDS)
def test_enumeration_variance_unbiased(seed):
    # with at most two contacts taken per anchor and two anchors, every term is estimable
    toy = random_toy(np.random.default_rng(seed))
    scheme = ContactScheme.cap(2)
    for rows in (side_A_table(toy, 2, scheme), side_B_table(toy, 2, scheme)):
        key = "Y_A" if rows[0][1].side == "A" else "Y_B"
        ov = "Y_AB_A" if key == "Y_A" else "Y_AB_B"
        mu = expectation(rows, key)
        mu_ov = expectation(rows, ov)
        var = sum(float(p) * (lib[key] - mu) ** 2 for p, _, lib, _ in rows)
        cov = sum(float(p) * (lib[key] - mu) * (lib[ov] - mu_ov) for p, _, lib, _ in rows)
        E_V = sum(float(p) * variance_two_stage(inp).total for p, inp, _, _ in rows)
        E_C = sum(float(p) * covariance_two_stage(inp, inp.terms("overlap"), inp.terms("total")).total
                  for p, inp, _, _ in rows)
        assert E_V == pytest.approx(var, rel=1e-9, abs=1e-9)
        assert E_C == pytest.approx(cov, rel=1e-9, abs=1e-9)


def test_first_stage_variance_is_textbook_when_contacts_complete():
    toy = random_toy(np.random.default_rng(21))
    rows = side_A_table(toy, 2, ContactScheme.all())
    z = [sum(Fraction(toy.y[j], toy.L_v[j]) for j in toy.adj[k]) for k in toy.U_v]
    mu = expectation(rows, "Y_A")
    var = sum(float(p) * (lib["Y_A"] - mu) ** 2 for p, _, lib, _ in rows)
    assert var == pytest.approx(srswor_variance([float(x) for x in z], 2), rel=1e-9, abs=1e-12)


def test_two_stage_variance_monte_carlo(small_trace):
    from epiframes.frames import build_world

    world = build_world(small_trace, 20)
    U_v = world.frames.U_v
    n = len(U_v) // 2
    scheme = ContactScheme.cap(3)
    rng = np.random.default_rng(7)
    est, vhat = [], []
    for _ in range(3000):
        sv = srswor(U_v, n, rng)
        tv = trace_contacts(sv.person_id, world.link, scheme, rng)
        ia = gwsm_input(world, "A", sv.person_id, sv.pi1, tv)
        est.append(estimate_YA(ia)[0])
        vhat.append(variance_two_stage(ia).total)
    assert np.mean(est) == pytest.approx(world.truth.Y_A, rel=0.03)
    assert np.mean(vhat) == pytest.approx(np.var(est, ddof=1), rel=0.15)


def test_traced_contacts_round_trip_through_input():
    toy = ToyWorld([I, E, A, R, S], [True, False, False, False, False], [(0, 1), (0, 2), (0, 3)])
    t = TracedContacts(np.array([0]), np.array([0, 2]), np.array([1, 2]), np.array([4]), np.array([0.5]))
    ia = gwsm_input(toy.world, "A", [0], 1.0, t)
    assert ia.n == 1
    assert ia.contact.tolist() == [1, 2]
    # both contacts have y = 1 and L_v = 1, weight 1 / 0.5
    assert estimate_YA(ia)[0] == pytest.approx(4.0)
