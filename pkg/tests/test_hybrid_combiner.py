import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beamsim.array_geometry import ArrayShape, build_codebook_deg
from beamsim.channel import LinkSet, NoiseModel, effective_channels, make_links, true_sinr
from beamsim.hybrid_combiner import (
    ComboAssignment, Missing, NoCompleteCombo, TooManyCombos, approx_sinrs, build_ab,
    candidate_sets, effective_channel, enumerate_combos, equal_gain_weights, lead_matrix,
    optimal_sinr_batch, optimal_weights, probe_schedule, select_best_combo,
)
from beamsim.numerics import inv_sqrt_pd, rayleigh_quotient
from beamsim.qtracker import BeamState, ObservationStore

SHAPE = ArrayShape(4, 4)
AZ = [15 + 30 * n for n in range(12)]
F_CB = build_codebook_deg(AZ, [15], SHAPE)
W_CB = build_codebook_deg(AZ, [15, 45, 75], SHAPE)
S2 = 1 / 300


def make_env(seed, sigma_z_sq=0.0):
    rng = np.random.default_rng(seed)
    links = make_links(rng, 3, SHAPE, 0.0, elevation_a_range_deg=(15, 15),
                       elevation_d_range_deg=(15, 15), walk_elevation=False)
    return LinkSet(links, F_CB, W_CB, NoiseModel(sigma_z_sq, S2), np.random.default_rng(seed))


def random_instance(rng, U=3):
    eff = rng.standard_normal((U, U)) + 1j * rng.standard_normal((U, U))
    f_p = rng.standard_normal((16, U)) + 1j * rng.standard_normal((16, U))
    return eff, f_p / np.linalg.norm(f_p, axis=0)


def observe_all(env, store, combos):
    for c in combos:
        for u, w in enumerate(c.w_indices):
            for f in c.f_indices:
                env.observe(u, f, w, store)


EXAMPLE_2 = [
    [BeamState(1, 1), BeamState(1, 2)],
    [BeamState(2, 1), BeamState(3, 3)],
    [BeamState(3, 2), BeamState(4, 4)],
]


def test_example_two_yields_24_combos():
    combos = enumerate_combos(EXAMPLE_2)
    assert len(combos) == 24
    assert {c.f_indices for c in combos} == {(1, 2, 3), (1, 2, 4), (1, 3, 4)}
    assert len({c.w_indices for c in combos}) == 8


def test_single_candidate_gives_one_combo_or_none():
    assert enumerate_combos([[BeamState(0, 1)], [BeamState(2, 1)]]) == [ComboAssignment((0, 2), (1, 1))]
    assert enumerate_combos([[BeamState(0, 1)], [BeamState(0, 2)]]) == []


@given(st.lists(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=1, max_size=3),
                min_size=1, max_size=4))
def test_enumeration_matches_product_oracle(cands):
    cands = [[BeamState(*s) for s in c] for c in cands]
    got = {(c.f_indices, c.w_indices) for c in enumerate_combos(cands)}
    f_sets = [{s.n_f for s in c} for c in cands]
    w_sets = [{s.n_w for s in c} for c in cands]
    expected = {(f, w) for f in itertools.product(*f_sets) if len(set(f)) == len(f)
                for w in itertools.product(*w_sets)}
    assert got == expected


def test_enumeration_limits():
    with pytest.raises(TooManyCombos):
        enumerate_combos([[BeamState(i, 0)] for i in range(5)])
    with pytest.raises(TooManyCombos):
        enumerate_combos([[BeamState(i, 0) for i in range(4)]])


def test_effective_channel_noiseless_equals_matrix_product():
    env = make_env(1)
    store = ObservationStore()
    combo = ComboAssignment((0, 4, 8), (2, 14, 2))
    observe_all(env, store, [combo])
    eff = effective_channel(store, combo)
    expected = effective_channels(env.links, [F_CB[i] for i in combo.f_indices],
                                  [W_CB[i] for i in combo.w_indices])
    assert np.allclose(eff, expected)


def test_effective_channel_reports_missing():
    env = make_env(1)
    store = ObservationStore()
    combo = ComboAssignment((0, 4), (2, 3))
    observe_all(env, store, [combo])
    del store.latest[(1, 0, 3)]
    assert effective_channel(store, combo) == Missing(((1, 0, 3),))


def test_build_ab_single_follower():
    rng = np.random.default_rng(0)
    eff, f_p = random_instance(rng, U=1)
    a, b = build_ab(eff, f_p, S2, 0)
    assert np.allclose(b, S2 * np.eye(1))
    assert np.allclose(a, np.abs(eff) ** 2)


def test_build_ab_orthonormal_beams():
    rng = np.random.default_rng(1)
    eff, _ = random_instance(rng)
    f_p, _ = np.linalg.qr(rng.standard_normal((16, 3)) + 1j * rng.standard_normal((16, 3)))
    a, b = build_ab(eff, f_p, S2, 1)
    assert np.allclose(a, np.outer(eff[:, 1], eff[:, 1].conj()))
    assert np.allclose(b, np.outer(eff[:, 0], eff[:, 0].conj())
                       + np.outer(eff[:, 2], eff[:, 2].conj()) + S2 * np.eye(3))


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_build_ab_structure(seed):
    eff, f_p = random_instance(np.random.default_rng(seed))
    for u in range(3):
        a, b = build_ab(eff, f_p, S2, u)
        assert np.allclose(a, a.conj().T) and np.allclose(b, b.conj().T)
        assert np.linalg.matrix_rank(a, tol=1e-9 * np.abs(a).max()) == 1
        assert np.linalg.eigvalsh(b).min() >= S2 * (1 - 1e-9)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1))
def test_optimal_weights_properties(seed):
    eff, f_p = random_instance(np.random.default_rng(seed))
    f_b, sinrs = optimal_weights(eff, f_p, S2)
    gram = f_p.conj().T @ f_p
    g = inv_sqrt_pd(gram)
    for u in range(3):
        col = f_b[:, u]
        assert abs(col.conj() @ gram @ col - 1.0) <= 1e-8
        a, b = build_ab(eff, f_p, S2, u)
        x = np.linalg.solve(g, col)
        assert rayleigh_quotient(a, b, x) == pytest.approx(sinrs[u], rel=1e-8)
        identity = np.zeros(3)
        identity[u] = 1.0
        assert sinrs[u] >= rayleigh_quotient(a, b, identity) * (1 - 1e-10)
    assert np.allclose(approx_sinrs(eff, f_p, f_b, S2), sinrs, rtol=1e-8)


def test_optimal_weights_matched_filter_case():
    rng = np.random.default_rng(2)
    f_p, _ = np.linalg.qr(rng.standard_normal((16, 3)) + 1j * rng.standard_normal((16, 3)))
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    eff = q * np.array([1.0, 0.5, 2.0])
    f_b, _ = optimal_weights(eff, f_p, S2)
    for u in range(3):
        h = eff[:, u] / np.linalg.norm(eff[:, u])
        assert abs(abs(np.vdot(h, f_b[:, u])) - 1.0) < 1e-10


def test_phase_invariance():
    eff, f_p = random_instance(np.random.default_rng(3))
    _, base = optimal_weights(eff, f_p, S2)
    _, rotated = optimal_weights(eff * np.exp(1j * np.array([0.3, -1.2, 2.0])), f_p, S2)
    assert np.allclose(base, rotated, rtol=1e-10)


def test_batched_scores_match_eigen_route():
    rng = np.random.default_rng(4)
    insts = [random_instance(rng) for _ in range(6)]
    batch = optimal_sinr_batch(np.stack([e for e, _ in insts]), np.stack([f for _, f in insts]), S2)
    for row, (eff, f_p) in zip(batch, insts):
        assert np.allclose(row, optimal_weights(eff, f_p, S2)[1], rtol=1e-8)


def test_equal_gain_weights_meet_power_constraint():
    _, f_p = random_instance(np.random.default_rng(5))
    f_b = equal_gain_weights(f_p)
    gram = f_p.conj().T @ f_p
    assert np.allclose(np.einsum("iu,ij,ju->u", f_b.conj(), gram, f_b).real, 1.0)
    f_cb = lead_matrix(F_CB, (0, 3, 6))
    assert np.allclose(equal_gain_weights(f_cb), np.eye(3))


def test_noiseless_approx_equals_true_sinr():
    env = make_env(6)
    store = ObservationStore()
    combo = ComboAssignment((1, 5, 9), (3, 20, 7))
    observe_all(env, store, [combo])
    f_p = lead_matrix(F_CB, combo.f_indices)
    eff = effective_channel(store, combo)
    for f_b, approx in (optimal_weights(eff, f_p, S2),
                        (equal_gain_weights(f_p), None)):
        approx = approx_sinrs(eff, f_p, f_b, S2) if approx is None else approx
        exact = true_sinr(env.links, F_CB, W_CB, combo.f_indices, combo.w_indices, f_b, S2)
        assert np.allclose(approx, exact, rtol=1e-6)


def test_select_best_combo_exhaustive_oracle():
    env = make_env(7, sigma_z_sq=S2)
    store = ObservationStore()
    combos = enumerate_combos(EXAMPLE_2)
    observe_all(env, store, combos)
    sel = select_best_combo(combos, store, F_CB, S2)
    scores = [optimal_weights(effective_channel(store, c), lead_matrix(F_CB, c.f_indices), S2)[1].sum()
              for c in combos]
    assert sel.combo == combos[int(np.argmax(scores))]
    assert sel.score == pytest.approx(max(scores), rel=1e-8)
    assert sel.n_combos == 24


def test_selection_monotone_in_k():
    env = make_env(8, sigma_z_sq=S2)
    store = ObservationStore()
    for u in range(3):
        for n_f in range(12):
            for n_w in range(0, 36, 3):
                env.observe(u, n_f, n_w, store)
    selected = [BeamState(u * 4, u) for u in range(3)]
    prev = -np.inf
    for k in (1, 2, 3):
        cands = candidate_sets(store, selected, k)
        assert all(c[0] == s for c, s in zip(cands, selected))
        for leads, tx in probe_schedule(cands, store):
            for u, n_w in tx.items():
                for n_f in leads:
                    env.observe(u, n_f, n_w, store)
        score = select_best_combo(enumerate_combos(cands), store, F_CB, S2).score
        assert score >= prev - 1e-12
        prev = score


def test_probe_schedule_completes_every_combo():
    env = make_env(9)
    store = ObservationStore()
    cands = [[BeamState(0, 0), BeamState(5, 3)], [BeamState(2, 7), BeamState(9, 7)],
             [BeamState(4, 11), BeamState(10, 2)]]
    slots = probe_schedule(cands, store)
    for leads, tx in slots:
        assert len(leads) <= 3
        for u, n_w in tx.items():
            for n_f in leads:
                env.observe(u, n_f, n_w, store)
    assert all(not isinstance(effective_channel(store, c), Missing) for c in enumerate_combos(cands))
    assert probe_schedule(cands, store) == []
    assert probe_schedule(cands, store, since=env.time + 1) != []


def test_no_complete_combo():
    with pytest.raises(NoCompleteCombo):
        select_best_combo([ComboAssignment((0, 1), (0, 0))], ObservationStore(), F_CB, S2)
