import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sureblock.shrinkage import (
    BlockPartition,
    Branch,
    block_js,
    block_oracle_risk,
    candidate_thresholds,
    garrote,
    linear_oracle_risk,
    minimize_sure,
    sparsity_cutoff,
    sparsity_statistic,
    sure,
    sureblock_estimate,
)

from oracles import block_energy_list, brute_force_search, sure_by_definition, sure_on_grid

vectors = arrays(np.float64, st.integers(2, 80), elements=st.floats(-6, 6))


# --- partition -------------------------------------------------------------

def test_partition_counts():
    p = BlockPartition(10, 3)
    assert (p.m, p.remainder) == (3, 1)
    assert p.m * p.L + p.remainder == p.d
    energies, lengths = p.block_energies(np.arange(10.0))
    assert energies.tolist() == [5.0, 50.0, 149.0, 81.0]
    assert lengths.tolist() == [3, 3, 3, 1]
    assert p.expand(np.array([1.0, 2.0, 3.0, 4.0])).tolist() == [1, 1, 1, 2, 2, 2, 3, 3, 3, 4]


@pytest.mark.parametrize("d,L", [(0, 1), (4, 0), (4, 5)])
def test_partition_rejects_bad_sizes(d, L):
    with pytest.raises(ValueError):
        BlockPartition(d, L)


# --- block James-Stein -----------------------------------------------------

def test_block_js_hand_value():
    assert np.allclose(block_js([3.0, 4.0], 5.0, 2), [2.4, 3.2], atol=1e-15)


def test_block_js_zero_threshold_is_identity():
    x = np.random.default_rng(0).standard_normal(20)
    assert np.array_equal(block_js(x, 0.0, 3), x)


def test_block_js_full_kill():
    x = np.random.default_rng(1).standard_normal(20)
    lam = max(block_energy_list(x, 4))
    assert np.array_equal(block_js(x, lam, 4), np.zeros(20))


def test_block_js_zero_block_maps_to_zero():
    assert np.array_equal(block_js([0.0, 0.0, 3.0, 4.0], 0.0, 2), [0.0, 0.0, 3.0, 4.0])
    assert np.array_equal(block_js([0.0, 0.0, 3.0, 4.0], 1.0, 2)[:2], [0.0, 0.0])


def test_block_js_remainder_block_uses_its_own_energy():
    x = np.array([1.0, 1.0, 1.0, 2.0])
    out = block_js(x, 2.0, 3)
    assert np.allclose(out, [1 / 3, 1 / 3, 1 / 3, 2 * (1 - 2 / 4)])


@pytest.mark.parametrize("lam,L", [(-1.0, 1), (1.0, 0), (1.0, 5)])
def test_block_js_parameter_errors(lam, L):
    with pytest.raises(ValueError):
        block_js(np.ones(4), lam, L)


@settings(max_examples=100, deadline=None)
@given(x=vectors, lam=st.floats(0, 50), L=st.integers(1, 8))
def test_block_js_never_expands(x, lam, L):
    L = min(L, x.size)
    out = block_js(x, lam, L)
    assert np.linalg.norm(out) <= np.linalg.norm(x) * (1 + 1e-12)
    # shrink factors live in [0, 1] and never flip signs
    assert np.all(out * x >= 0)


# --- SURE ------------------------------------------------------------------

@pytest.mark.parametrize("L", [1, 2, 4, 8])
def test_sure_at_zero_threshold_is_d(L):
    x = np.random.default_rng(L).standard_normal(64) + 1
    assert math.isclose(sure(x, 0.0, L), 64.0, rel_tol=1e-12)


def test_sure_full_kill():
    x = np.random.default_rng(3).standard_normal(30)
    lam = max(block_energy_list(x, 5)) + 1
    assert math.isclose(sure(x, lam, 5), float(x @ x) - 30, rel_tol=1e-12)


def test_sure_zero_vector_is_minus_d():
    assert sure(np.zeros(16), 0.0, 4) == -16.0
    assert sure(np.zeros(16), 3.0, 1) == -16.0


@settings(max_examples=150, deadline=None)
@given(x=vectors, lam=st.floats(0, 60), L=st.integers(1, 9))
def test_sure_matches_definition(x, lam, L):
    L = min(L, x.size)
    assert math.isclose(sure(x, lam, L), sure_by_definition(x, lam, L), rel_tol=1e-10, abs_tol=1e-9)


# --- candidate thresholds --------------------------------------------------

def test_candidates_all_zero_l1():
    assert candidate_thresholds(np.zeros(3), 1).tolist() == [0.0, 2 * math.log(3)]


def test_candidates_l2_example():
    # block energies 0.5, 3 and 7 with d = 6
    x = np.array([math.sqrt(0.5), 0.0, math.sqrt(3.0), 0.0, math.sqrt(7.0), 0.0])
    got = candidate_thresholds(x, 2)
    want = [0.0, 0.5, 3.0, 7.0, 4 * math.log(6)]
    assert np.allclose(got, want, rtol=1e-12, atol=1e-15)


def test_candidates_clip_to_search_range():
    # L = 4: lower end 2, cap 8 ln 16 ~ 22.18; energies 1 and 100 fall outside
    x = np.concatenate([np.full(4, 0.5), np.full(4, 5.0), np.full(4, 1.5), np.zeros(4)])
    got = candidate_thresholds(x, 4)
    assert got.tolist() == [2.0, 9.0, 8 * math.log(16)]


@settings(max_examples=100, deadline=None)
@given(x=vectors, L=st.integers(1, 8))
def test_candidates_sorted_within_range(x, L):
    L = min(L, math.isqrt(x.size))
    c = candidate_thresholds(x, L)
    assert np.all(np.diff(c) > 0)
    assert c[0] == max(L - 2, 0)
    assert c[-1] == 2 * L * math.log(x.size)


@settings(max_examples=60, deadline=None)
@given(x=arrays(np.float64, st.integers(2, 40), elements=st.floats(-5, 5)))
def test_candidate_minimum_beats_grid(x):
    d = x.size
    for L in range(1, math.isqrt(d) + 1):
        c = candidate_thresholds(x, L)
        cand_min = min(sure(x, lam, L) for lam in c)
        grid = np.linspace(max(L - 2, 0), 2 * L * math.log(d), 400)
        assert cand_min <= sure_on_grid(x, grid, L).min() + 1e-9


# --- minimize_sure ---------------------------------------------------------

def test_minimize_zero_vector_ties_to_smallest():
    sel = minimize_sure(np.zeros(16))
    assert sel.L_star == 1
    assert sel.lambda_star == 0.0
    assert sel.sure_value == -16.0


def test_minimize_dense_signal_keeps_blocks():
    x = 5.0 + np.random.default_rng(7).standard_normal(64)
    sel = minimize_sure(x)
    for L in range(1, 9):
        assert sel.sure_value <= sure(x, 2 * L * math.log(64), L)
    energies = block_energy_list(x, sel.L_star)
    assert sel.lambda_star < min(energies)


def test_minimize_matches_brute_force_d36():
    x = np.random.default_rng(2024).standard_normal(36) + np.repeat([0, 2.5, 0, 0, 1.5, 0], 6)
    sel = minimize_sure(x)
    value, L, lam = brute_force_search(x)
    assert abs(sel.sure_value - value) < 1e-9
    assert sel.L_star == L
    assert abs(sel.lambda_star - lam) < 1e-12


def naive_candidates(x, L):
    d = len(x)
    lo, hi = max(L - 2, 0), 2 * L * math.log(d)
    return sorted({lo, hi, *(e for e in block_energy_list(x, L) if lo <= e <= hi)})


@settings(max_examples=120, deadline=None)
@given(x=vectors)
def test_minimize_agrees_with_naive_candidate_loop(x):
    d = x.size
    sel = minimize_sure(x)
    # independent double loop: oracle energies, oracle SURE
    scored = [(sure_by_definition(x, lam, L), L, lam)
              for L in range(1, math.isqrt(d) + 1) for lam in naive_candidates(x, L)]
    best = min(s[0] for s in scored)
    assert abs(sel.sure_value - best) <= 1e-9 * max(1.0, abs(best))
    tied = [s for s in scored if s[0] <= best + 1e-9 * max(1.0, abs(best))]
    if len(tied) == 1:
        assert sel.L_star == tied[0][1]
        assert math.isclose(sel.lambda_star, tied[0][2], rel_tol=1e-12)
    assert sel.sure_value == sure(x, sel.lambda_star, sel.L_star)
    assert 1 <= sel.L_star <= math.isqrt(d)
    assert max(sel.L_star - 2, 0) <= sel.lambda_star <= 2 * sel.L_star * math.log(d)


@settings(max_examples=80, deadline=None)
@given(x=vectors, L=st.integers(1, 8))
def test_candidates_match_naive_construction(x, L):
    L = min(L, math.isqrt(x.size))
    got = candidate_thresholds(x, L)
    want = np.array(naive_candidates(x, L))
    # the two sides sum block energies in different orders, so compare up to rounding
    assert all(np.isclose(want, g, rtol=1e-12, atol=1e-300).any() for g in got)
    assert all(np.isclose(got, w, rtol=1e-12, atol=1e-300).any() for w in want)


def test_max_block_restricts_search():
    x = np.random.default_rng(5).standard_normal(256) + np.repeat([0.0, 3.0], 128)
    assert minimize_sure(x, max_block=1).L_star == 1


# --- garrote and hybrid ----------------------------------------------------

def test_garrote_values():
    assert garrote([3.0], 4.5).tolist() == [1.5]
    assert garrote([0.0, 2.0], 1.0).tolist() == [0.0, 1.5]
    x = np.array([-1.0, 0.5, 7.0])
    assert np.array_equal(garrote(x, 0.0), x)


def test_sparsity_quantities():
    x = np.full(64, 10.0)
    assert sparsity_statistic(x) == 99.0
    assert math.isclose(sparsity_cutoff(64), 6 ** 1.5 / 8, rel_tol=1e-14)
    assert math.isclose(sparsity_cutoff(64), 1.837117307, rel_tol=1e-9)


def test_hybrid_zero_vector_goes_garrote():
    est, sel = sureblock_estimate(np.zeros(32))
    assert sel.hybrid_branch is Branch.GARROTE
    assert (sel.L_star, sel.lambda_star) == (1, 2 * math.log(32))
    assert np.array_equal(est, np.zeros(32))


def test_hybrid_dense_goes_block():
    x = np.full(64, 10.0)
    est, sel = sureblock_estimate(x)
    assert sel.hybrid_branch is Branch.BLOCK
    assert sel.t_d == 99.0
    assert np.allclose(est, block_js(x, sel.lambda_star, sel.L_star))


def test_hybrid_needs_two_points():
    with pytest.raises(ValueError):
        sureblock_estimate(np.array([1.0]))


def test_tiny_vectors_search_only_l1():
    _, sel = sureblock_estimate(np.array([4.0, -3.0, 5.0]))
    assert sel.L_star == 1


@settings(max_examples=100, deadline=None)
@given(x=vectors)
def test_hybrid_branch_agrees_with_statistic(x):
    _, sel = sureblock_estimate(x)
    assert (sel.hybrid_branch is Branch.GARROTE) == (sel.t_d <= sel.gamma_d)


def test_pure_noise_risk_is_small():
    d, reps = 256, 10_000
    loss = 0.0
    for r in range(reps):
        z = np.random.default_rng([99, r]).standard_normal(d)
        est, _ = sureblock_estimate(z)
        loss += float(est @ est)
    assert loss / (reps * d) <= 0.05


# --- oracles ---------------------------------------------------------------

def test_linear_oracle_values():
    assert linear_oracle_risk(np.zeros(5)) == 0.0
    assert linear_oracle_risk(np.ones(9)) == 0.5
    assert math.isclose(linear_oracle_risk(np.full(16, 2.0)), 0.8)


def test_block_oracle_zero_signal():
    assert block_oracle_risk(np.zeros(256), mc_reps=10_000, seed=1) <= 0.02


def test_block_oracle_strong_signal():
    theta = 10.0 * np.where(np.arange(64) % 3 == 0, -1.0, 1.0)
    r = block_oracle_risk(theta, mc_reps=10_000, seed=2)
    assert 0.8 <= r <= 1.05


def test_block_oracle_matches_direct_loss_on_grid_point():
    # the pooled loss at the identity (lam = 0) must equal the plain average noise energy
    theta = np.linspace(-2, 2, 16)
    reps = 200
    r = block_oracle_risk(theta, mc_reps=reps, seed=4)
    z = np.vstack([np.random.default_rng([4, i]).standard_normal(16) for i in range(reps)])
    identity = float(np.mean(np.sum(z * z, axis=1))) / 16
    assert r <= identity + 1e-12


def test_block_oracle_is_chunk_invariant():
    theta = np.r_[np.zeros(40), np.full(24, 3.0)]
    a = block_oracle_risk(theta, mc_reps=300, seed=8, chunk=300)
    b = block_oracle_risk(theta, mc_reps=300, seed=8, chunk=7)
    assert math.isclose(a, b, rel_tol=1e-12)


@settings(max_examples=100, deadline=None)
@given(x=arrays(np.float64, st.integers(2, 300), elements=st.floats(-8, 8, allow_subnormal=False)))
def test_fast_table_matches_direct_sure(x):
    from sureblock.shrinkage import _candidate_table

    top = math.isqrt(x.size)
    Ls, lams, vals = _candidate_table(x * x, tuple(range(1, top + 1)))
    assert set(Ls.tolist()) == set(range(1, top + 1))
    direct = np.array([sure(x, lam, int(L)) for L, lam in zip(Ls, lams)])
    ok = np.isfinite(vals)
    assert np.allclose(vals[ok], direct[ok], rtol=1e-9, atol=1e-9)
