import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sensorsel.errors import RankDeficiencyError, ValidationError
from sensorsel.pod import PodBasis
from sensorsel.selection import (OVERSAMPLED, GramState, SensorSet, gram_update_over, gram_update_under, select,
                                 select_dg, select_gappy_r, select_qd, select_qr, select_random)

GREEDY = (select_qr, select_dg, select_qd)


@pytest.mark.parametrize("fn", GREEDY)
def test_single_column(fn):
    assert fn(np.array([[2.0], [1.0]]), 1).indices.tolist() == [0]


@pytest.mark.parametrize("fn", GREEDY)
def test_identity(fn):
    assert fn(np.eye(3), 3).indices.tolist() == [0, 1, 2]


@pytest.mark.parametrize("fn", GREEDY)
def test_worked_example(fn):
    s = fn(np.array([[3.0, 0.0], [0.0, 2.0], [1.0, 1.0]]), 2)
    assert s.indices.tolist() == [0, 1]
    np.testing.assert_allclose(s.step_values, [9.0, 4.0], rtol=1e-14)


@pytest.mark.parametrize("fn", GREEDY)
def test_ties_lowest_index(fn):
    assert fn(np.array([[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]]), 2).indices.tolist() == [0, 1]


def test_identity_four():
    for fn in GREEDY:
        assert fn(np.eye(4), 4).indices.tolist() == [0, 1, 2, 3]


def test_qr_dg_equivalent(rng):
    u = rng.standard_normal((30, 4))
    for p in range(1, 5):
        assert select_qr(u, p).indices.tolist() == select_dg(u, p).indices.tolist()


def test_qd_dg_equivalent(rng):
    u = rng.standard_normal((200, 5))
    a = select_dg(u, 12)
    for seed_method in ("qr", "dg"):
        b = select_qd(u, 12, seed_method=seed_method)
        assert a.indices.tolist() == b.indices.tolist()
        np.testing.assert_allclose(a.step_values, b.step_values, rtol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(5, 40), st.integers(1, 6))
def test_qr_dg_property(seed, n, r):
    r = min(r, n)
    u = np.random.default_rng(seed).standard_normal((n, r))
    assert select_qr(u, r).indices.tolist() == select_dg(u, r).indices.tolist()


def test_step_values_match_determinants(rng):
    u = rng.standard_normal((50, 4))
    s = select_dg(u, 10)
    prev = 0.0
    for k in range(1, 11):
        c = u[s.indices[:k]]
        ld = np.linalg.slogdet(c @ c.T if k <= 4 else c.T @ c)[1]
        assert s.step_values[k - 1] == pytest.approx(math.exp(ld - prev), rel=1e-9)
        prev = ld
    # oversampled gains are 1 + u inv u^T
    assert np.all(s.step_values[4:] >= 1.0)


def test_prefix_property(rng):
    u = rng.standard_normal((60, 5))
    full = select_dg(u, 12)
    for p in (1, 3, 5, 8):
        assert select_dg(u, p).indices.tolist() == full.indices[:p].tolist()
        assert full.prefix(p).p == p


def test_selection_matrix(rng):
    u = rng.standard_normal((10, 3))
    s = select_dg(u, 4)
    h = s.selection_matrix(10)
    np.testing.assert_array_equal(h @ u, u[s.indices])
    # H^T H is a projection
    proj = h.T @ h
    np.testing.assert_array_equal(proj @ proj, proj)


def test_masked_rows_skipped():
    u = np.array([[5.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    b = PodBasis(u, mask=[False, True, True])
    for fn in GREEDY:
        assert 0 not in fn(b, 2).indices.tolist()


@pytest.mark.parametrize("fn", GREEDY)
def test_rank_deficient(fn):
    u = np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]])
    with pytest.raises(RankDeficiencyError):
        fn(u, 2)


@pytest.mark.parametrize("fn", GREEDY)
def test_p_validation(fn):
    with pytest.raises(ValidationError):
        fn(np.eye(3), 4)
    with pytest.raises(ValidationError):
        fn(np.eye(3), 0)


# Gram updates ---------------------------------------------------------------

def test_under_from_empty():
    st_ = gram_update_under(GramState.empty(), np.zeros((0, 2)), [2.0, 0.0])
    np.testing.assert_allclose(st_.inv, [[0.25]])
    assert st_.logdet == pytest.approx(math.log(4.0))


def test_under_second_row():
    st_ = GramState("undersampled", np.array([[1.0]]), 0.0)
    new = gram_update_under(st_, np.array([[1.0, 0.0]]), [0.0, 3.0])
    np.testing.assert_allclose(new.inv, np.diag([1.0, 1.0 / 9.0]), atol=1e-15)


def test_under_zero_row():
    st_ = GramState("undersampled", np.eye(2), 0.0)
    with pytest.raises(RankDeficiencyError):
        gram_update_under(st_, np.eye(2), [0.0, 0.0])


def test_over_example():
    new = gram_update_over(GramState(OVERSAMPLED, np.eye(1), 0.0), [1.0])
    np.testing.assert_allclose(new.inv, [[0.5]])
    assert new.logdet == pytest.approx(math.log(2.0))


def test_updates_vs_direct(rng):
    c = rng.standard_normal((1, 6))
    st_ = GramState("undersampled", np.linalg.inv(c @ c.T), float(np.log(c @ c.T)[0, 0]))
    for _ in range(5):
        u = rng.standard_normal(6)
        st_ = gram_update_under(st_, c, u)
        c = np.vstack([c, u])
        np.testing.assert_allclose(st_.inv, np.linalg.inv(c @ c.T), rtol=1e-8, atol=1e-10)
        assert st_.logdet == pytest.approx(np.linalg.slogdet(c @ c.T)[1], rel=1e-10)
    g = c.T @ c
    st_ = GramState(OVERSAMPLED, np.linalg.inv(g), np.linalg.slogdet(g)[1])
    for _ in range(5):
        u = rng.standard_normal(6)
        st_ = gram_update_over(st_, u)
        c = np.vstack([c, u])
        np.testing.assert_allclose(st_.inv, np.linalg.inv(c.T @ c), rtol=1e-8, atol=1e-10)


# random and gappy-r ------------------------------------------------------------

def test_random_basic():
    s = select_random(10, 10, seed=3)
    assert sorted(s.indices.tolist()) == list(range(10))
    assert select_random(100, 7, seed=5).indices.tolist() == select_random(100, 7, seed=5).indices.tolist()
    assert select_random(100, 7, seed=5).indices.tolist() != select_random(100, 7, seed=6).indices.tolist()


def test_random_mask():
    s = select_random(5, 2, mask=[False, True, False, True, False], seed=0)
    assert sorted(s.indices.tolist()) == [1, 3]


def test_random_uniformity():
    # 1000 seeds, n=10000, p=20; per-index counts are far too sparse for a
    # per-index bound, so counts are pooled into 10 blocks of 1000 indices
    # (3-sigma binomial band each) plus a chi-square test over 100 blocks.
    n, p, seeds = 10_000, 20, 1000
    counts = np.zeros(n)
    for s in range(seeds):
        counts[select_random(n, p, seed=s).indices] += 1
    draws = p * seeds
    big = counts.reshape(10, -1).sum(axis=1)
    q = 0.1
    sigma = math.sqrt(draws * q * (1 - q))
    assert np.all(np.abs(big - draws * q) <= 3 * sigma)
    small = counts.reshape(100, -1).sum(axis=1)
    assert stats.chisquare(small).pvalue > 1e-3


def test_gappy_r(rng):
    u = rng.standard_normal((40, 4))
    qr = select_qr(u, 4)
    g = select_gappy_r(u, 9, seed=1)
    assert g.indices[:4].tolist() == qr.indices.tolist()
    assert len(set(g.indices.tolist())) == 9
    assert select_gappy_r(u, 9, seed=1).indices.tolist() == g.indices.tolist()
    assert select_gappy_r(u, 3).indices.tolist() == qr.indices[:3].tolist()


def test_dispatch(rng):
    u = rng.standard_normal((20, 3))
    for m in ("qr", "dg", "qd", "random", "gappy-r"):
        assert select(u, 5, m).p == 5
    with pytest.raises(ValidationError):
        select(u, 5, "nope")


def test_sensorset_validation():
    with pytest.raises(ValidationError):
        SensorSet([1, 1], [0, 0])
    with pytest.raises(ValidationError):
        SensorSet([1], [0, 0])
