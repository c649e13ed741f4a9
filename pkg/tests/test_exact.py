import math

import numpy as np
import pytest
import scipy.linalg
from scipy import sparse

from cancellative_lab.exact import (MAX_RING_SITES, RingModel, build_generator, check_duality,
                                    check_H_duality, point_mass, transient,
                                    truncated_hatY_analysis)
from cancellative_lab.gf2core import Config, Lattice
from cancellative_lab.models import (RateTable, disagreement_table, interface_table,
                                     rebellious_table, voter_table)
from cancellative_lab.opalgebra import LocalOp, apply, translate


def test_single_entry_table_generator():
    rt = RateTable.build([(LocalOp.from_sites([(0, 0)]), 2.0)])
    Q = build_generator(RingModel.from_table(rt, 3)).toarray()
    # x -> x xor delta_k whenever x(k) = 1: clears site k
    for s in range(8):
        targets = {s & ~(1 << k) for k in range(3) if (s >> k) & 1}
        assert set(np.nonzero(Q[s])[0]) - {s} == targets
        assert Q[s, s] == pytest.approx(-2.0 * len(targets))


def test_empty_table_generator_is_zero():
    Q = build_generator(RingModel.from_table(RateTable.build([]), 5))
    assert Q.nnz == 0
    p0 = point_mass(32, 7)
    assert np.array_equal(transient(Q, p0, 3.0), p0)


def test_exit_rate_counts_disagreements():
    Q = build_generator(RingModel.from_table(rebellious_table(1), 4))
    assert -Q[0b1010, 0b1010] == pytest.approx(4.0)
    assert -Q[0b0011, 0b0011] == pytest.approx(2.0)


def test_generator_rows_sum_to_zero():
    Q = build_generator(RingModel.from_table(rebellious_table(0.3), 10))
    assert np.abs(np.asarray(Q.sum(axis=1))).max() < 1e-12


def test_ring_guards():
    with pytest.raises(ValueError):
        RingModel.from_table(rebellious_table(0.5), 4)
    with pytest.raises(ValueError):
        build_generator(RingModel.from_table(voter_table(), MAX_RING_SITES + 1))
    with pytest.raises(ValueError):
        check_duality(rebellious_table(0.5), 8, 1.0)


def test_transient_matches_matrix_exponential():
    Q = build_generator(RingModel.from_table(rebellious_table(0.35), 6))
    p0 = np.random.default_rng(1).dirichlet(np.ones(64))
    for t in (0.3, 2.0):
        ref = p0 @ scipy.linalg.expm(Q.toarray() * t)
        assert np.abs(transient(Q, p0, t, 1e-12) - ref).max() < 1e-10
    assert np.array_equal(transient(Q, p0, 0.0), p0)


def test_two_state_exponential():
    r = 1.7
    Q = sparse.csr_matrix(np.array([[-r, r], [0.0, 0.0]]))
    for t in (0.1, 1.0, 4.0):
        assert abs(transient(Q, np.array([1.0, 0.0]), t, 1e-12)[0] - math.exp(-r * t)) < 1e-10


def test_pp_table_conserves_parity_mass():
    Y = interface_table(rebellious_table(0.6))
    Q = build_generator(RingModel.from_table(Y, 10))
    p0 = np.random.default_rng(2).dirichlet(np.ones(1 << 10))
    odd = (np.bitwise_count(np.arange(1 << 10)) & 1).astype(bool)
    pt = transient(Q, p0, 1.5)
    assert abs(pt[odd].sum() - p0[odd].sum()) < 1e-10


def test_ts_table_commutes_with_complement():
    n = 8
    Q = build_generator(RingModel.from_table(rebellious_table(0.45), n))
    rng = np.random.default_rng(3)
    w = rng.random(1 << n)
    comp = np.arange(1 << n) ^ ((1 << n) - 1)
    p0 = (w + w[comp]) / (2 * w.sum())
    pt = transient(Q, p0, 1.0)
    assert np.abs(pt - pt[comp]).max() < 1e-12


def test_duality_reports():
    r0 = check_duality(rebellious_table(0.5), 10, 0.0, trials=10)
    assert r0.max_deviation == 0.0
    r = check_duality(voter_table(), 8, 1.0, trials=10)
    assert r.max_deviation <= 1e-8
    rh = check_H_duality(rebellious_table(0.5), 10, 0.7, trials=10)
    assert rh.max_deviation <= 1e-8
    d = rh.to_dict(timing=False)
    assert set(d) == {"identity", "n", "t", "eps", "trials", "max_deviation"}
    assert "runtime_ms" in rh.to_dict()


def test_duality_detects_wrong_dual():
    # a table is generally not dual to itself; the identity must then fail
    from cancellative_lab import exact
    rt = rebellious_table(0.7)
    orig = exact.dual_table
    try:
        exact.dual_table = lambda t: t
        assert exact.check_duality(rt, 10, 1.0, trials=10).max_deviation > 1e-4
    finally:
        exact.dual_table = orig


def test_hat_voter_is_single_state():
    a = truncated_hatY_analysis(interface_table(voter_table()), K=6)
    assert list(a.states) == [1] and a.p_delta0 == 1.0 and a.leakage == 0.0


def test_hat_empty_table_absorbs():
    a = truncated_hatY_analysis(RateTable.build([], R=1, parity=1), K=4)
    assert a.p_delta0 == 1.0 and a.mean_size == 1.0


def test_hat_rejects_tiny_K():
    with pytest.raises(ValueError):
        truncated_hatY_analysis(interface_table(rebellious_table(0.5)), K=1)


def brute_force_hat(rt, K):
    """Independent construction of the truncated chain from LocalOp/Config primitives."""
    lat = Lattice(rt.parity)

    def recentre(c):
        sup = [lat.site_index(d) for d in c.support()]
        return tuple(k - sup[0] for k in sup)

    start = (0,)
    index, order, rates = {start: 0}, [start], {}
    i = 0
    while i < len(order):
        s = order[i]
        x = Config.from_doubled([lat.doubled(k) for k in s], lat)
        for shape, r in rt.entries:
            cols = sorted({lat.site_index(c) for _, c in shape.entries})
            for k in {p - c for p in s for c in cols}:
                A = translate(shape, k)
                y = apply(A, x)
                if not len(y):
                    continue
                t = recentre(x ^ y)
                if t[-1] > K:
                    t = start
                elif t not in index:
                    index[t] = len(order)
                    order.append(t)
                rates[(i, index[t])] = rates.get((i, index[t]), 0.0) + r
        i += 1
    M = len(order)
    Q = np.zeros((M, M))
    for (a, b), r in rates.items():
        if a != b:
            Q[a, b] += r
    Q -= np.diag(Q.sum(axis=1))
    A = np.vstack([Q.T, np.ones(M)])
    b = np.zeros(M + 1)
    b[-1] = 1
    pi = np.linalg.lstsq(A, b, rcond=None)[0]
    return order, pi


@pytest.mark.parametrize("alpha", [0.9, 0.6])
def test_hat_matches_brute_force(alpha):
    Y = interface_table(rebellious_table(alpha))
    K = 7
    order, pi = brute_force_hat(Y, K)
    a = truncated_hatY_analysis(Y, K)
    assert len(a.states) == len(order)
    ref = {s: p for s, p in zip(order, pi)}
    for i in range(len(a.states)):
        assert a.pi[i] == pytest.approx(ref[a.offsets(i)], abs=1e-10)


def test_hat_values_frozen():
    a = truncated_hatY_analysis(interface_table(rebellious_table(0.9)), K=8)
    assert a.p_delta0 == pytest.approx(0.91891, abs=1e-5)
    assert a.mean_size == pytest.approx(1.16929, abs=1e-5)
    assert abs(a.size_distribution(5).sum() - 1) < 1e-9
