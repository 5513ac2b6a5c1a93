import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles as O
from brickmix.analysis import (B0, B1, B2, BCOLL, BSAFE, COLL1, SAFE1, classify_1d, classify_2d,
                               classify_window, collision_witness_stats, color_labels,
                               distinct_pair_distance_pmf, distinct_size, escape_probability,
                               hoeffding_halfwidth, hybrid_tv_row, kwise_epsilon_exact, mean_interval,
                               mixing_curve, product_bound_check, region_mask, regions_1d, regions_2d,
                               regions_window, symmetry_representatives, tv_linear_form)
from brickmix.architectures import ArchDescriptor
from brickmix.bitcore import TupleState, pack_tuple
from brickmix.errors import ModelError, ParameterError, StructureError
from brickmix.walkops import (DenseOperator, Identity, descriptor_operator, op_2d, op_brickwork_layer,
                              op_mix_Q, op_mix_R, op_Q, op_R)

# exact rows of the oracle matrices in oracles.py
BRICKWORK_EPS_4_2 = [0.9041666666666666, 0.6785493827160491, 0.5309756515775033]
HYBRID_MIX_MAX = {3: 0.25, 4: 0.12499999999999994}
HYBRID_FULL_MAX = {3: 0.0714285714285714, 4: 0.04583333333333332}
ESCAPE_B1_MAX = {4: 0.21428571428571427, 5: 0.16}
BCOLL_ROW_COLUMN = 0.5185185185185179
GRGC_EPS = [0.26666666666666666, 0.05267489711934068, 0.010404917949499513]


def T(*strings):
    return TupleState.from_strings(strings)


def test_classify_examples():
    assert classify_1d(T("00", "00")).tag == B0
    assert classify_1d(T("00", "01")).tag == B1
    assert classify_1d(T("00", "11")).tag == B2
    assert classify_window(T("000", "001"), [1, 2]).tag == COLL1
    assert classify_window(T("011", "011"), [1, 2]).tag == B0
    assert classify_window(T("000", "110"), [1, 2]).tag == SAFE1
    c = classify_2d(T("0001", "0010"))
    assert c.tag == BCOLL and c.partitions[0] == ((1, 2),)
    assert classify_2d(T("0001", "1110")).tag == BSAFE
    assert classify_2d(T("0110", "0110")).tag == B0
    with pytest.raises(ParameterError):
        classify_2d(T("010", "011"))


@settings(deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.data())
def test_regions_partition(n, k, data):
    N = 1 << (n * k)
    states = np.array(data.draw(st.lists(st.integers(0, N - 1), min_size=1, max_size=20)))
    tags = regions_1d(n, k, states)
    for X, tag in zip(states, tags):
        assert tag == O.region_of(int(X), n, k)
    masks = [region_mask(n, k, t, states) for t in (B0, B1, B2)]
    assert np.array_equal(sum(m.astype(int) for m in masks), np.ones(len(states), int))
    window = data.draw(st.lists(st.integers(1, n), min_size=1, unique=True))
    wt = regions_window(n, k, window, states)
    assert set(wt) <= {B0, COLL1, SAFE1}


def test_k1_has_no_collisions():
    tags = regions_1d(3, 1)
    assert set(tags) == {B2}


@pytest.mark.parametrize("side", [2, 3])
def test_bcoll_ratio(side):
    k, n = 2, side * side
    tags = regions_2d(side, k)
    coll = int((tags == BCOLL).sum())
    D = distinct_size(n, k)
    ref = sum(1 for X in range(1 << (n * k)) if O.min_pair_distance(X, n, k) > 0 and O.row_collision(X, side, k))
    assert coll == ref
    assert Fraction(coll, D) <= Fraction(2 * side * k * k, 2 ** side)


def test_color_classes():
    side, k = 2, 2
    labels = color_labels(side, k)
    classes = {classify_2d(TupleState(4, 2, X)).partitions for X in range(256)}
    assert len(np.unique(labels)) == len(classes) == 4
    assert len(classes) <= k ** (k * side)


def test_color_labels_invariant_under_row_walk():
    side, k = 2, 3
    lab = color_labels(side, k)
    A = op_2d("GR", side, k)
    rng = np.random.default_rng(0)
    X = rng.integers(0, 1 << 12, 200)
    assert np.array_equal(lab[A.sample(X, rng)], lab[X])


def test_kwise_examples():
    for n, k in [(2, 1), (3, 2), (2, 3), (4, 2)]:
        r = kwise_epsilon_exact(op_R(n, range(1, n + 1), k), exact=True)
        assert r.epsilon == 0
    r = kwise_epsilon_exact(Identity(2, 1), exact=True)
    assert r.epsilon == Fraction(3, 4) and r.distinct_size == 4
    assert kwise_epsilon_exact(Identity(3, 2)).epsilon == pytest.approx(1 - 1 / 56, abs=1e-15)


def test_kwise_brickwork_matches_oracle():
    L = op_brickwork_layer(4, 2)
    for t, want in enumerate(BRICKWORK_EPS_4_2, start=1):
        assert kwise_epsilon_exact(L, t=t).epsilon == pytest.approx(want, abs=1e-12)
    ex = kwise_epsilon_exact(L, t=2, exact=True)
    assert float(ex.epsilon) == pytest.approx(BRICKWORK_EPS_4_2[1], abs=1e-14)


def test_kwise_symmetry_matches_full_sweep():
    L = op_brickwork_layer(4, 2)
    for t in (1, 3):
        full = kwise_epsilon_exact(L, t=t)
        fast = kwise_epsilon_exact(L, t=t, symmetry=True)
        assert fast.epsilon == pytest.approx(full.epsilon, abs=1e-13)
        assert fast.weights.sum() == full.distinct_size
        lookup = dict(zip(full.starts.tolist(), full.tv))
        assert all(abs(lookup[int(X)] - tv) < 1e-13 for X, tv in zip(fast.starts, fast.tv))


def test_symmetry_rejects_non_commuting():
    A = op_mix_R(3, 2, 2).dense().copy()
    rng = np.random.default_rng(1)
    P = np.eye(64)[rng.permutation(64)]
    with pytest.raises(StructureError):
        symmetry_representatives(DenseOperator(3, 2, P @ A @ P.T, stochastic=True))


def _reverse_wires(n, k):
    idx = np.arange(1 << (n * k))
    out = np.zeros_like(idx)
    for i in range(k):
        for a in range(n):
            out |= ((idx >> (i * n + a)) & 1) << (i * n + n - 1 - a)
    return out


@pytest.mark.parametrize("kind,n", [("nn1d", 4), ("fullyrandom", 4), ("nn1d", 5)])
def test_kwise_conjugation_invariant(kind, n):
    k = 2
    op = descriptor_operator(ArchDescriptor(kind, n, 1), k)
    assert 1 << (n * k) <= 1024
    A = op.dense()
    P = np.eye(op.N)[_reverse_wires(n, k)]
    B = DenseOperator(n, k, P @ A @ P.T, stochastic=True)
    assert np.allclose(B.dense(), A, atol=1e-14)
    for t in (1, 2):
        assert kwise_epsilon_exact(B, t=t).epsilon == pytest.approx(kwise_epsilon_exact(op, t=t).epsilon, abs=1e-13)


def test_kwise_model_error():
    with pytest.raises(ModelError):
        kwise_epsilon_exact(op_Q(3, [1, 2], 2))
    with pytest.raises(ModelError):
        kwise_epsilon_exact(op_Q(3, [1, 2], 2), exact=True)


def test_kwise_rows_and_dict():
    r = kwise_epsilon_exact(op_brickwork_layer(3, 2))
    d = r.to_dict(table=True)
    assert d["distinct_size"] == 56 and len(d["per_start"]) == 56
    assert 0 <= d["epsilon"] <= 1


def test_mixing_curve_small():
    c = mixing_curve(op_brickwork_layer(4, 2), 12)
    assert c.epsilon[0] == pytest.approx(1 - 1 / 240, abs=1e-15)
    assert all(b <= a + 1e-15 for a, b in zip(c.epsilon, c.epsilon[1:]))
    assert all(e <= v for e, v in zip(c.epsilon, c.envelope))
    assert c.epsilon[1:4] == pytest.approx(BRICKWORK_EPS_4_2, abs=1e-12)
    assert [r["t"] for r in c.rows()] == list(range(13))


def test_hybrid_rows():
    A = op_mix_R(4, 3, 2)
    X = pack_tuple(["0000", "0011"])
    assert hybrid_tv_row(A, A, X, B2) == 0
    for m in (3, 4):
        k = 2
        Rm, Qm = op_mix_R(m, m - 1, k), op_mix_Q(m, m - 1, k)
        Rf, Qf = op_R(m, range(1, m + 1), k), op_Q(m, range(1, m + 1), k)
        starts = np.flatnonzero(region_mask(m, k, B2))
        mix = max(hybrid_tv_row(Rm, Qm, int(X), B2) for X in starts)
        full = max(hybrid_tv_row(Rf, Qf, int(X), B2) for X in starts)
        assert mix == pytest.approx(HYBRID_MIX_MAX[m], abs=1e-12)
        assert full == pytest.approx(HYBRID_FULL_MAX[m], abs=1e-12)
        assert mix <= k * k / 2 ** (m - 1) and full <= k * k / 2 ** m
    exact = hybrid_tv_row(op_R(4, range(1, 5), 2), op_Q(4, range(1, 5), 2), X, B2, exact=True)
    assert float(exact) == pytest.approx(HYBRID_FULL_MAX[4], abs=1e-15)


def test_tv_linear_form():
    A, B = op_mix_R(3, 2, 2), op_mix_Q(3, 2, 2)
    Ad, Bd = A.dense(), B.dense()
    for X in np.flatnonzero(region_mask(3, 2, "D")):
        assert tv_linear_form(A, B, int(X)) == pytest.approx(0.5 * np.abs(Ad[X] - Bd[X]).sum(), abs=1e-14)


def test_escape_exact():
    for m in (3, 4):
        for op in (op_mix_R(m, m - 1, 2), op_R(m, range(1, m + 1), 2), op_brickwork_layer(m, 2)):
            for X in np.flatnonzero(region_mask(m, 2, "D")):
                assert escape_probability(op, int(X), B0, exact_rational=True) == 0
    for m in (4, 5):
        op = op_mix_R(m, m - 1, 2)
        vals = [escape_probability(op, int(X), B1) for X in np.flatnonzero(region_mask(m, 2, B2))]
        assert max(vals) == pytest.approx(ESCAPE_B1_MAX[m], abs=1e-12)
        assert max(vals) <= 4 * m / 2 ** (m - 1)
    X = pack_tuple(["0000", "0011"])
    assert escape_probability(op_mix_R(4, 3, 2), X, B1, exact_rational=True) == Fraction(3, 14)


def test_escape_mc():
    op = op_2d("GR", 2, 2) @ op_2d("GC", 2, 2)
    X = pack_tuple(["0000", "0001"])
    exact = escape_probability(op, X, BCOLL)
    assert exact == pytest.approx(BCOLL_ROW_COLUMN, abs=1e-12)
    est = escape_probability(op, X, BCOLL, mode="mc", trials=10 ** 6, seed=123)
    assert est.contains(exact)
    assert est.ci_hi - est.ci_lo == pytest.approx(2 * hoeffding_halfwidth(10 ** 6), abs=1e-12)
    again = escape_probability(op, X, BCOLL, mode="mc", trials=10 ** 6, seed=123)
    assert again == est
    with pytest.raises(ParameterError):
        escape_probability(op, X, BCOLL, mode="mc", trials=10)


def test_grid_walk_decays():
    op = op_2d("GR", 2, 2) @ op_2d("GC", 2, 2)
    prev = None
    for t, want in enumerate(GRGC_EPS, start=1):
        r = kwise_epsilon_exact(op, t=t)
        assert r.epsilon == pytest.approx(want, abs=1e-12)
        if prev is not None:
            assert all(b < a for a, b in zip(prev.tv, r.tv))
        prev = r


def test_hoeffding():
    assert hoeffding_halfwidth(100, 0.99) == pytest.approx(math.sqrt(math.log(200) / 200))
    est = mean_interval(np.array([0.0, 1.0, 1.0, 0.0]), 0, 1, 0.9, seed=None)
    assert est.estimate == 0.5 and est.ci_lo == 0.0 and est.ci_hi == 1.0
    with pytest.raises(ParameterError):
        hoeffding_halfwidth(0)


def test_collision_side1():
    s = collision_witness_stats(1, 2, 500, seed=4)
    pmf = [r for r in s.rows if r["quantity"] == "distance_pmf"]
    assert [r["value"] for r in pmf] == [0, 1]
    assert pmf[1]["estimate"] == 1.0


def test_collision_side4():
    s = collision_witness_stats(4, 2, 10 ** 6, seed=8)
    rows = {r["quantity"]: r for r in s.rows if r["quantity"] != "distance_pmf"}
    pmf = distinct_pair_distance_pmf(4)
    near = rows["distance_le_side_over_4"]
    assert near["exact"] == pytest.approx(pmf[0] + pmf[1]) == pytest.approx(4 / 15)
    assert near["ci_lo"] <= near["exact"] <= near["ci_hi"]
    mean = rows["distance_mean"]
    assert mean["exact"] == pytest.approx(sum(d * p for d, p in enumerate(pmf)))
    assert mean["ci_lo"] <= mean["exact"] <= mean["ci_hi"]


def test_collision_bcoll_exact():
    s = collision_witness_stats(2, 2, 20000, seed=2, start=pack_tuple(["0000", "0001"]))
    row = [r for r in s.rows if r["quantity"] == "bcoll_after_row_column"][0]
    assert row["exact"] == pytest.approx(BCOLL_ROW_COLUMN, abs=1e-12)
    assert row["ci_lo"] <= row["exact"] <= row["ci_hi"]


def test_pair_distance_pmf_oracle():
    for side in (1, 2, 3, 5):
        counts = np.zeros(side + 1)
        for a in range(1 << side):
            for b in range(1 << side):
                if a != b:
                    counts[bin(a ^ b).count("1")] += 1
        assert np.allclose(distinct_pair_distance_pmf(side), counts / counts.sum())


def test_product_bound_examples():
    r = product_bound_check(4, 2)
    assert r.holds and r.lhs == Fraction(4, 3) and r.rhs == 2
    r = product_bound_check(10, 0)
    assert r.holds and r.lhs == r.rhs == 1
    with pytest.raises(ParameterError):
        product_bound_check(8, 3)


def test_product_bound_sweep():
    for N in range(1, 1025):
        for k in range(0, math.isqrt(N) + 1):
            assert product_bound_check(N, k).holds
