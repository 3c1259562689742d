import math

import pytest

import p2pbuf


def test_rarest_profile_first_step():
    assert p2pbuf.rarest_first_profile(2, 2) == [0.5, 0.625]


def test_profiles_are_fixed_points():
    for peers, m in [(100, 10), (1000, 50), (10000, 200)]:
        g = p2pbuf.greedy_profile(peers, m)
        assert p2pbuf.residual(g, "greedy", peers) <= 1e-10
        h = p2pbuf.hybrid_profile(peers, m, 0.5)
        assert p2pbuf.residual(h, "hybrid", peers, epsilon=0.5) <= 1e-10
        assert g[0] == 1.0 / peers


def test_hybrid_context():
    threshold, a = p2pbuf.hybrid_context(2, 0.4)
    assert threshold == 1
    assert a == 0.625


def test_select_chunk():
    assert p2pbuf.select_chunk("rarest", [3, 5, 7], 10) == 3
    assert p2pbuf.select_chunk("greedy", [3, 5, 7], 10) == 7
    assert p2pbuf.select_chunk("hybrid", [5, 7, 8], 10, threshold=6) == 5
    assert p2pbuf.select_chunk("hybrid", [7, 8], 10, threshold=6) == 8
    assert p2pbuf.select_chunk("greedy", [], 10) is None
    with pytest.raises(p2pbuf.InvalidArgument):
        p2pbuf.select_chunk("greedy", [10], 10)


def test_thresholds():
    p = [0.1, 0.3, 0.5, 0.9]
    assert p2pbuf.threshold_above(p, 0.3) == 3
    assert p2pbuf.threshold_below(p, 0.5) == 3
    with pytest.raises(p2pbuf.EmptySet):
        p2pbuf.threshold_below(p, 0.05)


def test_fluid_closed_forms():
    assert p2pbuf.rarest_first_fluid_size(10000, 0.99) == pytest.approx(112.80526020710944, rel=1e-12)
    assert p2pbuf.greedy_fluid_size_upper(10000, 0.99) == pytest.approx(1380.5360217110439, rel=1e-12)
    assert p2pbuf.greedy_fluid_size_lower(10000, 0.99, 1.0) < p2pbuf.greedy_fluid_size_upper(10000, 0.99)


def test_bounds():
    assert p2pbuf.universal_lower_bound(1024, 0.5) == 9.0
    assert p2pbuf.rarest_first_lower_bound(10000, 0.999) == pytest.approx(262.6609091234453, rel=1e-12)
    assert p2pbuf.hybrid_sufficient_size(10000, 0.999) == pytest.approx(179.20587179260398, rel=1e-12)
    with pytest.raises(p2pbuf.InvalidArgument):
        p2pbuf.rarest_first_lower_bound(10000, 1.0)


def test_min_buffer_and_sweep():
    m, achieved = p2pbuf.min_buffer("rarest", 1000, 0.9)
    assert achieved >= 0.9
    assert p2pbuf.rarest_first_profile(1000, m - 1)[-1] < 0.9
    assert m >= math.ceil(p2pbuf.universal_lower_bound(1000, 0.9))
    rows = p2pbuf.sweep("hybrid", 1000, [0.9, 0.99], epsilon=0.5)
    assert [r[0] for r in rows] == [0.9, 0.99]
    assert rows[0][1] <= rows[1][1]
    with pytest.raises(p2pbuf.UnreachableTarget):
        p2pbuf.min_buffer("rarest", 1000, 0.999, m_max=20)


def test_simulation_is_seeded():
    a = p2pbuf.run_fixed("rarest", 300, 16, 600, seed=4, replications=2)
    b = p2pbuf.run_fixed("rarest", 300, 16, 600, seed=4, replications=2)
    assert a.replication_estimates == b.replication_estimates
    assert a.empirical_profile[0] == 1.0 / 300
    assert 0.0 < a.skip_free_prob <= 1.0
    assert a.rng_algorithm.startswith("mt19937_64")


def test_churn_simulation():
    r = p2pbuf.run_churn("hybrid", 20, 400, total_peers=400, initially_active=200, rate=0.01, epsilon=0.5)
    assert r.hybrid_threshold is not None
    assert 0.0 <= r.skip_free_prob <= 1.0
