import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from mdla._paths import direction, holding
from mdla.core import SimConfig, WindowBudgetError, simulate_1d
from mdla.highdim import (
    AggregateSet,
    conforming_count,
    race_monte_carlo,
    race_stats,
    simulate_d,
    speed_threshold,
)
from mdla.walk import max_zero_prob, walk_pmf

from oracles import naive_mdla_2d


def test_zero_density_keeps_origin():
    rec = simulate_d(SimConfig(0.0, 50.0, dimension=2))
    assert rec.aggregate.occupied == {(0, 0)}
    assert rec.diameter_at(50.0) == 0
    assert rec.front.value(50.0) == 0


def test_rejects_one_dimension():
    with pytest.raises(ValueError):
        simulate_d(SimConfig(1.0, 1.0))


def test_grid_budget_error():
    with pytest.raises(WindowBudgetError):
        simulate_d(SimConfig(2.0, 5e3, dimension=2))


def test_matches_naive_gillespie():
    k, t, n = 1.0, 3.0, 500
    ours = []
    for r in range(n):
        rec = simulate_d(SimConfig(k, t, master_seed=4000 + r, dimension=2))
        ours.append((rec.front.value(t), len(rec.aggregate.sites), rec.diameter_at(t)))
    ref = [naive_mdla_2d(k, t, 70_000 + r, half=10) for r in range(n)]
    ours, ref = np.array(ours, float), np.array(ref, float)
    for j in range(3):
        se = math.sqrt(ours[:, j].var() / n + ref[:, j].var() / n)
        assert abs(ours[:, j].mean() - ref[:, j].mean()) < 4 * se


@pytest.mark.parametrize("d", [2, 3])
def test_free_coordinate_is_a_rate_one_walk(d):
    # adhesion off: each coordinate of a particle moves at rate 1
    t = 3.0
    rec = simulate_d(SimConfig(3.0, t, master_seed=11, dimension=d, adhesion=False, record_particles=True))
    tab = rec.particle_history
    disp = (tab.positions_at(t) - tab.site)[:, 0]
    assert disp.size > 2000
    law = walk_pmf(t)
    ks = np.arange(-4, 5)
    obs = np.array([np.sum(disp == k) for k in ks] + [np.sum(np.abs(disp) > 4)])
    p = np.array([law.pmf(k) for k in ks])
    exp = np.append(p, 1 - p.sum()) * disp.size
    assert np.sum((obs - exp) ** 2 / exp) < stats.chi2.ppf(0.999, len(obs) - 1)


@pytest.fixture(scope="module")
def run2d():
    return simulate_d(SimConfig(2.0, 12.0, master_seed=7, dimension=2, record_particles=True))


def test_aggregate_is_connected_and_grows(run2d):
    agg = run2d.aggregate
    assert tuple(agg.sites[0]) == (0, 0) and agg.join_times[0] == 0.0
    assert len(agg.occupied) == len(agg.sites)
    assert np.all(np.diff(agg.join_times) >= 0)
    seen = {(0, 0)}
    for s in agg.sites[1:]:
        s = tuple(int(c) for c in s)
        assert any((s[0] + a, s[1] + b) in seen for a, b in ((1, 0), (-1, 0), (0, 1), (0, -1)))
        seen.add(s)


def test_series_agree_with_aggregate(run2d):
    ds = run2d.diameter_series
    assert np.all(np.diff(ds[:, 1]) >= 0) and np.all(np.diff(ds[:, 2]) >= 0)
    for t in np.linspace(0, 12.0, 25):
        now = run2d.aggregate.at(t)
        assert run2d.diameter_at(t) == now.diameter
        assert run2d.front.value(t) == now.rightmost_first_coord
        assert run2d.rightmost_at(t)[0] == now.rightmost_first_coord
        assert run2d.rightmost_at(t) == now.rightmost


def test_active_particles_avoid_aggregate(run2d):
    tab = run2d.particle_history
    for t in (3.0, 12.0):
        occ = run2d.aggregate.at(t).occupied
        live = tab.t_freeze > t
        assert not any(tuple(int(c) for c in z) in occ for z in tab.positions_at(t)[live])
    frozen = np.isfinite(tab.t_freeze) & (tab.t_freeze >= 0)
    occ = run2d.aggregate.occupied
    assert all(tuple(int(c) for c in z) in occ for z in tab.positions_at(12.0)[frozen])


def test_rightmost_tie_break():
    agg = AggregateSet(np.array([[0, 0], [1, 0], [1, 1], [1, -1]]), np.array([0.0, 2.0, 1.0, 3.0]))
    assert agg.rightmost == (1, 1)
    assert agg.rightmost_first_coord == 1
    assert agg.diameter == 2
    assert agg.at(1.5).occupied == {(0, 0), (1, 1)}
    with pytest.raises(ValueError):
        AggregateSet(np.zeros((2, 2)), np.zeros(1))


def test_domination_of_one_dimension():
    # the d = 2 front is at least the 1D front, statistically
    k, T, n = 2.0, 15.0, 12
    ts = np.array([5.0, 10.0, 15.0])
    x2 = np.array([simulate_d(SimConfig(k, T, master_seed=r, dimension=2)).front.value(ts) for r in range(n)], float)
    x1 = np.array([simulate_1d(SimConfig(k, T, master_seed=500 + r)).front.value(ts) for r in range(n)], float)
    se = np.sqrt(x2.var(axis=0) / n + x1.var(axis=0) / n)
    assert np.all(x2.mean(axis=0) >= x1.mean(axis=0) - 3 * se)


def test_reduced_scale_diameter_growth():
    # full-scale linear diameter growth is out of reach of the grid budget; this is the small-scale check
    T = 40.0
    rates = []
    for r in range(3):
        rec = simulate_d(SimConfig(2.0, T, master_seed=r, dimension=2))
        d_half, d_full = rec.diameter_at(T / 2), rec.diameter_at(T)
        rates.append((d_full / T, d_half / (T / 2), (d_full - d_half) / (T / 2)))
    rates = np.array(rates)
    print(f"d=2 K=2 T={T:g}: diameter/T {rates[:, 0]}, half-window rates {rates[:, 1].mean():.3f} / {rates[:, 2].mean():.3f}")
    assert np.all(rates[:, 0] > 0)


# ------------------------------------------------------------ conforming


def _conforming_brute(run, t):
    """Offsets of conforming particles by replaying each path piece by piece."""
    tab = run.particle_history
    jt = run.front.jump_times
    d = tab.dimension
    x_t = int(np.sum(jt <= t))
    out = []
    for i in range(len(tab)):
        if tab.t_freeze[i] <= t:
            continue
        z = tab.site[i].copy()
        tau, k, ok = 0.0, 0, True
        while ok:
            nxt = tau + holding(tab.key[i], k, float(d))
            # sup of X over the piece: just before the next move, or X_t on the last piece
            x_sup = x_t if nxt >= t else int(np.sum(jt < nxt))
            ok = z[0] > x_sup
            if nxt >= t:
                break
            dirn = direction(tab.key[i], k, 2 * d)
            z[dirn // 2] += 1 if dirn % 2 == 0 else -1
            tau, k = nxt, k + 1
        if ok:
            out.append(int(z[0]) - x_t)
    return np.array(out, dtype=int)


@pytest.mark.parametrize("t", [0.0, 2.0, 6.0, 12.0])
def test_conforming_matches_replay(run2d, t):
    counts, cols = conforming_count(run2d, t, max_offset=15)
    assert cols is None
    brute = _conforming_brute(run2d, t)
    assert np.array_equal(counts, np.bincount(brute, minlength=16)[1:16])


def test_conforming_at_time_zero(run2d):
    tab = run2d.particle_history
    counts, _ = conforming_count(run2d, 0.0, max_offset=5)
    expect = [np.sum(tab.site[:, 0] == j) for j in range(1, 6)]
    assert list(counts) == expect


def test_frozen_particles_never_conform(run2d):
    tab = run2d.particle_history
    t = 12.0
    live = tab.t_freeze > t
    counts, _ = conforming_count(run2d, t, max_offset=200)
    x_t = run2d.front.value(t)
    offs = tab.positions_at(t)[live][:, 0] - x_t
    assert counts.sum() <= np.sum(offs >= 1)


def test_conforming_intensity_at_first_column():
    # on {X_1 = 0} each column at offset 1 holds Poisson(K P[M_1 = 0]) conforming particles
    k, t, radius = 2.0, 1.0, 2
    per_col = []
    for r in range(1500):
        rec = simulate_d(SimConfig(k, t, master_seed=10_000 + r, dimension=2, record_particles=True))
        if rec.front.value(t) != 0:
            continue
        counts, cols = conforming_count(rec, t, max_offset=1, transverse_radius=radius)
        per_col.append(counts[0] / cols)
    per_col = np.array(per_col)
    assert per_col.size > 150
    target = k * max_zero_prob(t)
    se = math.sqrt(target / (per_col.size * (2 * radius + 1)))
    assert abs(per_col.mean() - target) < 3 * se


def test_conforming_needs_history():
    rec = simulate_d(SimConfig(1.0, 2.0, dimension=2))
    with pytest.raises(ValueError):
        conforming_count(rec, 1.0)


# ---------------------------------------------------------------- race


def test_race_closed_form_values():
    r = race_stats(1.0, 2)
    assert r.p_race == pytest.approx(1 / 9, abs=1e-15)
    assert r.expected_increment_time == pytest.approx(8 / 9, abs=1e-15)
    g = 1e-9
    assert g * race_stats(g, 2).expected_increment_time == pytest.approx(5 / 6, abs=1e-8)
    assert g * race_stats(g, 10**6).expected_increment_time == pytest.approx(3 / 4, abs=1e-6)


@pytest.mark.parametrize("d", [2, 3, 4, 7])
def test_small_gamma_limit_is_threshold(d):
    g = 1e-10
    assert g * race_stats(g, d).expected_increment_time == pytest.approx(float(speed_threshold(d)), abs=1e-9)


@given(st.floats(1e-3, 1e3), st.integers(2, 50))
def test_race_invariants(gamma, d):
    r = race_stats(gamma, d)
    assert 0 <= r.p_race <= 1
    assert r.expected_increment_time == pytest.approx((1 - r.p_race) / gamma, rel=1e-12)
    assert race_stats(gamma * 1.5, d).p_race < r.p_race
    assert race_stats(gamma, d + 1).p_race > r.p_race


@pytest.mark.parametrize("d,gamma", [(2, 1.0), (2, 0.01), (3, 1.0), (3, 0.3)])
def test_race_monte_carlo_agrees(d, gamma):
    exact = race_stats(gamma, d)
    mc = race_monte_carlo(gamma, d, 400_000, np.random.default_rng(d * 100 + int(gamma * 10)))
    assert abs(mc.p_race - exact.p_race) < 3.5 * mc.p_stderr
    assert abs(mc.expected_increment_time - exact.expected_increment_time) < 3.5 * mc.time_stderr


def test_race_large_gamma():
    mc = race_monte_carlo(1e4, 2, 100_000, np.random.default_rng(1))
    assert mc.p_race < 1e-3
    assert mc.expected_increment_time == pytest.approx(1e-4, rel=0.02)


@pytest.mark.parametrize("gamma,d,n", [(0.0, 2, 10**4), (1.0, 1, 10**4), (1.0, 2, 100), (-1.0, 2, 10**4), (1.0, 2.5, 10**4)])
def test_race_rejects(gamma, d, n):
    with pytest.raises(ValueError):
        race_monte_carlo(gamma, d, n, np.random.default_rng(0))


def test_speed_threshold():
    assert speed_threshold(2) == Fraction(5, 6)
    assert speed_threshold(3) == Fraction(4, 5)
    vals = [speed_threshold(d) for d in range(2, 60)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert all(v > Fraction(3, 4) for v in vals)
    assert abs(float(speed_threshold(10**6)) - 0.75) < 1e-6
    with pytest.raises(ValueError):
        speed_threshold(1)
