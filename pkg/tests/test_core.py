import math

import numpy as np
import pytest
from scipy import stats

from mdla.core import SimConfig, WindowBudgetError, s_estimate, s_lower_bound, simulate_1d
from mdla.front import FrontPath, y_query
from mdla.rng import replica_seed
from mdla.runner import k_key
from mdla.walk import max_zero_prob, sample_walk_paths, walk_pmf

from oracles import front_barrier_steps, naive_mdla_1d, replay_mdla_1d, survival_below_steps


def test_zero_density_never_moves():
    rec = simulate_1d(SimConfig(0.0, 100.0, master_seed=1))
    assert rec.front.jump_times.size == 0
    assert rec.event_count == 0
    assert rec.front.value(100.0) == 0


def test_zero_horizon():
    rec = simulate_1d(SimConfig(3.0, 0.0, master_seed=1, record_particles=True))
    assert rec.front.jump_times.size == 0
    assert len(rec.particle_history) == 0


@pytest.mark.parametrize(
    "kw",
    [dict(k_density=-1.0, horizon=1.0), dict(k_density=1.0, horizon=-1.0), dict(k_density=1.0, horizon=1.0, leakage_tol=0.0),
     dict(k_density=2.0, horizon=1.0, thin_from=1.0), dict(k_density=1.0, horizon=1.0, dimension=0)],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_simulate_1d_rejects_higher_dimension():
    with pytest.raises(ValueError):
        simulate_1d(SimConfig(1.0, 1.0, dimension=2))


def test_window_budget_error():
    with pytest.raises(WindowBudgetError):
        simulate_1d(SimConfig(3.0, 1e4, max_particles=1000))


def test_same_seed_same_run():
    a = simulate_1d(SimConfig(2.0, 200.0, master_seed=9))
    b = simulate_1d(SimConfig(2.0, 200.0, master_seed=9))
    assert np.array_equal(a.front.jump_times, b.front.jump_times)
    c = simulate_1d(SimConfig(2.0, 200.0, master_seed=10))
    assert not np.array_equal(a.front.jump_times, c.front.jump_times)


def test_front_is_unit_step_and_leakage_reported():
    rec = simulate_1d(SimConfig(3.0, 500.0, master_seed=4))
    assert np.all(np.diff(rec.front.jump_times) >= 0)
    assert np.array_equal(rec.front.positions, np.arange(1, rec.front.positions.size + 1))
    assert 0 <= rec.leakage_bound <= 1e-3
    assert rec.frozen_count >= rec.front.positions.size


@pytest.mark.parametrize("k,t_end", [(1.0, 10.0), (3.0, 5.0)])
def test_front_law_matches_naive_gillespie(k, t_end):
    n = 600
    ours = np.array([simulate_1d(SimConfig(k, t_end, master_seed=1000 + r)).front.value(t_end) for r in range(n)])
    ref = np.array([len(naive_mdla_1d(k, t_end, 50_000 + r)) for r in range(n)])
    se = math.sqrt(ours.var() / n + ref.var() / n)
    assert abs(ours.mean() - ref.mean()) < 4 * se
    assert stats.ks_2samp(ours, ref).pvalue > 1e-3


def test_free_particle_displacement_is_exact():
    # adhesion off: the front stays at 0 and particles are free walkers
    t = 4.0
    disp = []
    r = 0
    while sum(map(len, disp)) < 100_000:
        rec = simulate_1d(SimConfig(40.0, t, master_seed=77 + r, adhesion=False, record_particles=True))
        tab = rec.particle_history
        assert rec.front.jump_times.size == 0
        disp.append(tab.positions_at(t) - tab.site)
        r += 1
    disp = np.concatenate(disp)
    law = walk_pmf(t)
    ks = np.arange(-6, 7)
    obs = np.array([np.sum(disp == k) for k in ks] + [np.sum(np.abs(disp) > 6)])
    p = np.array([law.pmf(k) for k in ks])
    exp = np.append(p, 1 - p.sum()) * disp.size
    chi2 = np.sum((obs - exp) ** 2 / exp)
    assert chi2 < stats.chi2.ppf(0.999, len(obs) - 1)


def test_positions_match_trajectory_replay():
    rec = simulate_1d(SimConfig(2.0, 50.0, master_seed=5, record_particles=True))
    tab = rec.particle_history
    pos = tab.positions_at(30.0)
    for i in range(0, len(tab), max(1, len(tab) // 40)):
        times, zs = tab.trajectory(i, 30.0)
        assert zs[-1] == pos[i]
        assert np.all(np.abs(np.diff(zs)) == 1)


def test_active_particles_stay_off_the_aggregate():
    rec = simulate_1d(SimConfig(3.0, 80.0, master_seed=12, record_particles=True))
    tab = rec.particle_history
    for t in (10.0, 40.0, 80.0):
        live = tab.active_at(t) & (tab.t_freeze >= 0)
        assert np.all(tab.positions_at(t)[live] > rec.front.value(t))
    frozen = np.isfinite(tab.t_freeze) & (tab.t_freeze >= 0)
    # every particle freezes on a site that joined the aggregate at that instant
    assert np.all(tab.positions_at(80.0)[frozen] == rec.front.value(tab.t_freeze[frozen]))


@pytest.mark.parametrize("k", [0.5, 3.0])
def test_poisson_domination_small_scale(k):
    T, n = 300.0, 60
    ts = np.array([60.0, 150.0, 300.0])
    x = np.array([simulate_1d(SimConfig(k, T, master_seed=300 + r)).front.value(ts) for r in range(n)], float)
    assert np.all(x.mean(axis=0) <= k * ts + 3 * np.sqrt(k * ts / n))
    assert x[:, -1].mean() > 0


def test_thinned_front_is_slower_on_average():
    T = 400.0
    hi, lo = [], []
    for r in range(30):
        hi.append(simulate_1d(SimConfig(3.0, T, master_seed=r)).front.value(T))
        lo.append(simulate_1d(SimConfig(1.0, T, master_seed=r, thin_from=3.0)).front.value(T))
    assert np.mean(lo) < np.mean(hi)


@pytest.mark.parametrize("k,thin_from,seed", [(2.0, None, 1), (0.7, None, 2), (1.0, 3.0, 3), (3.0, None, 4)])
def test_lazy_run_equals_eager_replay(k, thin_from, seed):
    T = 25.0
    rec = simulate_1d(SimConfig(k, T, master_seed=seed, thin_from=thin_from))
    k_field = thin_from or k
    ref = replay_mdla_1d(seed, k_field, k / k_field, T, n_sites=int(k_field * T) + 60)
    assert np.array_equal(rec.front.jump_times, ref)


def test_thinned_coupling_is_not_pathwise_monotone():
    # a recorded counterexample: the thinned front leads on t in [9.43, 15]
    s = replica_seed(20240611, k_key(3.0), 9)
    full = simulate_1d(SimConfig(3.0, 15.0, master_seed=s)).front
    thin = simulate_1d(SimConfig(1.0, 15.0, master_seed=s, thin_from=3.0)).front
    assert np.array_equal(full.jump_times, replay_mdla_1d(s, 3.0, 1.0, 15.0, 120))
    assert np.array_equal(thin.jump_times, replay_mdla_1d(s, 3.0, 1 / 3, 15.0, 120))
    assert thin.value(12.6) == 11 and full.value(12.6) == 7


def test_thinning_to_full_density_reproduces_run():
    a = simulate_1d(SimConfig(2.0, 100.0, master_seed=3))
    b = simulate_1d(SimConfig(2.0, 100.0, master_seed=3, thin_from=2.0))
    assert np.array_equal(a.front.jump_times, b.front.jump_times)


def test_conditional_intensity_at_first_site():
    # on {X_t = 0} the count at site 1 is Poisson with mean K P[M_t = 0]
    k, t = 3.0, 1.0
    counts = []
    for r in range(3000):
        rec = simulate_1d(SimConfig(k, t, master_seed=900_000 + r, record_particles=True))
        if rec.front.value(t) != 0:
            continue
        tab = rec.particle_history
        counts.append(int(np.sum(tab.positions_at(t)[tab.active_at(t)] == 1)))
    counts = np.array(counts)
    assert counts.size > 200
    target = k * max_zero_prob(t)
    assert abs(counts.mean() - target) < 3 * math.sqrt(target / counts.size)


# ------------------------------------------------------------------ S(t)

PATH = FrontPath(np.array([0.7, 1.9, 2.2, 4.5, 6.1, 6.3]), np.arange(1, 7), 8.0)


def test_s_estimate_at_zero():
    est = s_estimate(PATH, 0.0, 10, np.random.default_rng(0), 3.0)
    assert est.point_estimate == 1.5 and est.standard_error == 0.0


def test_s_estimate_stalled_front():
    t = 30.0
    est = s_estimate(FrontPath.empty(t), t, 200_000, np.random.default_rng(1), 2.0)
    assert abs(est.point_estimate - max_zero_prob(t)) < 3 * est.standard_error


@pytest.mark.parametrize("t", [3.0, 8.0])
def test_s_estimate_matches_killed_walk(t):
    levels, breaks = front_barrier_steps(PATH.jump_times, PATH.positions, t)
    exact = 0.5 * 3.0 * survival_below_steps(levels, breaks, t)
    est = s_estimate(PATH, t, 200_000, np.random.default_rng(2), 3.0)
    assert abs(est.point_estimate - exact) < 4 * est.standard_error


def test_s_estimate_monotone_in_front():
    t = 8.0
    walks = sample_walk_paths(t, 50_000, np.random.default_rng(3))
    full = s_estimate(PATH, t, 0, None, 2.0, walks=walks).point_estimate
    for i in range(PATH.positions.size):
        less = PATH.without_jump(i)
        assert np.all(y_query(less, t, np.linspace(0, t, 50)) <= y_query(PATH, t, np.linspace(0, t, 50)))
        assert s_estimate(less, t, 0, None, 2.0, walks=walks).point_estimate <= full


def test_s_lower_bound_empty_product():
    assert s_lower_bound(PATH, 8.0, 4, 3.0) == pytest.approx(0.3 * 2**-2)


def test_s_lower_bound_permissive_path():
    # Y_t(2^i') = 10 i' 2^{i'/2}: place jumps so X_t - X_{t - 2^i'} hits these values
    t = 2.0**7
    ip = np.arange(1, 8)
    y = np.ceil(10 * ip * 2 ** (ip / 2)).astype(int)
    jt = np.sort(np.concatenate([np.full(y[0], t - 1.0)] + [np.full(y[j] - y[j - 1], t - 2.0**ip[j] + 1.0) for j in range(1, 7)]))
    jt = jt + np.arange(jt.size) * 1e-9
    path = FrontPath(jt, np.arange(1, jt.size + 1), t)
    for i, yi in zip(ip, y):
        assert y_query(path, t, 2.0**i) == yi
    j = y * 2.0 ** (-ip / 2)
    expected = 3.0 / 10 * 2**-0.5 * np.prod(1 - np.exp(1 - np.maximum(1, j / math.sqrt(2))))
    assert s_lower_bound(path, t, 1, 3.0) == pytest.approx(expected, rel=1e-14)
    est = s_estimate(path, t, 100_000, np.random.default_rng(4), 3.0)
    assert s_lower_bound(path, t, 1, 3.0) <= est.point_estimate + 3 * est.standard_error


def test_s_checks():
    with pytest.raises(ValueError):
        s_estimate(PATH, 9.0, 10, np.random.default_rng(0), 1.0)
    with pytest.raises(ValueError):
        s_lower_bound(PATH, 8.0, -1, 1.0)
    with pytest.raises(ValueError):
        s_lower_bound(PATH, 8.0, 0, -1.0)
