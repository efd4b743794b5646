import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from netql.dynamics import (
    DynamicsConfig,
    Trajectory,
    assess_convergence,
    boltzmann,
    integrate_qld,
    qld_vector_field,
    random_interior_strategy,
    run_discrete,
)
from netql.game import assign_bimatrix, bimatrix_delta, make_conflict
from netql.graph import ERParams, SBParams, sample_er, sample_sb, spectral_radius

finite = st.floats(-50, 50, allow_nan=False)
seeds = st.integers(0, 2**32 - 1)


def random_game(seed, n=None, m=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(2, 7))
    m = m or int(rng.integers(2, 5))
    G = sample_er(ERParams(n, float(rng.uniform(0.2, 0.9))), rng)
    if rng.random() < 0.3:
        return make_conflict(G, m, rng), rng
    A, B = rng.uniform(-2, 2, size=(2, m, m))
    return assign_bimatrix(G, A, B, rng), rng


def simplex_ok(S, offsets, atol=1e-10):
    sums = np.add.reduceat(S, offsets[:-1], axis=1)
    return np.all(S >= 0) and np.allclose(sums, 1.0, atol=atol)


@given(arrays(float, st.integers(1, 8), elements=finite), st.floats(0.01, 100), finite)
def test_boltzmann_shift_invariance(Q, T, c):
    a, b = boltzmann(Q, T), boltzmann(Q + c, T)
    assert np.allclose(a, b, rtol=0, atol=1e-12)


@given(arrays(np.int64, st.integers(1, 8), elements=st.integers(-1000, 1000)),
       st.sampled_from([0.125, 0.5, 1.0, 3.0, 0.1]), st.integers(-10**6, 10**6))
def test_boltzmann_shift_bit_exact_when_representable(Q, T, c):
    Q = Q.astype(float)
    assert np.array_equal(boltzmann(Q, T), boltzmann(Q + c, T))


@given(arrays(float, st.integers(1, 8), elements=st.floats(-1e6, 1e6)), st.floats(1e-3, 1e3))
def test_boltzmann_is_distribution(Q, T):
    x = boltzmann(Q, T)
    assert np.all(x >= 0) and abs(x.sum() - 1) < 1e-12


@settings(max_examples=60, deadline=None)
@given(seeds, st.floats(0.05, 3.0))
def test_discrete_simplex_preserved(seed, T):
    game, rng = random_game(seed)
    traj = run_discrete(game, DynamicsConfig(exploration=T, steps=60, tail=10), seed=rng)
    assert simplex_ok(traj.strategies, traj.offsets)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.05, 3.0))
def test_continuous_simplex_preserved(seed, T):
    game, rng = random_game(seed)
    traj = integrate_qld(game, DynamicsConfig(exploration=T, steps=40, tail=10, dt=0.05), seed=rng)
    assert simplex_ok(traj.strategies, traj.offsets)


@settings(max_examples=100, deadline=None)
@given(seeds, st.floats(0.01, 5.0))
def test_field_tangent(seed, T):
    game, rng = random_game(seed)
    x = random_interior_strategy(game, rng)
    v = qld_vector_field(game, x, T)
    assert np.all(np.abs(np.add.reduceat(v, game.offsets[:-1])) < 1e-10)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_determinism_from_seed(seed):
    g1, r1 = random_game(seed)
    g2, r2 = random_game(seed)
    cfg = DynamicsConfig(exploration=0.5, steps=30, tail=5)
    assert np.array_equal(run_discrete(g1, cfg, seed=r1).strategies, run_discrete(g2, cfg, seed=r2).strategies)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_samples_symmetric_and_bounded(seed):
    rng = np.random.default_rng(seed)
    G = sample_sb(SBParams.equal(12, 3, float(rng.uniform(0.05, 0.95)), float(rng.uniform(0.05, 0.95))), rng)
    E = G.entries
    assert np.array_equal(E, E.T) and not E.diagonal().any()
    rho = spectral_radius(G)
    assert G.degrees().mean() - 1e-9 <= rho <= G.degrees().max() + 1e-9


@settings(max_examples=50, deadline=None)
@given(seeds, st.floats(1e-4, 1.0), st.floats(1e-8, 1e-2), st.floats(1.0, 100.0), st.floats(1.0, 100.0))
def test_convergence_monotone_in_thresholds(seed, var_t, rel_t, f1, f2):
    rng = np.random.default_rng(seed)
    base = rng.dirichlet(np.ones(3))
    noise = rng.normal(scale=10 ** rng.uniform(-9, -1), size=(50, 3))
    S = np.abs(base + noise)
    S /= S.sum(axis=1, keepdims=True)
    traj = Trajectory(S, np.array([0, 3]))
    tight = assess_convergence(traj, 50, var_t, rel_t)
    loose = assess_convergence(traj, 50, var_t * f1, rel_t * f2)
    assert loose.converged or not tight.converged


@given(arrays(float, (3, 3), elements=finite), arrays(float, (3, 3), elements=finite))
def test_delta_orientation_invariant(A, B):
    assert np.isclose(bimatrix_delta(A, B), bimatrix_delta(B, A), rtol=1e-10, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(seeds, st.floats(0, 1))
def test_reward_linear_in_each_opponent(seed, a):
    game, rng = random_game(seed)
    x, y = random_interior_strategy(game, rng), random_interior_strategy(game, rng)
    l = int(rng.integers(game.n_agents))
    sl = slice(game.offsets[l], game.offsets[l + 1])
    mix, other = x.copy(), x.copy()
    mix[sl] = a * x[sl] + (1 - a) * y[sl]
    other[sl] = y[sl]
    lhs = game.rewards(mix)
    rhs = a * game.rewards(x) + (1 - a) * game.rewards(other)
    assert np.allclose(lhs, rhs, atol=1e-10)
