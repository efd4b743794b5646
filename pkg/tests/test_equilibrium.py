import logging

import numpy as np
import pytest

from netql._validation import DomainError, ParameterError
from netql.dynamics import qld_vector_field, random_interior_strategy
from netql.equilibrium import (
    QRESolver,
    logit_response,
    monotonicity_margin,
    pseudo_gradient,
    pseudo_jacobian,
    qre_fixed_point,
    regularized_payoff,
    safe_damping,
    theoretical_threshold,
)
from netql.game import (
    PolymatrixGame,
    assign_bimatrix,
    delta_identical_interests,
    make_sato,
    make_shapley,
    make_zero_sum,
    uniform_strategy,
)
from netql.graph import ERParams, SBParams, complete_graph, empty_graph, er_bound, from_edges, sample_er, spectral_radius


def edgeless(n=3, m=3):
    return PolymatrixGame(empty_graph(n), [m] * n, {})


# ---------------------------------------------------------------- logit response


def test_logit_zero_payoff_uniform():
    game = edgeless()
    x = random_interior_strategy(game, 0)
    assert np.allclose(logit_response(game, x, 0.3), 1 / 3, atol=1e-15)


def test_logit_high_temperature():
    game = assign_bimatrix(complete_graph(4), *make_shapley(), 0)
    x = random_interior_strategy(game, 1)
    assert np.allclose(logit_response(game, x, 1e7), 1 / 3, atol=1e-6)


def test_logit_idempotent_at_qre():
    game = assign_bimatrix(complete_graph(3), *make_sato(), 0)
    res = qre_fixed_point(game, 1.0)
    L = logit_response(game, res.strategy, 1.0)
    assert np.max(np.abs(logit_response(game, L, 1.0) - L)) < 1e-9


# ---------------------------------------------------------------- qre_fixed_point


def test_qre_isolated_agent():
    game = PolymatrixGame(np.zeros((1, 1), dtype=int), [4], {})
    res = qre_fixed_point(game, 0.5)
    assert np.allclose(res.strategy, 0.25) and res.residual < 1e-12 and res.iterations <= 2


def test_qre_zero_sum_triangle_multistart():
    game = assign_bimatrix(complete_graph(3), *make_zero_sum(), 1)
    rng = np.random.default_rng(2)
    sols = [qre_fixed_point(game, 0.5, random_interior_strategy(game, rng)) for _ in range(20)]
    assert all(s.converged for s in sols)
    ref = sols[0].strategy
    assert max(np.max(np.abs(s.strategy - ref)) for s in sols) < 1e-6


def _grid_qre_2x2(A, B, T, resolution=1e-4, chunk=400):
    """Brute force: minimise the fixed-point residual over the grid of (p, q)."""
    grid = np.linspace(0.0, 1.0, int(round(1 / resolution)) + 1)

    def first_prob(r):
        return 1.0 / (1.0 + np.exp(-(r[..., 0] - r[..., 1]) / T))

    # agent 0 plays (p, 1-p) and responds to q; agent 1 responds to p
    rq = np.stack([A[:, 0][:, None] * grid + A[:, 1][:, None] * (1 - grid)], 0)[0].T  # (len q, 2)
    rp = np.stack([B[:, 0][:, None] * grid + B[:, 1][:, None] * (1 - grid)], 0)[0].T  # (len p, 2)
    Lq = first_prob(rq)  # logit of agent 0 given q
    Lp = first_prob(rp)  # logit of agent 1 given p
    best, arg = np.inf, None
    for s in range(0, grid.size, chunk):
        p = grid[s : s + chunk, None]
        res = np.maximum(np.abs(p - Lq[None, :]), np.abs(grid[None, :] - Lp[s : s + chunk, None]))
        i = np.unravel_index(np.argmin(res), res.shape)
        if res[i] < best:
            best, arg = res[i], (grid[s + i[0]], grid[i[1]])
    return arg


@pytest.mark.parametrize("seed,T", [(0, 1.0), (1, 0.4), (2, 2.0)])
def test_qre_matches_grid_search_2x2(seed, T):
    rng = np.random.default_rng(seed)
    A, B = rng.uniform(-2, 2, size=(2, 2, 2))
    game = PolymatrixGame(from_edges(2, [(0, 1)]), [2, 2], {(0, 1): A, (1, 0): B})
    res = qre_fixed_point(game, T)
    assert res.converged
    p, q = _grid_qre_2x2(A, B, T)
    assert abs(res.strategy[0] - p) < 1e-3 and abs(res.strategy[2] - q) < 1e-3


def test_qre_nonconvergence_is_flag():
    game = assign_bimatrix(sample_er(ERParams(10, 0.8), 0), *make_sato(), 0)
    # uniform is an exact fixed point for Sato, so start elsewhere
    res = qre_fixed_point(game, 0.05, random_interior_strategy(game, 1), max_iter=5)
    assert not res.converged and res.iterations == 5


def test_qre_converged_implies_tolerance():
    game = assign_bimatrix(sample_er(ERParams(10, 0.3), 1), *make_shapley(), 1)
    res = qre_fixed_point(game, 5.0, tol=1e-11)
    assert res.converged and res.residual < 1e-11


def test_qre_parameter_checks():
    game = assign_bimatrix(complete_graph(3), *make_sato(), 0)
    with pytest.raises(ParameterError):
        qre_fixed_point(game, 1.0, damping=0.0)
    with pytest.raises(ParameterError):
        qre_fixed_point(game, -1.0)
    x = uniform_strategy(game)
    x[:3] = [1.0, 0.0, 0.0]
    with pytest.raises(DomainError):
        qre_fixed_point(game, 1.0, x)


def test_safe_damping_cap():
    game = assign_bimatrix(sample_er(ERParams(10, 0.5), 0), *make_sato(), 0)
    assert safe_damping(game, 100.0) == 0.5
    assert safe_damping(game, 0.1) < 0.5
    assert safe_damping(edgeless(), 0.1) == 0.5


def test_qre_field_consistency():
    rng = np.random.default_rng(5)
    for _ in range(5):
        game = assign_bimatrix(sample_er(ERParams(8, 0.4), rng), *make_sato(), rng)
        res = qre_fixed_point(game, 1.0, random_interior_strategy(game, rng))
        assert res.residual < 1e-10
        assert np.max(np.abs(qld_vector_field(game, res.strategy, 1.0))) < 1e-6


def test_qre_result_serialises():
    res = qre_fixed_point(edgeless(2, 2), 1.0)
    d = res.to_dict()
    assert d["strategy"] == [0.5] * 4 and d["converged"] is True


def test_qre_solver_estimator():
    game = assign_bimatrix(complete_graph(3), *make_sato(), 0)
    est = QRESolver(exploration=1.0).fit(game)
    ref = qre_fixed_point(game, 1.0)
    assert np.array_equal(est.strategy_, ref.strategy) and est.converged_
    assert np.array_equal(est.transform(game), est.strategy_)


# ---------------------------------------------------------------- pseudo-Jacobian


def test_jacobian_edgeless_block_diagonal():
    game = edgeless(3, 3)
    x = random_interior_strategy(game, 0)
    J = pseudo_jacobian(game, 0.7, x)
    assert np.array_equal(J, np.diag(0.7 / x))


def test_jacobian_uniform_diagonal_blocks():
    game = assign_bimatrix(complete_graph(3), *make_sato(), 0)
    T = np.array([0.5, 1.0, 2.0])
    J = pseudo_jacobian(game, T, uniform_strategy(game))
    for k in range(3):
        assert np.allclose(J[3 * k : 3 * k + 3, 3 * k : 3 * k + 3], 3 * T[k] * np.eye(3), atol=1e-12)


def test_jacobian_off_diagonal_blocks():
    game = assign_bimatrix(complete_graph(3), *make_shapley(), 0)
    J = pseudo_jacobian(game, 1.0, uniform_strategy(game))
    for (k, l), A in game.half_edge_payoffs.items():
        assert np.array_equal(J[3 * k : 3 * k + 3, 3 * l : 3 * l + 3], -A)


def test_jacobian_structure_two_points():
    rng = np.random.default_rng(1)
    game = assign_bimatrix(sample_er(ERParams(6, 0.5), rng), *make_sato(), rng)
    x, y = random_interior_strategy(game, rng), random_interior_strategy(game, rng)
    Jx, Jy = pseudo_jacobian(game, 0.8, x), pseudo_jacobian(game, 0.8, y)
    off = ~np.kron(np.eye(6, dtype=bool), np.ones((3, 3), dtype=bool))
    assert np.array_equal(Jx[off], Jy[off])
    # changing only agent 0 leaves the other diagonal blocks untouched
    z = y.copy()
    z[:3] = x[:3]
    Jz = pseudo_jacobian(game, 0.8, z)
    assert np.array_equal(Jz[3:, 3:], Jy[3:, 3:])


def test_jacobian_finite_differences():
    rng = np.random.default_rng(2)
    h = 1e-6
    for _ in range(10):
        game = assign_bimatrix(sample_er(ERParams(5, 0.6), rng), *make_shapley(), rng)
        x = random_interior_strategy(game, rng)
        x = 0.9 * x + 0.1 / 3  # keep away from the boundary for the step size
        T = rng.uniform(0.2, 2.0, size=5)
        J = pseudo_jacobian(game, T, x)
        fd = np.empty_like(J)
        for j in range(game.dim):
            e = np.zeros(game.dim)
            e[j] = h
            fd[:, j] = (pseudo_gradient(game, T, x + e) - pseudo_gradient(game, T, x - e)) / (2 * h)
        assert np.max(np.abs(J - fd)) < 1e-5


def test_pseudo_gradient_is_negative_partial_of_regularized_payoff():
    rng = np.random.default_rng(3)
    game = assign_bimatrix(complete_graph(3), *make_sato(), rng)
    x = random_interior_strategy(game, rng)
    h = 1e-6
    F = pseudo_gradient(game, 0.6, x)
    for j in range(game.dim):
        k = j // 3
        e = np.zeros(game.dim)
        e[j] = h
        d = (regularized_payoff(game, 0.6, x + e)[k] - regularized_payoff(game, 0.6, x - e)[k]) / (2 * h)
        assert abs(-d - F[j]) < 1e-6


def test_jacobian_boundary_domain_error():
    game = assign_bimatrix(complete_graph(3), *make_sato(), 0)
    x = uniform_strategy(game)
    x[:3] = [1.0, 0.0, 0.0]
    with pytest.raises(DomainError):
        pseudo_jacobian(game, 1.0, x)


# ---------------------------------------------------------------- certificate


def test_margin_edgeless():
    game = edgeless(3, 3)
    x = random_interior_strategy(game, 4)
    T = np.array([0.5, 0.9, 1.3])
    cert = monotonicity_margin(game, T, x)
    expected = min(T[k] / x[3 * k : 3 * k + 3].max() for k in range(3))
    assert cert.min_eig == pytest.approx(expected, abs=1e-10)
    assert cert.bound == pytest.approx(0.5, abs=1e-10)
    assert cert.min_eig >= T.min() and cert.holds


def test_margin_sato_triangle():
    game = assign_bimatrix(complete_graph(3), *make_sato(), 0)
    rng = np.random.default_rng(5)
    for _ in range(100):
        cert = monotonicity_margin(game, 1.0, random_interior_strategy(game, rng))
        assert cert.bound == pytest.approx(0.6, abs=1e-12)
        assert cert.min_eig >= 0.6 - 1e-8


def test_margin_zero_payoffs():
    game = assign_bimatrix(complete_graph(3), *make_sato(), 0).scaled(0.0)
    x = random_interior_strategy(game, 6)
    cert = monotonicity_margin(game, 0.8, x)
    assert cert.min_eig == pytest.approx(np.min(0.8 / x), abs=1e-12)


def test_certificate_serialises():
    game = edgeless(2, 2)
    d = monotonicity_margin(game, 1.0, uniform_strategy(game)).to_dict()
    assert set(d) == {"min_eig", "bound", "point"}


# ---------------------------------------------------------------- thresholds


def test_threshold_zero_sum():
    pair = make_zero_sum()
    for net in (ERParams(20, 0.3), SBParams.equal(20, 4, 0.3, 0.1), complete_graph(6)):
        assert theoretical_threshold(pair, net) == 0.0


def test_threshold_sato_k3():
    assert theoretical_threshold(make_sato(), complete_graph(3)) == pytest.approx(0.4, abs=1e-12)


def test_threshold_sato_er():
    t = theoretical_threshold(make_sato(), ERParams(10, 0.1), 0.05)
    assert t == pytest.approx(0.2 * er_bound(10, 0.1, 0.05).value, abs=1e-12)
    assert abs(t - 1.602) < 1e-3


def test_threshold_literal_flag():
    assert theoretical_threshold(make_sato(), ERParams(10, 0.1), literal=True) == pytest.approx(
        er_bound(10, 0.1, 0.05).value)


def test_threshold_accepts_game_and_float():
    G = sample_er(ERParams(10, 0.3), 0)
    game = assign_bimatrix(G, *make_shapley(), 0)
    assert theoretical_threshold(game, G) == pytest.approx(delta_identical_interests(game) * spectral_radius(G))
    assert theoretical_threshold(0.5, G) == pytest.approx(0.5 * spectral_radius(G))
    with pytest.raises(ParameterError):
        theoretical_threshold(0.5, "K5")


def test_uniqueness_above_threshold():
    rng = np.random.default_rng(7)
    for _ in range(3):
        G = sample_er(ERParams(10, 0.3), rng)
        game = assign_bimatrix(G, *make_shapley(), rng)
        T = delta_identical_interests(game) * spectral_radius(G) + 0.1
        sols = [qre_fixed_point(game, T, random_interior_strategy(game, rng)).strategy for _ in range(10)]
        assert max(np.max(np.abs(s - sols[0])) for s in sols) < 1e-5


def test_residual_monotone_above_threshold(caplog):
    # contraction is observed, not proven: only logged
    game = assign_bimatrix(complete_graph(4), *make_sato(), 0)
    with caplog.at_level(logging.DEBUG, logger="netql.equilibrium"):
        res = qre_fixed_point(game, 2.0)
    assert res.converged
    assert not [r for r in caplog.records if "blew up" in r.getMessage()]
