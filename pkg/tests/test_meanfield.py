"""Mean-field lab: flows, the quadratic cost closed forms, naive and
fictitious learning, and the relaxed equilibrium check."""

import numpy as np
import pytest

from gamelearn.meanfield import (MeanFieldTrace, OneStepGame,
                                 PopulationEstimate, ProfilePoint,
                                 best_response, fictitious_cost,
                                 learning_step, mf_cost, player_flow,
                                 population_flow, relaxed_equilibrium_check,
                                 run_mean_field)
from gamelearn.measures import FiniteMeasure


def dirac0():
    return FiniteMeasure.dirac(0)


def homogeneous(action):
    return PopulationEstimate.homogeneous(dirac0(), action)


def half_half_population():
    return PopulationEstimate(FiniteMeasure.dirac(
        ProfilePoint(dirac0(), FiniteMeasure({0.0: 0.5, 1.0: 0.5}))))


# -- game and estimate types -------------------------------------------------


def test_game_validation():
    with pytest.raises(ValueError, match="unknown transition rule"):
        OneStepGame(transition="levy", cost_rule="example-1")
    with pytest.raises(ValueError, match="unknown cost rule"):
        OneStepGame(transition="bernoulli", cost_rule="example-3")
    with pytest.raises(ValueError, match="6 coefficients"):
        OneStepGame.quadratic((1.0, 2.0))
    with pytest.raises(ValueError, match="at least 2"):
        OneStepGame(transition="bernoulli", cost_rule="example-1",
                    action_grid=1)


def test_kernels():
    game = OneStepGame.example_1()
    k = game.kernel(0.3)
    assert k.weight(1) == pytest.approx(0.3, abs=1e-15)
    assert k.weight(0) == pytest.approx(0.7, abs=1e-15)
    assert OneStepGame.example_2().kernel(0.3) == FiniteMeasure.dirac(0.3)
    with pytest.raises(ValueError, match="outside"):
        game.kernel(1.5)


def test_profile_point_requires_probabilities():
    with pytest.raises(ValueError, match="not normalized"):
        ProfilePoint(FiniteMeasure({0: 0.5}), FiniteMeasure.dirac(1.0))


def test_population_estimate_start_distributions_must_agree():
    a = ProfilePoint(FiniteMeasure.dirac(0), FiniteMeasure.dirac(0.0))
    b = ProfilePoint(FiniteMeasure.dirac(1), FiniteMeasure.dirac(1.0))
    with pytest.raises(ValueError, match="disagree"):
        PopulationEstimate(FiniteMeasure({a: 0.5, b: 0.5}))


def test_population_estimate_queries():
    est = homogeneous(0.25)
    assert est.homogeneous_flag
    assert est.population_mean() == 0.25
    mixed = half_half_population()
    assert not mixed.homogeneous_flag
    assert mixed.population_mean() == 0.5
    blended = mixed.blended_point()
    assert blended.controls.weight(1.0) == 0.5


# -- flows --------------------------------------------------------------------


def test_population_flow_homogeneous_bernoulli():
    game = OneStepGame.example_1()
    xi = ProfilePoint(dirac0(), FiniteMeasure.dirac(0.3))
    flow = population_flow(game, xi, steps=1)
    assert len(flow) == 2
    _, mu1 = flow[1]
    assert mu1.weight(1) == pytest.approx(0.3, abs=1e-15)
    assert mu1.weight(0) == pytest.approx(0.7, abs=1e-15)


def test_population_flow_mixed_controls():
    game = OneStepGame.example_1()
    xi = ProfilePoint(dirac0(), FiniteMeasure({0.0: 0.5, 1.0: 0.5}))
    joint1, mu1 = population_flow(game, xi, steps=1)[1]
    assert mu1.weight(1) == pytest.approx(0.5, abs=1e-15)
    # the half playing 0 stays at state 0; the half playing 1 moved to 1
    assert joint1.weight((1, 1.0)) == pytest.approx(0.5, abs=1e-15)
    assert joint1.weight((1, 0.0)) == 0.0


def test_population_flow_dirac_transition():
    game = OneStepGame.example_2()
    xi = ProfilePoint(dirac0(), FiniteMeasure.dirac(0.7))
    _, mu1 = population_flow(game, xi, steps=1)[1]
    assert mu1 == FiniteMeasure.dirac(0.7)


def test_population_flow_preserves_mass():
    game = OneStepGame.example_1()
    xi = ProfilePoint(dirac0(), FiniteMeasure({0.0: 0.25, 0.5: 0.5, 1.0: 0.25}))
    for joint, mu in population_flow(game, xi, steps=3):
        assert abs(joint.total_mass - 1.0) <= 1e-12
        assert abs(mu.total_mass - 1.0) <= 1e-12
    with pytest.raises(ValueError, match="nonnegative"):
        population_flow(game, xi, steps=-1)


def test_player_flow_is_the_kernel():
    game = OneStepGame.example_1()
    xi = ProfilePoint(dirac0(), FiniteMeasure.dirac(0.9))
    assert player_flow(game, xi, 0, 0.2) == game.kernel(0.2)


# -- cost closed forms ----------------------------------------------------------


def test_cost_closed_forms_example_1():
    # population at 1: J(0) = 2; population at 0: J(1) = 2
    game = OneStepGame.example_1()
    assert mf_cost(game, homogeneous(1.0), 0, 0.0) == \
        pytest.approx(2.0, abs=1e-12)
    assert mf_cost(game, homogeneous(0.0), 0, 1.0) == \
        pytest.approx(2.0, abs=1e-12)


def test_cost_indifference_at_half_population():
    game = OneStepGame.example_1()
    mixed = half_half_population()
    assert mf_cost(game, mixed, 0, 0.0) == pytest.approx(0.5, abs=1e-12)
    assert mf_cost(game, mixed, 0, 1.0) == pytest.approx(0.5, abs=1e-12)


def test_cost_general_quadratic_formula():
    # against a homogeneous population at p, J(a) = 2p^2 - 4pa + a^2 + a
    game = OneStepGame.example_1()
    for p in (0.0, 0.3, 0.5, 0.9):
        for a in (0.0, 0.25, 1.0):
            expected = 2 * p * p - 4 * p * a + a * a + a
            assert mf_cost(game, homogeneous(p), 0, a) == \
                pytest.approx(expected, abs=1e-12)


def test_cost_example_2_sign_flip():
    game = OneStepGame.example_2()
    # below-half crowd rewards moving up, above-half crowd punishes it
    assert mf_cost(game, homogeneous(0.2), 0, 0.8) == \
        pytest.approx(0.8, abs=1e-15)
    assert mf_cost(game, homogeneous(0.9), 0, 0.8) == \
        pytest.approx(-0.8, abs=1e-15)


def test_mf_cost_averages_over_estimate():
    game = OneStepGame.example_1()
    gamma = PopulationEstimate(FiniteMeasure({
        ProfilePoint(dirac0(), FiniteMeasure.dirac(0.0)): 0.5,
        ProfilePoint(dirac0(), FiniteMeasure.dirac(1.0)): 0.5}))
    a = 0.25
    expected = 0.5 * mf_cost(game, homogeneous(0.0), 0, a) + \
        0.5 * mf_cost(game, homogeneous(1.0), 0, a)
    assert mf_cost(game, gamma, 0, a) == pytest.approx(expected, abs=1e-12)


def test_fictitious_cost_blends_before_evaluating():
    game = OneStepGame.example_1()
    gamma = PopulationEstimate(FiniteMeasure({
        ProfilePoint(dirac0(), FiniteMeasure.dirac(0.0)): 0.5,
        ProfilePoint(dirac0(), FiniteMeasure.dirac(1.0)): 0.5}))
    for a in (0.0, 0.5, 1.0):
        # blended population mean is 1/2: J(a) = 1/2 - a + a^2
        assert fictitious_cost(game, gamma, 0, a) == \
            pytest.approx(0.5 - a + a * a, abs=1e-12)
        # averaging costs instead gives a^2 - a + 1: a constant gap of 1/2
        assert mf_cost(game, gamma, 0, a) - \
            fictitious_cost(game, gamma, 0, a) == \
            pytest.approx(0.5, abs=1e-12)


def test_fictitious_equals_mf_on_homogeneous():
    game = OneStepGame.example_1()
    est = homogeneous(0.7)
    for a in (0.0, 0.4, 1.0):
        assert fictitious_cost(game, est, 0, a) == \
            pytest.approx(mf_cost(game, est, 0, a), abs=1e-15)


# -- learning --------------------------------------------------------------------


def test_best_response_flips_at_half():
    game = OneStepGame.example_1()
    assert best_response(game, homogeneous(0.3)) == 1.0
    assert best_response(game, homogeneous(0.7)) == 0.0


def test_best_response_tie_uses_seeded_coin():
    game = OneStepGame.example_1()
    est = homogeneous(0.5)
    draws = {best_response(game, est, rng=np.random.default_rng(s))
             for s in range(20)}
    assert draws == {0.0, 1.0}


def test_best_response_concave_quadratic_uses_grid():
    # J(a) = -(a - 0.5)^2 up to constants: interior maximum at 0.5
    game = OneStepGame.quadratic((0.0, 0.0, -1.0, 1.0, 0.0, 0.0))
    assert best_response(game, homogeneous(0.0)) == pytest.approx(0.5)


def test_learning_step_rates():
    est = homogeneous(0.0)
    assert learning_step(est, 1.0, c=1.0).gamma == FiniteMeasure.dirac(
        ProfilePoint(dirac0(), FiniteMeasure.dirac(1.0)))
    unchanged = learning_step(est, 1.0, c=0.0)
    assert unchanged.gamma.allclose(est.gamma, tol=1e-15)
    with pytest.raises(ValueError, match="outside"):
        learning_step(est, 1.0, c=1.5)


def test_learning_step_geometric_weights():
    # after n mixes at rate c the j-th injected atom carries c(1-c)^(n-1-j)
    c = 0.3
    est = homogeneous(0.0)
    injected = [0.1, 0.2, 0.3, 0.4, 0.5]
    for b in injected:
        est = learning_step(est, b, c, prune_tol=0.0)
    n = len(injected)
    for j, b in enumerate(injected):
        point = ProfilePoint(dirac0(), FiniteMeasure.dirac(b))
        assert est.gamma.weight(point) == \
            pytest.approx(c * (1 - c) ** (n - 1 - j), abs=1e-12)
    assert est.gamma.weight(
        ProfilePoint(dirac0(), FiniteMeasure.dirac(0.0))) == \
        pytest.approx((1 - c) ** n, abs=1e-12)


def test_learning_step_prunes_light_atoms():
    est = homogeneous(0.0)
    for _ in range(200):
        est = learning_step(est, 1.0, 0.3, prune_tol=1e-12)
    # the original atom's weight 0.7^200 is far below the prune threshold
    assert len(est.gamma) < 120
    assert abs(est.gamma.total_mass - 1.0) <= 1e-9


# -- runs -----------------------------------------------------------------------


def scalar_recursion(a0, c, n_iters):
    m, out = a0, []
    for _ in range(n_iters):
        out.append(m)
        b = 1.0 if m < 0.5 else 0.0
        m = c * b + (1.0 - c) * m
    return out


def test_run_matches_scalar_recursion():
    trace = run_mean_field(OneStepGame.example_1(), a0=0.9, c=0.3,
                           n_iters=200, seed=5)
    oracle = scalar_recursion(0.9, 0.3, 200)
    for (n, m, b, atoms), m_ref in zip(trace.rows, oracle):
        assert m == pytest.approx(m_ref, abs=1e-12)
        assert b == (1.0 if m_ref < 0.5 else 0.0)
    assert isinstance(trace, MeanFieldTrace)
    assert trace.stats.sites() == ("mf",)
    assert all(rec.regret == 0.0 for rec in trace.stats.per_age)


def test_run_oscillates_with_full_learning_rate():
    # c = 1 replaces the whole estimate: period-two flip between 0 and 1
    trace = run_mean_field(OneStepGame.example_1(), a0=0.0, c=1.0,
                           n_iters=6, seed=0)
    assert [b for _, _, b, _ in trace.rows] == [1.0, 0.0, 1.0, 0.0, 1.0, 0.0]


def test_run_tail_stays_near_half():
    # once inside [1/2 - c, 1/2 + c] the recursion cannot leave it
    trace = run_mean_field(OneStepGame.example_1(), a0=0.9, c=0.3,
                           n_iters=300, seed=0)
    tail = [m for n, m, _, _ in trace.rows if n >= 100]
    assert all(0.2 - 1e-12 <= m <= 0.8 + 1e-12 for m in tail)


def test_run_deterministic_in_seed():
    game = OneStepGame.example_1()
    a = run_mean_field(game, 0.9, 0.3, 50, seed=7)
    b = run_mean_field(game, 0.9, 0.3, 50, seed=7)
    assert a.rows == b.rows


def test_run_validates_iterations():
    with pytest.raises(ValueError, match="at least one iteration"):
        run_mean_field(OneStepGame.example_1(), 0.9, 0.3, 0)


# -- relaxed equilibria ------------------------------------------------------------


def test_relaxed_check_half_half_passes_example_1():
    game = OneStepGame.example_1()
    assert relaxed_equilibrium_check(
        game, FiniteMeasure({0.0: 0.5, 1.0: 0.5}))


def test_relaxed_check_rejects_pure_points_example_1():
    game = OneStepGame.example_1()
    assert not relaxed_equilibrium_check(game, FiniteMeasure.dirac(0.0))
    assert not relaxed_equilibrium_check(game, FiniteMeasure.dirac(1.0))


def test_relaxed_check_example_2_has_no_candidates():
    game = OneStepGame.example_2()
    assert not relaxed_equilibrium_check(
        game, FiniteMeasure({0.0: 0.5, 1.0: 0.5}))
    assert not relaxed_equilibrium_check(game, FiniteMeasure.dirac(0.5))


def test_relaxed_check_requires_probability():
    with pytest.raises(ValueError, match="not normalized"):
        relaxed_equilibrium_check(OneStepGame.example_1(),
                                  FiniteMeasure({0.0: 0.5}))
