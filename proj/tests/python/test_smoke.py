"""Smoke tests for the python module: construct the main objects and check a
few exact values against closed forms."""

import math

import numpy as np
import pytest

import msaddle


def test_projection():
    ball = msaddle.BallDomain(2, 1.0)
    assert np.allclose(msaddle.project(ball, np.array([3.0, 4.0])), [0.6, 0.8])
    assert ball.diameter() == 2.0


def test_metropolis_hastings_stationarity():
    pi = np.array([0.75, 0.25])
    Q = np.array([[0.0, 1.0], [1.0, 0.0]])
    chain = msaddle.metropolis_hastings(pi, Q, 0.0)
    assert np.allclose(chain.P[0], [2.0 / 3.0, 1.0 / 3.0])
    assert chain.detailed_balance_residual() <= 1e-12
    assert np.allclose(pi @ chain.P, pi)


def test_second_eigenvalue_two_state():
    p, q = 0.3, 0.5
    P = np.array([[1 - p, p], [q, 1 - q]])
    pi = np.array([q / (p + q), p / (p + q)])
    chain = msaddle.FiniteChain(P, pi)
    assert msaddle.second_eigenvalue_modulus(chain) == pytest.approx(abs(1 - p - q), abs=1e-7)


def test_mixing_time_monotone_in_eta():
    pi = np.full(31, 1.0 / 31.0)
    tuned = msaddle.tune_spectral_gap(pi, 0.5, 0.02)
    report = msaddle.mixing_time(tuned.chain, [0.1, 0.01])
    assert report.tau(0.01) >= report.tau(0.1)


def test_gap_closed_form():
    problem = msaddle.BilinearQuadraticProblem(
        np.eye(2), np.zeros(2), 1.0, np.eye(2),
        msaddle.BallDomain(2, 2.0), msaddle.BallDomain(2, 2.0))
    z = msaddle.SaddlePoint(np.array([1.0, 0.0]), np.zeros(2))
    assert msaddle.primal_dual_gap(problem, z).gap == pytest.approx(1.0, abs=1e-12)
    saddle = problem.unconstrained_saddle()
    assert msaddle.primal_dual_gap(problem, saddle).gap == pytest.approx(0.0, abs=1e-9)


def test_two_state_swap_instance_and_value():
    mdp = msaddle.two_state_swap(0.5)
    inst = msaddle.exact_instance_matrices(
        mdp, msaddle.FeatureMap.tabular(2), msaddle.GtdKind.GTD, msaddle.PolicyMode.OnPolicy)
    assert np.allclose(inst.A, [[0.5, -0.25], [-0.25, 0.5]], atol=1e-12)
    assert np.allclose(inst.b, [0.5, 0.0], atol=1e-12)
    assert np.allclose(inst.solution(), [4.0 / 3.0, 2.0 / 3.0], atol=1e-10)
    v = msaddle.exact_value(mdp, mdp.target_policy)
    assert np.allclose(v, [4.0 / 3.0, 2.0 / 3.0], atol=1e-12)


def test_theorem1_iid_reduction():
    D, L1, c, T = 1.0, 2.0, 0.5, 10000
    schedule = msaddle.StepSchedule.parse("constant", c / (L1 * math.sqrt(T)))
    bound = msaddle.theorem1_bound(D, L1, 1.0, schedule, T, 0, 0.0, 0.05)
    closed = (L1 / (c * math.sqrt(T))) * (D * D + 2.5 * c * c)
    assert bound == pytest.approx(closed, rel=1e-12)


def test_proposition1_example():
    constants = msaddle.GtdConstants(gamma=0.5, rho_max=1.0, L=1.0, d=2.0, R_max=1.0, lambda_M=1.0)
    pair = msaddle.proposition1_constants(constants, 1.0)
    assert pair.L1 == pytest.approx(8.0 * math.sqrt(2.0), rel=1e-12)
    assert pair.L2 == pytest.approx(7.0 * math.sqrt(2.0), rel=1e-12)


def test_run_simulation_gap_decreases():
    pi = np.full(101, 1.0 / 101.0)
    chain = msaddle.metropolis_hastings(pi, msaddle.random_walk_proposal(101, 100), 0.3)
    stream = msaddle.IidStationaryStream(chain, 7)
    gaps = msaddle.run_simulation(
        n=4, states=101, instance_seed=1, noise=0.5, radius_x=5.0, radius_y=5.0,
        stream=stream, schedule=msaddle.StepSchedule.parse("constant", 0.01),
        T=20000, checkpoints=[10, 20000])
    assert gaps[-1][1] < gaps[0][1]


def test_run_gtd_converges():
    mdp = msaddle.two_state_swap(0.5)
    inst = msaddle.exact_instance_matrices(
        mdp, msaddle.FeatureMap.tabular(2), msaddle.GtdKind.GTD, msaddle.PolicyMode.OnPolicy)
    stream = msaddle.IidStationaryStream(inst.behavior_chain, 11)
    trajectory = msaddle.run_gtd(
        inst, stream, msaddle.StepSchedule.parse("invsqrt", 2.0), 100000, 10.0, 13, [100000])
    residual = np.linalg.norm(inst.A @ trajectory.final_average.x - inst.b)
    assert residual < 2e-2
    assert msaddle.value_error(inst, trajectory.final_average.x) < 0.05


def test_replay_stream_matches_base_marginal():
    pi = np.array([0.5, 0.5])
    P = np.array([[0.9, 0.1], [0.1, 0.9]])
    chain = msaddle.FiniteChain(P, pi)
    replay = msaddle.replay_over_markov_path(chain, 0, 0, 0, seed=3)
    counts = np.zeros(2)
    for _ in range(20000):
        counts[replay.next()] += 1
    counts /= counts.sum()
    assert abs(counts[0] - 0.5) < 0.1
