"""
Unit tests for waterfilling, the best-response game and seeded ergodic estimation.
"""
import math
import sys
from pathlib import Path

# Add src to path for direct imports
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

import numpy as np
import pytest

import monte_carlo
from analytic_rates import shin_lee_rate, theorem2_bound
from channel_model import ChannelSet, NetworkDims, PowerProfile, draw_channels
from config import CI_Z, DISCARD_BUDGET_FACTOR
from exceptions import ConfigError, DomainError, NonConvergenceError, NumericalError
from ia_solver import SolverOptions
from monte_carlo import (
    Estimate, GameOptions, _collect, estimate_csu, estimate_ergodic, game_rates,
    interference_free_cap, run_wf_game, simulate_ia, simulate_wf_game,
    waterfill_best_response
)
from utils import complex_gaussian, hermitian


def logdet_gain(H, Q, R):
    A = np.eye(H.shape[0]) + H @ Q @ hermitian(H) @ np.linalg.inv(R)
    return float(np.log(abs(np.linalg.det(A))))


def within_ci(value, estimate, widen=3.0):
    return abs(value - estimate.mean) <= widen * estimate.ci_halfwidth


def square_unless_seventh(a):
    return None if a % 7 == 2 else a * a


@pytest.fixture
def dims3():
    return NetworkDims.symmetric(3, 2, 2, 1, 1)


@pytest.fixture
def decoupled():
    """Two users whose cross-channels are identically zero."""
    dims = NetworkDims.symmetric(2, 3, 3, 1, 1)
    rng = np.random.default_rng(5)
    H = [[complex_gaussian(rng, (3, 3)), np.zeros((3, 3))],
         [np.zeros((3, 3)), complex_gaussian(rng, (3, 3))]]
    return ChannelSet(dims, H)


# ------------------------------------------------------------------ #
# Estimates
# ------------------------------------------------------------------ #

class TestEstimate:

    def test_mean_and_ci(self):
        samples = [1.0, 2.0, 3.0, 4.0]
        est = Estimate.from_samples(samples, discarded=2, seed=9)
        assert est.mean == pytest.approx(2.5)
        assert est.ci_halfwidth == pytest.approx(CI_Z * np.std(samples, ddof=1) / 2.0)
        assert est.draws == 6
        assert est.seed == 9

    def test_single_sample_has_zero_ci(self):
        assert Estimate.from_samples([3.0], 0, 0).ci_halfwidth == 0.0

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            Estimate.from_samples([], 0, 0)

    def test_ci_shrinks_with_trials(self):
        small = estimate_csu(2, 2, [10.0, 10.0], trials=10_000, seed=1)
        large = estimate_csu(2, 2, [10.0, 10.0], trials=40_000, seed=1)
        assert large.ci_halfwidth / small.ci_halfwidth == pytest.approx(0.5, rel=0.25)


# ------------------------------------------------------------------ #
# Waterfilling
# ------------------------------------------------------------------ #

class TestWaterfilling:

    def test_identity_channel_spreads_power(self):
        Q = waterfill_best_response(np.eye(2), np.eye(2), 2.0)
        np.testing.assert_allclose(Q, np.eye(2), atol=1e-12)

    def test_rank_one_channel_uses_one_mode(self):
        rng = np.random.default_rng(0)
        h = complex_gaussian(rng, (3, 1))
        g = complex_gaussian(rng, (1, 4))
        Q = waterfill_best_response(h @ g, np.eye(3), 5.0)
        eigs = np.linalg.eigvalsh(Q)
        assert eigs[-1] == pytest.approx(5.0, rel=1e-10)
        assert np.all(np.abs(eigs[:-1]) < 1e-10)

    def test_beats_uniform_allocation(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            H = complex_gaussian(rng, (5, 7))
            A = complex_gaussian(rng, (5, 5))
            R = np.eye(5) + A @ hermitian(A)
            Q = waterfill_best_response(H, R, 10.0)
            assert np.trace(Q).real <= 10.0 + 1e-9
            assert np.linalg.eigvalsh(Q).min() >= -1e-10
            assert logdet_gain(H, Q, R) >= logdet_gain(H, (10.0 / 7) * np.eye(7), R) - 1e-9

    def test_low_snr_pours_into_strongest_mode(self):
        H = np.diag([2.0, 1.0]).astype(complex)
        Q = waterfill_best_response(H, np.eye(2), 0.1)
        np.testing.assert_allclose(Q, np.diag([0.1, 0.0]), atol=1e-12)

    def test_water_level_bracket_survives_rounding(self):
        # lo + P - lo rounds below P for this gain and budget
        inv_gain = 0.3799444972248613
        power = 10 ** 1.5
        H = np.diag([math.sqrt(1.0 / inv_gain), 0.0]).astype(complex)
        Q = waterfill_best_response(H, np.eye(2), power)
        assert np.trace(Q).real == pytest.approx(power, rel=1e-12)
        assert Q[0, 0].real == pytest.approx(power, rel=1e-12)

    def test_water_level_over_many_budgets(self):
        rng = np.random.default_rng(12)
        for _ in range(500):
            lam = rng.exponential(size=3)
            power = 10 ** rng.uniform(-2, 4)
            H = np.diag(np.sqrt(lam)).astype(complex)
            Q = waterfill_best_response(H, np.eye(3), power)
            assert np.trace(Q).real == pytest.approx(power, rel=1e-10)

    def test_singular_covariance(self):
        with pytest.raises(NumericalError):
            waterfill_best_response(np.eye(2), np.zeros((2, 2)), 1.0)

    def test_invalid_power(self):
        with pytest.raises(DomainError):
            waterfill_best_response(np.eye(2), np.eye(2), 0.0)


# ------------------------------------------------------------------ #
# Best-response game
# ------------------------------------------------------------------ #

class TestGame:

    def test_decoupled_users_converge_immediately(self, decoupled):
        powers = PowerProfile((10.0, 10.0))
        outcome = run_wf_game(decoupled, powers)
        assert outcome.converged
        assert outcome.iterations == 1
        for k in range(2):
            expected = waterfill_best_response(decoupled.H[k][k], np.eye(3), 10.0)
            np.testing.assert_allclose(outcome.Q[k], expected, atol=1e-12)

    @pytest.mark.parametrize("order", ["sequential", "simultaneous"])
    def test_low_snr_game_converges(self, dims3, order):
        channels = draw_channels(dims3, 4)
        outcome = run_wf_game(channels, PowerProfile.equal(3, 0.0), GameOptions(update_order=order))
        assert outcome.converged
        assert outcome.history[-1] < GameOptions().tol
        for k in range(3):
            assert np.trace(outcome.Q[k]).real == pytest.approx(1.0, rel=1e-9)

    def test_iteration_cap(self, dims3):
        channels = draw_channels(dims3, 4)
        outcome = run_wf_game(channels, PowerProfile.equal(3, 20.0), GameOptions(max_iters=1))
        assert not outcome.converged
        assert outcome.iterations == 1
        assert len(outcome.history) == 1

    def test_rates_non_negative(self, dims3):
        channels = draw_channels(dims3, 2)
        powers = PowerProfile.equal(3, 10.0)
        outcome = run_wf_game(channels, powers)
        assert all(r >= 0.0 for r in game_rates(channels, outcome, powers))

    @pytest.mark.slow
    def test_eleven_user_game_at_15db(self):
        dims = NetworkDims.symmetric(11, 7, 5, 1, 1)
        result = simulate_wf_game(dims, PowerProfile.equal(11, 15.0), trials=30, seed=5)
        assert result.sum_rate.trials_used == 30
        assert all(e.mean > 0.0 for e in result.per_user)

    @pytest.mark.slow
    def test_seven_user_game_nonconvergence_is_small(self):
        dims = NetworkDims.symmetric(7, 7, 5, 1, 2)
        result = simulate_wf_game(dims, PowerProfile.equal(7, 15.0), trials=100, seed=0)
        assert result.discard_fraction < 0.2, f"discarded {100 * result.discard_fraction:.1f}%"

    def test_unknown_update_order(self):
        with pytest.raises(DomainError):
            GameOptions(update_order="random")


# ------------------------------------------------------------------ #
# Trial collection
# ------------------------------------------------------------------ #

class TestCollect:

    def test_accepts_in_attempt_order(self, monkeypatch):
        monkeypatch.setattr(monte_carlo, "THREADS", 1)
        accepted, discarded = _collect(lambda a: None if a % 3 == 0 else a, 5, "test")
        assert accepted == [1, 2, 4, 5, 7]
        assert discarded == 3

    def test_budget_exhaustion(self, monkeypatch):
        monkeypatch.setattr(monte_carlo, "THREADS", 1)
        with pytest.raises(NonConvergenceError) as info:
            _collect(lambda a: None, 4, "test")
        assert info.value.discarded == DISCARD_BUDGET_FACTOR * 4

    @pytest.mark.parametrize("backend", ["thread", "process"])
    def test_worker_count_does_not_change_acceptance(self, backend, monkeypatch):
        serial = _collect(square_unless_seventh, 150, "test")
        monkeypatch.setattr(monte_carlo, "PARALLEL_BACKEND", backend)
        monkeypatch.setattr(monte_carlo, "THREADS", 4)
        assert _collect(square_unless_seventh, 150, "test") == serial

    def test_unknown_backend(self, monkeypatch):
        monkeypatch.setattr(monte_carlo, "PARALLEL_BACKEND", "gpu")
        monkeypatch.setattr(monte_carlo, "THREADS", 2)
        with pytest.raises(ConfigError):
            _collect(square_unless_seventh, 3, "test")


# ------------------------------------------------------------------ #
# Ergodic estimates
# ------------------------------------------------------------------ #

class TestErgodic:

    def test_deterministic_for_fixed_seed(self, dims3):
        powers = PowerProfile.equal(3, 10.0)
        opts = SolverOptions(max_iters=2000, restarts=2)
        a = estimate_ergodic('ia_projection', dims3, powers, trials=4, seed=11, solver_opts=opts)
        b = estimate_ergodic('ia_projection', dims3, powers, trials=4, seed=11, solver_opts=opts)
        assert a.sum_rate.mean == b.sum_rate.mean
        assert a.sum_rate.trials_discarded == b.sum_rate.trials_discarded

    @pytest.mark.parametrize("backend", ["thread", "process"])
    def test_worker_count_invariance(self, dims3, backend, monkeypatch):
        powers = PowerProfile.equal(3, 10.0)
        serial = simulate_wf_game(dims3, powers, trials=6, seed=3)
        monkeypatch.setattr(monte_carlo, "PARALLEL_BACKEND", backend)
        monkeypatch.setattr(monte_carlo, "THREADS", 3)
        threaded = simulate_wf_game(dims3, powers, trials=6, seed=3)
        assert [e.mean for e in serial.per_user] == [e.mean for e in threaded.per_user]
        assert serial.sum_rate.trials_discarded == threaded.sum_rate.trials_discarded

    def test_projection_matches_closed_form(self, dims3):
        powers = PowerProfile.equal(3, 10.0)
        results = simulate_ia(dims3, powers, trials=200, seed=21, solver_opts=SolverOptions(max_iters=5000))
        closed = shin_lee_rate(1, 1, 10.0)
        proj = results['ia_projection']
        assert within_ci(closed, proj.per_user[0])
        assert within_ci(3 * closed, proj.sum_rate)

    def test_optimum_dominates_projection_and_respects_cap(self, dims3):
        powers = PowerProfile.equal(3, 20.0)
        results = simulate_ia(dims3, powers, trials=30, seed=8, solver_opts=SolverOptions(max_iters=5000))
        opt, proj = results['ia_optimum'], results['ia_projection']
        assert opt.sum_rate.trials_used == proj.sum_rate.trials_used == 30
        cap = interference_free_cap(dims3, powers, 0)
        for k in range(3):
            assert opt.per_user[k].mean >= proj.per_user[k].mean - 1e-4
            assert opt.per_user[k].mean <= cap + 3 * opt.per_user[k].ci_halfwidth

    def test_game_estimate_accounting(self, dims3):
        result = simulate_wf_game(dims3, PowerProfile.equal(3, 5.0), trials=5, seed=0)
        assert result.method == 'wf_game'
        assert result.update_order == 'sequential'
        assert result.sum_rate.trials_used == 5
        assert 0.0 <= result.discard_fraction < 1.0
        assert result.sum_rate.mean == pytest.approx(sum(e.mean for e in result.per_user))

    def test_unknown_method(self, dims3):
        with pytest.raises(DomainError):
            estimate_ergodic('ia_bound_thm2', dims3, PowerProfile.equal(3, 0.0), trials=1)

    def test_invalid_trials(self, dims3):
        with pytest.raises(DomainError):
            simulate_ia(dims3, PowerProfile.equal(3, 0.0), trials=0)

    @pytest.mark.slow
    def test_seven_user_projection_sweep(self):
        dims = NetworkDims.symmetric(7, 7, 5, 1, 2)
        for snr_db in (0.0, 10.0, 20.0, 30.0):
            powers = PowerProfile.equal(7, snr_db)
            results = simulate_ia(dims, powers, trials=200, seed=int(snr_db))
            closed = shin_lee_rate(1, 2, powers.P[0])
            assert within_ci(7 * closed, results['ia_projection'].sum_rate), f"{snr_db} dB"

    @pytest.mark.slow
    @pytest.mark.parametrize("dims", [
        NetworkDims.symmetric(3, 2, 2, 1, 1),
        NetworkDims.symmetric(3, 5, 5, 2, 3),
    ], ids=["d1_dp1", "d2_dp3"])
    def test_projection_matches_closed_form_across_snr(self, dims):
        d, dprime = dims.d[0], dims.dprime[0]
        for snr_db in (0.0, 10.0, 20.0, 30.0):
            powers = PowerProfile.equal(dims.K, snr_db)
            result = estimate_ergodic('ia_projection', dims, powers, trials=500, seed=int(snr_db))
            closed = shin_lee_rate(d, dprime, powers.P[0] / d)
            assert within_ci(dims.K * closed, result.sum_rate), \
                f"{dims.describe()} at {snr_db} dB: {result.sum_rate.mean:.4f} vs {dims.K * closed:.4f}"

    @pytest.mark.slow
    def test_interference_bound_is_tight(self):
        dims = NetworkDims.symmetric(7, 7, 5, 1, 2)
        for snr_db in (0.0, 10.0, 20.0, 30.0):
            powers = PowerProfile.equal(7, snr_db)
            optimum = estimate_ergodic('ia_optimum', dims, powers, trials=300, seed=100 + int(snr_db))
            bound = sum(theorem2_bound(dims, powers, k) for k in range(7))
            mean, ci = optimum.sum_rate.mean, optimum.sum_rate.ci_halfwidth
            assert abs(bound - mean) <= 0.03 * mean + 3 * ci, f"{snr_db} dB: bound {bound:.3f}, mc {mean:.3f}"
            assert bound <= mean + 3 * ci

    @pytest.mark.slow
    def test_receive_diversity_orderings(self):
        diverse = NetworkDims.symmetric(7, 7, 5, 1, 2)
        crowded = NetworkDims.symmetric(11, 7, 5, 1, 1)
        sums = {}
        for snr_db in (10.0, 30.0):
            a = estimate_ergodic('ia_optimum', diverse, PowerProfile.equal(7, snr_db), trials=60, seed=1)
            b = estimate_ergodic('ia_optimum', crowded, PowerProfile.equal(11, snr_db), trials=60, seed=1)
            per_user_a = a.sum_rate.mean / 7
            per_user_b = b.sum_rate.mean / 11
            assert per_user_a > per_user_b, f"{snr_db} dB: {per_user_a:.3f} vs {per_user_b:.3f}"
            sums[snr_db] = (a.sum_rate.mean, b.sum_rate.mean)
        assert sums[30.0][1] > sums[30.0][0]

    @pytest.mark.slow
    @pytest.mark.parametrize("dims", [
        NetworkDims.symmetric(11, 7, 5, 1, 1),
        NetworkDims.symmetric(7, 7, 5, 1, 2),
    ], ids=["K11", "K7"])
    def test_alignment_beats_game_at_high_snr(self, dims):
        for snr_db in (15.0, 20.0, 30.0):
            powers = PowerProfile.equal(dims.K, snr_db)
            ia = estimate_ergodic('ia_optimum', dims, powers, trials=40, seed=3)
            game = estimate_ergodic('wf_game', dims, powers, trials=40, seed=3)
            assert ia.sum_rate.mean > game.sum_rate.mean, \
                f"{dims.describe()} at {snr_db} dB: IA {ia.sum_rate.mean:.2f}, game {game.sum_rate.mean:.2f}"
            assert game.discard_fraction < 0.2


# ------------------------------------------------------------------ #
# Oracles
# ------------------------------------------------------------------ #

class TestOracles:

    def test_interference_free_cap(self):
        dims = NetworkDims.symmetric(7, 7, 5, 1, 2)
        powers = PowerProfile.equal(7, 10.0)
        assert interference_free_cap(dims, powers, 0) == pytest.approx(shin_lee_rate(1, 5, 10.0))

    def test_csu_sampling_scalar(self):
        est = estimate_csu(1, 1, [10.0], trials=100_000, seed=4)
        assert within_ci(shin_lee_rate(1, 1, 10.0), est)
        assert est.trials_used == 100_000

    def test_csu_nats(self):
        bits = estimate_csu(1, 2, [3.0], trials=1000, seed=2)
        nats = estimate_csu(1, 2, [3.0], trials=1000, seed=2, unit="nats")
        assert nats.mean == pytest.approx(bits.mean * math.log(2.0), rel=1e-12)
