"""
Seeded Monte-Carlo estimation of ergodic rates.

Attempt a draws its channels from the (seed, a) substream and its solver
initializations from (seed, a, 1 + restart). Attempts whose IA solution or
waterfilling game does not converge are discarded and replaced by the next
attempt, so the accepted set (and every Estimate) depends only on the seed,
never on the number or kind of workers.
"""
import concurrent.futures
import functools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy import optimize

try:
    from .analytic_rates import shin_lee_rate
    from .channel_model import (
        ChannelSet, NetworkDims, PowerProfile, draw_channels, mi_from_covariances,
        mi_optimum, mi_projection, snr_per_stream
    )
    from .config import (
        CI_Z, DEFAULT_TRIALS, DISCARD_BUDGET_FACTOR, GAME_MAX_ITERS, GAME_METHODS,
        GAME_TOL, GAME_UPDATE_ORDER, IA_METHODS, INFO_UNIT, PARALLEL_BACKEND, THREADS,
        TRIAL_BATCH
    )
    from .exceptions import ConfigError, DimensionError, DomainError, NonConvergenceError, NumericalError
    from .feasibility import build_equation_system, is_proper_general
    from .ia_solver import SolverOptions, solve_alternating
    from .logger import logger
    from .utils import complex_gaussian, hermitian, hermitian_part, substream, to_unit
except ImportError:
    from analytic_rates import shin_lee_rate
    from channel_model import (
        ChannelSet, NetworkDims, PowerProfile, draw_channels, mi_from_covariances,
        mi_optimum, mi_projection, snr_per_stream
    )
    from config import (
        CI_Z, DEFAULT_TRIALS, DISCARD_BUDGET_FACTOR, GAME_MAX_ITERS, GAME_METHODS,
        GAME_TOL, GAME_UPDATE_ORDER, IA_METHODS, INFO_UNIT, PARALLEL_BACKEND, THREADS,
        TRIAL_BATCH
    )
    from exceptions import ConfigError, DimensionError, DomainError, NonConvergenceError, NumericalError
    from feasibility import build_equation_system, is_proper_general
    from ia_solver import SolverOptions, solve_alternating
    from logger import logger
    from utils import complex_gaussian, hermitian, hermitian_part, substream, to_unit


UPDATE_ORDERS = ("sequential", "simultaneous")


@dataclass
class Estimate:
    """Sample mean with a 95% normal-approximation confidence half-width."""

    mean: float
    trials_used: int
    trials_discarded: int
    ci_halfwidth: float
    seed: int

    @classmethod
    def from_samples(cls, samples: Sequence[float], discarded: int, seed: int) -> "Estimate":
        values = np.asarray(samples, dtype=float)
        n = values.size
        if n < 1:
            raise DomainError("an estimate needs at least one sample")
        mean = math.fsum(values) / n
        ci = CI_Z * float(np.std(values, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
        return cls(mean=mean, trials_used=n, trials_discarded=discarded, ci_halfwidth=ci, seed=seed)

    @property
    def draws(self) -> int:
        return self.trials_used + self.trials_discarded


@dataclass
class ErgodicResult:
    method: str
    per_user: List[Estimate]
    sum_rate: Estimate
    update_order: Optional[str] = None

    @property
    def discard_fraction(self) -> float:
        return self.sum_rate.trials_discarded / self.sum_rate.draws


@dataclass(frozen=True)
class GameOptions:
    max_iters: int = GAME_MAX_ITERS
    tol: float = GAME_TOL
    update_order: str = GAME_UPDATE_ORDER

    def __post_init__(self):
        if self.update_order not in UPDATE_ORDERS:
            raise DomainError(f"update order must be one of {UPDATE_ORDERS}, got {self.update_order}")


@dataclass
class WfGameOutcome:
    """Transmit covariances Q_i (M_i x M_i) reached by the best-response dynamics."""

    Q: List[np.ndarray]
    converged: bool
    iterations: int
    history: List[float] = field(default_factory=list)


# ============================================================================
# WATERFILLING GAME
# ============================================================================

def _water_level(inv_gains: np.ndarray, power: float) -> float:
    """Level mu with sum max(0, mu - 1/lambda_i) = P, bracketed then made exact on the active set."""
    lo = float(inv_gains.min())

    def excess(mu):
        return float(np.sum(np.maximum(0.0, mu - inv_gains))) - power

    # (lo + P) - lo can round below P, so grow the bracket until it holds the root
    hi = lo + power
    while excess(hi) < 0:
        hi += power
    mu = optimize.bisect(excess, lo, hi, xtol=1e-14 * hi, maxiter=200)
    active = (inv_gains < mu) | (inv_gains == lo)
    return (power + float(np.sum(inv_gains[active]))) / int(np.count_nonzero(active))


def waterfill_best_response(H: np.ndarray, R: np.ndarray, power: float) -> np.ndarray:
    """
    Covariance maximizing log det(I + H Q H^H R^-1) under tr(Q) <= P.

    Args:
        H: Direct channel (N x M)
        R: Interference-plus-noise covariance at the receiver (N x N)
        power: Transmit power budget P > 0

    Returns:
        Q = W diag(max(0, mu - 1/lambda_i)) W^H with H^H R^-1 H = W Lambda W^H

    Raises:
        NumericalError: If R is singular or not positive definite
    """
    if not power > 0:
        raise DomainError(f"power must be positive, got {power}")
    if R.shape != (H.shape[0], H.shape[0]):
        raise DimensionError(f"R has shape {R.shape}, expected {(H.shape[0], H.shape[0])}")
    try:
        factor = scipy.linalg.cho_factor(hermitian_part(R))
        gain = hermitian(H) @ scipy.linalg.cho_solve(factor, H)
        lam, W = np.linalg.eigh(hermitian_part(gain))
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
        raise NumericalError(f"interference-plus-noise covariance is singular: {e}")

    M = H.shape[1]
    top = float(lam.max()) if lam.size else 0.0
    positive = lam > 1e-12 * max(top, 1e-300)
    if not np.any(positive):
        return np.zeros((M, M), dtype=complex)

    inv_gains = 1.0 / lam[positive]
    level = _water_level(inv_gains, power)
    alloc = np.zeros(M)
    alloc[positive] = np.maximum(0.0, level - inv_gains)
    Q = (W * alloc) @ hermitian(W)
    return hermitian_part(Q)


def _interference_plus_noise(channels: ChannelSet, Q: Sequence[np.ndarray], sigma2: float, k: int) -> np.ndarray:
    R = sigma2 * np.eye(channels.dims.N[k], dtype=complex)
    for i in range(channels.K):
        if i != k:
            Hki = channels.H[k][i]
            R = R + Hki @ Q[i] @ hermitian(Hki)
    return R


def run_wf_game(channels: ChannelSet, powers: PowerProfile, opts: Optional[GameOptions] = None) -> WfGameOutcome:
    """
    Iterated best-response waterfilling from Q_i = 0.

    Each sweep updates users 0..K-1, in place (sequential) or all against the
    previous sweep (simultaneous). The game has converged once a sweep moves
    no covariance by more than tol * P_k in Frobenius norm; that confirming
    sweep is not counted in `iterations`.
    """
    opts = opts or GameOptions()
    dims = channels.dims
    Q = [np.zeros((dims.M[i], dims.M[i]), dtype=complex) for i in range(dims.K)]
    history = []

    for sweep in range(1, opts.max_iters + 1):
        previous = [q.copy() for q in Q]
        source = Q if opts.update_order == "sequential" else previous
        for k in range(dims.K):
            R = _interference_plus_noise(channels, source, powers.sigma2, k)
            Q[k] = waterfill_best_response(channels.H[k][k], R, powers.P[k])
        change = max(float(np.linalg.norm(Q[k] - previous[k], 'fro')) / powers.P[k] for k in range(dims.K))
        history.append(change)
        if change < opts.tol:
            logger.debug(f"waterfilling game converged after {sweep - 1} sweeps")
            return WfGameOutcome(Q=Q, converged=True, iterations=sweep - 1, history=history)

    logger.debug(f"waterfilling game did not converge in {opts.max_iters} sweeps (last change {history[-1]:.2e})")
    return WfGameOutcome(Q=Q, converged=False, iterations=opts.max_iters, history=history)


def game_rates(channels: ChannelSet, outcome: WfGameOutcome, powers: PowerProfile,
               unit: str = INFO_UNIT) -> List[float]:
    """Per-user mutual information with the game's covariances and interference as noise."""
    return [mi_from_covariances(channels, outcome.Q, powers.sigma2, k, unit) for k in range(channels.K)]


# ============================================================================
# TRIAL RUNNER
# ============================================================================

def _make_executor() -> Optional[concurrent.futures.Executor]:
    if THREADS <= 1:
        return None
    if PARALLEL_BACKEND == "thread":
        return concurrent.futures.ThreadPoolExecutor(max_workers=THREADS)
    if PARALLEL_BACKEND == "process":
        return concurrent.futures.ProcessPoolExecutor(max_workers=THREADS)
    raise ConfigError(f"IA_DMT_BACKEND must be 'process' or 'thread', got {PARALLEL_BACKEND!r}")


def _collect(evaluate: Callable[[int], Optional[object]], trials: int, method: str) -> Tuple[List[object], int]:
    """
    Accept the first `trials` successful attempts in attempt order.

    With the process backend `evaluate` must be picklable (a module-level
    function or a functools.partial of one).

    Returns:
        (accepted results, discarded attempts preceding the last accepted one)

    Raises:
        NonConvergenceError: If DISCARD_BUDGET_FACTOR * trials attempts do not suffice
    """
    budget = DISCARD_BUDGET_FACTOR * trials
    accepted, discarded, attempt = [], 0, 0
    executor = _make_executor()
    try:
        while len(accepted) < trials:
            if attempt >= budget:
                raise NonConvergenceError(method, len(accepted), discarded)
            batch = range(attempt, min(attempt + TRIAL_BATCH, budget))
            if executor:
                chunk = max(1, len(batch) // (4 * THREADS))
                results = executor.map(evaluate, batch, chunksize=chunk)
            else:
                results = map(evaluate, batch)
            for result in results:
                if len(accepted) == trials:
                    break
                if result is None:
                    discarded += 1
                else:
                    accepted.append(result)
            attempt = batch.stop
    finally:
        if executor:
            executor.shutdown(wait=True, cancel_futures=True)
    return accepted, discarded


def _warn_if_improper(dims: NetworkDims):
    report = is_proper_general(build_equation_system(dims))
    if not report.proper:
        logger.warning(f"IA requested on improper dimensions ({dims.describe()}, {report.summary()}); "
                       f"expect many discarded trials")


def _summarize(method: str, rates: List[List[float]], discarded: int, seed: int,
               update_order: Optional[str] = None) -> ErgodicResult:
    table = np.asarray(rates, dtype=float)
    per_user = [Estimate.from_samples(table[:, k], discarded, seed) for k in range(table.shape[1])]
    total = Estimate.from_samples(table.sum(axis=1), discarded, seed)
    return ErgodicResult(method=method, per_user=per_user, sum_rate=total, update_order=update_order)


def _ia_attempt(dims: NetworkDims, powers: PowerProfile, seed: int, solver_opts: SolverOptions,
                unit: str, attempt: int) -> Optional[Tuple[List[float], List[float]]]:
    channels = draw_channels(dims, seed, attempt)
    solution = solve_alternating(channels, dims, solver_opts, powers, seed)
    if not solution.converged:
        return None
    optimum = [mi_optimum(channels, solution, powers, k, unit) for k in range(dims.K)]
    projection = [mi_projection(channels, solution, powers, k, unit) for k in range(dims.K)]
    return optimum, projection


def _game_attempt(dims: NetworkDims, powers: PowerProfile, seed: int, game_opts: GameOptions,
                  unit: str, attempt: int) -> Optional[List[float]]:
    channels = draw_channels(dims, seed, attempt)
    outcome = run_wf_game(channels, powers, game_opts)
    if not outcome.converged:
        return None
    return game_rates(channels, outcome, powers, unit)


def simulate_ia(dims: NetworkDims, powers: PowerProfile, trials: int = DEFAULT_TRIALS, seed: int = 0,
                solver_opts: Optional[SolverOptions] = None, unit: str = INFO_UNIT) -> Dict[str, ErgodicResult]:
    """
    Optimum and projection receiver estimates from the same solved realizations.

    Returns:
        {'ia_optimum': ErgodicResult, 'ia_projection': ErgodicResult}
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    _warn_if_improper(dims)
    solver_opts = solver_opts or SolverOptions()

    start = time.time()
    evaluate = functools.partial(_ia_attempt, dims, powers, seed, solver_opts, unit)
    accepted, discarded = _collect(evaluate, trials, "ia")
    logger.info(f"IA: {len(accepted)} trials used, {discarded} discarded "
                f"({dims.describe()}, {time.time() - start:.2f}s)")
    return {
        'ia_optimum': _summarize('ia_optimum', [a[0] for a in accepted], discarded, seed),
        'ia_projection': _summarize('ia_projection', [a[1] for a in accepted], discarded, seed),
    }


def simulate_wf_game(dims: NetworkDims, powers: PowerProfile, trials: int = DEFAULT_TRIALS, seed: int = 0,
                     game_opts: Optional[GameOptions] = None, unit: str = INFO_UNIT) -> ErgodicResult:
    """Waterfilling-game estimate; non-converging realizations are redrawn."""
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    game_opts = game_opts or GameOptions()

    start = time.time()
    evaluate = functools.partial(_game_attempt, dims, powers, seed, game_opts, unit)
    accepted, discarded = _collect(evaluate, trials, "wf_game")
    result = _summarize('wf_game', accepted, discarded, seed, update_order=game_opts.update_order)
    logger.info(f"wf_game: {len(accepted)} trials used, {discarded} discarded "
                f"(nonconvergence {100 * result.discard_fraction:.1f}%, {time.time() - start:.2f}s)")
    return result


def estimate_ergodic(method: str, dims: NetworkDims, powers: PowerProfile, trials: int = DEFAULT_TRIALS,
                     seed: int = 0, solver_opts: Optional[SolverOptions] = None,
                     game_opts: Optional[GameOptions] = None, unit: str = INFO_UNIT) -> ErgodicResult:
    """
    Ergodic rate estimate of one method.

    Args:
        method: 'ia_optimum', 'ia_projection' or 'wf_game'
        dims: Network dimensions
        powers: Transmit powers and noise variance
        trials: Accepted realizations to average
        seed: Top-level seed

    Returns:
        ErgodicResult with one Estimate per user and one for the sum rate

    Raises:
        NonConvergenceError: If too many realizations had to be discarded
    """
    if method in IA_METHODS:
        return simulate_ia(dims, powers, trials, seed, solver_opts, unit)[method]
    if method in GAME_METHODS:
        return simulate_wf_game(dims, powers, trials, seed, game_opts, unit)
    raise DomainError(f"unknown simulated method: {method}")


# ============================================================================
# ORACLES
# ============================================================================

def interference_free_cap(dims: NetworkDims, powers: PowerProfile, k: int, unit: str = INFO_UNIT) -> float:
    """Ergodic rate of user k with its IA covariance and no interference at all."""
    d, n = dims.d[k], dims.N[k]
    return shin_lee_rate(min(d, n), max(d, n), snr_per_stream(powers, dims, k), unit)


def estimate_csu(n: int, p: int, phi_diag: Sequence[float], trials: int, seed: int,
                 unit: str = INFO_UNIT, chunk: int = 10_000) -> Estimate:
    """Direct sampling of E[log det(I_p + H Phi H^H)] with H p x n i.i.d. CN(0, 1)."""
    phi = np.asarray(phi_diag, dtype=float)
    if phi.shape != (n,):
        raise DimensionError(f"Phi diagonal has {phi.size} entries, expected {n}")
    samples = []
    for start in range(0, trials, chunk):
        count = min(chunk, trials - start)
        rng = substream(seed, start // chunk)
        H = complex_gaussian(rng, (count, p, n))
        A = np.eye(p) + (H * phi) @ np.conj(np.swapaxes(H, 1, 2))
        _, logdet = np.linalg.slogdet(A)
        samples.append(logdet)
    values = [to_unit(v, unit) for v in np.concatenate(samples)]
    return Estimate.from_samples(values, 0, seed)
