"""
Alternating leakage minimization for interference alignment with receive diversity.

Each receiver i keeps a d'_i dimensional subspace U_i that should be free of
interference, each transmitter j sends through a d_j dimensional precoder V_j.
The solver alternates between the forward network (update every U_i from the
interference covariance it sees) and the reciprocal network (channels H_ij^H,
the U_i acting as d'_i column precoders, update every V_j).
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

try:
    from .channel_model import ChannelSet, NetworkDims, PowerProfile, _check_solution_shapes
    from .config import (
        ALIGN_TOL, RANK_TOL_REL, SOLVER_MAX_ITERS, SOLVER_RESTARTS, SOLVER_TOL, UNITARY_TOL
    )
    from .exceptions import DimensionError, NumericalError
    from .logger import logger
    from .utils import complex_gaussian, hermitian, hermitian_part, is_truncated_unitary, substream
except ImportError:
    from channel_model import ChannelSet, NetworkDims, PowerProfile, _check_solution_shapes
    from config import (
        ALIGN_TOL, RANK_TOL_REL, SOLVER_MAX_ITERS, SOLVER_RESTARTS, SOLVER_TOL, UNITARY_TOL
    )
    from exceptions import DimensionError, NumericalError
    from logger import logger
    from utils import complex_gaussian, hermitian, hermitian_part, is_truncated_unitary, substream


@dataclass
class IASolution:
    """Truncated unitary precoders V_i (M_i x d_i) and receive bases U_i (N_i x d'_i)."""

    V: List[np.ndarray]
    U: List[np.ndarray]
    residual_leakage: float = math.inf
    iterations: int = 0
    converged: bool = False
    restart: int = 0
    history: Optional[List[float]] = None


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = SOLVER_MAX_ITERS
    tol: float = SOLVER_TOL
    restarts: int = SOLVER_RESTARTS
    rank_tol_rel: float = RANK_TOL_REL
    record_history: bool = False


@dataclass
class AlignmentReport:
    aligned: bool
    ranks_ok: bool
    per_link_residuals: Dict[Tuple[int, int], float] = field(default_factory=dict)
    min_singular_values: List[float] = field(default_factory=list)
    unitary: bool = True


def _orthonormal_columns(A: np.ndarray) -> np.ndarray:
    Q, _ = np.linalg.qr(A)
    return Q


def random_solution(dims: NetworkDims, rng: np.random.Generator) -> IASolution:
    """Random truncated unitary V_i and U_i from QR of Gaussian matrices."""
    V = [_orthonormal_columns(complex_gaussian(rng, (dims.M[i], dims.d[i]))) for i in range(dims.K)]
    U = [_orthonormal_columns(complex_gaussian(rng, (dims.N[i], dims.dprime[i]))) for i in range(dims.K)]
    return IASolution(V=V, U=U)


def leakage_weights(dims: NetworkDims, powers: Optional[PowerProfile] = None) -> np.ndarray:
    """Per-transmitter weights w_j = P_j / d_j of the forward covariance (P_j = 1 without powers)."""
    P = powers.P if powers is not None else (1.0,) * dims.K
    return np.array([P[j] / dims.d[j] for j in range(dims.K)], dtype=float)


def leakage_normalizer(channels: ChannelSet, weights: Optional[np.ndarray] = None) -> float:
    """Expected leakage of random subspaces: sum_{i != j} w_j ||H_ij||_F^2 d_j d'_i / (N_i M_j)."""
    dims = channels.dims
    total = 0.0
    for i in range(dims.K):
        for j in range(dims.K):
            if i != j:
                scale = dims.d[j] * dims.dprime[i] / (dims.N[i] * dims.M[j])
                if weights is not None:
                    scale *= weights[j]
                total += scale * float(np.linalg.norm(channels.H[i][j], 'fro') ** 2)
    return total


def _raw_leakage(channels: ChannelSet, V: List[np.ndarray], U: List[np.ndarray],
                 weights: Optional[np.ndarray] = None) -> float:
    K = channels.K
    total = 0.0
    for i in range(K):
        Ui_H = hermitian(U[i])
        for j in range(K):
            if i != j:
                w = weights[j] if weights is not None else 1.0
                total += w * float(np.linalg.norm(Ui_H @ channels.H[i][j] @ V[j], 'fro') ** 2)
    return total


def leakage(channels: ChannelSet, solution: IASolution) -> float:
    """
    Normalized interference leakage sum_i sum_{j != i} ||U_i^H H_ij V_j||_F^2.

    Divided by leakage_normalizer so that scaling the channels leaves it
    unchanged; zero iff every alignment condition holds exactly.
    """
    _check_solution_shapes(channels, solution)
    norm = leakage_normalizer(channels)
    if norm == 0.0:
        return 0.0
    return _raw_leakage(channels, solution.V, solution.U) / norm


def _smallest_eigvecs(Q: np.ndarray, count: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Invariant subspaces of the `count` smallest eigenvalues (ascending eigh ordering).

    Q may be a single matrix or a stack; returns (eigenvectors, summed eigenvalues).
    """
    try:
        vals, vecs = np.linalg.eigh(hermitian_part(Q))
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"eigendecomposition failed: {e}")
    return vecs[..., :count], np.maximum(vals[..., :count], 0.0).sum(axis=-1)


def interference_covariance(channels: ChannelSet, V: List[np.ndarray], weights: Sequence[float], i: int) -> np.ndarray:
    """Q_i = sum_{j != i} w_j H_ij V_j V_j^H H_ij^H at receiver i."""
    dims = channels.dims
    Q = np.zeros((dims.N[i], dims.N[i]), dtype=complex)
    for j in range(dims.K):
        if j != i:
            HV = channels.H[i][j] @ V[j]
            Q += weights[j] * (HV @ hermitian(HV))
    return Q


def reverse_interference_covariance(channels: ChannelSet, U: List[np.ndarray], j: int) -> np.ndarray:
    """Reciprocal network covariance at transmitter j: sum_{i != j} H_ij^H U_i U_i^H H_ij."""
    dims = channels.dims
    Q = np.zeros((dims.M[j], dims.M[j]), dtype=complex)
    for i in range(dims.K):
        if i != j:
            HU = hermitian(channels.H[i][j]) @ U[i]
            Q += HU @ hermitian(HU)
    return Q


class _LeakageProblem:
    """
    One channel realization prepared for the alternating steps.

    Both half-steps minimize the same weighted objective
    sum_i sum_{j != i} w_j ||U_i^H H_ij V_j||_F^2 / leakage_normalizer(w):
    the forward step exactly, the reverse step because w_j scales every
    term that involves V_j. The objective after a step is the sum of the
    retained eigenvalues, so no separate leakage evaluation is needed.

    Symmetric networks are stacked into a (K, K, N, M) array and every
    covariance and eigendecomposition of a half-step runs as one batched
    call; other networks loop over users.
    """

    def __init__(self, channels: ChannelSet, weights: np.ndarray):
        dims = channels.dims
        self.channels = channels
        self.dims = dims
        self.weights = weights
        self.norm = leakage_normalizer(channels, weights) or 1.0
        self.stacked = np.array(channels.H, dtype=complex) if dims.is_symmetric else None
        if self.stacked is not None:
            off = 1.0 - np.eye(dims.K)
            self.forward_mask = off * weights[None, :]
            self.reverse_mask = off

    def objective(self, V: List[np.ndarray], U: List[np.ndarray]) -> float:
        return _raw_leakage(self.channels, V, U, self.weights) / self.norm

    def forward(self, V: List[np.ndarray]) -> Tuple[List[np.ndarray], float]:
        """Receive subspaces U_i from the weighted interference covariances."""
        dims = self.dims
        if self.stacked is not None:
            HV = np.einsum('ijnm,jmd->ijnd', self.stacked, np.asarray(V))
            Q = np.einsum('ij,ijnd,ijkd->ink', self.forward_mask, HV, HV.conj(), optimize=True)
            vecs, retained = _smallest_eigvecs(Q, dims.dprime[0])
            return list(vecs), float(retained.sum()) / self.norm
        U, total = [], 0.0
        for i in range(dims.K):
            vecs, retained = _smallest_eigvecs(interference_covariance(self.channels, V, self.weights, i),
                                               dims.dprime[i])
            U.append(vecs)
            total += float(retained)
        return U, total / self.norm

    def reverse(self, U: List[np.ndarray]) -> Tuple[List[np.ndarray], float]:
        """Precoders V_j from the reciprocal network."""
        dims = self.dims
        if self.stacked is not None:
            HU = np.einsum('ijnm,ind->ijmd', self.stacked.conj(), np.asarray(U))
            Q = np.einsum('ij,ijmd,ijkd->jmk', self.reverse_mask, HU, HU.conj(), optimize=True)
            vecs, retained = _smallest_eigvecs(Q, dims.d[0])
            return list(vecs), float(np.dot(self.weights, retained)) / self.norm
        V, total = [], 0.0
        for j in range(dims.K):
            vecs, retained = _smallest_eigvecs(reverse_interference_covariance(self.channels, U, j), dims.d[j])
            V.append(vecs)
            total += self.weights[j] * float(retained)
        return V, total / self.norm


def _ranks_ok(channels: ChannelSet, V: List[np.ndarray], U: List[np.ndarray], rank_tol_rel: float) -> bool:
    return check_ranks(channels, IASolution(V=V, U=U), tol_rank=None, rank_tol_rel=rank_tol_rel)[0]


def check_ranks(channels: ChannelSet, solution: IASolution, tol_rank: Optional[float] = None,
                rank_tol_rel: float = RANK_TOL_REL) -> Tuple[bool, List[float]]:
    """
    Check rank(U_i^H H_ii V_i) = d_i for every user.

    Returns:
        (all ranks full, smallest singular value per user)
    """
    dims = channels.dims
    ok = True
    sigmas = []
    for i in range(dims.K):
        Hii = channels.H[i][i]
        block = hermitian(solution.U[i]) @ Hii @ solution.V[i]
        s = np.linalg.svd(block, compute_uv=False)
        smin = float(s[-1]) if dims.dprime[i] >= dims.d[i] else 0.0
        threshold = tol_rank if tol_rank is not None else rank_tol_rel * float(np.linalg.norm(Hii, 2))
        sigmas.append(smin)
        if smin <= threshold:
            ok = False
    return ok, sigmas


def _solve_once(problem: _LeakageProblem, opts: SolverOptions, rng: np.random.Generator,
                restart: int) -> IASolution:
    channels, dims = problem.channels, problem.dims
    init = random_solution(dims, rng)
    V, U = init.V, init.U
    history = [] if opts.record_history else None
    current = problem.objective(V, U)
    if history is not None:
        history.append(current)

    residual = math.inf
    iterations = 0
    for it in range(1, opts.max_iters + 1):
        iterations = it
        U, current = problem.forward(V)
        if history is not None:
            history.append(current)
        V, current = problem.reverse(U)
        if history is not None:
            history.append(current)

        # The weighted objective and the plain leakage differ by at most the weight spread
        if current < opts.tol:
            residual = leakage(channels, IASolution(V=V, U=U))
            if residual < opts.tol:
                break

    if not math.isfinite(residual):
        residual = leakage(channels, IASolution(V=V, U=U))
    converged = residual < opts.tol and _ranks_ok(channels, V, U, opts.rank_tol_rel)
    logger.debug(f"restart {restart}: leakage {residual:.3e} after {iterations} iterations "
                 f"(converged={converged})")
    return IASolution(V=V, U=U, residual_leakage=residual, iterations=iterations,
                      converged=converged, restart=restart, history=history)


def solve_alternating(channels: ChannelSet, dims: NetworkDims, opts: Optional[SolverOptions] = None,
                      powers: Optional[PowerProfile] = None, seed: Optional[int] = None) -> IASolution:
    """
    Find an IA solution by alternating minimization of the interference leakage.

    Args:
        channels: Channel realization
        dims: Network dimensions (must match the channels)
        opts: Iteration cap, leakage tolerance and number of restarts
        powers: Weights P_j/d_j in the forward covariance; P_j = 1 if omitted
        seed: Seed for the random initializations; defaults to the channel seed

    Returns:
        Best IASolution by (converged, lower leakage, earlier restart). Restarts
        stop at the first converged one. `history` holds the weighted objective,
        which equals the normalized leakage when all weights are equal.

    Raises:
        DimensionError: If dims do not match the channel set
        NumericalError: If an eigendecomposition fails
    """
    opts = opts or SolverOptions()
    if dims != channels.dims:
        raise DimensionError("dims do not match the channel set")
    problem = _LeakageProblem(channels, leakage_weights(dims, powers))

    base_seed = seed if seed is not None else (channels.seed or 0)
    trial = channels.trial if channels.trial is not None else 0

    best = None
    for r in range(max(1, opts.restarts)):
        rng = substream(base_seed, trial, 1 + r)
        candidate = _solve_once(problem, opts, rng, r)
        if best is None or (not best.converged and candidate.converged) or \
                (best.converged == candidate.converged and candidate.residual_leakage < best.residual_leakage):
            best = candidate
        if best.converged:
            break
    return best


def verify_alignment(channels: ChannelSet, solution: IASolution, tol_align: float = ALIGN_TOL,
                     tol_rank: Optional[float] = None) -> AlignmentReport:
    """
    Check the alignment and rank conditions of a solution.

    aligned: max_{i != j} ||U_i^H H_ij V_j||_F / ||H_ij||_F < tol_align
    ranks_ok: sigma_min(U_i^H H_ii V_i) > tol_rank for every i (default
    RANK_TOL_REL * ||H_ii||_2)
    unitary: every V_i and U_i has orthonormal columns within UNITARY_TOL
    """
    _check_solution_shapes(channels, solution)
    dims = channels.dims
    residuals = {}
    for i in range(dims.K):
        for j in range(dims.K):
            if i == j:
                continue
            h_norm = float(np.linalg.norm(channels.H[i][j], 'fro'))
            leak = float(np.linalg.norm(hermitian(solution.U[i]) @ channels.H[i][j] @ solution.V[j], 'fro'))
            residuals[(i, j)] = leak / h_norm if h_norm > 0 else 0.0
    aligned = max(residuals.values()) < tol_align if residuals else True
    ranks_ok, sigmas = check_ranks(channels, solution, tol_rank)
    unitary = all(is_truncated_unitary(m, UNITARY_TOL) for m in solution.V + solution.U)
    return AlignmentReport(aligned=aligned, ranks_ok=ranks_ok, per_link_residuals=residuals,
                           min_singular_values=sigmas, unitary=unitary)


def interference_basis(solution: IASolution, k: int) -> np.ndarray:
    """Orthonormal basis U_k^perp of the N_k - d'_k dimensional interference subspace."""
    return scipy.linalg.null_space(hermitian(solution.U[k]))


def interference_capture(channels: ChannelSet, solution: IASolution, k: int) -> float:
    """
    Share of the interference energy at receiver k that lands in its interference subspace.

    1.0 means perfect alignment for user k; 0.0 when d'_k = N_k leaves no such subspace.
    """
    _check_solution_shapes(channels, solution)
    W = interference_basis(solution, k)
    total = captured = 0.0
    for j in range(channels.K):
        if j != k:
            HV = channels.H[k][j] @ solution.V[j]
            total += float(np.linalg.norm(HV, 'fro') ** 2)
            if W.shape[1]:
                captured += float(np.linalg.norm(hermitian(W) @ HV, 'fro') ** 2)
    return captured / total if total > 0 else 1.0
