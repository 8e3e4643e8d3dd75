"""
Network geometry, Rayleigh channel draws and per-realization mutual information.

A K-user MIMO interference channel: transmitter j has M_j antennas, receiver i
has N_i antennas, and H[i][j] (N_i x M_j) is the channel from transmitter j to
receiver i. User i sends d_i streams through a truncated unitary precoder V_i
and its receiver keeps a d'_i dimensional interference-free subspace U_i.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, TYPE_CHECKING

import numpy as np

try:
    from .config import INFO_UNIT
    from .exceptions import DimensionError, DomainError, NumericalError
    from .utils import complex_gaussian, db_to_linear, hermitian, hermitian_part, substream, to_unit
except ImportError:
    from config import INFO_UNIT
    from exceptions import DimensionError, DomainError, NumericalError
    from utils import complex_gaussian, db_to_linear, hermitian, hermitian_part, substream, to_unit

if TYPE_CHECKING:
    from ia_solver import IASolution


@dataclass(frozen=True)
class NetworkDims:
    """Antenna counts and IA subspace dimensions of every user."""

    K: int
    M: Tuple[int, ...]
    N: Tuple[int, ...]
    d: Tuple[int, ...]
    dprime: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'M', tuple(int(x) for x in self.M))
        object.__setattr__(self, 'N', tuple(int(x) for x in self.N))
        object.__setattr__(self, 'd', tuple(int(x) for x in self.d))
        object.__setattr__(self, 'dprime', tuple(int(x) for x in self.dprime))
        self.validate()

    @classmethod
    def symmetric(cls, K: int, n_t: int, n_r: int, d: int, dprime: int) -> "NetworkDims":
        return cls(K, (n_t,) * K, (n_r,) * K, (d,) * K, (dprime,) * K)

    def validate(self):
        if int(self.K) != self.K or self.K < 2:
            raise DimensionError(f"K must be an integer >= 2, got {self.K}")
        for name in ('M', 'N', 'd', 'dprime'):
            values = getattr(self, name)
            if len(values) != self.K:
                raise DimensionError(f"{name} has {len(values)} entries, expected K={self.K}")
            if any(v < 1 for v in values):
                raise DimensionError(f"{name} entries must be positive integers: {values}")
        for i in range(self.K):
            if self.d[i] > self.M[i]:
                raise DimensionError(f"user {i}: d={self.d[i]} exceeds M={self.M[i]}")
            if self.dprime[i] > self.N[i]:
                raise DimensionError(f"user {i}: d'={self.dprime[i]} exceeds N={self.N[i]}")

    @property
    def is_symmetric(self) -> bool:
        return all(len(set(v)) == 1 for v in (self.M, self.N, self.d, self.dprime))

    def describe(self) -> str:
        if self.is_symmetric:
            return (f"K={self.K}, {self.N[0]}x{self.M[0]}, "
                    f"d={self.d[0]}, d'={self.dprime[0]}")
        return f"K={self.K}, M={self.M}, N={self.N}, d={self.d}, d'={self.dprime}"


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """One realization of all K^2 channel matrices; H[i][j] is N_i x M_j."""

    dims: NetworkDims
    H: Tuple[Tuple[np.ndarray, ...], ...]
    seed: Optional[int] = None
    trial: Optional[int] = None

    def __post_init__(self):
        grid = tuple(tuple(np.array(h, dtype=complex) for h in row) for row in self.H)
        if len(grid) != self.dims.K or any(len(row) != self.dims.K for row in grid):
            raise DimensionError(f"channel grid must be {self.dims.K}x{self.dims.K}")
        for i, row in enumerate(grid):
            for j, h in enumerate(row):
                expected = (self.dims.N[i], self.dims.M[j])
                if h.shape != expected:
                    raise DimensionError(f"H[{i}][{j}] has shape {h.shape}, expected {expected}")
                h.setflags(write=False)
        object.__setattr__(self, 'H', grid)

    @property
    def K(self) -> int:
        return self.dims.K

    def scaled(self, factor: float) -> "ChannelSet":
        return ChannelSet(self.dims, [[factor * h for h in row] for row in self.H], self.seed, self.trial)


@dataclass(frozen=True)
class PowerProfile:
    """Transmit powers P_k and noise variance sigma^2, linear scale."""

    P: Tuple[float, ...]
    sigma2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'P', tuple(float(p) for p in self.P))
        if any(p <= 0 for p in self.P):
            raise DomainError(f"transmit powers must be positive: {self.P}")
        if self.sigma2 <= 0:
            raise DomainError(f"noise variance must be positive: {self.sigma2}")

    @classmethod
    def equal(cls, K: int, snr_db: float, sigma2: float = 1.0) -> "PowerProfile":
        """Sweep convention: SNR = P_k / sigma^2, identical for all users."""
        return cls((db_to_linear(snr_db) * sigma2,) * K, sigma2)


def snr_per_stream(powers: PowerProfile, dims: NetworkDims, k: int) -> float:
    """rho_k = P_k / (d_k sigma^2)."""
    return powers.P[k] / (dims.d[k] * powers.sigma2)


def draw_channels(dims: NetworkDims, seed: int, trial: Optional[int] = None) -> ChannelSet:
    """
    Draw i.i.d. CN(0, 1) entries for every H[i][j].

    Args:
        dims: Network dimensions
        seed: RNG seed
        trial: Optional trial index; (seed, trial) selects an independent substream

    Returns:
        ChannelSet, bit-reproducible for a fixed (seed, trial)
    """
    dims.validate()
    rng = substream(seed, trial, 0) if trial is not None else np.random.default_rng(seed)
    H = [[complex_gaussian(rng, (dims.N[i], dims.M[j])) for j in range(dims.K)]
         for i in range(dims.K)]
    return ChannelSet(dims, H, seed, trial)


def _check_solution_shapes(channels: ChannelSet, solution: "IASolution"):
    dims = channels.dims
    if len(solution.V) != dims.K or len(solution.U) != dims.K:
        raise DimensionError("solution does not hold one precoder and one receive basis per user")
    for i in range(dims.K):
        if solution.V[i].shape != (dims.M[i], dims.d[i]):
            raise DimensionError(f"V[{i}] has shape {solution.V[i].shape}, "
                                 f"expected {(dims.M[i], dims.d[i])}")
        if solution.U[i].shape != (dims.N[i], dims.dprime[i]):
            raise DimensionError(f"U[{i}] has shape {solution.U[i].shape}, "
                                 f"expected {(dims.N[i], dims.dprime[i])}")


def _logdet_hpd(A: np.ndarray) -> float:
    sign, value = np.linalg.slogdet(hermitian_part(A))
    if sign.real <= 0:
        raise NumericalError("matrix expected to be positive definite")
    return float(value)


def mi_from_covariances(channels: ChannelSet, Q: Sequence[np.ndarray], sigma2: float,
                        k: int, unit: str = INFO_UNIT) -> float:
    """
    Mutual information of user k with interference treated as colored Gaussian noise.

    I = log det(I + H_kk Q_k H_kk^H R^-1), R = sigma^2 I + sum_{i != k} H_ki Q_i H_ki^H,
    evaluated as log det(R + S) - log det(R).

    Args:
        channels: Channel realization
        Q: Transmit covariance of every user (M_i x M_i)
        sigma2: Noise variance
        k: User index

    Returns:
        Non-negative mutual information in the requested unit
    """
    dims = channels.dims
    if len(Q) != dims.K:
        raise DimensionError(f"expected {dims.K} covariances, got {len(Q)}")
    for i, q in enumerate(Q):
        if q.shape != (dims.M[i], dims.M[i]):
            raise DimensionError(f"Q[{i}] has shape {q.shape}, expected {(dims.M[i], dims.M[i])}")

    R = sigma2 * np.eye(dims.N[k], dtype=complex)
    for i in range(dims.K):
        if i != k:
            Hki = channels.H[k][i]
            R = R + Hki @ Q[i] @ hermitian(Hki)
    Hkk = channels.H[k][k]
    S = Hkk @ Q[k] @ hermitian(Hkk)

    value = _logdet_hpd(R + S) - _logdet_hpd(R)
    return to_unit(max(value, 0.0), unit)


def ia_covariances(solution: "IASolution", powers: PowerProfile) -> List[np.ndarray]:
    """Spatially white signalling inside each precoder: Q_i = (P_i/d_i) V_i V_i^H."""
    return [(powers.P[i] / V.shape[1]) * (V @ hermitian(V)) for i, V in enumerate(solution.V)]


def mi_optimum(channels: ChannelSet, solution: "IASolution", powers: PowerProfile,
               k: int, unit: str = INFO_UNIT) -> float:
    """I(s_k; y_k | H) for the optimum receiver on one realization."""
    _check_solution_shapes(channels, solution)
    return mi_from_covariances(channels, ia_covariances(solution, powers), powers.sigma2, k, unit)


def effective_channel(channels: ChannelSet, solution: "IASolution", k: int) -> np.ndarray:
    """H_bar_k = U_k^H H_kk V_k, the d'_k x d_k interference-free link."""
    return hermitian(solution.U[k]) @ channels.H[k][k] @ solution.V[k]


def mi_projection(channels: ChannelSet, solution: "IASolution", powers: PowerProfile,
                  k: int, unit: str = INFO_UNIT) -> float:
    """
    Mutual information of the projection receiver y_bar = U_k^H y.

    Evaluates log det(I + rho_k H_bar H_bar^H) whether or not the solution is
    aligned; residual interference is ignored by construction.
    """
    _check_solution_shapes(channels, solution)
    dims = channels.dims
    Hbar = effective_channel(channels, solution, k)
    rho = snr_per_stream(powers, dims, k)
    value = _logdet_hpd(np.eye(dims.dprime[k]) + rho * (Hbar @ hermitian(Hbar)))
    return to_unit(max(value, 0.0), unit)
