"""
Closed-form ergodic rates under Rayleigh fading.

- exp_integral / exp_integral_scaled: E_p(z) and e^z E_p(z)
- shin_lee_rate: E[log det(I + rho H H^H)] for a d' x d Gaussian H (projection receiver)
- chiani_csu: E[log det(I_p + H Phi H^H)] for a p x n Gaussian H and diagonal Phi
- theorem2_bound: optimum-receiver approximation C_SU(N_k, d_k, Psi_k)

Every public rate is returned in the configured information unit.
"""
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np
from scipy import integrate, special

try:
    from .channel_model import NetworkDims, PowerProfile, snr_per_stream
    from .config import (
        CANCELLATION_LIMIT, EIG_MERGE_RTOL, INFO_UNIT, LOG_KERNEL_RTOL,
        MAX_CHIANI_DIM, NORMALIZATION_TOL, SCALED_EXPINT_SWITCH
    )
    from .exceptions import DomainError, NumericalPrecisionError
    from .logger import logger
    from .utils import to_unit
except ImportError:
    from channel_model import NetworkDims, PowerProfile, snr_per_stream
    from config import (
        CANCELLATION_LIMIT, EIG_MERGE_RTOL, INFO_UNIT, LOG_KERNEL_RTOL,
        MAX_CHIANI_DIM, NORMALIZATION_TOL, SCALED_EXPINT_SWITCH
    )
    from exceptions import DomainError, NumericalPrecisionError
    from logger import logger
    from utils import to_unit


# Error amplification the forward recurrence may suffer before falling back to quadrature
_MAX_RECURRENCE_GAIN = LOG_KERNEL_RTOL / np.finfo(float).eps


# ============================================================================
# EXPONENTIAL INTEGRALS
# ============================================================================

def _check_order_and_argument(p: int, z: float):
    if int(p) != p or p < 1:
        raise DomainError(f"order p must be a positive integer, got {p}")
    if not z > 0 or not math.isfinite(z):
        raise DomainError(f"E_p(z) requires a finite z > 0, got {z}")


def exp_integral(p: int, z: float) -> float:
    """E_p(z) = integral_1^inf e^(-z x) x^(-p) dx for z > 0."""
    _check_order_and_argument(p, z)
    return float(special.expn(int(p), z))


def exp_integral_scaled(p: int, z: float) -> float:
    """
    e^z E_p(z), finite for every z > 0.

    Direct product below SCALED_EXPINT_SWITCH, asymptotic series
    (1/z) sum_k (-1)^k (p)_k / z^k above it.
    """
    _check_order_and_argument(p, z)
    if z < SCALED_EXPINT_SWITCH:
        return float(math.exp(z) * special.expn(int(p), z))

    total = 0.0
    term = 1.0 / z
    for k in range(200):
        total += term
        term *= -(p + k) / z
        if abs(term) < 1e-17 * abs(total):
            break
    return total


# ============================================================================
# SHIN-LEE CLOSED FORM (PROJECTION RECEIVER)
# ============================================================================

def _shin_lee_coefficient(d: int, dprime: int, k: int, l: int, m: int) -> float:
    dd = dprime - d
    num = (-1) ** m * math.factorial(2 * l) * math.factorial(dd + m) \
        * math.comb(2 * k - 2 * l, k - l) * math.comb(2 * l + 2 * dd, 2 * l - m)
    den = 2 ** (2 * k - m) * math.factorial(l) * math.factorial(m) * math.factorial(dd + l)
    return num / den


def shin_lee_rate(d: int, dprime: int, rho: float, unit: str = INFO_UNIT) -> float:
    """
    Ergodic rate of a d' x d Rayleigh channel with per-stream SNR rho.

    Args:
        d: Number of streams (columns of H)
        dprime: Receive dimension (rows of H), d <= d'
        rho: SNR per stream, > 0

    Returns:
        E[log det(I + rho H H^H)]

    Raises:
        DomainError: If d > d' (swap the arguments) or rho <= 0
    """
    if int(d) != d or int(dprime) != dprime or d < 1 or dprime < 1:
        raise DomainError(f"d and d' must be positive integers, got ({d}, {dprime})")
    if d > dprime:
        raise DomainError(f"closed form needs d <= d', got d={d}, d'={dprime}; swap the arguments")
    if not rho > 0 or not math.isfinite(rho):
        raise DomainError(f"rho must be positive and finite, got {rho}")

    z = 1.0 / rho
    dd = dprime - d
    scaled = [exp_integral_scaled(p, z) for p in range(1, dd + 2 * d)]
    partial = np.cumsum(scaled)

    total = 0.0
    for k in range(d):
        for l in range(k + 1):
            for m in range(2 * l + 1):
                total += _shin_lee_coefficient(d, dprime, k, l, m) * partial[dd + m]
    return to_unit(max(total, 0.0), unit)


# ============================================================================
# EIGENVALUE PROFILES
# ============================================================================

@dataclass(frozen=True)
class EigProfile:
    """
    Distinct eigenvalues mu_1 > ... > mu_L of Phi^-1 with multiplicities.

    Build it through from_pairs or from_diagonal to get the canonical
    ordering and merging of near-coincident values.
    """

    mu: Tuple[float, ...]
    mult: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'mu', tuple(float(x) for x in self.mu))
        object.__setattr__(self, 'mult', tuple(int(x) for x in self.mult))
        if not self.mu or len(self.mu) != len(self.mult):
            raise DomainError("eigenvalues and multiplicities must be nonempty and of equal length")
        if any(not m > 0 for m in self.mu):
            raise DomainError(f"eigenvalues must be positive: {self.mu}")
        if any(m < 1 for m in self.mult):
            raise DomainError(f"multiplicities must be positive: {self.mult}")
        if any(a <= b for a, b in zip(self.mu, self.mu[1:])):
            raise DomainError(f"eigenvalues must be strictly descending: {self.mu}")

    @property
    def n(self) -> int:
        return sum(self.mult)

    @property
    def L(self) -> int:
        return len(self.mu)

    @classmethod
    def from_pairs(cls, mu: Sequence[float], mult: Sequence[int],
                   rtol: float = EIG_MERGE_RTOL) -> "EigProfile":
        """Sort (mu, m) pairs descending and merge values closer than rtol * mu."""
        if len(mu) != len(mult):
            raise DomainError("eigenvalues and multiplicities must have equal length")
        pairs = sorted(((float(u), int(m)) for u, m in zip(mu, mult) if m > 0), reverse=True)
        if not pairs:
            raise DomainError("empty eigenvalue profile")

        clusters = [[pairs[0]]]
        for u, m in pairs[1:]:
            head = clusters[-1][0][0]
            if abs(head - u) < rtol * head:
                clusters[-1].append((u, m))
            else:
                clusters.append([(u, m)])

        merged_mu, merged_mult = [], []
        for cluster in clusters:
            total = sum(m for _, m in cluster)
            merged_mu.append(sum(u * m for u, m in cluster) / total)
            merged_mult.append(total)
        if len(merged_mu) < len(pairs):
            logger.debug(f"merged {len(pairs)} eigenvalues into {len(merged_mu)} distinct values")
        return cls(tuple(merged_mu), tuple(merged_mult))

    @classmethod
    def from_diagonal(cls, phi_diag: Sequence[float], rtol: float = EIG_MERGE_RTOL) -> "EigProfile":
        """Profile of Phi^-1 for Phi = diag(phi_diag), phi_diag > 0."""
        values = [float(v) for v in phi_diag]
        if any(not v > 0 for v in values):
            raise DomainError(f"Phi must be positive definite: {values}")
        return cls.from_pairs([1.0 / v for v in values], [1] * len(values), rtol)


# ============================================================================
# LOG-KERNEL INTEGRALS
# ============================================================================

def _moment(a: int, mu: float) -> float:
    """integral_0^inf x^a e^(-mu x) dx = a! / mu^(a+1)."""
    return math.exp(special.gammaln(a + 1) - (a + 1) * math.log(mu))


def log_kernel_integral_quad(a: int, mu: float) -> float:
    """integral_0^inf x^a e^(-mu x) ln(1 + x) dx by adaptive quadrature."""
    if int(a) != a or a < 0 or not mu > 0:
        raise DomainError(f"log-kernel integral needs integer a >= 0 and mu > 0, got ({a}, {mu})")

    # t = mu x keeps the integrand O(1) for any mu
    def integrand(t):
        return t ** a * math.exp(-t) * math.log1p(t / mu)

    value, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    return value / mu ** (a + 1)


@lru_cache(maxsize=4096)
def log_kernel_integral(a: int, mu: float) -> float:
    """
    integral_0^inf x^a e^(-mu x) ln(1 + x) dx in closed form.

    With G_q = integral x^q e^(-mu x) / (1 + x) dx and J_q the log-kernel integral:
        G_0 = e^mu E_1(mu),  G_q = (q-1)!/mu^q - G_(q-1)
        J_0 = G_0 / mu,      J_q = (q J_(q-1) + G_q) / mu
    The G recurrence subtracts nearly equal numbers when mu >> q; once the
    accumulated error gain would exceed LOG_KERNEL_RTOL the value comes from
    quadrature instead.
    """
    if int(a) != a or a < 0 or not mu > 0:
        raise DomainError(f"log-kernel integral needs integer a >= 0 and mu > 0, got ({a}, {mu})")

    G = exp_integral_scaled(1, mu)
    J = G / mu
    largest = G
    for q in range(1, int(a) + 1):
        t = _moment(q - 1, mu)
        G = t - G
        largest = max(largest, t)
        if G <= 0 or largest / G > _MAX_RECURRENCE_GAIN:
            logger.warning(f"log-kernel recurrence unstable at a={a}, mu={mu:.4g}; using quadrature")
            return log_kernel_integral_quad(a, mu)
        J = (q * J + G) / mu
    return J


# ============================================================================
# CHIANI SINGLE-USER FORMULA
# ============================================================================

def _row_structure(eig: EigProfile) -> List[Tuple[float, int]]:
    """(mu_(e_i), a_i) for every row i; within a block a_i runs m-1, ..., 0."""
    rows = []
    for mu, m in zip(eig.mu, eig.mult):
        rows.extend((mu, m - 1 - r) for r in range(m))
    return rows


def _log_constant(n: int, p: int, eig: EigProfile) -> Tuple[int, float]:
    """Sign and log-magnitude of the normalizing constant K."""
    n_min = min(n, p)
    sign = -1 if (p * (n - n_min)) % 2 else 1
    log_k = -sum(special.gammaln(p - i + 1) for i in range(1, n_min + 1))
    for mu, m in zip(eig.mu, eig.mult):
        log_k += m * p * math.log(mu)
        log_k -= sum(special.gammaln(m - i + 1) for i in range(1, m + 1))
    for i in range(eig.L):
        for j in range(i + 1, eig.L):
            log_k -= eig.mult[i] * eig.mult[j] * math.log(eig.mu[i] - eig.mu[j])
    return sign, float(log_k)


def _r_matrix(n: int, p: int, rows: List[Tuple[float, int]], log_column: int = 0) -> np.ndarray:
    """R^(k) with the log kernel in column log_column (1-based); 0 gives the normalization matrix."""
    n_min = min(n, p)
    R = np.zeros((n, n))
    for r, (mu, a) in enumerate(rows):
        sign = -1.0 if a % 2 else 1.0
        for j in range(1, n_min + 1):
            e = p - n_min + j - 1 + a
            value = log_kernel_integral(e, mu) if j == log_column else _moment(e, mu)
            R[r, j - 1] = sign * value
        for j in range(n_min + 1, n + 1):
            q = n - j - a
            if q >= 0:
                R[r, j - 1] = math.factorial(n - j) / math.factorial(q) * mu ** q
    return R


def _slogdet_equilibrated(R: np.ndarray) -> Tuple[float, float]:
    """slogdet after scaling rows then columns to unit max-abs."""
    row_scale = np.max(np.abs(R), axis=1)
    row_scale[row_scale == 0] = 1.0
    S = R / row_scale[:, None]
    col_scale = np.max(np.abs(S), axis=0)
    col_scale[col_scale == 0] = 1.0
    S = S / col_scale[None, :]
    sign, logdet = np.linalg.slogdet(S)
    return float(sign), float(logdet + np.sum(np.log(row_scale)) + np.sum(np.log(col_scale)))


def chiani_csu(n: int, p: int, eig: EigProfile, unit: str = INFO_UNIT) -> float:
    """
    E[log det(I_p + H Phi H^H)] for H p x n with i.i.d. CN(0, 1) entries.

    Phi enters only through the eigenvalue profile of Phi^-1. The result is
    K * sum_k det(R^(k)); K is evaluated from gamma products (no pi factors)
    and checked against the exact identity K det(R^(0)) = 1; the sum is
    divided by the computed K det(R^(0)) so that K carries no rounding of its own.

    Args:
        n: Columns of H (= sum of multiplicities)
        p: Rows of H
        eig: Profile of Phi^-1

    Returns:
        Ergodic rate in the requested unit

    Raises:
        DomainError: If the multiplicities do not sum to n or n, p exceed MAX_CHIANI_DIM
        NumericalPrecisionError: If the normalization identity or the final sum
            lost too much accuracy
    """
    if int(n) != n or int(p) != p or n < 1 or p < 1:
        raise DomainError(f"n and p must be positive integers, got ({n}, {p})")
    if eig.n != n:
        raise DomainError(f"multiplicities sum to {eig.n}, expected n={n}")
    if max(n, p) > MAX_CHIANI_DIM:
        raise DomainError(f"n, p <= {MAX_CHIANI_DIM} supported in double precision, got ({n}, {p})")

    rows = _row_structure(eig)
    sign_k, log_k = _log_constant(n, p, eig)

    sign0, logdet0 = _slogdet_equilibrated(_r_matrix(n, p, rows))
    normalization = sign_k * sign0 * math.exp(log_k + logdet0)
    defect = abs(normalization - 1.0)
    if not math.isfinite(defect) or defect > NORMALIZATION_TOL:
        raise NumericalPrecisionError(
            f"normalization K det(R0) = {normalization:.6g} for n={n}, p={p}, mu={eig.mu}"
        )

    terms = []
    for k in range(1, min(n, p) + 1):
        sign, logdet = _slogdet_equilibrated(_r_matrix(n, p, rows, log_column=k))
        terms.append(sign_k * sign * math.exp(log_k + logdet) / normalization)
    total = math.fsum(terms)
    magnitude = math.fsum(abs(t) for t in terms)
    if total <= 0 or magnitude > CANCELLATION_LIMIT * total:
        raise NumericalPrecisionError(
            f"cancellation in C_SU sum: {magnitude:.3g} summed to {total:.3g}"
        )
    logger.debug(f"C_SU(n={n}, p={p}, L={eig.L}) = {total:.6g} nats (normalization defect {defect:.1e})")
    return to_unit(total, unit)


# ============================================================================
# IA RATE FORMULAS
# ============================================================================

@dataclass(frozen=True)
class PsiSpec:
    """Block-diagonal Psi_k = diag(rho_signal I_d', rho_interf I_(N-d'))."""

    d_k: int
    dprime_k: int
    N_k: int
    rho_signal: float
    rho_interf: float

    def __post_init__(self):
        if self.dprime_k > self.N_k:
            raise DomainError(f"d'={self.dprime_k} exceeds N={self.N_k}")
        if not (self.rho_signal > 0 and self.rho_interf > 0):
            raise DomainError("Psi rates must be positive")

    def diagonal(self) -> np.ndarray:
        return np.concatenate([np.full(self.dprime_k, self.rho_signal),
                               np.full(self.N_k - self.dprime_k, self.rho_interf)])

    def eig_profile(self) -> EigProfile:
        return EigProfile.from_pairs([1.0 / self.rho_signal, 1.0 / self.rho_interf],
                                     [self.dprime_k, self.N_k - self.dprime_k])


def _check_user(dims: NetworkDims, k: int):
    if not 0 <= k < dims.K:
        raise DomainError(f"user index {k} out of range for K={dims.K}")


def psi_spec(dims: NetworkDims, powers: PowerProfile, k: int) -> PsiSpec:
    """Psi_k for user k: P_k/(d_k sigma^2) on d'_k dimensions, P_k/(d_k(sigma^2 + sum_{i!=k} P_i)) on the rest."""
    _check_user(dims, k)
    interference = sum(p for i, p in enumerate(powers.P) if i != k)
    return PsiSpec(
        d_k=dims.d[k],
        dprime_k=dims.dprime[k],
        N_k=dims.N[k],
        rho_signal=powers.P[k] / (dims.d[k] * powers.sigma2),
        rho_interf=powers.P[k] / (dims.d[k] * (powers.sigma2 + interference)),
    )


def theorem2_bound(dims: NetworkDims, powers: PowerProfile, k: int, unit: str = INFO_UNIT) -> float:
    """
    Approximate lower bound C_SU(N_k, d_k, Psi_k) on the optimum-receiver ergodic rate.

    The expectation is over a d_k-stream signal seen through N_k receive
    dimensions, so H is d_k x N_k and Phi = Psi_k.
    """
    spec = psi_spec(dims, powers, k)
    return chiani_csu(dims.N[k], dims.d[k], spec.eig_profile(), unit)


def projection_rate_for_user(dims: NetworkDims, powers: PowerProfile, k: int,
                             unit: str = INFO_UNIT) -> float:
    """C(d_k, d'_k, rho_k); (d, d') are ordered so the closed form sees a tall matrix."""
    _check_user(dims, k)
    d, dprime = dims.d[k], dims.dprime[k]
    return shin_lee_rate(min(d, dprime), max(d, dprime), snr_per_stream(powers, dims, k), unit)


ANALYTIC_RATE_FUNCTIONS = {
    'ia_bound_thm2': theorem2_bound,
    'ia_projection_analytic': projection_rate_for_user,
}


def user_rates(method: str, dims: NetworkDims, powers: PowerProfile, unit: str = INFO_UNIT) -> List[float]:
    """Analytic rate of every user for one of ANALYTIC_RATE_FUNCTIONS."""
    try:
        func = ANALYTIC_RATE_FUNCTIONS[method]
    except KeyError:
        raise DomainError(f"unknown analytic method: {method}")
    return [func(dims, powers, k, unit) for k in range(dims.K)]
