"""
Properness of IA equation systems.

The alignment conditions U_i^H H_ij V_j = 0 split into scalar equations
E_ij^mn = u_m^[i]^H H_ij v_n^[j] = 0, one per (i != j, m <= d'_i, n <= d_j).
After removing the redundant degrees of freedom of each subspace, equation
E_ij^mn involves M_j - d_j variables of v_n^[j] and N_i - d'_i variables of
u_m^[i]. A system is proper when every subset of equations involves at least
as many variables as it has equations.

Properness is a heuristic for almost-sure feasibility, not a proof of it; the
alternating solver remains the ground truth.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

try:
    from .channel_model import NetworkDims
    from .exceptions import DomainError
    from .logger import logger
except ImportError:
    from channel_model import NetworkDims
    from exceptions import DomainError
    from logger import logger


PROPERNESS_NOTE = "proper systems are almost surely feasible (heuristic, unproven)"


@dataclass(frozen=True)
class Equation:
    """E_ij^mn: receiver i, transmitter j, receive column m, transmit column n (0-based)."""
    i: int
    j: int
    m: int
    n: int


@dataclass
class EquationSystem:
    """
    Scalar IA equations and their variable groups.

    Groups are keyed ('v', j, n) for precoder column n of transmitter j and
    ('u', i, m) for receive column m of receiver i. Scalar variables are
    numbered consecutively group after group.
    """
    dims: NetworkDims
    equations: List[Equation]
    group_sizes: dict
    group_offsets: dict

    @property
    def num_equations(self) -> int:
        return len(self.equations)

    @property
    def num_variables(self) -> int:
        return sum(self.group_sizes.values())

    def groups_of(self, eq: Equation) -> Tuple[tuple, tuple]:
        return ('v', eq.j, eq.n), ('u', eq.i, eq.m)

    def variables_of(self, eq: Equation) -> List[int]:
        """Scalar variable indices involved in one equation."""
        out = []
        for g in self.groups_of(eq):
            start = self.group_offsets[g]
            out.extend(range(start, start + self.group_sizes[g]))
        return out


@dataclass
class ProperReport:
    """
    Verdict of a properness test.

    margin is N_v - N_e for the symmetric closed form. For the general test it
    is N_v - N_e when proper and minus the matching deficiency otherwise, so
    margin >= 0 iff proper on both paths.
    """
    proper: bool
    margin: int
    witness: Optional[List[Equation]] = None
    note: str = PROPERNESS_NOTE
    details: dict = field(default_factory=dict)

    def summary(self) -> str:
        verdict = "proper" if self.proper else "improper"
        return f"{verdict}, margin {self.margin}"


def _warn_low_diversity(d: int, dprime: int, who: str = ""):
    if dprime < d:
        logger.warning(f"{who}d'={dprime} < d={d}: rank d is unachievable in the interference-free subspace")


def symmetric_margin(K: int, n_t: int, n_r: int, d: int, dprime: int) -> int:
    """d(N_T - d) + d'(N_R - d') - d d'(K - 1)."""
    return d * (n_t - d) + dprime * (n_r - dprime) - d * dprime * (K - 1)


def is_proper_symmetric(K: int, n_t: int, n_r: int, d: int, dprime: int) -> ProperReport:
    """
    Closed-form properness test for symmetric networks.

    Args:
        K: Number of users
        n_t: Transmit antennas per user
        n_r: Receive antennas per user
        d: Streams per user
        dprime: Receive subspace dimension per user

    Returns:
        ProperReport with margin d(N_T-d) + d'(N_R-d') - d d'(K-1)

    Raises:
        DomainError: If an argument is not positive or d > N_T, d' > N_R
    """
    if min(K, n_t, n_r, d, dprime) < 1:
        raise DomainError("all arguments must be positive")
    if d > n_t:
        raise DomainError(f"d={d} exceeds N_T={n_t}")
    if dprime > n_r:
        raise DomainError(f"d'={dprime} exceeds N_R={n_r}")
    _warn_low_diversity(d, dprime)

    margin = symmetric_margin(K, n_t, n_r, d, dprime)
    return ProperReport(proper=margin >= 0, margin=margin)


def count_equations(dims: NetworkDims) -> int:
    """N_e = sum_{i != j} d'_i d_j."""
    return sum(dims.dprime[i] * dims.d[j]
               for i in range(dims.K) for j in range(dims.K) if i != j)


def count_variables(dims: NetworkDims) -> int:
    """N_v = sum_k d_k (M_k - d_k) + d'_k (N_k - d'_k)."""
    return sum(dims.d[k] * (dims.M[k] - dims.d[k]) + dims.dprime[k] * (dims.N[k] - dims.dprime[k])
               for k in range(dims.K))


def build_equation_system(dims: NetworkDims) -> EquationSystem:
    """Enumerate the scalar equations and variable groups of an IA system."""
    dims.validate()
    for k in range(dims.K):
        _warn_low_diversity(dims.d[k], dims.dprime[k], who=f"user {k}: ")

    group_sizes = {}
    for j in range(dims.K):
        for n in range(dims.d[j]):
            group_sizes[('v', j, n)] = dims.M[j] - dims.d[j]
    for i in range(dims.K):
        for m in range(dims.dprime[i]):
            group_sizes[('u', i, m)] = dims.N[i] - dims.dprime[i]

    group_offsets = {}
    offset = 0
    for g, size in group_sizes.items():
        group_offsets[g] = offset
        offset += size

    equations = [Equation(i, j, m, n)
                 for i in range(dims.K) for j in range(dims.K) if i != j
                 for m in range(dims.dprime[i]) for n in range(dims.d[j])]

    return EquationSystem(dims, equations, group_sizes, group_offsets)


def _incidence_matrix(system: EquationSystem) -> csr_matrix:
    rows, cols = [], []
    for r, eq in enumerate(system.equations):
        for v in system.variables_of(eq):
            rows.append(r)
            cols.append(v)
    shape = (system.num_equations, max(system.num_variables, 1))
    data = np.ones(len(rows), dtype=np.int8)
    return csr_matrix((data, (rows, cols)), shape=shape)


def _deficient_set(system: EquationSystem, incidence: csr_matrix,
                   eq_match: np.ndarray, var_match: np.ndarray) -> List[int]:
    """
    Equations reachable from unmatched equations by alternating paths.

    The set S found this way satisfies |S| - |var(S)| = number of unmatched
    equations, the largest possible deficiency (Koenig).
    """
    seen_eq = set(int(r) for r in np.flatnonzero(eq_match < 0))
    seen_var = set()
    frontier = list(seen_eq)
    while frontier:
        nxt = []
        for r in frontier:
            for v in incidence.indices[incidence.indptr[r]:incidence.indptr[r + 1]]:
                v = int(v)
                if v in seen_var:
                    continue
                seen_var.add(v)
                partner = int(var_match[v])
                if partner >= 0 and partner not in seen_eq:
                    seen_eq.add(partner)
                    nxt.append(partner)
        frontier = nxt
    return sorted(seen_eq)


def is_proper_general(system: EquationSystem) -> ProperReport:
    """
    Properness test for arbitrary dimensions via maximum bipartite matching.

    By Hall's theorem every equation subset has at least as many variables as
    equations iff a matching saturates all equations.

    Args:
        system: Equation system from build_equation_system

    Returns:
        ProperReport; on failure the witness is a maximal deficient equation set
    """
    n_e = system.num_equations
    n_v = system.num_variables
    if n_e == 0:
        return ProperReport(proper=True, margin=n_v)

    incidence = _incidence_matrix(system)
    eq_match = maximum_bipartite_matching(incidence, perm_type='column')
    matched = int(np.count_nonzero(eq_match >= 0))
    deficiency = n_e - matched
    logger.debug(f"matching saturates {matched}/{n_e} equations ({n_v} variables)")

    if deficiency == 0:
        return ProperReport(proper=True, margin=n_v - n_e,
                            details={'num_equations': n_e, 'num_variables': n_v})

    var_match = np.full(incidence.shape[1], -1, dtype=int)
    for r, v in enumerate(eq_match):
        if v >= 0:
            var_match[v] = r
    witness_rows = _deficient_set(system, incidence, eq_match, var_match)
    witness = [system.equations[r] for r in witness_rows]
    return ProperReport(proper=False, margin=-deficiency, witness=witness,
                        details={'num_equations': n_e, 'num_variables': n_v,
                                 'deficiency': deficiency})


def is_proper_exhaustive(system: EquationSystem, max_equations: int = 20) -> ProperReport:
    """
    Check every equation subset directly (exponential; small systems only).

    Subsets are walked in increasing bitmask order; the union of variable
    groups of each mask extends the mask with its lowest bit cleared.
    """
    n_e = system.num_equations
    if n_e > max_equations:
        raise DomainError(f"exhaustive check limited to {max_equations} equations, got {n_e}")

    group_index = {g: b for b, g in enumerate(system.group_sizes)}
    sizes = [system.group_sizes[g] for g in system.group_sizes]
    eq_groups = []
    for eq in system.equations:
        gv, gu = system.groups_of(eq)
        eq_groups.append((1 << group_index[gv]) | (1 << group_index[gu]))

    union = [0] * (1 << n_e)
    n_vars = [0] * (1 << n_e)
    n_eqs = [0] * (1 << n_e)
    worst_mask, worst_gap = 0, 0
    for mask in range(1, 1 << n_e):
        low = mask & -mask
        bit = low.bit_length() - 1
        prev = mask ^ low
        added = eq_groups[bit] & ~union[prev]
        union[mask] = union[prev] | added
        count = n_vars[prev]
        while added:
            g = added & -added
            count += sizes[g.bit_length() - 1]
            added ^= g
        n_vars[mask] = count
        n_eqs[mask] = n_eqs[prev] + 1
        gap = n_eqs[mask] - count
        if gap > worst_gap:
            worst_mask, worst_gap = mask, gap

    if worst_gap == 0:
        return ProperReport(proper=True, margin=system.num_variables - n_e)
    witness = [system.equations[b] for b in range(n_e) if worst_mask >> b & 1]
    return ProperReport(proper=False, margin=-worst_gap, witness=witness)


@dataclass(frozen=True)
class DmtPoint:
    d: int
    dprime: int
    margin: int
    K: int

    @property
    def diversity(self) -> int:
        return self.dprime - self.d + 1

    @property
    def total_dof(self) -> int:
        return self.K * self.d

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.d, self.dprime, self.margin)


def enumerate_dmt_points(K: int, n_t: int, n_r: int) -> List[DmtPoint]:
    """
    All proper (d, d') with 1 <= d <= N_T and d <= d' <= N_R.

    Returns:
        Points sorted by d descending, then d' descending
    """
    if min(K, n_t, n_r) < 1:
        raise DomainError("K, N_T and N_R must be positive")
    points = []
    for d in range(1, n_t + 1):
        for dprime in range(d, n_r + 1):
            margin = symmetric_margin(K, n_t, n_r, d, dprime)
            if margin >= 0:
                points.append(DmtPoint(d, dprime, margin, K))
    points.sort(key=lambda p: (-p.d, -p.dprime))
    return points

