"""
Configuration settings for the IA receive-diversity toolkit.
"""
import os
from pathlib import Path

# ============================================================================
# INFORMATION UNIT
# ============================================================================
# All rates are reported in bits (log base 2). Set to "nats" to get natural-log
# values from every rate function instead.
INFO_UNIT = "bits"

# ============================================================================
# IA SOLVER (alternating leakage minimization)
# ============================================================================
SOLVER_MAX_ITERS = 10_000    # Iteration cap per restart
SOLVER_TOL = 1e-8            # Normalized leakage stopping threshold
SOLVER_RESTARTS = 3          # Random initializations tried per channel realization
ALIGN_TOL = 1e-3             # Per-link relative residual accepted as "aligned"
RANK_TOL_REL = 1e-6          # sigma_min(U^H H_ii V) threshold, relative to ||H_ii||_2
UNITARY_TOL = 1e-10          # Truncated-unitarity check

# ============================================================================
# WATERFILLING GAME
# ============================================================================
GAME_MAX_ITERS = 500         # Best-response sweeps before giving up
GAME_TOL = 1e-6              # max_k ||Q_k(t+1) - Q_k(t)||_F / P_k
GAME_UPDATE_ORDER = "sequential"

# ============================================================================
# MONTE-CARLO
# ============================================================================
DEFAULT_TRIALS = 2000               # Per SNR point (desk scale)
DISCARD_BUDGET_FACTOR = 10          # Draws allowed per requested trial
CI_Z = 1.959963984540054            # 95% two-sided normal quantile
TRIAL_BATCH = 64                    # Draws evaluated per parallel batch

# ============================================================================
# ANALYTIC RATE ENGINE
# ============================================================================
EIG_MERGE_RTOL = 1e-6        # |mu_i - mu_j| < rtol * mu_i -> merged
MAX_CHIANI_DIM = 16          # n, p cap in double precision
CANCELLATION_LIMIT = 1e6     # Tolerated loss of relative accuracy in the determinants
LOG_KERNEL_RTOL = 1e-10      # Closed-form log-kernel integrals vs. quadrature
SCALED_EXPINT_SWITCH = 500.0 # Above this z, e^z E_p(z) uses the asymptotic series
NORMALIZATION_TOL = 1e-6     # |K det(R0) - 1| accepted before the result is rejected

# ============================================================================
# SWEEPS AND PRESETS
# ============================================================================
SNR_GRID_DB = [2.5 * i for i in range(13)]   # 0:2.5:30 dB

IA_METHODS = ("ia_optimum", "ia_projection")
ANALYTIC_METHODS = ("ia_bound_thm2", "ia_projection_analytic")
GAME_METHODS = ("wf_game",)
ALL_METHODS = IA_METHODS + ANALYTIC_METHODS + GAME_METHODS

# Symmetric network presets: (K, N_T, N_R, d, d')
FIG1_CONFIG = (7, 7, 5, 1, 2)
FIG2_CONFIGS = [(11, 7, 5, 1, 1), (7, 7, 5, 1, 2)]

PRESETS = {
    'fig1': {
        'configs': [FIG1_CONFIG],
        'methods': ["ia_optimum", "ia_projection", "ia_bound_thm2", "ia_projection_analytic"],
    },
    'fig2': {
        'configs': FIG2_CONFIGS,
        'methods': ["ia_optimum", "ia_projection", "ia_bound_thm2", "ia_projection_analytic"],
    },
    'fig3': {
        'configs': FIG2_CONFIGS,
        'methods': ["ia_optimum", "ia_projection", "ia_bound_thm2", "ia_projection_analytic", "wf_game"],
    },
}

CSV_COLUMNS = [
    "snr_db", "method", "user", "rate_bits",
    "ci_halfwidth", "trials_used", "trials_discarded",
]

# ============================================================================
# EXIT CODES
# ============================================================================
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3

# ============================================================================
# DEBUG, THREADS & LOGGING
# ============================================================================
DEBUG = os.environ.get('IA_DMT_DEBUG', 'False').lower() == 'true'

# Workers for Monte-Carlo trials ("process" or "thread" pool); results never depend on either
THREADS = max(1, int(os.environ.get('IA_DMT_THREADS', '1') or 1))
PARALLEL_BACKEND = os.environ.get('IA_DMT_BACKEND', 'process').lower()

_log_dir = os.environ.get('IA_DMT_LOG_DIR')
LOG_DIR = Path(_log_dir) if _log_dir else None
if LOG_DIR is not None:
    LOG_DIR.mkdir(parents=True, exist_ok=True)
