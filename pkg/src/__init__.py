"""
ia-dmt - Interference alignment with receive diversity on the MIMO interference channel.
"""

__version__ = "1.0.0"
__author__ = "ia-dmt developers"

# Only import when used as a package
__all__ = [
    'NetworkDims', 'draw_channels', 'is_proper_symmetric', 'is_proper_general',
    'solve_alternating', 'shin_lee_rate', 'chiani_csu', 'theorem2_bound',
    'estimate_ergodic', 'run_wf_game', 'logger', 'setup_logger',
]

_LOCATIONS = {
    'NetworkDims': 'channel_model',
    'draw_channels': 'channel_model',
    'is_proper_symmetric': 'feasibility',
    'is_proper_general': 'feasibility',
    'solve_alternating': 'ia_solver',
    'shin_lee_rate': 'analytic_rates',
    'chiani_csu': 'analytic_rates',
    'theorem2_bound': 'analytic_rates',
    'estimate_ergodic': 'monte_carlo',
    'run_wf_game': 'monte_carlo',
    'logger': 'logger',
    'setup_logger': 'logger',
}


def __getattr__(name):
    """Lazy import to keep the package import cheap."""
    if name in _LOCATIONS:
        import importlib
        module = importlib.import_module(f".{_LOCATIONS[name]}", __name__)
        return getattr(module, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
