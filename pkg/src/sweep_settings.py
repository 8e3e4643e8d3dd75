"""
Sweep specification and its persistence to a flat JSON file.

File keys: K, M, N, d, dprime (per-user lists), snr_db, methods, trials,
seed, solver_max_iters, solver_tol, solver_restarts, game_max_iters,
game_tol, game_update_order. Missing keys take the defaults from config.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

try:
    from .channel_model import NetworkDims
    from .config import ALL_METHODS, DEFAULT_TRIALS, SNR_GRID_DB
    from .exceptions import ConfigError, IAToolkitError
    from .ia_solver import SolverOptions
    from .logger import logger
    from .monte_carlo import GameOptions
except ImportError:
    from channel_model import NetworkDims
    from config import ALL_METHODS, DEFAULT_TRIALS, SNR_GRID_DB
    from exceptions import ConfigError, IAToolkitError
    from ia_solver import SolverOptions
    from logger import logger
    from monte_carlo import GameOptions


@dataclass
class SweepSpec:
    """One network configuration swept over SNR = P_k / sigma^2 (equal for all users)."""

    dims: NetworkDims
    snr_db: List[float] = field(default_factory=lambda: list(SNR_GRID_DB))
    methods: List[str] = field(default_factory=lambda: list(ALL_METHODS))
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    solver: SolverOptions = field(default_factory=SolverOptions)
    game: GameOptions = field(default_factory=GameOptions)

    def validate(self):
        if not self.snr_db:
            raise ConfigError("snr_db must not be empty")
        if not self.methods:
            raise ConfigError("methods must not be empty")
        unknown = [m for m in self.methods if m not in ALL_METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {list(ALL_METHODS)}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")

    def to_dict(self) -> dict:
        return {
            'K': self.dims.K,
            'M': list(self.dims.M),
            'N': list(self.dims.N),
            'd': list(self.dims.d),
            'dprime': list(self.dims.dprime),
            'snr_db': [float(s) for s in self.snr_db],
            'methods': list(self.methods),
            'trials': self.trials,
            'seed': self.seed,
            'solver_max_iters': self.solver.max_iters,
            'solver_tol': self.solver.tol,
            'solver_restarts': self.solver.restarts,
            'game_max_iters': self.game.max_iters,
            'game_tol': self.game.tol,
            'game_update_order': self.game.update_order,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        try:
            dims = NetworkDims(int(data['K']), data['M'], data['N'], data['d'], data['dprime'])
        except KeyError as e:
            raise ConfigError(f"sweep spec is missing {e}")
        except (TypeError, ValueError, IAToolkitError) as e:
            raise ConfigError(f"invalid network dimensions: {e}")

        defaults_solver = SolverOptions()
        defaults_game = GameOptions()
        try:
            spec = cls(
                dims=dims,
                snr_db=[float(s) for s in data.get('snr_db', SNR_GRID_DB)],
                methods=[str(m) for m in data.get('methods', ALL_METHODS)],
                trials=int(data.get('trials', DEFAULT_TRIALS)),
                seed=int(data.get('seed', 0)),
                solver=SolverOptions(
                    max_iters=int(data.get('solver_max_iters', defaults_solver.max_iters)),
                    tol=float(data.get('solver_tol', defaults_solver.tol)),
                    restarts=int(data.get('solver_restarts', defaults_solver.restarts)),
                ),
                game=GameOptions(
                    max_iters=int(data.get('game_max_iters', defaults_game.max_iters)),
                    tol=float(data.get('game_tol', defaults_game.tol)),
                    update_order=str(data.get('game_update_order', defaults_game.update_order)),
                ),
            )
        except (TypeError, ValueError, IAToolkitError) as e:
            raise ConfigError(f"invalid sweep spec: {e}")
        spec.validate()
        return spec


_KNOWN_KEYS = set(SweepSpec(NetworkDims.symmetric(2, 1, 1, 1, 1)).to_dict())


class SweepSettings:
    """Reads and writes a SweepSpec as flat JSON."""

    def __init__(self, settings_file: str):
        self._file = Path(settings_file)

    @property
    def path(self) -> Path:
        return self._file

    def load_dict(self) -> dict:
        if not self._file.exists():
            raise ConfigError(f"sweep config not found: {self._file}")
        try:
            with open(self._file, 'r', encoding='utf-8') as f:
                stored = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"sweep config {self._file} is not valid JSON: {e}")
        if not isinstance(stored, dict):
            raise ConfigError(f"sweep config {self._file} must hold a JSON object")
        for key in stored:
            if key not in _KNOWN_KEYS:
                logger.warning(f"Ignoring unknown sweep setting '{key}' in {self._file}")
        logger.debug(f"Loaded sweep settings from {self._file}")
        return {k: v for k, v in stored.items() if k in _KNOWN_KEYS}

    def load(self) -> SweepSpec:
        return SweepSpec.from_dict(self.load_dict())

    def save(self, spec: SweepSpec):
        try:
            with open(self._file, 'w', encoding='utf-8') as f:
                json.dump(spec.to_dict(), f, indent=2)
            logger.debug(f"Saved sweep settings to {self._file}")
        except OSError as e:
            logger.error(f"Failed to save sweep settings: {e}")
            raise


def merge_overrides(base: Optional[dict], overrides: dict) -> dict:
    """Flag values (not None) replace file values."""
    merged = dict(base or {})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return merged
