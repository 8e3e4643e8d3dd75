"""
Utility functions for the IA receive-diversity toolkit.
"""
import math
from typing import Sequence

import numpy as np

try:
    from .config import INFO_UNIT
except ImportError:
    # Fallback for direct execution
    from config import INFO_UNIT


LN2 = math.log(2.0)


def to_unit(value_nats: float, unit: str = INFO_UNIT) -> float:
    """Convert a natural-log quantity to the configured information unit."""
    if unit == "bits":
        return value_nats / LN2
    if unit == "nats":
        return value_nats
    raise ValueError(f"Unknown information unit: {unit}")


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def substream(seed: int, *key: int) -> np.random.Generator:
    """
    Independent generator for a (seed, key...) pair.

    Streams depend only on the seed and the key, never on the order in
    which they are requested, so serial and threaded runs draw identical
    numbers.

    Args:
        seed: Top-level seed
        key: Spawn key, e.g. (trial_index, stream_id)

    Returns:
        A numpy Generator seeded from the pair
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(seq)


def complex_gaussian(rng: np.random.Generator, shape: Sequence[int]) -> np.ndarray:
    """i.i.d. CN(0, 1) draws: real and imaginary parts each with variance 1/2."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / math.sqrt(2.0)


def hermitian(A: np.ndarray) -> np.ndarray:
    """Conjugate transpose of the last two axes (works on stacks of matrices)."""
    return np.swapaxes(A.conj(), -1, -2)


def hermitian_part(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + hermitian(A))


def is_truncated_unitary(A: np.ndarray, tol: float) -> bool:
    """Check that the columns of A are orthonormal within tol."""
    gram = hermitian(A) @ A
    return bool(np.max(np.abs(gram - np.eye(A.shape[1]))) < tol)


def format_error_message(error: Exception) -> str:
    """
    Format an exception into a one-line message for the command line.

    Args:
        error: Exception to format

    Returns:
        Formatted error message
    """
    error_type = type(error).__name__
    error_msg = str(error)

    if isinstance(error, np.linalg.LinAlgError):
        return f"Linear algebra failure: {error_msg}"
    elif isinstance(error, OSError):
        return f"I/O error: {error_msg}"
    else:
        return f"{error_type}: {error_msg}"
