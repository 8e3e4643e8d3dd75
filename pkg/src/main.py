"""
Main entry point for the IA receive-diversity toolkit.
"""
import sys
import signal
from pathlib import Path

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))
sys.path.insert(0, str(Path(__file__).parent))

from cli import run
from logger import logger


def signal_handler(signum, frame):
    """Handle interrupt signals gracefully."""
    logger.info(f"Received signal {signum}, stopping")
    sys.exit(130)


def main() -> int:
    """Command-line entry point."""
    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)

    logger.debug(f"Arguments: {sys.argv[1:]}")
    try:
        return run(sys.argv[1:])
    except Exception:
        logger.exception("Fatal error in main")
        raise


if __name__ == "__main__":
    sys.exit(main())
