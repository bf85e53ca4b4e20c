#!/usr/bin/env python3
"""
Deep Field Deinterlacer
Synthesize training data, train the two-pathway network, deinterlace frame
sequences, and score or time every method from one command line.
"""

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from deint.cli import run
from deint.config import Settings, load_settings

logger = logging.getLogger(__name__)


def setup_logging(settings: Settings) -> None:
    """Console logging plus an optional rotating log file."""
    log_level = getattr(logging, settings.monitoring.log_level.upper(), logging.INFO)

    logging.basicConfig(
        level=log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    if settings.monitoring.log_to_file:
        try:
            log_file = Path(settings.monitoring.log_file_path)
            log_file.parent.mkdir(parents=True, exist_ok=True)

            file_handler = RotatingFileHandler(
                log_file,
                maxBytes=settings.monitoring.log_max_bytes,
                backupCount=settings.monitoring.log_backup_count
            )
            file_handler.setFormatter(
                logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
            )
            logging.getLogger().addHandler(file_handler)

            print(f"📝 Logging to file: {log_file}")

        except Exception as e:
            print(f"⚠️ Failed to set up file logging: {e}")


def main(argv=None) -> int:
    settings = load_settings()
    setup_logging(settings)

    try:
        return run(sys.argv[1:] if argv is None else argv, settings)
    except KeyboardInterrupt:
        print("\n🛑 Interrupted by user")
        return 1
    except Exception as e:
        print(f"\n❌ Fatal error: {e}")
        logger.error(f"Fatal error: {e}", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
