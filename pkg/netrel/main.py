"""
netrel - rare-event network reliability toolkit
Entry point: python -m netrel.main <command> ...
"""

import logging
import sys

from dotenv import load_dotenv

# Load environment variables before importing netrel modules
load_dotenv()

from netrel.cli.commands import main  # noqa: E402
from netrel.settings import Settings  # noqa: E402

logging.basicConfig(
    level=getattr(logging, Settings().log_level.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)


if __name__ == "__main__":
    sys.exit(main())
