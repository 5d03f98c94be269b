"""Entry point for ``python -m tendonkin``."""

import sys

from .cli import main

sys.exit(main())
