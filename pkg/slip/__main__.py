"""Entry point for ``python -m slip``."""

import sys

from slip.cli import main

sys.exit(main())
