"""Run the experiment CLI with ``python -m dlsched``."""
import sys

from .cli import main

sys.exit(main())
