import sys

from agnostic_il.harness.cli import main

sys.exit(main())
