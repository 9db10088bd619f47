import sys

from qstbench.cli import main

sys.exit(main())
