import sys

from aibom.cli import main

sys.exit(main())
