import sys

from atomreg.cli import main

sys.exit(main())
