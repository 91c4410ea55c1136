import sys

from factor_forge.cli import main

sys.exit(main())
