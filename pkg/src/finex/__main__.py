import sys

from finex.cli import main

sys.exit(main())
