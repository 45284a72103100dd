import sys

from aerobat_guard.cli import main

sys.exit(main())
