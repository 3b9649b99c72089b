import sys

from gahmm.cli import main

sys.exit(main())
