import sys

from ovlq.cli import main

sys.exit(main())
