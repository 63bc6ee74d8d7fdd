import sys

from admercs.cli import main

sys.exit(main())
