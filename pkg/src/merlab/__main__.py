import sys

from merlab.cli import main

sys.exit(main())
