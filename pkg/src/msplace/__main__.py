import sys

from msplace.cli import main

sys.exit(main())
