import sys

from liqpde.cli import main

sys.exit(main())
