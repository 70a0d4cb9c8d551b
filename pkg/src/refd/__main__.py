import sys

from refd.cli import main

sys.exit(main())
