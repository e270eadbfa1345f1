import sys

from cdii.cli import main

sys.exit(main())
