import sys

from ppas.cli import main

sys.exit(main())
