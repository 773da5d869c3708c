import sys

from pairmeet.cli import main

sys.exit(main())
