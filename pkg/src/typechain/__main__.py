import sys

from typechain.cli import main

sys.exit(main())
